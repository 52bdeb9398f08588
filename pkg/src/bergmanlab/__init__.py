"""Numerical laboratory for weighted inequalities of averaging operators on
the unit disk: dyadic geometry, piecewise-constant function spaces, weight
class constants, sparse and maximal operators, a quadrature reproducing
kernel, stopping-time selections, and end-to-end inequality harnesses."""

__version__ = "0.1.0"

from .geometry import (DyadicArc, Region, GRID_SHIFTS, arc_navigate,
                       ancestors_of_point, arc_containing, arcs_at_level,
                       box_mass, disk_region, region_mass, top_mass,
                       top_share_lower_bound)
from .mesh import (Mesh, MeshFunction, OverlayFunction, OverlayMesh,
                   embed_on_overlay, indicator, lp_norm,
                   monomial_mesh_function, monomial_integral, overlay_mesh,
                   region_integral, sample_measure, unit_function,
                   weak_quasinorm, weighted_average)
from .weights import (ArcFamily, Weight, binf_constant, bp_constant,
                      make_weight, product_weight, reverse_holder_report,
                      top_regularity_cw, unit_weight)
from .operators import (ProjectionSample, SparseOutput, bergman_project,
                        dyadic_maximal, sparse_apply, sparse_sum,
                        sparse_domination_ratio)
from .selection import (SelectionCertificate, exceptional_sets,
                        fitted_min_sum_constant, layerize, min_sum_bound,
                        min_sum_lhs, packing_check, stopping_depth)
from .harness import (class_algebra_check, conjugate_exponent,
                      explicit_sparse_constant, strong_type_report,
                      two_weight_constant, weak_type_report)
from .sharpness import (SweepTable, extremal_search, sweep, weak11_ratio)
from .reports import CSV_COLUMNS, InequalityReport
