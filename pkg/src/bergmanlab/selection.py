"""Constructive stopping-time machinery: layered peeling of arc families,
exceptional subsets with certified conclusions, the Carleson packing check,
and the numeric two-index min-sum bound.

Everything is evaluated in exact cell arithmetic.  The stopping depth is the
fully explicit integer from the construction,

    n0 = min{ n >= [log(8 c) - log(1 - d)] / (-log d) * (1 + 2^(a+3) B) },

with d = (3/4)^(a+1); it certifies both that the selected subsets keep at
least 1/6 of the mass integral and that no point lies in more than n0 of
them.  At desk depths n0 usually exceeds the number of available layers, so
the subsets degenerate to the full boxes; that situation is flagged, never
silently passed.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from . import boxops
from .geometry import GRID_SHIFTS, DyadicArc, check_alpha, shrink_factor
from .mesh import Mesh, MeshFunction, overlay_mesh
from .reports import InequalityReport
from .weights import (ArcFamily, Weight, binf_constant, top_regularity_cw)

SHIFT0 = GRID_SHIFTS[0]


def layerize(arcs) -> list[list[DyadicArc]]:
    """Peel a same-grid arc set into layers of maximal (non-nested) arcs.

    Layer 0 holds the arcs not strictly contained in any other member;
    layer i the maximal arcs of what remains.  Equivalently the layer of an
    arc is the length of its longest chain of proper ancestors in the set.
    """
    arcs = list(arcs)
    if not arcs:
        return []
    shifts = {a.shift for a in arcs}
    if len(shifts) > 1:
        raise ValueError("layering requires arcs from a single grid")
    members = {(a.level, a.index): a for a in arcs}
    if len(members) != len(arcs):
        raise ValueError("duplicate arcs in the collection")
    layer_of: dict[tuple[int, int], int] = {}
    for a in sorted(arcs, key=lambda x: (x.level, x.index)):
        lay = 0
        lev, idx = a.level, a.index
        for up in range(lev):  # proper ancestors, shallower levels first
            anc = (up, idx >> (lev - up)) if up >= 0 else (up, 0)
            if anc in layer_of:
                lay = max(lay, layer_of[anc] + 1)
        # synthetic root ancestor
        if (-1, 0) in layer_of and lev >= 0:
            lay = max(lay, layer_of[(-1, 0)] + 1)
        layer_of[(a.level, a.index)] = lay
    n_layers = max(layer_of.values()) + 1
    layers: list[list[DyadicArc]] = [[] for _ in range(n_layers)]
    for key, lay in layer_of.items():
        layers[lay].append(members[key])
    for lst in layers:
        lst.sort(key=lambda a: (a.level, a.index))
    return layers


def stopping_depth(alpha: float, c_top: float, binf: float) -> int:
    """The explicit stopping depth n0 (natural-number minimum)."""
    alpha = check_alpha(alpha)
    d = shrink_factor(alpha)
    bound = ((math.log(8.0 * c_top) - math.log(1.0 - d)) / (-math.log(d))
             * (1.0 + 2.0 ** (alpha + 3.0) * binf))
    return max(1, int(math.ceil(bound)))


@dataclass
class ArcRecord:
    level: int
    index: int
    layer: int
    int_box: float
    int_except: float
    starved: bool
    passed: bool


@dataclass
class SelectionCertificate:
    """Layered selection with both conclusions checked per arc."""

    shift: Fraction
    j_band: int
    alpha: float
    n0: int
    c_top: float
    binf: float
    layers: list[list[tuple[int, int]]]
    records: list[ArcRecord]
    overlap_max: int
    overlap_ok: bool
    mass_identity_error: float
    provenance: dict = field(default_factory=dict)

    @property
    def all_passed(self) -> bool:
        return self.overlap_ok and all(r.passed for r in self.records)

    @property
    def empirical_overlap_scale(self) -> float:
        """n0 / ((1 + log c) B): the measured stand-in for the absolute
        factor in the stated overlap bound (reported, never asserted)."""
        return self.n0 / ((1.0 + math.log(self.c_top)) * self.binf)

    def to_json(self) -> str:
        return json.dumps({
            "shift": str(self.shift),
            "j_band": self.j_band,
            "alpha": self.alpha,
            "n0": self.n0,
            "c_top": self.c_top,
            "binf": self.binf,
            "layers": self.layers,
            "overlap_max": self.overlap_max,
            "overlap_ok": self.overlap_ok,
            "mass_identity_error": self.mass_identity_error,
            "empirical_overlap_scale": self.empirical_overlap_scale,
            "arcs": [{
                "level": r.level, "index": r.index, "layer": r.layer,
                "int_box": r.int_box, "int_except": r.int_except,
                "starved": r.starved, "passed": r.passed,
            } for r in self.records],
            "provenance": self.provenance,
        })


def _popcount(mask: np.ndarray, n_bits: int) -> np.ndarray:
    out = np.zeros_like(mask)
    for i in range(n_bits):
        out += (mask >> i) & 1
    return out


def _max_overlap(mesh: Mesh, member_layer: list[np.ndarray], n0: int,
                 shifted: bool, n_layers: int) -> int:
    """Max over points of the number of exceptional sets containing them.

    A point lies in the exceptional set of the layer-i arc of its ancestor
    chain unless the chain also meets layer i + n0 below it; with layers
    encoded as bits this is popcount(mask & ~(mask >> n0)).
    """
    if n_layers == 0:
        return 0
    ov = overlay_mesh(mesh) if shifted else None
    worst = 0
    for b in range(mesh.n_bands):
        if shifted:
            idx_b = ov.seg_d13[b]
        else:
            idx_b = np.arange(1 << b, dtype=np.int64)
        mask = np.zeros(len(idx_b), dtype=np.int64)
        for k in range(b + 1):
            lay = member_layer[k][idx_b >> (b - k)]
            present = lay >= 0
            mask |= np.where(present, 1 << np.maximum(lay, 0), 0)
        if n0 < 63:
            eff = mask & ~(mask >> n0)
        else:
            eff = mask
        worst = max(worst, int(_popcount(eff, n_layers).max()))
    return worst


def exceptional_sets(f: MeshFunction, w: Weight, shift: Fraction,
                     j_band: int, alpha: float,
                     family: ArcFamily | None = None) -> SelectionCertificate | None:
    """Build the layered selection for the arcs whose weighted averages of
    |f| sit in the dyadic band [2^-j-1, 2^-j], and check both conclusions.

    Returns None when no arc qualifies.  The exceptional subset of a layer-i
    arc is its box minus the layer-(i+n0) boxes inside it; the first
    conclusion is the 6-factor mass-integral lower bound, the second the
    overlap bound by n0 itself.
    """
    alpha = check_alpha(alpha)
    mesh = f.mesh
    family = family or ArcFamily(mesh.depth)
    shifted = shift != SHIFT0
    tag = "d13" if shifted else "d0"
    lo, hi = 2.0 ** -(j_band + 1), 2.0 ** -j_band

    avgs = boxops.weighted_box_averages(mesh, f, alpha, shifted, u=w)
    chosen: list[DyadicArc] = []
    for lev in range(min(family.depth, mesh.depth) + 1):
        sel = np.nonzero((avgs[lev] >= lo) & (avgs[lev] <= hi))[0]
        chosen.extend(DyadicArc(shift, lev, int(m)) for m in sel)
    if not chosen:
        return None

    layers = layerize(chosen)
    n_layers = len(layers)
    layer_of = {}
    for i, lst in enumerate(layers):
        for a in lst:
            layer_of[(a.level, a.index)] = i

    c_top = top_regularity_cw(w, family, alpha, mode=tag)
    binf = binf_constant(w, alpha, family, mode=tag)
    n0 = stopping_depth(alpha, c_top, binf)

    cm = mesh.cell_mass(alpha)
    int_fw = boxops.box_sums(mesh, np.abs(f.values) * w.values * cm, shifted)
    mass_a = boxops.box_sums(mesh, cm, shifted)

    # per arc: exceptional integral = box integral - removed-layer boxes
    records: list[ArcRecord] = []
    mass_err = 0.0
    for i, lst in enumerate(layers):
        removed_layer = i + n0
        removed = layers[removed_layer] if removed_layer < n_layers else []
        for a in lst:
            below = [b for b in removed if a.contains_arc(b)]
            int_box = float(int_fw[a.level][a.index])
            int_rm = sum(float(int_fw[b.level][b.index]) for b in below)
            int_exc = int_box - int_rm
            starved = not below
            passed = int_box <= 6.0 * int_exc
            records.append(ArcRecord(a.level, a.index, i, int_box, int_exc,
                                     starved, passed))
            # construction identity in plain masses
            m_box = float(mass_a[a.level][a.index])
            m_rm = sum(float(mass_a[b.level][b.index]) for b in below)
            m_exc = m_box - m_rm
            mass_err = max(mass_err, abs(m_exc + m_rm - m_box))

    member_layer = [np.full(1 << k, -1, dtype=np.int64)
                    for k in range(mesh.n_bands)]
    for (lev, idx), lay in layer_of.items():
        member_layer[lev][idx] = lay
    overlap = _max_overlap(mesh, member_layer, n0, shifted, n_layers)

    return SelectionCertificate(
        shift=shift, j_band=j_band, alpha=alpha, n0=n0,
        c_top=c_top, binf=binf,
        layers=[[(a.level, a.index) for a in lst] for lst in layers],
        records=records, overlap_max=overlap, overlap_ok=overlap <= n0,
        mass_identity_error=mass_err,
        provenance={"weight_id": w.weight_id, "depth": mesh.depth,
                    "band_lo": lo, "band_hi": hi, "n_arcs": len(chosen)},
    )


def packing_check(arcs, w: Weight, alpha: float,
                  family: ArcFamily | None = None) -> InequalityReport:
    """Carleson packing: sum of box masses against the union mass with the
    explicit factor 4^(a+1) B / (4^(a+1) - 3^(a+1)), B grid-restricted."""
    alpha = check_alpha(alpha)
    arcs = list(arcs)
    if not arcs:
        raise ValueError("packing check needs at least one arc")
    shifts = {a.shift for a in arcs}
    if len(shifts) > 1:
        raise ValueError("packing check requires arcs from a single grid")
    shift = shifts.pop()
    shifted = shift != SHIFT0
    mesh = w.mesh
    family = family or ArcFamily(mesh.depth)
    cm = mesh.cell_mass(alpha)
    box_w = boxops.box_sums(mesh, w.values * cm, shifted)
    lhs = sum(float(box_w[a.level][a.index]) for a in arcs)
    members = [np.zeros(1 << k, dtype=bool) for k in range(mesh.n_bands)]
    for a in arcs:
        members[a.level][a.index] = True
    union_w = boxops.union_box_mass(mesh, members, alpha, shifted, weight=w.fn)
    binf = binf_constant(w, alpha, family, mode="d13" if shifted else "d0")
    g = 4.0 ** (alpha + 1.0)
    const = g * binf / (g - 3.0 ** (alpha + 1.0))
    rhs = const * union_w
    return InequalityReport(
        theorem="carleson_packing", lhs=lhs, rhs_explicit=rhs, alpha=alpha,
        passed=bool(lhs <= rhs), weight_id=w.weight_id, depth=mesh.depth,
        provenance={"binf": binf, "union_mass": union_w,
                    "n_arcs": len(arcs), "grid": str(shift)},
    )


def min_sum_lhs(gamma1: float, gamma2: float, eta: float, delta: float,
                trunc: int = 64) -> tuple[float, float]:
    """Sum over k,j>=0 of min(g1 2^-k, eta g2 2^-j 2^((delta-1)k)).

    The inner j-sum has a closed form per k; the outer truncation tail is
    bounded by geometric-linear comparison and returned separately.
    """
    if min(gamma1, gamma2, eta) <= 0.0 or delta < 0.0:
        raise ValueError("parameters must satisfy g1, g2, eta > 0 and delta >= 0")
    if trunc < 64:
        raise ValueError("truncation must be at least 64")
    total = 0.0
    for k in range(trunc + 1):
        a = gamma1 * 2.0 ** -k
        b = eta * gamma2 * 2.0 ** ((delta - 1.0) * k)
        if b <= a:
            jstar = 0
        else:
            jstar = int(math.ceil(math.log2(b / a)))
        total += jstar * a + 2.0 * b * 2.0 ** -jstar
    # each k-slice beyond the truncation is at most (j* + 2) * g1 2^-k
    c = max(0.0, 1.0 + math.log2(eta * gamma2 / gamma1))
    tail = gamma1 * 2.0 ** -trunc * ((c + 2.0) + delta * (trunc + 2.0))
    return total + tail, tail


def min_sum_bound(gamma1: float, gamma2: float, eta: float, delta: float,
                  trunc: int = 64) -> tuple[float, float]:
    """(lhs, single-point fitted constant (lhs - eta/2)/(g1 log2(e+g2)))."""
    lhs, _ = min_sum_lhs(gamma1, gamma2, eta, delta, trunc)
    fit = (lhs - eta / 2.0) / (gamma1 * math.log2(math.e + gamma2))
    return lhs, fit


def fitted_min_sum_constant(delta: float, trunc: int = 64,
                            grid=None) -> float:
    """Max fitted constant over the default parameter sweep."""
    if grid is None:
        vals = [10.0 ** e for e in range(-2, 5)]
        grid = [(g1, g2, eta) for g1 in vals for g2 in vals
                for eta in (0.1, 1.0, 10.0)]
    best = -math.inf
    for g1, g2, eta in grid:
        _, fit = min_sum_bound(g1, g2, eta, delta, trunc)
        best = max(best, fit)
    return best
