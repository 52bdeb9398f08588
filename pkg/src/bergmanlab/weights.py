"""Weight families and their averaging-class constants.

All suprema over arcs are taken over the finite two-grid family of dyadic
arcs up to the mesh depth, so every constant here is a certified lower
bound for its continuous counterpart.  The grid-restricted variants (one
grid only) are exactly the quantities consumed by the dyadic covering
arguments, which is what makes the constant-explicit checks in
`reverse_holder_report` decidable rather than heuristic.
"""

from __future__ import annotations

import json
import math

import numpy as np

from . import boxops
from .geometry import GRID_SHIFTS, DyadicArc, check_alpha
from .mesh import Mesh, MeshFunction
from .reports import InequalityReport

SHIFT0 = GRID_SHIFTS[0]
SHIFT13 = GRID_SHIFTS[1]


class ArcFamily:
    """All arcs of both grids up to a depth (level-0 arcs carry the disk)."""

    def __init__(self, depth: int, shifts=GRID_SHIFTS):
        self.depth = int(depth)
        self.shifts = tuple(shifts)

    def arcs(self):
        for shift in self.shifts:
            for level in range(self.depth + 1):
                for m in range(1 << level):
                    yield DyadicArc(shift, level, m)

    def __len__(self):
        return len(self.shifts) * ((1 << (self.depth + 1)) - 1)

    def key(self):
        return (self.depth, self.shifts)


class Weight:
    """Strictly positive mesh function with cached class constants."""

    def __init__(self, fn: MeshFunction, weight_id: str,
                 family_tag: str = "custom", param=None):
        vals = fn.values
        if np.iscomplexobj(vals):
            raise ValueError("weights must be real-valued")
        if not np.all(np.isfinite(vals)) or not np.all(vals > 0.0):
            raise ValueError("weights must be strictly positive and finite")
        self.fn = fn
        self.weight_id = weight_id
        self.family_tag = family_tag
        self.param = param
        self._cache: dict = {}

    @property
    def mesh(self) -> Mesh:
        return self.fn.mesh

    @property
    def values(self) -> np.ndarray:
        return self.fn.values

    def power(self, expo: float) -> MeshFunction:
        return self.fn.power(expo)

    def cached(self, key, compute):
        got = self._cache.get(key)
        if got is None:
            got = compute()
            self._cache[key] = got
        return got

    def __repr__(self):
        return f"Weight({self.weight_id})"


def unit_weight(mesh: Mesh) -> Weight:
    from .mesh import unit_function
    return Weight(unit_function(mesh), "unit", family_tag="unit")


def _power_cell_values(mesh: Mesh, t: float, alpha: float) -> np.ndarray:
    """Exact dA_alpha cell averages of (1-|z|^2)^t."""
    a1 = alpha + 1.0
    s = alpha + t + 1.0
    u_lo = mesh.gap_lo * (2.0 - mesh.gap_lo)
    u_hi = mesh.gap_hi * (2.0 - mesh.gap_hi)
    num = (a1 / s) * (u_lo ** s - u_hi ** s)
    rho = mesh.radial_mass(alpha)
    out = np.empty(mesh.ncells)
    for b in range(mesh.n_bands):
        mesh.band(out, b)[:] = num[b] / rho[b]
    return out


def make_weight(spec: dict, mesh: Mesh, alpha: float) -> Weight:
    """Build a weight from its JSON-style spec.

    Families: {"family":"power","t":...}, {"family":"bump","level":...,
    "index":...,"a":...}, {"family":"random","seed":...,"ratio_cap":...},
    {"family":"product","of":[...]}.
    """
    alpha = check_alpha(alpha)
    fam = spec.get("family")
    if fam == "power":
        t = float(spec["t"])
        if t <= -(alpha + 1.0):
            raise ValueError(
                f"power exponent t={t} is not integrable against alpha={alpha}"
            )
        vals = _power_cell_values(mesh, t, alpha)
        return Weight(MeshFunction(mesh, vals), f"power(t={t:g})",
                      family_tag="power", param=t)
    if fam == "bump":
        level = int(spec["level"])
        index = int(spec["index"])
        a = float(spec["a"])
        if a <= 0.0:
            raise ValueError("bump amplitude must be positive")
        DyadicArc(SHIFT0, level, index)  # validates level/index
        vals = np.ones(mesh.ncells)
        for b in range(level, mesh.n_bands):
            sl = mesh.band(vals, b)
            width = 1 << (b - level)
            sl[index * width:(index + 1) * width] = a
        return Weight(MeshFunction(mesh, vals),
                      f"bump(l={level},m={index},a={a:g})",
                      family_tag="bump", param=(level, index, a))
    if fam == "random":
        seed = spec.get("seed")
        if seed is None:
            raise ValueError("random weights require a seed")
        cap = float(spec.get("ratio_cap", 2.0))
        if cap < 1.0:
            raise ValueError("ratio cap must be >= 1")
        rng = np.random.default_rng(int(seed))
        # iid log-uniform within a window of total log width log(cap), so the
        # value ratio of ANY two cells (adjacent ones included) is <= cap
        logs = rng.uniform(-0.5 * math.log(cap), 0.5 * math.log(cap), mesh.ncells)
        return Weight(MeshFunction(mesh, np.exp(logs)),
                      f"random(seed={int(seed)},cap={cap:g})",
                      family_tag="random", param=(int(seed), cap))
    if fam == "product":
        parts = [make_weight(s, mesh, alpha) for s in spec["of"]]
        if not parts:
            raise ValueError("product weight needs at least one factor")
        vals = np.ones(mesh.ncells)
        for p in parts:
            vals *= p.values
        wid = "product(" + "|".join(p.weight_id for p in parts) + ")"
        return Weight(MeshFunction(mesh, vals), wid, family_tag="product")
    raise ValueError(f"unknown weight family {fam!r}")


def weight_spec_from_json(text: str) -> dict:
    return json.loads(text)


def product_weight(u: Weight, v: Weight) -> Weight:
    if u.mesh != v.mesh:
        raise ValueError("mesh mismatch")
    return Weight(u.fn * v.fn, f"product({u.weight_id}|{v.weight_id})",
                  family_tag="product")


# ---------------------------------------------------------------------------
# class constants
# ---------------------------------------------------------------------------


def _avgs_per_grid(wvals: np.ndarray, mesh: Mesh, alpha: float,
                   base: Weight | None):
    """Per-grid box averages of wvals against (base) dA_alpha."""
    cm = mesh.cell_mass(alpha)
    bvals = base.values if base is not None else None
    num_terms = wvals * cm if bvals is None else wvals * bvals * cm
    den_terms = cm if bvals is None else bvals * cm
    out = {}
    for shift in GRID_SHIFTS:
        shifted = shift != SHIFT0
        num = boxops.box_sums(mesh, num_terms, shifted)
        den = boxops.box_sums(mesh, den_terms, shifted)
        out[shift] = [n / d for n, d in zip(num, den)]
    return out


def family_maximal_cellwise(mesh: Mesh, f: MeshFunction, alpha: float,
                            base: Weight | None = None) -> np.ndarray:
    """Per cell: max base-weighted |f| box average over boxes meeting it."""
    avgs = _avgs_per_grid(np.abs(f.values), mesh, alpha, base)
    chain0 = boxops.chain_max(avgs[SHIFT0])
    flat0 = np.empty(mesh.ncells)
    for b in range(mesh.n_bands):
        mesh.band(flat0, b)[:] = chain0[b]
    flat13 = boxops.cell_max_over_shifted(mesh, avgs[SHIFT13])
    return np.maximum(flat0, flat13)


def bp_constant(w: Weight, u: Weight | None, p: float, family: ArcFamily,
                alpha: float) -> float:
    """Family-restricted averaging-class constant (a certified lower bound).

    p = 1 takes the sup over cells of (family maximal of w wrt u) / w;
    p > 1 takes the sup over family arcs of the duality product
    <w> * <w^(-1/(p-1))>^(p-1), both against u dA_alpha.
    """
    if p < 1.0:
        raise ValueError(f"p must be >= 1, got {p}")
    alpha = check_alpha(alpha)
    base_id = u.weight_id if u is not None else "unit"
    key = ("bp", float(p), base_id, family.key(), alpha)

    def compute():
        mesh = w.mesh
        if p == 1.0:
            mx = family_maximal_cellwise(mesh, w.fn, alpha, u)
            return float(np.max(mx / w.values))
        dual = w.values ** (-1.0 / (p - 1.0))
        a_w = _avgs_per_grid(w.values, mesh, alpha, u)
        a_d = _avgs_per_grid(dual, mesh, alpha, u)
        best = 1.0
        for shift in family.shifts:
            for lev in range(family.depth + 1):
                prod = a_w[shift][lev] * a_d[shift][lev] ** (p - 1.0)
                best = max(best, float(prod.max()))
        return best

    return w.cached(key, compute)


def _grid_binf(w: Weight, alpha: float, family: ArcFamily, shift) -> float:
    """Grid-restricted maximal-integral constant on one grid."""
    mesh = w.mesh
    shifted = shift != SHIFT0
    cm = mesh.cell_mass(alpha)
    wmass = boxops.box_sums(mesh, w.values * cm, shifted)
    avgs = boxops.weighted_box_averages(mesh, w.fn, alpha, shifted)
    ints = boxops.rooted_power_integrals(
        avgs, boxops.band_cell_masses(mesh, alpha), 1.0
    )
    best = 1.0
    for lev in range(min(family.depth, mesh.depth) + 1):
        best = max(best, float((ints[lev] / wmass[lev]).max()))
    return best


def binf_constant(w: Weight, alpha: float, family: ArcFamily,
                  mode: str = "two_grid") -> float:
    """Maximal-integral class constant, grid-restricted or two-grid max.

    mode "d0"/"d13" restricts the boxes and the inner maximal operator to
    one grid (the form consumed by the dyadic covering proofs); "two_grid"
    takes the larger of the two, still a lower bound for the full constant.
    """
    alpha = check_alpha(alpha)
    if mode not in ("two_grid", "d0", "d13"):
        raise ValueError(f"unknown mode {mode!r}")
    key = ("binf", mode, family.key(), alpha)

    def compute():
        if mode == "d0":
            return _grid_binf(w, alpha, family, SHIFT0)
        if mode == "d13":
            return _grid_binf(w, alpha, family, SHIFT13)
        return max(_grid_binf(w, alpha, family, SHIFT0),
                   _grid_binf(w, alpha, family, SHIFT13))

    return w.cached(key, compute)


def top_regularity_cw(w: Weight, family: ArcFamily, alpha: float = 0.0,
                      mode: str = "two_grid") -> float:
    """Oscillation constant of the weight over family top halves.

    Unshifted tops meet exactly one cell each (ratio 1); shifted tops at
    level b straddle two angularly adjacent band-b cells.
    """
    key = ("cw", mode, family.key())

    def compute():
        if mode == "d0":
            return 1.0
        mesh = w.mesh
        worst = 1.0
        for lev in range(min(family.depth, mesh.depth) + 1):
            band = w.fn.band(lev)
            left = band
            right = np.roll(band, -1)
            ratio = np.maximum(left, right) / np.minimum(left, right)
            worst = max(worst, float(ratio.max()))
        return worst if mode in ("d13", "two_grid") else 1.0

    return w.cached(key, compute)


def reverse_holder_epsilon(alpha: float, binf: float) -> float:
    """Exponent bump strictly inside the admissible range."""
    return 1.0 / (2.0 ** (alpha + 3.0) * binf)


def reverse_holder_constant(alpha: float, c_top: float) -> float:
    """Explicit factor  2 * 4^(a+1) * c / (4^(a+1) - 3^(a+1))."""
    g = 4.0 ** (alpha + 1.0)
    return 2.0 * g * c_top / (g - 3.0 ** (alpha + 1.0))


def reverse_holder_report(w: Weight, alpha: float,
                          family: ArcFamily | None = None,
                          esi_samples: int = 32, seed: int = 0,
                          details: bool = False) -> list[InequalityReport]:
    """Constant-explicit higher-integrability checks on every dyadic arc.

    Per grid: (a) the reverse-Hoelder inequality with explicit constant and
    exponent bump eps = 1/(2^(a+3) B); (b) its rooted-maximal precursor with
    factor 2B; (c) the mass-comparison corollary on sampled union-of-cell
    subsets plus per-arc extreme slices (the top region: largest cell masses;
    the deepest band: smallest).  B and the top oscillation constant are the
    same-grid family versions throughout, which is what the dyadic covering
    proofs consume, so every check is expected to pass identically.
    """
    alpha = check_alpha(alpha)
    mesh = w.mesh
    family = family or ArcFamily(mesh.depth)
    cm = mesh.cell_mass(alpha)
    rng = np.random.default_rng(seed)
    reports: list[InequalityReport] = []
    fields = rng.random((esi_samples, mesh.ncells))
    probs = rng.random(esi_samples) ** 3
    depth = min(family.depth, mesh.depth)

    for shift in family.shifts:
        shifted = shift != SHIFT0
        tag = "d13" if shifted else "d0"
        B = binf_constant(w, alpha, family, mode=tag)
        c_top = top_regularity_cw(w, family, alpha, mode=tag)
        eps = reverse_holder_epsilon(alpha, B)
        rh_const = reverse_holder_constant(alpha, c_top)

        mass_a = boxops.box_sums(mesh, cm, shifted)
        int_w = boxops.box_sums(mesh, w.values * cm, shifted)
        int_wp = boxops.box_sums(mesh, w.values ** (1.0 + eps) * cm, shifted)
        avg_w = [i / m for i, m in zip(int_w, mass_a)]
        avg_wp = [i / m for i, m in zip(int_wp, mass_a)]

        # (a) reverse Hoelder on every arc
        worst_rh, worst_arc, ok_rh = 0.0, None, True
        per_arc = []
        for lev in range(depth + 1):
            lhs = avg_wp[lev] ** (1.0 / (1.0 + eps))
            rhs = rh_const * avg_w[lev]
            ratio = lhs / rhs
            if details:
                per_arc.append(ratio)
            i = int(np.argmax(ratio))
            if ratio[i] > worst_rh:
                worst_rh, worst_arc = float(ratio[i]), (lev, i)
            ok_rh &= bool(np.all(lhs <= rhs))
        reports.append(InequalityReport(
            theorem=f"reverse_holder[{tag}]", lhs=worst_rh, rhs_explicit=1.0,
            alpha=alpha, passed=ok_rh, weight_id=w.weight_id,
            depth=mesh.depth,
            provenance={"binf": B, "c_top": c_top, "eps": eps,
                        "worst_arc": worst_arc,
                        "per_arc": per_arc if details else None},
        ))

        # (b) rooted-maximal precursor with factor 2B
        avgs = boxops.weighted_box_averages(mesh, w.fn, alpha, shifted)
        ints = boxops.rooted_power_integrals(
            avgs, boxops.band_cell_masses(mesh, alpha), 1.0 + eps
        )
        worst_pre, ok_pre, worst_pre_arc = 0.0, True, None
        for lev in range(depth + 1):
            lhs = ints[lev] / mass_a[lev]
            rhs = 2.0 * B * avg_w[lev] ** (1.0 + eps)
            ratio = lhs / rhs
            i = int(np.argmax(ratio))
            if ratio[i] > worst_pre:
                worst_pre, worst_pre_arc = float(ratio[i]), (lev, i)
            ok_pre &= bool(np.all(lhs <= rhs))
        reports.append(InequalityReport(
            theorem=f"maximal_precursor[{tag}]", lhs=worst_pre,
            rhs_explicit=1.0, alpha=alpha, passed=ok_pre,
            weight_id=w.weight_id, depth=mesh.depth,
            provenance={"binf": B, "eps": eps, "worst_arc": worst_pre_arc},
        ))

        # (c) mass comparison: random subsets plus per-arc extreme slices
        expo = 1.0 / (1.0 + 2.0 ** (alpha + 3.0) * B)
        worst_esi, ok_esi = 0.0, True

        def check_subset(sub_a_terms, sub_w_terms):
            nonlocal worst_esi, ok_esi
            sub_a = boxops.box_sums(mesh, sub_a_terms, shifted)
            sub_w = boxops.box_sums(mesh, sub_w_terms, shifted)
            for lev in range(depth + 1):
                frac_w = sub_w[lev] / int_w[lev]
                frac_a = sub_a[lev] / mass_a[lev]
                rhs = rh_const * frac_a ** expo
                sel = frac_w > 0.0
                if not sel.any():
                    continue
                ratio = frac_w[sel] / rhs[sel]
                worst_esi = max(worst_esi, float(ratio.max()))
                ok_esi &= bool(np.all(ratio <= 1.0))

        for s in range(esi_samples):
            mask = fields[s] < probs[s]
            check_subset(cm * mask, w.values * cm * mask)
        # extreme slices: E = box . deepest band (smallest cell masses) and
        # E = box . own-level band (its top region, the largest masses)
        deep_mask = np.zeros(mesh.ncells, dtype=bool)
        mesh.band(deep_mask, mesh.depth)[:] = True
        check_subset(cm * deep_mask, w.values * cm * deep_mask)
        for lev in range(depth + 1):
            band_mask = np.zeros(mesh.ncells, dtype=bool)
            mesh.band(band_mask, lev)[:] = True
            sub_a = boxops.box_sums(mesh, cm * band_mask, shifted)[lev]
            sub_w = boxops.box_sums(mesh, w.values * cm * band_mask, shifted)[lev]
            frac_w = sub_w / int_w[lev]
            frac_a = sub_a / mass_a[lev]
            rhs = rh_const * frac_a ** expo
            ratio = frac_w / rhs
            worst_esi = max(worst_esi, float(ratio.max()))
            ok_esi &= bool(np.all(ratio <= 1.0))
        reports.append(InequalityReport(
            theorem=f"mass_comparison[{tag}]", lhs=worst_esi, rhs_explicit=1.0,
            alpha=alpha, passed=ok_esi, weight_id=w.weight_id,
            depth=mesh.depth,
            provenance={"binf": B, "c_top": c_top, "exponent": expo,
                        "samples": esi_samples, "seed": seed},
        ))
    return reports
