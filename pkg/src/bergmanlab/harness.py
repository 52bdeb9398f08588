"""End-to-end checks of the weighted weak- and strong-type bounds.

Only chains whose every factor is explicit are asserted (the two-weight
strong bound for the sparse operators, and the per-arc class algebra);
bounds stated with an unspecified absolute constant are reported as ratios
lhs/rhs_explicit, where rhs_explicit collects every written factor.  The
left sides are computed for the exact two-grid sparse operator; a parallel
(approximate) kernel-quadrature left side can be recorded alongside but
never asserted.
"""

from __future__ import annotations

import math

import numpy as np

from . import boxops
from .geometry import GRID_SHIFTS, check_alpha
from .mesh import (Mesh, MeshFunction, OverlayFunction, embed_on_overlay,
                   lp_norm, overlay_mesh, weak_quasinorm)
from .operators import bergman_project, sparse_apply
from .reports import InequalityReport
from .weights import (ArcFamily, Weight, binf_constant, bp_constant,
                      product_weight, top_regularity_cw, unit_weight)

SHIFT0 = GRID_SHIFTS[0]
SHIFT13 = GRID_SHIFTS[1]


def conjugate_exponent(p: float) -> float:
    if p <= 1.0:
        raise ValueError("conjugate exponent needs p > 1")
    return p / (p - 1.0)


def two_weight_constant(u: Weight, v: Weight, p: float, r: float, t: float,
                        alpha: float, family: ArcFamily | None = None) -> float:
    """Family sup of <u^(-r'/p)>^(1/r') <v^(t'/p)>^(1/t') over boxes."""
    alpha = check_alpha(alpha)
    pp = conjugate_exponent(p)
    if not 1.0 < r < p:
        raise ValueError(f"need 1 < r < p, got r={r}, p={p}")
    if not 1.0 < t < pp:
        raise ValueError(f"need 1 < t < p', got t={t}, p'={pp}")
    mesh = u.mesh
    family = family or ArcFamily(mesh.depth)
    rp = conjugate_exponent(r)
    tp = conjugate_exponent(t)
    cm = mesh.cell_mass(alpha)
    au = u.values ** (-rp / p) * cm
    av = v.values ** (tp / p) * cm
    best = 0.0
    for shift in family.shifts:
        shifted = shift != SHIFT0
        mass = boxops.box_sums(mesh, cm, shifted)
        su = boxops.box_sums(mesh, au, shifted)
        sv = boxops.box_sums(mesh, av, shifted)
        for lev in range(min(family.depth, mesh.depth) + 1):
            prod = (su[lev] / mass[lev]) ** (1.0 / rp) \
                 * (sv[lev] / mass[lev]) ** (1.0 / tp)
            best = max(best, float(prod.max()))
    return best


def _sparse_ratio_parts(f: MeshFunction, v: Weight | None, alpha: float):
    """Overlay functions T_0(fv)/v and T_13(fv)/v (v omitted = unit)."""
    fv = f if v is None else f * v.fn
    t0 = sparse_apply(fv, SHIFT0, alpha).function
    t13 = sparse_apply(fv, SHIFT13, alpha).function
    if v is not None:
        vo = embed_on_overlay(v.fn, t0.overlay)
        t0 = t0 / vo
        t13 = t13 / vo
    return t0, t13


def weak_type_report(mode: str, f: MeshFunction, u: Weight | None,
                     v: Weight | None, alpha: float, p: float | None = None,
                     family: ArcFamily | None = None,
                     include_projection: bool = False) -> InequalityReport:
    """Mixed weak-type ratio for the two-grid sparse operator.

    Modes: "mixed_b1_bp(p)" (u in the maximal-ratio class, v in the p-class
    over u), "mixed_b1_b1" (v in the maximal-ratio class, u in it over v),
    "weak11" (single weight w = u, v unit).  lhs is the weak quasi-norm of
    T(fv)/v against uv, normalized by the integral of |f| against uv;
    rhs_explicit is the written bracket; no pass flag (the absolute constant
    is not specified).
    """
    alpha = check_alpha(alpha)
    mesh = f.mesh
    family = family or ArcFamily(mesh.depth)
    uw = u if u is not None else unit_weight(mesh)
    vw = v if v is not None else unit_weight(mesh)
    uv = product_weight(uw, vw)

    t0, t13 = _sparse_ratio_parts(f, v, alpha)
    tsum = t0 + t13
    denom = float(abs(f).integral(alpha, weight=uv.fn))
    if denom <= 0.0:
        raise ValueError("f must have positive integral against u v dA_alpha")
    lhs = weak_quasinorm(tsum, uv.fn, alpha) / denom

    binf_uv = binf_constant(uv, alpha, family, mode="two_grid")
    if mode.startswith("mixed_b1_bp"):
        if p is None:
            raise ValueError("mixed_b1_bp requires p")
        b1_u = bp_constant(uw, None, 1.0, family, alpha)
        bp_v_u = bp_constant(vw, uw, float(p), family, alpha)
        c_uv = top_regularity_cw(uv, family, alpha)
        rhs = ((1.0 + math.log(c_uv)) * binf_uv * b1_u
               * math.log(math.e + binf_uv * bp_v_u * b1_u))
        prov = {"c_uv": c_uv, "binf_uv": binf_uv, "b1_u": b1_u,
                "bp_v_u": bp_v_u}
    elif mode == "mixed_b1_b1":
        b1_v = bp_constant(vw, None, 1.0, family, alpha)
        b1_u_v = bp_constant(uw, vw, 1.0, family, alpha)
        binf_v = binf_constant(vw, alpha, family, mode="two_grid")
        c_v = top_regularity_cw(vw, family, alpha)
        rhs = ((1.0 + math.log(c_v)) * binf_v * b1_v * b1_u_v
               * math.log(math.e + b1_v * binf_uv))
        prov = {"c_v": c_v, "binf_v": binf_v, "b1_v": b1_v,
                "b1_u_over_v": b1_u_v, "binf_uv": binf_uv}
    elif mode == "weak11":
        b1_w = bp_constant(uw, None, 1.0, family, alpha)
        binf_w = binf_constant(uw, alpha, family, mode="two_grid")
        rhs = b1_w * math.log(math.e + binf_w)
        prov = {"b1_w": b1_w, "binf_w": binf_w}
    else:
        raise ValueError(f"unknown weak-type mode {mode!r}")

    if include_projection:
        fv = f if v is None else f * vw.fn
        sample = bergman_project(fv, alpha)
        vals = np.abs(sample.values)
        if v is not None:
            vals = vals / vw.values  # eval points are the centroids, heap order
        proj_fn = MeshFunction(mesh, vals)
        prov["projection_lhs"] = weak_quasinorm(proj_fn, uv.fn, alpha) / denom

    prov.update({"grid_mode": "two_grid"})
    return InequalityReport(
        theorem=mode, lhs=lhs, rhs_explicit=rhs,
        alpha=alpha, passed=None, weight_id=f"u={uw.weight_id};v={vw.weight_id}",
        p=p, depth=mesh.depth, provenance=prov,
    )


def explicit_sparse_constant(alpha: float, p: float, r: float, t: float) -> float:
    """Every-factor-explicit two-weight bound for ONE grid's sparse operator:
    K_a * 2^(1/r + 1/t) * (p/(p-r))^(1/p) * (p'/(p'-t))^(1/p') * [u,v]."""
    pp = conjugate_exponent(p)
    g = 4.0 ** (alpha + 1.0)
    k_alpha = g / (g - 3.0 ** (alpha + 1.0))
    return (k_alpha * 2.0 ** (1.0 / r + 1.0 / t)
            * (p / (p - r)) ** (1.0 / p)
            * (pp / (pp - t)) ** (1.0 / pp))


def strong_type_report(mode: str, f: MeshFunction, alpha: float,
                       p: float, q: float | None = None,
                       r: float | None = None, t: float | None = None,
                       w: Weight | None = None, u: Weight | None = None,
                       v: Weight | None = None,
                       family: ArcFamily | None = None) -> InequalityReport:
    """Strong-type norm ratios for the sparse operators.

    Modes: "bq_to_lp(p,q)" single weight; "two_weight(p,r,t)" ratio-only;
    "two_weight_explicit(p,r,t)" ASSERTED per grid against the fully
    explicit chain (and the two-grid sum against twice it);
    "mixed_lp(p)" and "mixed_lp_bq(p,q)" with target weight u v^(1-p).
    """
    alpha = check_alpha(alpha)
    mesh = f.mesh
    family = family or ArcFamily(mesh.depth)
    pp = conjugate_exponent(p)

    if mode == "bq_to_lp":
        if w is None or q is None:
            raise ValueError("bq_to_lp requires w and q")
        if not 1.0 <= q < p:
            raise ValueError(f"need 1 <= q < p, got q={q}, p={p}")
        src = tgt = w
        bq = bp_constant(w, None, q, family, alpha)
        binf = binf_constant(w, alpha, family, mode="two_grid")
        c_w = top_regularity_cw(w, family, alpha)
        rhs = c_w ** (1.0 / p) * bq ** (1.0 / p) * binf ** (1.0 / pp)
        prov = {"bq": bq, "binf": binf, "c_w": c_w}
        asserted = False
    elif mode in ("two_weight", "two_weight_explicit"):
        if u is None or v is None or r is None or t is None:
            raise ValueError(f"{mode} requires u, v, r, t")
        src, tgt = u, v
        uv_const = two_weight_constant(u, v, p, r, t, alpha, family)
        if mode == "two_weight":
            rhs = ((p / (p - r)) ** (1.0 / p)
                   * (pp / (pp - t)) ** (1.0 / pp) * uv_const)
            prov = {"two_weight_constant": uv_const}
            asserted = False
        else:
            rhs = explicit_sparse_constant(alpha, p, r, t) * uv_const
            prov = {"two_weight_constant": uv_const,
                    "chain_factor": explicit_sparse_constant(alpha, p, r, t)}
            asserted = True
    elif mode in ("mixed_lp", "mixed_lp_bq"):
        if u is None or v is None:
            raise ValueError(f"{mode} requires u and v")
        uv = product_weight(u, v)
        wt = Weight(u.fn * v.power(1.0 - p),
                    f"mixed({u.weight_id}|{v.weight_id};p={p:g})")
        src = tgt = wt
        binf_uv = binf_constant(uv, alpha, family, mode="two_grid")
        c_v = top_regularity_cw(v, family, alpha)
        c_uv = top_regularity_cw(uv, family, alpha)
        b1_v = bp_constant(v, None, 1.0, family, alpha)
        if mode == "mixed_lp":
            binf_v = binf_constant(v, alpha, family, mode="two_grid")
            b1_u_v = bp_constant(u, v, 1.0, family, alpha)
            rhs = (c_v ** (1.0 / pp) * c_uv ** (1.0 / p) * b1_v
                   * binf_v ** (1.0 / p) * b1_u_v ** (1.0 / p)
                   * binf_uv ** (1.0 / pp))
            prov = {"c_v": c_v, "c_uv": c_uv, "b1_v": b1_v, "binf_v": binf_v,
                    "b1_u_over_v": b1_u_v, "binf_uv": binf_uv}
        else:
            if q is None:
                raise ValueError("mixed_lp_bq requires q")
            binf_v = binf_constant(v, alpha, family, mode="two_grid")
            q_floor = 2.0 ** (alpha + 3.0) * binf_v
            if not q_floor <= q < p:
                raise ValueError(
                    f"need 2^(a+3)[v] <= q < p, got q={q}, floor={q_floor}, p={p}"
                )
            bq_u_v = bp_constant(u, v, q, family, alpha)
            rhs = (c_v ** (1.0 - q / p) * c_uv ** (1.0 / p) * b1_v
                   * bq_u_v ** (1.0 / p) * binf_uv ** (1.0 / pp))
            prov = {"c_v": c_v, "c_uv": c_uv, "b1_v": b1_v,
                    "bq_u_over_v": bq_u_v, "binf_uv": binf_uv,
                    "q_floor": q_floor}
        asserted = False
    else:
        raise ValueError(f"unknown strong-type mode {mode!r}")

    denom = lp_norm(f, src.fn, p, alpha)
    t0 = sparse_apply(f, SHIFT0, alpha).function
    t13 = sparse_apply(f, SHIFT13, alpha).function
    lhs0 = lp_norm(t0, tgt.fn, p, alpha) / denom
    lhs13 = lp_norm(t13, tgt.fn, p, alpha) / denom
    lhs = lp_norm(t0 + t13, tgt.fn, p, alpha) / denom
    prov.update({"lhs_grid0": lhs0, "lhs_grid13": lhs13})

    passed = None
    if asserted:
        # the chain bounds each single-grid operator; the two-grid sum is
        # bounded by twice the chain
        passed = bool(lhs0 <= rhs and lhs13 <= rhs and lhs <= 2.0 * rhs)

    wid = src.weight_id if src is tgt \
        else f"src={src.weight_id};tgt={tgt.weight_id}"
    return InequalityReport(
        theorem=mode, lhs=lhs, rhs_explicit=rhs, alpha=alpha, passed=passed,
        weight_id=wid, p=p, q=q, r=r, t=t, depth=mesh.depth, provenance=prov,
    )


def class_algebra_check(u: Weight, v: Weight, p: float, q: float,
                        alpha: float, family: ArcFamily | None = None,
                        test_functions=None) -> list[InequalityReport]:
    """Per-arc product-class and base-change inequalities.

    (i) For every family arc, the duality product of uv is at most
    [u]_1^p [v]_p(u); (ii) for every arc and every test function,
    <|f|^q>_(u) <= [v]_p(u)^(1/p) (<|f|^pq>_(uv))^(1/p).
    """
    alpha = check_alpha(alpha)
    if p < 1.0 or q <= 0.0:
        raise ValueError("need p >= 1 and q > 0")
    mesh = u.mesh
    family = family or ArcFamily(mesh.depth)
    uv = product_weight(u, v)
    cm = mesh.cell_mass(alpha)
    b1_u = bp_constant(u, None, 1.0, family, alpha)
    bp_v_u = bp_constant(v, u, p, family, alpha)
    guard = 1.0 + 1e-12  # float dust only; the margins are structural
    depth = min(family.depth, mesh.depth)

    # (i) product-class bound, per arc
    rhs_const = b1_u ** p * bp_v_u
    worst = 0.0
    ok = True
    for shift in family.shifts:
        shifted = shift != SHIFT0
        mass = boxops.box_sums(mesh, cm, shifted)
        s_uv = boxops.box_sums(mesh, uv.values * cm, shifted)
        if p > 1.0:
            s_dual = boxops.box_sums(
                mesh, uv.values ** (-1.0 / (p - 1.0)) * cm, shifted)
        for lev in range(depth + 1):
            a_uv = s_uv[lev] / mass[lev]
            if p > 1.0:
                dual = (s_dual[lev] / mass[lev]) ** (p - 1.0)
                lhs_arr = a_uv * dual
            else:
                lhs_arr = np.array([bp_constant(uv, None, 1.0, family, alpha)])
            worst = max(worst, float((lhs_arr / rhs_const).max()))
            ok &= bool(np.all(lhs_arr <= rhs_const * guard))
    rep1 = InequalityReport(
        theorem="product_class", lhs=worst, rhs_explicit=1.0, alpha=alpha,
        passed=ok, weight_id=f"u={u.weight_id};v={v.weight_id}", p=p,
        depth=mesh.depth, provenance={"b1_u": b1_u, "bp_v_u": bp_v_u},
    )

    # (ii) base-change bound, per arc and test function
    if test_functions is None:
        rng = np.random.default_rng(11)
        test_functions = [
            ("ones", MeshFunction(mesh, np.ones(mesh.ncells))),
            ("ramp", MeshFunction(mesh, np.linspace(0.1, 2.0, mesh.ncells))),
            ("random", MeshFunction(mesh, rng.lognormal(0.0, 1.0, mesh.ncells))),
        ]
    worst2, ok2 = 0.0, True
    factor = bp_v_u ** (1.0 / p)
    for fid, fv in test_functions:
        fq = np.abs(fv.values) ** q
        fpq = np.abs(fv.values) ** (p * q)
        for shift in family.shifts:
            shifted = shift != SHIFT0
            s_u = boxops.box_sums(mesh, u.values * cm, shifted)
            s_uv = boxops.box_sums(mesh, uv.values * cm, shifted)
            n_q = boxops.box_sums(mesh, fq * u.values * cm, shifted)
            n_pq = boxops.box_sums(mesh, fpq * uv.values * cm, shifted)
            for lev in range(depth + 1):
                lhs_arr = n_q[lev] / s_u[lev]
                rhs_arr = factor * (n_pq[lev] / s_uv[lev]) ** (1.0 / p)
                worst2 = max(worst2, float((lhs_arr / rhs_arr).max()))
                ok2 &= bool(np.all(lhs_arr <= rhs_arr * guard))
    rep2 = InequalityReport(
        theorem="base_change", lhs=worst2, rhs_explicit=1.0, alpha=alpha,
        passed=ok2, weight_id=f"u={u.weight_id};v={v.weight_id}", p=p, q=q,
        depth=mesh.depth, provenance={"bp_v_u": bp_v_u,
                                      "n_test_functions": len(test_functions)},
    )
    return [rep1, rep2]
