"""Empirical probe of weak-(1,1) growth against the maximal-ratio constant.

Sweeps weight families toward the integrability boundary, measures the best
weak-type ratio over a test-function corpus, and tabulates it against the
candidate growth laws x, x log(e+x), x^1.5.  A coordinate-ascent search
looks for configurations maximizing ratio / (B1 log(e+B1)).  Nothing here
asserts sharpness; the tables are the deliverable.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import GRID_SHIFTS, DyadicArc, check_alpha
from .mesh import Mesh, MeshFunction, indicator, weak_quasinorm
from .operators import sparse_sum
from .weights import ArcFamily, Weight, binf_constant, bp_constant, \
    make_weight, top_regularity_cw

SHIFT0 = GRID_SHIFTS[0]

PSI_CANDIDATES = {
    "x": lambda x: x,
    "x_log": lambda x: x * math.log(math.e + x),
    "x_1p5": lambda x: x ** 1.5,
}


def weak11_ratio(f: MeshFunction, w: Weight, alpha: float) -> float:
    """Weak quasi-norm of the two-grid sparse image over the L1 mass of f."""
    denom = float(abs(f).integral(alpha, weight=w.fn))
    return weak_quasinorm(sparse_sum(f, alpha), w.fn, alpha) / denom


def boundary_bump_corpus(mesh: Mesh, w: Weight | None = None):
    """(f_id, f) pairs: rim-top indicators plus weight-adapted cells."""
    J = mesh.depth
    out = []
    for lev, m in [(J, 0), (J, (1 << J) // 3), (J - 1, 0)]:
        sl = slice(mesh.offsets[lev], mesh.offsets[lev + 1])
        idx = mesh.offsets[lev] + m
        out.append((f"top_cell(l={lev},m={m})", indicator(mesh, [idx])))
    out.append(("center_cell", indicator(mesh, [0])))
    if w is not None:
        out.append((f"min_cell", indicator(mesh, [int(np.argmin(w.values))])))
        out.append((f"max_cell", indicator(mesh, [int(np.argmax(w.values))])))
    return out


@dataclass
class SweepRow:
    param: float
    b1: float
    binf: float
    c_top: float
    best_lhs: float
    best_f: str
    psi_ratios: dict
    resolution_limited: bool


@dataclass
class SweepTable:
    family: str
    alpha: float
    depth: int
    seed: int
    rows: list[SweepRow] = field(default_factory=list)

    def to_json(self) -> str:
        return json.dumps({
            "family": self.family, "alpha": self.alpha, "depth": self.depth,
            "seed": self.seed,
            "rows": [{
                "param": r.param, "b1": r.b1, "binf": r.binf,
                "c_top": r.c_top, "best_lhs": r.best_lhs, "best_f": r.best_f,
                "psi_ratios": r.psi_ratios,
                "resolution_limited": r.resolution_limited,
                "log_b1": math.log(r.b1), "log_lhs": math.log(r.best_lhs),
            } for r in self.rows],
        })

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            out = csv.writer(fh)
            cols = ["param", "b1", "binf", "c_top", "best_lhs", "best_f",
                    *(f"ratio_{k}" for k in PSI_CANDIDATES),
                    "resolution_limited", "log_b1", "log_lhs"]
            out.writerow(cols)
            for r in self.rows:
                out.writerow([
                    repr(r.param), repr(r.b1), repr(r.binf), repr(r.c_top),
                    repr(r.best_lhs), r.best_f,
                    *(repr(r.psi_ratios[k]) for k in PSI_CANDIDATES),
                    str(r.resolution_limited),
                    repr(math.log(r.b1)), repr(math.log(r.best_lhs)),
                ])


def _power_margins(alpha: float, depth: int, n_points: int) -> list[float]:
    """Margins 0.05 * 2^-i above the integrability boundary, floored at the
    mesh resolution 2^-depth."""
    floor = 2.0 ** -depth
    out = []
    for i in range(n_points):
        m = 0.05 * 2.0 ** -i
        if m < floor:
            break
        out.append(m)
    if len(out) < 2:
        raise ValueError("sweep needs at least two resolvable points")
    return out


def sweep(family: str, alpha: float, depth: int, seed: int = 0,
          n_points: int = 6, f_corpus=None) -> SweepTable:
    """Weight sweep toward the class blow-up with per-point best ratios."""
    alpha = check_alpha(alpha)
    mesh = Mesh(depth)
    fam = ArcFamily(depth)
    fam_next = ArcFamily(depth + 1)
    table = SweepTable(family, alpha, depth, seed)
    if family == "power":
        specs = [{"family": "power", "t": -(alpha + 1.0) + m}
                 for m in _power_margins(alpha, depth, n_points)]
    elif family == "random-spiked":
        rng = np.random.default_rng(seed)
        specs = [{"family": "product", "of": [
            {"family": "random", "seed": int(rng.integers(2 ** 31)),
             "ratio_cap": 2.0},
            {"family": "bump", "level": depth - 1,
             "index": int(rng.integers(1 << (depth - 1))), "a": 4.0 ** (i + 1)},
        ]} for i in range(n_points)]
    else:
        raise ValueError(f"unknown sweep family {family!r}")

    for spec in specs:
        w = make_weight(spec, mesh, alpha)
        b1 = bp_constant(w, None, 1.0, fam, alpha)
        binf = binf_constant(w, alpha, fam, mode="two_grid")
        c_top = top_regularity_cw(w, fam, alpha)
        corpus = list(f_corpus) if f_corpus is not None \
            else boundary_bump_corpus(mesh, w)
        best_lhs, best_f = -math.inf, ""
        for fid, f in corpus:
            val = weak11_ratio(f, w, alpha)
            if val > best_lhs:
                best_lhs, best_f = val, fid
        # resolution check: does one extra level move the constant?
        w_next = make_weight(spec, Mesh(depth + 1), alpha)
        b1_next = bp_constant(w_next, None, 1.0, fam_next, alpha)
        limited = not b1_next > b1 * (1.0 + 1e-12)
        psi = {k: best_lhs / fn(b1) for k, fn in PSI_CANDIDATES.items()}
        param = spec.get("t", float(spec["of"][1]["a"]) if "of" in spec else 0.0)
        table.rows.append(SweepRow(float(param), b1, binf, c_top, best_lhs,
                                   best_f, psi, limited))
    return table


def search_objective(w: Weight, f: MeshFunction, alpha: float,
                     family: ArcFamily) -> float:
    """ratio / (B1 log(e + B1)), the normalized weak-(1,1) objective."""
    b1 = bp_constant(w, None, 1.0, family, alpha)
    return weak11_ratio(f, w, alpha) / (b1 * math.log(math.e + b1))


@dataclass
class SearchResult:
    best_objective: float
    best_weight_spec: dict
    best_f: str
    trajectory: list[tuple[int, float]]
    evaluations: int


def extremal_search(budget: int, seed: int, alpha: float,
                    depth: int) -> SearchResult:
    """Coordinate ascent over (power-weight margin, test-function choice).

    Deterministic for a given seed; the margin moves by multiplicative
    steps, the test function over a finite candidate list; the objective
    sequence is non-decreasing by construction.
    """
    if budget < 1:
        raise ValueError("budget must be >= 1")
    alpha = check_alpha(alpha)
    mesh = Mesh(depth)
    family = ArcFamily(depth)
    rng = np.random.default_rng(seed)
    margin = float(rng.choice([0.05, 0.1, 0.2]))
    f_candidates = boundary_bump_corpus(mesh)
    f_idx = int(rng.integers(len(f_candidates)))

    def evaluate(m, fi):
        spec = {"family": "power", "t": -(alpha + 1.0) + m}
        w = make_weight(spec, mesh, alpha)
        return search_objective(w, f_candidates[fi][1], alpha, family), spec

    spent = 0
    best, best_spec = evaluate(margin, f_idx)
    spent += 1
    traj = [(spent, best)]
    floor = 2.0 ** -depth
    improving = True
    while spent < budget and improving:
        improving = False
        for step in (0.5, 2.0, 0.8, 1.25):
            if spent >= budget:
                break
            m2 = margin * step
            if not floor <= m2 <= 0.5:
                continue
            val, spec = evaluate(m2, f_idx)
            spent += 1
            if val > best:
                best, best_spec, margin = val, spec, m2
                traj.append((spent, best))
                improving = True
        for fi in range(len(f_candidates)):
            if spent >= budget:
                break
            if fi == f_idx:
                continue
            val, spec = evaluate(margin, fi)
            spent += 1
            if val > best:
                best, best_spec, f_idx = val, spec, fi
                traj.append((spent, best))
                improving = True
    return SearchResult(best, best_spec, f_candidates[f_idx][0], traj, spent)
