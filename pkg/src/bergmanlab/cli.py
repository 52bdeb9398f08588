"""Batch experiment driver: config in, CSV + JSON reports out.

One process, no daemon.  A config file holds a single experiment object or
{"suite": [...]}; identical configs produce byte-identical CSVs (fixed row
order, shortest round-trip float formatting).  Exit status is 0 iff every
ASSERTED check passed; ratio-only experiments always exit 0.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .corpora import (arc_subsets, box_indicator, function_corpus,
                      weight_corpus, weight_specs)
from .geometry import (GRID_SHIFTS, DyadicArc, arcs_at_level, box_mass,
                       region_mass, top_mass, top_share_lower_bound)
from .harness import (class_algebra_check, strong_type_report,
                      two_weight_constant, weak_type_report)
from .mesh import Mesh, MeshFunction, lp_norm, monomial_mesh_function
from .operators import bergman_project, dyadic_maximal, sparse_sum
from .reports import CSV_COLUMNS, InequalityReport
from .selection import (exceptional_sets, fitted_min_sum_constant,
                        min_sum_bound, packing_check, stopping_depth)
from .sharpness import extremal_search, sweep
from .weights import (ArcFamily, Weight, binf_constant, bp_constant,
                      make_weight, reverse_holder_report, top_regularity_cw,
                      unit_weight)

SHIFT0, SHIFT13 = GRID_SHIFTS

EXPERIMENTS = (
    "geometry-selftest", "constants", "project", "verify-rh",
    "verify-selection", "verify-packing", "verify-maximal", "verify-classes",
    "verify-weak", "verify-strong", "verify-sum-lemma", "sweep-sharpness",
    "search-sharpness",
)

SEEDED = {
    "constants", "verify-rh", "verify-selection", "verify-packing",
    "verify-maximal", "verify-classes", "verify-weak", "verify-strong",
    "sweep-sharpness", "search-sharpness",
}

_FIELDS = {
    "experiment": str, "alphas": list, "depth": int, "quad_k": int,
    "eval_depth": int, "seed": int, "weights": (list, dict),
    "f_corpus": dict, "params": dict, "out_prefix": str,
}


class ConfigError(ValueError):
    pass


class ExperimentConfig:
    """Validated experiment description (unknown fields rejected)."""

    def __init__(self, raw: dict, index: int = 0):
        where = f"suite[{index}]" if index else "config"
        if not isinstance(raw, dict):
            raise ConfigError(f"{where}: expected an object")
        for key, val in raw.items():
            if key not in _FIELDS:
                raise ConfigError(f"{where}: unknown field {key!r}")
            want = _FIELDS[key]
            if not isinstance(val, want):
                raise ConfigError(
                    f"{where}.{key}: expected {want}, got {type(val).__name__}")
        if "experiment" not in raw:
            raise ConfigError(f"{where}: missing field 'experiment'")
        self.experiment = raw["experiment"]
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(
                f"{where}.experiment: unknown tag {self.experiment!r}; "
                f"valid tags: {', '.join(EXPERIMENTS)}")
        self.alphas = [float(a) for a in raw.get("alphas", [0.0])]
        self.depth = int(raw.get("depth", 8))
        self.quad_k = int(raw.get("quad_k", 4))
        self.eval_depth = raw.get("eval_depth")
        self.seed = raw.get("seed")
        self.weights = raw.get("weights")
        self.f_corpus = raw.get("f_corpus", {})
        self.params = raw.get("params", {})
        self.out_prefix = raw.get("out_prefix", self.experiment)
        needs_seed = self.experiment in SEEDED or self._has_unseeded_random()
        if needs_seed and self.seed is None:
            raise ConfigError(
                f"{where}: field 'seed' is mandatory for the randomized "
                f"experiment {self.experiment!r}")

    def _has_unseeded_random(self) -> bool:
        specs = self.weights if isinstance(self.weights, list) else []
        return any(s.get("family") == "random" and "seed" not in s
                   for s in specs if isinstance(s, dict))

    def weight_list(self, mesh: Mesh, alpha: float) -> list[Weight]:
        if isinstance(self.weights, list):
            return [make_weight(s, mesh, alpha) for s in self.weights]
        preset = (self.weights or {}).get("preset", "default")
        count = (self.weights or {}).get("count", 12)
        return weight_corpus(mesh, alpha, count=count,
                             seed=self.seed or 0, preset=preset)

    def functions(self, mesh: Mesh):
        return function_corpus(
            mesh, seed=(self.seed or 0) + 1,
            count=self.f_corpus.get("count", 6),
            complex_values=self.f_corpus.get("complex", False))


# ---------------------------------------------------------------------------
# experiment bodies: each returns (rows, extras)
# ---------------------------------------------------------------------------


def _run_geometry(cfg: ExperimentConfig):
    rows = []
    for alpha in cfg.alphas:
        worst_add = 0.0
        worst_margin = math.inf
        for shift in GRID_SHIFTS:
            for lev in range(cfg.depth + 1):
                for arc in arcs_at_level(shift, lev):
                    sm = box_mass(arc, alpha)
                    tm = top_mass(arc, alpha)
                    kids = sum(box_mass(c, alpha) for c in arc.children())
                    worst_add = max(worst_add, abs(sm - (tm + kids)))
                    worst_margin = min(
                        worst_margin, tm - top_share_lower_bound(alpha) * sm)
        rows.append(InequalityReport(
            theorem="box_additivity", lhs=worst_add, rhs_explicit=1e-12,
            alpha=alpha, passed=worst_add <= 1e-12, depth=cfg.depth))
        rows.append(InequalityReport(
            theorem="top_share_bound", lhs=-worst_margin, rhs_explicit=0.0,
            alpha=alpha, passed=worst_margin >= -1e-15, depth=cfg.depth))
        # level partition: boxes of one level tile the outer annulus
        worst_part = 0.0
        for lev in range(cfg.depth + 1):
            total = sum(box_mass(a, alpha) for a in arcs_at_level(SHIFT0, lev))
            h = 2.0 ** -lev
            annulus = (h * (2.0 - h)) ** (alpha + 1.0)
            worst_part = max(worst_part, abs(total - annulus))
        rows.append(InequalityReport(
            theorem="level_partition", lhs=worst_part, rhs_explicit=1e-12,
            alpha=alpha, passed=worst_part <= 1e-12, depth=cfg.depth))
    return rows, {}


def _run_constants(cfg: ExperimentConfig):
    rows = []
    plist = cfg.params.get("p_list", [1.0, 1.5, 2.0, 3.0, 4.0])
    for alpha in cfg.alphas:
        mesh = Mesh(cfg.depth)
        family = ArcFamily(cfg.depth)
        for w in cfg.weight_list(mesh, alpha):
            prev = math.inf
            for p in plist:
                val = bp_constant(w, None, float(p), family, alpha)
                rows.append(InequalityReport(
                    theorem="class_constant", lhs=val, rhs_explicit=1.0,
                    alpha=alpha, passed=val >= 1.0 - 1e-12 and val <= prev * (1 + 1e-12),
                    weight_id=w.weight_id, p=float(p), depth=cfg.depth))
                prev = val
            for mode in ("d0", "d13", "two_grid"):
                val = binf_constant(w, alpha, family, mode=mode)
                rows.append(InequalityReport(
                    theorem=f"maximal_integral_constant[{mode}]", lhs=val,
                    rhs_explicit=1.0, alpha=alpha, passed=val >= 1.0 - 1e-12,
                    weight_id=w.weight_id, depth=cfg.depth))
            val = top_regularity_cw(w, family, alpha)
            rows.append(InequalityReport(
                theorem="top_oscillation", lhs=val, rhs_explicit=1.0,
                alpha=alpha, passed=val >= 1.0 - 1e-12,
                weight_id=w.weight_id, depth=cfg.depth))
    return rows, {}


def _run_project(cfg: ExperimentConfig, out_dir: Path):
    rows = []
    samples_written = []
    k = cfg.quad_k
    for alpha in cfg.alphas:
        mesh = Mesh(cfg.depth)
        ones = MeshFunction(mesh, np.ones(mesh.ncells))
        sample = bergman_project(ones, alpha, subdivision=k)
        err1 = float(np.abs(sample.values - 1.0).max())
        rows.append(InequalityReport(
            theorem="reproduce_constants", lhs=err1, rhs_explicit=1e-3,
            alpha=alpha, passed=err1 <= 1e-3, depth=cfg.depth,
            provenance={"k": k}))
        k2 = max(2 * k, 8)
        errc = float(np.abs(bergman_project(
            np.conj, alpha, subdivision=k2, mesh=mesh).values).max())
        rows.append(InequalityReport(
            theorem="annihilate_antiholomorphic", lhs=errc, rhs_explicit=1e-3,
            alpha=alpha, passed=errc <= 1e-3, depth=cfg.depth,
            provenance={"k": k2}))
        errm = float(np.abs(bergman_project(
            lambda x: x * np.conj(x), alpha, subdivision=k2, mesh=mesh).values
            - 1.0 / (2.0 + alpha)).max())
        rows.append(InequalityReport(
            theorem="radial_moment", lhs=errm, rhs_explicit=1e-3,
            alpha=alpha, passed=errm <= 1e-3, depth=cfg.depth,
            provenance={"k": k2}))
        path = out_dir / f"{cfg.out_prefix}_samples_a{alpha:g}.csv"
        sample.to_csv(path)
        samples_written.append(str(path))
    return rows, {"samples": samples_written}


def _run_rh(cfg: ExperimentConfig):
    rows = []
    for alpha in cfg.alphas:
        mesh = Mesh(cfg.depth)
        for w in cfg.weight_list(mesh, alpha):
            rows.extend(reverse_holder_report(w, alpha, seed=cfg.seed or 0))
    return rows, {}


def _pick_band(f: MeshFunction, w: Weight, shift, alpha: float) -> int | None:
    """A dyadic band hit by shallow-arc averages (prefers depth-J-3)."""
    from . import boxops
    mesh = f.mesh
    avgs = boxops.weighted_box_averages(
        mesh, f, alpha, shift != SHIFT0, u=w)
    pool = np.concatenate(avgs[:max(1, mesh.depth - 2)])
    pool = pool[pool > 0]
    if len(pool) == 0:
        return None
    j = int(np.floor(-np.log2(np.median(pool))))
    return max(j, 0)


def _run_selection(cfg: ExperimentConfig):
    rows = []
    for alpha in cfg.alphas:
        mesh = Mesh(cfg.depth)
        weights = cfg.weight_list(mesh, alpha)
        funcs = cfg.functions(mesh)
        for w in weights:
            for fid, f in funcs:
                for shift in GRID_SHIFTS:
                    j = _pick_band(f, w, shift, alpha)
                    if j is None:
                        continue
                    cert = exceptional_sets(f, w, shift, j, alpha)
                    if cert is None:
                        continue
                    tag = "d13" if shift != SHIFT0 else "d0"
                    rows.append(InequalityReport(
                        theorem=f"selection_mass_factor[{tag}]",
                        lhs=max((r.int_box / (6.0 * r.int_except))
                                for r in cert.records),
                        rhs_explicit=1.0, alpha=alpha,
                        passed=all(r.passed for r in cert.records),
                        weight_id=w.weight_id, f_id=fid, depth=cfg.depth,
                        provenance={"j_band": j, "n0": cert.n0,
                                    "n_arcs": len(cert.records),
                                    "starved": sum(r.starved for r in cert.records),
                                    "overlap_scale": cert.empirical_overlap_scale}))
                    rows.append(InequalityReport(
                        theorem=f"selection_overlap[{tag}]",
                        lhs=float(cert.overlap_max),
                        rhs_explicit=float(cert.n0), alpha=alpha,
                        passed=cert.overlap_ok, weight_id=w.weight_id,
                        f_id=fid, depth=cfg.depth))
    return rows, {}


def _run_packing(cfg: ExperimentConfig):
    rows = []
    count = cfg.params.get("scenarios", 24)
    for alpha in cfg.alphas:
        mesh = Mesh(cfg.depth)
        weights = cfg.weight_list(mesh, alpha)
        for gi, shift in enumerate(GRID_SHIFTS):
            sets = arc_subsets(mesh, shift, (cfg.seed or 0) + gi, count)
            for i, arcs in enumerate(sets):
                w = weights[i % len(weights)]
                rows.append(packing_check(arcs, w, alpha))
    return rows, {}


def _run_maximal(cfg: ExperimentConfig):
    rows = []
    for alpha in cfg.alphas:
        mesh = Mesh(cfg.depth)
        weights = cfg.weight_list(mesh, alpha)
        funcs = cfg.functions(mesh)
        for w in weights:
            for fid, f in funcs:
                for shift in GRID_SHIFTS:
                    tag = "d13" if shift != SHIFT0 else "d0"
                    mf = dyadic_maximal(abs(f), w, shift, alpha)
                    vals, masses = _level_sets(mf, w, alpha)
                    l1 = float(abs(f).integral(alpha, weight=w.fn))
                    lam_pool = np.quantile(vals, [0.25, 0.5, 0.9])
                    lam_pool = np.concatenate([lam_pool, vals[:2]])
                    ok, worst = True, 0.0
                    for lam in lam_pool:
                        if lam <= 0:
                            continue
                        mass = float(masses[vals > lam].sum())
                        ok &= mass <= l1 / lam
                        worst = max(worst, mass * lam / l1)
                    rows.append(InequalityReport(
                        theorem=f"maximal_weak11[{tag}]", lhs=worst,
                        rhs_explicit=1.0, alpha=alpha, passed=ok,
                        weight_id=w.weight_id, f_id=fid, depth=cfg.depth))
        for fid, f in funcs:
            for shift in GRID_SHIFTS:
                tag = "d13" if shift != SHIFT0 else "d0"
                mf = dyadic_maximal(abs(f), None, shift, alpha)
                for p in (1.5, 2.0, 3.0):
                    pc = p / (p - 1.0)
                    lhs = lp_norm(mf, None, p, alpha)
                    rhs = 2.0 * pc ** (1.0 / p) * lp_norm(f, None, p, alpha)
                    rows.append(InequalityReport(
                        theorem=f"maximal_strong[{tag}]", lhs=lhs,
                        rhs_explicit=rhs, alpha=alpha, passed=lhs <= rhs,
                        f_id=fid, p=p, depth=cfg.depth))
    return rows, {}


def _level_sets(mf, w: Weight, alpha: float):
    from .mesh import MeshFunction as MF, _values_and_masses
    return _values_and_masses(mf, w.fn, alpha)


def _run_classes(cfg: ExperimentConfig):
    rows = []
    p = float(cfg.params.get("p", 2.0))
    q = float(cfg.params.get("q", 1.0))
    for alpha in cfg.alphas:
        mesh = Mesh(cfg.depth)
        weights = cfg.weight_list(mesh, alpha)
        for i in range(0, len(weights) - 1, 2):
            rows.extend(class_algebra_check(
                weights[i], weights[i + 1], p, q, alpha))
    return rows, {}


def _run_weak(cfg: ExperimentConfig):
    rows = []
    p = float(cfg.params.get("p", 2.0))
    for alpha in cfg.alphas:
        mesh = Mesh(cfg.depth)
        weights = cfg.weight_list(mesh, alpha)
        funcs = cfg.functions(mesh)
        for i in range(0, len(weights) - 1, 2):
            u, v = weights[i], weights[i + 1]
            for fid, f in funcs[:3]:
                for mode, kw in (("mixed_b1_bp", {"p": p}),
                                 ("mixed_b1_b1", {}),):
                    rep = weak_type_report(mode, f, u, v, alpha, **kw)
                    rep.f_id = fid
                    rows.append(rep)
                rep = weak_type_report("weak11", f, u, None, alpha)
                rep.f_id = fid
                rows.append(rep)
    return rows, {}


def _run_strong(cfg: ExperimentConfig):
    rows = []
    p = float(cfg.params.get("p", 2.0))
    q = float(cfg.params.get("q", 1.0))
    r = float(cfg.params.get("r", 1.5))
    t = float(cfg.params.get("t", 1.5))
    for alpha in cfg.alphas:
        mesh = Mesh(cfg.depth)
        weights = cfg.weight_list(mesh, alpha)
        funcs = cfg.functions(mesh)
        for i in range(0, len(weights) - 1, 2):
            u, v = weights[i], weights[i + 1]
            for fid, f in funcs[:3]:
                rep = strong_type_report("two_weight_explicit", f, alpha,
                                         p=p, r=r, t=t, u=u, v=v)
                rep.f_id = fid
                rows.append(rep)
                rep = strong_type_report("bq_to_lp", f, alpha, p=p, q=q, w=u)
                rep.f_id = fid
                rows.append(rep)
                rep = strong_type_report("mixed_lp", f, alpha, p=p, u=u, v=v)
                rep.f_id = fid
                rows.append(rep)
    return rows, {}


def _run_sum_lemma(cfg: ExperimentConfig):
    rows = []
    trunc = int(cfg.params.get("trunc", 64))
    lhs, fit = min_sum_bound(1.0, 1.0, 1.0, 0.0, trunc)
    rows.append(InequalityReport(
        theorem="min_sum_reference_point", lhs=lhs, rhs_explicit=4.0,
        alpha=0.0, passed=abs(lhs - 4.0) <= 1e-9,
        provenance={"trunc": trunc}))
    for delta in (0.0, 1.0, 2.0, 3.0):
        f1 = fitted_min_sum_constant(delta, trunc)
        f2 = fitted_min_sum_constant(delta, 2 * trunc)
        stable = abs(f2 - f1) <= 0.1 * abs(f1)
        rows.append(InequalityReport(
            theorem="min_sum_fitted_constant", lhs=f1, rhs_explicit=f2,
            alpha=0.0, passed=stable, q=delta,
            provenance={"trunc": trunc}))
    return rows, {}


def _run_sweep(cfg: ExperimentConfig, out_dir: Path):
    rows = []
    extras = {}
    family = cfg.params.get("family", "power")
    n_points = int(cfg.params.get("n_points", 5))
    for alpha in cfg.alphas:
        table = sweep(family, alpha, cfg.depth, seed=cfg.seed or 0,
                      n_points=n_points)
        path = out_dir / f"{cfg.out_prefix}_sweep_a{alpha:g}.csv"
        table.to_csv(path)
        (out_dir / f"{cfg.out_prefix}_sweep_a{alpha:g}.json").write_text(
            table.to_json())
        extras.setdefault("tables", []).append(str(path))
        b1s = [r.b1 for r in table.rows]
        increasing = all(b < a for b, a in zip(b1s, b1s[1:]))
        rows.append(InequalityReport(
            theorem="sweep_b1_monotone", lhs=float(increasing),
            rhs_explicit=1.0, alpha=alpha, passed=increasing,
            depth=cfg.depth, provenance={"b1": b1s}))
        for rrow in table.rows:
            rows.append(InequalityReport(
                theorem=f"sweep[{family}]", lhs=rrow.best_lhs,
                rhs_explicit=rrow.b1 * math.log(math.e + rrow.binf),
                alpha=alpha, passed=None, weight_id=f"param={rrow.param:g}",
                f_id=rrow.best_f, depth=cfg.depth))
    return rows, extras


def _run_search(cfg: ExperimentConfig):
    rows = []
    budget = int(cfg.params.get("budget", 30))
    for alpha in cfg.alphas:
        res = extremal_search(budget, cfg.seed or 0, alpha, cfg.depth)
        objs = [v for _, v in res.trajectory]
        ascent = all(b <= a for b, a in zip(objs, objs[1:]))
        rows.append(InequalityReport(
            theorem="search_ascent", lhs=res.best_objective, rhs_explicit=1.0,
            alpha=alpha, passed=ascent,
            weight_id=json.dumps(res.best_weight_spec), f_id=res.best_f,
            depth=cfg.depth,
            provenance={"evaluations": res.evaluations,
                        "trajectory": res.trajectory}))
    return rows, {}


_RUNNERS = {
    "geometry-selftest": lambda cfg, out: _run_geometry(cfg),
    "constants": lambda cfg, out: _run_constants(cfg),
    "project": _run_project,
    "verify-rh": lambda cfg, out: _run_rh(cfg),
    "verify-selection": lambda cfg, out: _run_selection(cfg),
    "verify-packing": lambda cfg, out: _run_packing(cfg),
    "verify-maximal": lambda cfg, out: _run_maximal(cfg),
    "verify-classes": lambda cfg, out: _run_classes(cfg),
    "verify-weak": lambda cfg, out: _run_weak(cfg),
    "verify-strong": lambda cfg, out: _run_strong(cfg),
    "verify-sum-lemma": lambda cfg, out: _run_sum_lemma(cfg),
    "sweep-sharpness": _run_sweep,
    "search-sharpness": lambda cfg, out: _run_search(cfg),
}


def run(cfg: ExperimentConfig, out_dir: Path) -> int:
    """Execute one experiment; write CSV + JSON summary; 0 iff asserted OK."""
    out_dir.mkdir(parents=True, exist_ok=True)
    rows, extras = _RUNNERS[cfg.experiment](cfg, out_dir)
    csv_path = out_dir / f"{cfg.out_prefix}.csv"
    with open(csv_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_COLUMNS)
        for rep in rows:
            writer.writerow(rep.csv_row(cfg.experiment))
    finite = [rep.ratio for rep in rows if math.isfinite(rep.ratio)]
    passes = sum(1 for rep in rows if rep.passed is True)
    fails = sum(1 for rep in rows if rep.passed is False)
    summary = {
        "experiment": cfg.experiment,
        "pass_count": passes,
        "fail_count": fails,
        "max_ratio": max(finite) if finite else None,
        "provenance": {
            "version": __version__, "depth": cfg.depth, "alphas": cfg.alphas,
            "seed": cfg.seed, "quad_k": cfg.quad_k, "rows": len(rows),
            **extras,
        },
    }
    (out_dir / f"{cfg.out_prefix}_summary.json").write_text(
        json.dumps(summary, indent=2))
    return 0 if fails == 0 else 1


def load_configs(path: Path, overrides: dict) -> list[ExperimentConfig]:
    try:
        raw = json.loads(path.read_text())
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}")
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}")
    items = raw["suite"] if isinstance(raw, dict) and "suite" in raw else [raw]
    cfgs = []
    for i, item in enumerate(items):
        if isinstance(item, dict):
            item = {**item, **{k: v for k, v in overrides.items()
                               if v is not None}}
        cfgs.append(ExperimentConfig(item, index=i))
    return cfgs


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="bergman-lab",
        description="batch driver for the weighted-inequality laboratory")
    sub = parser.add_subparsers(dest="command", required=True)
    runp = sub.add_parser("run", help="run the experiments in a config file")
    runp.add_argument("--config", required=True, type=Path)
    runp.add_argument("--out-dir", type=Path, default=Path("bergman_reports"))
    runp.add_argument("--depth", type=int, default=None)
    runp.add_argument("--seed", type=int, default=None)
    args = parser.parse_args(argv)

    overrides = {"depth": args.depth, "seed": args.seed}
    try:
        cfgs = load_configs(args.config, overrides)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    status = 0
    for cfg in cfgs:
        code = run(cfg, args.out_dir)
        print(f"{cfg.experiment}: "
              f"{'ok' if code == 0 else 'FAILED'} -> "
              f"{args.out_dir / (cfg.out_prefix + '.csv')}")
        status = max(status, code)
    return status


if __name__ == "__main__":
    raise SystemExit(main())
