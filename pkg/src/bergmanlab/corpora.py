"""Seeded corpus builders shared by the test suite and the batch driver."""

from __future__ import annotations

import numpy as np

from .geometry import GRID_SHIFTS, DyadicArc
from .mesh import Mesh, MeshFunction, indicator, unit_function
from .weights import Weight, make_weight, unit_weight

SHIFT0 = GRID_SHIFTS[0]


def weight_specs(preset: str, count: int, seed: int, alpha: float) -> list[dict]:
    """Deterministic list of weight specs (power / bump / random / product)."""
    rng = np.random.default_rng(seed)
    specs: list[dict] = []
    t_lo = -(alpha + 1.0)
    powers = [t_lo + m for m in (0.05, 0.1, 0.25, 0.5)] + [0.5, 1.0, 2.0]
    bumps = [{"family": "bump", "level": lev, "index": idx, "a": a}
             for lev in (0, 1, 2, 3) for idx in (0, (1 << lev) - 1)
             for a in (4.0, 0.25, 16.0)]
    i = 0
    while len(specs) < count:
        kind = i % 4
        if kind == 0 and powers:
            specs.append({"family": "power", "t": powers[i // 4 % len(powers)]})
        elif kind == 1:
            specs.append(bumps[i // 4 % len(bumps)])
        elif kind == 2:
            specs.append({"family": "random", "seed": int(rng.integers(2 ** 31)),
                          "ratio_cap": float(rng.choice([1.5, 2.0, 4.0]))})
        else:
            specs.append({"family": "product", "of": [
                {"family": "power", "t": t_lo + float(rng.choice([0.1, 0.5, 1.0]))},
                {"family": "random", "seed": int(rng.integers(2 ** 31)),
                 "ratio_cap": 2.0},
            ]})
        i += 1
    return specs[:count]


def weight_corpus(mesh: Mesh, alpha: float, count: int = 24,
                  seed: int = 0, preset: str = "default") -> list[Weight]:
    return [make_weight(s, mesh, alpha)
            for s in weight_specs(preset, count, seed, alpha)]


def function_corpus(mesh: Mesh, seed: int = 0, count: int = 8,
                    complex_values: bool = False):
    """(f_id, f) pairs: indicators, rim bumps, constants, random fields."""
    rng = np.random.default_rng(seed)
    J = mesh.depth
    out = [("ones", unit_function(mesh))]
    out.append(("box(l=1,m=0)", _box_indicator(mesh, 1, 0)))
    out.append(("box(l=2,m=1)", _box_indicator(mesh, 2, 1)))
    out.append((f"rim_top(m=0)", indicator(mesh, [mesh.offsets[J]])))
    out.append((f"rim_top(m=mid)",
                indicator(mesh, [mesh.offsets[J] + (1 << (J - 1))])))
    k = len(out)
    while len(out) < count:
        if complex_values:
            vals = (rng.standard_normal(mesh.ncells)
                    + 1j * rng.standard_normal(mesh.ncells))
        else:
            vals = rng.lognormal(0.0, 1.0, mesh.ncells)
        out.append((f"random_{len(out) - k}", MeshFunction(mesh, vals)))
    return out[:count]


def _box_indicator(mesh: Mesh, level: int, index: int) -> MeshFunction:
    vals = np.zeros(mesh.ncells)
    for b in range(level, mesh.n_bands):
        width = 1 << (b - level)
        mesh.band(vals, b)[index * width:(index + 1) * width] = 1.0
    return MeshFunction(mesh, vals)


def box_indicator(mesh: Mesh, arc: DyadicArc) -> MeshFunction:
    """Indicator of an unshifted-grid Carleson box as a mesh function."""
    if arc.shift != SHIFT0:
        raise ValueError("box indicators live on the unshifted grid")
    if arc.level <= 0:
        return unit_function(mesh)
    return _box_indicator(mesh, arc.level, arc.index)


def arc_subsets(mesh: Mesh, shift, seed: int, count: int,
                max_size: int = 24) -> list[list[DyadicArc]]:
    """Random arc collections from one grid (for packing scenarios)."""
    rng = np.random.default_rng(seed)
    out = []
    J = mesh.depth
    for _ in range(count):
        size = int(rng.integers(1, max_size + 1))
        arcs = set()
        while len(arcs) < size:
            lev = int(rng.integers(0, J + 1))
            arcs.add((lev, int(rng.integers(0, 1 << lev))))
        out.append([DyadicArc(shift, lev, m) for lev, m in sorted(arcs)])
    return out
