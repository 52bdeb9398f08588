"""Positive sparse operators, dyadic maximal operators, and the quadrature
reproducing-kernel integral on the disk.

The sparse operators and maximal operators are evaluated exactly: their
outputs are piecewise constant on the overlay mesh (or on the mesh itself
for the unshifted grid), so weak quasi-norms downstream are exact level-set
computations.  The kernel integral is the one genuinely approximate object;
its panel scheme keeps panels metrically near-square (the kernel is
anti-holomorphic, so the leading midpoint error is the deviatoric second
moment, which anisotropic polar panels would inflate by ~(2 pi)^2).
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from . import boxops
from .geometry import GRID_SHIFTS, DyadicArc, check_alpha
from .mesh import (Mesh, MeshFunction, OverlayFunction, embed_on_overlay,
                   overlay_mesh)
from .weights import Weight

logger = logging.getLogger(__name__)

SHIFT0 = GRID_SHIFTS[0]
SHIFT13 = GRID_SHIFTS[1]


# ---------------------------------------------------------------------------
# sparse operators
# ---------------------------------------------------------------------------


@dataclass
class SparseOutput:
    """Exact values of one grid's positive sparse operator."""

    function: OverlayFunction
    depth: int
    shift: Fraction


def sparse_apply(f: MeshFunction, shift: Fraction, alpha: float,
                 depth: int | None = None) -> SparseOutput:
    """Sum over grid boxes (levels 0..depth) of box average times indicator.

    Exact: inside the band of level b the value only involves the ancestor
    chain of levels 0..b, so the output is a chain sum gathered onto the
    overlay segments.
    """
    alpha = check_alpha(alpha)
    mesh = f.mesh
    depth = mesh.depth if depth is None else int(depth)
    if depth > mesh.depth:
        raise ValueError("operator depth cannot exceed the mesh depth")
    shifted = shift != SHIFT0
    chains = boxops.sparse_chain_sums(mesh, f, alpha, shifted)
    ov = overlay_mesh(mesh)
    out = boxops.overlay_from_chain(ov, chains, shifted)
    if depth < mesh.depth:
        # truncate: subtract the contributions of levels > depth
        for b in range(depth + 1, mesh.n_bands):
            key = ov.seg_d13[b] if shifted else ov.seg_d0[b]
            excess = chains[b][key] - chains[depth][key >> (b - depth)]
            out.bands[b] = out.bands[b] - excess
    return SparseOutput(out, depth, shift)


def sparse_sum(f: MeshFunction, alpha: float) -> OverlayFunction:
    """T_0 + T_shifted, the two-grid positive sparse operator."""
    return (sparse_apply(f, SHIFT0, alpha).function
            + sparse_apply(f, SHIFT13, alpha).function)


def sparse_apply_naive(f: MeshFunction, shift: Fraction, alpha: float,
                       depth: int | None = None) -> OverlayFunction:
    """Reference per-box double loop (oracle for tests)."""
    from .mesh import region_integral, unit_function
    alpha = check_alpha(alpha)
    mesh = f.mesh
    depth = mesh.depth if depth is None else int(depth)
    ov = overlay_mesh(mesh)
    bands = [np.zeros(2 << b) for b in range(mesh.n_bands)]
    absf = abs(f)
    ones = unit_function(mesh)
    for lev in range(depth + 1):
        for m in range(1 << lev):
            arc = DyadicArc(shift, lev, m)
            box = arc.box()
            avg = (region_integral(absf, box, alpha)
                   / region_integral(ones, box, alpha))
            for b in range(lev, mesh.n_bands):
                denom = 3 * (1 << b)
                starts = ov.seg_start_num[b]
                mids = (starts + 0.5 * np.diff(
                    np.append(starts, starts[0] + denom))) / denom
                inside = np.array([arc.contains_angle(t) for t in mids % 1.0])
                bands[b][inside] += avg
    return OverlayFunction(ov, bands)


# ---------------------------------------------------------------------------
# dyadic maximal operators
# ---------------------------------------------------------------------------


def dyadic_maximal(f: MeshFunction, u: Weight | None, shift: Fraction,
                   alpha: float, root: DyadicArc | None = None):
    """Max over containing grid boxes of the u dA_alpha average of |f|.

    Returns a MeshFunction for the unshifted grid and an OverlayFunction for
    the shifted grid.  With `root`, the boxes range over the descendants of
    the root arc only and the output vanishes outside its box.
    """
    alpha = check_alpha(alpha)
    mesh = f.mesh
    shifted = shift != SHIFT0
    avgs = boxops.weighted_box_averages(mesh, f, alpha, shifted, u=u)
    if root is not None:
        if root.shift != shift:
            raise ValueError("root arc must belong to the operator grid")
        j0 = max(root.level, 0)
        # running max started at the root level, masked to its subtree
        chains = [np.zeros(1 << b) for b in range(mesh.n_bands)]
        run = avgs[j0]
        mask = np.zeros(1 << j0, dtype=bool)
        mask[root.index if root.level >= 0 else slice(None)] = True
        chains[j0] = np.where(mask, run, 0.0)
        run = np.where(mask, run, -np.inf)
        for b in range(j0 + 1, mesh.n_bands):
            run = np.maximum(np.repeat(run, 2), avgs[b])
            chains[b] = np.where(np.isfinite(run), run, 0.0)
        for b in range(j0):
            chains[b] = np.zeros(1 << b)
    else:
        chains = boxops.chain_max(avgs)
    if not shifted:
        flat = np.empty(mesh.ncells)
        for b in range(mesh.n_bands):
            mesh.band(flat, b)[:] = chains[b]
        return MeshFunction(mesh, flat)
    return boxops.overlay_from_chain(overlay_mesh(mesh), chains, True)


# ---------------------------------------------------------------------------
# kernel quadrature
# ---------------------------------------------------------------------------


@dataclass
class ProjectionSample:
    """Kernel-integral values at evaluation points (cell centroids)."""

    points_theta: np.ndarray
    points_r: np.ndarray
    values: np.ndarray
    quad_spec: dict = field(default_factory=dict)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            out = csv.writer(fh)
            out.writerow(["point_angle", "point_radius", "re", "im"])
            for th, r, v in zip(self.points_theta, self.points_r, self.values):
                out.writerow([repr(float(th)), repr(float(r)),
                              repr(float(v.real)), repr(float(v.imag))])


def _kernel_power(base: np.ndarray, alpha: float) -> np.ndarray:
    """(base)^-(2+alpha); repeated products when the exponent is integral."""
    s = 2.0 + alpha
    if s == int(s) and 2 <= int(s) <= 5:
        acc = base
        for _ in range(int(s) - 1):
            acc = acc * base
        return 1.0 / acc
    return base ** (-s)


def _n_theta(mesh: Mesh, b: int, k: int) -> int:
    """Angular panels per cell: keeps panel arc ~ panel radial height."""
    r_hi = mesh.band_r_hi[b]
    h = mesh.band_r_hi[b] - mesh.band_r_lo[b]
    return max(k, int(np.ceil(2.0 * np.pi * r_hi * mesh.band_width(b) * k / h)))


def _cell_template(mesh: Mesh, b: int, k: int, alpha: float, refine: int = 1):
    """Panel (theta offsets, radii, masses) for one cell of band b."""
    kr = k * refine
    nth = _n_theta(mesh, b, k) * refine
    rlo, rhi = mesh.band_r_lo[b], mesh.band_r_hi[b]
    re = np.linspace(rlo, rhi, kr + 1)
    ra, rb_ = re[:-1], re[1:]
    u_a = (1.0 - ra) * (1.0 + ra)
    u_b = (1.0 - rb_) * (1.0 + rb_)
    radm = u_a ** (alpha + 1.0) - u_b ** (alpha + 1.0)
    w = mesh.band_width(b)
    th = (np.arange(nth) + 0.5) * (w / nth)
    TH, R = np.meshgrid(th, 0.5 * (ra + rb_), indexing="ij")
    _, M = np.meshgrid(th, radm, indexing="ij")
    return TH.ravel(), R.ravel(), (w / nth) * M.ravel(), w / nth


_NODE_CLEARANCE = 1e-12


def _panel_values(z: np.ndarray, xi: np.ndarray, alpha: float,
                  dtheta: float) -> np.ndarray:
    """Kernel at panels for each point, with the near-node perturbation."""
    base = 1.0 - z[..., None] * np.conj(xi)
    tiny = np.abs(base) < _NODE_CLEARANCE
    if tiny.any():
        logger.warning("perturbing %d quadrature nodes by half a panel width",
                       int(tiny.sum()))
        bumped = xi * np.exp(2j * np.pi * (dtheta / 2.0))
        base = np.where(tiny, 1.0 - z[..., None] * np.conj(bumped), base)
    return _kernel_power(base, alpha)


def _centroid_points(mesh: Mesh) -> np.ndarray:
    theta, r = mesh.centroids()
    return r * np.exp(2j * np.pi * theta)


def _dist_to_band_cells(z: complex, mesh: Mesh, b: int) -> np.ndarray:
    """Distance from a point to the closure of each cell of band b."""
    rlo, rhi = mesh.band_r_lo[b], mesh.band_r_hi[b]
    w = mesh.band_width(b)
    th = (np.angle(z) / (2.0 * np.pi)) % 1.0
    r = abs(z)
    t0 = np.arange(1 << b) * w
    inside_ang = (th - t0) % 1.0 < w
    d_rad = np.maximum(np.maximum(rlo - r, r - rhi), 0.0)
    d = np.full(1 << b, np.inf)
    for te in (t0, t0 + w):
        e = np.exp(2j * np.pi * te)
        proj = np.clip(np.real(z * np.conj(e)), rlo, rhi)
        d = np.minimum(d, np.abs(z - proj * e))
    return np.where(inside_ang, d_rad, d)


_KERNEL_CACHE: dict = {}
_KERNEL_CACHE_LIMIT = 4


def bergman_kernel_matrix(mesh: Mesh, alpha: float, eval_mesh: Mesh,
                          k: int) -> tuple[np.ndarray, np.ndarray]:
    """(points, K) with K[i, c] = quadrature of the kernel over cell c.

    Cells whose closure lies within 2^-depth of an evaluation point are
    recomputed with 4x refined panels.  The matrix is cached (small LRU).
    """
    alpha = check_alpha(alpha)
    key = (mesh.depth, eval_mesh.depth, alpha, int(k))
    got = _KERNEL_CACHE.get(key)
    if got is not None:
        return got
    z = _centroid_points(eval_mesh)
    npts = len(z)
    K = np.zeros((npts, mesh.ncells), dtype=np.complex128)
    chunk = max(1, (1 << 22) // max(1, 1 << mesh.depth))
    for b in range(mesh.n_bands):
        tho, rm, mass, dth = _cell_template(mesh, b, k, alpha)
        ncells = 1 << b
        shifts = np.exp(2j * np.pi * (np.arange(ncells) * mesh.band_width(b)))
        xi = (rm * np.exp(2j * np.pi * tho))[None, :] * shifts[:, None]
        fx = mass[None, :]
        col = mesh.offsets[b]
        for i0 in range(0, npts, chunk):
            zz = z[i0:i0 + chunk, None, None]
            vals = _panel_values(zz, xi[None, :, :], alpha, dth)
            K[i0:i0 + chunk, col:col + ncells] += (vals * fx[None]).sum(-1)
    # near refinement
    thresh = 2.0 ** -mesh.depth
    for i in range(npts):
        for b in range(mesh.n_bands):
            d = _dist_to_band_cells(z[i], mesh, b)
            idx = np.nonzero(d < thresh)[0]
            if len(idx) == 0:
                continue
            tho, rm, mass, dth = _cell_template(mesh, b, k, alpha, refine=4)
            base = rm * np.exp(2j * np.pi * tho)
            for m in idx:
                xi_f = base * np.exp(2j * np.pi * (m * mesh.band_width(b)))
                vals = _panel_values(np.asarray(z[i]), xi_f, alpha, dth)
                K[i, mesh.offsets[b] + m] = (vals * mass).sum()
    got = (z, K)
    if len(_KERNEL_CACHE) >= _KERNEL_CACHE_LIMIT:
        _KERNEL_CACHE.pop(next(iter(_KERNEL_CACHE)))
    _KERNEL_CACHE[key] = got
    return got


def bergman_project(f, alpha: float, eval_mesh_depth: int | None = None,
                    subdivision: int = 4,
                    mesh: Mesh | None = None) -> ProjectionSample:
    """Quadrature kernel integral at the evaluation-mesh cell centroids.

    `f` is a MeshFunction (cell values multiply per-cell kernel integrals;
    exact in f) or a callable evaluated at the quadrature nodes (for smooth
    validation integrands).
    """
    alpha = check_alpha(alpha)
    if subdivision < 1:
        raise ValueError("subdivision must be >= 1")
    if isinstance(f, MeshFunction):
        mesh = f.mesh
    elif mesh is None:
        raise ValueError("a mesh is required when f is a callable")
    eval_mesh = mesh if eval_mesh_depth in (None, mesh.depth) \
        else Mesh(eval_mesh_depth)
    if isinstance(f, MeshFunction):
        z, K = bergman_kernel_matrix(mesh, alpha, eval_mesh, subdivision)
        values = K @ f.values.astype(np.complex128)
    else:
        z, values = _project_callable(f, mesh, alpha, eval_mesh, subdivision)
    theta = (np.angle(z) / (2.0 * np.pi)) % 1.0
    return ProjectionSample(
        theta, np.abs(z), values,
        quad_spec={"depth": mesh.depth, "eval_depth": eval_mesh.depth,
                   "subdivision": int(subdivision), "alpha": alpha},
    )


def _project_callable(fn, mesh: Mesh, alpha: float, eval_mesh: Mesh, k: int):
    z = _centroid_points(eval_mesh)
    npts = len(z)
    out = np.zeros(npts, dtype=np.complex128)
    chunk = max(1, (1 << 22) // max(1, 1 << mesh.depth))
    for b in range(mesh.n_bands):
        tho, rm, mass, dth = _cell_template(mesh, b, k, alpha)
        ncells = 1 << b
        shifts = np.exp(2j * np.pi * (np.arange(ncells) * mesh.band_width(b)))
        xi = (rm * np.exp(2j * np.pi * tho))[None, :] * shifts[:, None]
        fx = fn(xi) * mass[None, :]
        for i0 in range(0, npts, chunk):
            zz = z[i0:i0 + chunk, None, None]
            vals = _panel_values(zz, xi[None, :, :], alpha, dth)
            out[i0:i0 + chunk] += (vals * fx[None]).sum((1, 2))
    thresh = 2.0 ** -mesh.depth
    for i in range(npts):
        for b in range(mesh.n_bands):
            d = _dist_to_band_cells(z[i], mesh, b)
            idx = np.nonzero(d < thresh)[0]
            if len(idx) == 0:
                continue
            tho_f, rm_f, mass_f, dth_f = _cell_template(mesh, b, k, alpha, refine=4)
            tho_c, rm_c, mass_c, dth_c = _cell_template(mesh, b, k, alpha)
            base_f = rm_f * np.exp(2j * np.pi * tho_f)
            base_c = rm_c * np.exp(2j * np.pi * tho_c)
            for m in idx:
                rot = np.exp(2j * np.pi * (m * mesh.band_width(b)))
                xf, xc = base_f * rot, base_c * rot
                fine = (_panel_values(np.asarray(z[i]), xf, alpha, dth_f)
                        * fn(xf) * mass_f).sum()
                coarse = (_panel_values(np.asarray(z[i]), xc, alpha, dth_c)
                          * fn(xc) * mass_c).sum()
                out[i] += fine - coarse
    return z, out


def sparse_domination_ratio(f: MeshFunction, alpha: float,
                            subdivision: int = 4) -> float:
    """Max over centroids of |kernel integral| / (two-grid sparse value)."""
    if not np.all(f.values.real >= 0.0) or np.iscomplexobj(f.values):
        raise ValueError("the domination ratio is probed on non-negative f")
    sample = bergman_project(f, alpha, subdivision=subdivision)
    tf = sparse_sum(f, alpha)
    ratios = []
    for th, r, v in zip(sample.points_theta, sample.points_r, sample.values):
        denom = tf.evaluate_at(th, r)
        ratios.append(abs(v) / denom)
    return float(np.max(ratios))
