"""Piecewise-constant functions on the dyadic disk partition.

A depth-J mesh splits the disk into the top halves of the level-0..J-1 boxes
of the unshifted grid plus the full level-J boxes: 2^(J+1)-1 cells arranged
band by band (band b holds the 2^b cells with radii in [1-2^-b, 1-2^-(b+1)),
band J reaching the rim).  Values are stored flat in heap order, so the cell
(b, m) sits at index 2^b - 1 + m and refinement is a pure relabelling:
integrals are preserved exactly.

The overlay mesh refines each band at the angular breakpoints of both grids
(denominator 3 * 2^b, all exact integers), which is where outputs of the
shifted-grid operators live.
"""

from __future__ import annotations

import json
import math
from fractions import Fraction

import numpy as np
from scipy.special import beta as beta_fn
from scipy.special import betainc

from .geometry import GRID_SHIFTS, Region, check_alpha, one_minus_sq

SHIFT0 = GRID_SHIFTS[0]
SHIFT13 = GRID_SHIFTS[1]


class Mesh:
    """Dyadic disk partition of a given depth with cached band masses."""

    def __init__(self, depth: int):
        if depth < 1:
            raise ValueError("mesh depth must be a positive integer")
        self.depth = int(depth)
        J = self.depth
        self.n_bands = J + 1
        self.offsets = np.array([(1 << b) - 1 for b in range(J + 2)], dtype=np.int64)
        self.ncells = (1 << (J + 1)) - 1
        # 1 - r at band edges, exact dyadics
        self.gap_lo = np.array([2.0 ** -b for b in range(J + 1)])
        self.gap_hi = np.array([2.0 ** -(b + 1) for b in range(J)] + [0.0])
        self.band_r_lo = 1.0 - self.gap_lo
        self.band_r_hi = 1.0 - self.gap_hi
        self._radial_mass: dict[float, np.ndarray] = {}
        self._cell_mass: dict[float, np.ndarray] = {}

    # -- geometry ---------------------------------------------------------

    def band_width(self, b: int) -> float:
        return 2.0 ** -b

    def radial_mass(self, alpha: float) -> np.ndarray:
        """Weighted radial mass per unit angle of each band."""
        alpha = check_alpha(alpha)
        got = self._radial_mass.get(alpha)
        if got is None:
            a1 = alpha + 1.0
            u_lo = self.gap_lo * (2.0 - self.gap_lo)
            u_hi = self.gap_hi * (2.0 - self.gap_hi)
            got = u_lo ** a1 - u_hi ** a1
            self._radial_mass[alpha] = got
        return got

    def cell_mass(self, alpha: float) -> np.ndarray:
        """Flat array of cell masses; they sum to 1 for every alpha."""
        alpha = check_alpha(alpha)
        got = self._cell_mass.get(alpha)
        if got is None:
            rho = self.radial_mass(alpha)
            got = np.empty(self.ncells)
            for b in range(self.n_bands):
                got[self.offsets[b]:self.offsets[b + 1]] = rho[b] * 2.0 ** -b
            self._cell_mass[alpha] = got
        return got

    def band(self, flat: np.ndarray, b: int) -> np.ndarray:
        return flat[self.offsets[b]:self.offsets[b + 1]]

    def band_of_radius(self, r: float) -> int:
        if not 0.0 <= r < 1.0:
            raise ValueError(f"radius must lie in [0, 1), got {r}")
        gap = 1.0 - r
        b = 0
        while b < self.depth and 2.0 ** -(b + 1) > gap:
            b += 1
        return b

    def cell_index(self, theta: float, r: float) -> int:
        b = self.band_of_radius(r)
        m = min(int((float(theta) % 1.0) * (1 << b)), (1 << b) - 1)
        return int(self.offsets[b]) + m

    def centroids(self) -> tuple[np.ndarray, np.ndarray]:
        """(theta, r) midpoints of every cell, flat in heap order."""
        theta = np.empty(self.ncells)
        r = np.empty(self.ncells)
        for b in range(self.n_bands):
            w = 2.0 ** -b
            sl = slice(self.offsets[b], self.offsets[b + 1])
            theta[sl] = (np.arange(1 << b) + 0.5) * w
            r[sl] = 0.5 * (self.band_r_lo[b] + self.band_r_hi[b])
        return theta, r

    def __eq__(self, other):
        return isinstance(other, Mesh) and other.depth == self.depth

    def __hash__(self):
        return hash(("Mesh", self.depth))

    def __repr__(self):
        return f"Mesh(depth={self.depth})"


class MeshFunction:
    """One value per mesh cell; complex for test functions, real for weights."""

    def __init__(self, mesh: Mesh, values):
        values = np.asarray(values)
        if values.shape != (mesh.ncells,):
            raise ValueError(
                f"expected {mesh.ncells} cell values, got shape {values.shape}"
            )
        if not np.iscomplexobj(values):
            values = values.astype(np.float64)
        self.mesh = mesh
        self.values = values

    # -- algebra ----------------------------------------------------------

    def _coerce(self, other):
        if isinstance(other, MeshFunction):
            if other.mesh != self.mesh:
                raise ValueError("mesh mismatch")
            return other.values
        return other

    def __add__(self, other):
        return MeshFunction(self.mesh, self.values + self._coerce(other))

    __radd__ = __add__

    def __sub__(self, other):
        return MeshFunction(self.mesh, self.values - self._coerce(other))

    def __mul__(self, other):
        return MeshFunction(self.mesh, self.values * self._coerce(other))

    __rmul__ = __mul__

    def __truediv__(self, other):
        return MeshFunction(self.mesh, self.values / self._coerce(other))

    def __abs__(self):
        return MeshFunction(self.mesh, np.abs(self.values))

    def power(self, expo: float) -> "MeshFunction":
        return MeshFunction(self.mesh, self.values ** expo)

    def band(self, b: int) -> np.ndarray:
        return self.mesh.band(self.values, b)

    # -- measure ----------------------------------------------------------

    def integral(self, alpha: float, weight: "MeshFunction | None" = None):
        cm = self.mesh.cell_mass(alpha)
        if weight is None:
            return (self.values * cm).sum()
        return (self.values * weight.values * cm).sum()

    def refine(self, new_depth: int) -> "MeshFunction":
        """Re-express on a deeper mesh; all integrals are preserved exactly."""
        if new_depth < self.mesh.depth:
            raise ValueError("refinement cannot decrease the depth")
        out = self
        while out.mesh.depth < new_depth:
            deep = np.repeat(out.band(out.mesh.depth), 2)
            out = MeshFunction(Mesh(out.mesh.depth + 1),
                               np.concatenate([out.values, deep]))
        return out

    # -- serialization ----------------------------------------------------

    def to_json(self, alpha_list=()) -> str:
        vals = self.values
        payload = {"depth": self.mesh.depth, "alpha_list": list(alpha_list)}
        if np.iscomplexobj(vals):
            payload["values"] = [[float(v.real), float(v.imag)] for v in vals]
        else:
            payload["values"] = [float(v) for v in vals]
        return json.dumps(payload)

    @staticmethod
    def from_json(text: str) -> "MeshFunction":
        payload = json.loads(text)
        mesh = Mesh(int(payload["depth"]))
        raw = payload["values"]
        if raw and isinstance(raw[0], list):
            values = np.array([complex(a, b) for a, b in raw])
        else:
            values = np.array(raw, dtype=np.float64)
        return MeshFunction(mesh, values)


def unit_function(mesh: Mesh) -> MeshFunction:
    return MeshFunction(mesh, np.ones(mesh.ncells))


def indicator(mesh: Mesh, cell_indices) -> MeshFunction:
    v = np.zeros(mesh.ncells)
    v[np.asarray(cell_indices, dtype=np.int64)] = 1.0
    return MeshFunction(mesh, v)


# ---------------------------------------------------------------------------
# overlay mesh: common angular refinement of both grids, per band
# ---------------------------------------------------------------------------


class OverlayMesh:
    """Band-wise refinement at the breakpoints of both grids.

    Band b holds 2^(b+1) segments whose endpoints are exact integers over
    the denominator 3 * 2^b; each segment lies inside one unshifted-grid cell
    and inside one shifted-grid arc, recorded as index maps.
    """

    def __init__(self, mesh: Mesh):
        self.mesh = mesh
        J = mesh.depth
        self.seg_start_num: list[np.ndarray] = []
        self.seg_len: list[np.ndarray] = []
        self.seg_d0: list[np.ndarray] = []
        self.seg_d13: list[np.ndarray] = []
        self.offsets = [0]
        for b in range(J + 1):
            n = 1 << b
            denom = 3 * n
            d0 = 3 * np.arange(n, dtype=np.int64)
            d13 = (3 * np.arange(n, dtype=np.int64) + n) % denom
            nums = np.sort(np.concatenate([d0, d13]))
            lens = np.diff(np.append(nums, nums[0] + denom))
            self.seg_start_num.append(nums)
            self.seg_len.append(lens / denom)
            self.seg_d0.append(nums // 3)
            self.seg_d13.append(((nums - n) % denom) // 3)
            self.offsets.append(self.offsets[-1] + 2 * n)
        self.nsegs = self.offsets[-1]
        self._seg_mass: dict[float, list[np.ndarray]] = {}

    def seg_mass(self, alpha: float) -> list[np.ndarray]:
        alpha = check_alpha(alpha)
        got = self._seg_mass.get(alpha)
        if got is None:
            rho = self.mesh.radial_mass(alpha)
            got = [self.seg_len[b] * rho[b] for b in range(self.mesh.n_bands)]
            self._seg_mass[alpha] = got
        return got

    def locate(self, b: int, theta: float) -> int:
        denom = 3 * (1 << b)
        num = int((float(theta) % 1.0) * denom)
        return int(np.searchsorted(self.seg_start_num[b], num, side="right")) - 1

    def __eq__(self, other):
        return isinstance(other, OverlayMesh) and other.mesh == self.mesh

    def __hash__(self):
        return hash(("OverlayMesh", self.mesh.depth))


_OVERLAY_CACHE: dict[int, OverlayMesh] = {}


def overlay_mesh(mesh: Mesh) -> OverlayMesh:
    got = _OVERLAY_CACHE.get(mesh.depth)
    if got is None:
        got = OverlayMesh(mesh)
        _OVERLAY_CACHE[mesh.depth] = got
    return got


class OverlayFunction:
    """One value per overlay segment, stored band by band."""

    def __init__(self, overlay: OverlayMesh, bands: list[np.ndarray]):
        if len(bands) != overlay.mesh.n_bands:
            raise ValueError("band count mismatch")
        self.overlay = overlay
        self.bands = [np.asarray(a) for a in bands]

    def _coerce(self, other):
        if isinstance(other, OverlayFunction):
            if other.overlay != self.overlay:
                raise ValueError("overlay mismatch")
            return other.bands
        if isinstance(other, MeshFunction):
            return embed_on_overlay(other, self.overlay).bands
        return [other] * len(self.bands)

    def _zip(self, other, op):
        ob = self._coerce(other)
        return OverlayFunction(
            self.overlay, [op(a, b) for a, b in zip(self.bands, ob)]
        )

    def __add__(self, other):
        return self._zip(other, lambda a, b: a + b)

    __radd__ = __add__

    def __mul__(self, other):
        return self._zip(other, lambda a, b: a * b)

    __rmul__ = __mul__

    def __truediv__(self, other):
        return self._zip(other, lambda a, b: a / b)

    def __abs__(self):
        return OverlayFunction(self.overlay, [np.abs(a) for a in self.bands])

    def evaluate_at(self, theta: float, r: float):
        b = self.overlay.mesh.band_of_radius(r)
        return self.bands[b][self.overlay.locate(b, theta)]

    def integral(self, alpha: float, weight: MeshFunction | None = None):
        sm = self.overlay.seg_mass(alpha)
        total = 0.0
        for b in range(self.overlay.mesh.n_bands):
            piece = self.bands[b] * sm[b]
            if weight is not None:
                piece = piece * weight.band(b)[self.overlay.seg_d0[b]]
            total += piece.sum()
        return total


def embed_on_overlay(f: MeshFunction, overlay: OverlayMesh | None = None) -> OverlayFunction:
    overlay = overlay or overlay_mesh(f.mesh)
    if overlay.mesh != f.mesh:
        raise ValueError("overlay belongs to a different mesh")
    return OverlayFunction(
        overlay, [f.band(b)[overlay.seg_d0[b]] for b in range(f.mesh.n_bands)]
    )


# ---------------------------------------------------------------------------
# norms, averages, weak quasi-norms
# ---------------------------------------------------------------------------


def _values_and_masses(f, weight, alpha):
    """Flatten |f| values against their weighted cell masses."""
    if isinstance(f, MeshFunction):
        masses = f.mesh.cell_mass(alpha).copy()
        if weight is not None:
            masses *= weight.values
        return np.abs(f.values), masses
    if isinstance(f, OverlayFunction):
        ov = f.overlay
        sm = ov.seg_mass(alpha)
        vals, masses = [], []
        for b in range(ov.mesh.n_bands):
            m = sm[b].copy()
            if weight is not None:
                m *= weight.band(b)[ov.seg_d0[b]]
            vals.append(np.abs(f.bands[b]))
            masses.append(m)
        return np.concatenate(vals), np.concatenate(masses)
    raise TypeError(f"unsupported function type {type(f)!r}")


def lp_norm(f, weight, p: float, alpha: float) -> float:
    """L^p norm against weight * dA_alpha; exact cellwise sum."""
    if p < 1.0:
        raise ValueError(f"p must be >= 1, got {p}")
    vals, masses = _values_and_masses(f, weight, alpha)
    return float((vals ** p * masses).sum() ** (1.0 / p))


def weak_quasinorm(f, weight, alpha: float) -> float:
    """sup_t t * mass(|f| > t); attained at the distinct values of |f|."""
    vals, masses = _values_and_masses(f, weight, alpha)
    order = np.argsort(vals)[::-1]
    v = vals[order]
    cum = np.cumsum(masses[order])
    if len(v) == 0:
        return 0.0
    # for each distinct value, the mass of {|f| >= value} is the cumulative
    # mass through its last occurrence
    last = np.nonzero(np.append(v[1:] != v[:-1], True))[0]
    return float(np.max(v[last] * cum[last]))


def region_integral(f, region: Region, alpha: float,
                    weight: MeshFunction | None = None):
    """Integral of f * weight over an annular sector, by exact overlap."""
    alpha = check_alpha(alpha)
    a1 = alpha + 1.0
    if isinstance(f, MeshFunction):
        mesh = f.mesh
        n_bands = mesh.n_bands

        def band_data(b):
            n = 1 << b
            starts = np.arange(n) * (2.0 ** -b)
            widths = 2.0 ** -b
            vals = f.band(b)
            w = weight.band(b) if weight is not None else None
            return starts, widths, vals, w
    elif isinstance(f, OverlayFunction):
        mesh = f.overlay.mesh
        n_bands = mesh.n_bands
        ov = f.overlay

        def band_data(b):
            denom = 3 * (1 << b)
            starts = ov.seg_start_num[b] / denom
            widths = ov.seg_len[b]
            vals = f.bands[b]
            w = weight.band(b)[ov.seg_d0[b]] if weight is not None else None
            return starts, widths, vals, w
    else:
        raise TypeError(f"unsupported function type {type(f)!r}")

    s = float(region.theta_start) % 1.0
    L = float(region.theta_len)
    total = 0.0
    for b in range(n_bands):
        r1 = max(mesh.band_r_lo[b], region.r_inner)
        r2 = min(mesh.band_r_hi[b], region.r_outer)
        if r2 <= r1:
            continue
        rad = one_minus_sq(r1) ** a1 - one_minus_sq(r2) ** a1
        starts, widths, vals, w = band_data(b)
        ends = starts + widths
        ov_len = np.maximum(0.0, np.minimum(s + L, ends) - np.maximum(s, starts))
        ov_len += np.maximum(
            0.0, np.minimum(s - 1.0 + L, ends) - np.maximum(s - 1.0, starts)
        )
        piece = vals * ov_len
        if w is not None:
            piece = piece * w
        total += rad * piece.sum()
    return total


def weighted_average(f, u: MeshFunction | None, region: Region, alpha: float):
    """Average of f over a region against u * dA_alpha (u omitted = plain)."""
    if isinstance(f, MeshFunction):
        ones = unit_function(f.mesh)
    else:
        ones = OverlayFunction(
            f.overlay, [np.ones_like(b, dtype=np.float64) for b in f.bands]
        )
    denom = region_integral(ones, region, alpha, weight=u)
    if denom <= 0.0:
        raise ValueError("region has zero mass under the given measure")
    return region_integral(f, region, alpha, weight=u) / denom


# ---------------------------------------------------------------------------
# exact monomial averages and random sampling of the measure
# ---------------------------------------------------------------------------


def monomial_mesh_function(mesh: Mesh, zpow: int, zbarpow: int,
                           alpha: float) -> MeshFunction:
    """Exact cellwise dA_alpha averages of z^zpow * conj(z)^zbarpow."""
    alpha = check_alpha(alpha)
    d = zpow - zbarpow
    p = (zpow + zbarpow) / 2.0 + 1.0
    q = alpha + 1.0
    rho = mesh.radial_mass(alpha)
    out = np.empty(mesh.ncells, dtype=np.complex128)
    bnorm = beta_fn(p, q)
    for b in range(mesh.n_bands):
        w = 2.0 ** -b
        t0 = np.arange(1 << b) * w
        if d == 0:
            ang = np.ones(1 << b, dtype=np.complex128)
        else:
            ang = (np.exp(2j * np.pi * d * (t0 + w)) - np.exp(2j * np.pi * d * t0))
            ang /= 2j * np.pi * d * w
        x0 = mesh.band_r_lo[b] ** 2
        x1 = mesh.band_r_hi[b] ** 2
        radial = (alpha + 1.0) * bnorm * (betainc(p, q, x1) - betainc(p, q, x0))
        mesh_band = mesh.band(out, b)
        mesh_band[:] = ang * (radial / rho[b])
    return MeshFunction(mesh, out)


def monomial_integral(zpow: int, zbarpow: int, alpha: float) -> float:
    """Closed-form disk integral of z^m conj(z)^n against dA_alpha."""
    if zpow != zbarpow:
        return 0.0
    m = zpow
    alpha = check_alpha(alpha)
    return float(math.factorial(m) * math.gamma(2.0 + alpha)
                 / math.gamma(m + 2.0 + alpha))


def sample_measure(alpha: float, n: int, rng) -> tuple[np.ndarray, np.ndarray]:
    """Draw (theta, r) samples distributed as dA_alpha (for MC oracles)."""
    alpha = check_alpha(alpha)
    theta = rng.random(n)
    u = rng.random(n)
    r = np.sqrt(1.0 - u ** (1.0 / (alpha + 1.0)))
    return theta, r
