"""Low-level box algebra on the dyadic hierarchy.

Everything here works on per-level numpy arrays in heap order.  Integrals
over unshifted-grid boxes are bottom-up pair sums; integrals over
shifted-grid boxes use per-band circular prefix sums with the two fractional
end cells resolved by integer arithmetic (the shift contributes an exact
offset of (2^b mod 3)/3 of a cell width at band b).  Running maxima/sums
down ancestor chains power the maximal operators and the sparse operators.
"""

from __future__ import annotations

import numpy as np

from .mesh import Mesh, MeshFunction, OverlayFunction, OverlayMesh


def band_list(mesh: Mesh, flat: np.ndarray) -> list[np.ndarray]:
    return [mesh.band(flat, b) for b in range(mesh.n_bands)]


def level_box_masses(mesh: Mesh, alpha: float) -> np.ndarray:
    """Mass of one level-k box, k = 0..J (grid independent)."""
    h = 2.0 ** -np.arange(mesh.n_bands)
    return h * (h * (2.0 - h)) ** (alpha + 1.0)


def band_cell_masses(mesh: Mesh, alpha: float) -> np.ndarray:
    """Mass of one band-b cell (equals the mass of a level-b grid top)."""
    rho = mesh.radial_mass(alpha)
    return rho * 2.0 ** -np.arange(mesh.n_bands)


def d0_box_sums(mesh: Mesh, cell_terms: np.ndarray) -> list[np.ndarray]:
    """Per level k: sums of cell_terms over each unshifted-grid box."""
    out = [None] * mesh.n_bands
    acc = mesh.band(cell_terms, mesh.depth).copy()
    out[mesh.depth] = acc
    for b in range(mesh.depth - 1, -1, -1):
        acc = acc.reshape(-1, 2).sum(axis=1) + mesh.band(cell_terms, b)
        out[b] = acc
    return out


def _ring_range_sums(csum: np.ndarray, a: np.ndarray, count: int, n: int) -> np.ndarray:
    """Sums of `count` consecutive ring entries starting at index a (mod n)."""
    if count <= 0:
        return np.zeros_like(a, dtype=csum.dtype)
    end = a + count
    wrap = end > n
    hi = np.minimum(end, n)
    res = csum[hi] - csum[a]
    if wrap.any():
        res = res + np.where(wrap, csum[np.maximum(end - n, 0)], 0.0)
    return res


def d13_box_sums(mesh: Mesh, cell_terms: np.ndarray) -> list[np.ndarray]:
    """Per level k: sums of cell_terms over each shifted-grid box.

    A shifted arc at level k covers, inside band b >= k, a run of 2^(b-k)
    cell widths starting (2^b mod 3)/3 of the way into some cell.
    """
    J = mesh.depth
    out = [np.zeros(1 << k) for k in range(J + 1)]
    for b in range(J + 1):
        n = 1 << b
        rho = n % 3  # intracell offset numerator, in thirds
        terms = mesh.band(cell_terms, b)
        csum = np.concatenate([[0.0], np.cumsum(terms)])
        frac_first = (3 - rho) / 3.0
        frac_last = rho / 3.0
        for k in range(b + 1):
            width = 1 << (b - k)
            m = np.arange(1 << k, dtype=np.int64)
            start_num = (3 * m * width + n) % (3 * n)
            i0 = start_num // 3
            i_last = (i0 + width) % n
            full = _ring_range_sums(csum, (i0 + 1) % n, width - 1, n)
            out[k] += frac_first * terms[i0] + full + frac_last * terms[i_last]
    return out


def box_sums(mesh: Mesh, cell_terms: np.ndarray, shifted: bool) -> list[np.ndarray]:
    return d13_box_sums(mesh, cell_terms) if shifted else d0_box_sums(mesh, cell_terms)


def chain_max(levels: list[np.ndarray]) -> list[np.ndarray]:
    """Running max down ancestor chains, from level 0."""
    out = [levels[0].copy()]
    for b in range(1, len(levels)):
        out.append(np.maximum(np.repeat(out[-1], 2), levels[b]))
    return out


def chain_sum(levels: list[np.ndarray]) -> list[np.ndarray]:
    """Running sum down ancestor chains, from level 0."""
    out = [levels[0].copy()]
    for b in range(1, len(levels)):
        out.append(np.repeat(out[-1], 2) + levels[b])
    return out


def chain_or(levels: list[np.ndarray]) -> list[np.ndarray]:
    out = [levels[0].copy()]
    for b in range(1, len(levels)):
        out.append(np.repeat(out[-1], 2) | levels[b])
    return out


def rooted_power_integrals(avgs: list[np.ndarray], cellmass: np.ndarray,
                           exponent: float) -> list[np.ndarray]:
    """Per root level j: integral over each box of (rooted running max)^e.

    The rooted maximal function is constant on grid tops and on the deepest
    boxes, whose masses per level are the entries of `cellmass`; the result
    is  sum_{b>=j} cellmass[b] * blocksum((running max from j)^e).
    """
    n_levels = len(avgs)
    out = []
    for j in range(n_levels):
        run = avgs[j].copy()
        acc = cellmass[j] * run ** exponent
        for b in range(j + 1, n_levels):
            run = np.maximum(np.repeat(run, 2), avgs[b])
            acc = acc + cellmass[b] * (run ** exponent).reshape(1 << j, -1).sum(axis=1)
        out.append(acc)
    return out


def shifted_arc_index(b: int, k: int, cell_m: np.ndarray,
                      endpoint: str) -> np.ndarray:
    """Index of the shifted level-k arc over a band-b cell endpoint."""
    n = 1 << b
    denom = 3 * n
    span = 3 * (1 << (b - k))
    if endpoint == "left":
        num = (3 * cell_m - n) % denom
    else:
        num = (3 * (cell_m + 1) - 1 - n) % denom
    return num // span


def cell_max_over_shifted(mesh: Mesh, avgs13: list[np.ndarray]) -> np.ndarray:
    """Per cell: max of shifted-box averages over boxes meeting the cell."""
    out = np.full(mesh.ncells, -np.inf)
    for b in range(mesh.n_bands):
        m = np.arange(1 << b, dtype=np.int64)
        best = np.full(1 << b, -np.inf)
        for k in range(b + 1):
            il = shifted_arc_index(b, k, m, "left")
            ir = shifted_arc_index(b, k, m, "right")
            best = np.maximum(best, np.maximum(avgs13[k][il], avgs13[k][ir]))
        mesh.band(out, b)[:] = best
    return out


def weighted_box_averages(mesh: Mesh, f: MeshFunction, alpha: float,
                          shifted: bool,
                          u: MeshFunction | None = None) -> list[np.ndarray]:
    """Per level: u dA_alpha averages of |f| over the grid boxes."""
    cm = mesh.cell_mass(alpha)
    uvals = u.values if u is not None else 1.0
    num = box_sums(mesh, np.abs(f.values) * uvals * cm, shifted)
    den = box_sums(mesh, uvals * cm if u is not None else cm, shifted)
    return [n / d for n, d in zip(num, den)]


def sparse_chain_sums(mesh: Mesh, f: MeshFunction, alpha: float,
                      shifted: bool) -> list[np.ndarray]:
    """Per level: cumulative sums of box averages down ancestor chains."""
    return chain_sum(weighted_box_averages(mesh, f, alpha, shifted))


def overlay_from_chain(overlay: OverlayMesh, chains: list[np.ndarray],
                       shifted: bool) -> OverlayFunction:
    """Gather per-level chain arrays onto the overlay segments."""
    key = overlay.seg_d13 if shifted else overlay.seg_d0
    bands = [chains[b][key[b]] for b in range(overlay.mesh.n_bands)]
    return OverlayFunction(overlay, bands)


def covered_cells(mesh: Mesh, members: list[np.ndarray]) -> np.ndarray:
    """Flat bool mask of cells covered by the union of marked grid boxes."""
    cov = chain_or([m.astype(bool) for m in members])
    out = np.zeros(mesh.ncells, dtype=bool)
    for b in range(mesh.n_bands):
        mesh.band(out, b)[:] = cov[b]
    return out


def union_box_mass(mesh: Mesh, members: list[np.ndarray], alpha: float,
                   shifted: bool, weight: MeshFunction | None = None) -> float:
    """Weighted mass of the union of the marked grid boxes."""
    cov = chain_or([m.astype(bool) for m in members])
    total = 0.0
    if not shifted:
        cm = mesh.cell_mass(alpha)
        for b in range(mesh.n_bands):
            sel = cov[b]
            piece = mesh.band(cm, b)[sel]
            if weight is not None:
                piece = piece * weight.band(b)[sel]
            total += piece.sum()
        return float(total)
    from .mesh import overlay_mesh
    ov = overlay_mesh(mesh)
    sm = ov.seg_mass(alpha)
    for b in range(mesh.n_bands):
        sel = cov[b][ov.seg_d13[b]]
        piece = sm[b][sel]
        if weight is not None:
            piece = piece * weight.band(b)[ov.seg_d0[b]][sel]
        total += piece.sum()
    return float(total)
