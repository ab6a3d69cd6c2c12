"""Brute-force reference implementations used as test oracles.

Everything here works from first principles: per-cell overlap fractions
computed with min/max, plain loops over cubes, no cumulative tables and
no vectorized block tricks, so these stay independent of the accelerated
paths they check.
"""

import numpy as np

from sparsefrac.grid import DyadicGridFamily, GridFunction
from sparsefrac.orlicz import YoungFunction, luxemburg_norm_arrays


def cell_bounds(f: GridFunction, index):
    h = f.cell_side
    lo = [f.root.origin[d] + index[d] * h for d in range(f.n)]
    return lo, [v + h for v in lo]


def overlap_fraction(f: GridFunction, index, lo, hi) -> float:
    clo, chi = cell_bounds(f, index)
    frac = 1.0
    for d in range(f.n):
        frac *= max(0.0, min(chi[d], hi[d]) - max(clo[d], lo[d])) / f.cell_side
    return frac


def all_indices(f: GridFunction):
    m = 2 ** f.depth
    if f.n == 1:
        return [(i,) for i in range(m)]
    return [(i, j) for i in range(m) for j in range(m)]


def overlap_weights(f: GridFunction, lo, hi):
    """Overlap fraction of every cell with [lo, hi), by direct min/max."""
    m = 2 ** f.depth
    h = f.cell_side
    axes = []
    for d in range(f.n):
        cell_lo = f.root.origin[d] + np.arange(m) * h
        w = np.minimum(cell_lo + h, hi[d]) - np.maximum(cell_lo, lo[d])
        axes.append(np.clip(w, 0.0, h) / h)
    return axes[0] if f.n == 1 else np.outer(axes[0], axes[1])


def naive_box_integral(f: GridFunction, lo, hi) -> float:
    total = 0.0
    for idx in all_indices(f):
        frac = overlap_fraction(f, idx, lo, hi)
        if frac > 0:
            total += f.cells[idx] * frac * f.cell_volume
    return total


def naive_cube_average(f: GridFunction, family: DyadicGridFamily, cube) -> float:
    lo, hi = family.cube_bounds(cube)
    return naive_box_integral(f, lo, hi) / family.volume_at(cube.level)


def centers_in(f: GridFunction, lo, hi):
    axes = f.cell_centers()
    masks = [(axes[d] >= lo[d]) & (axes[d] < hi[d]) for d in range(f.n)]
    if f.n == 1:
        return masks[0]
    return masks[0][:, None] & masks[1][None, :]


def naive_dyadic_integral(f, alpha, family, grid_id):
    out = np.zeros_like(f.cells)
    for k in range(f.depth + 1):
        s = family.side_at(k)
        for cube in family.enumerate_cubes(grid_id, k):
            lo, hi = family.cube_bounds(cube)
            mask = centers_in(f, lo, hi)
            if not mask.any():
                continue
            w = overlap_weights(f, lo, hi)
            avg = float((f.cells * w).sum()) * f.cell_volume / family.volume_at(k)
            out[mask] += s ** alpha * avg
    return out


def naive_sparse_integral(f, alpha, family, cubes):
    out = np.zeros_like(f.cells)
    for cube in cubes:
        lo, hi = family.cube_bounds(cube)
        mask = centers_in(f, lo, hi)
        if not mask.any():
            continue
        avg = naive_box_integral(f, lo, hi) / family.volume_at(cube.level)
        out[mask] += family.side_at(cube.level) ** alpha * avg
    return out


def naive_dyadic_maximal(f, alpha, family, grid_id):
    out = np.zeros_like(f.cells)
    for k in range(f.depth + 1):
        s = family.side_at(k)
        for cube in family.enumerate_cubes(grid_id, k):
            lo, hi = family.cube_bounds(cube)
            mask = centers_in(f, lo, hi)
            if not mask.any():
                continue
            w = overlap_weights(f, lo, hi)
            avg = float((np.abs(f.cells) * w).sum()) * f.cell_volume / family.volume_at(k)
            out[mask] = np.maximum(out[mask], s ** alpha * avg)
    return out


def naive_orlicz_maximal(f, sigma, alpha, phi: YoungFunction, family, grid_id):
    out = np.zeros_like(f.cells)
    for k in range(f.depth + 1):
        for cube in family.enumerate_cubes(grid_id, k):
            lo, hi = family.cube_bounds(cube)
            mask = centers_in(f, lo, hi)
            if not mask.any():
                continue
            w = overlap_weights(f, lo, hi)
            live = w > 0
            vals = f.cells[live]
            masses = (sigma.cells * w)[live] * f.cell_volume
            total = masses.sum()
            if total <= 0:
                continue
            norm = luxemburg_norm_arrays(vals, masses, phi)
            out[mask] = np.maximum(out[mask], total ** (alpha / f.n) * norm)
    return out


def naive_commutator(b, f, alpha, family, grid_id):
    out = np.zeros_like(f.cells)
    for k in range(f.depth + 1):
        s = family.side_at(k)
        factor = s ** alpha / family.volume_at(k)
        for cube in family.enumerate_cubes(grid_id, k):
            lo, hi = family.cube_bounds(cube)
            mask = centers_in(f, lo, hi)
            if not mask.any():
                continue
            w = overlap_weights(f, lo, hi)
            live = w > 0
            ys = b.cells[live]
            fx = (f.cells * w)[live] * f.cell_volume
            xs = b.cells[mask]
            inner = np.array([(np.abs(x - ys) * fx).sum() for x in xs])
            out[mask] += factor * inner
    return out


def naive_weak_quasinorm(values, density: GridFunction, q: float) -> float:
    """Histogram-style scan over every distinct output level."""
    mass = (density.cells * density.cell_volume).ravel()
    vals = values.ravel()
    best = 0.0
    for t in np.unique(vals):
        if t <= 0:
            continue
        best = max(best, t * mass[vals >= t].sum() ** (1.0 / q))
    return best
