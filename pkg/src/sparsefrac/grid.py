"""Dyadic grid families and piecewise-constant mesh functions on a box.

Everything lives on a half-open root box [o, o+L)^n with n = 1 or 2.  A
grid family holds the 2^n one-third-shifted dyadic grids; a cube is
addressed by (grid_id, level, integer coords) and its corners are exact
rationals with denominator 3 * 2^level, so nesting and disjointness tests
are pure integer arithmetic.  Mesh functions are arrays of cell values at
depth K with a precomputed cumulative table, giving O(1) box integrals
that are exact for boxes cutting through cells (the shifted grids are not
mesh aligned, so partial-cell overlap is the common case, not the
exception).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Callable, Iterator, Sequence

import numpy as np

__all__ = [
    "RootBox",
    "DyadicCube",
    "DyadicGridFamily",
    "GridFunction",
    "read_gridfunction",
    "write_gridfunction",
]

_MAX_DEPTH = {1: 12, 2: 8}


@dataclass(frozen=True)
class RootBox:
    """Half-open box [origin, origin + side)^n carrying all data."""

    origin: tuple[float, ...]
    side: float

    def __post_init__(self):
        n = len(self.origin)
        if n not in (1, 2):
            raise ValueError(f"dimension must be 1 or 2, got {n}")
        if not self.side > 0:
            raise ValueError("root box side must be positive")

    @property
    def n(self) -> int:
        return len(self.origin)

    @property
    def volume(self) -> float:
        return self.side ** self.n

    @property
    def lo(self) -> np.ndarray:
        return np.asarray(self.origin, dtype=float)

    @property
    def hi(self) -> np.ndarray:
        return self.lo + self.side

    def contains(self, x: Sequence[float]) -> bool:
        x = np.asarray(x, dtype=float)
        return bool(np.all(x >= self.lo) and np.all(x < self.hi))


@dataclass(frozen=True, order=True)
class DyadicCube:
    """Addressed cube: grid index, refinement level, integer coordinates.

    The geometry (corner positions, side length) is owned by the grid
    family; a cube by itself is just an address.
    """

    grid_id: int
    level: int
    coords: tuple[int, ...]


class DyadicGridFamily:
    """The 2^n alternating one-third-shifted dyadic grids over a root box.

    Grid g has shift t = shift_thirds[g] / 3 componentwise; its level-k
    cubes are  s_k * ([0,1)^n + m + (-1)^k t)  with s_k = side * 2^-k,
    translated by the root origin.  The alternating sign makes each grid
    genuinely dyadic (level-(k+1) cubes refine level-k cubes) because
    3 * (-1)^k t is an integer vector.  Grids are materialized over an
    ambient box that extends the root box by one root side in every
    direction, so coarse shifted cubes covering the support exist.
    """

    def __init__(self, root: RootBox, max_level: int):
        n = root.n
        cap = _MAX_DEPTH[n]
        if not 0 < max_level <= cap:
            raise ValueError(f"max_level must be in [1, {cap}] for n={n}")
        self.root = root
        self.max_level = max_level
        # lexicographic over {0,1}^n; grid 0 is the unshifted, mesh-aligned grid
        self.shift_thirds = [
            tuple((g >> d) & 1 for d in range(n)) for g in range(2 ** n)
        ]

    @property
    def n(self) -> int:
        return self.root.n

    @property
    def num_grids(self) -> int:
        return len(self.shift_thirds)

    @property
    def ambient_lo(self) -> np.ndarray:
        return self.root.lo - self.root.side

    @property
    def ambient_hi(self) -> np.ndarray:
        return self.root.lo + 2.0 * self.root.side

    def is_aligned(self, grid_id: int) -> bool:
        """True for the unshifted grid, whose cubes are unions of mesh cells."""
        return all(t == 0 for t in self.shift_thirds[grid_id])

    def side_at(self, level: int) -> float:
        return self.root.side * 2.0 ** (-level)

    def volume_at(self, level: int) -> float:
        return self.side_at(level) ** self.n

    def _check_grid(self, grid_id: int) -> None:
        if not 0 <= grid_id < self.num_grids:
            raise ValueError(f"grid_id must be in [0, {self.num_grids})")

    def _check_level(self, level: int) -> None:
        if not 0 <= level <= self.max_level:
            raise ValueError(
                f"level {level} out of range [0, {self.max_level}]"
            )

    def _shift_signs(self, grid_id: int, level: int) -> tuple[int, ...]:
        # 3 * (-1)^level * t, an integer in {-1, 0, 1} per component
        sign = 1 if level % 2 == 0 else -1
        return tuple(sign * t for t in self.shift_thirds[grid_id])

    # -- exact geometry ---------------------------------------------------

    def cube_bounds_thirds(self, cube: DyadicCube):
        """Corner numerators over the exact denominator 3 * 2^level.

        Returns (lo_num, hi_num, denom) with corner = origin + side*num/denom.
        """
        e = self._shift_signs(cube.grid_id, cube.level)
        lo = tuple(3 * m + ei for m, ei in zip(cube.coords, e))
        hi = tuple(v + 3 for v in lo)
        return lo, hi, 3 * (1 << cube.level)

    def cube_bounds(self, cube: DyadicCube) -> tuple[np.ndarray, np.ndarray]:
        lo_num, hi_num, denom = self.cube_bounds_thirds(cube)
        scale = self.root.side / denom
        lo = self.root.lo + scale * np.asarray(lo_num, dtype=float)
        hi = self.root.lo + scale * np.asarray(hi_num, dtype=float)
        return lo, hi

    def relation(self, p: DyadicCube, q: DyadicCube) -> str:
        """Exact set relation of two same-grid cubes.

        Returns one of "equal", "p_in_q", "q_in_p", "disjoint".
        """
        if p.grid_id != q.grid_id:
            raise ValueError("cubes from different grids")
        kmax = max(p.level, q.level)
        plo, phi, pd = self.cube_bounds_thirds(p)
        qlo, qhi, qd = self.cube_bounds_thirds(q)
        pf, qf = (3 << kmax) // pd, (3 << kmax) // qd
        plo = [v * pf for v in plo]
        phi = [v * pf for v in phi]
        qlo = [v * qf for v in qlo]
        qhi = [v * qf for v in qhi]
        if plo == qlo and phi == qhi:
            return "equal"
        if all(a <= b and c <= d for a, b, c, d in zip(qlo, plo, phi, qhi)):
            return "p_in_q"
        if all(a <= b and c <= d for a, b, c, d in zip(plo, qlo, qhi, phi)):
            return "q_in_p"
        if any(b <= a or d <= c for a, b, c, d in zip(plo, qhi, qlo, phi)):
            return "disjoint"
        return "overlap"  # impossible for a valid dyadic grid

    # -- navigation -------------------------------------------------------

    def containing_cube(self, grid_id: int, level: int, x: Sequence[float]) -> DyadicCube:
        """The unique half-open cube of the grid/level containing x."""
        self._check_grid(grid_id)
        self._check_level(level)
        x = np.atleast_1d(np.asarray(x, dtype=float))
        if np.any(x < self.ambient_lo) or np.any(x >= self.ambient_hi):
            raise ValueError(f"point {x.tolist()} outside the ambient box")
        s = self.side_at(level)
        e = self._shift_signs(grid_id, level)
        m = tuple(
            int(math.floor((x[d] - self.root.origin[d]) / s - e[d] / 3.0))
            for d in range(self.n)
        )
        return DyadicCube(grid_id, level, m)

    def children(self, cube: DyadicCube) -> list[DyadicCube]:
        self._check_level(cube.level + 1)
        e = self._shift_signs(cube.grid_id, cube.level)
        base = tuple(2 * m + ei for m, ei in zip(cube.coords, e))
        kids = []
        for j in range(2 ** self.n):
            off = tuple((j >> d) & 1 for d in range(self.n))
            kids.append(
                DyadicCube(
                    cube.grid_id,
                    cube.level + 1,
                    tuple(b + o for b, o in zip(base, off)),
                )
            )
        return kids

    def parent(self, cube: DyadicCube) -> DyadicCube:
        if cube.level == 0:
            raise ValueError("level-0 cube has no parent in the materialized grid")
        e = self._shift_signs(cube.grid_id, cube.level - 1)
        m = tuple((mi - ei) >> 1 for mi, ei in zip(cube.coords, e))
        return DyadicCube(cube.grid_id, cube.level - 1, m)

    def coord_range(self, grid_id: int, level: int) -> tuple[tuple[int, int], ...]:
        """Per-dimension [m_min, m_max] of cubes intersecting the ambient box."""
        self._check_grid(grid_id)
        self._check_level(level)
        e = self._shift_signs(grid_id, level)
        out = []
        for ei in e:
            # cube [s(m + e/3), s(m+1+e/3)) meets [-L, 2L) in root-relative units
            m_min = (-3 * (1 << level) - 3 - ei) // 3 + 1
            m_max = (3 * (2 << level) - ei - 1) // 3
            out.append((m_min, m_max))
        return tuple(out)

    def enumerate_cubes(self, grid_id: int, levels) -> Iterator[DyadicCube]:
        """All cubes of the grid at the given level(s) meeting the ambient box."""
        if isinstance(levels, int):
            levels = [levels]
        for k in levels:
            rng = self.coord_range(grid_id, k)
            if self.n == 1:
                for m0 in range(rng[0][0], rng[0][1] + 1):
                    yield DyadicCube(grid_id, k, (m0,))
            else:
                for m0 in range(rng[0][0], rng[0][1] + 1):
                    for m1 in range(rng[1][0], rng[1][1] + 1):
                        yield DyadicCube(grid_id, k, (m0, m1))

    def cubes_inside_root(self, grid_id: int, level: int) -> list[DyadicCube]:
        """Cubes at one level fully contained in the root box (exact test)."""
        self._check_grid(grid_id)
        self._check_level(level)
        e = self._shift_signs(grid_id, level)
        full = 3 * (1 << level)
        ranges = []
        for ei in e:
            # need 3m + e >= 0 and 3m + e + 3 <= 3*2^k
            m_min = math.ceil(-ei / 3)
            m_max = (full - 3 - ei) // 3
            ranges.append((m_min, m_max))
        out = []
        if self.n == 1:
            for m0 in range(ranges[0][0], ranges[0][1] + 1):
                out.append(DyadicCube(grid_id, level, (m0,)))
        else:
            for m0 in range(ranges[0][0], ranges[0][1] + 1):
                for m1 in range(ranges[1][0], ranges[1][1] + 1):
                    out.append(DyadicCube(grid_id, level, (m0, m1)))
        return out

    def smallest_covering_cube(self, lo, hi):
        """Smallest family cube containing the box [lo, hi), or None.

        Scans every grid from fine to coarse.  The one-third shifts
        guarantee a hit with side at most 6x the box side whenever the box
        is small relative to the root box (this is the covering trick that
        lets a finite grid family stand in for all cubes).
        """
        lo = np.atleast_1d(np.asarray(lo, dtype=float))
        hi = np.atleast_1d(np.asarray(hi, dtype=float))
        eps = 1e-12 * self.root.side
        best = None
        for g in range(self.num_grids):
            for k in range(self.max_level, -1, -1):
                if self.side_at(k) < np.max(hi - lo):
                    continue
                cube = self.containing_cube(g, k, lo)
                clo, chi = self.cube_bounds(cube)
                if np.all(lo >= clo - eps) and np.all(hi <= chi + eps):
                    if best is None or cube.level > best.level:
                        best = cube
                    break  # finer levels of this grid cannot contain the box
        return best


class GridFunction:
    """Piecewise-constant function on the finest dyadic mesh of a root box.

    Cell values are stored in C order, cells[i] spanning
    [o + i*h, o + (i+1)*h) per axis with h = side * 2^-depth.  The function
    is extended by zero outside the root box.  A cumulative table in
    extended precision makes box integrals exact up to a few ulps even
    when the query box cuts cells.
    """

    def __init__(self, root: RootBox, cells: np.ndarray):
        cells = np.ascontiguousarray(cells, dtype=np.float64)
        n = root.n
        if cells.ndim != n:
            raise ValueError(f"cells must be {n}-dimensional")
        m = cells.shape[0]
        depth = m.bit_length() - 1
        if m != 2 ** depth or any(s != m for s in cells.shape):
            raise ValueError("cells must have shape (2^K,) * n")
        if depth < 1 or depth > _MAX_DEPTH[n]:
            raise ValueError(
                f"depth {depth} outside [1, {_MAX_DEPTH[n]}] for n={n}"
            )
        self.root = root
        self.depth = depth
        self.cells = cells
        self.cells.flags.writeable = False
        cum = cells.astype(np.longdouble)
        for ax in range(n):
            cum = np.cumsum(cum, axis=ax)
        pad = [(1, 0)] * n
        self._cum = np.pad(cum, pad)

    # -- constructors -----------------------------------------------------

    @classmethod
    def constant(cls, root: RootBox, depth: int, value: float) -> "GridFunction":
        shape = (2 ** depth,) * root.n
        return cls(root, np.full(shape, float(value)))

    @classmethod
    def from_callable(cls, root: RootBox, depth: int, fn: Callable) -> "GridFunction":
        """Sample fn at cell centers (fn takes per-axis coordinate arrays)."""
        m = 2 ** depth
        axes = [
            root.origin[d] + (np.arange(m) + 0.5) * root.side / m
            for d in range(root.n)
        ]
        if root.n == 1:
            vals = fn(axes[0])
        else:
            x0, x1 = np.meshgrid(axes[0], axes[1], indexing="ij")
            vals = fn(x0, x1)
        return cls(root, np.broadcast_to(np.asarray(vals, float), (m,) * root.n).copy())

    @classmethod
    def indicator(cls, root: RootBox, depth: int, lo, hi) -> "GridFunction":
        """Mesh projection of the indicator of [lo, hi): exact overlap fractions."""
        m = 2 ** depth
        h = root.side / m
        lo = np.atleast_1d(np.asarray(lo, dtype=float))
        hi = np.atleast_1d(np.asarray(hi, dtype=float))
        axes = []
        for d in range(root.n):
            u = np.clip((lo[d] - root.origin[d]) / h, 0.0, m)
            v = np.clip((hi[d] - root.origin[d]) / h, 0.0, m)
            j = np.arange(m)
            w = np.minimum(v, j + 1.0) - np.maximum(u, j)
            axes.append(np.clip(w, 0.0, 1.0))
        cells = axes[0] if root.n == 1 else np.outer(axes[0], axes[1])
        return cls(root, cells)

    def with_cells(self, cells: np.ndarray) -> "GridFunction":
        return GridFunction(self.root, cells)

    # -- basic queries ----------------------------------------------------

    @property
    def n(self) -> int:
        return self.root.n

    @property
    def num_cells(self) -> int:
        return self.cells.size

    @property
    def cell_side(self) -> float:
        return self.root.side / 2 ** self.depth

    @property
    def cell_volume(self) -> float:
        return self.cell_side ** self.n

    def cell_centers(self) -> list[np.ndarray]:
        m = 2 ** self.depth
        return [
            self.root.origin[d] + (np.arange(m) + 0.5) * self.root.side / m
            for d in range(self.n)
        ]

    def cell_bounds(self, index: tuple[int, ...]) -> tuple[np.ndarray, np.ndarray]:
        h = self.cell_side
        lo = self.root.lo + h * np.asarray(index, dtype=float)
        return lo, lo + h

    def integral(self) -> float:
        return float(self._cum.flat[-1] * self.cell_volume)

    def min_cell(self) -> float:
        return float(self.cells.min())

    def max_cell(self) -> float:
        return float(self.cells.max())

    # -- exact box integration ---------------------------------------------

    def _prefix(self, *coords):
        """Fractional cumulative sum at coordinates given in cell units."""
        m = 2 ** self.depth
        idx, frac = [], []
        for x in coords:
            x = np.clip(x, 0.0, float(m))
            i = np.clip(np.floor(x).astype(np.int64), 0, m - 1)
            idx.append(i)
            frac.append(x - i)
        c = self._cum
        if self.n == 1:
            (i,), (fx,) = idx, frac
            return c[i] + fx * self.cells[i]
        (i, j), (fx, fy) = idx, frac
        base = c[i, j]
        return (
            base
            + fx * (c[i + 1, j] - base)
            + fy * (c[i, j + 1] - base)
            + fx * fy * self.cells[i, j]
        )

    def box_integrals(self, lo, hi) -> np.ndarray:
        """Exact integrals over half-open boxes; lo, hi have shape (..., n).

        The function is extended by zero outside the root box, so queries
        may extend past it.  Partial-cell overlap is handled exactly for
        the stored piecewise-constant data.
        """
        lo = np.asarray(lo, dtype=float)
        hi = np.asarray(hi, dtype=float)
        h = self.cell_side
        u = (lo - self.root.lo) / h
        v = (hi - self.root.lo) / h
        if self.n == 1:
            out = self._prefix(v[..., 0]) - self._prefix(u[..., 0])
        else:
            u0, u1 = u[..., 0], u[..., 1]
            v0, v1 = v[..., 0], v[..., 1]
            out = (
                self._prefix(v0, v1)
                - self._prefix(u0, v1)
                - self._prefix(v0, u1)
                + self._prefix(u0, u1)
            )
        return np.asarray(out * np.longdouble(self.cell_volume), dtype=float)

    def box_integral(self, lo, hi) -> float:
        lo = np.atleast_1d(np.asarray(lo, dtype=float))
        hi = np.atleast_1d(np.asarray(hi, dtype=float))
        if np.any(hi <= lo):
            return 0.0
        return float(self.box_integrals(lo[None, :], hi[None, :])[0])

    def box_average(self, lo, hi) -> float:
        """Integral over the full box volume (zero extension included)."""
        lo = np.atleast_1d(np.asarray(lo, dtype=float))
        hi = np.atleast_1d(np.asarray(hi, dtype=float))
        vol = float(np.prod(hi - lo))
        if vol <= 0:
            raise ValueError("degenerate box")
        return self.box_integral(lo, hi) / vol

    def box_overlap(self, lo, hi):
        """Cells meeting [lo, hi) inside the root box, with overlap fractions.

        Returns (slices, frac) where frac has the sliced shape and entries
        in [0, 1] measured in cell units; frac * cell_volume is the overlap
        measure.  Empty intersection gives zero-size slices.
        """
        m = 2 ** self.depth
        h = self.cell_side
        lo = np.atleast_1d(np.asarray(lo, dtype=float))
        hi = np.atleast_1d(np.asarray(hi, dtype=float))
        slices, axes = [], []
        for d in range(self.n):
            u = np.clip((lo[d] - self.root.origin[d]) / h, 0.0, m)
            v = np.clip((hi[d] - self.root.origin[d]) / h, 0.0, m)
            i0 = int(math.floor(u)) if u < v else 0
            i1 = int(math.ceil(v)) if u < v else 0
            j = np.arange(i0, i1)
            w = np.minimum(v, j + 1.0) - np.maximum(u, j)
            slices.append(slice(i0, i1))
            axes.append(np.clip(w, 0.0, 1.0))
        if self.n == 1:
            return (slices[0],), axes[0]
        return (slices[0], slices[1]), np.outer(axes[0], axes[1])

    # -- arithmetic ---------------------------------------------------------

    def _same_mesh(self, other: "GridFunction") -> None:
        if self.root != other.root or self.depth != other.depth:
            raise ValueError("mesh mismatch")

    def __add__(self, other):
        if isinstance(other, GridFunction):
            self._same_mesh(other)
            return self.with_cells(self.cells + other.cells)
        return self.with_cells(self.cells + float(other))

    def __sub__(self, other):
        if isinstance(other, GridFunction):
            self._same_mesh(other)
            return self.with_cells(self.cells - other.cells)
        return self.with_cells(self.cells - float(other))

    def __mul__(self, other):
        if isinstance(other, GridFunction):
            self._same_mesh(other)
            return self.with_cells(self.cells * other.cells)
        return self.with_cells(self.cells * float(other))

    __rmul__ = __mul__

    def __abs__(self):
        return self.with_cells(np.abs(self.cells))

    def power(self, exponent: float) -> "GridFunction":
        return self.with_cells(self.cells ** float(exponent))


# -- serialization ----------------------------------------------------------

_MAGIC = "sparsefrac-gridfunction"


def write_gridfunction(gf: GridFunction, path, fmt: str = "bin") -> None:
    """Write a mesh function; 'bin' and 'csv' both round-trip exactly."""
    header = {
        "format": _MAGIC,
        "version": 1,
        "dimension": gf.n,
        "depth": gf.depth,
        "origin": list(gf.root.origin),
        "side": gf.root.side,
    }
    if fmt == "bin":
        with open(path, "wb") as fh:
            fh.write(json.dumps(header, sort_keys=True).encode() + b"\n")
            fh.write(gf.cells.astype("<f8").tobytes())
    elif fmt == "csv":
        with open(path, "w") as fh:
            fh.write("dimension,depth,side," +
                     ",".join(f"origin_{d}" for d in range(gf.n)) + "\n")
            fh.write(
                f"{gf.n},{gf.depth},{gf.root.side!r},"
                + ",".join(repr(o) for o in gf.root.origin) + "\n"
            )
            fh.write("value\n")
            for v in gf.cells.ravel():
                fh.write(f"{v:.17g}\n")
    else:
        raise ValueError(f"unknown format {fmt!r}")


def read_gridfunction(path, fmt: str = "bin") -> GridFunction:
    if fmt == "bin":
        with open(path, "rb") as fh:
            header = json.loads(fh.readline())
            if header.get("format") != _MAGIC:
                raise ValueError("not a gridfunction file")
            raw = fh.read()
        n, depth = header["dimension"], header["depth"]
        cells = np.frombuffer(raw, dtype="<f8").reshape((2 ** depth,) * n)
        root = RootBox(tuple(header["origin"]), header["side"])
        return GridFunction(root, cells.copy())
    if fmt == "csv":
        with open(path) as fh:
            names = fh.readline().strip().split(",")
            vals = fh.readline().strip().split(",")
            if names[:3] != ["dimension", "depth", "side"]:
                raise ValueError("not a gridfunction csv")
            n, depth = int(vals[0]), int(vals[1])
            side = float(vals[2])
            origin = tuple(float(v) for v in vals[3:3 + n])
            if fh.readline().strip() != "value":
                raise ValueError("missing value column")
            cells = np.array([float(line) for line in fh], dtype=float)
        root = RootBox(origin, side)
        return GridFunction(root, cells.reshape((2 ** depth,) * n))
    raise ValueError(f"unknown format {fmt!r}")
