"""Sparse family extraction, certification, and domination checks.

Two stopping-time constructions are provided.  The geometric-threshold
levels S_k collect, for each k, the maximal grid cubes whose average
crosses a^k; level-0 cubes have no parent in the materialized grid, so
they are maximal whenever their own average qualifies.  The operator
domination uses the recursive principal-cube construction seeded at the
level-0 cubes: children are the maximal descendants whose average jumps
by the factor a = 2^(n+1), which forces the half-density condition by
construction for every cube including the seeds.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .grid import DyadicCube, DyadicGridFamily, GridFunction
from .operators import (
    cells_in_cube,
    _cube_slices,
    commutator_1d,
    dyadic_commutator,
    dyadic_fractional_integral,
    sparse_fractional_integral,
)

__all__ = [
    "SparseFamily",
    "SparseCertificate",
    "DominationReport",
    "cz_stopping_cubes",
    "sparse_select_for_operator",
    "certify_sparse",
    "verify_sparse_domination",
    "verify_commutator_domination",
    "sparse_family_to_json",
    "sparse_family_from_json",
]


@dataclass
class SparseFamily:
    """A collection of cubes from one grid, ordered coarse to fine."""

    grid_id: int
    cubes: list[DyadicCube] = field(default_factory=list)

    def __post_init__(self):
        if any(c.grid_id != self.grid_id for c in self.cubes):
            raise ValueError("cubes from mixed grids")
        self.cubes = sorted(set(self.cubes))

    def __len__(self) -> int:
        return len(self.cubes)

    def __iter__(self):
        return iter(self.cubes)


@dataclass
class SparseCertificate:
    """Outcome of the two sparseness conditions on the cell mesh."""

    ok: bool
    min_density: float
    disjoint: bool
    first_violation: DyadicCube | None
    carriers: dict


@dataclass
class DominationReport:
    max_ratio: float
    positivity_ok: bool
    cells_compared: int
    detail: dict = field(default_factory=dict)


def _cube_average(f: GridFunction, family: DyadicGridFamily, cube: DyadicCube) -> float:
    lo, hi = family.cube_bounds(cube)
    return f.box_integral(lo, hi) / family.volume_at(cube.level)


def cz_stopping_cubes(
    g: GridFunction,
    family: DyadicGridFamily,
    grid_id: int,
    a: float | None = None,
) -> dict[int, list[DyadicCube]]:
    """Stopping levels S_k: maximal grid cubes with average above a^k.

    Maximality is within the materialized levels 0..K, so a level-0 cube
    is selected whenever its own average qualifies.  Every selected cube
    with a parent satisfies the bracket a^k < avg <= 2^n a^k; level-0
    cubes only satisfy the lower half.  Thresholds run over the integer k
    with a^k inside the range of positive cube averages.  Requires
    a > 2^n; returns {} for g identically zero.
    """
    n = family.n
    if a is None:
        a = float(2 ** (n + 1))
    if not a > 2 ** n:
        raise ValueError(f"threshold ratio must exceed 2^n = {2 ** n}")
    if g.min_cell() < 0:
        raise ValueError("stopping cubes need a non-negative function")
    depth = g.depth
    averages: dict[DyadicCube, float] = {}
    for k in range(depth + 1):
        for cube in family.enumerate_cubes(grid_id, k):
            averages[cube] = _cube_average(g, family, cube)
    positive = [v for v in averages.values() if v > 0]
    if not positive:
        return {}
    k_lo = math.floor(math.log(min(positive), a))
    k_hi = math.ceil(math.log(max(positive), a))
    roots = [c for c in family.enumerate_cubes(grid_id, 0) if averages[c] > 0]
    levels: dict[int, list[DyadicCube]] = {}
    for k in range(k_lo, k_hi + 1):
        thr = a ** k
        selected: list[DyadicCube] = []

        def descend(cube: DyadicCube):
            if averages[cube] > thr:
                selected.append(cube)
                return
            if cube.level >= depth:
                return
            for child in family.children(cube):
                if averages.get(child, 0.0) > 0:
                    descend(child)

        for root_cube in roots:
            descend(root_cube)
        if selected:
            levels[k] = sorted(selected)
    return levels


def sparse_select_for_operator(
    f: GridFunction,
    family: DyadicGridFamily,
    grid_id: int,
    a: float | None = None,
) -> SparseFamily:
    """Principal cubes of f: the sparse family dominating the dyadic integral.

    Seeded at the level-0 cubes carrying mass; below a selected cube the
    next generation is the maximal descendants whose average exceeds
    a * (the cube's average).  Disjoint children then cover at most 1/a of
    the parent, so the family is sparse by construction, and between
    consecutive selections the operator's level sums are geometric.
    """
    n = family.n
    if a is None:
        a = float(2 ** (n + 1))
    if not a > 2 ** n:
        raise ValueError(f"threshold ratio must exceed 2^n = {2 ** n}")
    if f.min_cell() < 0:
        raise ValueError("sparse selection needs a non-negative function")
    depth = f.depth
    selected: list[DyadicCube] = []

    def build(cube: DyadicCube, base_avg: float):
        selected.append(cube)
        if cube.level >= depth:
            return
        stack = list(family.children(cube))
        while stack:
            cand = stack.pop()
            avg = _cube_average(f, family, cand)
            if avg > a * base_avg:
                build(cand, avg)
            elif cand.level < depth and avg > 0:
                stack.extend(family.children(cand))

    for cube in family.enumerate_cubes(grid_id, 0):
        avg = _cube_average(f, family, cube)
        if avg > 0:
            build(cube, avg)
    return SparseFamily(grid_id, selected)


def certify_sparse(
    sparse: SparseFamily, family: DyadicGridFamily, depth: int
) -> SparseCertificate:
    """Check carrier disjointness and the half-density condition.

    Carriers are cell masks (the cube's cells minus the cells of its
    selected strict descendants) and their disjointness is exact cell-level
    set algebra.  Densities are geometric: the measure removed from a cube
    is the total volume of its maximal selected strict descendants, which
    is exact for every grid, including shifted cubes that extend past the
    root box where no cells live.
    """
    cubes = sparse.cubes
    shape = (2 ** depth,) * family.n
    masks = []
    inside = [[] for _ in cubes]  # indices of strict descendants per cube
    for i, c in enumerate(cubes):
        mask = np.zeros(shape, dtype=bool)
        mask[_cube_slices(cells_in_cube(family, c, depth))] = True
        masks.append(mask)
        for j, other in enumerate(cubes):
            if other != c and family.relation(other, c) == "p_in_q":
                inside[i].append(j)
    carriers = {}
    count = np.zeros(shape, dtype=np.int64)
    min_density = math.inf
    first_violation = None
    for i, q in enumerate(cubes):
        carrier = masks[i].copy()
        descendants = inside[i]
        for j in descendants:
            carrier &= ~masks[j]
        carriers[q] = carrier
        count += carrier
        maximal = [
            j for j in descendants
            if not any(
                k != j and family.relation(cubes[j], cubes[k]) == "p_in_q"
                for k in descendants
            )
        ]
        removed = sum(family.volume_at(cubes[j].level) for j in maximal)
        density = 1.0 - removed / family.volume_at(q.level)
        if density < min_density:
            min_density = density
        if density < 0.5 and first_violation is None:
            first_violation = q
    disjoint = bool(np.all(count <= 1))
    ok = disjoint and first_violation is None
    return SparseCertificate(ok, min_density, disjoint, first_violation, carriers)


def verify_sparse_domination(
    f: GridFunction, alpha: float, family: DyadicGridFamily, grid_id: int
) -> DominationReport:
    """Cellwise ratio of the full dyadic integral to its sparse majorant."""
    sparse = sparse_select_for_operator(f, family, grid_id)
    full = dyadic_fractional_integral(f, alpha, family, grid_id).cells
    part = sparse_fractional_integral(f, alpha, family, sparse.cubes).cells
    pos = part > 0
    positivity_ok = bool(np.all(pos[full > 0]))
    ratio = float(np.max(full[pos] / part[pos])) if pos.any() else 0.0
    return DominationReport(
        ratio, positivity_ok, int(pos.sum()), {"family_size": len(sparse), "sparse": sparse}
    )


def verify_commutator_domination(
    b: GridFunction, f: GridFunction, alpha: float, family: DyadicGridFamily
) -> DominationReport:
    """|[b, I_alpha] f| against the grid-family max of the dyadic commutators."""
    if f.n != 1:
        raise ValueError("the continuous side needs n = 1")
    lhs = np.abs(commutator_1d(b, f, alpha).cells)
    rhs = None
    for g in range(family.num_grids):
        vals = dyadic_commutator(b, f, alpha, family, g).cells
        rhs = vals if rhs is None else np.maximum(rhs, vals)
    # the continuous side is a difference of two potentials, so cells where
    # it cancels to rounding noise carry no information about the ratio
    meaningful = lhs > 1e-13 * max(float(lhs.max()), 1.0)
    positivity_ok = bool(np.all(rhs[meaningful] > 0))
    live = meaningful & (rhs > 0)
    ratio = float(np.max(lhs[live] / rhs[live])) if live.any() else 0.0
    return DominationReport(ratio, positivity_ok, int(live.sum()))


# -- serialization -------------------------------------------------------------


def sparse_family_to_json(
    sparse: SparseFamily, certificate: SparseCertificate | None = None
) -> str:
    doc = {
        "format": "sparsefrac-sparse-family",
        "version": 1,
        "grid_id": sparse.grid_id,
        "cubes": [[c.level, list(c.coords)] for c in sparse.cubes],
    }
    if certificate is not None:
        doc["certificate"] = {
            "ok": certificate.ok,
            "min_density": certificate.min_density,
            "disjoint": certificate.disjoint,
        }
    return json.dumps(doc, sort_keys=True, indent=2)


def sparse_family_from_json(text: str) -> SparseFamily:
    doc = json.loads(text)
    if doc.get("format") != "sparsefrac-sparse-family":
        raise ValueError("not a sparse family document")
    gid = doc["grid_id"]
    cubes = [DyadicCube(gid, lvl, tuple(coords)) for lvl, coords in doc["cubes"]]
    return SparseFamily(gid, cubes)
