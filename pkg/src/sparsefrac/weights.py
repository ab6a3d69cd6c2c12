"""Weights, weighted averages, and Muckenhoupt-type characteristics.

The supremum over all cubes in the continuum definitions is replaced by a
finite battery: every cube of every grid in the family, up to a chosen
level, that sits fully inside the root box.  Battery values are lower
bounds for the true characteristics; all verification routines use the
same battery value on both sides of an inequality, which keeps each check
self-consistent.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .grid import DyadicCube, DyadicGridFamily, GridFunction, RootBox

__all__ = [
    "ExponentTriple",
    "Weight",
    "CubeBattery",
    "weighted_measure",
    "weighted_average",
    "apq_characteristic",
    "a1q_characteristic",
    "ap_characteristic",
    "a1_characteristic",
    "ainfty_characteristic",
    "reverse_holder_exponent",
    "implied_reverse_holder_constant",
    "ainfty_subset_bounds",
    "power_weight",
    "step_weight",
    "admissible_gamma_range",
    "named_center",
    "RH_CAP",
]

RH_CAP = 64.0


@dataclass(frozen=True)
class ExponentTriple:
    """Exponents (n, alpha, p) with q tied by 1/p - 1/q = alpha/n.

    For p = 1 the conjugate p' is infinite and q/p' is read as 0, so the
    induced class index r collapses to 1.
    """

    n: int
    alpha: float
    p: float

    def __post_init__(self):
        if self.n not in (1, 2):
            raise ValueError("n must be 1 or 2")
        if not 0 < self.alpha < self.n:
            raise ValueError("alpha must lie in (0, n)")
        if not 1 <= self.p < self.n / self.alpha:
            raise ValueError("p must lie in [1, n/alpha)")

    @property
    def q(self) -> float:
        return 1.0 / (1.0 / self.p - self.alpha / self.n)

    @property
    def p_prime(self) -> float:
        return math.inf if self.p == 1 else self.p / (self.p - 1.0)

    @property
    def q_prime(self) -> float:
        return self.q / (self.q - 1.0)

    @property
    def q_over_p_prime(self) -> float:
        return 0.0 if self.p == 1 else self.q / self.p_prime

    @property
    def r(self) -> float:
        return 1.0 + self.q_over_p_prime

    @property
    def r_prime(self) -> float:
        return math.inf if self.r == 1.0 else self.r / (self.r - 1.0)

    @property
    def weak_power(self) -> float:
        return 1.0 + self.q

    @property
    def strong_power(self) -> float:
        return 1.0 + self.q / self.p_prime + self.p_prime / self.p

    @property
    def commutator_power(self) -> float:
        return max(self.p_prime, self.q) + self.strong_power - 1.0


class CubeBattery:
    """Finite stand-in for "all cubes": every family cube inside the root box.

    Cubes of all 2^n grids at levels 0..max_level are collected in a fixed
    deterministic order; averages over the whole battery are evaluated in
    one vectorized sweep.
    """

    def __init__(self, family: DyadicGridFamily, max_level: int):
        if not 0 <= max_level <= family.max_level:
            raise ValueError("battery level out of range")
        self.family = family
        self.max_level = max_level
        cubes: list[DyadicCube] = []
        for g in range(family.num_grids):
            for k in range(max_level + 1):
                cubes.extend(family.cubes_inside_root(g, k))
        if not cubes:
            raise ValueError("empty battery")
        self.cubes = cubes
        lo = np.empty((len(cubes), family.n))
        hi = np.empty((len(cubes), family.n))
        for i, c in enumerate(cubes):
            lo[i], hi[i] = family.cube_bounds(c)
        self._lo, self._hi = lo, hi
        self._vol = np.array([family.volume_at(c.level) for c in cubes])

    def __len__(self) -> int:
        return len(self.cubes)

    @property
    def key(self):
        return (self.family.root, self.family.max_level, self.max_level)

    def bounds(self, i: int):
        return self._lo[i], self._hi[i]

    def volumes(self) -> np.ndarray:
        return self._vol

    def averages(self, gf: GridFunction) -> np.ndarray:
        """Plain averages of gf over every battery cube."""
        return gf.box_integrals(self._lo, self._hi) / self._vol

    def cell_min(self, gf: GridFunction) -> np.ndarray:
        """Per-cube minimum over cells meeting the cube with positive measure."""
        out = np.empty(len(self.cubes))
        for i in range(len(self.cubes)):
            sl, frac = gf.box_overlap(self._lo[i], self._hi[i])
            vals = gf.cells[sl]
            out[i] = vals[frac > 1e-9].min()
        return out

    def cell_max_abs(self, gf: GridFunction) -> np.ndarray:
        out = np.empty(len(self.cubes))
        for i in range(len(self.cubes)):
            sl, frac = gf.box_overlap(self._lo[i], self._hi[i])
            vals = np.abs(gf.cells[sl])
            out[i] = vals[frac > 1e-9].max()
        return out


class Weight:
    """Strictly positive mesh function with cached cellwise powers."""

    def __init__(self, base: GridFunction):
        if base.min_cell() <= 0:
            raise ValueError("weight cells must be strictly positive")
        self.base = base
        self._powers: dict[float, GridFunction] = {1.0: base}
        self._chars: dict[tuple, float] = {}

    def power(self, exponent: float) -> GridFunction:
        exponent = float(exponent)
        got = self._powers.get(exponent)
        if got is None:
            got = self.base.power(exponent)
            self._powers[exponent] = got
        return got

    def sigma(self, e: ExponentTriple) -> GridFunction:
        """w^{-p'}, the dual-side measure density (p > 1 only)."""
        if e.p == 1:
            raise ValueError("sigma is undefined at p = 1")
        return self.power(-e.p_prime)

    def v(self, e: ExponentTriple) -> GridFunction:
        """w^q, the target-side measure density."""
        return self.power(e.q)

    def cached_characteristic(self, key: tuple, compute):
        got = self._chars.get(key)
        if got is None:
            got = compute()
            self._chars[key] = got
        return got


# -- weighted measures and averages ------------------------------------------


def weighted_measure(sigma: GridFunction, lo, hi) -> float:
    """sigma-measure of a box, sigma extended by zero off the root box."""
    return sigma.box_integral(lo, hi)


def weighted_average(f: GridFunction, lo, hi, sigma: GridFunction) -> float:
    """Average of f over the box against d(sigma) = sigma dx."""
    f._same_mesh(sigma)
    mass = sigma.box_integral(lo, hi)
    if mass <= 0:
        raise ValueError("degenerate measure on the box")
    return (f * sigma).box_integral(lo, hi) / mass


# -- characteristics ----------------------------------------------------------


def apq_characteristic(w: Weight, e: ExponentTriple, battery: CubeBattery) -> float:
    """Battery maximum of (avg w^q)^(1/q) (avg w^-p')^(1/p'); needs p > 1."""
    if e.p == 1:
        raise ValueError("use a1q_characteristic for p = 1")

    def compute():
        av = battery.averages(w.v(e))
        au = battery.averages(w.sigma(e))
        return float(np.max(av ** (1.0 / e.q) * au ** (1.0 / e.p_prime)))

    return w.cached_characteristic(("apq", battery.key, e), compute)


def a1q_characteristic(w: Weight, e: ExponentTriple, battery: CubeBattery) -> float:
    """Battery maximum of (avg w^q)^(1/q) * esssup_Q w^-1 for p = 1 exponents."""
    if e.p != 1:
        raise ValueError("a1q_characteristic requires p = 1")

    def compute():
        av = battery.averages(w.v(e))
        inv = 1.0 / battery.cell_min(w.base)
        return float(np.max(av ** (1.0 / e.q) * inv))

    return w.cached_characteristic(("a1q", battery.key, e), compute)


def ap_characteristic(sigma: GridFunction, p: float, battery: CubeBattery) -> float:
    """Classical A_p battery characteristic of a positive density."""
    if p < 1:
        raise ValueError("p must be >= 1")
    if p == 1:
        return a1_characteristic(sigma, battery)
    pp = p / (p - 1.0)
    a = battery.averages(sigma)
    b = battery.averages(sigma.power(1.0 - pp))
    return float(np.max(a * b ** (p - 1.0)))


def a1_characteristic(sigma: GridFunction, battery: CubeBattery) -> float:
    a = battery.averages(sigma)
    inv = 1.0 / battery.cell_min(sigma)
    return float(np.max(a * inv))


def ainfty_characteristic(sigma: GridFunction, context_p: float, battery: CubeBattery) -> float:
    """Operational A_infinity value: the A_p characteristic at the contextual p.

    Every use downstream is through the bound by an A_p characteristic, so
    no separate A_infinity definition is introduced.
    """
    return ap_characteristic(sigma, context_p, battery)


def reverse_holder_exponent(
    sigma: GridFunction,
    battery: CubeBattery,
    cap: float = RH_CAP,
    tol: float = 1e-6,
) -> float:
    """Largest s in [1, cap] with (avg sigma^s)^(1/s) <= 2 avg sigma on the battery.

    Found by bisection; returns cap when the inequality still holds there,
    and 1.0 when it already fails just above 1.
    """

    def holds(s: float) -> bool:
        a = battery.averages(sigma.power(s)) ** (1.0 / s)
        return bool(np.all(a <= 2.0 * battery.averages(sigma)))

    if not holds(1.0 + 1e-9):
        return 1.0
    if holds(cap):
        return cap
    lo_s, hi_s = 1.0 + 1e-9, cap
    while hi_s - lo_s > tol:
        mid = 0.5 * (lo_s + hi_s)
        if holds(mid):
            lo_s = mid
        else:
            hi_s = mid
    return lo_s


def implied_reverse_holder_constant(
    sigma: GridFunction, context_p: float, battery: CubeBattery
) -> tuple[float, float]:
    """Measured reverse-Holder exponent and the dimensional constant it implies.

    The sharp form writes s = 1 + 1/(c [sigma]_Ainf) with an unspecified
    dimensional c; nothing assumes a value for it, so we solve for
    c = 1/((s - 1) [sigma]_Ainf) from the measured s and only ever assert
    that these stay bounded over the weight battery.  Capped s makes the
    reported c a lower bound.
    """
    s = reverse_holder_exponent(sigma, battery)
    ainf = ainfty_characteristic(sigma, context_p, battery)
    if s <= 1.0:
        return s, math.inf
    return s, 1.0 / ((s - 1.0) * ainf)


def ainfty_subset_bounds(
    sigma: GridFunction,
    cube_lo,
    cube_hi,
    cell_mask: np.ndarray,
    p: float,
    characteristic: float,
    rh_exponent: float,
) -> tuple[float, float, float, float]:
    """Both subset inequalities for sigma on E inside Q.

    E is a union of finest cells given as a boolean mask over the whole
    mesh.  Returns (lhs1, rhs1, lhs2, rhs2) for
        (|E|/|Q|)^p <= [sigma]_{A_p} sigma(E)/sigma(Q)   and
        sigma(E)/sigma(Q) <= 2 (|E|/|Q|)^(1/s').
    Empty E gives zeros on the left sides.
    """
    cube_lo = np.atleast_1d(np.asarray(cube_lo, dtype=float))
    cube_hi = np.atleast_1d(np.asarray(cube_hi, dtype=float))
    vol_q = float(np.prod(cube_hi - cube_lo))
    mass_q = sigma.box_integral(cube_lo, cube_hi)
    vol_e = float(cell_mask.sum()) * sigma.cell_volume
    mass_e = float(sigma.cells[cell_mask].sum()) * sigma.cell_volume
    frac = vol_e / vol_q
    lhs1 = frac ** p
    rhs1 = characteristic * mass_e / mass_q
    lhs2 = mass_e / mass_q
    if rh_exponent <= 1.0:
        rhs2 = math.inf
    else:
        s_prime = rh_exponent / (rh_exponent - 1.0)
        rhs2 = 2.0 * frac ** (1.0 / s_prime)
    return lhs1, rhs1, lhs2, rhs2


# -- the weight test battery ---------------------------------------------------


def named_center(root: RootBox, name) -> tuple[float, ...]:
    """Resolve a singularity location: 'center', 'corner', 'third', or coords."""
    if isinstance(name, (tuple, list)):
        return tuple(float(v) for v in name)
    offsets = {"center": 0.5, "corner": 0.0, "third": 1.0 / 3.0}
    if name not in offsets:
        raise ValueError(f"unknown center {name!r}")
    return tuple(o + offsets[name] * root.side for o in root.origin)


def admissible_gamma_range(e: ExponentTriple) -> tuple[float, float]:
    """Open range of exponents gamma with |x - x0|^gamma in the weight class.

    Membership of the power weight follows from w^q in A_r, which holds
    exactly when -n < gamma q < n (r - 1); at p = 1 the upper end is 0.
    """
    return (-e.n / e.q, e.n / e.p_prime if e.p > 1 else 0.0)


def _power_cell_average_1d(a: float, b: float, x0: float, gamma: float) -> float:
    g1 = gamma + 1.0
    if g1 <= 0:
        raise ValueError("gamma must exceed -1 for an integrable 1-d weight")

    def anti(t):
        return math.copysign(abs(t) ** g1, t) / g1

    return (anti(b - x0) - anti(a - x0)) / (b - a)


_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(6)


def _power_cell_average_2d(lo, hi, x0, gamma, tol=1e-10):
    """Average of |x - x0|^gamma over a rectangle containing the singularity.

    Recursive dyadic refinement toward x0: boxes well separated from x0
    get tensor Gauss-Legendre, the rest are split, and the ball around x0
    is closed with the exact radial bound once its contribution is below
    tolerance.  gamma > -2 keeps everything integrable.
    """
    if gamma <= -2:
        raise ValueError("gamma must exceed -2 for an integrable 2-d weight")
    x0 = np.asarray(x0, dtype=float)

    def gauss(b_lo, b_hi):
        mid = 0.5 * (b_lo + b_hi)
        half = 0.5 * (b_hi - b_lo)
        xs = mid[0] + half[0] * _GL_NODES
        ys = mid[1] + half[1] * _GL_NODES
        dx = xs[:, None] - x0[0]
        dy = ys[None, :] - x0[1]
        vals = (dx * dx + dy * dy) ** (gamma / 2.0)
        wts = _GL_WEIGHTS[:, None] * _GL_WEIGHTS[None, :]
        return float((vals * wts).sum() * half[0] * half[1])

    total_vol = float(np.prod(np.asarray(hi) - np.asarray(lo)))
    acc = 0.0
    stack = [(np.asarray(lo, dtype=float), np.asarray(hi, dtype=float), 0)]
    while stack:
        b_lo, b_hi, depth = stack.pop()
        diam = float(np.linalg.norm(b_hi - b_lo))
        d = float(np.linalg.norm(np.clip(x0, b_lo, b_hi) - x0))
        if d >= diam:
            acc += gauss(b_lo, b_hi)
            continue
        # ball bound: integral over the box is under the full radial integral
        ball = 2.0 * math.pi * diam ** (gamma + 2.0) / (gamma + 2.0)
        if depth >= 48 or ball < tol * max(abs(acc), 1e-300):
            acc += ball if gamma < 0 else gauss(b_lo, b_hi)
            continue
        mid = 0.5 * (b_lo + b_hi)
        for i in range(2):
            for j in range(2):
                s_lo = np.array([b_lo[0] if i == 0 else mid[0],
                                 b_lo[1] if j == 0 else mid[1]])
                s_hi = np.array([mid[0] if i == 0 else b_hi[0],
                                 mid[1] if j == 0 else b_hi[1]])
                stack.append((s_lo, s_hi, depth + 1))
    return acc / total_vol


def power_weight(root: RootBox, depth: int, gamma: float, x0) -> Weight:
    """w(x) = |x - x0|^gamma sampled at cell centers.

    Cells whose closure contains x0 take the exact analytic cell average
    instead (center sampling there would be undefined or wildly unstable).
    """
    x0 = named_center(root, x0)
    m = 2 ** depth
    h = root.side / m
    if root.n == 1:
        centers = root.origin[0] + (np.arange(m) + 0.5) * h
        cells = np.abs(centers - x0[0]) ** gamma
        i0 = int(np.clip(math.floor((x0[0] - root.origin[0]) / h), 0, m - 1))
        for i in {max(i0 - 1, 0), i0, min(i0 + 1, m - 1)}:
            a = root.origin[0] + i * h
            if a <= x0[0] <= a + h:
                cells[i] = _power_cell_average_1d(a, a + h, x0[0], gamma)
    else:
        c0 = root.origin[0] + (np.arange(m) + 0.5) * h
        c1 = root.origin[1] + (np.arange(m) + 0.5) * h
        dx = c0[:, None] - x0[0]
        dy = c1[None, :] - x0[1]
        cells = (dx * dx + dy * dy) ** (gamma / 2.0)
        i0 = int(np.clip(math.floor((x0[0] - root.origin[0]) / h), 0, m - 1))
        j0 = int(np.clip(math.floor((x0[1] - root.origin[1]) / h), 0, m - 1))
        for i in range(max(i0 - 1, 0), min(i0 + 2, m)):
            for j in range(max(j0 - 1, 0), min(j0 + 2, m)):
                lo = (root.origin[0] + i * h, root.origin[1] + j * h)
                hi = (lo[0] + h, lo[1] + h)
                if lo[0] <= x0[0] <= hi[0] and lo[1] <= x0[1] <= hi[1]:
                    cells[i, j] = _power_cell_average_2d(lo, hi, x0, gamma)
    return Weight(GridFunction(root, cells))


def step_weight(root: RootBox, depth: int, low: float = 1.0, high: float = 3.0) -> Weight:
    """Two-level weight: low on the left half (axis 0), high on the right."""
    m = 2 ** depth
    half = m // 2
    cells = np.full((m,) * root.n, float(high))
    cells[:half] = low
    return Weight(GridFunction(root, cells))
