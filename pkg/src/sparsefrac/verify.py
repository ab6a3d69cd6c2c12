"""End-to-end verification of the weighted norm inequalities.

Each verifier computes the two sides of one inequality on discretized
data and reports the measured constant lhs / (characteristic^power *
input-norm).  The absolute constants are unknowable, so batteries follow
a calibration protocol: the unweighted runs (characteristic 1) fix a
reference constant and every weighted case must stay within 4x of it.
Measured constants are also swept in the mesh depth to check refinement
stability, and the growth of the normalized left side against the
characteristic is slope-fitted to confirm the stated powers suffice.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .grid import DyadicCube, DyadicGridFamily, GridFunction, RootBox
from .operators import (
    bmo_norm,
    cells_in_cube,
    _cube_slices,
    dyadic_commutator,
    dyadic_fractional_integral,
    inner_outer_split,
    level_set_cubes,
    sparse_fractional_integral,
    weighted_orlicz_fractional_maximal,
)
from .orlicz import EXPM1, LLOG, POWER1, YoungFunction, box_samples, luxemburg_norm_arrays, luxemburg_norm_blocks
from .sparse import certify_sparse, sparse_select_for_operator
from .weights import (
    CubeBattery,
    ExponentTriple,
    Weight,
    a1q_characteristic,
    admissible_gamma_range,
    ap_characteristic,
    apq_characteristic,
    named_center,
    power_weight,
    step_weight,
)

__all__ = [
    "WeightSpec",
    "FunctionSpec",
    "BumpSpec",
    "TestCase",
    "VerificationReport",
    "BatteryResult",
    "PartitionDiagnostic",
    "THEOREMS",
    "verify_case",
    "verify_weak_1q",
    "verify_strong_pq",
    "verify_commutator_strong",
    "verify_maximal_weak_and_strong",
    "verify_wtd_bmo",
    "verify_summation_lemma",
    "verify_duality_cube_estimate",
    "large_small_partition",
    "weak_quasinorm",
    "standard_function_specs",
    "sweep_gammas",
    "build_battery",
    "run_battery",
    "stability_pair",
    "sweep_slope",
    "write_reports_csv",
    "write_reports_json",
    "write_sweep_csv",
    "CSV_COLUMNS",
]

DEFAULT_ROOT_1D = RootBox((0.0,), 1.0)
DEFAULT_ROOT_2D = RootBox((0.0, 0.0), 1.0)

THEOREMS = (
    "weak_1q",
    "strong_pq",
    "commutator_strong",
    "maximal_pq",
    "weighted_bmo",
    "cube_summation",
    "duality_cubes",
)

# exponent of the characteristic in the right side, per inequality
CHARACTERISTIC_POWERS = {
    "weak_1q": lambda e: e.weak_power,
    "strong_pq": lambda e: e.strong_power,
    "commutator_strong": lambda e: e.commutator_power,
}


# -- case specification --------------------------------------------------------


@dataclass(frozen=True)
class WeightSpec:
    kind: str = "constant"  # constant | power | step
    gamma: float = 0.0
    x0: str | tuple = "third"
    low: float = 1.0
    high: float = 3.0

    def label(self) -> str:
        if self.kind == "power":
            return f"power(g={self.gamma:+.4f},{self.x0})"
        return self.kind


@dataclass(frozen=True)
class FunctionSpec:
    kind: str = "constant"  # constant | indicator | sigma_probe
    box: tuple | None = None  # ((lo...) , (hi...)) in absolute coordinates
    value: float = 1.0
    name: str = ""

    def label(self) -> str:
        return self.name or self.kind


@dataclass(frozen=True)
class BumpSpec:
    kind: str = "step"  # constant | step | logdist
    x0: str | tuple = "third"
    value: float = 1.0

    def label(self) -> str:
        return self.kind


@dataclass(frozen=True)
class TestCase:
    __test__ = False  # keep pytest from collecting the dataclass

    case_id: str
    theorem: str
    e: ExponentTriple
    weight: WeightSpec
    func: FunctionSpec
    bump: BumpSpec | None = None
    phi: str = "llog"  # for the maximal-operator lemma
    depth: int = 8
    battery_depth: int = 5
    root: RootBox = DEFAULT_ROOT_1D

    def __post_init__(self):
        if self.weight.kind == "power" and self.weight.gamma != 0.0:
            glo, ghi = admissible_gamma_range(self.e)
            if not glo < self.weight.gamma < (ghi if ghi > 0 else 0.0):
                raise ValueError(
                    f"gamma {self.weight.gamma} outside the admissible "
                    f"range ({glo:.4f}, {ghi:.4f}) for these exponents"
                )


@dataclass
class VerificationReport:
    case_id: str
    theorem: str
    n: int
    alpha: float
    p: float
    q: float
    gamma: float | None
    x0: str
    depth: int
    battery_depth: int
    characteristic: float
    lhs: float
    rhs_sans_constant: float
    measured_constant: float
    passed: bool | None = None
    extra: dict = field(default_factory=dict)


@dataclass
class BatteryResult:
    theorem: str
    reports: list[VerificationReport]
    calibration: float
    threshold: float

    @property
    def all_passed(self) -> bool:
        return all(r.passed for r in self.reports)

    @property
    def max_measured(self) -> float:
        return max(r.measured_constant for r in self.reports)

    def first_failure(self) -> VerificationReport | None:
        for r in self.reports:
            if not r.passed:
                return r
        return None


@dataclass
class PartitionDiagnostic:
    threshold: float
    large: list[DyadicCube]
    small: list[DyadicCube]
    large_mass: float
    small_mass: float
    level_set_mass: float


# -- materialization (cached per root/depth) -----------------------------------

_WEIGHT_CACHE: dict = {}
_WORKSPACE_CACHE: dict = {}


@dataclass
class Workspace:
    root: RootBox
    depth: int
    battery_depth: int
    family: DyadicGridFamily
    battery: CubeBattery


def workspace(root: RootBox, depth: int, battery_depth: int) -> Workspace:
    key = (root, depth, battery_depth)
    got = _WORKSPACE_CACHE.get(key)
    if got is None:
        family = DyadicGridFamily(root, depth)
        got = Workspace(root, depth, battery_depth, family,
                        CubeBattery(family, battery_depth))
        _WORKSPACE_CACHE[key] = got
    return got


def materialize_weight(spec: WeightSpec, root: RootBox, depth: int) -> Weight:
    key = (spec, root, depth)
    got = _WEIGHT_CACHE.get(key)
    if got is not None:
        return got
    if spec.kind == "constant":
        w = Weight(GridFunction.constant(root, depth, spec.low))
    elif spec.kind == "power":
        w = power_weight(root, depth, spec.gamma, spec.x0)
    elif spec.kind == "step":
        w = step_weight(root, depth, spec.low, spec.high)
    else:
        raise ValueError(f"unknown weight kind {spec.kind!r}")
    _WEIGHT_CACHE[key] = w
    return w


def materialize_function(
    spec: FunctionSpec, root: RootBox, depth: int, sigma: GridFunction | None = None
) -> GridFunction:
    if spec.kind == "constant":
        return GridFunction.constant(root, depth, spec.value)
    if spec.kind == "indicator":
        lo, hi = spec.box
        return GridFunction.indicator(root, depth, lo, hi) * spec.value
    if spec.kind == "sigma_probe":
        # the extremal-direction probe: the dual density cut to a sub-box
        if sigma is None:
            raise ValueError("sigma_probe needs the dual density")
        lo, hi = spec.box
        return GridFunction.indicator(root, depth, lo, hi) * sigma
    raise ValueError(f"unknown function kind {spec.kind!r}")


def materialize_bump(spec: BumpSpec, root: RootBox, depth: int) -> GridFunction:
    if spec.kind == "constant":
        return GridFunction.constant(root, depth, spec.value)
    if spec.kind == "step":
        mid = tuple(o + 0.5 * root.side for o in root.origin)
        return GridFunction.indicator(root, depth, mid[:1] + root.origin[1:], root.hi)
    if spec.kind == "logdist":
        x0 = named_center(root, spec.x0)
        if root.n == 1:
            return GridFunction.from_callable(
                root, depth, lambda x: np.log(np.abs(x - x0[0]))
            )
        return GridFunction.from_callable(
            root, depth,
            lambda x, y: 0.5 * np.log((x - x0[0]) ** 2 + (y - x0[1]) ** 2),
        )
    raise ValueError(f"unknown bump kind {spec.kind!r}")


def _case_weight(case: TestCase) -> Weight:
    return materialize_weight(case.weight, case.root, case.depth)


def _case_sigma(case: TestCase) -> GridFunction:
    return _case_weight(case).sigma(case.e)


def _case_function(case: TestCase) -> GridFunction:
    sigma = None
    if case.func.kind == "sigma_probe":
        sigma = _case_sigma(case)
    return materialize_function(case.func, case.root, case.depth, sigma)


def _phi_of(case: TestCase) -> YoungFunction:
    return {"power1": POWER1, "llog": LLOG}[case.phi]


# -- norm helpers ---------------------------------------------------------------


def lebesgue_product_norm(f: GridFunction, w: GridFunction, p: float) -> float:
    """(integral of |f w|^p dx)^(1/p) on the mesh."""
    vals = np.abs(f.cells * w.cells) ** p
    return float(vals.sum() * f.cell_volume) ** (1.0 / p)


def weighted_p_norm(f: GridFunction, sigma: GridFunction, p: float) -> float:
    """(integral of |f|^p d sigma)^(1/p)."""
    vals = np.abs(f.cells) ** p * sigma.cells
    return float(vals.sum() * f.cell_volume) ** (1.0 / p)


def weak_quasinorm(values: np.ndarray, density: GridFunction, q: float) -> float:
    """sup over t > 0 of t * mu({values > t})^(1/q), evaluated exactly.

    The cellwise output takes finitely many values; on each interval
    between consecutive distinct values the map is increasing in t, so
    the supremum is attained at a distinct value approached from below,
    where the super-level set includes the ties.
    """
    mass = (density.cells * density.cell_volume).ravel()
    vals = values.ravel()
    order = np.argsort(vals)[::-1]
    sorted_vals = vals[order]
    cum = np.cumsum(mass[order])
    neg, first_idx = np.unique(-sorted_vals, return_index=True)
    ends = np.append(first_idx[1:], len(sorted_vals)) - 1
    t = -neg
    good = t > 0
    if not good.any():
        return 0.0
    return float(np.max(t[good] * cum[ends][good] ** (1.0 / q)))


def _measured(lhs: float, rhs_sans: float) -> float:
    if rhs_sans > 0:
        return lhs / rhs_sans
    return 0.0 if lhs <= 0 else math.inf


def _base_report(case: TestCase, characteristic, lhs, rhs_sans, suffix="", **extra):
    spec = case.weight
    return VerificationReport(
        case_id=case.case_id + suffix,
        theorem=case.theorem,
        n=case.e.n,
        alpha=case.e.alpha,
        p=case.e.p,
        q=case.e.q,
        gamma=spec.gamma if spec.kind == "power" else None,
        x0=str(spec.x0) if spec.kind == "power" else "",
        depth=case.depth,
        battery_depth=case.battery_depth,
        characteristic=characteristic,
        lhs=lhs,
        rhs_sans_constant=rhs_sans,
        measured_constant=_measured(lhs, rhs_sans),
        extra=extra,
    )


# -- the verifiers ---------------------------------------------------------------


def verify_weak_1q(case: TestCase) -> list[VerificationReport]:
    """Endpoint weak-type bound for the dyadic fractional integral at p = 1."""
    e = case.e
    if e.p != 1:
        raise ValueError("the weak-type inequality is an endpoint: p must be 1")
    ws = workspace(case.root, case.depth, case.battery_depth)
    w = _case_weight(case)
    f = _case_function(case)
    out = dyadic_fractional_integral(f, e.alpha, ws.family, 0)
    lhs = weak_quasinorm(out.cells, w.v(e), e.q)
    char = a1q_characteristic(w, e, ws.battery)
    input_norm = float((f.cells * w.base.cells).sum() * f.cell_volume)
    rhs = char ** e.weak_power * input_norm
    return [_base_report(case, char, lhs, rhs)]


def verify_strong_pq(case: TestCase) -> list[VerificationReport]:
    """Strong (p, q) bound, reported for the dyadic and the sparse operator."""
    e = case.e
    if e.p <= 1:
        raise ValueError("strong-type verification needs p > 1")
    ws = workspace(case.root, case.depth, case.battery_depth)
    w = _case_weight(case)
    f = _case_function(case)
    char = apq_characteristic(w, e, ws.battery)
    input_norm = lebesgue_product_norm(f, w.base, e.p)
    rhs = char ** e.strong_power * input_norm
    out_d = dyadic_fractional_integral(f, e.alpha, ws.family, 0)
    sparse = sparse_select_for_operator(f, ws.family, 0)
    out_s = sparse_fractional_integral(f, e.alpha, ws.family, sparse.cubes)
    reports = []
    for suffix, out in ((":dyadic", out_d), (":sparse", out_s)):
        lhs = lebesgue_product_norm(out.values, w.base, e.q)
        reports.append(_base_report(case, char, lhs, rhs, suffix))
    return reports


def verify_commutator_strong(case: TestCase) -> list[VerificationReport]:
    """Strong (p, q) bound for the positive dyadic commutator."""
    e = case.e
    if e.p <= 1:
        raise ValueError("the commutator bound needs p > 1")
    if case.bump is None:
        raise ValueError("a commutator case needs a bump spec")
    ws = workspace(case.root, case.depth, case.battery_depth)
    w = _case_weight(case)
    f = _case_function(case)
    b = materialize_bump(case.bump, case.root, case.depth)
    out = dyadic_commutator(b, f, e.alpha, ws.family, 0)
    lhs = lebesgue_product_norm(out.values, w.base, e.q)
    char = apq_characteristic(w, e, ws.battery)
    bmo = bmo_norm(b, ws.battery)
    input_norm = lebesgue_product_norm(f, w.base, e.p)
    rhs = char ** e.commutator_power * bmo * input_norm
    report = _base_report(case, char, lhs, rhs, bump=case.bump.label(), bmo=bmo)
    if bmo <= 1e-13 * max(1.0, abs(float(b.max_cell()))):
        report.passed = lhs <= 1e-10
        report.measured_constant = 0.0 if report.passed else math.inf
        report.extra["degenerate"] = True
    return [report]


def verify_maximal_weak_and_strong(case: TestCase) -> list[VerificationReport]:
    """Weighted Orlicz maximal operator: L^p(sigma) to L^q(sigma) bounds."""
    e = case.e
    if e.p <= 1:
        raise ValueError("the maximal-operator lemma needs p > 1")
    ws = workspace(case.root, case.depth, case.battery_depth)
    sigma = _case_sigma(case) if case.weight.kind != "constant" else \
        GridFunction.constant(case.root, case.depth, 1.0)
    f = _case_function(case)
    out = weighted_orlicz_fractional_maximal(
        f, sigma, e.alpha, _phi_of(case), ws.family, 0
    )
    input_norm = weighted_p_norm(f, sigma, e.p)
    lhs_weak = weak_quasinorm(out.cells, sigma, e.q)
    lhs_strong = weighted_p_norm(out.values, sigma, e.q)
    return [
        _base_report(case, 1.0, lhs_weak, input_norm, ":weak", phi=case.phi),
        _base_report(case, 1.0, lhs_strong, input_norm, ":strong", phi=case.phi),
    ]


def verify_wtd_bmo(case: TestCase) -> list[VerificationReport]:
    """Oscillation bound: ||b - <b>_Q|| in the exponential norm vs BMO."""
    e = case.e
    if e.p <= 1:
        raise ValueError("the dual density needs p > 1")
    ws = workspace(case.root, case.depth, case.battery_depth)
    sigma = _case_sigma(case) if case.weight.kind != "constant" else \
        GridFunction.constant(case.root, case.depth, 1.0)
    b = materialize_bump(case.bump or BumpSpec("step"), case.root, case.depth)
    ainf = ap_characteristic(sigma, e.r_prime, ws.battery)
    bmo = bmo_norm(b, ws.battery)
    lhs = 0.0
    battery = ws.battery
    for i in range(len(battery)):
        lo, hi = battery.bounds(i)
        avg = b.box_integral(lo, hi) / battery.volumes()[i]
        vals, mass = box_samples(b, lo, hi, sigma)
        lhs = max(lhs, luxemburg_norm_arrays(vals - avg, mass, EXPM1))
    rhs = ainf * bmo
    report = _base_report(
        case, ainf, lhs, rhs,
        bump=(case.bump or BumpSpec("step")).label(), bmo=bmo,
    )
    if bmo <= 1e-13 * max(1.0, abs(float(b.max_cell()))):
        report.passed = lhs <= 1e-10
        report.measured_constant = 0.0 if report.passed else math.inf
        report.extra["degenerate"] = True
    return [report]


def verify_summation_lemma(case: TestCase, top: DyadicCube | None = None) -> list[VerificationReport]:
    """Geometric summation over the subcubes of a mesh-aligned cube.

    ratio = sum over Q inside the top cube (levels down to K) of
    |Q|^(alpha/n) sigma(Q) ||f|| divided by the single top-cube term.
    """
    e = case.e
    ws = workspace(case.root, case.depth, case.battery_depth)
    sigma = _case_sigma(case) if case.weight.kind != "constant" and e.p > 1 else \
        GridFunction.constant(case.root, case.depth, 1.0)
    f = _case_function(case)
    phi = _phi_of(case)
    if top is None:
        top = DyadicCube(0, 0, (0,) * case.root.n)
    if not ws.family.is_aligned(top.grid_id):
        raise ValueError("the summation check runs on the mesh-aligned grid")
    n = case.root.n
    depth = case.depth
    sl = _cube_slices(cells_in_cube(ws.family, top, depth))
    fvals_top = f.cells[sl]
    svals_top = sigma.cells[sl]
    cellvol = f.cell_volume
    total = 0.0
    for k in range(top.level, depth + 1):
        b = 2 ** (depth - k)
        if n == 1:
            vals = fvals_top.reshape(-1, b)
            mass = svals_top.reshape(-1, b) * cellvol
        else:
            nc = fvals_top.shape[0] // b
            vals = fvals_top.reshape(nc, b, nc, b).transpose(0, 2, 1, 3).reshape(nc * nc, b * b)
            mass = svals_top.reshape(nc, b, nc, b).transpose(0, 2, 1, 3).reshape(nc * nc, b * b) * cellvol
        norms = luxemburg_norm_blocks(vals, mass, phi)
        sq = mass.sum(axis=1)
        total += float(np.dot(sq, norms)) * ws.family.side_at(k) ** e.alpha
    mass_top = svals_top.ravel() * cellvol
    norm_top = luxemburg_norm_arrays(fvals_top.ravel(), mass_top, phi)
    rhs = ws.family.side_at(top.level) ** e.alpha * float(mass_top.sum()) * norm_top
    return [_base_report(case, 1.0, total, rhs, phi=case.phi,
                         top_level=top.level)]


def verify_duality_cube_estimate(case: TestCase) -> list[VerificationReport]:
    """Per-cube two-sided estimate over a sparse family with carriers.

    First inequality: |Q|^(alpha/n - 1) sigma(Q) v(Q)^(1 - alpha/n) is at
    most the characteristic times sigma(Q)^(1/p) v(Q)^(1/p'); it is exact
    for battery cubes because 1 - alpha/n = 1/p' + 1/q.  Second: passing
    to the carriers costs the subset bounds for sigma and v plus the
    half-density, so the testable constant is 2^(r'/p + r/p').
    """
    e = case.e
    if e.p <= 1:
        raise ValueError("the duality estimate needs p > 1")
    ws = workspace(case.root, case.depth, case.battery_depth)
    w = _case_weight(case)
    f = _case_function(case)
    sigma, v = w.sigma(e), w.v(e)
    full_battery = CubeBattery(ws.family, case.depth)
    char = apq_characteristic(w, e, full_battery)
    sparse = sparse_select_for_operator(f, ws.family, 0)
    cert = certify_sparse(sparse, ws.family, case.depth)
    density_const = 2.0 ** (e.r_prime / e.p + e.r / e.p_prime)
    tol = 1e-9
    worst1 = worst2 = 0.0
    violations = 0
    cellvol = f.cell_volume
    for cube in sparse.cubes:
        lo, hi = ws.family.cube_bounds(cube)
        vol = ws.family.volume_at(cube.level)
        sq = sigma.box_integral(lo, hi)
        vq = v.box_integral(lo, hi)
        carrier = cert.carriers[cube]
        se = float(sigma.cells[carrier].sum()) * cellvol
        ve = float(v.cells[carrier].sum()) * cellvol
        lhs1 = vol ** (e.alpha / e.n - 1.0) * sq * vq ** (1.0 - e.alpha / e.n)
        mid = char * sq ** (1.0 / e.p) * vq ** (1.0 / e.p_prime)
        rhs2 = density_const * char ** e.strong_power \
            * se ** (1.0 / e.p) * ve ** (1.0 / e.p_prime)
        if lhs1 > mid * (1.0 + tol) or mid > rhs2 * (1.0 + tol):
            violations += 1
        worst1 = max(worst1, lhs1 / mid if mid > 0 else math.inf)
        worst2 = max(worst2, mid / rhs2 if rhs2 > 0 else math.inf)
    identity_gap = abs(1.0 - e.alpha / e.n - 1.0 / e.p_prime - 1.0 / e.q)
    report = _base_report(
        case, char, worst1, 1.0,
        violations=violations,
        worst_first_ratio=worst1,
        worst_second_ratio=worst2,
        family_size=len(sparse),
        sparse_ok=cert.ok,
        identity_gap=identity_gap,
    )
    report.measured_constant = max(worst1, worst2)
    report.passed = violations == 0 and cert.ok and identity_gap <= 1e-15
    return [report]


def large_small_partition(case: TestCase, t: float) -> PartitionDiagnostic:
    """Split the level-set cubes at t by the v-mass they keep at level 2t."""
    e = case.e
    ws = workspace(case.root, case.depth, case.battery_depth)
    w = _case_weight(case)
    v = w.v(e)
    f = _case_function(case)
    out = dyadic_fractional_integral(f, e.alpha, ws.family, 0)
    cubes = level_set_cubes(out.values, t, ws.family, 0)
    vmass = v.cells * v.cell_volume
    mask_2t = out.cells > 2.0 * t
    mask_t = out.cells > t
    cut = 2.0 ** (-e.q - 1.0)
    large, small = [], []
    large_mass = small_mass = 0.0
    for cube in cubes:
        sl = _cube_slices(cells_in_cube(ws.family, cube, case.depth))
        vq = float(vmass[sl].sum())
        v2 = float(vmass[sl][mask_2t[sl]].sum())
        if v2 >= cut * vq:
            large.append(cube)
            large_mass += vq
        else:
            small.append(cube)
            small_mass += vq
    return PartitionDiagnostic(
        t, large, small, large_mass, small_mass, float(vmass[mask_t].sum())
    )


_VERIFIERS = {
    "weak_1q": verify_weak_1q,
    "strong_pq": verify_strong_pq,
    "commutator_strong": verify_commutator_strong,
    "maximal_pq": verify_maximal_weak_and_strong,
    "weighted_bmo": verify_wtd_bmo,
    "cube_summation": verify_summation_lemma,
    "duality_cubes": verify_duality_cube_estimate,
}


def verify_case(case: TestCase) -> list[VerificationReport]:
    return _VERIFIERS[case.theorem](case)


# -- batteries -------------------------------------------------------------------


def standard_function_specs(root: RootBox, with_probe: bool = True) -> list[FunctionSpec]:
    """The standard inputs: constant, aligned and off-grid boxes, a spike,
    and the dual-density probe on a sub-box."""
    o, L = root.lo, root.side
    spike_depth = 6
    h = L / 2 ** spike_depth
    spike_lo = o + np.floor((0.3 * L) / h) * h
    specs = [
        FunctionSpec("constant", name="const"),
        FunctionSpec("indicator", (tuple(o + L / 4), tuple(o + L / 2)), name="dyadic-box"),
        FunctionSpec("indicator", (tuple(o + L / 3), tuple(o + 0.8 * L)), name="offgrid-box"),
        FunctionSpec("indicator", (tuple(spike_lo), tuple(spike_lo + h)), name="spike"),
    ]
    if with_probe:
        specs.append(FunctionSpec("sigma_probe", (tuple(o), tuple(o + L / 2)), name="probe"))
    return specs


def sweep_gammas(e: ExponentTriple, count: int = 8, margin: float = 0.9) -> list[float]:
    """Power-weight exponents spread over the admissible open range."""
    lo, hi = admissible_gamma_range(e)
    return [
        margin * (lo + (j + 0.5) * (hi - lo) / count) for j in range(count)
    ]


def build_battery(
    theorem: str,
    e: ExponentTriple,
    root: RootBox,
    depth: int,
    battery_depth: int,
    gammas: int = 8,
    x0="third",
) -> list[TestCase]:
    """The standard battery: unweighted calibration cases first, then the
    power-weight sweep, crossed with the function battery (and the bump
    battery for commutator-type checks)."""
    if theorem not in THEOREMS:
        raise ValueError(f"unknown theorem {theorem!r}")
    with_probe = e.p > 1
    funcs = standard_function_specs(root, with_probe=with_probe)
    weights = [WeightSpec("constant")]
    weights += [WeightSpec("power", g, x0) for g in sweep_gammas(e, gammas)]
    bumps = [None]
    if theorem in ("commutator_strong", "weighted_bmo"):
        bumps = [BumpSpec("step"), BumpSpec("logdist", x0)]
    if theorem == "weighted_bmo":
        funcs = funcs[:1]  # the oscillation check does not involve f
    cases = []
    for wi, wspec in enumerate(weights):
        for fi, fspec in enumerate(funcs):
            for bi, bspec in enumerate(bumps):
                label = f"{theorem}/w{wi}-{wspec.label()}/f-{fspec.label()}"
                if bspec is not None:
                    label += f"/b-{bspec.label()}"
                cases.append(
                    TestCase(
                        case_id=label,
                        theorem=theorem,
                        e=e,
                        weight=wspec,
                        func=fspec,
                        bump=bspec,
                        depth=depth,
                        battery_depth=battery_depth,
                        root=root,
                    )
                )
    return cases


def run_battery(
    theorem: str,
    e: ExponentTriple,
    root: RootBox = DEFAULT_ROOT_1D,
    depth: int = 8,
    battery_depth: int = 5,
    gammas: int = 8,
    threshold_factor: float = 4.0,
    jobs: int = 1,
) -> BatteryResult:
    """Run the battery and apply the calibration protocol.

    The calibration constant is the largest measured constant among the
    unweighted cases; every case must come in under threshold_factor
    times it.  Reports keep battery order (case id order), so output is
    run-to-run identical.
    """
    cases = build_battery(theorem, e, root, depth, battery_depth, gammas)
    if jobs > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=jobs) as pool:
            chunks = list(pool.map(verify_case, cases))
    else:
        chunks = [verify_case(c) for c in cases]
    reports = [r for chunk in chunks for r in chunk]
    calib = [
        r.measured_constant
        for r in reports
        if r.gamma is None and not r.extra.get("degenerate") and r.measured_constant > 0
    ]
    calibration = max(calib) if calib else 1.0
    threshold = threshold_factor * calibration
    for r in reports:
        if r.passed is None:
            r.passed = r.measured_constant <= threshold * (1.0 + 1e-12)
        r.extra["threshold"] = threshold
    return BatteryResult(theorem, reports, calibration, threshold)


def stability_pair(
    theorem: str,
    e: ExponentTriple,
    root: RootBox = DEFAULT_ROOT_1D,
    depth: int = 8,
    battery_depth: int = 5,
    gammas: int = 8,
) -> tuple[float, float]:
    """Battery-level measured constants at depth and depth + 2."""
    a = run_battery(theorem, e, root, depth, battery_depth, gammas)
    b = run_battery(theorem, e, root, depth + 2, battery_depth, gammas)
    return a.max_measured, b.max_measured


def sweep_slope(result: BatteryResult) -> tuple[float, list[tuple[float, float]]]:
    """Fit log(normalized lhs envelope) against log characteristic.

    For each power-weight gamma the envelope takes the largest normalized
    left side over the function battery; the slope says how fast the
    inequality's left side actually grows in the characteristic.
    """
    buckets: dict[float, tuple[float, float]] = {}
    for r in result.reports:
        if r.gamma is None or r.rhs_sans_constant <= 0 or r.lhs <= 0:
            continue
        # lhs over the input norm alone; rhs_sans = char^power * input_norm
        input_norm = r.rhs_sans_constant / r.characteristic ** _char_power(result.theorem, r)
        norm = r.lhs / input_norm
        prev = buckets.get(r.gamma)
        if prev is None or norm > prev[1]:
            buckets[r.gamma] = (r.characteristic, norm)
    points = sorted((math.log(c), math.log(v)) for c, v in buckets.values())
    if len(points) < 2:
        return 0.0, points
    xs = np.array([p[0] for p in points])
    ys = np.array([p[1] for p in points])
    if np.ptp(xs) < 1e-9:
        return 0.0, points
    slope = float(np.polyfit(xs, ys, 1)[0])
    return slope, points


def _char_power(theorem: str, report: VerificationReport) -> float:
    e = ExponentTriple(report.n, report.alpha, report.p)
    fn = CHARACTERISTIC_POWERS.get(theorem)
    return fn(e) if fn else 0.0


# -- report output ----------------------------------------------------------------

CSV_COLUMNS = [
    "case_id", "theorem", "n", "alpha", "p", "q", "gamma", "x0",
    "depth", "battery_depth", "characteristic", "lhs",
    "rhs_sans_constant", "measured_constant", "passed",
]


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return f"{value:.17g}"
    return str(value)


def report_row(r: VerificationReport) -> list[str]:
    return [
        _fmt(getattr(r, col)) for col in CSV_COLUMNS
    ]


def write_reports_csv(reports: list[VerificationReport], path) -> None:
    rows = sorted(reports, key=lambda r: (r.theorem, r.case_id))
    with open(path, "w") as fh:
        fh.write(",".join(CSV_COLUMNS) + "\n")
        for r in rows:
            fh.write(",".join(report_row(r)) + "\n")


def write_reports_json(reports: list[VerificationReport], path) -> None:
    rows = sorted(reports, key=lambda r: (r.theorem, r.case_id))
    docs = []
    for r in rows:
        doc = {col: getattr(r, col) for col in CSV_COLUMNS}
        doc["extra"] = {
            k: v for k, v in sorted(r.extra.items())
            if isinstance(v, (int, float, str, bool))
        }
        docs.append(doc)
    with open(path, "w") as fh:
        json.dump(docs, fh, indent=2, sort_keys=True)
        fh.write("\n")


def write_sweep_csv(result: BatteryResult, path) -> float:
    """Plot data for the gamma sweep: one (log char, log lhs) row per gamma."""
    slope, points = sweep_slope(result)
    with open(path, "w") as fh:
        fh.write("log_characteristic,log_normalized_lhs\n")
        for x, y in points:
            fh.write(f"{x:.17g},{y:.17g}\n")
    return slope
