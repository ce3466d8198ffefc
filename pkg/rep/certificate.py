"""
Blowup certificate for regular solutions.

For a strictly increasing C^1 testing function f with f(0) = 0 the functional
H(t) = int_0^R f v dr obeys H' >= H^2/(2 B1) - B2 with

    B1 = int_0^R f^2/f' dr,   B2 = C int_0^R f dr,
    C  = c^2 (gamma + a - gamma a + 9) / (2 (gamma - 1) (1 - a)^2).

If H(0) > sqrt(2 B1 B2) the solution cannot stay regular past
T = 2 B1 H(0) / (H(0)^2 - 2 B1 B2), and H(t) is bounded below by
(1/H(0) - (H(0)^2 - 2 B1 B2)/(2 B1 H(0)^2) t)^-1.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.integrate import simpson

from .errors import DomainError, HypothesisViolation, InvalidTestingFunction, UsageError
from .field import electric_field
from .model import (
    PhysicalParams,
    PrimitiveState,
    RadialGrid,
    pressure_derivative,
    prim_to_cons,
    velocity_equation_terms,
)
from .solver import SimulationSeries

logger = logging.getLogger(__name__)

DEFAULT_QUAD_N = 10_000
DEFAULT_TOL_MONITOR = 0.05
VALIDATION_SAMPLES = 10_000


@dataclass(frozen=True)
class TestingFunction:
    """Weight f with derivative f'."""
    __test__ = False

    eval: Callable[[np.ndarray], np.ndarray]
    deriv: Callable[[np.ndarray], np.ndarray]
    label: str

    def validate(self, R: float, n_samples: int = VALIDATION_SAMPLES) -> None:
        """
        Check f(0) = 0 and f' > 0 on (0, R] by dense sampling.

        Raises:
            InvalidTestingFunction: Either condition fails
        """
        r = np.linspace(0.0, R, n_samples + 1)
        f = np.asarray(self.eval(r), dtype=float)
        df = np.asarray(self.deriv(r[1:]), dtype=float)
        if not (np.all(np.isfinite(f)) and np.all(np.isfinite(df))):
            raise InvalidTestingFunction(f"{self.label}: f or f' is not finite on [0, {R}]")
        scale = max(float(np.max(np.abs(f))), 1.0)
        if abs(f[0]) > 1e-12 * scale:
            raise InvalidTestingFunction(f"{self.label}: f(0) = {f[0]} does not vanish")
        bad = np.flatnonzero(df <= 0)
        if bad.size:
            raise InvalidTestingFunction(
                f"{self.label}: f'({r[1:][bad[0]]:.6g}) = {df[bad[0]]:.6g} is not positive")


def power_function(k: int) -> TestingFunction:
    """f(r) = r^k."""
    if k < 1:
        raise InvalidTestingFunction(f"r^{k} does not vanish at 0 or is not increasing")
    return TestingFunction(
        eval=lambda r: np.asarray(r, dtype=float) ** k,
        deriv=lambda r: k * np.asarray(r, dtype=float) ** (k - 1),
        label="r" if k == 1 else f"r^{k}",
    )


def sine_function(R_cut: float) -> TestingFunction:
    """f(r) = sin(pi r / (2 R_cut)), increasing on [0, R_cut]."""
    w = math.pi / (2.0 * R_cut)
    return TestingFunction(
        eval=lambda r: np.sin(w * np.asarray(r, dtype=float)),
        deriv=lambda r: w * np.cos(w * np.asarray(r, dtype=float)),
        label=f"sin(pi r/{2.0 * R_cut:g})",
    )


def make_testing_function(name: str, R_cut: float | None = None) -> TestingFunction:
    """Built-in testing functions: 'r', 'r2', 'r3' and 'sin' (needs R_cut)."""
    if name in ("r", "r1"):
        return power_function(1)
    if name == "r2":
        return power_function(2)
    if name == "r3":
        return power_function(3)
    if name == "sin":
        if R_cut is None:
            raise InvalidTestingFunction("the 'sin' testing function needs R_cut")
        return sine_function(R_cut)
    raise InvalidTestingFunction(f"unknown testing function '{name}'")


@dataclass(frozen=True)
class BlowupCertificate:
    C: float
    B1: float
    B2: float
    H0: float
    threshold: float
    criterion: bool
    T_pred: float | None
    R: float
    label: str = ""

    def to_dict(self) -> dict:
        return {
            "criterion": self.criterion,
            "T_pred": self.T_pred,
            "H0": self.H0,
            "threshold": self.threshold,
            "C": self.C,
            "B1": self.B1,
            "B2": self.B2,
            "R": self.R,
            "testing_function": self.label,
        }


def constant_C(params: PhysicalParams) -> float:
    """
    C from the closed form; cross-checked against c^2/(2(1-a)) + 5c^2/((gamma-1)(1-a)^2).

    Raises:
        ArithmeticError: The two forms disagree beyond 1e-12 relative
    """
    c2, g, a = params.c2, params.gamma, params.a
    closed = c2 * (g + a - g * a + 9.0) / (2.0 * (g - 1.0) * (1.0 - a) ** 2)
    split = c2 / (2.0 * (1.0 - a)) + 5.0 * c2 / ((g - 1.0) * (1.0 - a) ** 2)
    if not math.isclose(closed, split, rel_tol=1e-12):
        raise ArithmeticError(f"C forms disagree: {closed!r} vs {split!r}")
    return closed


def _nodes(R: float, quad_n: int) -> np.ndarray:
    if quad_n < 2:
        raise UsageError(f"quad_n must be >= 2, got {quad_n}")
    return np.linspace(0.0, R, quad_n + 1)


def b1(f: TestingFunction, R: float, quad_n: int = DEFAULT_QUAD_N) -> float:
    """int_0^R f^2/f' dr by composite Simpson; the integrand is taken as 0 at r = 0."""
    r = _nodes(R, quad_n)
    fv = np.asarray(f.eval(r), dtype=float)
    df = np.asarray(f.deriv(r), dtype=float)
    if np.any(df[1:] <= 0):
        i = int(np.flatnonzero(df[1:] <= 0)[0]) + 1
        raise InvalidTestingFunction(f"{f.label}: f'({r[i]:.6g}) = {df[i]:.6g} is not positive")
    with np.errstate(divide="ignore", invalid="ignore"):
        integrand = fv * fv / df
    if fv[0] == 0:
        integrand[0] = 0.0
    return float(simpson(integrand, x=r))


def b2(f: TestingFunction, R: float, C: float, quad_n: int = DEFAULT_QUAD_N) -> float:
    """C int_0^R f dr by composite Simpson."""
    r = _nodes(R, quad_n)
    df = np.asarray(f.deriv(r[1:]), dtype=float)
    if np.any(df <= 0):
        raise InvalidTestingFunction(f"{f.label}: f' is not positive on (0, {R}]")
    return C * float(simpson(np.asarray(f.eval(r), dtype=float), x=r))


def h_functional(f: TestingFunction, v: np.ndarray, grid: RadialGrid) -> float:
    """Midpoint sum of f(r_i) v_i dr over the cells with r_i <= R."""
    inside = grid.inside()
    r = grid.centers[inside]
    return float(np.sum(np.asarray(f.eval(r)) * np.asarray(v)[inside]) * grid.dr)


def check_hypothesis(prim0: PrimitiveState, params: PhysicalParams) -> None:
    """
    Require p'(rho0) < a c^2 on every cell.

    Raises:
        HypothesisViolation: First offending cell
    """
    pprime = np.asarray(pressure_derivative(prim0.rho, params))
    bad = np.flatnonzero(pprime >= params.a * params.c2)
    if bad.size:
        i = int(bad[0])
        raise HypothesisViolation(
            f"p'(rho0) = {pprime[i]:.6g} >= a c^2 = {params.a * params.c2:.6g} at cell {i}",
            cell_index=i, pprime=float(pprime[i]))


def certify(f: TestingFunction, prim0: PrimitiveState, grid: RadialGrid, params: PhysicalParams,
            quad_n: int = DEFAULT_QUAD_N, v0: Callable | None = None) -> BlowupCertificate:
    """
    Assemble the blowup certificate for the initial data.

    Args:
        f: Testing function
        prim0: Initial primitive state on the grid
        grid: Radial grid (supplies R)
        params: Physical constants
        quad_n: Simpson intervals for B1, B2 (and H0 when v0 is given)
        v0: Initial velocity as a callable of r; when given, H0 is integrated
            by Simpson instead of the grid midpoint sum

    Returns:
        BlowupCertificate; criterion uses the strict inequality H0 > threshold

    Raises:
        HypothesisViolation: p'(rho0) >= a c^2 somewhere
        InvalidTestingFunction: f fails validation on [0, R]
    """
    check_hypothesis(prim0, params)
    R = grid.R
    f.validate(R)
    C = constant_C(params)
    B1 = b1(f, R, quad_n)
    B2 = b2(f, R, C, quad_n)
    if v0 is None:
        H0 = h_functional(f, prim0.v, grid)
    else:
        r = _nodes(R, quad_n)
        H0 = float(simpson(np.asarray(f.eval(r)) * np.asarray(v0(r), dtype=float), x=r))
    threshold = math.sqrt(2.0 * B1 * B2)
    criterion = H0 > threshold
    T_pred = 2.0 * B1 * H0 / (H0 * H0 - 2.0 * B1 * B2) if criterion else None
    cert = BlowupCertificate(C=C, B1=B1, B2=B2, H0=H0, threshold=threshold,
                             criterion=criterion, T_pred=T_pred, R=R, label=f.label)
    if criterion:
        logger.info(f"Criterion holds: H0 = {H0:.6g} > {threshold:.6g}; blowup by T = {T_pred:.6g}")
    else:
        logger.info(f"Criterion fails: H0 = {H0:.6g} <= {threshold:.6g}")
    return cert


def _require_criterion(cert: BlowupCertificate) -> None:
    if not cert.criterion:
        raise UsageError("the certificate criterion does not hold; no blowup bound exists")


def riccati_slope(cert: BlowupCertificate) -> float:
    """(H0^2 - 2 B1 B2) / (2 B1 H0^2)."""
    return (cert.H0 ** 2 - 2.0 * cert.B1 * cert.B2) / (2.0 * cert.B1 * cert.H0 ** 2)


def riccati_lower_bound(cert: BlowupCertificate, t):
    """
    (1/H0 - slope t)^-1 for 0 <= t < T_pred.

    Raises:
        UsageError: Criterion false
        DomainError: t outside [0, T_pred)
    """
    _require_criterion(cert)
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr < 0) or np.any(t_arr >= cert.T_pred):
        raise DomainError(f"t must lie in [0, {cert.T_pred}) where the bound is finite")
    bound = 1.0 / (1.0 / cert.H0 - riccati_slope(cert) * t_arr)
    return float(bound) if bound.ndim == 0 else bound


def riccati_exact_blowup_time(cert: BlowupCertificate) -> float:
    """Blowup time of H' = H^2/(2 B1) - B2, H(0) = H0: (B1/k) ln((H0 + k)/(H0 - k)), k = sqrt(2 B1 B2)."""
    _require_criterion(cert)
    k = cert.threshold
    if k == 0:
        return 2.0 * cert.B1 / cert.H0
    return cert.B1 / k * math.log((cert.H0 + k) / (cert.H0 - k))


def riccati_comparison(cert: BlowupCertificate, t):
    """Solution k coth(arcoth(H0/k) - k t/(2 B1)) of the comparison equation, t < its blowup time."""
    _require_criterion(cert)
    t_arr = np.asarray(t, dtype=float)
    T_star = riccati_exact_blowup_time(cert)
    if np.any(t_arr < 0) or np.any(t_arr >= T_star):
        raise DomainError(f"t must lie in [0, {T_star})")
    k = cert.threshold
    if k == 0:
        out = 1.0 / (1.0 / cert.H0 - t_arr / (2.0 * cert.B1))
    else:
        phase = np.arctanh(k / cert.H0) - k * t_arr / (2.0 * cert.B1)
        out = k / np.tanh(phase)
    return float(out) if np.ndim(out) == 0 else out


def cauchy_gap(f: TestingFunction, v: np.ndarray, grid: RadialGrid, B1: float | None = None) -> float:
    """
    B1 int f' v^2 dr - H^2 on the grid.

    Non-negative by the Cauchy inequality. Without B1 the midpoint sum of
    f^2/f' on the same cells is used, which makes the discrete gap exact.
    """
    inside = grid.inside()
    r = grid.centers[inside]
    if B1 is None:
        B1 = float(np.sum(np.asarray(f.eval(r)) ** 2 / np.asarray(f.deriv(r))) * grid.dr)
    vi = np.asarray(v)[inside]
    weighted = float(np.sum(np.asarray(f.deriv(r)) * vi * vi) * grid.dr)
    H = h_functional(f, v, grid)
    return B1 * weighted - H * H


def velocity_source_sign(prim: PrimitiveState, grid: RadialGrid, params: PhysicalParams,
                         phi_r: np.ndarray | None = None) -> float:
    """
    Minimum over non-vacuum cells of the velocity-equation source E phi_r + G.

    Both terms are non-negative for repulsive fields and p' v^2 < c^4.
    phi_r is computed from prim when not given. Returns 0 on an all-vacuum state.
    """
    mask = prim.rho > 0
    if not mask.any():
        return 0.0
    if phi_r is None:
        phi_r = electric_field(prim_to_cons(prim, params).D, grid).phi_r
    terms = velocity_equation_terms(prim.rho[mask], prim.v[mask], grid.centers[mask], params)
    source = terms["E"] * np.asarray(phi_r)[mask] + terms["G"]
    return float(np.min(source))


@dataclass(frozen=True)
class MonitorRecord:
    t: float
    H: float
    bound: float
    passed: bool
    riccati_margin: float | None = None


@dataclass
class MonitorReport:
    """Per-snapshot comparison of H(t) against the lower bound."""
    tol_monitor: float
    records: list = field(default_factory=list)
    violations: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.violations

    @property
    def worst_margin(self) -> float | None:
        """min over records of H/bound - (1 - tol); negative on failure."""
        margins = [r.H / r.bound - (1.0 - self.tol_monitor) for r in self.records if r.bound > 0]
        return min(margins) if margins else None

    def to_dict(self) -> dict:
        return {
            "passed": self.passed,
            "tol_monitor": self.tol_monitor,
            "worst_margin": self.worst_margin,
            "checked": len(self.records),
            "violations": [{"t": r.t, "H": r.H, "bound": r.bound} for r in self.violations],
        }


def monitor(series: SimulationSeries, f: TestingFunction, cert: BlowupCertificate, grid: RadialGrid,
            tol_monitor: float = DEFAULT_TOL_MONITOR) -> MonitorReport:
    """
    Check H(t) >= (1 - tol_monitor) * riccati_lower_bound(t) along a run.

    Stops at the first irregular snapshot or once t >= 0.99 T_pred. Each record
    also carries H'(t) - (H^2/(2 B1) - B2) from a backward difference
    (informational).

    Raises:
        UsageError: Criterion false
    """
    _require_criterion(cert)
    report = MonitorReport(tol_monitor=tol_monitor)
    previous = None
    for snap in series.snapshots:
        if not snap.regularity.regular or snap.t >= 0.99 * cert.T_pred:
            break
        H = h_functional(f, snap.prim.v, grid)
        bound = riccati_lower_bound(cert, snap.t)
        margin = None
        if previous is not None:
            dH = (H - previous[1]) / (snap.t - previous[0])
            margin = dH - (H * H / (2.0 * cert.B1) - cert.B2)
        record = MonitorRecord(t=snap.t, H=H, bound=bound, passed=H >= (1.0 - tol_monitor) * bound,
                               riccati_margin=margin)
        report.records.append(record)
        if not record.passed:
            report.violations.append(record)
        previous = (snap.t, H)
    if report.violations:
        logger.warning(f"Monitor found {len(report.violations)} violation(s), first at t = {report.violations[0].t:.6g}")
    return report
