"""
Finite-volume integrator for the radial relativistic Euler-Poisson system.

Scheme: first-order local Lax-Friedrichs (Rusanov) interface fluxes, SSP-RK2
in time, on exact spherical shells of volume V_i = int r^2 dr. The charge
equation is written as r^-2 (r^2 D v)_r so the discrete total sum(D_i V_i)
telescopes; the momentum equation uses the r^2-weighted flux of S v + p with
the sources p (A_+ - A_-)/V_i (the discrete 2p/r) and 4 pi D phi_r, which is
algebraically the same as (S v + p)_r + 2 S v / r = 4 pi D phi_r.

Loss of regularity is tracked as a breakdown report instead of an exception.
"""

import logging
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import RecoveryError, UsageError
from .field import FieldProfile, electric_field
from .model import (
    RECOVERY_TOL,
    VACUUM_FLOOR,
    ConservedState,
    PhysicalParams,
    PrimitiveState,
    RadialGrid,
    cons_to_prim,
    pressure,
    pressure_derivative,
    prim_to_cons,
    velocity_equation_terms,
)

logger = logging.getLogger(__name__)

DEFAULT_CFL = 0.4
LAMBDA_MIN_FACTOR = 1e-12


class BreakdownCause(str, Enum):
    RECOVERY_FAILURE = "recovery-failure"
    SUPERLUMINAL = "superluminal"
    REGULARITY_VIOLATION = "regularity-violation"
    DT_COLLAPSE = "dt-collapse"


@dataclass(frozen=True)
class RegularityIndicator:
    """
    Gradient bounds of a regular solution: |(v^2)_r| <= c^2 and |(p')_r| <= c^2.

    max_dw_dr (w = p^((gamma-1)/(2 gamma))) is reported for information only.
    """
    max_dv2_dr: float
    max_dpprime_dr: float
    max_dw_dr: float
    c2: float
    worst_cell: int

    @property
    def regular(self) -> bool:
        return self.max_dv2_dr <= self.c2 and self.max_dpprime_dr <= self.c2


@dataclass(frozen=True)
class Snapshot:
    t: float
    prim: PrimitiveState
    cons: ConservedState
    field: FieldProfile
    regularity: RegularityIndicator


@dataclass
class SimulationSeries:
    """Output snapshots of one run, in strictly increasing time."""
    grid: RadialGrid
    params: PhysicalParams
    snapshots: list = field(default_factory=list)
    dt_history: list = field(default_factory=list)

    @property
    def times(self) -> np.ndarray:
        return np.array([s.t for s in self.snapshots])

    def append(self, snapshot: Snapshot) -> None:
        if self.snapshots and not snapshot.t > self.snapshots[-1].t:
            raise UsageError(f"snapshot time {snapshot.t} does not increase past {self.snapshots[-1].t}")
        self.snapshots.append(snapshot)

    def __len__(self) -> int:
        return len(self.snapshots)

    def velocities(self) -> np.ndarray:
        """(n_snapshots, n_cells) array of v."""
        return np.array([s.prim.v for s in self.snapshots])

    def with_velocity(self, v: np.ndarray) -> "SimulationSeries":
        """Copy of the series with every snapshot's velocity replaced by v[k] (regularity recomputed)."""
        clone = SimulationSeries(self.grid, self.params, dt_history=list(self.dt_history))
        for snap, vk in zip(self.snapshots, v):
            prim = PrimitiveState(snap.prim.rho, vk)
            regularity = regularity_indicator(prim, self.grid, self.params)
            clone.snapshots.append(Snapshot(snap.t, prim, snap.cons, snap.field, regularity))
        return clone


@dataclass(frozen=True)
class BreakdownReport:
    occurred: bool = False
    t_breakdown: float | None = None
    cause: BreakdownCause | None = None
    cell_index: int | None = None
    detail: str = ""

    def to_dict(self) -> dict:
        if not self.occurred:
            return {"occurred": False}
        return {
            "occurred": True,
            "t_breakdown": self.t_breakdown,
            "cause": self.cause.value,
            "cell_index": self.cell_index,
            "detail": self.detail,
        }


def total_charge(cons: ConservedState, grid: RadialGrid) -> float:
    """sum_i D_i V_i, the r^2-weighted charge of the cell data."""
    return float(np.sum(cons.D * grid.weights))


def signal_speed(prim: PrimitiveState, params: PhysicalParams) -> np.ndarray:
    """Fastest local speed (|v| + c_s)/(1 + |v| c_s/c^2) with c_s^2 = p'(rho)."""
    cs = np.sqrt(np.asarray(pressure_derivative(prim.rho, params), dtype=float))
    speed = np.abs(prim.v)
    return (speed + cs) / (1.0 + speed * cs / params.c2)


def cfl_timestep(prim: PrimitiveState, grid: RadialGrid, params: PhysicalParams,
                 cfl: float = DEFAULT_CFL) -> float:
    """dt = cfl dr / max(lambda, 1e-12 c)."""
    if not 0 < cfl < 1:
        raise UsageError(f"cfl must lie in (0, 1), got {cfl}")
    lam = float(np.max(signal_speed(prim, params), initial=0.0))
    return cfl * grid.dr / max(lam, LAMBDA_MIN_FACTOR * params.c)


def _with_ghosts(x: np.ndarray, parity: float) -> np.ndarray:
    # Reflective ghost at r = 0 (parity +1 even, -1 odd), outflow copy at r_max
    return np.concatenate(([parity * x[0]], x, [x[-1]]))


def _floor_vacuum(D: np.ndarray, S: np.ndarray) -> ConservedState:
    vac = np.abs(D) <= VACUUM_FLOOR
    return ConservedState(np.where(vac, 0.0, D), np.where(vac, 0.0, S))


def _rhs(prim: PrimitiveState, cons: ConservedState, grid: RadialGrid,
         params: PhysicalParams, self_field: bool):
    p = np.asarray(pressure(prim.rho, params), dtype=float)
    lam = signal_speed(prim, params)

    D = _with_ghosts(cons.D, 1.0)
    S = _with_ghosts(cons.S, -1.0)
    v = _with_ghosts(prim.v, -1.0)
    P = _with_ghosts(p, 1.0)
    L = _with_ghosts(lam, 1.0)

    fD = D * v
    fS = S * v + P
    alpha = np.maximum(L[:-1], L[1:])
    flux_D = 0.5 * (fD[:-1] + fD[1:]) - 0.5 * alpha * (D[1:] - D[:-1])
    flux_S = 0.5 * (fS[:-1] + fS[1:]) - 0.5 * alpha * (S[1:] - S[:-1])

    area = grid.faces ** 2
    volume = grid.weights
    dD = -(area[1:] * flux_D[1:] - area[:-1] * flux_D[:-1]) / volume
    # p (A_+ - A_-) / V is the discrete 2p/r that cancels a uniform pressure exactly
    dS = -(area[1:] * flux_S[1:] - area[:-1] * flux_S[:-1]) / volume + p * (area[1:] - area[:-1]) / volume
    if self_field:
        dS = dS + 4.0 * np.pi * cons.D * electric_field(cons.D, grid).phi_r
    return dD, dS


def step(cons: ConservedState, grid: RadialGrid, params: PhysicalParams, dt: float,
         *, self_field: bool = True, tol: float = RECOVERY_TOL,
         prim: PrimitiveState | None = None) -> ConservedState:
    """
    One forward-Euler stage.

    Args:
        cons: Current conserved state
        grid: Radial grid
        params: Physical constants
        dt: Time step (must satisfy the CFL bound of the current state)
        self_field: Include the electric force 4 pi D phi_r
        tol: Recovery tolerance
        prim: Primitive state matching cons, if already recovered

    Returns:
        Updated ConservedState, with |D| <= VACUUM_FLOOR snapped to vacuum

    Raises:
        RecoveryError: cons cannot be converted to primitives
    """
    if prim is None:
        prim = cons_to_prim(cons, params, tol)
    dD, dS = _rhs(prim, cons, grid, params, self_field)
    return _floor_vacuum(cons.D + dt * dD, cons.S + dt * dS)


def time_integrate(cons: ConservedState, grid: RadialGrid, params: PhysicalParams, dt: float,
                   *, self_field: bool = True, tol: float = RECOVERY_TOL,
                   prim: PrimitiveState | None = None) -> ConservedState:
    """SSP-RK2: average of the state and two chained Euler stages."""
    stage1 = step(cons, grid, params, dt, self_field=self_field, tol=tol, prim=prim)
    stage2 = step(stage1, grid, params, dt, self_field=self_field, tol=tol)
    return _floor_vacuum(0.5 * (cons.D + stage2.D), 0.5 * (cons.S + stage2.S))


def _gradient(x: np.ndarray, dr: float) -> np.ndarray:
    if x.size < 2:
        return np.zeros_like(x)
    return np.gradient(x, dr, edge_order=2 if x.size >= 3 else 1)


def regularity_indicator(prim: PrimitiveState, grid: RadialGrid,
                         params: PhysicalParams) -> RegularityIndicator:
    """Central-difference maxima of |(v^2)_r|, |(p')_r| and |w_r|."""
    dv2 = np.abs(_gradient(prim.v ** 2, grid.dr))
    dpp = np.abs(_gradient(np.asarray(pressure_derivative(prim.rho, params), dtype=float), grid.dr))
    dw = np.abs(_gradient(prim.rho ** (0.5 * (params.gamma - 1.0)), grid.dr))
    excess = np.maximum(dv2, dpp)
    return RegularityIndicator(
        max_dv2_dr=float(np.max(dv2)),
        max_dpprime_dr=float(np.max(dpp)),
        max_dw_dr=float(np.max(dw)),
        c2=params.c2,
        worst_cell=int(np.argmax(excess)),
    )


def make_snapshot(t: float, prim: PrimitiveState, cons: ConservedState,
                  grid: RadialGrid, params: PhysicalParams) -> Snapshot:
    return Snapshot(
        t=t,
        prim=prim,
        cons=cons,
        field=electric_field(cons.D, grid),
        regularity=regularity_indicator(prim, grid, params),
    )


def _spatial_terms(snap: Snapshot, grid: RadialGrid, params: PhysicalParams) -> np.ndarray:
    rho, v = snap.prim.rho, snap.prim.v
    terms = velocity_equation_terms(rho, v, grid.centers, params)
    v_r = _gradient(v, grid.dr)
    rho_r = _gradient(rho, grid.dr)
    return terms["A"] * v * v_r + terms["B"] * rho_r - terms["E"] * snap.field.phi_r - terms["G"]


def velocity_equation_residual(series: SimulationSeries, params: PhysicalParams,
                               rho_min: float = VACUUM_FLOOR) -> np.ndarray:
    """
    Residual of the velocity equation between consecutive snapshots.

    v_t is the forward difference over each interval; the spatial terms are
    averaged over the two end snapshots. Only interior cells with rho > rho_min
    at both ends are evaluated.

    Returns:
        Array of length len(series) - 1 with the max |residual| per interval
        (0 when no cell qualifies)

    Raises:
        UsageError: Fewer than two snapshots
    """
    if len(series) < 2:
        raise UsageError("velocity equation residual needs at least two snapshots")
    grid = series.grid
    interior = np.zeros(grid.n_cells, dtype=bool)
    interior[1:-1] = True

    out = np.zeros(len(series) - 1)
    previous = _spatial_terms(series.snapshots[0], grid, params)
    for k in range(len(series) - 1):
        s0, s1 = series.snapshots[k], series.snapshots[k + 1]
        current = _spatial_terms(s1, grid, params)
        mask = interior & (s0.prim.rho > rho_min) & (s1.prim.rho > rho_min)
        if mask.any():
            v_t = (s1.prim.v - s0.prim.v) / (s1.t - s0.t)
            residual = v_t + 0.5 * (previous + current)
            out[k] = float(np.max(np.abs(residual[mask])))
        previous = current
    return out


def _check_state(snap: Snapshot, params: PhysicalParams, velocity_guard: float):
    """(cause, cell, detail) of the first violated condition, or None."""
    speed = np.abs(snap.prim.v)
    limit = params.c * (1.0 - velocity_guard)
    if np.any(speed >= limit):
        i = int(np.argmax(speed))
        return BreakdownCause.SUPERLUMINAL, i, f"|v| = {speed[i]:.12g} reached c(1 - {velocity_guard:g})"
    reg = snap.regularity
    if not reg.regular:
        detail = (f"max|(v^2)_r| = {reg.max_dv2_dr:.6g}, max|(p')_r| = {reg.max_dpprime_dr:.6g}, "
                  f"c^2 = {reg.c2:.6g}")
        return BreakdownCause.REGULARITY_VIOLATION, reg.worst_cell, detail
    return None


def run(config) -> tuple[SimulationSeries, BreakdownReport]:
    """
    Integrate a configured problem from t = 0 to t_final or the first breakdown.

    Args:
        config: Validated RunConfig

    Returns:
        (SimulationSeries, BreakdownReport)
    """
    params = config.physical_params()
    grid = config.radial_grid()
    opts = config.run
    prim = config.initial_state(grid)
    cons = prim_to_cons(prim, params)
    series = SimulationSeries(grid, params)

    t_final = opts.t_final
    dt_min = opts.dt_min_factor * t_final
    logger.info(f"Running {grid.n_cells} cells to t = {t_final:g} (cfl = {opts.cfl:g})")

    snap = make_snapshot(0.0, prim, cons, grid, params)
    series.append(snap)
    failure = _check_state(snap, params, opts.velocity_guard)
    if failure is not None:
        report = BreakdownReport(True, 0.0, failure[0], failure[1], failure[2])
        logger.warning(f"Initial data already breaks down: {report.cause.value} at cell {report.cell_index}")
        return series, report

    t = 0.0
    steps = 0
    report = BreakdownReport()
    while t < t_final:
        remaining = t_final - t
        dt = cfl_timestep(prim, grid, params, opts.cfl)
        if dt < dt_min and remaining > dt_min:
            i = int(np.argmax(signal_speed(prim, params)))
            report = BreakdownReport(True, t, BreakdownCause.DT_COLLAPSE, i, f"dt = {dt:.3e} < {dt_min:.3e}")
            break
        dt = min(dt, remaining)
        try:
            new_cons = time_integrate(cons, grid, params, dt, self_field=opts.self_field,
                                      tol=opts.recovery_tol, prim=prim)
            new_prim = cons_to_prim(new_cons, params, opts.recovery_tol)
        except RecoveryError as exc:
            report = BreakdownReport(True, t + dt, BreakdownCause.RECOVERY_FAILURE, exc.cell_index, str(exc))
            break

        t = t_final if dt == remaining else t + dt
        steps += 1
        series.dt_history.append(dt)
        snap = make_snapshot(t, new_prim, new_cons, grid, params)
        failure = _check_state(snap, params, opts.velocity_guard)
        if failure is not None or steps % opts.output_every == 0 or t >= t_final:
            series.append(snap)
        if failure is not None:
            report = BreakdownReport(True, t, failure[0], failure[1], failure[2])
            break
        cons, prim = new_cons, new_prim

    if report.occurred:
        logger.warning(f"Breakdown ({report.cause.value}) at t = {report.t_breakdown:.6g}, "
                       f"cell {report.cell_index}: {report.detail}")
    else:
        logger.info(f"Reached t = {t:g} after {steps} steps without breakdown")
    return series, report
