"""
Characteristic curves dr/dt = v(t, r) through a simulated velocity field.

Along a characteristic the relativistic charge density obeys
D(t, r(t)) = D(0, r0) exp(-int_0^t (v_r + 2 v / r) ds), which keeps D positive
wherever it starts positive; outside the initial support the velocity is zero
and paths stay put.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.integrate import cumulative_trapezoid

from .config import worker_count
from .errors import UsageError
from .model import PhysicalParams
from .solver import SimulationSeries, _gradient

logger = logging.getLogger(__name__)

DEFAULT_MASS_FRACTION = 1e-6
# Sub-steps keep |v| h below this fraction of a cell per Heun stage
SUBSTEP_CELL_FRACTION = 0.5


@dataclass(frozen=True)
class CharacteristicPath:
    r0: float
    times: np.ndarray
    positions: np.ndarray
    velocities: np.ndarray
    exited: bool = False

    @property
    def max_speed(self) -> float:
        return float(np.max(np.abs(self.velocities), initial=0.0))


@dataclass(frozen=True)
class PathDensityRecord:
    """D interpolated along a path next to the integrating-factor prediction."""
    times: np.ndarray
    interpolated: np.ndarray
    predicted: np.ndarray

    @property
    def positive(self) -> bool:
        """Prediction stays > 0 whenever D(0, r0) > 0."""
        if self.predicted.size == 0 or self.predicted[0] <= 0:
            return True
        return bool(np.all(self.predicted > 0))

    @property
    def max_relative_mismatch(self) -> float:
        scale = np.max(np.abs(self.predicted), initial=0.0)
        if scale == 0:
            return float(np.max(np.abs(self.interpolated), initial=0.0))
        return float(np.max(np.abs(self.interpolated - self.predicted)) / scale)


def _radial_interp(r: float, centers: np.ndarray, values: np.ndarray, origin_value: float) -> float:
    return float(np.interp(r, np.concatenate(([0.0], centers)), np.concatenate(([origin_value], values))))


class _VelocityField:
    """v(t, r), linear in r between cell centres (v(t, 0) = 0) and in t between snapshots."""

    def __init__(self, series: SimulationSeries):
        self.centers = series.grid.centers
        self.times = series.times
        self.v = series.velocities()

    def __call__(self, t: float, r: float) -> float:
        k = int(np.clip(np.searchsorted(self.times, t, side="right") - 1, 0, len(self.times) - 1))
        vk = _radial_interp(r, self.centers, self.v[k], 0.0)
        if k + 1 >= len(self.times):
            return vk
        t0, t1 = self.times[k], self.times[k + 1]
        w = (t - t0) / (t1 - t0)
        return (1.0 - w) * vk + w * _radial_interp(r, self.centers, self.v[k + 1], 0.0)


def trace(r0: float, series: SimulationSeries) -> CharacteristicPath:
    """
    Integrate dr/dt = v with Heun's method, sampling at the snapshot times.

    Args:
        r0: Starting radius in (0, r_max)
        series: Simulated snapshots (non-empty)

    Returns:
        CharacteristicPath, truncated with exited=True if it leaves [0, r_max)
    """
    grid = series.grid
    if len(series) == 0:
        raise UsageError("cannot trace a characteristic through an empty series")
    if not 0 < r0 < grid.r_max:
        raise UsageError(f"r0 = {r0} must lie in (0, {grid.r_max})")

    vel = _VelocityField(series)
    times = series.times
    positions = [float(r0)]
    speeds = [vel(times[0], r0)]
    r = float(r0)
    exited = False
    for k in range(len(times) - 1):
        t0, t1 = times[k], times[k + 1]
        vmax = float(np.max(np.abs(vel.v[k:k + 2]), initial=0.0))
        n_sub = max(1, int(np.ceil(vmax * (t1 - t0) / (SUBSTEP_CELL_FRACTION * grid.dr))))
        h = (t1 - t0) / n_sub
        t = t0
        for _ in range(n_sub):
            k1 = vel(t, r)
            k2 = vel(t + h, r + h * k1)
            r = max(r + 0.5 * h * (k1 + k2), 0.0)
            t += h
        if r >= grid.r_max:
            exited = True
            logger.debug(f"Path from r0 = {r0:.6g} left the grid before t = {t1:.6g}")
            break
        positions.append(r)
        speeds.append(vel(t1, r))

    n = len(positions)
    return CharacteristicPath(r0=float(r0), times=times[:n].copy(), positions=np.array(positions),
                              velocities=np.array(speeds), exited=exited)


def trace_many(radii, series: SimulationSeries, max_workers: int | None = None) -> list:
    """Trace independent paths on a thread pool sized by REP_THREADS."""
    radii = list(radii)
    if not radii:
        return []
    workers = max_workers or worker_count()
    with ThreadPoolExecutor(max_workers=min(workers, len(radii))) as pool:
        return list(pool.map(lambda r0: trace(r0, series), radii))


def density_along_path(path: CharacteristicPath, series: SimulationSeries,
                       params: PhysicalParams) -> PathDensityRecord:
    """
    Compare D along a path with D(0, r0) exp(-int (v_r + 2 v/r) ds).

    The divergence uses the same central differences as the regularity
    indicator and is integrated in time by the trapezoid rule.
    """
    grid = series.grid
    centers = grid.centers
    n = len(path.times)
    interpolated = np.empty(n)
    divergence = np.empty(n)
    for k in range(n):
        snap = series.snapshots[k]
        r = path.positions[k]
        v = snap.prim.v
        D = snap.cons.D
        v_r = _gradient(v, grid.dr)
        interpolated[k] = _radial_interp(r, centers, D, D[0])
        slope = _radial_interp(r, centers, v_r, v_r[0])
        # 2 v / r -> 2 v_r(0) at the origin
        ratio = _radial_interp(r, centers, v, 0.0) / r if r > 0 else slope
        divergence[k] = slope + 2.0 * ratio

    D0 = interpolated[0]
    if n > 1:
        accumulated = cumulative_trapezoid(divergence, path.times, initial=0.0)
    else:
        accumulated = np.zeros(n)
    predicted = D0 * np.exp(-accumulated)
    return PathDensityRecord(times=path.times, interpolated=interpolated, predicted=predicted)


def support_radius(series: SimulationSeries, mass_fraction: float = DEFAULT_MASS_FRACTION) -> np.ndarray:
    """
    Per snapshot, the first cell centre enclosing (1 - mass_fraction) of the shell charge sum D_i V_i.

    All-vacuum snapshots report 0.
    """
    if not 0 < mass_fraction < 1:
        raise UsageError(f"mass_fraction must lie in (0, 1), got {mass_fraction}")
    grid = series.grid
    out = np.zeros(len(series))
    for k, snap in enumerate(series.snapshots):
        charge = np.maximum(snap.cons.D, 0.0) * grid.weights
        total = float(np.sum(charge))
        if total <= 0:
            continue
        enclosed = np.cumsum(charge)
        i = int(np.searchsorted(enclosed, (1.0 - mass_fraction) * total, side="left"))
        out[k] = grid.centers[min(i, grid.n_cells - 1)]
    return out
