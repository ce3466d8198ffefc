"""
Physical constants, gamma-law equation of state, Lorentz algebra and the
primitive <-> conserved conversion of the radial relativistic Euler-Poisson system.

Conventions:
    rho  proper mass-energy density, p = rho**gamma
    n    charge density, dn/n = drho/q with q = p/c^2 + rho
    D    n / sqrt(1 - v^2/c^2)
    S    q v / (1 - v^2/c^2)
"""

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import DomainError, RecoveryError, SuperluminalError

# D at or below this value is snapped to exact vacuum (rho = v = 0)
VACUUM_FLOOR = 1e-14
RECOVERY_TOL = 1e-12
MAX_RECOVERY_ITER = 100


def _scalar_or_array(x):
    """Return a Python float for 0-d input, the array otherwise."""
    return float(x) if np.ndim(x) == 0 else x


@dataclass(frozen=True)
class PhysicalParams:
    """
    Constants of the model.

    Args:
        c: Speed of light (> 0)
        gamma: Adiabatic index (> 1)
        a: Sound-speed fraction in the hypothesis p'(rho) < a c^2, in (0, 1)
        e0: Specific internal energy at vacuum (>= 0)
    """
    c: float = 1.0
    gamma: float = 2.0
    a: float = 0.5
    e0: float = 0.0

    def __post_init__(self):
        if not self.c > 0:
            raise DomainError(f"c must be > 0, got {self.c}")
        if not self.gamma > 1:
            raise DomainError(f"gamma must be > 1, got {self.gamma}")
        if not 0 < self.a < 1:
            raise DomainError(f"a must lie in (0, 1), got {self.a}")
        if not self.e0 >= 0:
            raise DomainError(f"e0 must be >= 0, got {self.e0}")

    @property
    def c2(self) -> float:
        return self.c * self.c

    @property
    def vacuum_ratio(self) -> float:
        """Limit of n/rho at vacuum, 1/(1 + e0/c^2)."""
        return 1.0 / (1.0 + self.e0 / self.c2)


@dataclass(frozen=True)
class RadialGrid:
    """
    Uniform cell-centred radial grid, r_i = (i + 1/2) dr.

    Args:
        n_cells: Number of cells
        r_max: Outer radius
        R: Radius of the initial support
    """
    n_cells: int
    r_max: float
    R: float

    def __post_init__(self):
        if int(self.n_cells) != self.n_cells or self.n_cells < 1:
            raise DomainError(f"n_cells must be a positive integer, got {self.n_cells}")
        if not self.R > 0:
            raise DomainError(f"R must be > 0, got {self.R}")
        if not self.r_max >= self.R:
            raise DomainError(f"r_max ({self.r_max}) must be >= R ({self.R})")

    @property
    def dr(self) -> float:
        return self.r_max / self.n_cells

    @cached_property
    def centers(self) -> np.ndarray:
        r = (np.arange(self.n_cells) + 0.5) * self.dr
        r.setflags(write=False)
        return r

    @cached_property
    def faces(self) -> np.ndarray:
        """Cell interfaces r_{i-1/2}, i = 0..n_cells (first face is the origin)."""
        r = np.arange(self.n_cells + 1) * self.dr
        r.setflags(write=False)
        return r

    @cached_property
    def weights(self) -> np.ndarray:
        """Cell integrals of r^2, (r_{i+1/2}^3 - r_{i-1/2}^3)/3 = r_i^2 dr + dr^3/12."""
        f = self.faces
        w = (f[1:] ** 3 - f[:-1] ** 3) / 3.0
        w.setflags(write=False)
        return w

    def inside(self) -> np.ndarray:
        """Mask of the cells whose centre lies in [0, R]."""
        return self.centers <= self.R


def _frozen(x) -> np.ndarray:
    arr = np.array(x, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class PrimitiveState:
    """Per-cell (rho, v)."""
    rho: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "rho", _frozen(self.rho))
        object.__setattr__(self, "v", _frozen(self.v))
        if self.rho.shape != self.v.shape:
            raise DomainError(f"rho and v shapes differ: {self.rho.shape} vs {self.v.shape}")

    def validate(self, params: PhysicalParams) -> None:
        """Check rho >= 0, |v| < c and v = 0 on vacuum cells."""
        bad = np.flatnonzero(self.rho < 0)
        if bad.size:
            raise DomainError(f"negative density {self.rho[bad[0]]} at cell {bad[0]}")
        fast = np.flatnonzero(np.abs(self.v) >= params.c)
        if fast.size:
            i = int(fast[0])
            raise SuperluminalError(f"|v| = {abs(self.v[i])} >= c at cell {i}", cell_index=i)
        moving_vacuum = np.flatnonzero((self.rho == 0) & (self.v != 0))
        if moving_vacuum.size:
            raise DomainError(f"nonzero velocity on vacuum cell {moving_vacuum[0]}")

    @classmethod
    def vacuum(cls, n_cells: int) -> "PrimitiveState":
        return cls(np.zeros(n_cells), np.zeros(n_cells))


@dataclass(frozen=True)
class ConservedState:
    """Per-cell (D, S)."""
    D: np.ndarray
    S: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "D", _frozen(self.D))
        object.__setattr__(self, "S", _frozen(self.S))
        if self.D.shape != self.S.shape:
            raise DomainError(f"D and S shapes differ: {self.D.shape} vs {self.S.shape}")


# --- Equation of state ---

def _check_density(rho) -> np.ndarray:
    rho = np.asarray(rho, dtype=float)
    if np.any(rho < 0):
        raise DomainError(f"density must be >= 0, got min {np.min(rho)}")
    return rho


def pressure(rho, params: PhysicalParams):
    """gamma-law pressure p = rho**gamma."""
    rho = _check_density(rho)
    return _scalar_or_array(rho ** params.gamma)


def pressure_derivative(rho, params: PhysicalParams):
    """p'(rho) = gamma rho**(gamma-1), the squared sound speed."""
    rho = _check_density(rho)
    return _scalar_or_array(params.gamma * rho ** (params.gamma - 1.0))


def subcritical(rho, params: PhysicalParams):
    """Whether p'(rho) < a c^2 holds (strict)."""
    result = np.asarray(pressure_derivative(rho, params)) < params.a * params.c2
    return bool(result) if result.ndim == 0 else result


def charge_density(rho, params: PhysicalParams):
    """
    Charge density n(rho) solving dn/n = drho/(rho + p/c^2).

    Closed form n = k rho (1 + rho**(gamma-1)/c^2)**(-1/(gamma-1)) with the
    integration constant k = 1/(1 + e0/c^2) fixed by n/rho -> k at vacuum.
    """
    rho = _check_density(rho)
    g1 = params.gamma - 1.0
    n = params.vacuum_ratio * rho * (1.0 + rho ** g1 / params.c2) ** (-1.0 / g1)
    return _scalar_or_array(n)


def max_charge_density(params: PhysicalParams) -> float:
    """Supremum of n(rho) as rho -> infinity."""
    return params.vacuum_ratio * params.c ** (2.0 / (params.gamma - 1.0))


def _density_from_charge_unchecked(n: np.ndarray, params: PhysicalParams) -> np.ndarray:
    # inf where n is at or above the supremum of n(rho)
    g1 = params.gamma - 1.0
    m = n / params.vacuum_ratio
    y = m ** g1 / params.c2
    with np.errstate(divide="ignore", invalid="ignore"):
        rho = np.where(y < 1.0, m * (1.0 - np.minimum(y, 1.0)) ** (-1.0 / g1), np.inf)
    return rho


def density_from_charge(n, params: PhysicalParams):
    """Exact inverse of charge_density."""
    n = np.asarray(n, dtype=float)
    if np.any(n < 0):
        raise DomainError(f"charge density must be >= 0, got min {np.min(n)}")
    n_max = max_charge_density(params)
    if np.any(n >= n_max):
        raise DomainError(f"charge density {np.max(n)} is at or above its supremum {n_max}")
    return _scalar_or_array(_density_from_charge_unchecked(n, params))


# --- Lorentz algebra ---

def lorentz_factor(v, params: PhysicalParams):
    """1/sqrt(1 - v^2/c^2); raises SuperluminalError for |v| >= c."""
    v = np.asarray(v, dtype=float)
    fast = np.flatnonzero(np.abs(v).ravel() >= params.c)
    if fast.size:
        i = int(fast[0])
        raise SuperluminalError(f"|v| = {abs(v.ravel()[i])} >= c = {params.c}", cell_index=i)
    return _scalar_or_array(1.0 / np.sqrt(1.0 - (v / params.c) ** 2))


def enthalpy_density(rho, params: PhysicalParams):
    """q = p/c^2 + rho."""
    rho = _check_density(rho)
    return _scalar_or_array(rho ** params.gamma / params.c2 + rho)


def prim_to_cons(prim: PrimitiveState, params: PhysicalParams) -> ConservedState:
    """Map (rho, v) to (D, S) cell by cell; vacuum maps to (0, 0)."""
    prim.validate(params)
    W = np.asarray(lorentz_factor(prim.v, params))
    n = np.asarray(charge_density(prim.rho, params))
    q = np.asarray(enthalpy_density(prim.rho, params))
    return ConservedState(D=n * W, S=q * prim.v * W * W)


def _momentum_of_velocity(v, D, params: PhysicalParams):
    """S(v) at fixed D and its derivative dS/dv = q W^4 (1 - p' v^2/c^4)."""
    c2 = params.c2
    W2 = 1.0 / (1.0 - v * v / c2)
    n = D / np.sqrt(W2)
    rho = _density_from_charge_unchecked(n, params)
    with np.errstate(invalid="ignore", over="ignore"):
        q = rho ** params.gamma / c2 + rho
        pprime = params.gamma * rho ** (params.gamma - 1.0)
        S = q * v * W2
        dS = q * W2 * W2 * (1.0 - pprime * v * v / (c2 * c2))
    return S, dS, rho


def cons_to_prim(cons: ConservedState, params: PhysicalParams,
                 tol: float = RECOVERY_TOL, max_iter: int = MAX_RECOVERY_ITER) -> PrimitiveState:
    """
    Recover (rho, v) from (D, S).

    Solves S(v) = |S| for v in (0, c) per cell by Newton iteration safeguarded by
    bisection on a shrinking bracket; for a trial v the density follows
    exactly from n = D sqrt(1 - v^2/c^2). Cells with D <= VACUUM_FLOOR are
    returned as exact vacuum.

    Args:
        cons: Conserved state
        params: Physical constants
        tol: Relative tolerance on v and on the momentum residual
        max_iter: Iteration cap before a cell is declared unrecoverable

    Returns:
        PrimitiveState

    Raises:
        RecoveryError: No admissible root for some cell (carries its index)
    """
    if not tol > 0:
        raise DomainError(f"tol must be > 0, got {tol}")
    D = np.asarray(cons.D, dtype=float)
    S = np.asarray(cons.S, dtype=float)
    c = params.c

    negative = np.flatnonzero(D < -VACUUM_FLOOR)
    if negative.size:
        raise RecoveryError(f"negative charge density {D[negative[0]]}", int(negative[0]))

    rho = np.zeros_like(D)
    v = np.zeros_like(D)
    active = np.flatnonzero(D > VACUUM_FLOOR)
    if active.size == 0:
        return PrimitiveState(rho, v)

    Da = D[active]
    Sa = np.abs(S[active])
    sign = np.sign(S[active])

    # Below v_lo the charge density would exceed sup n(rho)
    ratio = np.minimum(max_charge_density(params) / Da, 1.0)
    lo = c * np.sqrt(1.0 - ratio * ratio)
    hi = np.full_like(Da, c * (1.0 - 1e-16))

    # Newtonian guess u = S/n, mapped back to a 3-velocity
    u0 = Sa * params.vacuum_ratio / Da
    x = u0 / np.sqrt(1.0 + (u0 / c) ** 2)
    x = np.where((x > lo) & (x < hi), x, 0.5 * (lo + hi))
    x = np.where(Sa == 0, np.maximum(lo, 0.0), x)

    converged = np.zeros(Da.shape, dtype=bool)
    for _ in range(max_iter):
        todo = ~converged
        Sx, dS, _ = _momentum_of_velocity(x[todo], Da[todo], params)
        g = Sa[todo] - Sx
        g = np.where(np.isfinite(g), g, -np.inf)

        lo_t = np.where(g > 0, x[todo], lo[todo])
        hi_t = np.where(g < 0, x[todo], hi[todo])
        with np.errstate(invalid="ignore", divide="ignore"):
            x_new = x[todo] + g / dS
        bisect = ~np.isfinite(x_new) | (dS <= 0) | (x_new < lo_t) | (x_new > hi_t)
        x_new = np.where(bisect, 0.5 * (lo_t + hi_t), x_new)
        x_new = np.where(g == 0, x[todo], x_new)

        small_residual = np.abs(g) <= tol * (1.0 + Sa[todo])
        small_step = np.abs(x_new - x[todo]) <= tol * np.abs(x[todo])
        done = (g == 0) | (small_residual & small_step)

        idx = np.flatnonzero(todo)
        lo[idx] = lo_t
        hi[idx] = hi_t
        x[idx] = x_new
        converged[idx] = done
        if converged.all():
            break

    if not converged.all():
        first = int(active[np.flatnonzero(~converged)[0]])
        raise RecoveryError("no velocity root in (-c, c)", first)

    _, _, rho_a = _momentum_of_velocity(x, Da, params)
    if not np.all(np.isfinite(rho_a)):
        first = int(active[np.flatnonzero(~np.isfinite(rho_a))[0]])
        raise RecoveryError("density diverged during recovery", first)
    rho[active] = rho_a
    v[active] = sign * x
    return PrimitiveState(rho, v)


def velocity_equation_terms(rho: np.ndarray, v: np.ndarray, r: np.ndarray,
                            params: PhysicalParams) -> dict:
    """
    Coefficients of the velocity equation for non-vacuum C^1 flow,

        v_t + A v v_r + B rho_r = E phi_r + G

    with A = (1 - p'/c^2)/K, B = (1 - v^2/c^2)^2 p'/(q K),
    E = 4 pi n (1 - v^2/c^2)^(3/2)/(q K), G = 2 (1 - v^2/c^2) v^2 p'/(c^2 r K)
    and K = 1 - p' v^2/c^4. Only meaningful where rho > 0.
    """
    c2 = params.c2
    rho = np.asarray(rho, dtype=float)
    v = np.asarray(v, dtype=float)
    pprime = np.asarray(pressure_derivative(rho, params))
    n = np.asarray(charge_density(rho, params))
    beta2 = 1.0 - v * v / c2
    K = 1.0 - pprime * v * v / (c2 * c2)
    with np.errstate(divide="ignore", invalid="ignore"):
        q = rho ** params.gamma / c2 + rho
        A = (1.0 - pprime / c2) / K
        B = beta2 ** 2 * pprime / (q * K)
        E = 4.0 * np.pi * n * beta2 ** 1.5 / (q * K)
        G = 2.0 * beta2 * v * v * pprime / (c2 * r * K)
    return {"A": A, "B": B, "E": E, "G": G, "K": K, "pprime": pprime}
