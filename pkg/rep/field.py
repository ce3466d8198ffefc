"""
Radial electric field of the charge distribution,

    phi_r(r) = (4 pi / r^2) * int_0^r D(s) s^2 ds,

evaluated by cumulative quadrature over the cell data.
"""

from dataclasses import dataclass

import numpy as np

from .model import RadialGrid


@dataclass(frozen=True)
class FieldProfile:
    """phi_r and the enclosed moment int_0^r D s^2 ds at each cell centre."""
    phi_r: np.ndarray
    cumulative_moment: np.ndarray


def cumulative_moment(D: np.ndarray, grid: RadialGrid) -> np.ndarray:
    """
    Enclosed moment M(r_i) for piecewise-constant cell data.

    Whole cells below r_i contribute D_j times their exact shell integral
    (r_{j+1/2}^3 - r_{j-1/2}^3)/3; cell i contributes the half shell from its
    inner face to its centre. For D = 1 this gives r_i^3/3 exactly.
    """
    D = np.asarray(D, dtype=float)
    half_shells = (grid.centers ** 3 - grid.faces[:-1] ** 3) / 3.0
    below = np.concatenate(([0.0], np.cumsum(D * grid.weights)[:-1]))
    return below + D * half_shells


def electric_field(D: np.ndarray, grid: RadialGrid) -> FieldProfile:
    """phi_r = 4 pi M(r)/r^2 at cell centres (finite, since M ~ r^3 near 0)."""
    M = cumulative_moment(D, grid)
    phi_r = 4.0 * np.pi * M / grid.centers ** 2
    return FieldProfile(phi_r=phi_r, cumulative_moment=M)
