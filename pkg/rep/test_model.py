import numpy as np
import pytest
from numpy.testing import assert_allclose

from rep.errors import DomainError, RecoveryError, SuperluminalError
from rep.model import (
    ConservedState,
    PhysicalParams,
    PrimitiveState,
    RadialGrid,
    charge_density,
    cons_to_prim,
    density_from_charge,
    lorentz_factor,
    max_charge_density,
    pressure,
    pressure_derivative,
    prim_to_cons,
    subcritical,
    velocity_equation_terms,
)

UNIT = PhysicalParams(c=1.0, gamma=2.0, a=0.5, e0=0.0)


@pytest.mark.parametrize("kwargs", [
    {"c": 0.0}, {"gamma": 1.0}, {"a": 0.0}, {"a": 1.0}, {"e0": -0.1},
])
def test_params_reject_invalid(kwargs):
    with pytest.raises(DomainError):
        PhysicalParams(**kwargs)


def test_grid_geometry():
    grid = RadialGrid(n_cells=4, r_max=2.0, R=1.0)
    assert grid.dr == 0.5
    assert_allclose(grid.centers, [0.25, 0.75, 1.25, 1.75])
    assert_allclose(grid.faces, [0.0, 0.5, 1.0, 1.5, 2.0])
    assert_allclose(grid.weights, grid.centers ** 2 * 0.5 + 0.5 ** 3 / 12.0)
    assert grid.weights.sum() == pytest.approx(2.0 ** 3 / 3.0)
    assert grid.inside().tolist() == [True, True, False, False]
    with pytest.raises(DomainError):
        RadialGrid(n_cells=4, r_max=0.5, R=1.0)


def test_pressure_and_derivative():
    assert pressure(0.0, UNIT) == 0.0
    assert pressure(1.0, PhysicalParams(gamma=1.7)) == 1.0
    assert pressure(2.0, UNIT) == 4.0
    assert pressure_derivative(2.0, UNIT) == 4.0
    assert pressure_derivative(0.0, UNIT) == 0.0
    with pytest.raises(DomainError):
        pressure(-1.0, UNIT)


def test_subcritical_is_strict():
    assert subcritical(0.0, UNIT)
    assert subcritical(0.1, UNIT)
    assert not subcritical(0.25, UNIT)
    flags = subcritical(np.linspace(0.0, 1.0, 101), UNIT)
    first_fail = int(np.argmin(flags))
    assert not flags[first_fail:].any()


def test_charge_density_closed_form():
    assert charge_density(0.0, UNIT) == 0.0
    assert charge_density(1.0, UNIT) == pytest.approx(0.5)


def test_charge_density_solves_its_ode():
    params = PhysicalParams(c=2.0, gamma=1.5, a=0.5, e0=0.3)
    rho = np.linspace(0.05, 5.0, 50)
    h = 1e-6 * rho
    dn = (np.asarray(charge_density(rho + h, params)) - np.asarray(charge_density(rho - h, params))) / (2 * h)
    n = np.asarray(charge_density(rho, params))
    q = rho + rho ** 1.5 / params.c2
    assert_allclose(dn, n / q, rtol=1e-6)


def test_charge_density_vacuum_ratio_and_bound():
    params = PhysicalParams(c=1.0, gamma=2.0, e0=0.5)
    assert charge_density(1e-12, params) / 1e-12 == pytest.approx(1.0 / 1.5)
    rho = np.linspace(1e-3, 10.0, 200)
    n = np.asarray(charge_density(rho, params))
    assert np.all(n < rho * params.vacuum_ratio)
    assert np.all(np.diff(n) > 0)


def test_density_from_charge_inverts():
    assert density_from_charge(0.5, UNIT) == pytest.approx(1.0)
    params = PhysicalParams(c=3.0, gamma=1.4, e0=0.2)
    rho = np.geomspace(1e-6, 50.0, 40)
    assert_allclose(density_from_charge(charge_density(rho, params), params), rho, rtol=1e-11)
    with pytest.raises(DomainError):
        density_from_charge(max_charge_density(UNIT), UNIT)


def test_lorentz_factor():
    assert lorentz_factor(0.0, UNIT) == 1.0
    assert lorentz_factor(0.6, UNIT) == pytest.approx(1.25)
    assert lorentz_factor(-0.6, UNIT) == pytest.approx(1.25)
    assert np.all(np.diff(lorentz_factor(np.linspace(0.0, 0.999, 50), UNIT)) > 0)
    with pytest.raises(SuperluminalError) as info:
        lorentz_factor(np.array([0.1, 1.0]), UNIT)
    assert info.value.cell_index == 1


def test_prim_to_cons_examples():
    cons = prim_to_cons(PrimitiveState([0.0, 1.0, 1.0], [0.0, 0.0, 0.6]), UNIT)
    assert_allclose(cons.D, [0.0, 0.5, 0.625])
    assert_allclose(cons.S, [0.0, 0.0, 1.875])


def test_prim_to_cons_rejects_moving_vacuum():
    with pytest.raises(DomainError):
        prim_to_cons(PrimitiveState([0.0], [0.1]), UNIT)


def test_cons_to_prim_examples():
    prim = cons_to_prim(ConservedState([0.0, 0.5, 0.625], [0.0, 0.0, 1.875]), UNIT)
    assert_allclose(prim.rho, [0.0, 1.0, 1.0], rtol=1e-10)
    assert_allclose(prim.v, [0.0, 0.0, 0.6], rtol=1e-10)


# Samples stay causal (p' = 2 rho < c^2); beyond that S(v) is not monotone and
# recovery is not unique
@pytest.mark.parametrize("c, rho_max", [(1.0, 0.45), (20.0, 10.0)])
def test_cons_to_prim_round_trip(c, rho_max):
    params = PhysicalParams(c=c, gamma=2.0, a=0.5)
    rng = np.random.default_rng(0)
    rho = 10.0 ** rng.uniform(-8.0, np.log10(rho_max), 1000)
    v = rng.uniform(-0.99, 0.99, 1000) * params.c
    prim = cons_to_prim(prim_to_cons(PrimitiveState(rho, v), params), params)
    assert_allclose(prim.rho, rho, rtol=1e-10)
    assert_allclose(prim.v, v, rtol=1e-10)


def test_cons_to_prim_floors_vacuum():
    prim = cons_to_prim(ConservedState([1e-15, 0.0], [1e-15, 0.0]), UNIT)
    assert prim.rho.tolist() == [0.0, 0.0]
    assert prim.v.tolist() == [0.0, 0.0]


def test_cons_to_prim_negative_charge_fails_with_cell():
    with pytest.raises(RecoveryError) as info:
        cons_to_prim(ConservedState([0.5, -1e-3], [0.0, 0.0]), UNIT)
    assert info.value.cell_index == 1


def test_cons_to_prim_charge_above_supremum_at_rest_fails():
    # At rest n = D, and D = 2 exceeds sup n(rho) = 1
    with pytest.raises(RecoveryError) as info:
        cons_to_prim(ConservedState([0.5, 2.0], [0.0, 0.0]), UNIT)
    assert info.value.cell_index == 1


def test_velocity_equation_terms_at_rest():
    rho = np.array([0.1, 0.2])
    terms = velocity_equation_terms(rho, np.zeros(2), np.array([0.5, 1.0]), UNIT)
    assert_allclose(terms["K"], 1.0)
    assert_allclose(terms["G"], 0.0)
    assert_allclose(terms["A"], 1.0 - 2.0 * rho)
    n = rho / (1.0 + rho)
    assert_allclose(terms["E"], 4 * np.pi * n / (rho ** 2 + rho))
