import numpy as np
import pytest
from numpy.testing import assert_allclose

from rep.characteristics import density_along_path, support_radius, trace, trace_many
from rep.config import build_config
from rep.errors import UsageError
from rep.model import PhysicalParams, PrimitiveState, RadialGrid, prim_to_cons
from rep.solver import SimulationSeries, make_snapshot, run

UNIT = PhysicalParams(c=1.0, gamma=2.0, a=0.5, e0=0.0)


def _uniform_series(v: float, times=(0.0, 0.5, 1.0), n_cells: int = 100, rho: float = 0.01):
    grid = RadialGrid(n_cells=n_cells, r_max=2.0, R=2.0)
    series = SimulationSeries(grid, UNIT)
    prim = PrimitiveState(np.full(n_cells, rho), np.full(n_cells, v))
    cons = prim_to_cons(prim, UNIT)
    for t in times:
        series.append(make_snapshot(t, prim, cons, grid, UNIT))
    return series


def test_static_flow_keeps_paths_in_place():
    series = _uniform_series(0.0)
    path = trace(0.7, series)
    assert_allclose(path.positions, 0.7)
    assert not path.exited
    record = density_along_path(path, series, UNIT)
    assert_allclose(record.predicted, record.interpolated)
    assert record.positive
    assert record.max_relative_mismatch == pytest.approx(0.0, abs=1e-14)


def test_constant_velocity_moves_linearly():
    series = _uniform_series(0.5)
    path = trace(0.3, series)
    assert_allclose(path.positions, [0.3, 0.55, 0.8], rtol=1e-12)
    assert path.max_speed == pytest.approx(0.5)


def test_paths_leaving_the_grid_are_truncated():
    series = _uniform_series(0.5, times=(0.0, 0.1, 0.2, 0.3, 0.4))
    path = trace(1.9, series)
    assert path.exited
    assert len(path.positions) < 5
    assert path.positions[-1] < 2.0


def test_trace_rejects_bad_input():
    series = _uniform_series(0.0)
    with pytest.raises(UsageError):
        trace(0.0, series)
    with pytest.raises(UsageError):
        trace(0.5, SimulationSeries(series.grid, UNIT))


def test_trace_many_matches_sequential():
    series = _uniform_series(0.25)
    radii = [0.2, 0.5, 0.9, 1.3]
    paths = trace_many(radii, series, max_workers=2)
    for r0, path in zip(radii, paths):
        assert_allclose(path.positions, trace(r0, series).positions)
    assert trace_many([], series) == []


def test_vacuum_support_and_density():
    series = _uniform_series(0.0, rho=0.0)
    assert_allclose(support_radius(series), 0.0)
    record = density_along_path(trace(0.5, series), series, UNIT)
    assert not record.interpolated.any() and not record.predicted.any()
    assert record.positive


@pytest.fixture(scope="module")
def ball_run():
    """The smooth ball at n = 400 over most of its regular window (it breaks down near t = 0.36)."""
    config = build_config({
        "grid": {"n_cells": 400, "r_max": 2.0, "R": 1.0},
        "initial_data": {"family": "ball", "A": 0.05, "V": 0.05, "m": 4},
        "run": {"t_final": 0.3, "output_every": 1},
    })
    series, report = run(config)
    assert not report.occurred
    return config, series


def test_support_radius_of_a_ball(ball_run):
    config, series = ball_run
    assert len(series) > 40
    grid = series.grid
    radii = support_radius(series, config.monitor.mass_fraction)
    assert radii[0] <= grid.R
    assert np.all(radii <= grid.R + 2 * grid.dr)
    with pytest.raises(UsageError):
        support_radius(series, 0.0)


def test_positivity_along_paths_of_a_regular_run(ball_run):
    config, series = ball_run
    params = config.physical_params()
    for path in trace_many([0.1, 0.4, 0.8, 1.5], series):
        assert path.max_speed < params.c
        record = density_along_path(path, series, params)
        assert record.positive
    # Outside the support nothing moves
    outside = trace(1.5, series)
    assert_allclose(outside.positions, 1.5, atol=1e-12)
