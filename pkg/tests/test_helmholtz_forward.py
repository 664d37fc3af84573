# tests/test_helmholtz_forward.py

import math

import numpy as np
import pytest

from src.core.errors import PreconditionError
from src.modules.domain_model import zero_source
from src.modules.helmholtz_forward import (
    FrequencyGrid, evaluate_scalar, forward_field, forward_sweep, green_helmholtz,
)


def test_green_values():
    assert green_helmholtz(1.0, 0.0) == pytest.approx(1.0 / (4.0 * math.pi))
    assert abs(green_helmholtz(2.0, 3.0)) == pytest.approx(1.0 / (8.0 * math.pi))
    with pytest.raises(PreconditionError):
        green_helmholtz(0.0, 1.0)


def test_frequency_grid():
    g = FrequencyGrid(0.5, 8)
    assert g.omega_max == 4.0
    assert g.t_total == pytest.approx(2.0 * math.pi)
    assert g.index_for(1.2) == 2
    assert g.truncate(1.2).count == 2
    with pytest.raises(PreconditionError):
        g.truncate(0.3)
    with pytest.raises(PreconditionError):
        FrequencyGrid(0.0, 3)


def test_grid_for_domain(small_ball):
    domain, _ = small_ball
    g = FrequencyGrid.for_domain(domain, 3.0)
    assert g.d_omega == pytest.approx(math.pi / (4.0 * domain.diameter))
    assert g.omega_max >= 3.0


def test_zero_source_gives_zero_sweep(small_ball):
    domain, mesh = small_ball
    sweep = forward_sweep(zero_source(domain), mesh, FrequencyGrid(0.5, 4), with_gradients=True)
    assert not np.any(sweep.values) and not np.any(sweep.zero_mode) and not np.any(sweep.grad_tau)


def test_solves_helmholtz_outside_support(scalar_source):
    k, eta = 2.0, 1e-3
    x = np.array([1.5, 0.3, -0.2])
    u0 = forward_field(scalar_source, x, k)
    lap = sum(forward_field(scalar_source, x + s * eta * e, k) for e in np.eye(3) for s in (1, -1))
    lap = (lap - 6.0 * u0) / eta ** 2
    assert abs(lap + k * k * u0) <= 1e-5 * abs(k * k * u0)


def test_conjugate_symmetry_in_k(scalar_source):
    x = np.array([[1.0, 0.0, 0.0], [0.0, -0.8, 0.7]])
    assert np.allclose(forward_field(scalar_source, x, -1.7), np.conj(forward_field(scalar_source, x, 1.7)))


def test_tangential_gradient_matches_finite_differences(scalar_source, small_ball):
    _, mesh = small_ball
    sweep = forward_sweep(scalar_source, mesh, FrequencyGrid(1.0, 3), with_gradients=True)
    eta = 1e-5
    for i in (0, 17, 101):
        for a in range(2):
            t = mesh.tangents[i, a]
            fd = (forward_field(scalar_source, mesh.nodes[i] + eta * t, 2.0)
                  - forward_field(scalar_source, mesh.nodes[i] - eta * t, 2.0)) / (2 * eta)
            assert sweep.grad_tau[i, 1, a] == pytest.approx(fd, rel=1e-6, abs=1e-10)


def test_evaluation_on_support_rejected(scalar_source):
    centre = scalar_source.domain.center
    with pytest.raises(PreconditionError):
        forward_field(scalar_source, centre, 1.0)


def test_vector_source_rejected(vector_source, small_ball):
    with pytest.raises(PreconditionError):
        forward_sweep(vector_source, small_ball[1], FrequencyGrid(1.0, 2))


def test_results_independent_of_thread_count(scalar_source, small_ball):
    _, mesh = small_ball
    omegas = np.array([0.0, 0.7, 2.1])
    one, g1 = evaluate_scalar(scalar_source, mesh, omegas, True, threads=1)
    many, g4 = evaluate_scalar(scalar_source, mesh, omegas, True, threads=4)
    assert np.array_equal(one, many) and np.array_equal(g1, g4)


def test_sweep_zero_mode_is_static_potential(scalar_source, small_ball):
    _, mesh = small_ball
    sweep = forward_sweep(scalar_source, mesh, FrequencyGrid(1.0, 2))
    assert np.allclose(sweep.zero_mode, forward_field(scalar_source, mesh.nodes, 0.0))
    assert np.allclose(sweep.zero_mode.imag, 0.0)
