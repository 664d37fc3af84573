# tests/test_elastic_forward.py

import math

import numpy as np
import pytest

from src.config import settings
from src.core.errors import PreconditionError
from src.modules.elastic_forward import (
    ElasticParams, _radial_direct, _radial_series, divergence_curl, elastic_field_gradient,
    forward_field_elastic, forward_field_elastic_ibp, forward_sweep_elastic, phi_matrix,
    phi_regularized_bracket,
)
from src.modules.helmholtz_forward import FrequencyGrid


def _kelvin(d, params):
    r = np.linalg.norm(d)
    xh = d / r
    a, b = 1.0 / params.cs ** 2, 1.0 / params.cp ** 2
    return ((a + b) * np.eye(3) + (a - b) * np.outer(xh, xh)) / (8.0 * math.pi * r)


def test_wave_speeds():
    p = ElasticParams(2.0, 1.0, 2.0)
    assert p.cp == pytest.approx(math.sqrt(2.0))
    assert p.cs == pytest.approx(math.sqrt(0.5))
    with pytest.raises(PreconditionError):
        ElasticParams(-1.0, 1.0)


@pytest.mark.parametrize("k", [0.0, 1e-12])
def test_static_limit_is_kelvin(k):
    params = ElasticParams(2.0, 0.7, 1.0)
    d = np.array([0.3, -0.4, 0.5])
    assert np.allclose(phi_matrix(d, k, params), _kelvin(d, params), rtol=1e-10, atol=0.0)


def test_series_and_direct_agree_at_switch():
    params = ElasticParams(1.0, 1.0)
    k = 3.0 + 1.0j
    r = np.array([settings.THETA_SWITCH * params.cs / abs(k)])
    series = _radial_series(r, k, params.cs, params.cp)
    direct = _radial_direct(r, k, params.cs, params.cp)
    # q''' arrastra la cancelación de 6/r⁴ en la forma directa
    for s, d, tol in zip(series, direct, (1e-6, 1e-6, 1e-6, 1e-6, 1e-4)):
        assert abs(s[0] - d[0]) <= tol * abs(d[0])


def test_phi_symmetric():
    params = ElasticParams(1.0, 1.0)
    m = phi_matrix(np.array([0.2, 0.7, -0.1]), 2.0 + 0.5j, params)
    assert np.allclose(m, m.T)


@pytest.mark.parametrize("r,k", [(0.5, 2.0 + 1.0j), (1e-3, 1.0 + 0.5j), (2.0, 0.3 - 0.2j)])
def test_bracket_is_holomorphic_in_k(r, k):
    params = ElasticParams(1.5, 0.8)
    delta = 1e-4
    f = lambda z: phi_regularized_bracket(r, z, params)
    d_real = (f(k + delta) - f(k - delta)) / (2 * delta)
    d_imag = (f(k + 1j * delta) - f(k - 1j * delta)) / (2j * delta)
    assert abs(d_real - d_imag) <= 1e-5 * max(abs(d_real), 1e-12)


@pytest.mark.parametrize("direction,speed", [("longitudinal", "cp"), ("transverse", "cs")])
def test_far_field_phase_velocity(direction, speed):
    params = ElasticParams(1.0, 1.0)
    k = 5.0
    radii = np.linspace(10.0, 20.0, 400)
    d = np.zeros((len(radii), 3))
    if direction == "longitudinal":
        d[:, 0] = radii
    else:
        d[:, 1] = radii
    comp = phi_matrix(d, k, params)[:, 0, 0]
    phase = np.unwrap(np.angle(comp))
    slope = np.polyfit(radii, phase, 1)[0]
    assert slope == pytest.approx(k / getattr(params, speed), rel=0.02)


def test_integration_by_parts_form_agrees(vector_source, lame):
    x = np.array([[1.5, 0.2, 0.0], [-0.3, 1.2, 0.4]])
    direct = forward_field_elastic(vector_source, x, 2.0, lame)
    ibp = forward_field_elastic_ibp(vector_source, x, 2.0, lame)
    assert np.linalg.norm(ibp - direct) <= 1e-2 * np.linalg.norm(direct)


def test_gradient_and_divergence_curl(vector_source, lame):
    x = np.array([[1.3, -0.2, 0.4]])
    k, eta = 1.5, 1e-5
    jac = elastic_field_gradient(vector_source, x, k, lame)[0]
    for l in range(3):
        e = np.eye(3)[l] * eta
        fd = (forward_field_elastic(vector_source, x[0] + e, k, lame)
              - forward_field_elastic(vector_source, x[0] - e, k, lame)) / (2 * eta)
        assert np.allclose(jac[l], fd, rtol=1e-6, atol=1e-12)
    div, curl = divergence_curl(jac)
    assert div == pytest.approx(np.trace(jac))
    assert curl[0] == pytest.approx(jac[1, 2] - jac[2, 1])


def test_sweep_tangential_gradients(vector_source, small_ball, lame):
    _, mesh = small_ball
    sweep = forward_sweep_elastic(vector_source, mesh, FrequencyGrid(1.0, 2), lame, with_gradients=True)
    assert sweep.values.shape == (mesh.size, 2, 3)
    assert sweep.grad_tau.shape == (mesh.size, 2, 3, 2)
    i = 5
    jac = elastic_field_gradient(vector_source, mesh.nodes[i], 2.0, lame)[0]
    expected = np.einsum("al,lj->ja", mesh.tangents[i], jac)
    assert np.allclose(sweep.grad_tau[i, 1], expected, rtol=1e-8, atol=1e-12)


def test_scalar_source_rejected(scalar_source, small_ball, lame):
    with pytest.raises(PreconditionError):
        forward_sweep_elastic(scalar_source, small_ball[1], FrequencyGrid(1.0, 2), lame)
