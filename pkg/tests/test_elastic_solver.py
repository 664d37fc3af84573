# tests/test_elastic_solver.py

import numpy as np
import pytest

from src.core.errors import PreconditionError
from src.modules.domain_model import rasterize_source, zero_source
from src.modules.elastic_forward import ElasticParams
from src.modules.elastic_solver import (
    _front_radius, curl_div_probe, fdtd_elastic_backward, fdtd_elastic_forward, staggered_curl, staggered_curl_edges,
    staggered_div, staggered_grad, to_collocated, to_staggered,
)
from src.modules.time_synthesis import TimeTrace
from tests.conftest import poly_bump

H = 0.1


@pytest.fixture
def rng():
    return np.random.default_rng(7)


def _dot(a, b):
    return float(np.sum(a * b))


def test_curl_adjoint(rng):
    U, W = rng.standard_normal((2, 8, 9, 10, 3))
    assert _dot(staggered_curl(U, H), W) == pytest.approx(_dot(U, staggered_curl_edges(W, H)), rel=1e-12)


def test_grad_div_adjoint(rng):
    phi = rng.standard_normal((8, 9, 10))
    U = rng.standard_normal((8, 9, 10, 3))
    assert _dot(staggered_grad(phi, H), U) == pytest.approx(-_dot(phi, staggered_div(U, H)), rel=1e-12)


def test_discrete_identities(rng):
    W = rng.standard_normal((8, 8, 8, 3))
    phi = rng.standard_normal((8, 8, 8))
    assert np.max(np.abs(staggered_div(staggered_curl_edges(W, H), H))) < 1e-9
    assert np.max(np.abs(staggered_curl(staggered_grad(phi, H), H))) < 1e-9


def test_staggered_averaging_of_constant():
    F = np.ones((6, 6, 6, 3))
    assert np.allclose(to_staggered(F)[1:-1, 1:-1, 1:-1], 1.0)
    assert np.allclose(to_collocated(to_staggered(F))[2:-2, 2:-2, 2:-2], 1.0)


def _max_rel(field, U):
    return float(np.max(np.abs(field))) * H / float(np.max(np.abs(U)))


def test_curl_source_stays_divergence_free(small_ball, lame):
    domain, mesh = small_ball
    source = rasterize_source([poly_bump(0.3, amplitude=(0.0, 0.0, 1.0), pattern="curl")], domain, vector=True)
    run = fdtd_elastic_forward(source, mesh, lame, t_total=0.4, snapshot_times=(0.0,))
    for U in (run.snapshots[0.0], run.final.current):
        assert _max_rel(staggered_div(U, H), U) < 1e-6


def test_gradient_source_stays_curl_free(small_ball, lame):
    domain, mesh = small_ball
    source = rasterize_source([poly_bump(0.3, amplitude=(1.0,), pattern="gradient")], domain, vector=True)
    run = fdtd_elastic_forward(source, mesh, lame, t_total=0.4)
    U = run.final.current
    assert _max_rel(staggered_curl(U, H), U) < 1e-6


def test_elastic_energy_is_conserved(small_ball, vector_source):
    _, mesh = small_ball
    run = fdtd_elastic_forward(vector_source, mesh, ElasticParams(2.0, 1.0, 1.0), t_total=0.4, track_energy=True)
    e = run.energy
    assert e.min() > 0
    assert (e.max() - e.min()) / abs(e.mean()) < 1e-8


def test_trace_shape(small_ball, vector_source, lame):
    _, mesh = small_ball
    run = fdtd_elastic_forward(vector_source, mesh, lame, t_total=0.2)
    assert run.trace.arity == 3
    assert run.trace.values.shape[0] == mesh.nodes.shape[0]
    assert run.trace.meta["staggered"] is True


def test_zero_source(small_ball, lame):
    domain, mesh = small_ball
    run = fdtd_elastic_forward(zero_source(domain, vector=True), mesh, lame, t_total=0.2)
    assert not np.any(run.trace.values)


def test_backward_of_zero_trace(small_ball, lame):
    domain, mesh = small_ball
    trace = TimeTrace(values=np.zeros((mesh.nodes.shape[0], 41, 3)), dt=0.05, mesh=mesh)
    est = fdtd_elastic_backward(trace, domain, lame, t_final=1.5)
    assert est.f0.shape == domain.grid_shape + (3,)
    assert not np.any(est.f0) and not np.any(est.f1)


def test_scalar_inputs_rejected(small_ball, scalar_source, lame):
    domain, mesh = small_ball
    with pytest.raises(PreconditionError):
        fdtd_elastic_forward(scalar_source, mesh, lame, t_total=0.2)
    trace = TimeTrace(values=np.zeros((mesh.nodes.shape[0], 10)), dt=0.05, mesh=mesh)
    with pytest.raises(PreconditionError):
        fdtd_elastic_backward(trace, domain, lame)


def test_speed_estimate_needs_three_snapshots(small_ball, vector_source, lame):
    run = fdtd_elastic_forward(vector_source, small_ball[1], lame, t_total=0.2, snapshot_times=(0.0,))
    with pytest.raises(PreconditionError):
        curl_div_probe(run.snapshots, run.grid, (0.0, 0.0, 0.0))


def test_snapshots_keyed_by_requested_time(small_ball, vector_source, lame):
    run = fdtd_elastic_forward(vector_source, small_ball[1], lame, t_total=0.2, snapshot_times=(0.0, 0.1))
    assert set(run.snapshots) == {0.0, 0.1}
    dt = run.trace.dt
    assert run.snapshot_clock[0.0] == 0.0
    assert run.snapshot_clock[0.1] == pytest.approx(round(0.1 / dt) * dt)
    assert abs(run.snapshot_clock[0.1] - 0.1) <= 0.5 * dt


def test_front_radius_takes_outermost_component():
    r = np.linspace(0.05, 3.0, 5901)

    def tent(c):
        return np.clip(1.0 - np.abs(r - c) / 0.2, 0.0, None)

    assert _front_radius([(tent(1.5) / r, r)]) == pytest.approx(1.65, abs=1e-3)
    # la segunda componente, más débil pero más lejos, fija el frente
    assert _front_radius([(tent(1.5) / r, r), (0.5 * tent(1.9) / r, r)]) == pytest.approx(2.0, abs=1e-3)
    with pytest.raises(PreconditionError):
        _front_radius([(np.zeros_like(r), r)])


@pytest.mark.slow
def test_front_speeds_match_lame_parameters(unit_ball, lame):
    domain, mesh = unit_ball
    bumps = [poly_bump(0.75, amplitude=(1.0,), pattern="gradient"),
             poly_bump(0.75, amplitude=(0.0, 0.0, 1.0), pattern="curl")]
    source = rasterize_source(bumps, domain, vector=True)
    times = (0.8, 1.0, 1.2, 1.4, 1.6)
    run = fdtd_elastic_forward(source, mesh, lame, t_total=1.6, snapshot_times=times)
    cp, cs = curl_div_probe(run.snapshots, run.grid, (0.0, 0.0, 0.0), run.snapshot_clock)
    assert cp == pytest.approx(lame.cp, rel=0.03)
    assert cs == pytest.approx(lame.cs, rel=0.03)
