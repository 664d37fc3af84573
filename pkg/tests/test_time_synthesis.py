# tests/test_time_synthesis.py

import math

import numpy as np
import pytest
from hypothesis import given, settings as hsettings, strategies as st

from src.core.errors import PreconditionError
from src.modules.time_synthesis import (
    TimeTrace, analyze_time_trace, cosine_taper, huygens_residual, parseval_check, synthesis_length,
    synthesize_time_trace, trace_at,
)
from tests.conftest import random_sweep, sphere_mesh


def test_zero_sweep_gives_zero_trace():
    s = random_sweep()
    zero = s.scaled(0.0)
    trace = synthesize_time_trace(zero)
    assert not np.any(trace.values)
    assert not parseval_check(zero, trace).defined


@pytest.mark.parametrize("vector", [False, True])
def test_synthesis_then_analysis_is_identity(vector):
    s = random_sweep(vector=vector, seed=2)
    trace = synthesize_time_trace(s, dt=0.05)
    back = analyze_time_trace(trace, s.grid)
    assert trace.leakage < 1e-12
    assert np.allclose(back.values, s.values, atol=1e-10)
    assert np.allclose(back.zero_mode, s.zero_mode, atol=1e-10)


def test_time_grid_matches_frequency_grid():
    s = random_sweep(count=10, d_omega=0.5)
    trace = synthesize_time_trace(s, dt=0.1)
    assert trace.dt <= 0.1
    assert trace.n_t == synthesis_length(s.grid, 10, 0.1)
    assert trace.dt * trace.n_t * s.grid.d_omega == pytest.approx(2.0 * math.pi)


@hsettings(max_examples=15, deadline=None)
@given(st.integers(0, 2 ** 31), st.booleans())
def test_parseval_exact_for_synthesized_trace(seed, vector):
    s = random_sweep(seed=seed, vector=vector)
    trace = synthesize_time_trace(s)
    assert parseval_check(s, trace).ratio == pytest.approx(1.0, abs=1e-9)
    assert parseval_check(s, trace, weight="derivative").ratio == pytest.approx(1.0, abs=1e-9)


def test_parseval_on_truncated_band():
    s = random_sweep(count=30, d_omega=0.2, seed=5)
    trace = synthesize_time_trace(s, k_cut=2.0)
    assert trace.meta["n_used"] == 10
    assert parseval_check(s, trace).ratio == pytest.approx(1.0, abs=1e-9)


def test_taper_only_touches_top_of_band():
    w = cosine_taper(np.linspace(0.0, 1.0, 11), 1.0)
    assert np.all(w[:9] == 1.0) and w[-1] == pytest.approx(0.0, abs=1e-15)


def test_k_cut_beyond_band_rejected():
    s = random_sweep(count=5, d_omega=1.0)
    with pytest.raises(PreconditionError):
        synthesize_time_trace(s, k_cut=6.0)


def test_parseval_rejects_mismatched_meshes():
    s = random_sweep(n_nodes=12)
    other = random_sweep(n_nodes=7)
    with pytest.raises(PreconditionError):
        parseval_check(s, synthesize_time_trace(other))


def test_huygens_residual():
    mesh = sphere_mesh(4)
    values = np.zeros((4, 100))
    values[:, 10:20] = 1.0
    trace = TimeTrace(values=values, dt=0.1, mesh=mesh)
    assert huygens_residual(trace, 2.5) == 0.0
    assert huygens_residual(trace, 1.45) == pytest.approx(math.sqrt(0.5))
    assert huygens_residual(TimeTrace(np.zeros((4, 10)), 0.1, mesh), 0.5) == 0.0
    # una cola de amplitud 0.1 da un residuo ≈ 0.1, no 0.01
    values[:, 30:40] = 0.1
    tailed = TimeTrace(values=values, dt=0.1, mesh=mesh)
    assert huygens_residual(tailed, 2.5) == pytest.approx(math.sqrt(0.1 / 10.1))
    with pytest.raises(PreconditionError):
        huygens_residual(trace, 20.0)


def test_trace_at_grid_and_between():
    mesh = sphere_mesh(3)
    t = 0.01 * np.arange(500)
    values = np.tile(np.sin(3.0 * t), (3, 1))
    trace = TimeTrace(values=values, dt=0.01, mesh=mesh)
    assert np.array_equal(trace_at(trace, t[[3, 7]]), values[:, [3, 7]])
    mid = np.array([1.234, 2.0005])
    assert np.allclose(trace_at(trace, mid)[0], np.sin(3.0 * mid), atol=1e-7)
