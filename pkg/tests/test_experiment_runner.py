# tests/test_experiment_runner.py

import math

import numpy as np
import pytest

from src.config import settings
from src.core.errors import PreconditionError
from src.modules import experiment_runner as runner
from src.modules.spectral_functionals import full_line_integral
from tests.conftest import random_sweep


def test_noise_has_exact_epsilon():
    noise = runner.noise_sweep(random_sweep(), 0.25, seed=7)
    assert math.sqrt(full_line_integral(noise)) == pytest.approx(0.25, rel=1e-10)


def test_noise_is_seeded_per_row():
    sweep = random_sweep()
    a = runner.add_noise(sweep, 0.1, seed=3, row=0)
    b = runner.add_noise(sweep, 0.1, seed=3, row=0)
    c = runner.add_noise(sweep, 0.1, seed=3, row=1)
    assert np.array_equal(a.values, b.values)
    assert not np.array_equal(a.values, c.values)
    assert np.isrealobj(a.zero_mode)
    assert a.grad_tau is None


def test_zero_noise_is_identity():
    sweep = random_sweep()
    assert runner.add_noise(sweep, 0.0, seed=1) is sweep


def test_negative_epsilon():
    with pytest.raises(PreconditionError):
        runner.noise_sweep(random_sweep(), -1.0, seed=1)


def test_prepare_normalizes(tiny_config):
    exp = runner.prepare(tiny_config, with_gradients=False)
    assert full_line_integral(exp.clean) == pytest.approx(1.0, rel=1e-9)
    assert exp.normalization > 0
    assert not exp.vector and exp.c_min == 1.0
    assert exp.grid.omega_max >= max(tiny_config.k_ladder) / exp.domain.diameter


def test_bookkeeping_identities(tiny_config):
    exp = runner.prepare(tiny_config, with_gradients=False)
    checks = {c.name.split(" ")[0]: c for c in runner.bookkeeping_checks(exp)}
    assert checks["decomposition"].passed
    assert checks["parseval"].passed
    assert "tail_slope" in checks


def test_harmonic_measure_checks():
    checks = runner.harmonic_measure_checks(2, 2000, seed=0)
    assert len(checks) == 4
    assert all(c.passed for c in checks)


def test_run_sweep(scalar_config):
    report = runner.run_sweep(scalar_config)
    assert [r.K for r in report.rows] == [2.0, 8.0]
    assert all(r.status == "ok" for r in report.rows)
    first, last = report.rows
    assert last.err_l2_f0 < first.err_l2_f0
    for r in report.rows:
        assert r.err_l2_f0 <= r.ceiling * (1 + 1e-12)
        assert r.config_hash == scalar_config.config_hash()
    assert report.trend.below_ceiling
    assert report.observability_constant is not None and report.observability_constant > 0
    assert report.calibration_constant > 0


def test_run_sweep_error_falls_along_ladder(scalar_config):
    config = scalar_config.model_copy(update={"k_ladder": [2.0, 4.0, 8.0], "epsilon_target": 1e-4})
    report = runner.run_sweep(config)
    assert [r.status for r in report.rows] == ["ok"] * 3
    errs = [r.err_l2_f0 for r in report.rows]
    for a, b in zip(errs, errs[1:]):
        assert b <= a * (1 + runner.TREND_JITTER)
    assert all(r.epsilon is not None and r.epsilon > 0 for r in report.rows)
    assert all(r.err_l2_f0 <= r.ceiling * (1 + 1e-12) for r in report.rows)
    assert report.trend.monotone_nonincreasing
    assert report.trend.below_ceiling


@pytest.mark.slow
def test_run_sweep_is_deterministic(scalar_config, monkeypatch):
    monkeypatch.setattr(settings, "REPORT_TIMINGS", False)
    config = scalar_config.model_copy(update={"epsilon_target": 1e-3})
    a, b = runner.run_sweep(config), runner.run_sweep(config, threads=2)
    assert a.model_dump() == b.model_dump()
    assert all(r.wall_s == 0.0 for r in a.rows)
    assert a.rows[0].epsilon is not None


@pytest.mark.slow
def test_verify_bounds(tiny_config):
    report = runner.verify_bounds(tiny_config)
    assert report.rows and report.checks
    assert "continuation" in report.calibration
    assert {r.functional for r in report.rows} >= {"I0", "I1"}
    assert all(r.passed for r in report.rows if "_cont" not in r.functional)
