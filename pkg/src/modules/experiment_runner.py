# src/modules/experiment_runner.py
#
# Orquestación por lotes: preparación de un experimento, ruido, barrido en K,
# suite de verificación de cotas y comprobaciones de dualidad / Huygens.

import math
import time
from dataclasses import dataclass, replace
from typing import List, Optional, Tuple

import numpy as np

from src import __version__
from src.config import settings, log
from src.core.errors import LabError, PreconditionError
from src.core.parallel import ordered_map
from src.models.experiment_models import ExperimentConfig
from src.models.report_models import (
    BoundCheckRow, BoundSuiteReport, CheckResult, ExperimentReport, ReportRow, TrendStats,
)
from src.modules import analytic_bounds as bounds
from src.modules.domain_model import (
    BoundaryMesh, DomainSpec, SourcePair, build_domain, error_norms, rasterize_source, source_norms,
)
from src.modules.elastic_forward import ElasticParams, forward_sweep_elastic
from src.modules.elastic_solver import fdtd_elastic_backward, fdtd_elastic_forward
from src.modules.harmonic_measure import harmonic_measure_lower, harmonic_measure_mc
from src.modules.helmholtz_forward import FrequencyGrid, FrequencySweep, forward_sweep
from src.modules.spectral_functionals import (
    ForwardEvaluator, SectorPoint, compute_I_all, data_norms, decomposition_residual, full_line_integral,
    tail_slope, truncation_k,
)
from src.modules.time_synthesis import (
    TimeTrace, analyze_time_trace, huygens_residual, parseval_check, synthesize_time_trace,
)
from src.modules.wave_solver import backward_window, fdtd_scalar_backward, fdtd_scalar_forward, observability_ratio

TREND_JITTER = 0.02
DECOMPOSITION_TOL = 1e-6
PARSEVAL_TOL = 1e-6
TAIL_SLOPE_MAX = -2.0 + 0.3


# --- PREPARACIÓN ---

@dataclass(frozen=True, eq=False)
class Experiment:
    config: ExperimentConfig
    domain: DomainSpec
    mesh: BoundaryMesh
    source: SourcePair
    params: Optional[ElasticParams]
    grid: FrequencyGrid
    clean: FrequencySweep
    normalization: float

    @property
    def vector(self) -> bool:
        return self.params is not None

    @property
    def c_min(self) -> float:
        return self.params.cs if self.params else 1.0

    @property
    def c_max(self) -> float:
        return self.params.cp if self.params else 1.0

    @property
    def t_final(self) -> float:
        return self.config.backward_time_factor * self.domain.diameter / self.c_min

    def evaluator(self, source: Optional[SourcePair] = None) -> ForwardEvaluator:
        return ForwardEvaluator(source or self.source, self.mesh, self.params, settings.THREADS)


def compute_sweep(source: SourcePair, mesh: BoundaryMesh, grid: FrequencyGrid, params: Optional[ElasticParams],
                  with_gradients: bool = True, threads: Optional[int] = None) -> FrequencySweep:
    if params is None:
        return forward_sweep(source, mesh, grid, with_gradients, threads)
    return forward_sweep_elastic(source, mesh, grid, params, with_gradients, threads)


def prepare(config: ExperimentConfig, with_gradients: bool = True, threads: Optional[int] = None) -> Experiment:
    """Dominio, fuente, rejilla de frecuencias y barrido limpio (normalizado si procede)."""
    domain, mesh = build_domain(config.domain, config.h, config.boundary_nodes)
    params = ElasticParams.from_config(config.elastic) if config.physics == "elastic" else None
    source = rasterize_source(config.sources, domain, vector=params is not None)
    c_min = params.cs if params else 1.0
    omega_max = config.omega_max or max(config.k_ladder) / domain.diameter
    grid = FrequencyGrid.for_domain(domain, omega_max, c_min)
    clean = compute_sweep(source, mesh, grid, params, with_gradients, threads or settings.THREADS)

    alpha = 1.0
    if config.normalize and not source.is_zero:
        total = full_line_integral(clean)
        if total > 0:
            alpha = 1.0 / math.sqrt(total)
            source, clean = source.scaled(alpha), clean.scaled(alpha)
            log.info(f"Señal normalizada: factor {alpha:.6g} (I0 en toda la banda = 1)")
    return Experiment(config, domain, mesh, source, params, grid, clean, alpha)


# --- RUIDO ---

def noise_sweep(sweep: FrequencySweep, epsilon_target: float, seed: int, row: int = 0) -> FrequencySweep:
    """Perturbación gaussiana compleja con ε-funcional (banda completa) igual a ε_target."""
    if epsilon_target < 0:
        raise PreconditionError(f"ε_target negativo: {epsilon_target}")
    rng = np.random.default_rng(np.random.SeedSequence([seed, row]))
    shape = sweep.values.shape
    values = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    zero = rng.standard_normal(sweep.zero_mode.shape)
    noise = FrequencySweep(values=values, zero_mode=zero, grid=sweep.grid, mesh=sweep.mesh)
    current = math.sqrt(full_line_integral(noise))
    scale = epsilon_target / current if current > 0 else 0.0
    return noise.scaled(scale)


def add_noise(sweep: FrequencySweep, epsilon_target: float, seed: int, row: int = 0) -> FrequencySweep:
    """Datos + perturbación; sólo ω ≥ 0 se almacena, así que la simetría conjugada se conserva."""
    if epsilon_target == 0.0:
        return sweep
    noise = noise_sweep(sweep, epsilon_target, seed, row)
    return replace(sweep, values=sweep.values + noise.values, zero_mode=sweep.zero_mode.real + noise.zero_mode,
                   grad_tau=None, grad_tau_zero=None)


# --- RECONSTRUCCIÓN ---

def backward_solve(exp: Experiment, trace: TimeTrace) -> SourcePair:
    if exp.params is None:
        return fdtd_scalar_backward(trace, exp.domain, exp.t_final)
    return fdtd_elastic_backward(trace, exp.domain, exp.params, exp.t_final)


def solver_dt(exp: Experiment) -> float:
    return backward_window(exp.domain, exp.c_min, exp.c_max, exp.t_final)[1]


def reconstruct(exp: Experiment, sweep: Optional[FrequencySweep] = None, k_cut: Optional[float] = None) -> Tuple[SourcePair, dict]:
    """Síntesis temporal + solución hacia atrás; devuelve la estimación y sus normas de error."""
    sweep = exp.clean if sweep is None else sweep
    trace = synthesize_time_trace(sweep, k_cut, dt=solver_dt(exp))
    estimate = backward_solve(exp, trace)
    return estimate, error_norms(exp.source, estimate)


def _row(exp: Experiment, K: float, index: int, noise_free: bool) -> ReportRow:
    cfg = exp.config
    start = time.perf_counter()
    K_abs = K / exp.domain.diameter
    try:
        data = exp.clean.truncated(K_abs)
        # la rejilla truncada acaba en el último ω_j ≤ K: ésa es la banda efectiva
        band = data.grid.omega_max
        eps = None
        if not noise_free:
            noise = noise_sweep(exp.clean, cfg.epsilon_target, cfg.seed, index)
            data = add_noise(exp.clean, cfg.epsilon_target, cfg.seed, index).truncated(K_abs)
            eps = data_norms(noise.truncated(K_abs), band).eps0
        E = -math.log(max(eps if eps is not None else 0.0, settings.EPSILON_FLOOR))
        _, errs = reconstruct(exp, data, band)
        k_trunc = truncation_k(K_abs, E) if K_abs > 1 and E > 0 else None
        row = ReportRow(K=K, epsilon=eps, E=E, k_trunc=k_trunc, **errs)
    except LabError as e:
        log.error(f"Fila K={K} fallida: {e}", exc_info=True)
        row = ReportRow(K=K, status="failed", error=str(e))
    wall = time.perf_counter() - start if settings.REPORT_TIMINGS else 0.0
    return row.model_copy(update={"wall_s": wall, "config_hash": cfg.config_hash(), "code_version": __version__})


def _trend(rows: List[ReportRow], noise_floor: Optional[float]) -> TrendStats:
    errs = [r.err_l2_f0 for r in rows if r.status == "ok" and r.err_l2_f0 is not None]
    increases = [(b - a) / a for a, b in zip(errs, errs[1:]) if a > 0]
    max_inc = max(increases, default=0.0)
    below = all(r.ceiling is None or r.err_l2_f0 is None or r.err_l2_f0 <= r.ceiling for r in rows)
    plateau = errs[-1] / noise_floor if errs and noise_floor else None
    return TrendStats(monotone_nonincreasing=max_inc <= TREND_JITTER, max_relative_increase=max(max_inc, 0.0),
                      below_ceiling=below, noise_floor=noise_floor, plateau_ratio=plateau)


def run_sweep(config: ExperimentConfig, threads: Optional[int] = None) -> ExperimentReport:
    """Una fila por K de la escalera; los fallos quedan registrados por fila."""
    threads = threads or settings.THREADS
    exp = prepare(config, threads=threads)
    norms = source_norms(exp.source)
    noise_free = config.epsilon_target == 0.0
    log.info(f"run_sweep '{config.name}': {len(config.k_ladder)} valores de K, ε={config.epsilon_target}")
    rows = ordered_map(lambda a: _row(exp, a[1], a[0], noise_free), list(enumerate(config.k_ladder)), threads)

    # techo C(ε² + M²/(1 + K^{4/3} E^{1/2})) con C calibrada sobre las propias filas
    M = bounds.ceiling_norm(norms, config.physics)
    bases, samples = [], []
    for r in rows:
        if r.status != "ok":
            bases.append(None)
            continue
        eps = max(r.epsilon or 0.0, settings.EPSILON_FLOOR)
        base = bounds.stability_ceiling(min(eps, 1.0 - 1e-12), r.K / exp.domain.diameter, M)
        bases.append(base)
        samples.append((r.err_l2_f0 ** 2 + r.err_hm1_f1 ** 2, base))
    C = bounds.calibrate_constant(samples)
    rows = [r if b is None else r.model_copy(update={"ceiling": math.sqrt(C * b)}) for r, b in zip(rows, bases)]

    C_obs, floor = None, None
    if not exp.source.is_zero:
        trace = synthesize_time_trace(exp.clean, dt=solver_dt(exp))
        C_obs = observability_ratio(exp.source, trace, exp.t_final)
    if C_obs is not None and not noise_free:
        floor = C_obs * config.epsilon_target / math.sqrt(2.0 * math.pi)

    report = ExperimentReport(
        name=config.name, physics=config.physics, config=config, config_hash=config.config_hash(),
        code_version=__version__, diameter=exp.domain.diameter, normalization=exp.normalization,
        source_norms=norms.as_dict(), calibration_constant=C, observability_constant=C_obs,
        rows=rows, trend=_trend(rows, floor),
    )
    log.info(f"run_sweep '{config.name}' terminado: {sum(r.status == 'ok' for r in rows)}/{len(rows)} filas ok")
    return report


# --- SUITE DE COTAS ---

def _sector_rows(exp: Experiment, points: List[SectorPoint], norms, constant: Optional[float]) -> List[BoundCheckRow]:
    ev = exp.evaluator()
    rows = []
    for p in points:
        values = compute_I_all(ev, p.k, exp.config.quadrature_nodes)
        for j, v in values.items():
            if exp.params is None:
                bound = bounds.helmholtz_sector_bound(j, p.k, norms, exp.domain)
            else:
                bound = bounds.elastic_sector_bound(j, p.k, norms, exp.params, exp.domain, constant)
            rows.append(BoundCheckRow(functional=f"I{j}", k_re=p.k.real, k_im=p.k.imag, value=abs(v), bound=bound,
                                      ratio=abs(v) / bound if bound > 0 else None, passed=abs(v) <= bound))
    return rows


def _calibration_sources(exp: Experiment) -> List[SourcePair]:
    cfg = exp.config
    if not cfg.calibration_sources:
        return [exp.source]
    return [rasterize_source(b, exp.domain, exp.vector) for b in cfg.calibration_sources]


def _continuation_checks(exp: Experiment, norms, K: float) -> Tuple[float, List[BoundCheckRow]]:
    """Calibra C de la cota de continuación y la comprueba en k ∈ (K, 4K]."""
    physics = exp.config.physics
    samples = []
    for src in _calibration_sources(exp):
        ev = exp.evaluator(src)
        dn = data_norms(ev, K, exp.config.quadrature_nodes)
        src_norms = source_norms(src)
        for k in bounds.continuation_calibration_grid(K):
            values = compute_I_all(ev, k, exp.config.quadrature_nodes)
            for j, v in values.items():
                try:
                    samples.append((abs(v), bounds.continuation_shape(j, k, dn, src_norms, exp.domain, K, physics)))
                except PreconditionError as e:
                    log.warning(f"Calibración de continuación: se omite I{j} en k={k:.4g}: {e}")
    C = bounds.calibrate_constant(samples)

    ev = exp.evaluator()
    dn = data_norms(ev, K, exp.config.quadrature_nodes)
    rows = []
    for k in np.geomspace(1.1 * K, 4.0 * K, 5):
        values = compute_I_all(ev, k, exp.config.quadrature_nodes)
        for j, v in values.items():
            try:
                bound = bounds.continuation_bound(j, float(k), dn, norms, exp.domain, K, C, physics)
            except PreconditionError as e:
                log.warning(f"Continuación: I{j} en k={k:.4g} sin cota: {e}")
                continue
            rows.append(BoundCheckRow(functional=f"I{j}_cont", k_re=float(k), value=abs(v), bound=bound,
                                      ratio=abs(v) / bound if bound > 0 else None, passed=abs(v) <= bound))
    return C, rows


def harmonic_measure_checks(n_points: int, n_walks: int, seed: int, threads: Optional[int] = None) -> List[CheckResult]:
    """MC ≥ cota inferior - 3σ en (K, 4K) y límites 1/0 en el segmento y los rayos (K = 1)."""
    K = 1.0
    checks = []
    for i, k in enumerate(np.linspace(1.05, 3.95, n_points)):
        est = harmonic_measure_mc(complex(k), K, n_walks, seed + i, threads)
        lower = harmonic_measure_lower(float(k), K)
        checks.append(CheckResult(name=f"harmonic_measure k={k:.3f}", value=est.value, threshold=lower,
                                  passed=est.value >= lower - 3.0 * est.stderr,
                                  detail={"stderr": est.stderr, "capped": est.capped}))
    slit = harmonic_measure_mc(complex(0.5, 1e-6), K, n_walks, seed, threads)
    checks.append(CheckResult(name="harmonic_measure slit", value=slit.value, threshold=1.0,
                              passed=slit.value >= 1.0 - 3.0 * slit.stderr - 1e-12))
    ray_point = 2.0 * complex(math.cos(math.pi / 4), math.sin(math.pi / 4)) + complex(1e-6, -1e-6)
    ray = harmonic_measure_mc(ray_point, K, n_walks, seed, threads)
    checks.append(CheckResult(name="harmonic_measure ray", value=ray.value, threshold=0.0,
                              passed=ray.value <= 3.0 * ray.stderr + 1e-12))
    return checks


def bookkeeping_checks(exp: Experiment) -> List[CheckResult]:
    """Descomposición banda + cola, Parseval y pendiente de la cola sobre el barrido limpio."""
    checks = []
    w_max = exp.grid.omega_max
    for k in (0.1 * w_max, 0.2 * w_max, 0.25 * w_max):
        res = decomposition_residual(exp.clean, k)
        checks.append(CheckResult(name=f"decomposition k={k:.4g}", value=res, threshold=DECOMPOSITION_TOL,
                                  passed=res <= DECOMPOSITION_TOL))
    trace = synthesize_time_trace(exp.clean)
    par = parseval_check(exp.clean, trace)
    checks.append(CheckResult(name="parseval", value=par.ratio, threshold=PARSEVAL_TOL,
                              passed=par.defined and abs(par.ratio - 1.0) <= PARSEVAL_TOL))
    try:
        slope = tail_slope(exp.clean, np.geomspace(w_max / 40.0, w_max / 4.0, 8))
        checks.append(CheckResult(name="tail_slope", value=slope, threshold=TAIL_SLOPE_MAX,
                                  passed=slope <= TAIL_SLOPE_MAX))
    except PreconditionError as e:
        checks.append(CheckResult(name="tail_slope", passed=False, detail={"error": str(e)}))
    return checks


def verify_bounds(config: ExperimentConfig, threads: Optional[int] = None) -> BoundSuiteReport:
    """Suite completa: cotas en el sector, continuación, medida armónica e identidades."""
    config = config.model_copy(update={"normalize": True})
    exp = prepare(config, threads=threads)
    norms = source_norms(exp.source)
    D = exp.domain.diameter
    calibration = {}

    constant = None
    if exp.params is not None:
        samples = []
        for src in _calibration_sources(exp):
            ev, src_norms = exp.evaluator(src), source_norms(src)
            for k in bounds.sector_calibration_grid(0.1 / D, config.bound_k_max / D):
                for j, v in compute_I_all(ev, k, config.quadrature_nodes).items():
                    samples.append((abs(v), bounds.elastic_sector_shape(j, k, src_norms, exp.params, exp.domain)))
        constant = bounds.calibrate_constant(samples)
        calibration["elastic_sector"] = constant

    points = SectorPoint.sample(config.bound_points, 0.1 / D, config.bound_k_max / D, config.seed)
    rows = _sector_rows(exp, points, norms, constant)

    K = config.k_ladder[0] / D
    C_cont, cont_rows = _continuation_checks(exp, norms, K)
    calibration["continuation"] = C_cont
    rows.extend(cont_rows)

    checks = bookkeeping_checks(exp)
    checks.extend(harmonic_measure_checks(config.mc_points, config.mc_walks, config.seed, threads))
    report = BoundSuiteReport(name=config.name, physics=config.physics, config_hash=config.config_hash(),
                              code_version=__version__, calibration=calibration, rows=rows, checks=checks)
    failed = sum(not r.passed for r in rows) + sum(not c.passed for c in checks)
    log.info(f"verify_bounds '{config.name}': {len(rows)} filas, {len(checks)} comprobaciones, {failed} fallos")
    return report


# --- DUALIDAD Y HUYGENS ---

def forward_run(exp: Experiment, t_total: Optional[float] = None, **kwargs):
    if exp.params is None:
        return fdtd_scalar_forward(exp.source, exp.mesh, t_total, **kwargs)
    return fdtd_elastic_forward(exp.source, exp.mesh, exp.params, t_total, **kwargs)


def _relative_l2(a: np.ndarray, b: np.ndarray, weights: np.ndarray) -> float:
    diff = np.abs(a - b) ** 2
    ref = np.abs(b) ** 2
    while diff.ndim > 1:
        diff, ref = diff.sum(axis=-1), ref.sum(axis=-1)
    den = float(weights @ ref)
    return math.sqrt(float(weights @ diff) / den) if den > 0 else 0.0


def check_duality(config: ExperimentConfig) -> CheckResult:
    """Transformada de la traza FDTD frente al barrido integral en la mitad central de la banda."""
    exp = prepare(config, with_gradients=False)
    run = forward_run(exp, 2.0 * exp.domain.diameter / exp.c_min)
    sweep = analyze_time_trace(run.trace, exp.grid)
    n = exp.grid.count
    lo, hi = n // 4, max(n // 4 + 1, (3 * n) // 4)
    err = _relative_l2(sweep.values[:, lo:hi], exp.clean.values[:, lo:hi], exp.mesh.weights)
    tol = settings.DUALITY_TOL_ELASTIC if exp.vector else settings.DUALITY_TOL_SCALAR
    log.info(f"Dualidad: error relativo {err:.4g} (tolerancia {tol})")
    return CheckResult(name="duality", value=err, threshold=tol, passed=err <= tol,
                       detail={"band": [float(exp.grid.omegas[lo]), float(exp.grid.omegas[hi - 1])]})


def check_huygens(config: ExperimentConfig) -> CheckResult:
    """Residuo de la traza FDTD después de t = D/c_min."""
    exp = prepare(config, with_gradients=False)
    t_after = exp.domain.diameter / exp.c_min
    run = forward_run(exp, 1.5 * t_after)
    res = huygens_residual(run.trace, t_after)
    tol = settings.HUYGENS_TOL_ELASTIC if exp.vector else settings.HUYGENS_TOL_SCALAR
    return CheckResult(name="huygens", value=res, threshold=tol, passed=res <= tol,
                       detail={"t_after": t_after, "measure": "amplitude_ratio"})
