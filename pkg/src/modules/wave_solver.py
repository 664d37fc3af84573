# src/modules/wave_solver.py
#
# Ecuación de ondas escalar ∂t²U = c²ΔU por leapfrog de segundo orden.
#   - hacia delante en espacio libre (caja ampliada, sin reflexiones en la ventana)
#   - hacia atrás en Ω desde estado final nulo con datos Dirichlet en la capa de frontera
# El stepping es genérico (operador espacial como función) y lo reutiliza el solver elástico.

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Dict, Iterable, List, Optional, Tuple

import numpy as np

from src.config import settings, log
from src.core.errors import PreconditionError
from src.modules.domain_model import BoundaryMesh, DomainSpec, SourcePair, sobolev_norm
from src.modules.lattice import (
    SolverGrid, bounded_grid, cfl_dt, check_cfl, dirichlet_layer, free_space_grid, lsq_weights,
    trilinear_matrix,
)
from src.modules.time_synthesis import TimeTrace, trace_at

Operator = Callable[[np.ndarray], np.ndarray]


# --- ESTADO Y STEPPING ---

@dataclass(frozen=True, eq=False)
class WaveState:
    """Par leapfrog: current = U^{n+1}, previous = U^n, t = t_{n+1}."""
    current: np.ndarray
    previous: np.ndarray
    t: float
    dt: float
    h: float


@dataclass(eq=False)
class WaveRun:
    trace: TimeTrace
    grid: SolverGrid
    final: WaveState
    snapshots: Dict[float, np.ndarray] = field(default_factory=dict)   # clave: tiempo pedido
    snapshot_clock: Dict[float, float] = field(default_factory=dict)   # tiempo pedido → n·dt real
    energy: Optional[np.ndarray] = None


def laplacian(u: np.ndarray, h: float) -> np.ndarray:
    """Laplaciano de 7 puntos con extensión por cero fuera de la caja."""
    out = -6.0 * u
    for axis in range(3):
        lo = [slice(None)] * u.ndim
        hi = [slice(None)] * u.ndim
        lo[axis], hi[axis] = slice(None, -1), slice(1, None)
        out[tuple(hi)] += u[tuple(lo)]
        out[tuple(lo)] += u[tuple(hi)]
    return out / (h * h)


def leapfrog_step(state: WaveState, op: Operator) -> WaveState:
    nxt = 2.0 * state.current - state.previous + state.dt ** 2 * op(state.current)
    return replace(state, current=nxt, previous=state.current, t=state.t + state.dt)


def reverse_leapfrog(state: WaveState) -> WaveState:
    """Intercambia el par: seguir avanzando recorre la misma trayectoria hacia atrás."""
    return replace(state, current=state.previous, previous=state.current, t=state.t - state.dt)


def discrete_energy(state: WaveState, op: Operator) -> float:
    """h³[‖(U^{n+1}-U^n)/dt‖² - ⟨U^{n+1}, L U^n⟩]; exacta para leapfrog con L simétrico."""
    vel = (state.current - state.previous) / state.dt
    return float(state.h ** 3 * (np.sum(vel * vel) - np.sum(state.current * op(state.previous))))


def start_state(f0: np.ndarray, f1: np.ndarray, op: Operator, dt: float, h: float) -> WaveState:
    """U⁰ = f0, U¹ = f0 - dt f1 + dt²/2 L f0  (∂tU(0) = -f1)."""
    u1 = f0 - dt * f1 + 0.5 * dt ** 2 * op(f0)
    return WaveState(current=u1, previous=f0.copy(), t=dt, dt=dt, h=h)


def initial_data(u0: np.ndarray, u1: np.ndarray, op: Operator, dt: float) -> Tuple[np.ndarray, np.ndarray]:
    """Inversa exacta de start_state: (f0, f1) a partir de (U⁰, U¹)."""
    return u0, (u0 + 0.5 * dt ** 2 * op(u0) - u1) / dt


def scalar_operator(c: float, h: float) -> Operator:
    c2 = c * c
    return lambda u: c2 * laplacian(u, h)


# --- BUCLE COMÚN ---

def _snapshot_steps(times: Iterable[float], dt: float) -> Dict[int, List[float]]:
    """Paso más cercano a cada tiempo pedido; varios tiempos pueden caer en el mismo paso."""
    steps: Dict[int, List[float]] = {}
    for t in times:
        steps.setdefault(int(round(t / dt)), []).append(t)
    return steps


def run_forward(f0: np.ndarray, f1: np.ndarray, op: Operator, grid: SolverGrid, dt: float, n_steps: int,
                record: Callable[[np.ndarray], np.ndarray], mesh: BoundaryMesh,
                snapshot_times: Iterable[float] = (), track_energy: bool = False) -> WaveRun:
    """Leapfrog de n_steps pasos registrando la traza en t_n = n dt, n = 0..n_steps.

    Los snapshots se toman en el paso más cercano a cada tiempo pedido y se indexan por
    ese tiempo; `snapshot_clock` guarda el n·dt en que se tomaron.
    """
    wanted = _snapshot_steps(snapshot_times, dt)
    snapshots: Dict[float, np.ndarray] = {}
    clock: Dict[float, float] = {}

    def keep(n: int, U: np.ndarray) -> None:
        for t in wanted.get(n, ()):
            snapshots[t], clock[t] = U.copy(), n * dt

    samples = [record(f0)]
    keep(0, f0)
    state = start_state(f0, f1, op, dt, grid.h)
    energy = []
    for n in range(1, n_steps + 1):
        samples.append(record(state.current))
        keep(n, state.current)
        if track_energy:
            energy.append(discrete_energy(state, op))
        if n < n_steps:
            state = leapfrog_step(state, op)
    values = np.stack(samples, axis=1)
    trace = TimeTrace(values=values, dt=dt, mesh=mesh, meta={"solver": "fdtd"})
    return WaveRun(trace=trace, grid=grid, final=state, snapshots=snapshots, snapshot_clock=clock,
                   energy=np.array(energy) if track_energy else None)


def backward_window(domain: DomainSpec, c_slow: float, c_fast: float, t_final: Optional[float]) -> Tuple[float, float, int]:
    """(T_f, Δt, N): Δt ajustado para caer exactamente en T_f y respetar la CFL de c_fast."""
    t_min = domain.diameter / c_slow
    t_final = (1.0 + settings.HUYGENS_MARGIN) * t_min if t_final is None else float(t_final)
    if t_final < t_min:
        log.warning(f"T_f={t_final:.4g} < D/c={t_min:.4g}: el estado final no es nulo, reconstrucción sesgada")
    dt_max = cfl_dt(domain.h, c_fast, settings.CFL_FACTOR)
    n_steps = max(1, int(math.ceil(t_final / dt_max - 1e-9)))
    return t_final, t_final / n_steps, n_steps


def run_backward(op: Operator, grid: SolverGrid, dt: float, n_steps: int, shape: Tuple[int, ...],
                 inject: Callable[[np.ndarray, int], None], keep: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Desde U^N = U^{N+1} = 0 hasta (U⁰, U¹), inyectando datos en la capa en cada paso.

    Con Δt negativo el mismo leapfrog_step avanza hacia atrás.
    """
    final = np.zeros(shape)
    inject(final, n_steps)
    state = WaveState(current=final, previous=np.zeros(shape), t=n_steps * dt, dt=-dt, h=grid.h)
    for m in range(n_steps - 1, -1, -1):
        state = leapfrog_step(state, op)
        state.current[~keep] = 0.0
        inject(state.current, m)
    return state.current, state.previous


def standoff_mask(domain: DomainSpec) -> np.ndarray:
    return domain.sdf_grid >= settings.STANDOFF_CELLS * domain.h * (1.0 - 1e-9)


# --- OPERACIONES ---

def fdtd_scalar_forward(source: SourcePair, mesh: BoundaryMesh, t_total: Optional[float] = None, c: float = 1.0,
                        dt: Optional[float] = None, snapshot_times: Iterable[float] = (),
                        track_energy: bool = False) -> WaveRun:
    """Propagación en espacio libre y traza trilineal en los nodos de ∂Ω."""
    if source.vector:
        raise PreconditionError("fdtd_scalar_forward requiere una fuente escalar")
    domain = source.domain
    t_total = (1.0 + settings.HUYGENS_MARGIN) * domain.diameter / c if t_total is None else t_total
    dt = cfl_dt(domain.h, c, settings.CFL_FACTOR) if dt is None else dt
    check_cfl(dt, domain.h, c)
    n_steps = max(1, int(math.ceil(t_total / dt - 1e-9)))
    grid = free_space_grid(domain, c, n_steps * dt)
    op = scalar_operator(c, domain.h)
    W = trilinear_matrix(grid.axes, mesh.nodes)
    log.info(f"FDTD escalar: caja {grid.shape}, {n_steps} pasos, Δt={dt:.4g}")
    return run_forward(grid.embed(source.f0), grid.embed(source.f1), op, grid, dt, n_steps,
                       lambda u: W @ u.ravel(), mesh, snapshot_times, track_energy)


def fdtd_scalar_backward(trace: TimeTrace, domain: DomainSpec, t_final: Optional[float] = None,
                         c: float = 1.0) -> SourcePair:
    """(f0, f1) por resolución hacia atrás del problema de Dirichlet en Ω × (0, T_f)."""
    if trace.arity != 1:
        raise PreconditionError("fdtd_scalar_backward requiere una traza escalar")
    t_final, dt, n_steps = backward_window(domain, c, c, t_final)
    grid = bounded_grid(domain)
    sdf = domain.sdf(grid.points().reshape(-1, 3)).reshape(grid.shape)
    interior = sdf > 0.0
    layer = dirichlet_layer(interior, connectivity=1)
    layer_pts = grid.points()[layer]
    W = lsq_weights(trace.mesh, domain.project(layer_pts))
    data = W @ trace_at(trace, dt * np.arange(n_steps + 1))

    def inject(u: np.ndarray, m: int) -> None:
        u[layer] = data[:, m]

    op = scalar_operator(c, domain.h)
    log.info(f"FDTD escalar hacia atrás: T_f={t_final:.4g}, {n_steps} pasos, capa de {int(layer.sum())} nodos")
    u0, u1 = run_backward(op, grid, dt, n_steps, grid.shape, inject, interior | layer)
    f0, f1 = initial_data(u0, u1, op, dt)
    keep = standoff_mask(domain)
    f0, f1 = np.where(keep, grid.restrict(f0), 0.0), np.where(keep, grid.restrict(f1), 0.0)
    return SourcePair(f0, f1, keep, domain)


def reversibility_error(source: SourcePair, n_steps: int, c: float = 1.0) -> float:
    """Error relativo máximo de (f0, f1) tras n pasos hacia delante y n hacia atrás en espacio libre."""
    domain = source.domain
    dt = cfl_dt(domain.h, c, settings.CFL_FACTOR)
    grid = free_space_grid(domain, c, n_steps * dt)
    op = scalar_operator(c, domain.h)
    f0, f1 = grid.embed(source.f0), grid.embed(source.f1)
    state = start_state(f0, f1, op, dt, domain.h)
    for _ in range(n_steps):
        state = leapfrog_step(state, op)
    state = reverse_leapfrog(state)
    for _ in range(n_steps):
        state = leapfrog_step(state, op)
    # ahora current = U⁰ y previous = U¹
    g0, g1 = initial_data(state.current, state.previous, op, dt)
    scale = max(float(np.max(np.abs(f0))), float(np.max(np.abs(f1))), 1e-300)
    return max(float(np.max(np.abs(g0 - f0))), float(np.max(np.abs(g1 - f1)))) / scale


def trace_norm(trace: TimeTrace, t_final: Optional[float] = None) -> float:
    """‖U‖ en L²(∂Ω × (0, T_f))."""
    sq = trace.values ** 2
    if sq.ndim == 3:
        sq = sq.sum(axis=-1)
    sel = trace.times <= (trace.t_total if t_final is None else t_final) + 1e-12
    return math.sqrt(trace.dt * float(trace.mesh.weights @ sq[:, sel].sum(axis=1)))


def observability_ratio(source: SourcePair, trace: TimeTrace, t_final: Optional[float] = None) -> Optional[float]:
    """(‖f0‖(0) + ‖f1‖(-1)) / ‖U‖_{L²(∂Ω×(0,T_f))}; None si la traza es nula."""
    denom = trace_norm(trace, t_final)
    if denom == 0.0:
        return None
    h = source.domain.h
    return (sobolev_norm(source.f0, h, 0) + sobolev_norm(source.f1, h, -1)) / denom
