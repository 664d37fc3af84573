# src/modules/elastic_solver.py
#
# Elastodinámica ∂t²U = c_p²∇div U - c_s² rot rot U sobre rejilla escalonada:
# la componente j vive en nodo + (h/2)e_j, div en los nodos, rot en las aristas.
# div_h rot_h = 0 y rot_h ∇_h = 0 son exactas, así que la parte de presión y la de
# cizalla evolucionan por separado también en discreto.

import math
from typing import Dict, Iterable, Mapping, Optional, Sequence, Tuple

import numpy as np

from src.config import settings, log
from src.core.errors import PreconditionError
from src.modules.domain_model import BoundaryMesh, DomainSpec, SourcePair, evaluate_bump
from src.modules.elastic_forward import ElasticParams
from src.modules.lattice import (
    SolverGrid, bounded_grid, cfl_dt, check_cfl, dirichlet_layer, free_space_grid, lsq_weights,
    trilinear_matrix,
)
from src.modules.time_synthesis import TimeTrace, trace_at
from src.modules.wave_solver import (
    Operator, WaveRun, backward_window, initial_data, run_backward, run_forward, standoff_mask,
)


# --- OPERADORES ESCALONADOS (extensión por cero) ---

def _fwd(u: np.ndarray, axis: int, h: float) -> np.ndarray:
    """(u[i+1] - u[i]) / h con u = 0 fuera de la caja."""
    out = -u.copy()
    sl_lo = [slice(None)] * 3
    sl_hi = [slice(None)] * 3
    sl_lo[axis], sl_hi[axis] = slice(None, -1), slice(1, None)
    out[tuple(sl_lo)] += u[tuple(sl_hi)]
    return out / h


def _bwd(u: np.ndarray, axis: int, h: float) -> np.ndarray:
    """(u[i] - u[i-1]) / h con u = 0 fuera de la caja."""
    out = u.copy()
    sl_lo = [slice(None)] * 3
    sl_hi = [slice(None)] * 3
    sl_lo[axis], sl_hi[axis] = slice(None, -1), slice(1, None)
    out[tuple(sl_hi)] -= u[tuple(sl_lo)]
    return out / h


def staggered_div(U: np.ndarray, h: float) -> np.ndarray:
    """Caras → nodos."""
    return sum(_bwd(U[..., j], j, h) for j in range(3))


def staggered_grad(phi: np.ndarray, h: float) -> np.ndarray:
    """Nodos → caras."""
    return np.stack([_fwd(phi, j, h) for j in range(3)], axis=-1)


def staggered_curl(U: np.ndarray, h: float) -> np.ndarray:
    """Caras → aristas (diferencias hacia delante)."""
    return np.stack([
        _fwd(U[..., 2], 1, h) - _fwd(U[..., 1], 2, h),
        _fwd(U[..., 0], 2, h) - _fwd(U[..., 2], 0, h),
        _fwd(U[..., 1], 0, h) - _fwd(U[..., 0], 1, h),
    ], axis=-1)


def staggered_curl_edges(W: np.ndarray, h: float) -> np.ndarray:
    """Aristas → caras (diferencias hacia atrás); adjunto de staggered_curl."""
    return np.stack([
        _bwd(W[..., 2], 1, h) - _bwd(W[..., 1], 2, h),
        _bwd(W[..., 0], 2, h) - _bwd(W[..., 2], 0, h),
        _bwd(W[..., 1], 0, h) - _bwd(W[..., 0], 1, h),
    ], axis=-1)


def elastic_operator(params: ElasticParams, h: float) -> Operator:
    """L U = c_p² ∇_h div_h U - c_s² rot_h rot_h U; igual a c_s²Δ_h + (c_p² - c_s²)∇div lejos de las paredes."""
    cs2, cp2 = params.cs ** 2, params.cp ** 2

    def apply(U: np.ndarray) -> np.ndarray:
        return cp2 * staggered_grad(staggered_div(U, h), h) - cs2 * staggered_curl_edges(staggered_curl(U, h), h)

    return apply


# --- REJILLA ESCALONADA ---

def component_offsets(h: float) -> np.ndarray:
    return 0.5 * h * np.eye(3)


def stagger(source: SourcePair, grid: SolverGrid) -> Tuple[np.ndarray, np.ndarray]:
    """(f0, f1) en posiciones escalonadas.

    Con descripción analítica: los patrones "gradient" y "curl" se construyen como
    ∇_h y rot_h de su potencial discreto (campos exactamente sin rotacional / sin
    divergencia en la rejilla); "direct" se evalúa en las caras.
    """
    if not source.bumps:
        return to_staggered(grid.embed(source.f0)), to_staggered(grid.embed(source.f1))
    h = grid.h
    offsets = component_offsets(h)
    fields = {"f0": np.zeros(grid.shape + (3,)), "f1": np.zeros(grid.shape + (3,))}
    for bump in source.bumps:
        target = fields[bump.field]
        amp = np.asarray(bump.amplitude, dtype=float)
        unit = bump.model_copy(update={"amplitude": [1.0]})
        if bump.pattern == "gradient":
            target += amp[0] * staggered_grad(evaluate_bump(unit, grid.points(), vector=False), h)
        elif bump.pattern == "curl":
            edges = np.stack(
                [amp[j] * evaluate_bump(unit, grid.points(h * 0.5 - offsets[j]), vector=False) for j in range(3)],
                axis=-1,
            )
            target += staggered_curl_edges(edges, h)
        else:
            for j in range(3):
                target[..., j] += evaluate_bump(bump, grid.points(offsets[j]), vector=True)[..., j]
    return fields["f0"], fields["f1"]


def to_staggered(F: np.ndarray) -> np.ndarray:
    """Nodos → caras: U_j[i] = (F_j[i] + F_j[i+e_j]) / 2."""
    out = 0.5 * F.copy()
    for j in range(3):
        lo = [slice(None)] * 3
        hi = [slice(None)] * 3
        lo[j], hi[j] = slice(None, -1), slice(1, None)
        out[tuple(lo) + (j,)] += 0.5 * F[tuple(hi) + (j,)]
    return out


def to_collocated(U: np.ndarray) -> np.ndarray:
    """Caras → nodos: F_j[i] = (U_j[i] + U_j[i-e_j]) / 2."""
    out = 0.5 * U.copy()
    for j in range(3):
        lo = [slice(None)] * 3
        hi = [slice(None)] * 3
        lo[j], hi[j] = slice(None, -1), slice(1, None)
        out[tuple(hi) + (j,)] += 0.5 * U[tuple(lo) + (j,)]
    return out


def _trace_recorder(grid: SolverGrid, mesh: BoundaryMesh):
    offsets = component_offsets(grid.h)
    mats = [trilinear_matrix(grid.shifted_axes(offsets[j]), mesh.nodes) for j in range(3)]
    return lambda U: np.stack([mats[j] @ U[..., j].ravel() for j in range(3)], axis=-1)


# --- OPERACIONES ---

def fdtd_elastic_forward(source: SourcePair, mesh: BoundaryMesh, params: ElasticParams,
                         t_total: Optional[float] = None, dt: Optional[float] = None,
                         snapshot_times: Iterable[float] = (), track_energy: bool = False) -> WaveRun:
    """Propagación elástica en espacio libre; traza (n, N_t, 3) y snapshots escalonados."""
    if not source.vector:
        raise PreconditionError("fdtd_elastic_forward requiere una fuente vectorial")
    domain = source.domain
    cp = params.cp
    t_total = (1.0 + settings.HUYGENS_MARGIN) * domain.diameter / params.cs if t_total is None else t_total
    dt = cfl_dt(domain.h, cp, settings.CFL_FACTOR) if dt is None else dt
    check_cfl(dt, domain.h, cp)
    n_steps = max(1, int(math.ceil(t_total / dt - 1e-9)))
    grid = free_space_grid(domain, cp, n_steps * dt)
    f0, f1 = stagger(source, grid)
    log.info(f"FDTD elástico: caja {grid.shape}, {n_steps} pasos, Δt={dt:.4g}, c_p={cp:.4g}, c_s={params.cs:.4g}")
    run = run_forward(f0, f1, elastic_operator(params, domain.h), grid, dt, n_steps,
                      _trace_recorder(grid, mesh), mesh, snapshot_times, track_energy)
    run.trace.meta["staggered"] = True
    return run


def _component_layers(grid: SolverGrid, domain: DomainSpec):
    """Máscaras (interior, capa) por componente, forma grid.shape + (3,)."""
    offsets = component_offsets(grid.h)
    interior = np.stack(
        [domain.sdf(grid.points(offsets[j]).reshape(-1, 3)).reshape(grid.shape) > 0.0 for j in range(3)], axis=-1
    )
    reach = dirichlet_layer(np.any(interior, axis=-1), connectivity=3) | np.any(interior, axis=-1)
    layer = reach[..., None] & ~interior
    return interior, layer


def fdtd_elastic_backward(trace: TimeTrace, domain: DomainSpec, params: ElasticParams,
                          t_final: Optional[float] = None) -> SourcePair:
    """(f0, f1) vectoriales desde datos Dirichlet de desplazamiento; T_f ≥ D/c_s."""
    if trace.arity != 3:
        raise PreconditionError("fdtd_elastic_backward requiere una traza vectorial")
    t_final, dt, n_steps = backward_window(domain, params.cs, params.cp, t_final)
    grid = bounded_grid(domain)
    interior, layer = _component_layers(grid, domain)
    offsets = component_offsets(grid.h)
    samples = trace_at(trace, dt * np.arange(n_steps + 1))
    data = []
    for j in range(3):
        pts = grid.points(offsets[j])[layer[..., j]]
        W = lsq_weights(trace.mesh, domain.project(pts))
        data.append(W @ samples[..., j])

    def inject(U: np.ndarray, m: int) -> None:
        for j in range(3):
            U[..., j][layer[..., j]] = data[j][:, m]

    op = elastic_operator(params, domain.h)
    log.info(f"FDTD elástico hacia atrás: T_f={t_final:.4g}, {n_steps} pasos, capa de {int(layer.sum())} nodos")
    u0, u1 = run_backward(op, grid, dt, n_steps, grid.shape + (3,), inject, interior | layer)
    f0, f1 = initial_data(u0, u1, op, dt)
    keep = standoff_mask(domain)
    f0 = np.where(keep[..., None], grid.restrict(to_collocated(f0)), 0.0)
    f1 = np.where(keep[..., None], grid.restrict(to_collocated(f1)), 0.0)
    return SourcePair(f0, f1, keep, domain)


# --- SONDA DE VELOCIDADES ---

FRONT_LEVEL = 0.25


def _edge_offsets(h: float) -> np.ndarray:
    """Posición de rot_j: nodo + (h/2)(e_k + e_l), {j, k, l} = {0, 1, 2}."""
    return 0.5 * h * (np.ones((3, 3)) - np.eye(3))


def _front_radius(parts: Sequence[Tuple[np.ndarray, np.ndarray]]) -> float:
    """Radio más externo donde r·|campo| alcanza FRONT_LEVEL veces su máximo en el snapshot.

    `parts` son pares (campo, r) por componente, cada uno con su propia posición escalonada.
    """
    weighted = [(r * np.abs(f), r) for f, r in parts]
    peak = max(float(w.max()) for w, _ in weighted)
    if peak == 0.0:
        raise PreconditionError("snapshot sin señal en el canal medido")
    level = FRONT_LEVEL * peak
    return max(float(r[w >= level].max(initial=0.0)) for w, r in weighted)


def curl_div_probe(snapshots: Dict[float, np.ndarray], grid: SolverGrid, center: Sequence[float],
                   clock: Optional[Mapping[float, float]] = None) -> Tuple[float, float]:
    """(c_p, c_s) por la llegada del frente en div U y en rot U frente al tiempo.

    El frente es el borde exterior del pulso, no su máximo.
    `clock` (WaveRun.snapshot_clock) da el instante real de cada snapshot.
    """
    if len(snapshots) < 3:
        raise PreconditionError(f"curl_div_probe necesita al menos 3 snapshots ({len(snapshots)})")
    h = grid.h
    c = np.asarray(center, dtype=float)
    r_nodes = np.linalg.norm(grid.points() - c, axis=-1)
    r_edges = [np.linalg.norm(grid.points(o) - c, axis=-1) for o in _edge_offsets(h)]
    keys = sorted(snapshots)
    times = [clock.get(t, t) if clock else t for t in keys]
    p_front, s_front = [], []
    for t in keys:
        U = snapshots[t]
        W = staggered_curl(U, h)
        p_front.append(_front_radius([(staggered_div(U, h), r_nodes)]))
        s_front.append(_front_radius([(W[..., j], r_edges[j]) for j in range(3)]))
    cp = float(np.polyfit(times, p_front, 1)[0])
    cs = float(np.polyfit(times, s_front, 1)[0])
    log.info(f"Sonda rot/div: c_p≈{cp:.4g}, c_s≈{cs:.4g} con {len(times)} snapshots")
    return cp, cs
