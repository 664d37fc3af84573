# src/modules/time_synthesis.py
#
# Dualidad frecuencia ↔ tiempo en la frontera.
#
#     u(x, ω) = -Σ_n U(x, t_n) e^{iω t_n} Δt
#     U(x, t) = -(1/2π) Σ_{|j| ≤ n} u(x, ω_j) e^{-iω_j t} Δω,   u(x, -ω) = conj u(x, ω)
#
# La extensión conjugada hace U real. Con Δt = 2π/(Δω N_t) ambas sumas son inversas exactas.

import math
from dataclasses import dataclass, field
from typing import Literal, Optional

import numpy as np
from scipy.interpolate import CubicSpline

from src.config import log
from src.core.conventions import DUALITY_SIGN, TWO_PI
from src.core.errors import PreconditionError
from src.modules.domain_model import BoundaryMesh
from src.modules.helmholtz_forward import FrequencyGrid, FrequencySweep

TAPER_START = 0.8


@dataclass(frozen=True, eq=False)
class TimeTrace:
    """U(x_i, t_n): (n, N_t) escalar o (n, N_t, 3) vectorial, t_n = n Δt."""
    values: np.ndarray
    dt: float
    mesh: BoundaryMesh
    leakage: float = 0.0
    meta: dict = field(default_factory=dict)

    @property
    def n_t(self) -> int:
        return self.values.shape[1]

    @property
    def times(self) -> np.ndarray:
        return self.dt * np.arange(self.n_t)

    @property
    def t_total(self) -> float:
        return self.dt * self.n_t

    @property
    def arity(self) -> int:
        return 3 if self.values.ndim == 3 else 1


def cosine_taper(omegas: np.ndarray, k_cut: float) -> np.ndarray:
    """1 hasta 0.8 k_cut, coseno hasta 0 en k_cut. Sólo para diagnóstico."""
    w = np.ones_like(omegas)
    start = TAPER_START * k_cut
    sel = omegas > start
    w[sel] = 0.5 * (1.0 + np.cos(math.pi * (omegas[sel] - start) / (k_cut - start)))
    return w


def synthesis_length(grid: FrequencyGrid, n_used: int, dt: Optional[float] = None) -> int:
    """N_t mínimo que resuelve Δt ≤ dt y la banda usada sin aliasing."""
    n_min = 2 * n_used + 2
    if dt is None:
        return n_min
    return max(int(math.ceil(TWO_PI / (grid.d_omega * dt) - 1e-9)), n_min)


def synthesize_time_trace(sweep: FrequencySweep, k_cut: Optional[float] = None, dt: Optional[float] = None,
                          taper: bool = False) -> TimeTrace:
    """Transformada inversa de la extensión conjugada, truncada en k_cut."""
    grid = sweep.grid
    k_cut = grid.omega_max if k_cut is None else k_cut
    if k_cut > grid.omega_max * (1.0 + 1e-12):
        raise PreconditionError(f"k_cut={k_cut:.4g} supera Ω_max={grid.omega_max:.4g}")
    n_used = grid.index_for(k_cut)
    n_t = synthesis_length(grid, n_used, dt)

    u = sweep.values[:, :n_used]
    if taper and n_used:
        w = cosine_taper(grid.omegas[:n_used], k_cut)
        u = u * (w[:, None] if u.ndim == 3 else w)
    shape = (u.shape[0], n_t) + u.shape[2:]
    a = np.zeros(shape, dtype=complex)
    a[:, 0] = sweep.zero_mode
    if n_used:
        a[:, 1:n_used + 1] = u
        a[:, n_t - n_used:][:, ::-1] = np.conj(u)
    full = np.fft.fft(a, axis=1) * (DUALITY_SIGN * grid.d_omega / TWO_PI)
    peak = float(np.max(np.abs(full))) if full.size else 0.0
    leakage = float(np.max(np.abs(full.imag)) / peak) if peak > 0 else 0.0
    trace = TimeTrace(values=full.real, dt=TWO_PI / (grid.d_omega * n_t), mesh=sweep.mesh, leakage=leakage,
                      meta={"d_omega": grid.d_omega, "k_cut": k_cut, "n_used": n_used})
    log.info(f"Traza sintetizada: {shape[0]} nodos, N_t={n_t}, Δt={trace.dt:.4g}, k_cut={k_cut:.4g}")
    return trace


def analyze_time_trace(trace: TimeTrace, grid: FrequencyGrid) -> FrequencySweep:
    """u(x, ω_j) = -Δt Σ_n U(x, t_n) e^{iω_j t_n} en ω = 0 y en la rejilla."""
    omegas = np.concatenate([[0.0], grid.omegas])
    kernel = np.exp(1j * np.outer(trace.times, omegas))
    values = DUALITY_SIGN * trace.dt * np.einsum("in...,nj->ij...", trace.values, kernel)
    return FrequencySweep(values=values[:, 1:], zero_mode=values[:, 0].real, grid=grid, mesh=trace.mesh)


def spectral_derivative(trace: TimeTrace) -> np.ndarray:
    """∂t U por FFT sobre la ventana periódica; el modo de Nyquist se anula."""
    n = trace.n_t
    spec = np.fft.fft(trace.values, axis=1)
    w = TWO_PI * np.fft.fftfreq(n, d=trace.dt)
    if n % 2 == 0:
        w[n // 2] = 0.0
    w = w.reshape((1, n) + (1,) * (trace.values.ndim - 2))
    return np.fft.ifft(1j * w * spec, axis=1).real


@dataclass(frozen=True)
class ParsevalResult:
    time_side: float
    freq_side: float
    ratio: Optional[float]

    @property
    def defined(self) -> bool:
        return self.ratio is not None


def parseval_check(sweep: FrequencySweep, trace: TimeTrace, k_cut: Optional[float] = None,
                   weight: Literal["value", "derivative"] = "value") -> ParsevalResult:
    """2π Σ_n Δt ‖U‖² frente a Δω Σ_{|j|≤n} ‖u_j‖² (o sus versiones con ∂t y ω²)."""
    if trace.mesh.size != sweep.mesh.size or trace.arity != sweep.arity:
        raise PreconditionError("traza y barrido sobre mallas distintas")
    d_omega = sweep.grid.d_omega
    if abs(trace.dt * trace.n_t * d_omega - TWO_PI) > 1e-9 * TWO_PI:
        raise PreconditionError("rejillas no emparejadas: Δt·Δω·N_t ≠ 2π")
    n_used = sweep.grid.index_for(trace.meta.get("k_cut", sweep.grid.omega_max) if k_cut is None else k_cut)
    if 2 * n_used + 1 > trace.n_t:
        raise PreconditionError("la traza no resuelve la banda pedida")

    wts = sweep.mesh.weights
    u = sweep.values[:, :n_used]
    sq = np.abs(u) ** 2
    if sq.ndim == 3:
        sq = sq.sum(axis=-1)
    zero_sq = np.abs(sweep.zero_mode) ** 2
    if zero_sq.ndim == 2:
        zero_sq = zero_sq.sum(axis=-1)
    if weight == "derivative":
        sq = sq * sweep.grid.omegas[:n_used] ** 2
        zero_sq = np.zeros_like(zero_sq)
        samples = spectral_derivative(trace)
    else:
        samples = trace.values
    freq = d_omega * float(wts @ (zero_sq + 2.0 * sq.sum(axis=1)))
    tsq = samples ** 2
    if tsq.ndim == 3:
        tsq = tsq.sum(axis=-1)
    time = TWO_PI * trace.dt * float(wts @ tsq.sum(axis=1))
    if freq == 0.0:
        if time == 0.0:
            log.warning("Parseval indefinido: datos nulos (0/0)")
            return ParsevalResult(time, freq, None)
        return ParsevalResult(time, freq, math.inf)
    return ParsevalResult(time, freq, time / freq)


def huygens_residual(trace: TimeTrace, t_after: float) -> float:
    """Cociente de amplitudes sqrt(masa en t > t_after / masa total), pesado por la malla.

    Es una raíz: compárese con umbrales de amplitud, no de energía.
    """
    if not t_after < trace.t_total:
        raise PreconditionError(f"t_after={t_after:.4g} fuera de la ventana [0, {trace.t_total:.4g})")
    sq = trace.values ** 2
    if sq.ndim == 3:
        sq = sq.sum(axis=-1)
    per_t = trace.mesh.weights @ sq
    total = float(per_t.sum())
    if total == 0.0:
        return 0.0
    return math.sqrt(float(per_t[trace.times > t_after].sum()) / total)


def trace_at(trace: TimeTrace, times: np.ndarray) -> np.ndarray:
    """Valores en tiempos arbitrarios: exactos si coinciden con la rejilla, spline cúbica si no."""
    times = np.asarray(times, dtype=float)
    idx = np.rint(times / trace.dt).astype(int)
    if np.allclose(idx * trace.dt, times, rtol=0.0, atol=1e-9 * trace.dt) and idx.max(initial=0) < trace.n_t:
        return np.take(trace.values, idx, axis=1)
    spline = CubicSpline(trace.times, trace.values, axis=1)
    return spline(np.clip(times, 0.0, trace.times[-1]))
