# src/modules/helmholtz_forward.py
#
# Campo radiante de Helmholtz en la frontera:
#     u(x, k) = (1/4π) ∫ (f1 + ik f0) e^{ik|x-y|} / |x-y| dy
# por regla del punto medio sobre los vóxeles del soporte (peso h³).

import math
from dataclasses import dataclass, replace
from typing import Optional, Tuple

import numpy as np
from scipy.spatial.distance import cdist

from src.config import settings, log
from src.core.conventions import FOUR_PI
from src.core.errors import PreconditionError
from src.core.parallel import chunk_ranges, ordered_map
from src.modules.domain_model import BoundaryMesh, DomainSpec, SourcePair


# --- TIPOS ---

@dataclass(frozen=True)
class FrequencyGrid:
    """ω_j = j·Δω, j = 1..count. La columna ω = 0 viaja aparte en el barrido."""
    d_omega: float
    count: int

    def __post_init__(self):
        if not self.d_omega > 0 or self.count < 1:
            raise PreconditionError(f"rejilla de frecuencias inválida: Δω={self.d_omega}, n={self.count}")

    @property
    def omegas(self) -> np.ndarray:
        return self.d_omega * np.arange(1, self.count + 1)

    @property
    def omega_max(self) -> float:
        return self.d_omega * self.count

    @property
    def t_total(self) -> float:
        """Ventana temporal T_total = π/Δω."""
        return math.pi / self.d_omega

    def index_for(self, k: float) -> int:
        """Número de columnas con ω_j ≤ k."""
        return int(min(self.count, math.floor(k / self.d_omega + 1e-9)))

    def truncate(self, k: float) -> "FrequencyGrid":
        n = self.index_for(k)
        if n < 1:
            raise PreconditionError(f"K={k} por debajo de la primera frecuencia {self.d_omega:.4g}")
        return FrequencyGrid(self.d_omega, n)

    @classmethod
    def for_domain(cls, domain: DomainSpec, omega_max: float, c_min: float = 1.0) -> "FrequencyGrid":
        t_total = settings.WINDOW_FACTOR * domain.diameter / c_min
        d_omega = math.pi / t_total
        return cls(d_omega, max(1, int(math.ceil(omega_max / d_omega - 1e-9))))


@dataclass(frozen=True, eq=False)
class FrequencySweep:
    """u(x_i, ω_j) en nodos × frecuencias; escalar (n, m) o vectorial (n, m, 3).

    `zero_mode` guarda u(x, 0). `grad_tau` (opcional) guarda las derivadas
    tangenciales exactas: (n, m, 2) escalar, (n, m, 3, 2) vectorial.
    """
    values: np.ndarray
    zero_mode: np.ndarray
    grid: FrequencyGrid
    mesh: BoundaryMesh
    grad_tau: Optional[np.ndarray] = None
    grad_tau_zero: Optional[np.ndarray] = None

    @property
    def arity(self) -> int:
        return 3 if self.values.ndim == 3 else 1

    def full_band(self) -> Tuple[np.ndarray, np.ndarray]:
        """(ω incluyendo 0, valores con la columna cero delante)."""
        omegas = np.concatenate([[0.0], self.grid.omegas])
        values = np.concatenate([self.zero_mode[:, None], self.values], axis=1)
        return omegas, values

    def full_band_gradients(self) -> Optional[np.ndarray]:
        if self.grad_tau is None:
            return None
        return np.concatenate([self.grad_tau_zero[:, None], self.grad_tau], axis=1)

    def truncated(self, k: float) -> "FrequencySweep":
        grid = self.grid.truncate(k)
        n = grid.count
        grads = None if self.grad_tau is None else self.grad_tau[:, :n]
        return replace(self, values=self.values[:, :n], grid=grid, grad_tau=grads)

    def scaled(self, alpha: float) -> "FrequencySweep":
        grads = None if self.grad_tau is None else alpha * self.grad_tau
        grads0 = None if self.grad_tau_zero is None else alpha * self.grad_tau_zero
        return replace(self, values=alpha * self.values, zero_mode=alpha * self.zero_mode,
                       grad_tau=grads, grad_tau_zero=grads0)


# --- NÚCLEO ---

def green_helmholtz(r, k):
    """e^{ikr}/(4πr); r > 0, k complejo."""
    r = np.asarray(r, dtype=float)
    if np.any(r <= 0):
        raise PreconditionError("green_helmholtz requiere r > 0")
    out = np.exp(1j * k * r) / (FOUR_PI * r)
    return out if out.ndim else complex(out)


def _check_outside(points: np.ndarray, support: np.ndarray) -> np.ndarray:
    if len(support) == 0:
        return np.zeros((len(points), 0))
    r = cdist(points, support)
    if np.any(r <= 0.0):
        raise PreconditionError("punto de evaluación sobre el soporte de la fuente")
    return r


def scalar_block(x: np.ndarray, tangents: Optional[np.ndarray], source: SourcePair,
                 omegas: np.ndarray) -> Tuple[np.ndarray, Optional[np.ndarray]]:
    """u y ∇_τ u para un bloque de puntos x (c, 3) en las frecuencias dadas.

    Devuelve (c, nω) y, si hay tangentes, (c, nω, 2).
    """
    y, f0, f1 = source.quadrature_nodes()
    h3 = source.domain.h ** 3
    omegas = np.asarray(omegas, dtype=complex)
    c = len(x)
    values = np.zeros((c, len(omegas)), dtype=complex)
    grads = None if tangents is None else np.zeros((c, len(omegas), 2), dtype=complex)
    if len(y) == 0:
        return values, grads

    r = _check_outside(x, y)
    if tangents is not None:
        diff = x[:, None, :] - y[None, :, :]
        proj = np.einsum("cad,cmd->cam", tangents, diff) / r[:, None, :]
    for j, k in enumerate(omegas):
        g = np.exp(1j * k * r) / (FOUR_PI * r)
        v = f1 + 1j * k * f0
        values[:, j] = h3 * np.sum(g * v, axis=1)
        if tangents is not None:
            dg = g * (1j * k - 1.0 / r) * v
            grads[:, j, :] = h3 * np.sum(dg[:, None, :] * proj, axis=2)
    return values, grads


def evaluate_scalar(source: SourcePair, mesh: BoundaryMesh, omegas: np.ndarray,
                    with_gradients: bool = False, threads: Optional[int] = None):
    """Evaluación por bloques fijos de nodos; resultado idéntico con cualquier nº de hilos."""
    blocks = chunk_ranges(mesh.size)

    def run(block: range):
        sl = slice(block.start, block.stop)
        tang = mesh.tangents[sl] if with_gradients else None
        return scalar_block(mesh.nodes[sl], tang, source, omegas)

    parts = ordered_map(run, blocks, threads)
    values = np.concatenate([p[0] for p in parts], axis=0)
    grads = np.concatenate([p[1] for p in parts], axis=0) if with_gradients else None
    return values, grads


# --- OPERACIONES ---

def forward_field(source: SourcePair, x, k: complex) -> complex | np.ndarray:
    """u(x, k) en un punto (3,) o en varios (N, 3)."""
    if source.vector:
        raise PreconditionError("forward_field es escalar; use forward_field_elastic")
    pts = np.atleast_2d(np.asarray(x, dtype=float))
    values, _ = scalar_block(pts, None, source, np.array([k]))
    out = values[:, 0]
    return complex(out[0]) if np.asarray(x).ndim == 1 else out


def forward_sweep(source: SourcePair, mesh: BoundaryMesh, grid: FrequencyGrid,
                  with_gradients: bool = False, threads: Optional[int] = None) -> FrequencySweep:
    """Barrido denso u(x_i, ω_j) incluyendo la columna ω = 0."""
    if source.vector:
        raise PreconditionError("forward_sweep es escalar; use forward_sweep_elastic")
    log.info(f"Barrido escalar: {mesh.size} nodos x {grid.count + 1} frecuencias")
    omegas = np.concatenate([[0.0], grid.omegas])
    values, grads = evaluate_scalar(source, mesh, omegas, with_gradients, threads)
    return FrequencySweep(
        values=values[:, 1:], zero_mode=values[:, 0], grid=grid, mesh=mesh,
        grad_tau=None if grads is None else grads[:, 1:],
        grad_tau_zero=None if grads is None else grads[:, 0],
    )
