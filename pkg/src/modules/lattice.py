# src/modules/lattice.py
#
# Rejillas de los solvers temporales y acoplamiento rejilla ↔ malla de frontera:
# caja ampliada alrededor de Ω, interpolación trilineal (registro de trazas),
# capa Dirichlet y pesos de mínimos cuadrados locales (inyección de datos).

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Tuple

import numpy as np
from scipy import sparse
from scipy.ndimage import binary_dilation, generate_binary_structure
from scipy.spatial import cKDTree

from src.core.errors import PreconditionError
from src.modules.domain_model import BoundaryMesh, DomainSpec

LSQ_NEIGHBOURS = 8


@dataclass(frozen=True, eq=False)
class SolverGrid:
    """Caja cúbica de nodos center + h·(-n..n) que contiene la rejilla de Ω."""
    domain: DomainSpec
    half: int

    @property
    def h(self) -> float:
        return self.domain.h

    @property
    def shape(self) -> Tuple[int, int, int]:
        return (2 * self.half + 1,) * 3

    @cached_property
    def axes(self) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        return tuple(self.domain.center[i] + self.h * np.arange(-self.half, self.half + 1) for i in range(3))

    def shifted_axes(self, offset: np.ndarray) -> Tuple[np.ndarray, ...]:
        return tuple(a + o for a, o in zip(self.axes, offset))

    def points(self, offset=(0.0, 0.0, 0.0)) -> np.ndarray:
        X, Y, Z = np.meshgrid(*self.shifted_axes(np.asarray(offset)), indexing="ij")
        return np.stack([X, Y, Z], axis=-1)

    @property
    def domain_slices(self) -> Tuple[slice, ...]:
        """Posición de la rejilla de Ω dentro de la caja."""
        return tuple(slice(self.half - n, self.half + n + 1) for n in self.domain.half_counts)

    def embed(self, field: np.ndarray) -> np.ndarray:
        out = np.zeros(self.shape + field.shape[3:], dtype=field.dtype)
        out[self.domain_slices] = field
        return out

    def restrict(self, field: np.ndarray) -> np.ndarray:
        return field[self.domain_slices].copy()


def free_space_grid(domain: DomainSpec, c_max: float, t_total: float) -> SolverGrid:
    """Semiancho ≥ R_Ω + c_max·T: ninguna onda alcanza la pared en la ventana simulada."""
    reach = domain.outer_radius + c_max * t_total
    half = max(int(math.ceil(reach / domain.h)) + 2, max(domain.half_counts) + 1)
    return SolverGrid(domain, half)


def bounded_grid(domain: DomainSpec) -> SolverGrid:
    """Caja mínima para los problemas de contorno (Ω más su capa)."""
    return SolverGrid(domain, max(domain.half_counts) + 1)


def cfl_dt(h: float, c_max: float, factor: float) -> float:
    return factor * h / (math.sqrt(3.0) * c_max)


def check_cfl(dt: float, h: float, c_max: float) -> None:
    limit = h / (math.sqrt(3.0) * c_max)
    if dt > limit * (1.0 + 1e-12):
        raise PreconditionError(f"Δt={dt:.4g} viola la condición CFL (máximo {limit:.4g})")


def trilinear_matrix(axes: Tuple[np.ndarray, ...], points: np.ndarray) -> sparse.csr_matrix:
    """Matriz (n_puntos × n_nodos) de interpolación trilineal sobre una rejilla uniforme."""
    shape = tuple(len(a) for a in axes)
    h = axes[0][1] - axes[0][0]
    origin = np.array([a[0] for a in axes])
    rel = (np.asarray(points, dtype=float) - origin) / h
    base = np.floor(rel).astype(int)
    frac = rel - base
    for i, n in enumerate(shape):
        if np.any(base[:, i] < 0) or np.any(base[:, i] > n - 2):
            raise PreconditionError("punto de interpolación fuera de la rejilla")
    rows, cols, vals = [], [], []
    n_pts = len(points)
    for corner in np.ndindex(2, 2, 2):
        c = np.array(corner)
        w = np.prod(np.where(c, frac, 1.0 - frac), axis=1)
        idx = np.ravel_multi_index(tuple((base + c).T), shape)
        rows.append(np.arange(n_pts))
        cols.append(idx)
        vals.append(w)
    return sparse.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(n_pts, int(np.prod(shape))),
    )


def dirichlet_layer(interior: np.ndarray, connectivity: int = 1) -> np.ndarray:
    """Nodos exteriores vecinos del interior (6-vecinos con 1, 26-vecinos con 3)."""
    struct = generate_binary_structure(3, connectivity)
    return binary_dilation(interior, structure=struct) & ~interior


def lsq_weights(mesh: BoundaryMesh, targets: np.ndarray, k: int = LSQ_NEIGHBOURS) -> sparse.csr_matrix:
    """Pesos (n_targets × n_malla) del ajuste lineal local por mínimos cuadrados.

    Para cada punto p se ajusta a + b·(q - p) a los k nodos más cercanos q; el valor
    en p es a, es decir la primera fila de la pseudoinversa (solución de norma mínima).
    """
    targets = np.asarray(targets, dtype=float)
    if len(targets) == 0:
        return sparse.csr_matrix((0, mesh.size))
    k = min(k, mesh.size)
    _, idx = cKDTree(mesh.nodes).query(targets, k=k)
    idx = idx.reshape(len(targets), k)
    diff = mesh.nodes[idx] - targets[:, None, :]
    A = np.concatenate([np.ones(diff.shape[:2] + (1,)), diff], axis=2)
    w = np.linalg.pinv(A)[:, 0, :]
    rows = np.repeat(np.arange(len(targets)), k)
    return sparse.csr_matrix((w.ravel(), (rows, idx.ravel())), shape=(len(targets), mesh.size))
