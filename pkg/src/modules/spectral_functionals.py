# src/modules/spectral_functionals.py
#
# Funcionales de datos I0, I1, I2 (escalares y elásticos), normas ε, colas espectrales
# y la regla de truncación. Convención:
#
#     I_j(k) = 2 ∫_0^k ∫_∂Ω P_j(x, ω) dΓ dω,  con el camino ω = k s, s ∈ (0, 1)
#
#     P_0 = u(ω)·u(-ω),  P_1 = ω² u(ω)·u(-ω),  P_2 = ∇_τ u(ω)·∇_τ u(-ω)
#
# El 1/(4π) del potencial ya va dentro de u, así que para k real I_0(k) = ∫_{-k}^{k} ‖u‖² dω.

import math
from dataclasses import dataclass
from typing import Dict, Optional, Sequence, Union

import numpy as np
from scipy.integrate import trapezoid

from src.config import settings, log
from src.core.errors import PreconditionError
from src.modules.domain_model import BoundaryMesh, SourcePair
from src.modules.elastic_forward import ElasticParams, evaluate_elastic
from src.modules.helmholtz_forward import FrequencySweep, evaluate_scalar

FUNCTIONALS = (0, 1, 2)
TAIL_WEIGHTS = ("1", "omega2", "grad")


# --- TIPOS ---

@dataclass(frozen=True)
class SectorPoint:
    """k = k1 + i k2 en el sector S = {|arg k| < π/4}."""
    k: complex

    @property
    def inside(self) -> bool:
        return abs(self.k.imag) < self.k.real

    @staticmethod
    def sample(n: int, k_min: float, k_max: float, seed: int) -> list["SectorPoint"]:
        """Puntos pseudoaleatorios reproducibles con |k| ∈ [k_min, k_max] dentro de S."""
        rng = np.random.default_rng(np.random.SeedSequence([seed, 21]))
        radii = rng.uniform(k_min, k_max, n)
        angles = rng.uniform(-0.98, 0.98, n) * math.pi / 4.0
        return [SectorPoint(complex(r * math.cos(a), r * math.sin(a))) for r, a in zip(radii, angles)]


@dataclass(frozen=True)
class DataNorms:
    """ε0² = I0(K), ε1² = I1(K) + I2(K); ε1_h1² = I0 + I1 + I2 usa la norma H¹(∂Ω) completa.

    Para el problema elástico los mismos campos son ε² y ε_e².
    """
    eps0_sq: float
    eps1_sq: Optional[float] = None
    eps1_h1_sq: Optional[float] = None

    @property
    def eps0(self) -> float:
        return math.sqrt(max(self.eps0_sq, 0.0))

    @property
    def eps1(self) -> Optional[float]:
        return None if self.eps1_sq is None else math.sqrt(max(self.eps1_sq, 0.0))

    @staticmethod
    def _log(eps: Optional[float]) -> float:
        if eps is None or eps >= 1.0:
            return float("nan")
        return -math.log(max(eps, settings.EPSILON_FLOOR))

    @property
    def E0(self) -> float:
        return self._log(self.eps0)

    @property
    def E1(self) -> float:
        return self._log(self.eps1)

    @property
    def flagged(self) -> bool:
        """True si algún ε ≥ 1: E no está definido."""
        return self.eps0 >= 1.0 or (self.eps1 is not None and self.eps1 >= 1.0)


@dataclass(frozen=True, eq=False)
class ForwardEvaluator:
    """Evalúa el problema directo en frecuencias arbitrarias (también complejas)."""
    source: SourcePair
    mesh: BoundaryMesh
    params: Optional[ElasticParams] = None
    threads: Optional[int] = None

    def __call__(self, omegas: np.ndarray, with_gradients: bool = True):
        if self.params is None:
            return evaluate_scalar(self.source, self.mesh, omegas, with_gradients, self.threads)
        return evaluate_elastic(self.source, self.mesh, omegas, self.params, with_gradients, self.threads)


DataSource = Union[FrequencySweep, ForwardEvaluator]


# --- DENSIDADES ---

def _pair_density(mesh: BoundaryMesh, plus: np.ndarray, minus: np.ndarray) -> np.ndarray:
    """∫_∂Ω a(ω)·b(-ω) dΓ por columna; suma sobre componentes y tangentes."""
    prod = plus * minus
    while prod.ndim > 2:
        prod = prod.sum(axis=-1)
    return np.einsum("i,ij->j", mesh.weights, prod)


def band_density(sweep: FrequencySweep, weight: str) -> tuple[np.ndarray, np.ndarray]:
    """(ω ≥ 0, densidad real) sobre el barrido almacenado."""
    omegas, values = sweep.full_band()
    if weight == "grad":
        grads = sweep.full_band_gradients()
        if grads is None:
            raise PreconditionError("el barrido no contiene gradientes tangenciales")
        dens = _pair_density(sweep.mesh, grads, np.conj(grads))
    else:
        dens = _pair_density(sweep.mesh, values, np.conj(values))
        if weight == "omega2":
            dens = dens * omegas ** 2
        elif weight != "1":
            raise PreconditionError(f"peso de cola desconocido: {weight}")
    return omegas, dens.real


def _split_at(omegas: np.ndarray, dens: np.ndarray, k: float):
    """Índice del último nodo ≤ k y valor interpolado linealmente en k."""
    idx = int(np.searchsorted(omegas, k, side="right") - 1)
    if idx >= len(omegas) - 1:
        return len(omegas) - 1, float(dens[-1])
    frac = (k - omegas[idx]) / (omegas[idx + 1] - omegas[idx])
    return idx, float(dens[idx] + frac * (dens[idx + 1] - dens[idx]))


def _head(omegas, dens, k) -> float:
    idx, dk = _split_at(omegas, dens, k)
    value = trapezoid(dens[: idx + 1], omegas[: idx + 1]) if idx > 0 else 0.0
    return float(value + 0.5 * (dens[idx] + dk) * (k - omegas[idx]))


def _tail(omegas, dens, k) -> float:
    idx, dk = _split_at(omegas, dens, k)
    if idx >= len(omegas) - 1:
        return 0.0
    value = 0.5 * (dk + dens[idx + 1]) * (omegas[idx + 1] - k)
    return float(value + trapezoid(dens[idx + 1:], omegas[idx + 1:]))


# --- OPERACIONES ---

def _weight_for(j: int) -> str:
    return {0: "1", 1: "omega2", 2: "grad"}[j]


def _check_k(k: complex) -> complex:
    k = complex(k)
    if k.real <= 0:
        raise PreconditionError(f"k debe tener parte real positiva (k={k})")
    return k


def compute_I_all(data: DataSource, k: complex, nodes: Optional[int] = None,
                  functionals: Sequence[int] = FUNCTIONALS) -> Dict[int, complex]:
    """I_j(k) para varios j con una sola evaluación del problema directo."""
    k = _check_k(k)
    if isinstance(data, FrequencySweep) and k.imag == 0.0:
        kr = k.real
        if kr > data.grid.omega_max * (1.0 + 1e-12):
            raise PreconditionError(f"k={kr} fuera del barrido almacenado (ω_max={data.grid.omega_max})")
        out = {}
        for j in functionals:
            omegas, dens = band_density(data, _weight_for(j))
            out[j] = complex(2.0 * _head(omegas, dens, kr))
        return out
    if isinstance(data, FrequencySweep):
        raise PreconditionError("k complejo requiere un evaluador del problema directo")

    n = nodes or settings.GL_NODES
    s, w = np.polynomial.legendre.leggauss(n)
    s, w = 0.5 * (s + 1.0), 0.5 * w
    omegas = np.concatenate([k * s, -k * s])
    need_grad = 2 in functionals
    values, grads = data(omegas, with_gradients=need_grad)
    plus, minus = values[:, :n], values[:, n:]
    base = _pair_density(data.mesh, plus, minus)
    out = {}
    for j in functionals:
        if j == 0:
            dens = base
        elif j == 1:
            dens = base * (k * s) ** 2
        else:
            dens = _pair_density(data.mesh, grads[:, :n], grads[:, n:])
        out[j] = complex(2.0 * k * np.dot(w, dens))
    return out


def compute_I(j: int, data: DataSource, k: complex, nodes: Optional[int] = None) -> complex:
    """I_j(k): trapecio sobre el barrido para k real, Gauss–Legendre en el segmento [0, k] si no."""
    if j not in FUNCTIONALS:
        raise PreconditionError(f"funcional desconocido: I{j}")
    return compute_I_all(data, k, nodes, (j,))[j]


def data_norms(data: DataSource, K: float, nodes: Optional[int] = None) -> DataNorms:
    """ε0², ε1² y la variante H¹(∂Ω) completa para la banda (0, K)."""
    has_grad = not isinstance(data, FrequencySweep) or data.grad_tau is not None
    wanted = FUNCTIONALS if has_grad else (0,)
    vals = {j: v.real for j, v in compute_I_all(data, K, nodes, wanted).items()}
    norms = DataNorms(
        eps0_sq=vals[0],
        eps1_sq=vals[1] + vals[2] if has_grad else None,
        eps1_h1_sq=vals[0] + vals[1] + vals[2] if has_grad else None,
    )
    if norms.flagged:
        log.warning(f"ε ≥ 1 en la banda (0, {K:.4g}): E no definido")
    return norms


def full_line_integral(sweep: FrequencySweep, weight: str = "1") -> float:
    """∫ sobre (-ω_max, ω_max) de la densidad."""
    omegas, dens = band_density(sweep, weight)
    return 2.0 * float(trapezoid(dens, omegas))


def tail_integral(sweep: FrequencySweep, k: float, weight: str = "1") -> float:
    """∫_{k<|ω|<ω_max} de la densidad; exige ω_max ≥ 4k."""
    if weight not in TAIL_WEIGHTS:
        raise PreconditionError(f"peso de cola desconocido: {weight}")
    if sweep.grid.omega_max < 4.0 * k * (1.0 - 1e-12):
        raise PreconditionError(f"ω_max={sweep.grid.omega_max:.4g} insuficiente para la cola en k={k:.4g}")
    omegas, dens = band_density(sweep, weight)
    return 2.0 * _tail(omegas, dens, k)


def decomposition_residual(sweep: FrequencySweep, k: float, j: int = 0) -> float:
    """|total - (I_j(k) + cola)| / total; cero si no hay señal."""
    weight = _weight_for(j)
    total = full_line_integral(sweep, weight)
    head = compute_I(j, sweep, k).real
    omegas, dens = band_density(sweep, weight)
    tail = 2.0 * _tail(omegas, dens, k)
    if total == 0.0:
        return 0.0
    return abs(total - head - tail) / abs(total)


def tail_slope(sweep: FrequencySweep, ks: Sequence[float], weight: str = "1") -> float:
    """Pendiente log–log de la cola frente a k por mínimos cuadrados."""
    ks = np.asarray(ks, dtype=float)
    tails = np.array([tail_integral(sweep, k, weight) for k in ks])
    if np.any(tails <= 0):
        raise PreconditionError("cola nula o negativa: la regresión log–log no está definida")
    slope, _ = np.polyfit(np.log(ks), np.log(tails), 1)
    return float(slope)


def truncation_k(K: float, E: float) -> float:
    """k = K^{2/3} E^{1/4} si 2^{1/4} K^{1/3} < E^{1/4}; si no, K."""
    if not K > 1 or not E > 0:
        raise PreconditionError(f"truncation_k requiere K > 1 y E > 0 (K={K}, E={E})")
    if 2.0 ** 0.25 * K ** (1.0 / 3.0) < E ** 0.25:
        return K ** (2.0 / 3.0) * E ** 0.25
    return K
