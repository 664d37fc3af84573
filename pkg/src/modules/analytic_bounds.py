# src/modules/analytic_bounds.py
#
# Cotas de continuación analítica de los funcionales de datos y techos de estabilidad.
#
#   escalar, k ∈ S:   |I_j(k)| ≤ 8π|∂Ω| D · P_j(|k|) · e^{2D|k2|}
#   elástico, k ∈ S:  |I_j(k)| ≤ C |∂Ω| D · P_j(|k|) · e^{2D|k2|/c_s}
#   k > K real:       |I_j(k)| ≤ C e^{2(D+1)k} ε^{2μ(k)} M²
#
# Las constantes C no tienen valor explícito: se calibran como máximo cociente observado
# por CALIBRATION_SAFETY y se congelan en el informe.

import math
from typing import Iterable, List, Optional, Tuple

import numpy as np

from src.config import settings, log
from src.core.errors import PreconditionError
from src.modules.domain_model import DomainSpec, SourceNorms
from src.modules.elastic_forward import ElasticParams
from src.modules.harmonic_measure import harmonic_measure_lower
from src.modules.spectral_functionals import DataNorms


def _norm(norms: dict, order: int, name: str) -> float:
    try:
        return norms[order]
    except KeyError:
        raise PreconditionError(f"falta la norma H^{order} de {name}") from None


def _sector_poly(j: int, k: complex, norms: SourceNorms, low: int) -> float:
    """P_j(|k|) con normas de orden `low` (j=0,1) y `low + 1` (j=2)."""
    a = abs(k)
    order = low + 1 if j == 2 else low
    n0 = _norm(norms.f0, order, "f0")
    n1 = _norm(norms.f1, order, "f1")
    if j in (0, 2):
        return a * n1 ** 2 + a ** 3 * n0 ** 2 / 3.0
    if j == 1:
        return a ** 3 * n1 ** 2 / 3.0 + a ** 5 * n0 ** 2 / 5.0
    raise PreconditionError(f"funcional desconocido: I{j}")


def helmholtz_sector_bound(j: int, k: complex, norms: SourceNorms, domain: DomainSpec) -> float:
    """Cota escalar de |I_j(k)| en el sector; par en el signo de k2."""
    k = complex(k)
    poly = _sector_poly(j, k, norms, 0)
    return 8.0 * math.pi * domain.area * domain.diameter * poly * math.exp(2.0 * domain.diameter * abs(k.imag))


def elastic_sector_shape(j: int, k: complex, norms: SourceNorms, params: ElasticParams, domain: DomainSpec) -> float:
    """Forma de la cota elástica sin la constante: normas H² (j=0,1) y H³ (j=2)."""
    k = complex(k)
    poly = _sector_poly(j, k, norms, 2)
    return domain.area * domain.diameter * poly * math.exp(2.0 * domain.diameter * abs(k.imag) / params.cs)


def elastic_sector_bound(j: int, k: complex, norms: SourceNorms, params: ElasticParams,
                         domain: DomainSpec, constant: float) -> float:
    return constant * elastic_sector_shape(j, k, norms, params, domain)


# --- CALIBRACIÓN ---

def calibrate_constant(samples: Iterable[Tuple[float, float]], safety: Optional[float] = None) -> float:
    """max(valor/forma) sobre las muestras, por el margen de seguridad."""
    safety = settings.CALIBRATION_SAFETY if safety is None else safety
    ratios = [v / s for v, s in samples if s > 0]
    if not ratios:
        log.warning("Calibración sin muestras útiles: constante 0")
        return 0.0
    return safety * max(ratios)


def sector_calibration_grid(k_min: float, k_max: float, n_radii: int = 4, n_angles: int = 5) -> List[complex]:
    """Rejilla polar determinista en S; incluye el radio mínimo y el ángulo 0."""
    radii = np.geomspace(k_min, k_max, n_radii)
    angles = np.linspace(-0.9, 0.9, n_angles) * math.pi / 4.0
    if 0.0 not in angles:
        angles = np.sort(np.append(angles, 0.0))
    return [complex(r * math.cos(a), r * math.sin(a)) for r in radii for a in angles]


# --- CONTINUACIÓN ---

def continuation_parts(j: int, k: float, data: DataNorms, norms: SourceNorms, K: float,
                       physics: str = "scalar") -> Tuple[float, float, float]:
    """(ε, μ_inferior(k), M) para el funcional j."""
    if not k > K:
        raise PreconditionError(f"la cota de continuación requiere k > K (k={k}, K={K})")
    eps = data.eps0 if j == 0 else data.eps1
    if eps is None:
        raise PreconditionError("ε1 no disponible: el barrido no tiene gradientes")
    if eps >= 1.0:
        raise PreconditionError(f"ε = {eps:.4g} ≥ 1: la cota de continuación no está definida")
    if physics == "scalar":
        M = norms.M0 if j in (0, 1) else norms.M1
    else:
        M = norms.M2e if j == 0 else norms.M3
    return eps, harmonic_measure_lower(k, K), M


def continuation_shape(j: int, k: float, data: DataNorms, norms: SourceNorms, domain: DomainSpec,
                       K: float, physics: str = "scalar") -> float:
    eps, mu, M = continuation_parts(j, k, data, norms, K, physics)
    return math.exp(2.0 * (domain.diameter + 1.0) * k) * eps ** (2.0 * mu) * M ** 2


def continuation_bound(j: int, k: float, data: DataNorms, norms: SourceNorms, domain: DomainSpec,
                       K: float, constant: float, physics: str = "scalar") -> float:
    """C e^{2(D+1)k} ε^{2μ(k)} M² con μ acotada inferiormente."""
    return constant * continuation_shape(j, k, data, norms, domain, K, physics)


def continuation_calibration_grid(K: float, n: int = 6, factor: float = 4.0) -> List[float]:
    """k reales en (K, factor·K]; arranca pegado a K."""
    return list(np.geomspace(K * (1.0 + 1e-6), factor * K, n))


# --- TECHOS DE ESTABILIDAD ---

def stability_ceiling(eps: float, K: float, M: float, constant: float = 1.0) -> float:
    """C (ε² + M² / (1 + K^{4/3} E^{1/2})), E = -ln ε con suelo EPSILON_FLOOR."""
    if eps >= 1.0:
        raise PreconditionError(f"ε = {eps:.4g} ≥ 1: el techo no está definido")
    E = -math.log(max(eps, settings.EPSILON_FLOOR))
    return constant * (eps ** 2 + M ** 2 / (1.0 + K ** (4.0 / 3.0) * math.sqrt(E)))


def ceiling_norm(norms: SourceNorms, physics: str, h1: bool = False) -> float:
    """M del techo: M1/M2 escalar, M2e/M3 elástico (variante H¹ con h1=True)."""
    if physics == "scalar":
        return norms.M2 if h1 else norms.M1
    return norms.M3 if h1 else norms.M2e
