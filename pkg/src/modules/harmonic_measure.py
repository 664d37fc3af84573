# src/modules/harmonic_measure.py
#
# Medida armónica μ(k) del segmento [0, K] en S \ [0, K], S = {|arg k| < π/4}.
# Cota inferior cerrada y estimador Monte Carlo independiente (walk-on-spheres en el plano).

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from src.config import settings, log
from src.core.errors import PreconditionError
from src.core.parallel import ordered_map

INV_SQRT2 = 1.0 / math.sqrt(2.0)


def harmonic_measure_lower(k: float, K: float) -> float:
    """1/2 si k < 2^{1/4} K; si no (1/π)((k/K)⁴ - 1)^{-1/2}."""
    if not k > 0 or not K > 0:
        raise PreconditionError(f"harmonic_measure_lower requiere k, K > 0 (k={k}, K={K})")
    if k < 2.0 ** 0.25 * K:
        return 0.5
    return 1.0 / (math.pi * math.sqrt((k / K) ** 4 - 1.0))


@dataclass(frozen=True)
class MCEstimate:
    value: float
    stderr: float
    n_walks: int
    capped: int = 0


def _distances(x: np.ndarray, y: np.ndarray, K: float):
    """(distancia al segmento, distancia a los rayos arg = ±π/4)."""
    d_slit = np.hypot(x - np.clip(x, 0.0, K), y)
    r = np.hypot(x, y)
    t_up, t_dn = (x + y) * INV_SQRT2, (x - y) * INV_SQRT2
    d_up = np.where(t_up >= 0, np.abs(y - x) * INV_SQRT2, r)
    d_dn = np.where(t_dn >= 0, np.abs(x + y) * INV_SQRT2, r)
    return d_slit, np.minimum(d_up, d_dn)


def _inside(k: complex, K: float) -> bool:
    x, y = k.real, k.imag
    if not abs(y) < x:
        return False
    return not (y == 0.0 and x <= K)


def _walk_chunk(start: complex, K: float, n: int, seed: np.random.SeedSequence) -> tuple[int, int]:
    """Caminatas de un bloque: (éxitos, caminatas cortadas por el tope de pasos)."""
    rng = np.random.default_rng(seed)
    eps = settings.WOS_SHELL_FACTOR * K
    x = np.full(n, start.real)
    y = np.full(n, start.imag)
    alive = np.ones(n, dtype=bool)
    hit = np.zeros(n, dtype=bool)
    for _ in range(settings.WOS_MAX_STEPS):
        idx = np.flatnonzero(alive)
        if len(idx) == 0:
            break
        d_slit, d_rays = _distances(x[idx], y[idx], K)
        on_slit = d_slit < eps
        on_rays = (d_rays < eps) & ~on_slit
        hit[idx[on_slit]] = True
        alive[idx[on_slit | on_rays]] = False
        move = idx[~(on_slit | on_rays)]
        if len(move) == 0:
            continue
        radius = np.minimum(d_slit, d_rays)[~(on_slit | on_rays)]
        angle = rng.uniform(0.0, 2.0 * math.pi, len(move))
        x[move] += radius * np.cos(angle)
        y[move] += radius * np.sin(angle)
    return int(hit.sum()), int(alive.sum())


def harmonic_measure_mc(k: complex, K: float, n_walks: int = 100_000, seed: Optional[int] = None,
                        threads: Optional[int] = None) -> MCEstimate:
    """Fracción de caminatas absorbidas en el segmento; las cortadas por tope cuentan como fallo.

    El resultado sólo depende de (k, K, n_walks, seed): cada bloque de WOS_CHUNK caminatas
    recibe su propia semilla derivada.
    """
    k = complex(k)
    if not K > 0 or n_walks < 1:
        raise PreconditionError(f"parámetros inválidos: K={K}, n_walks={n_walks}")
    if not _inside(k, K):
        raise PreconditionError(f"k={k} fuera de S \\ [0, K]")
    seed = settings.DEFAULT_SEED if seed is None else seed
    chunk = settings.WOS_CHUNK
    sizes = [min(chunk, n_walks - s) for s in range(0, n_walks, chunk)]
    seeds = np.random.SeedSequence(seed).spawn(len(sizes))
    parts = ordered_map(lambda a: _walk_chunk(k, K, a[0], a[1]), list(zip(sizes, seeds)), threads)
    hits = sum(p[0] for p in parts)
    capped = sum(p[1] for p in parts)
    if capped:
        log.warning(f"{capped} caminatas alcanzaron el tope de {settings.WOS_MAX_STEPS} pasos")
    p = hits / n_walks
    return MCEstimate(value=p, stderr=math.sqrt(p * (1.0 - p) / n_walks), n_walks=n_walks, capped=capped)
