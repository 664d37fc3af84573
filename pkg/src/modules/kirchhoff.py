# src/modules/kirchhoff.py
#
# Representación integral de la elastodinámica en espacio libre (oráculo independiente del FDTD).
#
#   V(F)(x,t) = (c_p² - c_s²)^{-1} [ ((c_p - c_s)/c_s) ∫_{|x-y|<c_s t} F
#                                    + ∫_{c_s t<|x-y|<c_p t} ((c_p t - |x-y|)/|x-y|) F ]
#   𝒦(g) = (1/(4π c_p)) [∂t² V(g) + V(-c_p²Δg + (c_p² - c_s²)∇div g)]
#   U = ∂t 𝒦(f0) - 𝒦(f1)
#
# Cuadratura: Gauss–Legendre radial por tramos y, en cada esfera, sólo el casquete que corta
# el soporte de cada bump (GL en cos θ, regla uniforme en φ).

from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from src.core.conventions import FOUR_PI
from src.models.experiment_models import BumpConfig
from src.modules.domain_model import evaluate_bump, support_radius, tangent_frame
from src.modules.elastic_forward import ElasticParams

Field = Callable[[np.ndarray], np.ndarray]

STENCIL_FACTOR = 1e-3
TIME_STEP_FACTOR = 1e-3


@dataclass(frozen=True)
class KirchhoffQuadrature:
    n_radial: int = 48
    n_polar: int = 32
    n_azimuth: int = 32


def _bump_field(bump: BumpConfig, operator: bool, params: ElasticParams) -> Field:
    """F = g o F = -c_p²Δg + (c_p² - c_s²)∇div g por diferencias centradas."""
    if not operator:
        return lambda y: evaluate_bump(bump, y, vector=True)
    eta = STENCIL_FACTOR * bump.width
    cp2, cs2 = params.cp ** 2, params.cs ** 2
    eye = np.eye(3) * eta

    def g(y):
        return evaluate_bump(bump, y, vector=True)

    def apply(y: np.ndarray) -> np.ndarray:
        g0 = g(y)
        lap = np.zeros_like(g0)
        shifted = {}
        for a in range(3):
            shifted[(a, 1)] = g(y + eye[a])
            shifted[(a, -1)] = g(y - eye[a])
            lap += shifted[(a, 1)] - 2.0 * g0 + shifted[(a, -1)]
        lap /= eta ** 2
        # (∇div g)_a = Σ_b ∂_a ∂_b g_b
        graddiv = np.zeros_like(g0)
        for a in range(3):
            graddiv[..., a] += (shifted[(a, 1)][..., a] - 2.0 * g0[..., a] + shifted[(a, -1)][..., a]) / eta ** 2
            for b in range(3):
                if b == a:
                    continue
                pp = g(y + eye[a] + eye[b])[..., b]
                pm = g(y + eye[a] - eye[b])[..., b]
                mp = g(y - eye[a] + eye[b])[..., b]
                mm = g(y - eye[a] - eye[b])[..., b]
                graddiv[..., a] += (pp - pm - mp + mm) / (4.0 * eta ** 2)
        return -cp2 * lap + (cp2 - cs2) * graddiv

    return apply


def _weight(r: np.ndarray, t: float, params: ElasticParams) -> np.ndarray:
    cs, cp = params.cs, params.cp
    return np.clip((cp * t - r) / r, 0.0, (cp - cs) / cs) / (cp ** 2 - cs ** 2)


def _shell_integral(F: Field, x: np.ndarray, center: np.ndarray, rho: float, r_lo: float, r_hi: float,
                    t: float, params: ElasticParams, quad: KirchhoffQuadrature) -> np.ndarray:
    """∫_{r_lo<|y-x|<r_hi} w(|y-x|, t) F(y) dy restringida a la bola del soporte."""
    d_vec = center - x
    d = float(np.linalg.norm(d_vec))
    lo, hi = max(r_lo, d - rho, 0.0), min(r_hi, d + rho)
    if hi <= lo:
        return np.zeros(3)
    pole = d_vec / d if d > 0 else np.array([0.0, 0.0, 1.0])
    frame = tangent_frame(pole[None, :])[0]
    s, ws = np.polynomial.legendre.leggauss(quad.n_radial)
    radii = 0.5 * (hi - lo) * (s + 1.0) + lo
    wr = 0.5 * (hi - lo) * ws
    u, wu = np.polynomial.legendre.leggauss(quad.n_polar)
    phi = 2.0 * np.pi * np.arange(quad.n_azimuth) / quad.n_azimuth
    total = np.zeros(3)
    for r, w in zip(radii, wr):
        if d > 0:
            cmax = np.clip((r * r + d * d - rho * rho) / (2.0 * r * d), -1.0, 1.0)
        else:
            cmax = -1.0
        cos_t = 0.5 * (1.0 - cmax) * (u + 1.0) + cmax
        w_cos = 0.5 * (1.0 - cmax) * wu
        sin_t = np.sqrt(np.clip(1.0 - cos_t ** 2, 0.0, None))
        dirs = (cos_t[:, None, None] * pole
                + sin_t[:, None, None] * (np.cos(phi)[None, :, None] * frame[0] + np.sin(phi)[None, :, None] * frame[1]))
        vals = F(x + r * dirs.reshape(-1, 3)).reshape(len(cos_t), len(phi), 3)
        sphere = (2.0 * np.pi / len(phi)) * np.einsum("a,abk->k", w_cos, vals)
        total += w * r * r * float(_weight(np.array([r]), t, params)[0]) * sphere
    return total


def volume_potential(bumps: Sequence[BumpConfig], x, t: float, params: ElasticParams, operator: bool = False,
                     quad: Optional[KirchhoffQuadrature] = None) -> np.ndarray:
    """V(F)(x, t) con F la suma de los bumps (o el operador aplicado a ella)."""
    if t <= 0.0:
        return np.zeros(3)
    quad = quad or KirchhoffQuadrature()
    x = np.asarray(x, dtype=float)
    cs_t, cp_t = params.cs * t, params.cp * t
    total = np.zeros(3)
    for bump in bumps:
        F = _bump_field(bump, operator, params)
        c = np.asarray(bump.center, dtype=float)
        rho = support_radius(bump) * (1.0 + 2e-3 if operator else 1.0)
        total += _shell_integral(F, x, c, rho, 0.0, cs_t, t, params, quad)
        total += _shell_integral(F, x, c, rho, cs_t, cp_t, t, params, quad)
    return total


def _kirchhoff_operator(bumps: Sequence[BumpConfig], x, t: float, params: ElasticParams, tau: float,
                        quad: Optional[KirchhoffQuadrature]) -> np.ndarray:
    """𝒦(g)(x, t) con ∂t² por diferencias centradas; V y 𝒦 se extienden como funciones impares de t."""
    if not bumps:
        return np.zeros(3)
    if t < 0.0:
        return -_kirchhoff_operator(bumps, x, -t, params, tau, quad)
    V = lambda s: np.sign(s) * volume_potential(bumps, x, abs(s), params, False, quad)
    d2 = (V(t + tau) - 2.0 * V(t) + V(t - tau)) / tau ** 2
    return (d2 + volume_potential(bumps, x, t, params, True, quad)) / (FOUR_PI * params.cp)


def kirchhoff_eval(bumps: Sequence[BumpConfig], x, t: float, params: ElasticParams,
                   quad: Optional[KirchhoffQuadrature] = None) -> np.ndarray:
    """U(x, t) para datos iniciales (f0, f1) descritos por bumps vectoriales; 0 si t < 0."""
    if t < 0.0:
        return np.zeros(3)
    if t == 0.0:
        return sum((evaluate_bump(b, np.asarray(x, dtype=float)[None, :], vector=True)[0]
                    for b in bumps if b.field == "f0"), np.zeros(3))
    f0 = [b for b in bumps if b.field == "f0"]
    f1 = [b for b in bumps if b.field == "f1"]
    scale = min((b.width for b in bumps), default=1.0)
    tau = TIME_STEP_FACTOR * scale / params.cs
    dK0 = np.zeros(3)
    if f0:
        dK0 = (_kirchhoff_operator(f0, x, t + tau, params, tau, quad)
               - _kirchhoff_operator(f0, x, t - tau, params, tau, quad)) / (2.0 * tau)
    return dK0 - _kirchhoff_operator(f1, x, t, params, tau, quad)
