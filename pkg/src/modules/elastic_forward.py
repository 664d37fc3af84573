# src/modules/elastic_forward.py
#
# Matriz fundamental de Lamé y campo radiante u = ∫ Φ(x-y; k)(f1 + ik f0) dy.
#
#   Φ = a(r) I + ∇∇ q(r),   a = e^{ikr/cs} / (4π cs² r),   q = B(r, k) / (4π k² r)
#   B = e^{ikr/cs} - e^{ikr/cp} - ik(1/cs - 1/cp) r
#
# B/k² se evalúa por serie de potencias cuando |k| r / cs < THETA_SWITCH.

import math
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
from scipy import ndimage

from src.config import settings, log
from src.core.conventions import FOUR_PI
from src.core.errors import PreconditionError
from src.core.parallel import chunk_ranges, ordered_map
from src.modules.domain_model import BoundaryMesh, SourcePair
from src.modules.helmholtz_forward import FrequencyGrid, FrequencySweep, _check_outside
from src.models.experiment_models import ElasticConfig


@dataclass(frozen=True)
class ElasticParams:
    lam: float
    mu: float
    rho: float = 1.0

    def __post_init__(self):
        if not (self.mu > 0 and self.rho > 0 and self.lam + self.mu > 0):
            raise PreconditionError(f"parámetros no elípticos: λ={self.lam}, μ={self.mu}, ρ={self.rho}")

    @property
    def cp(self) -> float:
        return math.sqrt((self.lam + 2.0 * self.mu) / self.rho)

    @property
    def cs(self) -> float:
        return math.sqrt(self.mu / self.rho)

    @classmethod
    def from_config(cls, cfg: ElasticConfig) -> "ElasticParams":
        return cls(cfg.lam, cfg.mu, cfg.rho)


# --- NÚCLEO RADIAL ---

def _series_terms(r: np.ndarray, k: complex, cs: float, cp: float):
    """Genera term_m = P_s(m) - P_p(m), con P(m) = (ir/c)^m k^{m-2} / m!, desde m = 2."""
    zs, zp = 1j * r / cs, 1j * r / cp
    ps, pp = zs * zs / 2.0, zp * zp / 2.0
    m = 2
    while True:
        yield m, ps - pp
        ps = ps * zs * k / (m + 1)
        pp = pp * zp * k / (m + 1)
        m += 1


def _radial_series(r: np.ndarray, k: complex, cs: float, cp: float):
    """(B/k², q, q', q'', q''') por la serie; sin cancelaciones en k → 0."""
    bracket = np.zeros(r.shape, dtype=complex)
    moments = [np.zeros(r.shape, dtype=complex) for _ in range(4)]
    for m, term in _series_terms(r, k, cs, cp):
        bracket += term
        moments[0] += term
        moments[1] += (m - 1) * term
        moments[2] += (m - 1) * (m - 2) * term
        moments[3] += (m - 1) * (m - 2) * (m - 3) * term
        size = np.abs(term)
        if m >= 3 and np.all(size <= np.maximum(settings.SERIES_TOL, 1e-17 * np.abs(bracket))):
            break
        if m >= settings.SERIES_MAX_TERMS:
            log.warning(f"Serie de Φ sin converger tras {m} términos")
            break
    q = [moments[n] / (FOUR_PI * r ** (n + 1)) for n in range(4)]
    return bracket, q[0], q[1], q[2], q[3]


def _radial_direct(r: np.ndarray, k: complex, cs: float, cp: float):
    hs, hp = [], []
    for c, store in ((cs, hs), (cp, hp)):
        kap = k / c
        e = np.exp(1j * kap * r)
        store.extend([
            e / r,
            e * (1j * kap / r - 1.0 / r ** 2),
            e * (-kap ** 2 / r - 2j * kap / r ** 2 + 2.0 / r ** 3),
            e * (-1j * kap ** 3 / r + 3.0 * kap ** 2 / r ** 2 + 6j * kap / r ** 3 - 6.0 / r ** 4),
        ])
    shift = 1j * k * (1.0 / cs - 1.0 / cp)
    k2 = k * k
    bracket = (r * (hs[0] - hp[0]) - shift * r) / k2
    q = (hs[0] - hp[0] - shift) / (FOUR_PI * k2)
    q1, q2, q3 = [(hs[n] - hp[n]) / (FOUR_PI * k2) for n in (1, 2, 3)]
    return bracket, q, q1, q2, q3


def radial_kernel(r, k: complex, params: ElasticParams):
    """(B/k², q, q', q'', q''') vectorizado en r, con cambio serie/directo en θ_switch."""
    r = np.asarray(r, dtype=float)
    if np.any(r <= 0):
        raise PreconditionError("el núcleo elástico requiere r > 0")
    shape = r.shape
    r = r.reshape(-1)
    cs, cp = params.cs, params.cp
    small = abs(k) * r / cs < settings.THETA_SWITCH
    out = [np.zeros(r.shape, dtype=complex) for _ in range(5)]
    for sel, fn in ((small, _radial_series), (~small, _radial_direct)):
        if np.any(sel):
            for dst, src in zip(out, fn(r[sel], complex(k), cs, cp)):
                dst[sel] = src
    return tuple(o.reshape(shape) for o in out)


def phi_regularized_bracket(r, k: complex, params: ElasticParams):
    """[e^{ikr/cs} - e^{ikr/cp} - ik(1/cs - 1/cp) r] / k², entero en k."""
    bracket = radial_kernel(r, k, params)[0]
    return bracket if bracket.ndim else complex(bracket)


def _shear_term(r: np.ndarray, k: complex, cs: float) -> Tuple[np.ndarray, np.ndarray]:
    a = np.exp(1j * k * r / cs) / (FOUR_PI * cs * cs * r)
    return a, a * (1j * k / cs - 1.0 / r)


def phi_matrix(d, k: complex, params: ElasticParams) -> np.ndarray:
    """Φ(x - y; k) como (…, 3, 3) para desplazamientos d (…, 3)."""
    d = np.asarray(d, dtype=float)
    r = np.linalg.norm(d, axis=-1)
    if np.any(r <= 0):
        raise PreconditionError("phi_matrix requiere |x - y| > 0")
    _, _, q1, q2, _ = radial_kernel(r, k, params)
    a, _ = _shear_term(r, k, params.cs)
    xh = d / r[..., None]
    iso = (a + q1 / r)[..., None, None] * np.eye(3)
    return iso + (q2 - q1 / r)[..., None, None] * xh[..., :, None] * xh[..., None, :]


# --- CUADRATURA ---

def elastic_block(x: np.ndarray, tangents: Optional[np.ndarray], source: SourcePair, omegas: np.ndarray,
                  params: ElasticParams) -> Tuple[np.ndarray, Optional[np.ndarray]]:
    """u (c, nω, 3) y, con tangentes, ∂_τ u (c, nω, 3, 2) para un bloque de puntos."""
    y, f0, f1 = source.quadrature_nodes()
    h3 = source.domain.h ** 3
    omegas = np.asarray(omegas, dtype=complex)
    c = len(x)
    values = np.zeros((c, len(omegas), 3), dtype=complex)
    grads = None if tangents is None else np.zeros((c, len(omegas), 3, 2), dtype=complex)
    if len(y) == 0:
        return values, grads

    r = _check_outside(x, y)
    xh = (x[:, None, :] - y[None, :, :]) / r[..., None]
    if tangents is not None:
        tx = np.einsum("cad,cmd->cam", tangents, xh)
    for j, k in enumerate(omegas):
        _, _, q1, q2, q3 = radial_kernel(r, k, params)
        a, da = _shear_term(r, k, params.cs)
        v = f1 + 1j * k * f0
        xv = np.einsum("cmd,md->cm", xh, v)
        alpha = a + q1 / r
        beta = q2 - q1 / r
        values[:, j, :] = h3 * (alpha @ v + np.einsum("cm,cmd->cd", beta * xv, xh))
        if tangents is not None:
            c3 = q3 - 3.0 * q2 / r + 3.0 * q1 / r ** 2
            ar = beta / r
            tv = np.einsum("cad,md->cam", tangents, v)
            t1 = np.einsum("cam,md->cad", (da + ar)[:, None, :] * tx, v)
            t2 = np.einsum("cam,cmd->cad", (c3 * xv)[:, None, :] * tx + ar[:, None, :] * tv, xh)
            t3 = tangents * np.sum(ar * xv, axis=1)[:, None, None]
            grads[:, j] = h3 * np.transpose(t1 + t2 + t3, (0, 2, 1))
    return values, grads


def evaluate_elastic(source: SourcePair, mesh: BoundaryMesh, omegas: np.ndarray, params: ElasticParams,
                     with_gradients: bool = False, threads: Optional[int] = None):
    blocks = chunk_ranges(mesh.size)

    def run(block: range):
        sl = slice(block.start, block.stop)
        tang = mesh.tangents[sl] if with_gradients else None
        return elastic_block(mesh.nodes[sl], tang, source, omegas, params)

    parts = ordered_map(run, blocks, threads)
    values = np.concatenate([p[0] for p in parts], axis=0)
    grads = np.concatenate([p[1] for p in parts], axis=0) if with_gradients else None
    return values, grads


def forward_field_elastic(source: SourcePair, x, k: complex, params: ElasticParams) -> np.ndarray:
    """u(x, k) ∈ C³ (o (N, 3) para varios puntos)."""
    if not source.vector:
        raise PreconditionError("forward_field_elastic necesita una fuente vectorial")
    pts = np.atleast_2d(np.asarray(x, dtype=float))
    values, _ = elastic_block(pts, None, source, np.array([k]), params)
    out = values[:, 0, :]
    return out[0] if np.asarray(x).ndim == 1 else out


def elastic_field_gradient(source: SourcePair, x, k: complex, params: ElasticParams) -> np.ndarray:
    """Gradiente completo J[l, j] = ∂_l u_j en puntos (N, 3) → (N, 3, 3)."""
    pts = np.atleast_2d(np.asarray(x, dtype=float))
    y, f0, f1 = source.quadrature_nodes()
    h3 = source.domain.h ** 3
    r = _check_outside(pts, y)
    xh = (pts[:, None, :] - y[None, :, :]) / r[..., None]
    _, _, q1, q2, q3 = radial_kernel(r, k, params)
    a, da = _shear_term(r, k, params.cs)
    v = f1 + 1j * k * f0
    xv = np.einsum("cmd,md->cm", xh, v)
    beta = q2 - q1 / r
    c3 = q3 - 3.0 * q2 / r + 3.0 * q1 / r ** 2
    ar = beta / r
    jac = np.einsum("cm,cml,md->cld", da + ar, xh, v)
    jac += np.einsum("cm,cml,cmd->cld", c3 * xv, xh, xh)
    jac += np.einsum("cm,ml,cmd->cld", ar, v, xh)
    jac += np.eye(3) * np.sum(ar * xv, axis=1)[:, None, None]
    return h3 * jac


def divergence_curl(jac: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """div u y rot u a partir de J[l, j] = ∂_l u_j."""
    div = np.trace(jac, axis1=-2, axis2=-1)
    curl = np.stack([
        jac[..., 1, 2] - jac[..., 2, 1],
        jac[..., 2, 0] - jac[..., 0, 2],
        jac[..., 0, 1] - jac[..., 1, 0],
    ], axis=-1)
    return div, curl


# --- FORMA INTEGRADA POR PARTES ---

def _d1(f: np.ndarray, axis: int, h: float) -> np.ndarray:
    return (-np.roll(f, -2, axis) + 8.0 * np.roll(f, -1, axis) - 8.0 * np.roll(f, 1, axis)
            + np.roll(f, 2, axis)) / (12.0 * h)


def _d2(f: np.ndarray, axis: int, h: float) -> np.ndarray:
    return (-np.roll(f, -2, axis) + 16.0 * np.roll(f, -1, axis) - 30.0 * f + 16.0 * np.roll(f, 1, axis)
            - np.roll(f, 2, axis)) / (12.0 * h * h)


def grad_div(field: np.ndarray, h: float) -> np.ndarray:
    """∇ div de un campo vectorial de rejilla (nx, ny, nz, 3), diferencias centradas de 4º orden."""
    out = np.zeros_like(field)
    for i in range(3):
        for j in range(3):
            fj = field[..., j]
            out[..., i] += _d2(fj, i, h) if i == j else _d1(_d1(fj, j, h), i, h)
    return out


def forward_field_elastic_ibp(source: SourcePair, x, k: complex, params: ElasticParams) -> np.ndarray:
    """u = ∫ [a(r) v + q(r) ∇div v] dy, v = f1 + ik f0; requiere descripción analítica."""
    if not source.vector:
        raise PreconditionError("forward_field_elastic_ibp necesita una fuente vectorial")
    if source.bumps is None:
        raise PreconditionError("la forma integrada por partes exige una fuente suave descrita analíticamente")
    pts = np.atleast_2d(np.asarray(x, dtype=float))
    h = source.domain.h
    h3 = h ** 3
    grid = source.domain.grid_points

    # el término de ∇div se extiende dos celdas más allá del soporte
    wide = ndimage.binary_dilation(source.mask, iterations=2)
    gd0, gd1 = grad_div(source.f0, h)[wide], grad_div(source.f1, h)[wide]
    y_wide = grid[wide]
    y, f0, f1 = source.quadrature_nodes()

    out = np.zeros((len(pts), 3), dtype=complex)
    if len(y) == 0:
        return out[0] if np.asarray(x).ndim == 1 else out
    r = _check_outside(pts, y)
    a, _ = _shear_term(r, k, params.cs)
    out += h3 * (a @ (f1 + 1j * k * f0))
    r_wide = _check_outside(pts, y_wide)
    q = radial_kernel(r_wide, k, params)[1]
    out += h3 * (q @ (gd1 + 1j * k * gd0))
    return out[0] if np.asarray(x).ndim == 1 else out


def forward_sweep_elastic(source: SourcePair, mesh: BoundaryMesh, grid: FrequencyGrid, params: ElasticParams,
                          with_gradients: bool = False, threads: Optional[int] = None) -> FrequencySweep:
    if not source.vector:
        raise PreconditionError("forward_sweep_elastic necesita una fuente vectorial")
    log.info(f"Barrido elástico: {mesh.size} nodos x {grid.count + 1} frecuencias "
             f"(cp={params.cp:.4g}, cs={params.cs:.4g})")
    omegas = np.concatenate([[0.0], grid.omegas])
    values, grads = evaluate_elastic(source, mesh, omegas, params, with_gradients, threads)
    return FrequencySweep(
        values=values[:, 1:], zero_mode=values[:, 0], grid=grid, mesh=mesh,
        grad_tau=None if grads is None else grads[:, 1:],
        grad_tau_zero=None if grads is None else grads[:, 0],
    )
