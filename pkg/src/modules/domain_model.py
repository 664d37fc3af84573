# src/modules/domain_model.py
#
# Geometría de Ω, malla de frontera con pesos de cuadratura, fuentes rasterizadas
# y normas de Sobolev discretas. Todo lo que sigue es inmutable tras construirse.

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Dict, Optional, Sequence, Tuple

import numpy as np
from scipy import fft as sp_fft
from scipy.spatial import ConvexHull
from scipy.spatial.distance import pdist

from src.config import settings, log
from src.core.errors import DomainError, PreconditionError
from src.models.experiment_models import BumpConfig, DomainConfig

GRID_PAD = 3
GOLDEN_ANGLE = math.pi * (3.0 - math.sqrt(5.0))
SOBOLEV_ORDERS = (-1, 0, 1, 2, 3)


# --- DOMINIO ---

@dataclass(frozen=True, eq=False)
class DomainSpec:
    shape: str
    center: np.ndarray
    h: float
    radius: float = 0.0
    half_extents: Optional[np.ndarray] = None
    balls: Tuple[Tuple[np.ndarray, float], ...] = ()
    diameter: float = 0.0
    area: float = 0.0
    extent: np.ndarray = field(default_factory=lambda: np.zeros(3))

    # --- rejilla de vóxeles: el centro siempre es un nodo ---
    @cached_property
    def axes(self) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        return tuple(
            self.center[i] + self.h * np.arange(-n, n + 1)
            for i, n in enumerate(self.half_counts)
        )

    @cached_property
    def half_counts(self) -> Tuple[int, int, int]:
        return tuple(int(math.ceil(e / self.h - 1e-9)) + GRID_PAD for e in self.extent)

    @property
    def grid_shape(self) -> Tuple[int, int, int]:
        return tuple(2 * n + 1 for n in self.half_counts)

    @cached_property
    def grid_points(self) -> np.ndarray:
        X, Y, Z = np.meshgrid(*self.axes, indexing="ij")
        return np.stack([X, Y, Z], axis=-1)

    @cached_property
    def sdf_grid(self) -> np.ndarray:
        return self.sdf(self.grid_points.reshape(-1, 3)).reshape(self.grid_shape)

    @property
    def embedding_side(self) -> np.ndarray:
        """Lado de la caja periódica usada por sobolev_norm."""
        return settings.EMBEDDING_FACTOR * self.h * np.array(self.grid_shape, dtype=float)

    @property
    def outer_radius(self) -> float:
        """Radio de una bola centrada en `center` que contiene Ω."""
        if self.shape == "ball":
            return self.radius
        if self.shape == "box":
            return float(np.linalg.norm(self.half_extents))
        return max(float(np.linalg.norm(c - self.center)) + r for c, r in self.balls)

    def sdf(self, points: np.ndarray) -> np.ndarray:
        """Distancia con signo a ∂Ω, positiva dentro."""
        p = np.asarray(points, dtype=float)
        if self.shape == "ball":
            return self.radius - np.linalg.norm(p - self.center, axis=-1)
        if self.shape == "box":
            q = np.abs(p - self.center) - self.half_extents
            outside = np.linalg.norm(np.maximum(q, 0.0), axis=-1)
            inside = np.minimum(np.max(q, axis=-1), 0.0)
            return -(outside + inside)
        dists = [r - np.linalg.norm(p - c, axis=-1) for c, r in self.balls]
        return np.max(np.stack(dists, axis=0), axis=0)

    def project(self, points: np.ndarray) -> np.ndarray:
        """Punto de ∂Ω más cercano (exacto para bola y caja)."""
        p = np.asarray(points, dtype=float)
        if self.shape == "ball":
            return _project_sphere(p, self.center, self.radius)
        if self.shape == "box":
            lo, hi = self.center - self.half_extents, self.center + self.half_extents
            clipped = np.clip(p, lo, hi)
            inside = np.all((p > lo) & (p < hi), axis=-1)
            if np.any(inside):
                q = p[inside]
                gaps = np.concatenate([q - lo, hi - q], axis=-1)
                face = np.argmin(gaps, axis=-1)
                axis, side = face % 3, face // 3
                target = np.where(side == 0, lo[axis], hi[axis])
                q = q.copy()
                q[np.arange(len(q)), axis] = target
                clipped[inside] = q
            return clipped
        sd = np.stack([r - np.linalg.norm(p - c, axis=-1) for c, r in self.balls], axis=0)
        nearest = np.argmax(sd, axis=0)
        out = np.empty_like(p)
        for i, (c, r) in enumerate(self.balls):
            sel = nearest == i
            out[sel] = _project_sphere(p[sel], c, r)
        return out

    def voxel_diameter(self) -> float:
        """Diámetro medido sobre los vóxeles interiores (casco convexo)."""
        pts = self.grid_points[self.sdf_grid >= 0.0]
        if len(pts) < 4:
            raise DomainError("dominio sin vóxeles interiores suficientes")
        hull = ConvexHull(pts)
        return float(pdist(pts[hull.vertices]).max())


@dataclass(frozen=True, eq=False)
class BoundaryMesh:
    nodes: np.ndarray       # (n, 3)
    normals: np.ndarray     # (n, 3), unitarias y exteriores
    weights: np.ndarray     # (n,), áreas
    tangents: np.ndarray    # (n, 2, 3), base ortonormal del plano tangente

    @property
    def size(self) -> int:
        return len(self.nodes)

    @property
    def area(self) -> float:
        return float(self.weights.sum())


def _project_sphere(p: np.ndarray, c: np.ndarray, r: float) -> np.ndarray:
    d = p - c
    n = np.linalg.norm(d, axis=-1, keepdims=True)
    n = np.where(n == 0.0, 1.0, n)
    return c + r * d / n


def tangent_frame(normals: np.ndarray) -> np.ndarray:
    """Dos tangentes unitarias por nodo: producto vectorial con el eje menos alineado."""
    least = np.argmin(np.abs(normals), axis=-1)
    axis = np.eye(3)[least]
    t1 = np.cross(normals, axis)
    t1 /= np.linalg.norm(t1, axis=-1, keepdims=True)
    t2 = np.cross(normals, t1)
    return np.stack([t1, t2], axis=1)


def fibonacci_sphere(n: int) -> np.ndarray:
    i = np.arange(n, dtype=float)
    z = 1.0 - (2.0 * i + 1.0) / n
    rho = np.sqrt(1.0 - z * z)
    phi = GOLDEN_ANGLE * i
    return np.stack([rho * np.cos(phi), rho * np.sin(phi), z], axis=-1)


def _sphere_mesh(center: np.ndarray, radius: float, n: int) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    dirs = fibonacci_sphere(n)
    return center + radius * dirs, dirs, np.full(n, 4.0 * math.pi * radius ** 2 / n)


def _box_mesh(center: np.ndarray, half: np.ndarray, n: int) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    area = 8.0 * (half[0] * half[1] + half[1] * half[2] + half[0] * half[2])
    spacing = math.sqrt(area / n)
    nodes, normals, weights = [], [], []
    for axis in range(3):
        a, b = [i for i in range(3) if i != axis]
        ma = max(1, int(round(2.0 * half[a] / spacing)))
        mb = max(1, int(round(2.0 * half[b] / spacing)))
        da, db = 2.0 * half[a] / ma, 2.0 * half[b] / mb
        ua = -half[a] + da * (np.arange(ma) + 0.5)
        ub = -half[b] + db * (np.arange(mb) + 0.5)
        A, B = np.meshgrid(ua, ub, indexing="ij")
        for sign in (-1.0, 1.0):
            pts = np.zeros((ma * mb, 3))
            pts[:, a], pts[:, b] = A.ravel(), B.ravel()
            pts[:, axis] = sign * half[axis]
            nrm = np.zeros_like(pts)
            nrm[:, axis] = sign
            nodes.append(center + pts)
            normals.append(nrm)
            weights.append(np.full(ma * mb, da * db))
    return np.concatenate(nodes), np.concatenate(normals), np.concatenate(weights)


def build_domain(spec: DomainConfig, h: float, n_boundary: int = 0) -> Tuple[DomainSpec, BoundaryMesh]:
    """Construye Ω (rejilla de vóxeles, diámetro, área) y su malla de frontera."""
    if not h > 0:
        raise PreconditionError(f"h debe ser positivo (h={h})")
    center = np.asarray(spec.center, dtype=float)

    if spec.shape == "ball":
        if not spec.radius > 0:
            raise DomainError("bola degenerada: radio no positivo")
        area = 4.0 * math.pi * spec.radius ** 2
        domain = DomainSpec("ball", center, h, radius=spec.radius, diameter=2.0 * spec.radius,
                            area=area, extent=np.full(3, spec.radius))
    elif spec.shape == "box":
        half = np.asarray(spec.half_extents, dtype=float)
        if np.any(half <= 0):
            raise DomainError("caja degenerada: semiejes no positivos")
        area = 8.0 * (half[0] * half[1] + half[1] * half[2] + half[0] * half[2])
        domain = DomainSpec("box", center, h, half_extents=half, diameter=float(2.0 * np.linalg.norm(half)),
                            area=area, extent=half.copy())
    else:
        if not spec.balls:
            raise DomainError("unión sin bolas")
        balls = tuple((np.asarray(b.center, dtype=float), float(b.radius)) for b in spec.balls)
        diam = max(2.0 * r for _, r in balls)
        for i, (ci, ri) in enumerate(balls):
            for cj, rj in balls[i + 1:]:
                diam = max(diam, float(np.linalg.norm(ci - cj)) + ri + rj)
        extent = np.max([np.abs(c - center) + r for c, r in balls], axis=0)
        domain = DomainSpec("union", center, h, balls=balls, diameter=diam, area=0.0, extent=extent)

    if not np.any(domain.sdf_grid > 0.0):
        raise DomainError(f"Ω no contiene vóxeles interiores con h={h}")

    n = n_boundary or settings.BOUNDARY_NODES or 0
    mesh = build_boundary_mesh(domain, n)
    if domain.shape == "union":
        # el área de la unión sale de la propia cuadratura
        object.__setattr__(domain, "area", mesh.area)
    log.info(f"Dominio {domain.shape}: D={domain.diameter:.4g}, |∂Ω|={domain.area:.4g}, "
             f"rejilla {domain.grid_shape}, {mesh.size} nodos de frontera")
    return domain, mesh


def build_boundary_mesh(domain: DomainSpec, n: int = 0) -> BoundaryMesh:
    if domain.shape == "ball":
        n = n or max(64, int(round(domain.area / domain.h ** 2)))
        nodes, normals, weights = _sphere_mesh(domain.center, domain.radius, n)
    elif domain.shape == "box":
        n = n or max(24, int(round(domain.area / domain.h ** 2)))
        nodes, normals, weights = _box_mesh(domain.center, domain.half_extents, n)
    else:
        areas = np.array([4.0 * math.pi * r ** 2 for _, r in domain.balls])
        total = n or max(64, int(round(areas.sum() / domain.h ** 2)))
        parts = []
        for i, (c, r) in enumerate(domain.balls):
            ni = max(16, int(round(total * areas[i] / areas.sum())))
            pts, nrm, w = _sphere_mesh(c, r, ni)
            keep = np.ones(ni, dtype=bool)
            for j, (cj, rj) in enumerate(domain.balls):
                if j != i:
                    keep &= np.linalg.norm(pts - cj, axis=-1) >= rj
            parts.append((pts[keep], nrm[keep], w[keep]))
        nodes = np.concatenate([p[0] for p in parts])
        normals = np.concatenate([p[1] for p in parts])
        weights = np.concatenate([p[2] for p in parts])
    normals = normals / np.linalg.norm(normals, axis=-1, keepdims=True)
    return BoundaryMesh(nodes, normals, weights, tangent_frame(normals))


# --- FUENTES ---

def support_radius(bump: BumpConfig) -> float:
    if bump.kind == "gaussian":
        return settings.GAUSSIAN_CUTOFF * bump.width
    return bump.width


def _profile(bump: BumpConfig, d: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """ψ y ∇ψ del bump en desplazamientos d = x - c."""
    r2 = np.sum(d * d, axis=-1)
    w2 = bump.width ** 2
    if bump.kind == "gaussian":
        inside = r2 < support_radius(bump) ** 2
        psi = np.where(inside, np.exp(-0.5 * r2 / w2), 0.0)
        grad = -d * (psi / w2)[..., None]
    else:
        t = np.clip(1.0 - r2 / w2, 0.0, None)
        psi = t ** 4
        grad = d * (-8.0 * t ** 3 / w2)[..., None]
    return psi, grad


def evaluate_bump(bump: BumpConfig, points: np.ndarray, vector: bool) -> np.ndarray:
    """Valor del bump en `points` (..., 3): escalar (...,) o vectorial (..., 3)."""
    d = np.asarray(points, dtype=float) - np.asarray(bump.center, dtype=float)
    psi, grad = _profile(bump, d)
    amp = np.asarray(bump.amplitude, dtype=float)
    if not vector:
        return amp[0] * psi
    if bump.pattern == "direct":
        return psi[..., None] * amp
    if bump.pattern == "curl":
        return np.cross(grad, amp)
    return amp[0] * grad


def evaluate_bumps(bumps: Sequence[BumpConfig], points: np.ndarray, vector: bool) -> Tuple[np.ndarray, np.ndarray]:
    """(f0, f1) de una descripción analítica en puntos arbitrarios."""
    shape = points.shape[:-1] + ((3,) if vector else ())
    f0, f1 = np.zeros(shape), np.zeros(shape)
    for bump in bumps:
        target = f0 if bump.field == "f0" else f1
        target += evaluate_bump(bump, points, vector)
    return f0, f1


@dataclass(frozen=True, eq=False)
class SourcePair:
    f0: np.ndarray
    f1: np.ndarray
    mask: np.ndarray
    domain: DomainSpec
    bumps: Optional[Tuple[BumpConfig, ...]] = None   # descripción analítica, si existe

    @property
    def vector(self) -> bool:
        return self.f0.ndim == 4

    @property
    def is_zero(self) -> bool:
        return not (np.any(self.f0) or np.any(self.f1))

    def quadrature_nodes(self) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Centros de vóxel del soporte con sus valores, en orden fijo de rejilla."""
        pts = self.domain.grid_points[self.mask]
        return pts, self.f0[self.mask], self.f1[self.mask]

    def scaled(self, alpha: float) -> "SourcePair":
        bumps = None
        if self.bumps is not None:
            bumps = tuple(b.model_copy(update={"amplitude": [alpha * a for a in b.amplitude]}) for b in self.bumps)
        return SourcePair(alpha * self.f0, alpha * self.f1, self.mask, self.domain, bumps)

    def minus(self, other: "SourcePair") -> "SourcePair":
        return SourcePair(self.f0 - other.f0, self.f1 - other.f1, self.mask | other.mask, self.domain)


def zero_source(domain: DomainSpec, vector: bool = False) -> SourcePair:
    shape = domain.grid_shape + ((3,) if vector else ())
    return SourcePair(np.zeros(shape), np.zeros(shape), np.zeros(domain.grid_shape, dtype=bool), domain, ())


def rasterize_source(bumps: Sequence[BumpConfig], domain: DomainSpec, vector: bool = False) -> SourcePair:
    """Evalúa la descripción analítica en los nodos de la rejilla de Ω."""
    standoff = settings.STANDOFF_CELLS * domain.h
    mask = np.zeros(domain.grid_shape, dtype=bool)
    pts = domain.grid_points
    for bump in bumps:
        c = np.asarray(bump.center, dtype=float)
        clearance = float(domain.sdf(c[None, :])[0]) - support_radius(bump)
        if clearance < standoff - 1e-12:
            raise DomainError(
                f"bump en {tuple(bump.center)} viola la separación: holgura {clearance:.4g} < {standoff:.4g}"
            )
        mask |= np.sum((pts - c) ** 2, axis=-1) < support_radius(bump) ** 2
    f0, f1 = evaluate_bumps(bumps, pts, vector)
    sel = mask[..., None] if vector else mask
    f0, f1 = np.where(sel, f0, 0.0), np.where(sel, f1, 0.0)
    log.info(f"Fuente rasterizada: {len(bumps)} bumps, {int(mask.sum())} vóxeles de soporte")
    return SourcePair(f0, f1, mask, domain, tuple(bumps))


# --- NORMAS DE SOBOLEV ---

def sobolev_norm(g: np.ndarray, h: float, s: float, embed: Optional[int] = None) -> float:
    """‖g‖_(s) con el símbolo (1+|ξ|²)^s sobre la caja periódica rellenada con ceros.

    Normalizada para que s=0 reproduzca (Σ h³|g|²)^{1/2}. Para campos vectoriales
    (último eje de tamaño 3 sobre una rejilla 3D) suma las componentes.
    """
    if not -1.0 <= s <= 3.0:
        raise PreconditionError(f"orden de Sobolev fuera de [-1, 3]: {s}")
    g = np.asarray(g)
    comps = [g[..., i] for i in range(3)] if g.ndim == 4 else [g]
    factor = embed or settings.EMBEDDING_FACTOR
    shape = tuple(sp_fft.next_fast_len(int(factor * n)) for n in comps[0].shape)
    xi2 = sum(
        np.meshgrid(*[(2.0 * np.pi * sp_fft.fftfreq(n, d=h)) ** 2 for n in shape], indexing="ij", sparse=True)
    )
    symbol = (1.0 + xi2) ** s
    total = 0.0
    for c in comps:
        ghat = sp_fft.fftn(c, s=shape)
        total += float(np.sum(symbol * np.abs(ghat) ** 2))
    n_total = float(np.prod(shape))
    return math.sqrt(max(total, 0.0) * h ** 3 / n_total)


@dataclass(frozen=True)
class SourceNorms:
    f0: Dict[int, float]
    f1: Dict[int, float]

    @property
    def M0(self) -> float:
        return self.f0[0] + self.f1[0]

    @property
    def M1(self) -> float:
        return self.f0[1] + self.f1[0]

    @property
    def M2(self) -> float:
        return self.f0[2] + self.f1[1]

    @property
    def M2e(self) -> float:
        return self.f0[2] + self.f1[2]

    @property
    def M3(self) -> float:
        return self.f0[3] + self.f1[3]

    def as_dict(self) -> Dict[str, float]:
        out = {f"f0_H{s}": v for s, v in self.f0.items()}
        out.update({f"f1_H{s}": v for s, v in self.f1.items()})
        out.update(M0=self.M0, M1=self.M1, M2=self.M2, M2e=self.M2e, M3=self.M3)
        return out


def source_norms(source: SourcePair, orders: Sequence[int] = SOBOLEV_ORDERS) -> SourceNorms:
    h = source.domain.h
    return SourceNorms(
        {s: sobolev_norm(source.f0, h, s) for s in orders},
        {s: sobolev_norm(source.f1, h, s) for s in orders},
    )


def error_norms(truth: SourcePair, estimate: SourcePair) -> Dict[str, float]:
    """Normas de la diferencia usadas en las filas del informe."""
    diff = estimate.minus(truth)
    h = truth.domain.h
    return {
        "err_l2_f0": sobolev_norm(diff.f0, h, 0),
        "err_hm1_f1": sobolev_norm(diff.f1, h, -1),
        "err_h1_f0": sobolev_norm(diff.f0, h, 1),
        "err_l2_f1": sobolev_norm(diff.f1, h, 0),
    }
