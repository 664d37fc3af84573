# src/models/experiment_models.py

import hashlib
import json
from pathlib import Path
from typing import List, Literal, Optional, Tuple

from pydantic import BaseModel, Field, ValidationError, field_validator, model_validator

from src.config import settings, log
from src.core.errors import ConfigError

Vector3 = Tuple[float, float, float]


class BallConfig(BaseModel):
    """Una bola de la unión (forma "union")."""
    center: Vector3
    radius: float = Field(gt=0)


class DomainConfig(BaseModel):
    """Geometría de Ω: bola, caja alineada o unión de bolas desplazadas."""
    shape: Literal["ball", "box", "union"] = "ball"
    center: Vector3 = (0.0, 0.0, 0.0)
    radius: float = 1.0
    half_extents: Vector3 = (1.0, 1.0, 1.0)
    balls: List[BallConfig] = []


class BumpConfig(BaseModel):
    """Un bump analítico que contribuye a f0 o a f1.

    - scalar: amplitude = [a]   -> a·ψ
    - vector, pattern "direct":   amplitude = [a1, a2, a3] -> a·ψ
    - vector, pattern "curl":     amplitude = [a1, a2, a3] -> ∇ψ × a  (div = 0)
    - vector, pattern "gradient": amplitude = [s]          -> s·∇ψ    (curl = 0)
    """
    field: Literal["f0", "f1"] = "f0"
    kind: Literal["gaussian", "polynomial"] = "gaussian"
    center: Vector3 = (0.0, 0.0, 0.0)
    width: float = Field(0.25, gt=0)
    amplitude: List[float] = [1.0]
    pattern: Literal["direct", "curl", "gradient"] = "direct"


class ElasticConfig(BaseModel):
    lam: float = 1.0
    mu: float = 1.0
    rho: float = 1.0


class ExperimentConfig(BaseModel):
    """Configuración completa de un experimento (JSON)."""
    name: str = "experiment"
    physics: Literal["scalar", "elastic"] = "scalar"
    domain: DomainConfig = DomainConfig()
    sources: List[BumpConfig] = []
    elastic: ElasticConfig = ElasticConfig()

    # --- Resoluciones ---
    h: float = Field(1.0 / 16.0, gt=0)
    boundary_nodes: int = Field(0, ge=0)
    omega_max: Optional[float] = Field(None, gt=0)      # None => max(K_ladder)
    backward_time_factor: float = Field(1.0 + settings.HUYGENS_MARGIN, gt=0)  # T_f = factor * D / c_min

    # --- Escalera de K y ruido ---
    k_ladder: List[float] = Field(default_factory=lambda: list(settings.K_LADDER))  # unidades de 1/D
    epsilon_target: float = Field(0.0, ge=0)
    normalize: bool = True
    calibration_sources: List[List[BumpConfig]] = []    # batería de semillas; vacía => la fuente principal

    # --- Suite de cotas ---
    bound_points: int = Field(100, ge=1)
    bound_k_max: float = Field(4.0, gt=0)               # unidades de 1/D
    quadrature_nodes: int = Field(settings.GL_NODES, ge=2)
    mc_points: int = Field(20, ge=1)
    mc_walks: int = Field(100_000, ge=1)

    # --- Ejecución ---
    seed: int = Field(settings.DEFAULT_SEED, ge=0)
    output_dir: str = settings.OUTPUT_DIR

    @field_validator("k_ladder")
    @classmethod
    def ladder_positive(cls, v: List[float]) -> List[float]:
        if any(k <= 0 for k in v):
            raise ValueError("la escalera de K debe ser positiva")
        return sorted(v)

    @model_validator(mode="after")
    def check_arity(self) -> "ExperimentConfig":
        batteries = [self.sources] + list(self.calibration_sources)
        for bumps in batteries:
            for bump in bumps:
                if self.physics == "scalar":
                    if bump.pattern != "direct" or len(bump.amplitude) != 1:
                        raise ValueError("las fuentes escalares usan pattern 'direct' y una amplitud")
                elif bump.pattern == "gradient":
                    if len(bump.amplitude) != 1:
                        raise ValueError("el patrón 'gradient' usa una amplitud escalar")
                elif len(bump.amplitude) != 3:
                    raise ValueError(f"el patrón '{bump.pattern}' necesita una amplitud vectorial")
        if self.elastic.mu <= 0 or self.elastic.rho <= 0 or self.elastic.lam + self.elastic.mu <= 0:
            raise ValueError("parámetros de Lamé no elípticos")
        return self

    def config_hash(self) -> str:
        canonical = json.dumps(self.model_dump(mode="json"), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def load_config(path: str | Path) -> ExperimentConfig:
    """Lee y valida un JSON de experimento; cualquier fallo es ConfigError."""
    try:
        text = Path(path).read_text(encoding="utf-8")
        return ExperimentConfig.model_validate_json(text)
    except OSError as e:
        log.error(f"No se pudo leer la configuración {path}: {e}")
        raise ConfigError(f"configuración ilegible: {path}") from e
    except ValidationError as e:
        log.error(f"Configuración inválida {path}: {e}")
        raise ConfigError(str(e)) from e
