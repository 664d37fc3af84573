# src/config.py

import logging
import json
from typing import List, Union
import google.cloud.logging
from pydantic import field_validator
from pydantic_settings import BaseSettings, SettingsConfigDict

# --- Logging: Google Cloud si hay credenciales, stderr si no ---
try:
    client = google.cloud.logging.Client()
    client.setup_logging()
except Exception:
    logging.basicConfig(format="%(asctime)s %(levelname)s %(name)s: %(message)s")

log = logging.getLogger("srclab")


class Settings(BaseSettings):
    model_config = SettingsConfigDict(env_file='.env', env_file_encoding='utf-8', extra='ignore')

    LOG_LEVEL: str = "INFO"

    # --- Discretización ---
    STANDOFF_CELLS: int = 2            # separación supp f / ∂Ω en celdas
    EMBEDDING_FACTOR: int = 2          # caja periódica >= 2x la extensión de Ω
    GAUSSIAN_CUTOFF: float = 5.0       # las gaussianas se truncan a 5 anchos
    BOUNDARY_NODES: int = 0            # 0 => derivado de h (área / h²)

    # --- Núcleo elástico ---
    THETA_SWITCH: float = 1e-2
    SERIES_TOL: float = 1e-18
    SERIES_MAX_TERMS: int = 60

    # --- Funcionales espectrales ---
    GL_NODES: int = 64
    CALIBRATION_SAFETY: float = 1.5
    EPSILON_FLOOR: float = 1e-8

    # --- Medida armónica (walk-on-spheres) ---
    WOS_SHELL_FACTOR: float = 1e-4
    WOS_MAX_STEPS: int = 20000
    WOS_CHUNK: int = 4096

    # --- Síntesis temporal y solvers ---
    WINDOW_FACTOR: float = 4.0         # T_total = 4 D / c_min
    CFL_FACTOR: float = 0.9
    HUYGENS_MARGIN: float = 0.1        # T_f = (1 + margen) D / c_min

    # --- Umbrales de verificación ---
    DUALITY_TOL_SCALAR: float = 0.02
    DUALITY_TOL_ELASTIC: float = 0.03
    HUYGENS_TOL_SCALAR: float = 1e-3
    HUYGENS_TOL_ELASTIC: float = 1e-2

    # --- Ejecución ---
    DEFAULT_SEED: int = 20180521
    THREADS: int = 1
    CHUNK_SIZE: int = 16               # nodos por tarea; fijo => resultados idénticos con cualquier nº de hilos
    OUTPUT_DIR: str = "out"
    REPORT_TIMINGS: bool = True
    K_LADDER: Union[str, List[float]] = '[2, 4, 8, 16, 32]'   # en unidades de 1/D

    # --- HTTP ---
    ALLOWED_ORIGINS: Union[str, List[str]] = '["http://localhost", "http://localhost:8080"]'

    # --- VALIDADORES ---
    @field_validator('ALLOWED_ORIGINS', mode='before')
    @classmethod
    def parse_json_list(cls, v: Union[str, List[str]]) -> List[str]:
        if isinstance(v, list):
            return [str(item).strip().lower() for item in v]
        if isinstance(v, str) and v.strip():
            try:
                parsed = json.loads(v)
                if isinstance(parsed, list):
                    return [str(item).strip().lower() for item in parsed]
            except json.JSONDecodeError:
                log.error(f"Error decodificando configuración JSON: {v}")
                return []
        return []

    @field_validator('K_LADDER', mode='before')
    @classmethod
    def parse_json_floats(cls, v: Union[str, List[float]]) -> List[float]:
        if isinstance(v, list):
            return [float(item) for item in v]
        if isinstance(v, str) and v.strip():
            try:
                parsed = json.loads(v)
                if isinstance(parsed, list):
                    return [float(item) for item in parsed]
            except (json.JSONDecodeError, TypeError, ValueError):
                log.error(f"Error decodificando escalera de K: {v}")
        return [2.0, 4.0, 8.0, 16.0, 32.0]


settings = Settings()
log.setLevel(settings.LOG_LEVEL)
