# src/models/report_models.py

from typing import Any, Dict, List, Literal, Optional

from pydantic import BaseModel

from src.models.experiment_models import ExperimentConfig

REPORT_COLUMNS = [
    "K", "epsilon", "E", "k_trunc", "err_l2_f0", "err_hm1_f1",
    "err_h1_f0", "err_l2_f1", "ceiling", "wall_s",
]
BOUND_COLUMNS = ["functional", "k_re", "k_im", "value", "bound", "ratio", "pass"]


class ReportRow(BaseModel):
    """Una fila por K. Los errores son normas absolutas de la diferencia con la verdad."""
    K: float
    epsilon: Optional[float] = None
    E: Optional[float] = None
    k_trunc: Optional[float] = None
    err_l2_f0: Optional[float] = None
    err_hm1_f1: Optional[float] = None
    err_h1_f0: Optional[float] = None
    err_l2_f1: Optional[float] = None
    ceiling: Optional[float] = None
    wall_s: float = 0.0
    status: Literal["ok", "failed"] = "ok"
    error: Optional[str] = None
    config_hash: str = ""
    code_version: str = ""


class TrendStats(BaseModel):
    monotone_nonincreasing: bool = True
    max_relative_increase: float = 0.0
    below_ceiling: bool = True
    noise_floor: Optional[float] = None
    plateau_ratio: Optional[float] = None


class ExperimentReport(BaseModel):
    """Resultado de run_sweep.

    Las normas M de las fuentes son las verdaderas (experimento sintético): es más
    información de la que tendría un usuario real.
    """
    name: str = "experiment"
    physics: Literal["scalar", "elastic"] = "scalar"
    config: Optional[ExperimentConfig] = None
    config_hash: str = ""
    code_version: str = ""
    diameter: float = 0.0
    normalization: float = 1.0
    source_norms: Dict[str, float] = {}
    calibration_constant: Optional[float] = None
    observability_constant: Optional[float] = None
    rows: List[ReportRow] = []
    trend: TrendStats = TrendStats()


class BoundCheckRow(BaseModel):
    functional: str
    k_re: float
    k_im: float = 0.0
    value: float
    bound: float
    ratio: Optional[float] = None
    passed: bool


class CheckResult(BaseModel):
    name: str
    value: Optional[float] = None
    threshold: Optional[float] = None
    passed: bool
    detail: Dict[str, Any] = {}


class BoundSuiteReport(BaseModel):
    name: str = "bounds"
    physics: Literal["scalar", "elastic"] = "scalar"
    config_hash: str = ""
    code_version: str = ""
    calibration: Dict[str, float] = {}
    rows: List[BoundCheckRow] = []
    checks: List[CheckResult] = []

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.rows) and all(c.passed for c in self.checks)
