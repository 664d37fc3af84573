# src/main.py

import asyncio
from typing import Literal, Optional

from fastapi import FastAPI, HTTPException, Response
from fastapi.middleware.cors import CORSMiddleware
from pydantic import BaseModel

from src import __version__
from src.config import settings, log
from src.core.errors import LabError
from src.models.experiment_models import ExperimentConfig
from src.models.report_models import BoundSuiteReport, ExperimentReport
from src.modules import experiment_runner
from src.modules.report_writer import bounds_to_csv, render_svg, report_filename, report_to_csv

app = FastAPI(
    title="SrcLab API",
    description="Laboratorio numérico de fuentes inversas multifrecuencia: barridos en K y verificación de cotas."
)

# --- CONFIGURACIÓN CORS ---
origins = settings.ALLOWED_ORIGINS

app.add_middleware(
    CORSMiddleware,
    allow_origins=origins,
    allow_credentials=True,
    allow_methods=["*"],
    allow_headers=["*"],
)


class DownloadRequest(BaseModel):
    """Exactamente uno de los dos informes."""
    sweep: Optional[ExperimentReport] = None
    bounds: Optional[BoundSuiteReport] = None
    file_format: Literal["csv", "json", "svg"] = "csv"


async def _run(fn, *args):
    """Trabajo bloqueante en un hilo; LabError -> 422, cualquier otra cosa -> 500."""
    try:
        return await asyncio.to_thread(fn, *args)
    except LabError as e:
        log.warning(f"Petición rechazada: {e}")
        raise HTTPException(status_code=422, detail=str(e))
    except Exception as e:
        log.error(f"Error interno en {getattr(fn, '__name__', fn)}: {e}", exc_info=True)
        raise HTTPException(status_code=500, detail="Error interno del laboratorio.")


# --- ENDPOINTS ---
@app.get("/status", tags=["Status"])
def read_status():
    return {"status": "ok", "version": __version__}


@app.post("/experiments/sweep-k", response_model=ExperimentReport, tags=["Experiments"])
async def sweep_k_handler(config: ExperimentConfig):
    log.info(f"sweep-k solicitado: '{config.name}' ({config.physics})")
    return await _run(experiment_runner.run_sweep, config)


@app.post("/experiments/verify-bounds", response_model=BoundSuiteReport, tags=["Experiments"])
async def verify_bounds_handler(config: ExperimentConfig):
    log.info(f"verify-bounds solicitado: '{config.name}' ({config.physics})")
    return await _run(experiment_runner.verify_bounds, config)


@app.post("/download-report", tags=["Reports"])
async def download_report(request: DownloadRequest):
    """Devuelve el informe como adjunto CSV, JSON o SVG."""
    report = request.sweep if request.sweep is not None else request.bounds
    if report is None:
        raise HTTPException(400, "Falta el informe (sweep o bounds).")
    fmt = request.file_format
    if fmt == "svg" and not isinstance(report, ExperimentReport):
        raise HTTPException(400, "El SVG sólo existe para informes de barrido en K.")
    try:
        if fmt == "csv":
            text = report_to_csv(report) if isinstance(report, ExperimentReport) else bounds_to_csv(report)
            content, mime = text.encode("utf-8"), "text/csv"
        elif fmt == "json":
            content, mime = report.model_dump_json(indent=2).encode("utf-8"), "application/json"
        else:
            content, mime = await asyncio.to_thread(render_svg, report), "image/svg+xml"
        fname = report_filename(report, fmt)
        return Response(content=content, media_type=mime, headers={"Content-Disposition": f"attachment; filename={fname}"})
    except Exception as e:
        log.error(f"Error generando el informe: {e}", exc_info=True)
        raise HTTPException(500, f"Error generando archivo: {e}")
