# src/modules/report_writer.py
#
# Emisión de informes: CSV (columnas fijas), JSON (metadatos completos) y SVG estático.
# Salida determinista: sin marcas de tiempo en los ficheros, SVG con sal de hash fija.

import csv
import io
import re
import unicodedata
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Union

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from src.config import log
from src.core.errors import StorageError
from src.models.report_models import BOUND_COLUMNS, REPORT_COLUMNS, BoundSuiteReport, ExperimentReport

FORMATS = ("csv", "json", "svg")
Report = Union[ExperimentReport, BoundSuiteReport]

matplotlib.rcParams["svg.hashsalt"] = "srclab"


def report_filename(report: Report, extension: str) -> str:
    """Nombre de descarga ASCII y reproducible: <nombre>_<física>[_<hash8>].<ext>"""
    ascii_name = unicodedata.normalize("NFKD", report.name).encode("ascii", "ignore").decode()
    stem = re.sub(r"[^A-Za-z0-9.-]+", "_", ascii_name[:48]).strip("._") or "informe"
    parts = [stem, report.physics] + ([report.config_hash[:8]] if report.config_hash else [])
    return f"{'_'.join(parts)}.{extension}"


def _cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _csv(columns: Sequence[str], rows: Iterable[Dict]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_cell(row.get(c)) for c in columns])
    return buf.getvalue()


def report_to_csv(report: ExperimentReport) -> str:
    """Una fila por K, columnas en orden fijo."""
    return _csv(REPORT_COLUMNS, (r.model_dump() for r in report.rows))


def bounds_to_csv(report: BoundSuiteReport) -> str:
    rows = []
    for r in report.rows:
        d = r.model_dump()
        d["pass"] = d.pop("passed")
        rows.append(d)
    return _csv(BOUND_COLUMNS, rows)


def parse_csv(text: str) -> List[Dict[str, Optional[float]]]:
    """Relectura numérica del CSV de filas (celdas vacías = None)."""
    out = []
    for row in csv.DictReader(io.StringIO(text)):
        out.append({k: (float(v) if v != "" else None) for k, v in row.items()})
    return out


def render_svg(report: ExperimentReport) -> bytes:
    """log(error) frente a K con el techo teórico superpuesto."""
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    ok = [r for r in report.rows if r.status == "ok" and r.err_l2_f0 is not None]
    if ok:
        ks = [r.K for r in ok]
        ax.plot(ks, [r.err_l2_f0 for r in ok], "o-", label="err_l2_f0")
        if all(r.err_hm1_f1 is not None for r in ok):
            ax.plot(ks, [r.err_hm1_f1 for r in ok], "s-", label="err_hm1_f1")
        ceil = [(r.K, r.ceiling) for r in ok if r.ceiling is not None]
        if ceil:
            ax.plot([c[0] for c in ceil], [c[1] for c in ceil], "k--", label="techo")
        if all(r.err_l2_f0 > 0 for r in ok):
            ax.set_xscale("log")
            ax.set_yscale("log")
        ax.legend()
    ax.set_xlabel("K·D")
    ax.set_ylabel("error")
    ax.set_title(report.name)
    buf = io.BytesIO()
    fig.savefig(buf, format="svg", metadata={"Date": None})
    plt.close(fig)
    return buf.getvalue()


def emit_report(report: Report, out_dir: Union[str, Path], formats: Sequence[str] = FORMATS,
                stem: Optional[str] = None) -> List[Path]:
    """Escribe los formatos pedidos en out_dir; StorageError si la ruta no es escribible."""
    unknown = set(formats) - set(FORMATS)
    if unknown:
        raise StorageError(f"formatos desconocidos: {sorted(unknown)}")
    out = Path(out_dir)
    stem = stem or report.name
    written = []
    try:
        out.mkdir(parents=True, exist_ok=True)
        for fmt in formats:
            path = out / f"{stem}.{fmt}"
            if fmt == "csv":
                text = report_to_csv(report) if isinstance(report, ExperimentReport) else bounds_to_csv(report)
                path.write_text(text, encoding="utf-8")
            elif fmt == "json":
                path.write_text(report.model_dump_json(indent=2), encoding="utf-8")
            elif isinstance(report, ExperimentReport):
                path.write_bytes(render_svg(report))
            else:
                continue
            written.append(path)
    except OSError as e:
        log.error(f"No se pudo escribir el informe en {out}: {e}", exc_info=True)
        raise StorageError(f"ruta de salida no escribible: {out}") from e
    log.info(f"Informe '{report.name}' emitido: {', '.join(p.name for p in written)}")
    return written
