# src/modules/sweep_store.py
#
# Contenedor binario local para barridos, trazas y snapshots (sustituye al almacén remoto).
#
#   magic  b"SRCLAB01" | kind (8 bytes ascii) | 4 x uint64 LE (filas, columnas, aridad, complejo)
#   cuerpo float64 LE (re/im intercalados si es complejo)
#
# Cada contenedor lleva un sidecar JSON con los ejes (frecuencia o tiempo) y metadatos.
# La malla de frontera viaja en un contenedor propio "<nombre>.mesh.bin".

import json
import struct
from pathlib import Path
from typing import Any, Dict, Optional, Tuple

import numpy as np

from src.config import log
from src.core.errors import StorageError
from src.modules.domain_model import BoundaryMesh
from src.modules.helmholtz_forward import FrequencyGrid, FrequencySweep
from src.modules.time_synthesis import TimeTrace

MAGIC = b"SRCLAB01"
KINDS = ("SWEEP", "TRACE", "SNAPSHOT", "MESH")
HEADER = struct.Struct("<8s8s4Q")


def _sidecar(path: Path) -> Path:
    return path.with_suffix(".json")


def _mesh_path(path: Path) -> Path:
    return path.with_name(path.stem + ".mesh.bin")


def write_container(path, kind: str, array: np.ndarray, meta: Dict[str, Any]) -> Path:
    """Escribe array (filas, columnas[, aridad]) y su sidecar."""
    if kind not in KINDS:
        raise StorageError(f"tipo de contenedor desconocido: {kind}")
    path = Path(path)
    array = np.asarray(array)
    rows, cols = array.shape[0], array.shape[1] if array.ndim > 1 else 1
    arity = array.shape[2] if array.ndim > 2 else 1
    is_complex = np.iscomplexobj(array)
    body = array.astype("<c16" if is_complex else "<f8", copy=False)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("wb") as fh:
            fh.write(HEADER.pack(MAGIC, kind.ljust(8).encode("ascii"), rows, cols, arity, int(is_complex)))
            fh.write(np.ascontiguousarray(body).tobytes())
        _sidecar(path).write_text(json.dumps({"kind": kind, **meta}, indent=2, sort_keys=True), encoding="utf-8")
    except OSError as e:
        log.error(f"No se pudo escribir el contenedor {path}: {e}", exc_info=True)
        raise StorageError(f"no se pudo escribir {path}: {e}") from e
    return path


def read_container(path, kind: Optional[str] = None) -> Tuple[np.ndarray, Dict[str, Any]]:
    path = Path(path)
    try:
        raw = path.read_bytes()
        meta = json.loads(_sidecar(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as e:
        raise StorageError(f"no se pudo leer {path}: {e}") from e
    if len(raw) < HEADER.size:
        raise StorageError(f"{path}: cabecera truncada")
    magic, raw_kind, rows, cols, arity, is_complex = HEADER.unpack_from(raw)
    found = raw_kind.decode("ascii").strip()
    if magic != MAGIC:
        raise StorageError(f"{path}: no es un contenedor válido")
    if kind is not None and found != kind:
        raise StorageError(f"{path}: se esperaba {kind} y contiene {found}")
    dtype = np.dtype("<c16" if is_complex else "<f8")
    count = rows * cols * arity
    if len(raw) - HEADER.size != count * dtype.itemsize:
        raise StorageError(f"{path}: tamaño del cuerpo inconsistente con la cabecera")
    data = np.frombuffer(raw, dtype=dtype, offset=HEADER.size, count=count).astype(complex if is_complex else float)
    shape = (rows, cols) + ((arity,) if arity > 1 else ())
    return data.reshape(shape), meta


# --- MALLA ---

def save_mesh(path, mesh: BoundaryMesh) -> Path:
    packed = np.concatenate(
        [mesh.nodes, mesh.normals, mesh.weights[:, None], mesh.tangents.reshape(mesh.size, 6)], axis=1
    )
    return write_container(path, "MESH", packed, {"nodes": mesh.size, "area": mesh.area})


def load_mesh(path) -> BoundaryMesh:
    packed, _ = read_container(path, "MESH")
    if packed.shape[1] != 13:
        raise StorageError(f"{path}: malla con {packed.shape[1]} columnas")
    return BoundaryMesh(nodes=packed[:, :3].copy(), normals=packed[:, 3:6].copy(),
                        weights=packed[:, 6].copy(), tangents=packed[:, 7:].reshape(-1, 2, 3).copy())


# --- BARRIDOS Y TRAZAS ---

def save_sweep(path, sweep: FrequencySweep, config_hash: str = "") -> Path:
    """La columna ω = 0 va primero; los gradientes tangenciales no se persisten."""
    path = Path(path)
    save_mesh(_mesh_path(path), sweep.mesh)
    _, values = sweep.full_band()
    meta = {"d_omega": sweep.grid.d_omega, "count": sweep.grid.count, "zero_mode_first": True,
            "mesh": _mesh_path(path).name, "config_hash": config_hash}
    log.info(f"Guardando barrido {values.shape} en {path}")
    return write_container(path, "SWEEP", values.astype(complex), meta)


def load_sweep(path) -> FrequencySweep:
    path = Path(path)
    values, meta = read_container(path, "SWEEP")
    try:
        grid = FrequencyGrid(float(meta["d_omega"]), int(meta["count"]))
        mesh = load_mesh(path.with_name(meta["mesh"]))
    except KeyError as e:
        raise StorageError(f"{path}: sidecar sin el campo {e}") from e
    if values.shape[1] != grid.count + 1 or values.shape[0] != mesh.size:
        raise StorageError(f"{path}: dimensiones {values.shape} no casan con la rejilla o la malla")
    return FrequencySweep(values=values[:, 1:], zero_mode=values[:, 0].real, grid=grid, mesh=mesh)


def save_trace(path, trace: TimeTrace, config_hash: str = "") -> Path:
    path = Path(path)
    save_mesh(_mesh_path(path), trace.mesh)
    meta = {"dt": trace.dt, "n_t": trace.n_t, "t_total": trace.t_total, "mesh": _mesh_path(path).name,
            "config_hash": config_hash, "trace_meta": trace.meta}
    return write_container(path, "TRACE", trace.values, meta)


def load_trace(path) -> TimeTrace:
    path = Path(path)
    values, meta = read_container(path, "TRACE")
    try:
        mesh = load_mesh(path.with_name(meta["mesh"]))
        return TimeTrace(values=values, dt=float(meta["dt"]), mesh=mesh, meta=dict(meta.get("trace_meta", {})))
    except KeyError as e:
        raise StorageError(f"{path}: sidecar sin el campo {e}") from e


def save_snapshot(path, field: np.ndarray, t: float, h: float, origin) -> Path:
    """Volumen (nx, ny, nz[, 3]) aplanado a (nx, ny·nz[, 3])."""
    field = np.asarray(field)
    shape = field.shape[:3]
    flat = field.reshape((shape[0], shape[1] * shape[2]) + field.shape[3:])
    return write_container(path, "SNAPSHOT", flat, {"t": t, "h": h, "shape": list(shape),
                                                    "origin": [float(o) for o in origin]})


def load_snapshot(path) -> Tuple[np.ndarray, Dict[str, Any]]:
    flat, meta = read_container(path, "SNAPSHOT")
    shape = tuple(meta["shape"])
    return flat.reshape(shape + flat.shape[2:]), meta
