# src/core/parallel.py

from concurrent.futures import ThreadPoolExecutor
from typing import Callable, List, Sequence, TypeVar

from src.config import settings

T = TypeVar("T")
R = TypeVar("R")


def chunk_ranges(n: int, chunk: int | None = None) -> List[range]:
    """Particiona [0, n) en bloques de tamaño fijo.

    El tamaño no depende del número de hilos: cada bloque se calcula siempre con
    los mismos operandos y el resultado es idéntico bit a bit con 1 o N hilos.
    """
    size = max(1, chunk or settings.CHUNK_SIZE)
    return [range(i, min(i + size, n)) for i in range(0, n, size)]


def ordered_map(fn: Callable[[T], R], items: Sequence[T], threads: int | None = None) -> List[R]:
    """Mapa paralelo que conserva el orden de entrada."""
    workers = max(1, threads or settings.THREADS)
    if workers == 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))
