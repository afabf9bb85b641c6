import os
from concurrent.futures import ProcessPoolExecutor
from typing import Callable, List, Optional, Sequence, TypeVar

from app.core.logging import logger

T = TypeVar("T")
R = TypeVar("R")


def default_workers() -> int:
    return os.cpu_count() or 1


def split_bands(total: int, bands: int) -> List[slice]:
    """Split range(total) into at most `bands` contiguous slices."""
    bands = max(1, min(bands, total))
    edges = [round(i * total / bands) for i in range(bands + 1)]
    return [slice(edges[i], edges[i + 1]) for i in range(bands) if edges[i] < edges[i + 1]]


def run_chunks(fn: Callable[[T], R], chunks: Sequence[T], workers: Optional[int] = None) -> List[R]:
    """
    Apply `fn` to every chunk and return the results in chunk order.

    With one worker (or one chunk) everything runs in-process. Results never
    depend on the worker count because each chunk is computed independently
    and merged by position.
    """
    workers = workers or default_workers()
    if workers <= 1 or len(chunks) <= 1:
        return [fn(chunk) for chunk in chunks]

    logger.debug(f"Dispatching {len(chunks)} chunks to {workers} workers")
    with ProcessPoolExecutor(max_workers=min(workers, len(chunks))) as pool:
        return list(pool.map(fn, chunks))
