"""Thread-pool helpers with deterministic, partition-independent results.

Work is always split into fixed-size chunks (independent of the thread
count) and results are merged in submission order, so outputs are bitwise
identical for any ``IAPI_THREADS`` setting.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Sequence, TypeVar

T = TypeVar("T")
R = TypeVar("R")

CHUNK_ROWS = 1024  # fixed partition size; never derived from the thread count


def thread_count() -> int:
    """Worker count from IAPI_THREADS; 0 or unset means auto (cpu count)."""
    raw = os.environ.get("IAPI_THREADS", "0").strip()
    try:
        n = int(raw) if raw else 0
    except ValueError:
        raise ValueError(f"IAPI_THREADS must be an integer, got {raw!r}") from None
    if n <= 0:
        return os.cpu_count() or 1
    return n


def ordered_map(fn: Callable[[T], R], items: Sequence[T]) -> list[R]:
    """Apply ``fn`` to every item, possibly concurrently, preserving order."""
    n = thread_count()
    if n <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items))


def chunk_slices(total: int) -> list[slice]:
    """Fixed-size row partition of ``range(total)``."""
    return [slice(i, min(i + CHUNK_ROWS, total)) for i in range(0, total, CHUNK_ROWS)]
