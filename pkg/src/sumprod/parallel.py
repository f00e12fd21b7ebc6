"""Range partitioning and an order-preserving process map."""

from __future__ import annotations

import multiprocessing as mp
import os
from concurrent.futures import ProcessPoolExecutor
from typing import Callable, Iterable, TypeVar

T = TypeVar("T")
R = TypeVar("R")


def default_workers() -> int:
    return os.cpu_count() or 1


def split_range(total: int, parts: int) -> list[tuple[int, int]]:
    """Split ``[0, total)`` into at most ``parts`` contiguous, near-equal intervals."""
    parts = max(1, min(parts, total)) if total else 1
    step, extra = divmod(total, parts)
    out, lo = [], 0
    for i in range(parts):
        hi = lo + step + (i < extra)
        out.append((lo, hi))
        lo = hi
    return out


def run_chunks(fn: Callable[[T], R], chunks: Iterable[T], workers: int = 1) -> list[R]:
    """Apply ``fn`` to each chunk; results come back in chunk order so merges
    stay deterministic regardless of ``workers``."""
    chunks = list(chunks)
    if workers <= 1 or len(chunks) < 2:
        return [fn(c) for c in chunks]
    ctx = mp.get_context("fork") if "fork" in mp.get_all_start_methods() else None
    with ProcessPoolExecutor(max_workers=min(workers, len(chunks)), mp_context=ctx) as pool:
        return list(pool.map(fn, chunks))
