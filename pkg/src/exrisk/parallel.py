"""Order-preserving parallel map used for Monte Carlo trials."""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor

THREADS_ENV = "EXRISK_THREADS"


def default_threads() -> int:
    try:
        return max(1, int(os.environ.get(THREADS_ENV, "1")))
    except ValueError:
        return 1


def parallel_map(fn, items, threads: int | None = None) -> list:
    """``[fn(i) for i in items]``, computed on a thread pool when ``threads > 1``.

    Results are returned in input order, so reductions over them do not
    depend on completion order.
    """
    threads = default_threads() if threads is None else threads
    items = list(items)
    if threads <= 1 or len(items) <= 1:
        return [fn(i) for i in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))
