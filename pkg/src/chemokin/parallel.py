"""Worker pool shared by the solvers.

Every parallel region maps independent tasks and collects the results in
submission order, so outputs do not depend on the number of threads.
"""

from __future__ import annotations

import os
from concurrent.futures import Executor, ThreadPoolExecutor
from contextlib import contextmanager

ENV_THREADS = "CHEMOKIN_THREADS"


def resolve_threads(flag: int | None = None) -> int:
    """Thread count from the ``--threads`` flag, else the environment, else 1."""
    if flag is not None:
        n = int(flag)
    else:
        raw = os.environ.get(ENV_THREADS, "").strip()
        n = int(raw) if raw else 1
    if n < 1:
        raise ValueError(f"thread count must be >= 1, got {n}")
    return n


@contextmanager
def worker_pool(threads: int):
    if threads <= 1:
        yield None
        return
    with ThreadPoolExecutor(max_workers=threads, thread_name_prefix="chemokin") as pool:
        yield pool


def pmap(pool: Executor | None, fn, items) -> list:
    items = list(items)
    if pool is None or len(items) < 2:
        return [fn(x) for x in items]
    return list(pool.map(fn, items))
