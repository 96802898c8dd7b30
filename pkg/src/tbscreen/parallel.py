"""Worker-pool helper for fold/grid/candidate parallelism.

Results always come back in submission order, so a parallel run reduces
to exactly the same numbers as a serial one.
"""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from typing import Callable, Iterable


def default_workers() -> int:
    return os.cpu_count() or 1


def parallel_map(fn: Callable, items: Iterable, workers: int = 1) -> list:
    items = list(items)
    if workers <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ProcessPoolExecutor(max_workers=min(workers, len(items))) as pool:
        return list(pool.map(fn, items))
