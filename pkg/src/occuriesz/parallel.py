"""Replication-level parallel map.

Work items carry their own stream keys, so results do not depend on worker
count or scheduling order; the reduce step keeps submission order.
"""

from concurrent.futures import ProcessPoolExecutor


def parallel_map(fn, items, workers: int = 1):
    items = list(items)
    if workers <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))
