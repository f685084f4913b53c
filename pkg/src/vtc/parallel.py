import os
from concurrent.futures import ThreadPoolExecutor


def worker_count(requested: int | None = None) -> int:
    """Resolve a worker count; VTC_THREADS caps it (0 or unset means auto)."""
    auto = os.cpu_count() or 1
    env = os.environ.get("VTC_THREADS", "").strip()
    cap = int(env) if env else 0
    if cap < 0:
        raise ValueError("VTC_THREADS must be >= 0")
    n = requested if requested and requested > 0 else auto
    if cap:
        n = min(n, cap)
    return max(1, n)


def ordered_map(fn, items, workers: int | None = None) -> list:
    """map() over items, possibly threaded; output order always follows input."""
    items = list(items)
    n = worker_count(workers)
    if n == 1 or len(items) < 2:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=min(n, len(items))) as pool:
        return list(pool.map(fn, items))
