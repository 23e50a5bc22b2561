"""Optional per-item fan-out, capped by the TSVIZ_THREADS environment variable."""
import os
from concurrent.futures import ThreadPoolExecutor


def max_threads():
    try:
        return max(1, int(os.environ.get("TSVIZ_THREADS", "1")))
    except ValueError:
        return 1


def parallel_map(fn, items):
    """``list(map(fn, items))``, threaded when TSVIZ_THREADS > 1; order preserved."""
    n = max_threads()
    if n == 1 or len(items) < 2:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items))
