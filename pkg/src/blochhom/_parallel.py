"""Thread pool sized by the BLOCHHOM_THREADS environment variable."""
import os
from concurrent.futures import ThreadPoolExecutor


def thread_count() -> int:
    try:
        return max(1, int(os.environ.get("BLOCHHOM_THREADS", "1")))
    except ValueError:
        return 1


def pmap(fn, items):
    """Ordered map, threaded when more than one worker is configured."""
    items = list(items)
    workers = thread_count()
    if workers == 1 or len(items) < 2:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))
