# core/tasks.py - in-process worker pool for Monte-Carlo repetitions and pair evaluations
import logging
import os
from concurrent.futures import ThreadPoolExecutor

from core.utils import env_int

logger = logging.getLogger(__name__)


def worker_count(requested=None):
    """Pool size: explicit request, else MIXBOUND_THREADS, else the CPU count."""
    if requested:
        return max(1, int(requested))
    return env_int("MIXBOUND_THREADS", os.cpu_count() or 1)


def run_ordered(fn, items, max_workers=None):
    """Apply ``fn`` to every item; results come back in input order whatever the completion order."""
    items = list(items)
    workers = min(worker_count(max_workers), max(len(items), 1))
    if workers == 1:
        return [fn(item) for item in items]
    logger.debug(f"running {len(items)} tasks on {workers} threads")
    with ThreadPoolExecutor(max_workers=workers, thread_name_prefix="mixbound") as pool:
        return list(pool.map(fn, items))
