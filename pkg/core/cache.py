# core/cache.py - memoisation for partitions and envelope integrals
import logging
import threading

from cachetools import LRUCache, cached

logger = logging.getLogger(__name__)

_registry = []


def memoize(maxsize=256):
    """LRU memoisation that ``clear_caches`` empties in one call; arguments must be hashable (frozen mixtures)."""
    def decorator(fn):
        wrapper = cached(LRUCache(maxsize=maxsize), lock=threading.Lock(), info=True)(fn)
        _registry.append(wrapper)
        return wrapper
    return decorator


def clear_caches():
    for fn in _registry:
        fn.cache_clear()
    logger.debug(f"cleared {len(_registry)} caches")


def cache_stats():
    return {fn.__wrapped__.__qualname__: fn.cache_info()._asdict() for fn in _registry}
