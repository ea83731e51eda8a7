from core.cache import cache_stats, clear_caches, memoize

calls = []


@memoize(maxsize=2)
def square(x):
    calls.append(x)
    return x * x


def test_repeated_arguments_hit_the_cache():
    calls.clear()
    assert [square(3), square(3), square(4)] == [9, 9, 16]
    assert calls == [3, 4]
    stats = cache_stats()["square"]
    assert stats["hits"] == 1 and stats["misses"] == 2


def test_least_recently_used_entry_is_evicted():
    calls.clear()
    for x in (1, 2, 3, 1):
        square(x)
    assert calls == [1, 2, 3, 1]
    assert cache_stats()["square"]["currsize"] == 2


def test_clear_caches_empties_every_registered_function():
    calls.clear()
    square(5)
    clear_caches()
    square(5)
    assert calls == [5, 5]
    assert cache_stats()["square"]["hits"] == 0
