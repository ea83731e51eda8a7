# core/number_generator.py - seeded SplitMix64 stream for reproducible sampling
"""
Counter-based SplitMix64 generator.

The n-th output of a stream seeded with ``s`` is ``mix64(s + n * GOLDEN)``
(all arithmetic modulo 2**64), so blocks of draws are produced with numpy in
one shot and the sequence is identical on every platform and numpy version.

Constants (Steele, Lea & Flood):
    GOLDEN = 0x9E3779B97F4A7C15
    MIX1   = 0xBF58476D1CE4E5B9
    MIX2   = 0x94D049BB133111EB
with shifts 30, 27, 31.
"""
import numpy as np

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15
MIX1 = 0xBF58476D1CE4E5B9
MIX2 = 0x94D049BB133111EB

_GOLDEN_U = np.uint64(GOLDEN)
_MIX1_U = np.uint64(MIX1)
_MIX2_U = np.uint64(MIX2)
_TWO_POW_M52 = 2.0 ** -52


def mix64(z):
    """SplitMix64 finaliser on a Python int."""
    z &= MASK64
    z = ((z ^ (z >> 30)) * MIX1) & MASK64
    z = ((z ^ (z >> 27)) * MIX2) & MASK64
    return z ^ (z >> 31)


def _mix64_array(z):
    with np.errstate(over="ignore"):
        z = (z ^ (z >> np.uint64(30))) * _MIX1_U
        z = (z ^ (z >> np.uint64(27))) * _MIX2_U
        return z ^ (z >> np.uint64(31))


class NumberGenerator:
    """Caller-owned generator state; not shared between threads."""

    def __init__(self, seed=0):
        self._state = int(seed) & MASK64

    @property
    def state(self):
        return self._state

    def copy(self):
        return NumberGenerator(self._state)

    @staticmethod
    def derive_seed(base_seed, index):
        """Seed of repetition ``index``: mix64(base + (index + 1) * GOLDEN)."""
        return mix64((int(base_seed) & MASK64) + (int(index) + 1) * GOLDEN)

    def spawn(self, index):
        return NumberGenerator(self.derive_seed(self._state, index))

    def next_uint64(self, n):
        """Block of ``n`` raw 64-bit outputs; advances the state by ``n``."""
        n = int(n)
        if n <= 0:
            return np.empty(0, dtype=np.uint64)
        steps = np.arange(1, n + 1, dtype=np.uint64)
        with np.errstate(over="ignore"):
            counters = np.uint64(self._state) + steps * _GOLDEN_U
        self._state = (self._state + n * GOLDEN) & MASK64
        return _mix64_array(counters)

    def uniform(self, n):
        """``n`` doubles in the open interval (0, 1) built from the top 52 bits."""
        bits = self.next_uint64(n) >> np.uint64(12)
        return (bits.astype(np.float64) + 0.5) * _TWO_POW_M52
