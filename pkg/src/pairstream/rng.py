"""Counter-based SplitMix64 random source.

Every stochastic routine in the package draws from :class:`RandomSource`
so that runs are bit-reproducible across platforms. The k-th output
(k = 1, 2, ...) of a source seeded with ``seed`` is::

    mix64(seed + k * GOLDEN_GAMMA  mod 2**64)

which is exactly the SplitMix64 output sequence. Because the output is a
pure function of (seed, counter), a block of draws can be produced with
numpy and is identical to the same number of scalar draws.

Mappings from a raw 64-bit word ``u``:

* ``uniform``   -> ``(u >> 11) * 2**-53``, in [0, 1)
* ``below(n)``  -> ``((u >> 32) * n) >> 32``, in [0, n) for 1 <= n <= 2**32
* ``bernoulli`` -> ``uniform < p``
* ``sign``      -> ``+1`` if the top bit is set, else ``-1``
* ``normal``    -> Box-Muller, two uniforms per pair of normals
"""

from __future__ import annotations

import math

import numpy as np

MASK64 = (1 << 64) - 1
GOLDEN_GAMMA = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB
_SPAWN = 0xD1B54A32D192ED03

_U64 = np.uint64


def mix64(z: int) -> int:
    """SplitMix64 finalizer on a Python int."""
    z &= MASK64
    z = ((z ^ (z >> 30)) * _MIX1) & MASK64
    z = ((z ^ (z >> 27)) * _MIX2) & MASK64
    return z ^ (z >> 31)


def mix64_array(z: np.ndarray) -> np.ndarray:
    """Vectorized :func:`mix64`; ``z`` must be a uint64 array."""
    z = np.asarray(z, dtype=_U64)
    z = (z ^ (z >> _U64(30))) * _U64(_MIX1)
    z = (z ^ (z >> _U64(27))) * _U64(_MIX2)
    return z ^ (z >> _U64(31))


def derive_seed(master: int, index: int) -> int:
    """Seed of the ``index``-th child stream of ``master``."""
    return mix64((master & MASK64) ^ mix64((index + 1) * _SPAWN))


def uniform_from_words(u: np.ndarray) -> np.ndarray:
    """Map raw words to doubles in [0, 1)."""
    return (u >> _U64(11)).astype(np.float64) * 2.0**-53


def below_from_words(u: np.ndarray, n) -> np.ndarray:
    """Map raw words to integers in [0, n)."""
    return (((u >> _U64(32)) * np.asarray(n, dtype=_U64)) >> _U64(32)).astype(np.int64)


def sign_from_words(u: np.ndarray) -> np.ndarray:
    """Map raw words to +1 (top bit set) or -1."""
    return np.where(u >> _U64(63), 1.0, -1.0)


class RandomSource:
    """Seeded stream of 64-bit words with documented derived distributions.

    Not safe to share between threads; give each concurrent trial its own
    source via :meth:`spawn`.
    """

    def __init__(self, seed: int = 0):
        if seed < 0:
            raise ValueError("seed must be a non-negative 64-bit integer")
        self.seed = int(seed) & MASK64
        self.counter = 0

    def __repr__(self) -> str:
        return f"RandomSource(seed={self.seed}, counter={self.counter})"

    def spawn(self, index: int) -> "RandomSource":
        return RandomSource(derive_seed(self.seed, index))

    # raw words

    def next_u64(self) -> int:
        self.counter += 1
        return mix64(self.seed + self.counter * GOLDEN_GAMMA)

    def u64s(self, size: int) -> np.ndarray:
        k = np.arange(self.counter + 1, self.counter + 1 + size, dtype=_U64)
        self.counter += size
        return mix64_array(_U64(self.seed) + k * _U64(GOLDEN_GAMMA))

    # scalar draws

    def uniform(self) -> float:
        return (self.next_u64() >> 11) * 2.0**-53

    def below(self, n: int) -> int:
        if not 1 <= n <= 1 << 32:
            raise ValueError(f"bound must lie in [1, 2**32], got {n}")
        return ((self.next_u64() >> 32) * n) >> 32

    def bernoulli(self, p: float) -> bool:
        return self.uniform() < p

    # block draws, identical to repeated scalar draws

    def uniforms(self, size: int) -> np.ndarray:
        return uniform_from_words(self.u64s(size))

    def belows(self, n: int, size: int) -> np.ndarray:
        if not 1 <= n <= 1 << 32:
            raise ValueError(f"bound must lie in [1, 2**32], got {n}")
        return below_from_words(self.u64s(size), n)

    def bernoullis(self, p: float, size: int) -> np.ndarray:
        return self.uniforms(size) < p

    def signs(self, size: int) -> np.ndarray:
        return sign_from_words(self.u64s(size))

    def normals(self, size: int) -> np.ndarray:
        """Standard normals by Box-Muller; consumes ``2 * ceil(size / 2)`` words."""
        pairs = (size + 1) // 2
        u = self.uniforms(2 * pairs)
        u1, u2 = u[0::2], u[1::2]
        r = np.sqrt(-2.0 * np.log1p(-u1))  # 1 - u1 lies in (0, 1]
        z = np.empty(2 * pairs)
        z[0::2] = r * np.cos(2.0 * math.pi * u2)
        z[1::2] = r * np.sin(2.0 * math.pi * u2)
        return z[:size]


class BatchRandom:
    """Many independent :class:`RandomSource` streams advanced in lockstep.

    Trial ``j`` replays ``RandomSource(seeds[j])`` exactly; each call draws
    one word for every trial selected by ``mask`` (all trials by default)
    and advances only those counters.
    """

    def __init__(self, seeds):
        self.seeds = np.asarray(seeds, dtype=_U64)
        self.counters = np.zeros(self.seeds.shape, dtype=_U64)

    @classmethod
    def spawned(cls, master: int, trials: int) -> "BatchRandom":
        """Trial ``j`` uses ``RandomSource(master).spawn(j)``."""
        idx = np.arange(1, trials + 1, dtype=_U64)
        return cls(mix64_array(_U64(master & MASK64) ^ mix64_array(idx * _U64(_SPAWN))))

    def __len__(self) -> int:
        return len(self.seeds)

    def u64(self, mask=None) -> np.ndarray:
        if mask is None:
            self.counters += _U64(1)
            return mix64_array(self.seeds + self.counters * _U64(GOLDEN_GAMMA))
        idx = np.flatnonzero(mask)
        self.counters[idx] += _U64(1)
        return mix64_array(self.seeds[idx] + self.counters[idx] * _U64(GOLDEN_GAMMA))

    def uniform(self, mask=None) -> np.ndarray:
        return uniform_from_words(self.u64(mask))

    def below(self, n, mask=None) -> np.ndarray:
        return below_from_words(self.u64(mask), n)

    def bernoulli(self, p: float, mask=None) -> np.ndarray:
        return self.uniform(mask) < p
