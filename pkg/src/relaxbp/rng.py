"""SplitMix64 pseudo-random stream.

Every seeded artifact in this package (model generators, queue sampling,
adversary randomness) draws from this one generator so that instances are
reproducible across machines and across reimplementations in other
languages. The compiled helpers operate on a one-element uint64 state array
so they can be shared by kernels.
"""
import numpy as np
from numba import njit

_GAMMA = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_U53 = 1.0 / 9007199254740992.0  # 2**-53


def prng_next(state):
    """One SplitMix64 step. Returns (output, next_state), both 64-bit ints."""
    state = (int(state) + 0x9E3779B97F4A7C15) & 0xFFFFFFFFFFFFFFFF
    z = state
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & 0xFFFFFFFFFFFFFFFF
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & 0xFFFFFFFFFFFFFFFF
    return z ^ (z >> 31), state


class SplitMix64:
    """Stateful wrapper around prng_next."""

    def __init__(self, seed):
        self.state = int(seed) & 0xFFFFFFFFFFFFFFFF

    def next_u64(self):
        out, self.state = prng_next(self.state)
        return out

    def next_unit(self):
        """Uniform float in [0, 1) with 53 random bits."""
        return (self.next_u64() >> 11) * _U53

    def next_uniform(self, lo, hi):
        return lo + self.next_unit() * (hi - lo)

    def next_below(self, n):
        """Uniform integer in [0, n)."""
        return self.next_u64() % n


@njit(cache=True)
def next_u64(st, i):
    """Advance lane i of the uint64 state array and return the output."""
    s = st[i] + _GAMMA
    st[i] = s
    z = s
    z = (z ^ (z >> np.uint64(30))) * _MIX1
    z = (z ^ (z >> np.uint64(27))) * _MIX2
    return z ^ (z >> np.uint64(31))


@njit(cache=True)
def next_unit(st, i):
    return (next_u64(st, i) >> np.uint64(11)) * _U53


@njit(cache=True)
def next_below(st, i, n):
    return int64_mod(next_u64(st, i), n)


@njit(cache=True)
def int64_mod(u, n):
    return np.int64(u % np.uint64(n))


def make_states(seed, lanes):
    """Independent state lanes: lane i starts at seed advanced by i gamma steps."""
    mask = 0xFFFFFFFFFFFFFFFF
    base = int(seed) & mask
    step = (int(_GAMMA) * 0x632BE59BD9B4E019) & mask
    st = np.empty(lanes, dtype=np.uint64)
    for i in range(lanes):
        st[i] = (base + i * step) & mask
    return st
