"""Counter-based uniform generator (SplitMix64 finaliser over a keyed counter).

A stream is a 64-bit key; the c-th uniform of the stream is a pure function
of (key, c), so any walk can be regenerated from its key alone.
"""

import numba as nb
import numpy as np

GOLDEN = np.uint64(0x9E3779B97F4A7C15)
STREAM_SALT = np.uint64(0x5DEECE66D1234567)
EXCURSION_SALT = np.uint64(0xC2B2AE3D27D4EB4F)
SITE_SALT = np.uint64(0x165667B19E3779F9)
INV53 = 1.0 / 9007199254740992.0


@nb.njit(inline="always", cache=True)
def mix64(z):
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return z ^ (z >> np.uint64(31))


@nb.njit(cache=True)
def stream_key(seed, index):
    return mix64(np.uint64(seed) ^ mix64(np.uint64(index) * GOLDEN + STREAM_SALT))


@nb.njit(cache=True)
def sub_key(key, index):
    return mix64(np.uint64(key) ^ mix64(np.uint64(index) * GOLDEN + EXCURSION_SALT))


@nb.njit(inline="always", cache=True)
def uniform(key, counter):
    z = mix64(np.uint64(key) + np.uint64(counter + 1) * GOLDEN)
    return (z >> np.uint64(11)) * INV53


@nb.njit(cache=True)
def stream_keys(seed, start, count):
    out = np.empty(count, dtype=np.uint64)
    for i in range(count):
        out[i] = stream_key(seed, start + i)
    return out


def seed_to_u64(seed):
    """Map any non-negative Python int to a uint64 seed."""
    return np.uint64(int(seed) & 0xFFFFFFFFFFFFFFFF)


def site_stack_key(seed):
    """Base key of the per-site instruction streams of a run."""
    return np.uint64(mix64(seed_to_u64(seed) ^ SITE_SALT))


def replicate_seed(master_seed, replicate):
    """Independent per-replicate seed derived with numpy's SeedSequence."""
    ss = np.random.SeedSequence([int(master_seed) & 0xFFFFFFFFFFFFFFFF, int(replicate)])
    return int(ss.generate_state(1, dtype=np.uint64)[0])
