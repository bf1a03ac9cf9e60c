"""The lazy random walk on the half-infinite cylinder V_N x Z.

From (x, y) the walk moves up or down with probability 1/4 each and makes
a P_N step in the x coordinate with probability 1/2.
"""

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import _engine, _rng, spectral
from .errors import BudgetExceeded, InvalidParameter

DEFAULT_EPS = 1e-9
DEFAULT_BUDGET = 10**9


@dataclass(frozen=True)
class CylinderState:
    x: int
    y: int


@dataclass
class WalkStream:
    """Counter-based stream keyed by (seed, index).

    `start` optionally pins the release column (balanced release); the
    counter records how many uniforms have been consumed.
    """

    seed: int
    index: int
    counter: int = 0
    start: int = None

    @property
    def key(self):
        return np.uint64(_rng.stream_key(_rng.seed_to_u64(self.seed), np.uint64(self.index)))

    def uniform(self):
        u = _rng.uniform(self.key, self.counter)
        self.counter += 1
        return u

    def fresh(self):
        return WalkStream(self.seed, self.index, 0, self.start)


@lru_cache(maxsize=64)
def graph_arrays(g):
    return g.neighbor_array(), g.degree


@lru_cache(maxsize=64)
def _relax(g):
    return spectral.relaxation_time(spectral.spectrum_for(g))


def relaxation_time(g, spectrum=None):
    return spectral.relaxation_time(spectrum) if spectrum is not None else _relax(g)


@lru_cache(maxsize=32)
def hitting_kernel_cdf(g):
    """Row-wise CDFs of the law of the column at the first visit one level up."""
    spec = spectral.spectrum_for(g)
    F = spec.vectors
    w = np.exp(-spectral.vertical_rate(spec.eigenvalues))
    K = (F * w) @ F.T / spec.N
    if K.min() < -1e-10:
        raise InvalidParameter("one-level hitting kernel has negative entries")
    K = np.clip(K, 0.0, None)
    K /= K.sum(axis=1, keepdims=True)
    cdf = np.cumsum(K, axis=1)
    cdf[:, -1] = 1.0
    return cdf


_DUMMY_CDF = np.ones((1, 1))


def step(s, g, stream):
    nbr, deg = graph_arrays(g)
    x, y, _ = _engine.cylinder_step(s.x, s.y, stream.uniform(), nbr, deg)
    return CylinderState(int(x), int(y))


def release_site(stream, N):
    """Uniform column on level 0, drawn from the stream's next uniform."""
    if N < 1:
        raise InvalidParameter("N must be >= 1")
    if stream.start is not None:
        return CylinderState(int(stream.start), 0)
    return CylinderState(min(int(stream.uniform() * N), N - 1), 0)


def _excursion(s, level, g, stream, eps, spectrum, exact, budget):
    if s.y > level:
        raise InvalidParameter(f"state {s} is already above level {level}")
    nbr, deg = graph_arrays(g)
    scap = _engine.s_cap(relaxation_time(g, spectrum), eps)
    cdf = hitting_kernel_cdf(g) if exact else _DUMMY_CDF
    x, c, steps, status = _engine.excursion(s.x, s.y, level, stream.key, stream.counter, nbr,
                                            deg, g.N, scap, cdf, exact, budget)
    if status != _engine.OK:
        raise BudgetExceeded(f"excursion exceeded {budget} steps")
    stream.counter = int(c)
    return CylinderState(int(x), level + 1)


def fastforward_subzero(s, g, spectrum, stream, eps=DEFAULT_EPS, budget=DEFAULT_BUDGET):
    """Return the state at the walk's first visit to level 1 from y <= 0.

    Horizontal moves are counted; past S_cap(eps) = ceil(tau_rel ln(2/eps))
    the column is replaced by a uniform draw.  eps = 0 simulates exactly.
    """
    if s.y > 0:
        raise InvalidParameter("fastforward_subzero needs a state with y <= 0")
    if eps < 0:
        raise InvalidParameter("eps must be >= 0")
    return _excursion(s, 0, g, stream, eps, spectrum, False, budget)


def first_hit_level(s, g, stream, m, eps=DEFAULT_EPS, spectrum=None, exact=False,
                    budget=DEFAULT_BUDGET):
    """Column at the first visit to level m > s.y."""
    if m <= s.y:
        raise InvalidParameter(f"target level {m} must exceed start level {s.y}")
    return _excursion(s, m - 1, g, stream, eps, spectrum, exact, budget).x


def first_hit_columns(g, start_x, start_y, m, seed, count, eps=DEFAULT_EPS, exact=False,
                      budget=DEFAULT_BUDGET):
    """First-hit columns at level m for `count` walks with streams (seed, 0..count-1).

    start_x = None releases each walk at a uniform column (counter 0 of its
    stream is then spent on that draw, the rest of the walk uses a sub-stream).
    """
    nbr, deg = graph_arrays(g)
    keys = _rng.stream_keys(_rng.seed_to_u64(seed), 0, count)
    if start_x is None:
        xs = np.array([min(int(_rng.uniform(k, 0) * g.N), g.N - 1) for k in keys], dtype=np.int64)
        keys = np.array([_rng.sub_key(k, 0) for k in keys], dtype=np.uint64)
    else:
        xs = np.full(count, int(start_x), dtype=np.int64)
    scap = _engine.s_cap(relaxation_time(g), eps)
    cdf = hitting_kernel_cdf(g) if exact else _DUMMY_CDF
    out, done = _engine.first_hits(xs, int(start_y), int(m), keys, nbr, deg, g.N, scap, cdf,
                                   exact, budget)
    if done != count:
        raise BudgetExceeded(f"walk {done} exceeded {budget} steps")
    return out


def sample_path(s, g, stream, n_steps):
    """Plain simulated path (arrays of x and y), advancing the stream."""
    nbr, deg = graph_arrays(g)
    xs, ys = _engine.walk_path(s.x, s.y, stream.key, stream.counter, nbr, deg, int(n_steps))
    stream.counter += int(n_steps)
    return xs, ys
