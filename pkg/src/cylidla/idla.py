"""Internal DLA on the cylinder, its stopped and balanced variants, replay.

Two engine modes share one compiled kernel:

* ``trajectory``: every particle is released at level 0 and follows the walk
  encoded by its stream; sub-level-1 excursions are fast-forwarded.  The
  compressed walk does not depend on the cluster, so runs with shared
  streams can be compared pathwise (abelian property, couplings).
* ``stacks``: every site owns its own instruction stream (Diaconis-Fulton
  stacks) and a particle's stream only fixes its release.  The final
  cluster is then independent of the processing order, pathwise.
* ``layered``: a particle is placed directly on the lowest level that is not
  completely occupied, at a uniform column (the exact law of its first
  visit there), and excursions below that level are fast-forwarded.  Same
  law, far fewer steps; used by the experiments.
"""

import hashlib
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import _engine, _rng
from .errors import BudgetExceeded, InvalidParameter, MissingInput
from .walk import (DEFAULT_BUDGET, DEFAULT_EPS, WalkStream, _DUMMY_CDF, graph_arrays,
                   hitting_kernel_cdf, relaxation_time)

MODES = ("layered", "trajectory", "stacks")
SNAPSHOT_HEADER = "idla-snapshot v1"


@dataclass(frozen=True)
class EngineOptions:
    mode: str = "layered"
    fastforward_eps: float = DEFAULT_EPS
    # Draw excursion exits from the exact one-level hitting kernel instead of
    # simulating them (used as the eps = 0 reference).
    exact_excursions: bool = False
    budget: int = DEFAULT_BUDGET

    def __post_init__(self):
        if self.mode not in MODES:
            raise InvalidParameter(f"mode must be one of {MODES}")
        if not self.fastforward_eps >= 0:
            raise InvalidParameter("fastforward_eps must be >= 0")
        if self.budget < 1:
            raise InvalidParameter("budget must be positive")


TRAJECTORY = EngineOptions(mode="trajectory")
STACKS = EngineOptions(mode="stacks")


class Cluster:
    """Occupied sites of V_N x Z; every site with y <= 0 is occupied."""

    def __init__(self, N, height=16):
        self.N = int(N)
        self.occ = np.zeros((self.N, max(int(height), 4)), dtype=np.bool_)
        self.filled = np.zeros(self.N, dtype=np.int64)

    @classmethod
    def flat(cls, N):
        return cls(N)

    @classmethod
    def rectangle(cls, N, h):
        c = cls(N, h + 16)
        c.occ[:, 1:h + 1] = True
        c.filled[:] = h
        return c

    @classmethod
    def from_sites(cls, N, sites):
        sites = np.asarray(sites, dtype=np.int64).reshape(-1, 2)
        top = int(sites[:, 1].max()) if len(sites) else 0
        c = cls(N, top + 16)
        for x, y in sites:
            if not (0 <= x < N) or y < 1:
                raise InvalidParameter(f"site ({x}, {y}) outside V_N x Z_+")
            c.occ[x, y] = True
        c._recompute_filled()
        return c

    def _recompute_filled(self):
        for x in range(self.N):
            h = 0
            while h + 1 < self.occ.shape[1] and self.occ[x, h + 1]:
                h += 1
            self.filled[x] = h

    def ensure_height(self, H):
        if H > self.occ.shape[1]:
            grown = np.zeros((self.N, H), dtype=np.bool_)
            grown[:, :self.occ.shape[1]] = self.occ
            self.occ = grown

    def copy(self):
        c = Cluster(self.N, self.occ.shape[1])
        c.occ = self.occ.copy()
        c.filled = self.filled.copy()
        return c

    def contains(self, x, y):
        if y <= 0:
            return True
        return y < self.occ.shape[1] and bool(self.occ[x, y])

    def add(self, x, y):
        if y <= 0:
            return
        self.ensure_height(2 * (y + 1))
        self.occ[x, y] = True
        if y == self.filled[x] + 1:
            self._recompute_filled()

    @property
    def size(self):
        """|A_+|, the number of occupied sites above level 0."""
        return int(self.occ[:, 1:].sum())

    def sites(self):
        """Occupied sites above level 0 as an (M, 2) array sorted by (y, x)."""
        ys, xs = np.nonzero(self.occ.T)
        keep = ys >= 1
        return np.column_stack([xs[keep], ys[keep]]).astype(np.int64)

    def inner_radius(self):
        return int(self.filled.min())

    def outer_height(self):
        rows = np.flatnonzero(self.occ.any(axis=0))
        return int(rows.max()) if len(rows) else 0

    def layer_counts(self):
        return self.occ.sum(axis=0)

    def _padded(self, H):
        out = np.zeros((self.N, H), dtype=np.bool_)
        out[:, :self.occ.shape[1]] = self.occ
        return out

    def _pair(self, other):
        if self.N != other.N:
            raise InvalidParameter("clusters live on different base graphs")
        H = max(self.occ.shape[1], other.occ.shape[1])
        return self._padded(H), other._padded(H)

    def issubset(self, other):
        a, b = self._pair(other)
        return not np.any(a & ~b)

    def symmetric_difference(self, other):
        a, b = self._pair(other)
        return int(np.sum(a ^ b))

    def __eq__(self, other):
        return isinstance(other, Cluster) and self.N == other.N and self.symmetric_difference(other) == 0

    def digest(self):
        """SHA-256 of the sorted site list."""
        return hashlib.sha256(self.sites().tobytes()).hexdigest()

    def __repr__(self):
        return f"Cluster(N={self.N}, size={self.size}, inner={self.inner_radius()}, outer={self.outer_height()})"


@dataclass
class FrozenLedger:
    """Particles frozen on the stopping level, per column."""

    h: int
    counts: np.ndarray

    @property
    def total(self):
        return int(self.counts.sum())


@dataclass
class TrajectoryLog:
    """Streams used by a run and where each particle settled."""

    seed: int
    keys: np.ndarray
    starts: np.ndarray
    mode: str
    xs: np.ndarray = field(default=None)
    ys: np.ndarray = field(default=None)

    def __len__(self):
        return len(self.keys)

    def sites(self):
        return np.column_stack([self.xs, self.ys])


def _check_graph_N(g, cluster):
    if cluster.N != g.N:
        raise InvalidParameter(f"cluster has N={cluster.N} but graph has N={g.N}")


def _drive(g, cluster, keys, starts, stop_level, options, stack_seed=0):
    """Run the compiled engine over the given streams, growing storage as needed."""
    _check_graph_N(g, cluster)
    nbr, deg = graph_arrays(g)
    n = len(keys)
    out_x = np.zeros(n, dtype=np.int64)
    out_y = np.zeros(n, dtype=np.int64)
    out_steps = np.zeros(n, dtype=np.int64)
    scap = _engine.s_cap(relaxation_time(g), options.fastforward_eps)
    exact = options.exact_excursions
    cdf = hitting_kernel_cdf(g) if exact else _DUMMY_CDF
    layered = options.mode == "layered"
    stop = int(min(stop_level, 2**62))
    stacks = options.mode == "stacks"
    if stacks:
        skey = _rng.site_stack_key(stack_seed)
        cnt = np.zeros(cluster.occ.shape, dtype=np.int64)
    j = 0
    while True:
        if stacks:
            j, status = _engine.process_stacks(cluster.occ, cluster.filled, cnt, skey, nbr, deg,
                                               keys, starts, j, stop, scap, cdf, exact,
                                               options.budget, out_x, out_y, out_steps)
        else:
            j, status = _engine.process(cluster.occ, cluster.filled, nbr, deg, keys, starts, j,
                                        stop, layered, scap, cdf, exact, options.budget, out_x,
                                        out_y, out_steps)
        if status == _engine.OK:
            break
        if status == _engine.BUDGET:
            raise BudgetExceeded(f"particle {j} exceeded the step budget {options.budget}")
        cluster.ensure_height(2 * cluster.occ.shape[1])
        if stacks:
            grown = np.zeros(cluster.occ.shape, dtype=np.int64)
            grown[:, :cnt.shape[1]] = cnt
            cnt = grown
    return out_x, out_y, out_steps


def _keys(seed, start, count):
    return _rng.stream_keys(_rng.seed_to_u64(seed), np.uint64(start), int(count))


def _check_T(T):
    if isinstance(T, bool) or not isinstance(T, (int, np.integer)) or T < 0:
        raise InvalidParameter(f"T must be a non-negative integer, got {T!r}")
    return int(T)


def new_flat(N):
    return Cluster.flat(N)


def add_particle(c, g, stream, options=TRAJECTORY):
    """Release one particle driven by `stream` and add its exit site to c."""
    if options.mode == "stacks":
        raise InvalidParameter("stacks mode keeps per-site state; use replay for a batch")
    keys = np.array([stream.key], dtype=np.uint64)
    starts = np.array([-1 if stream.start is None else stream.start], dtype=np.int64)
    xs, ys, _ = _drive(g, c, keys, starts, 2**62, options)
    return int(xs[0]), int(ys[0])


def run(g, T, seed, options=None, initial=None):
    """Free IDLA: T particles with streams (seed, 0..T-1) from `initial` (flat)."""
    T = _check_T(T)
    options = options or EngineOptions()
    c = initial.copy() if initial is not None else Cluster(g.N, 2 * (T // g.N) + 16)
    keys = _keys(seed, 0, T)
    starts = np.full(T, -1, dtype=np.int64)
    xs, ys, _ = _drive(g, c, keys, starts, 2**62, options, seed)
    return c, TrajectoryLog(int(seed), keys, starts, options.mode, xs, ys)


def run_stopped(g, T, h, seed, options=None):
    """IDLA stopped at level h: a particle reaching level h freezes there."""
    T = _check_T(T)
    if isinstance(h, bool) or not isinstance(h, (int, np.integer)) or h < 1:
        raise InvalidParameter(f"stopping level must be a positive integer, got {h!r}")
    options = options or EngineOptions()
    c = Cluster(g.N, h + 16)
    keys = _keys(seed, 0, T)
    starts = np.full(T, -1, dtype=np.int64)
    xs, ys, _ = _drive(g, c, keys, starts, int(h), options, seed)
    counts = np.bincount(xs[ys == h], minlength=g.N).astype(np.int64)
    return c, FrozenLedger(int(h), counts), TrajectoryLog(int(seed), keys, starts, options.mode, xs, ys)


def balanced_streams(g, m, seed):
    """Streams for m particles per column; particle (x, i) has index x*m + i."""
    keys = _keys(seed, 0, g.N * m)
    starts = np.repeat(np.arange(g.N, dtype=np.int64), m)
    return keys, starts


def run_balanced(g, m, seed, options=None, order=None):
    """Release m particles from every column, column by column (or in `order`)."""
    if isinstance(m, bool) or not isinstance(m, (int, np.integer)) or m < 0:
        raise InvalidParameter(f"m must be a non-negative integer, got {m!r}")
    options = options or EngineOptions()
    keys, starts = balanced_streams(g, int(m), seed)
    if order is not None:
        order = np.asarray(order, dtype=np.int64)
        if sorted(order.tolist()) != list(range(len(keys))):
            raise InvalidParameter("order must be a permutation of the particle indices")
        keys, starts = keys[order], starts[order]
    c = Cluster(g.N, 2 * m + 16)
    xs, ys, _ = _drive(g, c, keys, starts, 2**62, options, seed)
    return c, TrajectoryLog(int(seed), keys, starts, options.mode, xs, ys)


def _streams_to_arrays(trajectories):
    if isinstance(trajectories, TrajectoryLog):
        return trajectories.keys, trajectories.starts
    keys = np.array([s.key for s in trajectories], dtype=np.uint64)
    starts = np.array([-1 if s.start is None else s.start for s in trajectories], dtype=np.int64)
    return keys, starts


def replay(g, initial, trajectories, options=None, stop_level=None, stack_seed=None):
    """Grow `initial` by the given streams in order.

    Returns (cluster, sites) where sites[i] is where trajectory i settled.
    A TrajectoryLog replays in its own engine mode; a list of WalkStreams
    defaults to trajectory mode.  In stacks mode the site streams come from
    `stack_seed` (default: the log's seed, or the first stream's seed).
    """
    is_log = isinstance(trajectories, TrajectoryLog)
    if options is None:
        options = EngineOptions(mode=trajectories.mode if is_log else "trajectory")
    if stack_seed is None:
        if is_log:
            stack_seed = trajectories.seed
        else:
            stack_seed = trajectories[0].seed if len(trajectories) else 0
    keys, starts = _streams_to_arrays(trajectories)
    c = initial.copy()
    stop = 2**62 if stop_level is None else int(stop_level)
    xs, ys, _ = _drive(g, c, keys, starts, stop, options, stack_seed)
    return c, np.column_stack([xs, ys])


def resample_one(g, T, seed, j, new_seed, options=TRAJECTORY):
    """Final clusters with and without redrawing particle j's trajectory."""
    T = _check_T(T)
    if not 0 <= j < T:
        raise InvalidParameter(f"particle index {j} outside 0..{T - 1}")
    keys = _keys(seed, 0, T)
    alt = keys.copy()
    alt[j] = _keys(new_seed, j, 1)[0]
    starts = np.full(T, -1, dtype=np.int64)
    a = Cluster(g.N, 2 * (T // g.N) + 16)
    b = a.copy()
    _drive(g, a, keys, starts, 2**62, options, seed)
    _drive(g, b, alt, starts, 2**62, options, seed)
    return a, b


def check_growth(log, stopped=False):
    """Conservation and height bound after every particle of a logged run.

    Free runs: the t-th particle lands on a new site above level 0, so
    |A_+(t)| = t, and the maximum height after t particles is at most t.
    Stopped runs only need |A_+(t)| <= t, which holds trivially.
    """
    xs, ys = np.asarray(log.xs), np.asarray(log.ys)
    T = len(xs)
    if T == 0:
        return True
    if np.any(ys < 1):
        return False
    if np.any(np.maximum.accumulate(ys) > np.arange(1, T + 1)):
        return False
    if stopped:
        return True
    codes = ys * np.int64(len(xs) + int(xs.max()) + 1) + xs
    return len(np.unique(codes)) == T


def inner_radius(c):
    return c.inner_radius()


def outer_height(c):
    return c.outer_height()


def prefix_inclusion(N, small_sites, big_sites, small_initial=None, big_initial=None):
    """Check initial ∪ small[:t] ⊆ initial' ∪ big[:t] for every t."""
    small = set() if small_initial is None else set(map(tuple, small_initial.sites().tolist()))
    big = set() if big_initial is None else set(map(tuple, big_initial.sites().tolist()))
    missing = {s for s in small if s not in big}
    for t, (a, b) in enumerate(zip(map(tuple, small_sites.tolist()), map(tuple, big_sites.tolist()))):
        if a[1] > 0:
            small.add(a)
            if a not in big:
                missing.add(a)
        if b[1] > 0:
            big.add(b)
            missing.discard(b)
        if missing:
            return False, t
    return True, len(small_sites)


def write_snapshot(path, cluster, g, T):
    """Text snapshot: header, graph line, size line, then `x y` per site."""
    from .graphs import graph_params

    params = " ".join(f"{k}={v}" for k, v in graph_params(g).items())
    lines = [SNAPSHOT_HEADER, f"graph {g.family} {params}", f"N {g.N} T {int(T)}"]
    lines += [f"{x} {y}" for x, y in cluster.sites().tolist()]
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text("\n".join(lines) + "\n")
    tmp.replace(path)


def read_snapshot(path):
    """Inverse of write_snapshot; returns (cluster, family, params, T)."""
    path = Path(path)
    if not path.exists():
        raise MissingInput(f"no such snapshot: {path}")
    lines = path.read_text().splitlines()
    if len(lines) < 3 or lines[0].strip() != SNAPSHOT_HEADER:
        raise InvalidParameter(f"{path} is not an idla snapshot")
    head = lines[1].split()
    if head[0] != "graph" or len(head) < 2:
        raise InvalidParameter("malformed graph line")
    family = head[1]
    params = {}
    for tok in head[2:]:
        k, v = tok.split("=", 1)
        params[k] = int(v)
    size = lines[2].split()
    if len(size) != 4 or size[0] != "N" or size[2] != "T":
        raise InvalidParameter("malformed size line")
    N, T = int(size[1]), int(size[3])
    sites = [tuple(int(v) for v in ln.split()) for ln in lines[3:] if ln.strip()]
    return Cluster.from_sites(N, sites), family, params, T
