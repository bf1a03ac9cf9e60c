"""Finite regular base graphs and their lazy random walk kernels.

Vertices are labelled 0..N-1.  Every constructor returns a `BaseGraph` whose
adjacency lists are sorted, so downstream sampling is reproducible.
"""

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np

from .errors import InvalidParameter, MissingInput, NotVertexTransitive

FAMILIES = ("cycle", "torus", "petersen", "complete", "hypercube")


@dataclass(frozen=True)
class BaseGraph:
    family: str
    params: tuple
    adjacency: tuple
    degree: int
    # True only for constructions known to be vertex-transitive.
    transitive: bool = True

    @property
    def N(self):
        return len(self.adjacency)

    @property
    def label(self):
        return f"{self.family}({', '.join(str(p) for p in self.params)})"

    def neighbor_array(self):
        """Adjacency as an (N, d) int64 array."""
        if self.degree == 0:
            return np.zeros((self.N, 1), dtype=np.int64)
        return np.array(self.adjacency, dtype=np.int64)

    def kernel_matrix(self):
        """Dense lazy kernel P_N as float64."""
        n = self.N
        P = np.zeros((n, n))
        if self.degree == 0:
            return np.eye(n)
        w = 1.0 / (2 * self.degree)
        for x, nbrs in enumerate(self.adjacency):
            P[x, x] += 0.5
            for z in nbrs:
                P[x, z] += w
        return P


@dataclass(frozen=True)
class KernelRow:
    source: int
    probs: dict = field(default_factory=dict)


@dataclass
class ValidationReport:
    graph: str
    N: int
    degree: int
    regular: bool
    symmetric: bool
    loop_free: bool
    connected: bool
    failures: list

    @property
    def ok(self):
        return not self.failures

    def raise_if_failed(self):
        if self.failures:
            raise InvalidParameter(f"{self.graph}: " + "; ".join(self.failures))

    def to_dict(self):
        return {
            "graph": self.graph,
            "N": self.N,
            "degree": self.degree,
            "regular": self.regular,
            "symmetric": self.symmetric,
            "loop_free": self.loop_free,
            "connected": self.connected,
            "failures": list(self.failures),
        }


def _require_int(name, value, lo):
    if isinstance(value, bool) or not isinstance(value, (int, np.integer)):
        raise InvalidParameter(f"{name} must be an integer, got {value!r}")
    if value < lo:
        raise InvalidParameter(f"{name} must be >= {lo}, got {value}")
    return int(value)


def from_adjacency(adjacency, family="custom", params=(), transitive=False):
    """Wrap raw adjacency lists without any checks (see `validate`)."""
    adj = tuple(tuple(sorted(int(z) for z in nbrs)) for nbrs in adjacency)
    degree = len(adj[0]) if adj else 0
    return BaseGraph(family, tuple(params), adj, degree, transitive)


def build_cycle(N):
    N = _require_int("N", N, 3)
    adj = [sorted({(x - 1) % N, (x + 1) % N}) for x in range(N)]
    return from_adjacency(adj, "cycle", (N,), True)


def torus_coords(v, n, dim):
    """Mixed-radix digits of vertex v, coordinate 0 varying fastest."""
    out = []
    for _ in range(dim):
        out.append(v % n)
        v //= n
    return tuple(out)


def torus_index(coords, n):
    v = 0
    for c in reversed(coords):
        v = v * n + (c % n)
    return v


def build_torus(n, dim):
    n = _require_int("n", n, 3)
    dim = _require_int("dim", dim, 1)
    N = n**dim
    adj = []
    for v in range(N):
        c = list(torus_coords(v, n, dim))
        nbrs = set()
        for i in range(dim):
            for s in (-1, 1):
                cc = list(c)
                cc[i] = (cc[i] + s) % n
                nbrs.add(torus_index(cc, n))
        adj.append(sorted(nbrs))
    return from_adjacency(adj, "torus", (n, dim), True)


def build_generalized_petersen(n, k):
    """GP(n, k): outer rim u_i = i, spokes u_i - v_i, inner star v_i = n + i."""
    n = _require_int("n", n, 3)
    k = _require_int("k", k, 1)
    if not 2 * k < n:
        raise InvalidParameter(f"need 1 <= k < n/2, got n={n}, k={k}")
    # GP(10, 2), the dodecahedron, is the one transitive case outside k^2 = +-1.
    if (k * k) % n not in (1, n - 1) and (n, k) != (10, 2):
        raise NotVertexTransitive(f"GP({n},{k}) is not vertex-transitive")
    adj = [set() for _ in range(2 * n)]

    def link(a, b):
        adj[a].add(b)
        adj[b].add(a)

    for i in range(n):
        link(i, (i + 1) % n)
        link(i, n + i)
        link(n + i, n + (i + k) % n)
    return from_adjacency([sorted(s) for s in adj], "petersen", (n, k), True)


def build_complete(N):
    N = _require_int("N", N, 2)
    adj = [[z for z in range(N) if z != x] for x in range(N)]
    return from_adjacency(adj, "complete", (N,), True)


def build_hypercube(dim):
    dim = _require_int("dim", dim, 1)
    N = 1 << dim
    adj = [sorted(v ^ (1 << i) for i in range(dim)) for v in range(N)]
    return from_adjacency(adj, "hypercube", (dim,), True)


def build_graph(family, **params):
    """Dispatch on a family name with keyword parameters (config style)."""
    builders = {
        "cycle": (build_cycle, ("N",)),
        "torus": (build_torus, ("n", "dim")),
        "petersen": (build_generalized_petersen, ("n", "k")),
        "complete": (build_complete, ("N",)),
        "hypercube": (build_hypercube, ("dim",)),
    }
    if family not in builders:
        raise InvalidParameter(f"unknown graph family {family!r}; expected one of {FAMILIES}")
    fn, names = builders[family]
    extra = set(params) - set(names)
    missing = [p for p in names if p not in params]
    if extra or missing:
        raise InvalidParameter(f"{family} takes parameters {names}; got {sorted(params)}")
    return fn(*(params[p] for p in names))


def graph_params(g):
    names = {
        "cycle": ("N",),
        "torus": ("n", "dim"),
        "petersen": ("n", "k"),
        "complete": ("N",),
        "hypercube": ("dim",),
    }.get(g.family)
    if names is None:
        return {"params": list(g.params)}
    return dict(zip(names, g.params))


def kernel_row(g, x):
    """Exact rational row P_N(x, .) of the lazy kernel."""
    x = _require_int("x", x, 0)
    if x >= g.N:
        raise InvalidParameter(f"vertex {x} out of range for N={g.N}")
    if g.degree == 0:
        return KernelRow(x, {x: Fraction(1)})
    probs = {x: Fraction(1, 2)}
    for z in g.adjacency[x]:
        probs[z] = probs.get(z, Fraction(0)) + Fraction(1, 2 * g.degree)
    return KernelRow(x, probs)


def _connected(adj):
    n = len(adj)
    if n == 0:
        return False
    seen = {0}
    stack = [0]
    while stack:
        v = stack.pop()
        for z in adj[v]:
            if 0 <= z < n and z not in seen:
                seen.add(z)
                stack.append(z)
    return len(seen) == n


def validate(g):
    """Check regularity, symmetry, absence of loops and connectivity."""
    adj = g.adjacency
    n = len(adj)
    failures = []
    regular = all(len(nbrs) == g.degree for nbrs in adj)
    if not regular:
        failures.append("graph is not regular")
    sets = [set(nbrs) for nbrs in adj]
    in_range = all(0 <= z < n for s in sets for z in s)
    if not in_range:
        failures.append("neighbor index out of range")
    symmetric = in_range and all(x in sets[z] for x in range(n) for z in sets[x])
    if not symmetric:
        failures.append("adjacency is not symmetric")
    loop_free = all(x not in sets[x] for x in range(n)) and all(
        len(s) == len(nbrs) for s, nbrs in zip(sets, adj)
    )
    if not loop_free:
        failures.append("self-loops or repeated edges present")
    connected = _connected(adj)
    if not connected:
        failures.append("graph is not connected")
    return ValidationReport(g.label, n, g.degree, regular, symmetric, loop_free, connected, failures)


def load_adjacency(path):
    """Read a graph from a file.

    Accepted formats: a JSON list of neighbor lists, or plain text with one
    `u v` edge per line (`#` comments allowed).  Loaded graphs are only
    checked for regularity and connectivity; transitivity is not assumed.
    """
    path = Path(path)
    if not path.exists():
        raise MissingInput(f"no such adjacency file: {path}")
    text = path.read_text()
    if text.lstrip().startswith("["):
        adj = json.loads(text)
    else:
        edges = []
        for line in text.splitlines():
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 2:
                raise InvalidParameter(f"bad edge line: {line!r}")
            edges.append((int(parts[0]), int(parts[1])))
        n = 1 + max(max(e) for e in edges) if edges else 0
        sets = [set() for _ in range(n)]
        for a, b in edges:
            sets[a].add(b)
            sets[b].add(a)
        adj = [sorted(s) for s in sets]
    g = from_adjacency(adj, "file", (path.name,), transitive=False)
    rep = validate(g)
    if not (rep.regular and rep.connected and rep.symmetric):
        rep.raise_if_failed()
    return g


def embedding(g):
    """Planar coordinates for each vertex, used by geometry export."""
    N = g.N
    pts = []
    if g.family == "cycle" or g.family == "complete":
        for x in range(N):
            a = 2 * math.pi * x / N
            pts.append({"angle": a, "u": math.cos(a), "v": math.sin(a)})
    elif g.family == "torus":
        n, dim = g.params
        for x in range(N):
            pts.append({"grid": list(torus_coords(x, n, dim))})
    elif g.family == "petersen":
        n = g.params[0]
        for x in range(N):
            ring, i = divmod(x, n)
            r = 1.0 if ring == 0 else 0.5
            a = 2 * math.pi * i / n
            pts.append({"ring": ring, "angle": a, "u": r * math.cos(a), "v": r * math.sin(a)})
    elif g.family == "hypercube":
        dim = g.params[0]
        for x in range(N):
            pts.append({"bits": [(x >> i) & 1 for i in range(dim)]})
    else:
        for x in range(N):
            a = 2 * math.pi * x / N
            pts.append({"angle": a, "u": math.cos(a), "v": math.sin(a)})
    return pts
