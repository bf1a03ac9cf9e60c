"""Spectral data of the lazy kernel: eigenpairs, decay rates, mixing scales.

Eigenfunctions are normalised so that (1/N) sum_x f_k(x)^2 = 1, f_1 is the
constant 1, and eigenvalues are listed in descending order.
"""

import itertools
import math
from dataclasses import dataclass, field

import numba as nb
import numpy as np

from . import graphs
from .errors import InvalidParameter, NumericFailure

BLOCK_TOL = 1e-9


@dataclass
class Spectrum:
    graph: str
    eigenvalues: np.ndarray
    vectors: np.ndarray  # column k-1 holds f_k
    source: str
    # Frequency vectors for closed-form bases (cycle / torus), else None.
    frequencies: list = None
    sweeps: int = 0

    @property
    def N(self):
        return len(self.eigenvalues)

    def lam(self, k):
        return float(self.eigenvalues[k - 1])

    def f(self, k):
        return self.vectors[:, k - 1]

    @property
    def nu(self):
        return 1.0 - self.eigenvalues

    @property
    def gap(self):
        return 1.0 - self.lam(2) if self.N > 1 else 1.0

    def blocks(self, tol=BLOCK_TOL):
        """Index ranges [start, stop) of (numerically) equal eigenvalues."""
        lam = self.eigenvalues
        out = []
        start = 0
        for i in range(1, len(lam) + 1):
            if i == len(lam) or abs(lam[i] - lam[i - 1]) > tol * max(1.0, abs(lam[i - 1])):
                out.append((start, i))
                start = i
        return out

    def projector(self, block):
        """Orthogonal projector onto a block, in the standard inner product."""
        V = self.vectors[:, block[0]:block[1]] / math.sqrt(self.N)
        return V @ V.T


@nb.njit(cache=True)
def _jacobi(A, rel_tol, max_sweeps):
    n = A.shape[0]
    A = A.copy()
    V = np.eye(n)
    norm = math.sqrt(np.sum(A * A))
    for sweep in range(max_sweeps):
        off = 0.0
        for p in range(n):
            for q in range(n):
                if p != q:
                    off += A[p, q] * A[p, q]
        if math.sqrt(off) <= rel_tol * norm:
            return np.diag(A).copy(), V, sweep
        # Threshold: skip rotations that are already negligible this sweep.
        thresh = 0.0
        if sweep < 3:
            thresh = 0.2 * math.sqrt(off) / (n * n)
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = A[p, q]
                if abs(apq) <= thresh or apq == 0.0:
                    continue
                theta = (A[q, q] - A[p, p]) / (2.0 * apq)
                sgn = 1.0 if theta >= 0.0 else -1.0
                t = sgn / (abs(theta) + math.sqrt(theta * theta + 1.0))
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                for k in range(n):
                    akp = A[k, p]
                    akq = A[k, q]
                    A[k, p] = c * akp - s * akq
                    A[k, q] = s * akp + c * akq
                for k in range(n):
                    apk = A[p, k]
                    aqk = A[q, k]
                    A[p, k] = c * apk - s * aqk
                    A[q, k] = s * apk + c * aqk
                A[p, q] = 0.0
                A[q, p] = 0.0
                for k in range(n):
                    vkp = V[k, p]
                    vkq = V[k, q]
                    V[k, p] = c * vkp - s * vkq
                    V[k, q] = s * vkp + c * vkq
    return np.diag(A).copy(), V, -1


def _canonical_block_basis(V):
    """Deterministic orthonormal basis of span(V) from coordinate seeds."""
    n, m = V.shape
    if m == 0:
        return V
    Pb = V @ V.T
    basis = []
    for i in range(n):
        v = Pb[:, i].copy()
        for _ in range(2):
            for b in basis:
                v -= (b @ v) * b
        nv = np.linalg.norm(v)
        if nv < 1e-7:
            continue
        v /= nv
        nz = np.flatnonzero(np.abs(v) > 1e-10)
        if v[nz[0]] < 0:
            v = -v
        basis.append(v)
        if len(basis) == m:
            break
    if len(basis) != m:
        raise NumericFailure("could not build a basis for a degenerate eigenspace")
    return np.column_stack(basis)


def check_spectrum(P, spec, tol):
    """Raise NumericFailure unless eigen-residual and orthonormality hold."""
    F = spec.vectors
    N = spec.N
    resid = np.max(np.abs(P @ F - F * spec.eigenvalues))
    ortho = np.max(np.abs(F.T @ F / N - np.eye(N)))
    if resid > tol or ortho > tol:
        raise NumericFailure(f"spectrum check failed: residual {resid:.3g}, orthonormality {ortho:.3g}")
    if np.max(np.abs(F[:, 0] - 1.0)) > tol:
        raise NumericFailure("leading eigenfunction is not constant")
    return resid, ortho


def decompose(g, tol=1e-8, method="jacobi", max_n=4096):
    """Full eigendecomposition of the lazy kernel of g.

    method="jacobi" runs a cyclic Jacobi solver; method="eigh" uses LAPACK
    (a cross-check and a faster path for large graphs).
    """
    N = g.N
    if N > max_n:
        raise InvalidParameter(f"N={N} exceeds the dense eigensolver cap {max_n}")
    P = g.kernel_matrix()
    sweeps = 0
    if method == "jacobi":
        lam, V, sweeps = _jacobi(P, 1e-15, 100)
        if sweeps < 0:
            raise NumericFailure("Jacobi iteration did not converge")
    elif method == "eigh":
        lam, V = np.linalg.eigh(P)
    else:
        raise InvalidParameter(f"unknown method {method!r}")
    order = np.argsort(-lam, kind="stable")
    lam = lam[order]
    V = V[:, order]
    spec = Spectrum(g.label, lam, V, method, None, int(sweeps))
    cols = []
    for blk in spec.blocks():
        block_lam = lam[blk[0]:blk[1]].mean()
        lam[blk[0]:blk[1]] = block_lam
        cols.append(_canonical_block_basis(V[:, blk[0]:blk[1]]))
    spec.vectors = np.hstack(cols) * math.sqrt(N)
    spec.eigenvalues = lam
    check_spectrum(P, spec, tol)
    return spec


def _cycle_factor(m, n, x):
    """Real Fourier eigenfunction of the n-cycle for frequency m in 0..n-1."""
    if m == 0:
        return np.ones_like(x, dtype=float)
    if 2 * m == n:
        return np.where(x % 2 == 0, 1.0, -1.0)
    if 2 * m < n:
        return math.sqrt(2) * np.cos(2 * math.pi * m * x / n)
    return math.sqrt(2) * np.sin(2 * math.pi * (n - m) * x / n)


def closed_form_torus(n, dim):
    """Tensor-product Fourier basis, sorted by eigenvalue then frequency."""
    if n < 3 or dim < 1:
        raise InvalidParameter("torus needs n >= 3 and dim >= 1")
    N = n**dim
    freqs = list(itertools.product(range(n), repeat=dim))

    def lam_of(m):
        return 0.5 + sum(math.cos(2 * math.pi * mi / n) for mi in m) / (2 * dim)

    keyed = sorted(freqs, key=lambda m: (-round(lam_of(m), 12), m))
    coords = np.array([graphs.torus_coords(v, n, dim) for v in range(N)])
    F = np.empty((N, N))
    lam = np.empty(N)
    for k, m in enumerate(keyed):
        col = np.ones(N)
        for i in range(dim):
            col = col * _cycle_factor(m[i], n, coords[:, i])
        F[:, k] = col
        lam[k] = lam_of(m)
    return Spectrum(f"torus({n}, {dim})", lam, F, "closed-form", keyed)


def closed_form_cycle(N):
    spec = closed_form_torus(N, 1)
    spec.graph = f"cycle({N})"
    return spec


def closed_form(g):
    """Closed-form spectrum for cycles and tori, None for other families."""
    if g.family == "cycle":
        return closed_form_cycle(g.N)
    if g.family == "torus":
        return closed_form_torus(*g.params)
    return None


def spectrum_for(g, prefer_closed_form=True, tol=1e-8):
    spec = closed_form(g) if prefer_closed_form else None
    return spec if spec is not None else decompose(g, tol)


def vertical_rate(lam):
    """q = arccosh(2 - lambda): exponential rate of the harmonic mode."""
    lam = np.asarray(lam, dtype=float)
    if np.any(lam < -1e-12) or np.any(lam > 1 + 1e-12):
        raise InvalidParameter("eigenvalues of the lazy kernel lie in [0, 1]")
    q = np.arccosh(2.0 - np.clip(lam, 0.0, 1.0))
    return float(q) if q.ndim == 0 else q


def rescaled_rate(lam, a_N):
    return a_N * vertical_rate(lam)


def default_a_N(g, spectrum=None):
    """Natural horizontal scale: side length for cycles/tori, else 1/sqrt(2 gap)."""
    if g.family == "cycle":
        return float(g.N)
    if g.family == "torus":
        return float(g.params[0])
    spectrum = spectrum if spectrum is not None else spectrum_for(g)
    return 1.0 / math.sqrt(2.0 * spectrum.gap)


def relaxation_time(spectrum):
    return 1.0 / spectrum.gap


def closed_form_gamma(spectrum, k):
    """Limiting rescaled rate for cycle/torus modes (needs frequencies)."""
    if spectrum.frequencies is None:
        raise InvalidParameter("closed-form limiting rates need a Fourier basis")
    m = spectrum.frequencies[k - 1]
    n = round(spectrum.N ** (1.0 / len(m)))
    sq = sum(min(mi, n - mi) ** 2 for mi in m)
    return math.pi * math.sqrt(2.0 * sq / len(m))


def _tv_rows(M):
    return 0.5 * np.max(np.sum(np.abs(M - 1.0 / M.shape[1]), axis=1))


def mixing_time(g, threshold=0.25, spectrum=None):
    """Smallest t with max_x TV(P^t(x, .), uniform) <= threshold.

    Doubling search on matrix powers followed by bisection.  Transitive
    constructions only track the row of vertex 0.
    """
    P = g.kernel_matrix()
    N = g.N
    spectrum = spectrum if spectrum is not None else spectrum_for(g)
    cap = 64 * relaxation_time(spectrum) * math.log(4 * N)
    rows = slice(0, 1) if g.transitive else slice(None)
    tol = 1e-12

    def tv(M):
        return _tv_rows(M[rows])

    if tv(np.eye(N)) <= threshold + tol:
        return 0
    powers = [P]  # powers[j] = P^(2^j)
    t = 1
    while tv(powers[-1]) > threshold + tol:
        t *= 2
        if t > 2 * cap:
            raise NumericFailure(f"mixing time search exceeded cap {cap:.1f}")
        powers.append(powers[-1] @ powers[-1])
    lo, hi = t // 2, t  # tv(lo) > threshold >= tv(hi)
    if lo == 0:
        return 1

    def power(s):
        M = np.eye(N)[rows]
        j = 0
        while s:
            if s & 1:
                M = M @ powers[j]
            s >>= 1
            j += 1
        return M

    while hi - lo > 1:
        mid = (lo + hi) // 2
        if _tv_rows(power(mid)) <= threshold + tol:
            hi = mid
        else:
            lo = mid
    if hi > cap:
        raise NumericFailure(f"mixing time {hi} exceeds cap {cap:.1f}")
    return hi


def t_sharp(N, tau_mix):
    return N * math.sqrt(tau_mix) * math.log(N) ** 2


@dataclass
class ScalingBundle:
    graph: str
    N: int
    a_N: float
    gamma: list  # a_N * sqrt(2 (1 - lambda_k)), k = 2..K
    q_rescaled: list  # a_N * arccosh(2 - lambda_k), k = 2..K
    tau_rel: float
    tau_mix: int
    t_sharp: float
    warnings: list = field(default_factory=list)

    def to_dict(self):
        return dict(self.__dict__)


def scaling_bundle(g, K=4, a_N=None, spectrum=None, with_mixing=True):
    spectrum = spectrum if spectrum is not None else spectrum_for(g)
    a = default_a_N(g, spectrum) if a_N is None else float(a_N)
    K = min(K, g.N)
    lam = spectrum.eigenvalues[1:K]
    gam = [float(a * math.sqrt(2 * (1 - l))) for l in lam]
    qs = [float(rescaled_rate(l, a)) for l in lam]
    tmix = mixing_time(g, spectrum=spectrum) if with_mixing else 0
    warnings = []
    LN = math.log(g.N)
    if a < LN:
        warnings.append(f"a_N={a:.3g} is small compared with log N={LN:.3g}")
    return ScalingBundle(g.label, g.N, a, gam, qs, relaxation_time(spectrum), tmix,
                         t_sharp(g.N, tmix) if with_mixing else float("nan"), warnings)


@dataclass
class AssumptionReport:
    family: str
    sizes: list
    a_N: list
    gaps: list
    gamma: dict  # k -> list over sizes
    gamma_extrapolated: dict
    cauchy_gap: dict
    gap_vanishes: bool
    flagged: bool
    notes: list

    def to_dict(self):
        return dict(self.__dict__)


def check_assumption_spectral(family, sizes, K=4, **fixed):
    """Probe whether a_N sqrt(2(1-lambda_k)) settles down along a size sweep.

    `sizes` feeds the family's size parameter (N, n or dim); `fixed` holds
    the rest (e.g. dim for tori, k for Petersen graphs).
    """
    size_key = {"cycle": "N", "complete": "N", "torus": "n", "hypercube": "dim", "petersen": "n"}
    if family not in size_key or len(sizes) < 2:
        raise InvalidParameter("need a known family and at least two sizes")
    a_vals, gaps = [], []
    gam = {k: [] for k in range(2, K + 1)}
    for s in sizes:
        g = graphs.build_graph(family, **{size_key[family]: s}, **fixed)
        spec = spectrum_for(g)
        a = default_a_N(g, spec)
        a_vals.append(a)
        gaps.append(spec.gap)
        for k in gam:
            lam = spec.lam(min(k, g.N))
            gam[k].append(a * math.sqrt(2 * (1 - lam)))
    extrap, cauchy = {}, {}
    for k, seq in gam.items():
        r = (a_vals[-1] / a_vals[-2]) ** 2
        extrap[k] = seq[-1] + (seq[-1] - seq[-2]) / (r - 1) if r > 1 else seq[-1]
        cauchy[k] = abs(seq[-1] - seq[-2])
    vanishes = gaps[-1] < 0.5 * gaps[0]
    notes = []
    if not vanishes:
        notes.append("spectral gap does not vanish along the sweep; no diffusive horizontal scale")
    return AssumptionReport(family, list(sizes), a_vals, gaps, gam, extrap, cauchy,
                            vanishes, not vanishes, notes)


def spectrum_rows(spectrum, a_N, K=None):
    """Rows for the spectrum CSV export."""
    K = spectrum.N if K is None else min(K, spectrum.N)
    rows = []
    for k in range(1, K + 1):
        lam = spectrum.lam(k)
        q = vertical_rate(lam)
        rows.append({
            "k": k,
            "lambda_k": lam,
            "nu_k": 1.0 - lam,
            "q_k": q,
            "q_k_rescaled": a_N * q,
            "gamma_k_estimate": a_N * math.sqrt(max(0.0, 2 * (1 - lam))),
        })
    return rows
