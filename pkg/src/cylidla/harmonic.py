"""Test functions on the cylinder and their discrete harmonic counterparts.

A test function is phi(x, y) = sum_k alpha_k(y) f_k(x) over non-constant
modes k >= 2.  Its harmonic extension for a run of T particles is

    psi(x, y) = sum_k alpha_k(T/(N a_N)) f_k(x) exp(q_k (y - T/N)),

with q_k = arccosh(2 - lambda_k), which is exactly harmonic for the
cylinder walk.
"""

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import spectral
from .errors import InvalidParameter, NumericFailure

CLAMP_TOL = 1e-10


class ConstAlpha:
    family = "const"

    def __init__(self, c=1.0):
        self.c = float(c)

    def __call__(self, y):
        return np.full_like(np.asarray(y, dtype=float), self.c) if np.ndim(y) else self.c

    def derivative_bound(self, lo, hi):
        return 0.0

    def params(self):
        return [self.c]


class PolyAlpha:
    """alpha(y) = c_0 + c_1 y + c_2 y^2 + ..."""

    family = "poly"

    def __init__(self, coeffs):
        if len(coeffs) == 0:
            raise InvalidParameter("poly amplitude needs at least one coefficient")
        self.coeffs = [float(c) for c in coeffs]
        self._p = np.polynomial.Polynomial(self.coeffs)

    def __call__(self, y):
        v = self._p(np.asarray(y, dtype=float))
        return float(v) if np.ndim(v) == 0 else v

    def derivative_bound(self, lo, hi):
        d = self._p.deriv()
        pts = [lo, hi]
        if d.degree() >= 1:
            pts += [r.real for r in d.deriv().roots() if abs(r.imag) < 1e-12 and lo <= r.real <= hi]
        return float(np.max(np.abs(d(np.array(pts)))))

    def params(self):
        return list(self.coeffs)


class TableAlpha:
    """Piecewise-linear amplitude through (y_i, v_i); constant beyond the ends."""

    family = "table"

    def __init__(self, ys, vals):
        ys = np.asarray(ys, dtype=float)
        vals = np.asarray(vals, dtype=float)
        if ys.ndim != 1 or len(ys) != len(vals) or len(ys) < 1:
            raise InvalidParameter("table amplitude needs matching non-empty y and value lists")
        if np.any(np.diff(ys) <= 0):
            raise InvalidParameter("table abscissae must be strictly increasing")
        self.ys, self.vals = ys, vals

    def __call__(self, y):
        v = np.interp(np.asarray(y, dtype=float), self.ys, self.vals)
        return float(v) if np.ndim(v) == 0 else v

    def derivative_bound(self, lo, hi):
        if len(self.ys) < 2:
            return 0.0
        slopes = np.abs(np.diff(self.vals) / np.diff(self.ys))
        seg_lo, seg_hi = self.ys[:-1], self.ys[1:]
        mask = (seg_hi > lo) & (seg_lo < hi)
        return float(slopes[mask].max()) if mask.any() else 0.0

    def params(self):
        return [list(self.ys), list(self.vals)]


def make_alpha(family, params):
    if family == "const":
        return ConstAlpha(*(params if isinstance(params, (list, tuple)) else [params]))
    if family == "poly":
        return PolyAlpha(params)
    if family == "table":
        if isinstance(params, dict):
            return TableAlpha(params["y"], params["values"])
        return TableAlpha(*params)
    raise InvalidParameter(f"unknown amplitude family {family!r}")


@dataclass
class Mode:
    k: int
    alpha: object


@dataclass
class TestFunction:
    """phi(x, y) = sum over modes of alpha_k(y) f_k(x), all k >= 2."""

    __test__ = False
    modes: list = field(default_factory=list)

    def __post_init__(self):
        if not self.modes:
            raise InvalidParameter("a test function needs at least one mode")
        for m in self.modes:
            if m.k < 2:
                raise InvalidParameter("modes must be non-constant (k >= 2)")

    @classmethod
    def single(cls, k, alpha=None):
        return cls([Mode(k, alpha if alpha is not None else ConstAlpha(1.0))])

    @classmethod
    def from_config(cls, entries):
        return cls([Mode(int(e["k"]), make_alpha(e.get("family", "const"), e.get("params", [1.0])))
                    for e in entries])

    def check(self, spectrum):
        for m in self.modes:
            if m.k > spectrum.N:
                raise InvalidParameter(f"mode k={m.k} exceeds N={spectrum.N}")

    def alphas(self, y):
        return np.array([m.alpha(y) for m in self.modes], dtype=float)

    def __call__(self, spectrum, x, y):
        """phi at (x, y) in macroscopic height units."""
        x = np.asarray(x)
        y = np.asarray(y, dtype=float)
        out = np.zeros(np.broadcast(x, y).shape)
        for m in self.modes:
            out = out + m.alpha(y) * spectrum.f(m.k)[x]
        return out


class HarmonicExtension:
    """Exact harmonic extension psi anchored at level T/N."""

    def __init__(self, tf, spectrum, a_N, T):
        tf.check(spectrum)
        if a_N <= 0:
            raise InvalidParameter("a_N must be positive")
        self.tf = tf
        self.spectrum = spectrum
        self.N = spectrum.N
        self.a_N = float(a_N)
        self.T = T
        self.level = T / self.N
        self.ks = np.array([m.k for m in tf.modes])
        self.amplitudes = tf.alphas(T / (self.N * self.a_N))
        self.rates = np.array([spectral.vertical_rate(spectrum.lam(k)) for k in self.ks])
        self.F = spectrum.vectors[:, self.ks - 1]

    def __call__(self, x, y):
        x = np.asarray(x)
        y = np.asarray(y, dtype=float)
        out = np.zeros(np.broadcast(x, y).shape)
        for i in range(len(self.ks)):
            out = out + self.amplitudes[i] * self.F[x, i] * np.exp(self.rates[i] * (y - self.level))
        return out

    def phi(self, x, y):
        """Rescaled test function phi(x, y / a_N) on the cylinder."""
        return self.tf(self.spectrum, x, np.asarray(y, dtype=float) / self.a_N)

    def beta(self, i, y):
        """Mode-i coefficient of phi - psi at height y."""
        m = self.tf.modes[i]
        return m.alpha(np.asarray(y, dtype=float) / self.a_N) - self.amplitudes[i] * np.exp(
            self.rates[i] * (np.asarray(y, dtype=float) - self.level))


def psi_eval(ext, x, y):
    return ext(x, y)


def beta_eval(ext, i, y):
    return ext.beta(i, y)


class LayerHitFunction:
    """H(x, y) = P_(x,y)(first visit to level zeta_2 is at column zeta_1).

    Spectral form (1/N) sum_k f_k(x) f_k(zeta_1) exp(q_k (y - zeta_2)) below
    the target level, the indicator on it, and 0 above.
    """

    def __init__(self, zeta, spectrum):
        z1, z2 = int(zeta[0]), int(zeta[1])
        if not 0 <= z1 < spectrum.N:
            raise InvalidParameter(f"column {z1} outside 0..{spectrum.N - 1}")
        self.zeta = (z1, z2)
        self.spectrum = spectrum
        self.N = spectrum.N
        self.rates = spectral.vertical_rate(spectrum.eigenvalues)
        self.coef = spectrum.vectors[z1, :] / self.N

    def __call__(self, x, y):
        x = np.asarray(x)
        y = np.asarray(y, dtype=float)
        xb, yb = np.broadcast_arrays(x, y)
        out = np.zeros(xb.shape)
        below = yb < self.zeta[1]
        if np.any(below):
            d = yb[below] - self.zeta[1]
            E = np.exp(np.multiply.outer(d, self.rates)) * self.coef
            vals = np.sum(self.spectrum.vectors[xb[below]] * E, axis=-1)
            if vals.min(initial=0.0) < -CLAMP_TOL:
                raise NumericFailure(f"hitting probability {vals.min():.3g} is negative")
            out[below] = np.maximum(vals, 0.0)
        on = yb == self.zeta[1]
        out[on] = (xb[on] == self.zeta[0]).astype(float)
        return out if out.ndim else float(out)


def h_zeta_eval(H, x, y):
    return H(x, y)


def harmonicity_residual(f, g, ys, P=None):
    """max |(P_cyl f - f)(x, y)| over all columns x and heights y in ys."""
    P = g.kernel_matrix() if P is None else P
    xs = np.arange(g.N)
    worst = 0.0
    for y in ys:
        v = f(xs, y)
        r = 0.25 * f(xs, y + 1) + 0.25 * f(xs, y - 1) + 0.5 * (P @ v) - v
        worst = max(worst, float(np.max(np.abs(r))))
    return worst


def solve_layer_hit_slab(g, zeta, depth=200):
    """Hitting law of (zeta_1, zeta_2) by a sparse linear solve on a slab.

    Unknowns live on levels zeta_2 - depth .. zeta_2 - 1; the walk is
    reflected at the bottom level.  Returns (levels, values[level, x]).
    """
    N = g.N
    z1, z2 = zeta
    levels = np.arange(z2 - depth, z2)
    n = N * depth
    P = sp.csr_matrix(g.kernel_matrix())
    idx = lambda li, x: li * N + x  # noqa: E731
    rows, cols, vals = [], [], []
    b = np.zeros(n)
    Pc = P.tocoo()
    for li in range(depth):
        for x in range(N):
            r = idx(li, x)
            rows.append(r)
            cols.append(r)
            vals.append(1.0)
            # down move, reflected at the bottom
            dn = li - 1 if li > 0 else li
            rows.append(r)
            cols.append(idx(dn, x))
            vals.append(-0.25)
            if li + 1 < depth:
                rows.append(r)
                cols.append(idx(li + 1, x))
                vals.append(-0.25)
            elif x == z1:
                b[r] += 0.25
        for x, z, p in zip(Pc.row, Pc.col, Pc.data):
            rows.append(idx(li, x))
            cols.append(idx(li, z))
            vals.append(-0.5 * p)
    A = sp.csr_matrix((vals, (rows, cols)), shape=(n, n))
    u = spla.spsolve(A.tocsc(), b)
    return levels, u.reshape(depth, N)


def variance_sigma2(alpha_vals, gammas, y0):
    """sum_k alpha_k(y0)^2 (1 - exp(-2 gamma_k y0)) / (2 gamma_k)."""
    a = np.asarray(alpha_vals, dtype=float)
    gm = np.asarray(gammas, dtype=float)
    if np.any(gm <= 0) or y0 < 0:
        raise InvalidParameter("rates must be positive and y0 non-negative")
    return float(np.sum(a**2 * -np.expm1(-2 * gm * y0) / (2 * gm)))


def green_slice(mu, y, yp):
    """Green function of -d^2/dy^2 + mu on [0, inf) with Dirichlet condition at 0."""
    if mu <= 0:
        raise InvalidParameter("mu must be positive")
    r = math.sqrt(mu)
    return (np.exp(-r * np.abs(np.subtract(y, yp))) - np.exp(-r * np.add(y, yp))) / (2 * r)


def fgf_variance(coeffs, nus, s):
    """sum_k phi_k^2 nu_k^(-s) over non-constant modes."""
    c = np.asarray(coeffs, dtype=float)
    nu = np.asarray(nus, dtype=float)
    if np.any(nu <= 0):
        raise InvalidParameter("eigenvalues of the generator must be positive")
    return float(np.sum(c**2 * nu ** (-float(s))))
