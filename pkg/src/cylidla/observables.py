"""Scalar functionals of clusters and the closed-form bound evaluators."""

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidParameter


@dataclass
class PairingResult:
    raw: float
    normalized: float
    K: int
    T: int
    a_N: float


def _sites(c):
    return c.sites() if hasattr(c, "sites") else np.asarray(c, dtype=np.int64).reshape(-1, 2)


def discrepancy_pairing(c, f, T, N=None, a_N=1.0, K=1, fast=False, normalization="sqrt"):
    """<<D_T, f>>: sum of f over A minus the sum over the flat region R_{T/N}.

    The general path sums f over the two halves of the symmetric difference
    A(T) xor R_{T/N}.  The fast path (valid when f has zero horizontal
    average) simply sums f over A_+(T).  normalization: "sqrt" divides by
    sqrt(N a_N), "N" by N, "none" leaves the raw value.
    """
    N = c.N if N is None else N
    sites = _sites(c)
    if fast:
        raw = float(np.sum(f(sites[:, 0], sites[:, 1]))) if len(sites) else 0.0
    else:
        top = math.floor(T / N)
        inside = sites[:, 1] <= top
        extra = sites[~inside]
        raw = float(np.sum(f(extra[:, 0], extra[:, 1]))) if len(extra) else 0.0
        occupied = set(map(tuple, sites[inside].tolist()))
        holes = [(x, y) for y in range(1, top + 1) for x in range(N) if (x, y) not in occupied]
        if holes:
            hx, hy = np.array(holes).T
            raw -= float(np.sum(f(hx, hy)))
    if normalization == "sqrt":
        norm = math.sqrt(N * a_N)
    elif normalization == "N":
        norm = float(N)
    elif normalization == "none":
        norm = 1.0
    else:
        raise InvalidParameter(f"unknown normalization {normalization!r}")
    return PairingResult(raw, raw / norm, K, int(T), float(a_N))


def zero_average_check(f, N, levels):
    xs = np.arange(N)
    worst = max(abs(float(np.sum(f(xs, np.full(N, y))))) for y in levels)
    return worst <= 1e-9 * N


def _layer_energy(ext, y):
    """sum_x psi(x, y)^2 for a completely occupied layer."""
    return ext.N * float(np.sum(ext.amplitudes**2 * np.exp(2 * ext.rates * (y - ext.level))))


def q_n_statistic(c, ext, shortcut=True):
    """Q_N = (1/(N a_N)) sum over A_+ of psi^2."""
    sites = _sites(c)
    if len(sites) == 0:
        return 0.0
    if shortcut and hasattr(c, "inner_radius"):
        full = c.inner_radius()
        total = math.fsum(_layer_energy(ext, y) for y in range(1, full + 1))
        part = sites[sites[:, 1] > full]
    else:
        total, part = 0.0, sites
    if len(part):
        total += math.fsum(ext(part[:, 0], part[:, 1]) ** 2)
    return total / (ext.N * ext.a_N)


def w_n_closed_form(ext):
    """W_N: value of Q_N on the flat cluster R_{T/N}, in closed form."""
    a, q = ext.a_N, ext.rates
    return float(np.sum(ext.amplitudes**2 * -np.expm1(-2 * q * ext.level) / (a * -np.expm1(-2 * q))))


def martingale_trace_psi(sites, ext, normalization="sqrt"):
    """Cumulative pairing of psi with the settled sites, starting at M(0) = 0."""
    sites = np.asarray(sites).reshape(-1, 2)
    vals = ext(sites[:, 0], sites[:, 1]) if len(sites) else np.zeros(0)
    norm = math.sqrt(ext.N * ext.a_N) if normalization == "sqrt" else float(ext.N)
    return np.concatenate([[0.0], np.cumsum(vals)]) / norm


def martingale_trace_hzeta(sites, H):
    """M_zeta(t) = sum_{s <= t} (H(X_s, Y_s) - 1/N) for a stopped run."""
    sites = np.asarray(sites).reshape(-1, 2)
    vals = H(sites[:, 0], sites[:, 1]) - 1.0 / H.N if len(sites) else np.zeros(0)
    return np.concatenate([[0.0], np.cumsum(vals)])


def log_plus(x):
    return max(0.0, math.log(x)) if x > 0 else 0.0


def L_T(N, T):
    return math.log(N) + log_plus(T / N)


def t_sharp(N, tau_mix):
    return N * math.sqrt(tau_mix) * math.log(N) ** 2


def delta_n(N, T, tau_mix=None, C=1.0):
    """C max{log N, sqrt((T ^ T#)/N (log N + log_+(T/N)))}.

    Without tau_mix the cap T# is dropped (T ^ T# <= T, so this is an upper
    envelope).
    """
    if T < 1 or N < 2:
        raise InvalidParameter("need T >= 1 and N >= 2")
    Tc = T if tau_mix is None else min(T, t_sharp(N, tau_mix))
    return C * max(math.log(N), math.sqrt(Tc / N * L_T(N, T)))


def ell_star(N, T, nu=1.0, C1=None):
    """Inner-bound scale C_1 sqrt((T/N) L_T) with C_1 = 2 sqrt(nu + 4) by default."""
    if T < 1:
        raise InvalidParameter("need T >= 1")
    C1 = 2 * math.sqrt(nu + 4) if C1 is None else C1
    return C1 * math.sqrt(T / N * L_T(N, T))


def apriori_tail_bound(N, T, h):
    """min(1, N^(-floor h) binom(T, floor h + 1)) evaluated in log space."""
    if T < 0 or h < 0:
        raise InvalidParameter("need T >= 0 and h >= 0")
    m = math.floor(h)
    if T < m + 1:
        return 0.0
    logb = math.lgamma(T + 1) - math.lgamma(m + 2) - math.lgamma(T - m) - m * math.log(N)
    return 1.0 if logb >= 0 else math.exp(logb)


@dataclass
class BoundReport:
    N: int
    T: int
    nu: float
    C: float
    C1: float
    tau_mix: object
    t_sharp: object
    L_T: float
    delta_N: float
    ell_star: float
    apriori_tail: dict

    def to_dict(self):
        return dict(self.__dict__)


def bound_report(N, T, nu=1.0, C=1.0, tau_mix=None, heights=None):
    C1 = 2 * math.sqrt(nu + 4)
    level = T / N
    if heights is None:
        heights = [level + d for d in (0, 1, 2, 4, 8)]
    return BoundReport(
        N, T, nu, C, C1, tau_mix,
        None if tau_mix is None else t_sharp(N, tau_mix),
        L_T(N, T), delta_n(N, T, tau_mix, C), ell_star(N, T, nu),
        {f"{h:g}": apriori_tail_bound(N, T, h) for h in heights},
    )
