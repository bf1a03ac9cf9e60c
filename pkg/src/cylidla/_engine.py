"""Compiled kernels for cylinder walks and IDLA growth.

Cluster storage: a dense boolean grid occ[x, y] for levels 1..H-1 (level 0
and below are always occupied) plus filled[x], the height up to which
column x is completely occupied.
"""

import math

import numba as nb
import numpy as np

from ._rng import stream_key as stream_key_nb
from ._rng import sub_key, uniform

OK = 0
OVERFLOW = 1
BUDGET = 2


@nb.njit(inline="always", cache=True)
def horizontal_move(x, v, nbr, deg):
    """Apply P_N to x using v uniform on [0, 1)."""
    if v < 0.5 or deg == 0:
        return x
    i = int((v - 0.5) * 2.0 * deg)
    if i >= deg:
        i = deg - 1
    return nbr[x, i]


@nb.njit(cache=True)
def cylinder_step(x, y, u, nbr, deg):
    """One step of the cylinder walk; returns (x, y, moved_horizontally)."""
    if u < 0.25:
        return x, y + 1, False
    if u < 0.5:
        return x, y - 1, False
    return horizontal_move(x, (u - 0.5) * 2.0, nbr, deg), y, True


@nb.njit(cache=True)
def sample_row(cdf_row, u):
    n = cdf_row.shape[0]
    lo = 0
    hi = n - 1
    while lo < hi:
        mid = (lo + hi) // 2
        if cdf_row[mid] > u:
            hi = mid
        else:
            lo = mid + 1
    return lo


@nb.njit(cache=True)
def excursion(x, y, L, key, c0, nbr, deg, N, scap, kcdf, use_kernel, budget):
    """Run from (x, y), y <= L, until the first visit to level L + 1.

    Returns (x, counter, steps, status).  With use_kernel the exit column
    is drawn level by level from the exact one-level hitting kernel;
    otherwise the walk is simulated and, once more than scap horizontal
    moves have been made (scap >= 0), the column is replaced by a uniform
    draw.
    """
    c = c0
    steps = 0
    if use_kernel:
        while y <= L:
            x = sample_row(kcdf[x], uniform(key, c))
            c += 1
            y += 1
            steps += 1
        return x, c, steps, OK
    s = 0
    while y <= L:
        if scap >= 0 and s > scap:
            x = int(uniform(key, c) * N)
            if x >= N:
                x = N - 1
            c += 1
            return x, c, steps, OK
        u = uniform(key, c)
        c += 1
        steps += 1
        if steps > budget:
            return x, c, steps, BUDGET
        if u < 0.25:
            y += 1
        elif u < 0.5:
            y -= 1
        else:
            x = horizontal_move(x, (u - 0.5) * 2.0, nbr, deg)
            s += 1
    return x, c, steps, OK


@nb.njit(cache=True)
def walk_path(x, y, key, c0, nbr, deg, n_steps):
    """Raw cylinder path of n_steps steps (no fast-forward)."""
    xs = np.empty(n_steps + 1, dtype=np.int64)
    ys = np.empty(n_steps + 1, dtype=np.int64)
    xs[0] = x
    ys[0] = y
    for i in range(n_steps):
        x, y, _ = cylinder_step(x, y, uniform(key, c0 + i), nbr, deg)
        xs[i + 1] = x
        ys[i + 1] = y
    return xs, ys


@nb.njit(cache=True)
def first_hits(starts_x, start_y, m, keys, nbr, deg, N, scap, kcdf, use_kernel, budget):
    """Column of the first visit to level m for many independent walks."""
    n = keys.shape[0]
    out = np.empty(n, dtype=np.int64)
    for i in range(n):
        x, c, steps, status = excursion(starts_x[i], start_y, m - 1, keys[i], 0, nbr, deg, N,
                                        scap, kcdf, use_kernel, budget)
        if status != OK:
            return out, i
        out[i] = x
    return out, n


@nb.njit(cache=True)
def _refresh_filled(occ, filled, x):
    H = occ.shape[1]
    while filled[x] + 1 < H and occ[x, filled[x] + 1]:
        filled[x] += 1


@nb.njit(cache=True)
def process(occ, filled, nbr, deg, keys, starts, j0, stop_level, layered, scap,
            kcdf, use_kernel, budget, out_x, out_y, out_steps):
    """Release particles j0.. in order and let each settle.

    Particle j uses the stream keys[j]: counter 0 gives its release column
    (unless starts[j] >= 0 fixes it), later counters drive its steps, and
    sub-streams of keys[j] drive its fast-forwarded excursions.  A particle
    reaching stop_level is frozen there.  In layered mode the particle is
    placed directly on the first level above the fully occupied floor
    (its first hit of that level is uniform); otherwise it is released at
    level 0 and the floor is taken to be level 0.

    Returns (next_j, status); on OVERFLOW the caller grows occ and resumes.
    """
    N = occ.shape[0]
    H = occ.shape[1]
    n = keys.shape[0]
    hmin = filled.min()
    for j in range(j0, n):
        key = keys[j]
        if starts[j] >= 0:
            x = starts[j]
        else:
            x = int(uniform(key, 0) * N)
            if x >= N:
                x = N - 1
        c = 1
        if layered:
            L = min(hmin, stop_level - 1)
            y = L + 1
        else:
            L = 0
            y = 0
        steps = 0
        exc = 0
        while True:
            if y >= stop_level:
                break
            if y > L:
                if y >= H - 1:
                    return j, OVERFLOW
                if not occ[x, y]:
                    break
            else:
                x, _, st, status = excursion(x, y, L, sub_key(key, exc), 0, nbr, deg, N,
                                             scap, kcdf, use_kernel, budget)
                exc += 1
                steps += st
                y = L + 1
                if status != OK or steps > budget:
                    return j, BUDGET
                continue
            u = uniform(key, c)
            c += 1
            steps += 1
            if steps > budget:
                return j, BUDGET
            if u < 0.25:
                y += 1
            elif u < 0.5:
                y -= 1
            else:
                x = horizontal_move(x, (u - 0.5) * 2.0, nbr, deg)
        if y >= H - 1:
            return j, OVERFLOW
        occ[x, y] = True
        if y == filled[x] + 1:
            old = filled[x]
            _refresh_filled(occ, filled, x)
            if old == hmin:
                hmin = filled.min()
        out_x[j] = x
        out_y[j] = y
        out_steps[j] = steps
    return n, OK


def s_cap(tau_rel, eps):
    """Horizontal-move cap after which the column is treated as mixed."""
    if eps < 0:
        raise ValueError("eps must be >= 0")
    if eps == 0:
        return -1
    return int(math.ceil(tau_rel * math.log(2.0 / eps)))


@nb.njit(cache=True)
def process_stacks(occ, filled, cnt, stack_key, nbr, deg, keys, starts, j0, stop_level, scap,
                   kcdf, use_kernel, budget, out_x, out_y, out_steps):
    """Site-stack engine: every site above level 0 owns an instruction stream.

    The instruction at (x, y) numbered cnt[x, y] is the uniform of the stream
    stream_key(stack_key, y*N + x) at that counter; a down move from level 1
    is resolved as a whole excursion driven by the instruction's sub-stream.
    A particle's own stream only fixes its release: the column (counter 0,
    unless pinned) and the exit of the excursion from level 0 (sub-stream 0).
    The final cluster does not depend on the processing order.
    """
    N = occ.shape[0]
    H = occ.shape[1]
    n = keys.shape[0]
    for j in range(j0, n):
        key = keys[j]
        if starts[j] >= 0:
            x = starts[j]
        else:
            x = int(uniform(key, 0) * N)
            if x >= N:
                x = N - 1
        x, _, steps, status = excursion(x, 0, 0, sub_key(key, 0), 0, nbr, deg, N, scap, kcdf,
                                        use_kernel, budget)
        if status != OK:
            return j, BUDGET
        y = 1
        while y < stop_level:
            if y >= H - 1:
                return j, OVERFLOW
            if not occ[x, y]:
                break
            skey = stream_key_nb(stack_key, np.uint64(y * N + x))
            i = cnt[x, y]
            cnt[x, y] = i + 1
            u = uniform(skey, i)
            steps += 1
            if steps > budget:
                return j, BUDGET
            if u < 0.25:
                y += 1
            elif u < 0.5:
                if y == 1:
                    x, _, st, status = excursion(x, 0, 0, sub_key(skey, i), 0, nbr, deg, N, scap,
                                                 kcdf, use_kernel, budget)
                    steps += st
                    if status != OK:
                        return j, BUDGET
                else:
                    y -= 1
            else:
                x = horizontal_move(x, (u - 0.5) * 2.0, nbr, deg)
        if y >= H - 1:
            return j, OVERFLOW
        occ[x, y] = True
        if y == filled[x] + 1:
            _refresh_filled(occ, filled, x)
        out_x[j] = x
        out_y[j] = y
        out_steps[j] = steps
    return n, OK
