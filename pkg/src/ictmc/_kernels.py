"""Inner loops for sequential transition stepping.

All wrappers take a batch of gambles as a C-contiguous ``(batch, states)``
array plus a ``(batch,)`` tail vector and return a new array after ``n``
uniform steps ``f <- f + dt * Qf``.  With numba present the loops are JIT
compiled (cached on disk); otherwise a vectorised numpy path runs the same
arithmetic.
"""

from __future__ import annotations

import numpy as np

try:  # pragma: no cover - exercised implicitly by whichever env runs
    from numba import njit

    HAVE_NUMBA = True
except Exception:  # pragma: no cover
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        def wrap(fn):
            return fn

        if args and callable(args[0]):
            return args[0]
        return wrap


@njit(cache=True)
def _count_steps_nb(vals, tails, lo, hi, dt, n_steps):  # pragma: no cover
    # vals has shape (states, batch); ascending z reads z+1 before it is
    # overwritten, so the update is safely in place.
    n_states, batch = vals.shape
    for _ in range(n_steps):
        for z in range(n_states - 1):
            for b in range(batch):
                d = vals[z + 1, b] - vals[z, b]
                lam = hi if d >= 0.0 else lo
                vals[z, b] += dt * (lam * d)
        for b in range(batch):
            d = tails[b] - vals[n_states - 1, b]
            lam = hi if d >= 0.0 else lo
            vals[n_states - 1, b] += dt * (lam * d)


@njit(cache=True)
def _extreme_steps_nb(vals, mats, dt, n_steps):  # pragma: no cover
    # vals has shape (batch, states); mats has shape (k, states, states).
    k, n_states, _ = mats.shape
    batch = vals.shape[0]
    step = np.empty(n_states)
    for _ in range(n_steps):
        for b in range(batch):
            for x in range(n_states):
                best = -1.0e300
                for m in range(k):
                    acc = 0.0
                    for y in range(n_states):
                        acc += mats[m, x, y] * vals[b, y]
                    if acc > best:
                        best = acc
                step[x] = best
            for x in range(n_states):
                vals[b, x] += dt * step[x]


def run_count_steps(vals_bn: np.ndarray, tails: np.ndarray, lo: float, hi: float,
                    dt: float, n_steps: int) -> np.ndarray:
    """n uniform steps of the count-interval generator on a gamble batch."""
    if n_steps <= 0:
        return vals_bn.copy()
    if HAVE_NUMBA:
        # For a single-gamble batch the transpose is still contiguous, so
        # np.ascontiguousarray would alias the caller's array; the kernel
        # steps in place, so take an explicit copy.
        work = np.array(vals_bn.T, dtype=np.float64, order="C", copy=True)
        _count_steps_nb(work, np.ascontiguousarray(tails, dtype=np.float64),
                        float(lo), float(hi), float(dt), int(n_steps))
        return np.ascontiguousarray(work.T)
    vals = vals_bn.copy()
    d = np.empty_like(vals)
    for _ in range(n_steps):
        d[:, :-1] = vals[:, 1:] - vals[:, :-1]
        d[:, -1] = tails - vals[:, -1]
        lam = np.where(d >= 0.0, hi, lo)
        vals += dt * (lam * d)
    return vals


def run_extreme_steps(vals_bn: np.ndarray, mats: np.ndarray, dt: float,
                      n_steps: int) -> np.ndarray:
    """n uniform steps of an extreme-family envelope on a gamble batch."""
    if n_steps <= 0:
        return vals_bn.copy()
    if HAVE_NUMBA:
        # np.ascontiguousarray would alias an already-contiguous input;
        # the kernel steps in place, so take an explicit copy.
        work = np.array(vals_bn, dtype=np.float64, order="C", copy=True)
        _extreme_steps_nb(work, np.ascontiguousarray(mats, dtype=np.float64),
                          float(dt), int(n_steps))
        return work
    vals = vals_bn.copy()
    for _ in range(n_steps):
        best = np.einsum("kxy,by->bkx", mats, vals).max(axis=1)
        vals += dt * best
    return vals


@njit(cache=True)
def _row_interval_steps_nb(vals, lower, upper, dt, n_steps):  # pragma: no cover
    # vals has shape (batch, states).  Greedy water filling per row: start
    # at the lower bounds and hand the budget to coordinates in decreasing
    # payoff order, ties broken by lowest state index (stable insertion
    # argsort keeps that tie rule independent of the sort backend).
    batch, n = vals.shape
    budget0 = np.empty(n)
    for x in range(n):
        s = 0.0
        for y in range(n):
            s += lower[x, y]
        budget0[x] = -s if s < 0.0 else 0.0
    order = np.empty(n, np.int64)
    step = np.empty(n)
    for _ in range(n_steps):
        for b in range(batch):
            v = vals[b]
            for i in range(n):
                j = i
                while j > 0 and v[order[j - 1]] < v[i]:
                    order[j] = order[j - 1]
                    j -= 1
                order[j] = i
            for x in range(n):
                acc = 0.0
                for y in range(n):
                    acc += lower[x, y] * v[y]
                budget = budget0[x]
                for k in range(n):
                    if budget <= 0.0:
                        break
                    y = order[k]
                    room = upper[x, y] - lower[x, y]
                    take = room if room < budget else budget
                    acc += take * v[y]
                    budget -= take
                step[x] = acc
            for x in range(n):
                vals[b, x] += dt * step[x]


def run_row_interval_steps(vals_bn: np.ndarray, lower: np.ndarray,
                           upper: np.ndarray, dt: float,
                           n_steps: int) -> np.ndarray:
    """n uniform steps of a row-interval envelope on a gamble batch."""
    from .rates import _row_interval_apply

    if n_steps <= 0:
        return vals_bn.copy()
    if HAVE_NUMBA:
        work = np.array(vals_bn, dtype=np.float64, order="C", copy=True)
        _row_interval_steps_nb(work, np.ascontiguousarray(lower, dtype=np.float64),
                               np.ascontiguousarray(upper, dtype=np.float64),
                               float(dt), int(n_steps))
        return work
    vals = vals_bn.copy()
    for _ in range(n_steps):
        for b in range(vals.shape[0]):
            vals[b] += dt * _row_interval_apply(lower, upper, vals[b])
    return vals
