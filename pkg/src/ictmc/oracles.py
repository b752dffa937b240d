"""Independent reference computations for cross-checking the engine.

Everything here deliberately avoids the production code path: the matrix
exponential is a scaling-and-squaring Taylor sum with a tracked remainder,
the two-state chain uses its closed form, and the Monte Carlo bound
simulates explicit piecewise-constant policies.  Tests compare the two
routes; neither is ever expressed through the other.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .finitary import FinitaryGamble, evaluate_on_paths
from .rates import RateMatrix, UpperRateOperator
from .spaces import StateSpace

__all__ = [
    "OracleResult",
    "precise_exponential",
    "two_state_closed_form",
    "poisson_jump_prob",
    "policy_mc_lower",
    "sample_vertex_matrix",
]

_EPS = float(np.finfo(np.float64).eps)


@dataclass(frozen=True)
class OracleResult:
    """A reference value together with a rigorous (or statistical) error bound."""

    value: np.ndarray | float
    error_bound: float
    detail: str = ""


def _as_square(matrix) -> np.ndarray:
    if isinstance(matrix, RateMatrix):
        return np.array(matrix.entries, dtype=np.float64, copy=True)
    arr = np.array(matrix, dtype=np.float64, copy=True)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise ValueError("need a square matrix")
    return arr


def _looks_like_rate_matrix(a: np.ndarray) -> bool:
    off = a.copy()
    np.fill_diagonal(off, 0.0)
    scale = float(np.max(np.abs(a))) + 1.0
    return off.min(initial=0.0) >= -1e-12 * scale and \
        float(np.max(np.abs(a.sum(axis=1)))) <= 1e-10 * scale


def precise_exponential(matrix, t: float = 1.0) -> OracleResult:
    """``exp(t * matrix)`` by scaled Taylor summation with a tracked bound.

    The error bound adds the series remainder (geometric tail at scaled
    norm <= 1/2), the summation rounding, and the growth of both through
    every squaring.  For rate matrices the exponential is stochastic, which
    keeps the bound near machine precision.
    """
    a = _as_square(matrix) * float(t)
    n = a.shape[0]
    norm = float(np.max(np.abs(a).sum(axis=1)))
    squarings = max(0, math.ceil(math.log2(norm / 0.5))) if norm > 0.5 else 0
    b = a / 2.0 ** squarings
    theta = norm / 2.0 ** squarings

    total = np.eye(n)
    term = np.eye(n)
    term_bound = 1.0
    k = 0
    while k < 64:
        k += 1
        term = term @ b / k
        total = total + term
        term_bound *= theta / k
        if term_bound < 1e-20 and k >= 4:
            break
    # geometric tail: remaining terms shrink by at least theta/(k+1) <= 1/2
    ratio = theta / (k + 1)
    remainder = term_bound * ratio / max(1.0 - ratio, 0.5)

    exp_norm = 1.0 if _looks_like_rate_matrix(a) else math.exp(theta)
    err = remainder + 2.0 * k * n * _EPS * exp_norm
    for _ in range(squarings):
        total = total @ total
        err = err * (2.0 * exp_norm + err) + n * _EPS * exp_norm * exp_norm
        if exp_norm != 1.0:
            exp_norm = exp_norm * exp_norm
    return OracleResult(value=total, error_bound=float(err),
                        detail=f"taylor k={k}, squarings={squarings}")


def two_state_closed_form(up_rate: float, down_rate: float,
                          t: float) -> OracleResult:
    """Transition matrix of the two-state chain with rates up (0->1), down (1->0).

    Closed form: both rows relax to the stationary split at speed
    ``up + down``.  Degenerate zero rates give the identity (with a warning,
    since such a chain never moves).
    """
    up, down, t = float(up_rate), float(down_rate), float(t)
    if up < 0.0 or down < 0.0:
        raise ValueError("rates must be nonnegative")
    if t < 0.0:
        raise ValueError("time must be nonnegative")
    s = up + down
    if s == 0.0:
        warnings.warn("both rates are zero; the chain never moves",
                      UserWarning, stacklevel=2)
        return OracleResult(value=np.eye(2), error_bound=0.0,
                            detail="degenerate: identity")
    mixed = -math.expm1(-s * t)  # 1 - exp(-s t), accurate near 0
    p01 = up / s * mixed
    p10 = down / s * mixed
    value = np.array([[1.0 - p01, p01], [p10, 1.0 - p10]])
    return OracleResult(value=value, error_bound=8.0 * _EPS,
                        detail="closed form")


def poisson_jump_prob(rate: float, dt: float) -> OracleResult:
    """Probability that a Poisson clock of the given rate ticks within dt."""
    rate, dt = float(rate), float(dt)
    if rate < 0.0 or dt < 0.0:
        raise ValueError("rate and dt must be nonnegative")
    value = -math.expm1(-rate * dt)
    return OracleResult(value=value, error_bound=4.0 * _EPS * (1.0 + rate * dt),
                        detail="1 - exp(-rate*dt)")


# ---------------------------------------------------------------------------
# policy Monte Carlo


def sample_vertex_matrix(generator: UpperRateOperator,
                         rng: np.random.Generator,
                         pick: int | None = None) -> np.ndarray:
    """One extreme rate matrix of the generator's credal set.

    ``pick`` selects deterministically where a finite menu exists (an
    extreme index, or 0/1 for the all-lower/all-upper count rates); row
    interval sets use a random per-row greedy fill, which always lands on a
    vertex of the row polytope.

    Count-interval generators return the augmented ``(n+1)``-square matrix
    whose final pseudo-state absorbs everything past the window.
    """
    if generator.extremes is not None:
        mats = generator.extremes
        idx = int(pick) % len(mats) if pick is not None else int(rng.integers(len(mats)))
        return np.array(mats[idx].entries, copy=True)

    if generator.interval is not None:
        n = generator.space.size
        lo, hi = generator.interval.lower, generator.interval.upper
        if pick == 0:
            lams = np.full(n, lo)
        elif pick == 1:
            lams = np.full(n, hi)
        else:
            lams = np.where(rng.random(n) < 0.5, lo, hi)
        aug = np.zeros((n + 1, n + 1))
        idx = np.arange(n)
        aug[idx, idx] = -lams
        aug[idx, idx + 1] = lams
        return aug

    lo, hi = generator.row_lower, generator.row_upper
    n = lo.shape[0]
    q = lo.copy()
    for x in range(n):
        budget = -float(lo[x].sum())
        if budget <= 0.0:
            continue
        if pick == 0:
            order = np.arange(n)
        elif pick == 1:
            order = np.arange(n)[::-1]
        else:
            order = rng.permutation(n)
        for y in order:
            room = float(hi[x, y] - lo[x, y])
            grab = min(room, budget)
            q[x, y] += grab
            budget -= grab
            if budget <= 1e-15 * (1.0 + abs(float(lo[x].sum()))):
                break
    return q


def _jump_tables(q: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Holding rates and jump-target cdfs of one rate matrix."""
    rates = -np.diag(q).copy()
    off = q.copy()
    np.fill_diagonal(off, 0.0)
    safe = np.where(rates > 0.0, rates, 1.0)
    cdf = np.cumsum(off / safe[:, None], axis=1)
    return rates, cdf


def _simulate_interval(x: np.ndarray, t_start: float, t_end: float,
                       rates: np.ndarray, cdf: np.ndarray,
                       rng: np.random.Generator) -> np.ndarray:
    """Advance every path from t_start to t_end under one rate matrix."""
    t_cur = np.full(x.shape, t_start)
    alive = rates[x] > 0.0
    while alive.any():
        idx = np.flatnonzero(alive)
        r = rates[x[idx]]
        t_new = t_cur[idx] + rng.exponential(1.0, idx.size) / r
        jumped = t_new < t_end
        done = idx[~jumped]
        alive[done] = False
        hop = idx[jumped]
        if hop.size:
            t_cur[hop] = t_new[jumped]
            rows = cdf[x[hop]]
            u = rng.random(hop.size) * rows[:, -1]
            x[hop] = (u[:, None] <= rows).argmax(axis=1)
            alive[hop] = rates[x[hop]] > 0.0
    return x


def _paths_payoff(f: FinitaryGamble, states: np.ndarray,
                  escaped_index: int) -> np.ndarray:
    if f.expr is not None:
        # expression evaluation already treats index == window size as the
        # out-of-window sentinel, which is exactly the pseudo-state's index
        return evaluate_on_paths(f, np.minimum(states, f.space.size))
    if isinstance(f.tail, np.ndarray):
        raise ValueError("policy MC needs a scalar-tail dense gamble")
    vals = np.empty(states.shape[0])
    escaped = (states >= escaped_index).any(axis=1)
    inside = ~escaped
    if inside.any():
        vals[inside] = evaluate_on_paths(f, states[inside])
    vals[escaped] = float(f.tail)
    return vals


def policy_mc_lower(generator: UpperRateOperator, start_state: int,
                    f: FinitaryGamble, n_policies: int = 8,
                    n_paths: int = 4000, seed: int = 0) -> OracleResult:
    """Statistical lower bound on the upper expectation from a known start.

    Each policy fixes one extreme rate matrix per grid interval; simulating
    it gives an expectation the upper envelope must dominate.  The first
    policies are the constant selections (one per extreme matrix, or the
    all-lower/all-upper fills), the rest are random vertices.  Selection by
    the pilot means alone would bias the maximum
    upward (the winner of many noisy means overshoots), so the winning
    policy is re-simulated on fresh paths and that unbiased mean is
    returned, with a three-standard-error bound.
    """
    if n_policies < 1 or n_paths < 2:
        raise ValueError("need at least one policy and two paths")
    space = generator.space
    if f.space != space:
        raise ValueError("gamble space does not match the generator")
    if not 0 <= start_state < space.size:
        raise ValueError("start state must be retained")

    rng = np.random.default_rng(seed)
    pts = f.grid.points
    boundaries = (0.0,) + pts if pts[0] > 0.0 else pts
    record_at = set(pts)

    def run_policy(tables):
        x = np.full(n_paths, start_state, dtype=np.int64)
        recorded = []
        if pts[0] == 0.0:
            recorded.append(x.copy())
        for j in range(len(boundaries) - 1):
            rates, cdf = tables[j]
            x = _simulate_interval(x, boundaries[j], boundaries[j + 1],
                                   rates, cdf, rng)
            if boundaries[j + 1] in record_at:
                recorded.append(x.copy())
        states = np.stack(recorded, axis=1)
        payoff = _paths_payoff(f, states, space.size)
        mean = float(payoff.mean())
        sigma = float(payoff.std(ddof=1)) / math.sqrt(n_paths)
        return mean, sigma

    n_constant = len(generator.extremes) if generator.extremes is not None else 2
    best_mean = -math.inf
    best_tables = None
    for p in range(n_policies):
        pick = p if p < n_constant else None
        mats = [sample_vertex_matrix(generator, rng, pick=pick)
                for _ in range(max(len(boundaries) - 1, 1))]
        tables = [_jump_tables(q) for q in mats]
        mean, _ = run_policy(tables)
        if mean > best_mean:
            best_mean, best_tables = mean, tables
    final_mean, final_sigma = run_policy(best_tables)
    return OracleResult(value=final_mean, error_bound=3.0 * final_sigma,
                        detail=f"{n_policies} policies x {n_paths} paths")
