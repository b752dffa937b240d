"""Sublinear transition semigroups built from upper rate operators.

The engine evaluates ``T_t f``, the time-``t`` upper transition of a gamble,
as the limit of Euler products ``(I + (t/n) Q)^n f``.  The step count starts
at the smallest admissible value and doubles until two successive products
agree within the engine tolerance on states the truncation cannot have
contaminated.  For linear generators the same product is computed by binary
exponentiation of the step matrix (deviation form), which is what makes
tight tolerances affordable; sublinear generators step sequentially.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .rates import UpperRateOperator, RateMatrix, apply_upper_rate, rate_bound
from .spaces import Gamble, StateSpace, gamble_norm

__all__ = [
    "StepTooLargeError",
    "ConvergenceError",
    "StepReport",
    "TransitionEngine",
    "transition_step",
    "euler_product",
    "exponential_apply",
    "exponential_apply_many",
    "check_semigroup_law",
    "SemigroupLawReport",
    "check_contraction",
    "ContractionReport",
    "selection_dp",
    "influence_radius",
]

_STEP_SLACK = 1e-9
# linear generators evolve by repeated squaring, so a rung costs log2(n)
# matrix products and the step count may safely grow far past the
# sequential iteration cap
_LINEAR_STEP_CAP = 2 ** 62


class StepTooLargeError(ValueError):
    """A single Euler step would leave the admissible region."""


class ConvergenceError(RuntimeError):
    """The doubling ladder hit the iteration cap before settling."""


@dataclass(frozen=True)
class StepReport:
    """What the engine actually did for one evaluation."""

    n_steps: int
    estimated_error: float
    edge_flag: bool


def influence_radius(jump_budget: float, threshold: float = 1e-12) -> int:
    """Smallest jump count whose tail probability drops below ``threshold``.

    Uses the Chernoff bound ``(e v / m)^m e^{-v}`` for a Poisson count with
    mean ``v = jump_budget``.  Over a horizon ``t`` a generator with rate
    bound ``r`` moves information at most ``influence_radius(r t)`` jumps
    (times its bandwidth) with certainty ``1 - threshold``; states closer
    than that to the truncation edge are treated as contaminated.
    """
    v = float(jump_budget)
    if v <= 0.0:
        return 0
    log_thr = math.log(threshold)
    m = max(1, math.ceil(v))
    while m < 1_000_000:
        if m > v and m * (1.0 + math.log(v / m)) - v <= log_thr:
            return m
        m += 1
    return m


@dataclass(frozen=True)
class TransitionEngine:
    """Upper transition evaluator for one generator.

    ``step_cap`` bounds the Euler step in time units (default: the largest
    admissible step, ``1 / rate_bound``); ``tolerance`` is the sup-norm
    stopping threshold for the doubling ladder; ``iteration_cap`` bounds the
    step count before the engine gives up.
    """

    generator: UpperRateOperator
    step_cap: float | None = None
    tolerance: float = 1e-6
    iteration_cap: int = 2 ** 20

    def __post_init__(self):
        if self.tolerance <= 0.0:
            raise ValueError("tolerance must be positive")
        if self.iteration_cap < 1:
            raise ValueError("iteration cap must be positive")
        if self.step_cap is not None:
            cap = float(self.step_cap)
            if cap <= 0.0:
                raise ValueError("step cap must be positive")
            if cap * rate_bound(self.generator) > 1.0 + _STEP_SLACK:
                raise ValueError("step cap exceeds the admissible Euler step")
            object.__setattr__(self, "step_cap", cap)

    @property
    def effective_step_cap(self) -> float:
        if self.step_cap is not None:
            return self.step_cap
        rb = rate_bound(self.generator)
        return math.inf if rb == 0.0 else 1.0 / rb


def transition_step(generator: UpperRateOperator, dt: float, f: Gamble) -> Gamble:
    """One explicit Euler step ``f + dt * Qf``.

    Requires ``dt >= 0`` and ``dt * rate_bound <= 1`` (the step must stay a
    convex combination so contraction and isotonicity survive).
    """
    dt = float(dt)
    if dt < 0.0:
        raise ValueError("step must be nonnegative")
    if dt * rate_bound(generator) > 1.0 + _STEP_SLACK:
        raise StepTooLargeError(
            f"step {dt} exceeds admissible {1.0 / rate_bound(generator)}")
    return f + dt * apply_upper_rate(generator, f)


# ---------------------------------------------------------------------------
# batched evolution core


def _run_sequential(gen: UpperRateOperator, dt: float, n: int,
                    vals_bn: np.ndarray, tails: np.ndarray) -> np.ndarray:
    if gen.interval is not None:
        return _kernels.run_count_steps(vals_bn, tails, gen.interval.lower,
                                        gen.interval.upper, dt, n)
    if gen.extremes is not None:
        mats = np.stack([q.entries for q in gen.extremes])
        return _kernels.run_extreme_steps(vals_bn, mats, dt, n)
    return _kernels.run_row_interval_steps(vals_bn, gen.row_lower,
                                           gen.row_upper, dt, n)


def _dev_power(a: np.ndarray, n: int) -> np.ndarray:
    """``(I + a)^n - I`` by binary exponentiation in deviation form."""
    acc = None
    base = a
    while n > 0:
        if n & 1:
            acc = base.copy() if acc is None else acc + base + acc @ base
        n >>= 1
        if n:
            base = 2.0 * base + base @ base
    return np.zeros_like(a) if acc is None else acc


def _run_linear(matrix: np.ndarray, space: StateSpace, t: float, n: int,
                vals_bn: np.ndarray, tails: np.ndarray) -> np.ndarray:
    size = space.size
    dev = _dev_power((t / n) * matrix, n)
    if matrix.shape[0] == size + 1:
        # augmented form: the final slot carries the tail and is absorbing
        w = np.concatenate([vals_bn, tails[:, None]], axis=1)
        return np.ascontiguousarray((w + w @ dev.T)[:, :size])
    return vals_bn + vals_bn @ dev.T


def _evolve(gen: UpperRateOperator, t: float, n: int, vals_bn: np.ndarray,
            tails: np.ndarray, matrix: np.ndarray | None = None) -> np.ndarray:
    if matrix is not None:
        return _run_linear(matrix, gen.space, t, n, vals_bn, tails)
    return _run_sequential(gen, t / n, n, vals_bn, tails)


def _monotone_count_matrix(gen: UpperRateOperator, vals_bn: np.ndarray,
                           tails: np.ndarray) -> np.ndarray | None:
    """Linear stand-in for a count-interval envelope on a monotone batch.

    When every gamble in the batch is increasing (including the step into
    the tail), each Euler step picks the top rate at every state and keeps
    the gamble increasing, so the whole product equals the linear birth
    chain at that rate — likewise decreasing batches with the bottom rate.
    Returns the augmented matrix, or None when the batch mixes directions.
    """
    if gen.interval is None:
        return None
    steps = np.diff(vals_bn, axis=1)
    tail_steps = tails - vals_bn[:, -1]
    if np.all(steps >= 0.0) and np.all(tail_steps >= 0.0):
        lam = gen.interval.upper
    elif np.all(steps <= 0.0) and np.all(tail_steps <= 0.0):
        lam = gen.interval.lower
    else:
        return None
    n = gen.space.size
    aug = np.zeros((n + 1, n + 1))
    idx = np.arange(n)
    aug[idx, idx] = -lam
    aug[idx, idx + 1] = lam
    return aug


def euler_product(generator: UpperRateOperator, dt: float, n: int,
                  f: Gamble) -> Gamble:
    """The n-step Euler product at explicit step ``dt`` (always sequential)."""
    if n < 0:
        raise ValueError("step count must be nonnegative")
    if n == 0:
        return f
    dt = float(dt)
    if dt < 0.0:
        raise ValueError("step must be nonnegative")
    if dt * rate_bound(generator) > 1.0 + _STEP_SLACK:
        raise StepTooLargeError("step exceeds the admissible Euler step")
    vals = _run_sequential(generator, dt, n, f.values[None, :].copy(),
                           np.array([f.tail]))
    return Gamble(generator.space, vals[0], tail=f.tail)


def _clean_columns(space: StateSpace, radius: int) -> tuple[slice, bool]:
    """Columns unaffected by truncation, plus whether anything was flagged.

    When the influence radius swallows the whole window the comparison falls
    back to all retained states (still flagged in the report).
    """
    if not space.is_truncated or radius <= 0:
        return slice(None), False
    keep = space.size - radius
    if keep <= 0:
        return slice(None), True
    return slice(0, keep), True


def _initial_step_count(t: float, rb: float, step_cap: float) -> int:
    n = max(1, math.ceil(2.0 * t * rb - 1e-12))
    if math.isfinite(step_cap):
        n = max(n, math.ceil(t / step_cap - 1e-12))
    return n


def exponential_apply_many(engine: TransitionEngine, t: float,
                           gambles) -> tuple[list[Gamble], StepReport]:
    """Evaluate ``T_t`` on a batch of gambles with one shared step ladder.

    Sharing the ladder means every gamble in the batch goes through the very
    same sublinear map, so relations between outputs (order, sublinearity,
    contraction) hold to rounding rather than to the engine tolerance.
    """
    gambles = list(gambles)
    if not gambles:
        raise ValueError("need at least one gamble")
    gen = engine.generator
    space = gen.space
    for g in gambles:
        if g.space != space:
            raise ValueError("gamble space does not match the generator")
    t = float(t)
    if t < 0.0:
        raise ValueError("time must be nonnegative")

    tails = np.array([g.tail for g in gambles])
    if t == 0.0:
        return list(gambles), StepReport(0, 0.0, False)

    rb = rate_bound(gen)
    radius = influence_radius(rb * t) * gen.bandwidth
    cols, edge = _clean_columns(space, radius)
    vals0 = np.stack([g.values for g in gambles])

    matrix = gen.linear_matrix()
    if matrix is None:
        matrix = _monotone_count_matrix(gen, vals0, tails)
    cap = _LINEAR_STEP_CAP if matrix is not None else engine.iteration_cap
    n = _initial_step_count(t, rb, engine.effective_step_cap)
    if n > cap:
        raise ConvergenceError("already past the iteration cap at the first rung")
    prev = _evolve(gen, t, n, vals0.copy(), tails, matrix)
    last_diff = math.inf
    while True:
        if 2 * n > cap:
            raise ConvergenceError(
                f"no convergence below {cap} steps "
                f"(last difference {last_diff:.3e})")
        nxt = _evolve(gen, t, 2 * n, vals0.copy(), tails, matrix)
        last_diff = _ladder_diff(prev, nxt, cols)
        if last_diff < engine.tolerance:
            out = [Gamble(space, nxt[i], tail=tails[i])
                   for i in range(len(gambles))]
            return out, StepReport(2 * n, last_diff, edge)
        prev, n = nxt, 2 * n


def _ladder_diff(a: np.ndarray, b: np.ndarray, cols: slice) -> float:
    return float(np.max(np.abs(a[:, cols] - b[:, cols])))


def exponential_apply(engine: TransitionEngine, t: float,
                      f: Gamble) -> tuple[Gamble, StepReport]:
    """Evaluate ``T_t f`` with adaptive step doubling."""
    outs, report = exponential_apply_many(engine, t, [f])
    return outs[0], report


# ---------------------------------------------------------------------------
# checks


@dataclass(frozen=True)
class SemigroupLawReport:
    s: float
    t: float
    samples: int
    worst_deviation: float
    bound: float

    @property
    def passed(self) -> bool:
        return self.worst_deviation <= self.bound


def check_semigroup_law(engine: TransitionEngine, s: float, t: float,
                        gambles, bound: float | None = None) -> SemigroupLawReport:
    """Compare ``T_{s+t} f`` against ``T_s T_t f`` on clean states.

    Three adaptive evaluations are involved, so the deviation is expected to
    be a small multiple of the engine tolerance; the default bound is 10x.
    """
    gambles = list(gambles)
    direct, _ = exponential_apply_many(engine, s + t, gambles)
    inner, _ = exponential_apply_many(engine, t, gambles)
    composed, _ = exponential_apply_many(engine, s, inner)
    gen = engine.generator
    radius = influence_radius(rate_bound(gen) * (s + t)) * gen.bandwidth
    cols, _ = _clean_columns(gen.space, radius)
    worst = max(float(np.max(np.abs(d.values[cols] - c.values[cols])))
                for d, c in zip(direct, composed))
    if bound is None:
        bound = 10.0 * engine.tolerance
    return SemigroupLawReport(s=float(s), t=float(t), samples=len(gambles),
                              worst_deviation=worst, bound=float(bound))


@dataclass(frozen=True)
class ContractionReport:
    lhs: float
    rhs: float
    slack: float

    @property
    def passed(self) -> bool:
        return self.lhs <= self.rhs + self.slack


def check_contraction(engine: TransitionEngine, t: float, f: Gamble,
                      g: Gamble, slack: float = 1e-12) -> ContractionReport:
    """Verify ``|T_t f - T_t g| <= |f - g|`` through one shared ladder."""
    (tf, tg), _ = exponential_apply_many(engine, t, [f, g])
    gen = engine.generator
    radius = influence_radius(rate_bound(gen) * t) * gen.bandwidth
    cols, _ = _clean_columns(gen.space, radius)
    lhs = float(np.max(np.abs(tf.values[cols] - tg.values[cols])))
    lhs = max(lhs, abs(tf.tail - tg.tail))
    return ContractionReport(lhs=lhs, rhs=gamble_norm(f - g), slack=slack)


def selection_dp(extremes, dt: float, n: int, f: Gamble) -> Gamble:
    """Dynamic program over extreme matrices, one choice per state and step.

    Each step replaces the value with the per-state best one-step payoff
    ``max_k [(I + dt Q_k) v](x)``; this is exactly the Euler product of the
    envelope and serves as an independent route to it.
    """
    mats = [q.entries if isinstance(q, RateMatrix) else np.asarray(q, dtype=float)
            for q in extremes]
    if not mats:
        raise ValueError("need at least one extreme matrix")
    if n < 0:
        raise ValueError("step count must be nonnegative")
    dt = float(dt)
    worst = max(float(-np.diag(m).min()) for m in mats)
    if dt * worst > 1.0 + _STEP_SLACK:
        raise StepTooLargeError("step exceeds the admissible Euler step")
    v = f.values.copy()
    for _ in range(n):
        v = np.stack([v + dt * (m @ v) for m in mats]).max(axis=0)
    return Gamble(f.space, v, tail=f.tail)
