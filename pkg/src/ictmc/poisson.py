"""Imprecise counting processes (Poisson-type birth dynamics).

The generator moves one state up at a rate anywhere in a fixed interval
``[lo, hi]``.  Its upper envelope has a closed form: differences that help
get the top rate, differences that hurt get the bottom one.  For monotone
gambles the whole transition semigroup integrates in closed form against a
Poisson distribution, which is the module's independent reference for the
Euler engine.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .rates import RateInterval, UpperRateOperator, rate_bound
from .semigroup import TransitionEngine, exponential_apply_many
from .spaces import Gamble, StateSpace, gamble_norm

__all__ = [
    "RateInterval",
    "poisson_generator",
    "PoissonPmf",
    "poisson_pmf",
    "support_cap",
    "default_truncation",
    "MonotonicityError",
    "monotone_closed_form",
    "check_poisson_semigroup",
    "PoissonSemigroupReport",
]

PMF_PARAM_LIMIT = 50.0  # documented stability range of the mass recurrence


def poisson_generator(rates: RateInterval, space: StateSpace) -> UpperRateOperator:
    """Upper rate operator of the interval counting process on ``space``."""
    if not space.is_truncated:
        raise ValueError("counting processes need a truncated space")
    return UpperRateOperator(space=space, interval=rates)


@dataclass(frozen=True)
class PoissonPmf:
    """Probability masses of a Poisson law up to a support cap.

    ``tail_bound`` is the mass the cap leaves out (never negative).
    """

    parameter: float
    cap: int
    masses: np.ndarray
    tail_bound: float

    def __post_init__(self):
        masses = np.asarray(self.masses, dtype=np.float64)
        masses.setflags(write=False)
        object.__setattr__(self, "masses", masses)


def poisson_pmf(parameter: float, cap: int) -> PoissonPmf:
    """Masses ``e^{-p} p^k / k!`` for ``k = 0..cap`` via the stable recurrence.

    Stable and accurate for ``parameter <= 50`` (documented range); larger
    parameters are rejected rather than silently degraded.
    """
    p = float(parameter)
    if p < 0.0:
        raise ValueError("parameter must be nonnegative")
    if p > PMF_PARAM_LIMIT:
        raise ValueError(f"parameter above documented stability range {PMF_PARAM_LIMIT}")
    if cap < 0:
        raise ValueError("cap must be nonnegative")
    masses = np.empty(cap + 1)
    masses[0] = math.exp(-p)
    for k in range(1, cap + 1):
        masses[k] = masses[k - 1] * (p / k)
    tail = max(0.0, 1.0 - float(masses.sum()))
    return PoissonPmf(parameter=p, cap=cap, masses=masses, tail_bound=tail)


def support_cap(parameter: float, tol: float = 1e-12) -> int:
    """Smallest cap whose Chernoff tail bound ``(e p / K)^K e^{-p}`` is <= tol."""
    p = float(parameter)
    if p <= 0.0:
        return 1
    log_tol = math.log(tol)
    k = max(1, math.ceil(p))
    while k < 10_000_000:
        if k > p and k * (1.0 + math.log(p / k)) - p <= log_tol:
            return k
        k += 1
    return k


def default_truncation(z_max: int, rates: RateInterval, t_max: float) -> int:
    """Window size ``z_max + 20 (1 + hi * t_max)``: tail mass below 1e-12."""
    return int(z_max) + math.ceil(20.0 * (1.0 + rates.upper * float(t_max)))


class MonotonicityError(ValueError):
    """The gamble is not monotone in the claimed direction."""


def _check_monotone(f: Gamble, direction: str) -> None:
    diffs = np.diff(f.values)
    tail_step = f.tail - float(f.values[-1])
    if direction == "increasing":
        ok = bool(np.all(diffs >= 0.0)) and tail_step >= 0.0
    elif direction == "decreasing":
        ok = bool(np.all(diffs <= 0.0)) and tail_step <= 0.0
    else:
        raise ValueError("direction must be 'increasing' or 'decreasing'")
    if not ok:
        raise MonotonicityError(f"gamble is not {direction}")


def monotone_closed_form(rates: RateInterval, t: float, z: int, f: Gamble,
                         direction: str, tol: float = 1e-12) -> float:
    """Exact upper transition value at ``z`` for a monotone gamble.

    Increasing gambles integrate against the Poisson law at the top rate,
    decreasing ones at the bottom rate: ``sum_k f(z+k) pmf_{lam t}(k)``.
    The support cap is chosen so the neglected mass times the gamble norm
    stays below ``tol`` (the tail value stands in for the remainder).
    """
    if not f.space.is_truncated:
        raise ValueError("closed form needs a truncated space")
    if t < 0.0:
        raise ValueError("time must be nonnegative")
    if not 0 <= z < f.space.size:
        raise ValueError("evaluation state must be retained")
    _check_monotone(f, direction)
    lam = rates.upper if direction == "increasing" else rates.lower
    param = lam * float(t)
    cap = support_cap(param, tol / (gamble_norm(f) + 1.0))
    pmf = poisson_pmf(param, cap)
    size = f.space.size
    ks = np.arange(cap + 1)
    payoffs = np.where(z + ks < size, f.values[np.minimum(z + ks, size - 1)], f.tail)
    value = float(payoffs @ pmf.masses)
    # remainder beyond the cap sits in the tail region for any useful cap
    value += f.tail * (1.0 - float(pmf.masses.sum()))
    return value


@dataclass(frozen=True)
class PoissonSemigroupReport:
    """Engine-versus-closed-form agreement battery for one rate interval."""

    rates: RateInterval
    t: float
    tolerance: float
    comparisons: int
    worst_deviation: float
    rate_witness: float
    rate_witness_ok: bool

    @property
    def passed(self) -> bool:
        return self.worst_deviation <= self.tolerance and self.rate_witness_ok


def _monotone_battery(space: StateSpace, seed: int) -> list[tuple[Gamble, str]]:
    n = space.size
    rng = np.random.default_rng(seed)
    out: list[tuple[Gamble, str]] = []
    capped_identity = Gamble(space, np.arange(n, dtype=float), tail=float(n))
    out.append((capped_identity * (1.0 / n), "increasing"))
    for m in (1, 3):
        vals = (np.arange(n) >= m).astype(float)
        out.append((Gamble(space, vals, tail=1.0), "increasing"))
    for _ in range(3):
        inc = np.cumsum(rng.uniform(0.0, 1.0, size=n))
        inc /= inc[-1]
        out.append((Gamble(space, inc, tail=1.0), "increasing"))
    for f, _ in list(out):
        out.append((-f, "decreasing"))
    out.append((Gamble.constant(space, 0.7), "increasing"))
    return out


def check_poisson_semigroup(rates: RateInterval, t: float,
                            tol: float = 1e-5, seed: int = 0) -> PoissonSemigroupReport:
    """Drive the Euler engine against the monotone closed form.

    Builds its own truncated window from the default truncation rule, runs a
    battery of monotone gambles both ways, and also checks the short-horizon
    rate witness ``(1/t)[T_t (1 - 1_z)](z) <= hi``.
    """
    z_points = (0, 2, 5)
    space = StateSpace.truncated(default_truncation(max(z_points), rates, t))
    generator = poisson_generator(rates, space)
    engine = TransitionEngine(generator, tolerance=max(tol / 4.0, 1e-9))

    battery = _monotone_battery(space, seed)
    worst = 0.0
    comparisons = 0
    # one batch per direction, so each ride keeps a single monotone shape
    for direction in ("increasing", "decreasing"):
        group = [f for f, d in battery if d == direction]
        if not group:
            continue
        outs, _ = exponential_apply_many(engine, t, group)
        for f, evolved in zip(group, outs):
            for z in z_points:
                ref = monotone_closed_form(rates, t, z, f, direction)
                worst = max(worst, abs(float(evolved.values[z]) - ref))
                comparisons += 1

    away = Gamble.constant(space, 1.0) - Gamble.indicator(space, 0)
    evolved, _ = exponential_apply_many(engine, t, [away])
    witness = float(evolved[0].values[0]) / t if t > 0 else 0.0
    witness_ok = witness <= rate_bound(generator) + tol
    return PoissonSemigroupReport(rates=rates, t=float(t), tolerance=tol,
                                  comparisons=comparisons,
                                  worst_deviation=worst,
                                  rate_witness=witness,
                                  rate_witness_ok=witness_ok)
