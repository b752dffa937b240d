"""Rate matrices and sublinear upper rate operators.

An upper rate operator maps a gamble ``f`` to the pointwise largest value of
``Q f`` over a set of dominated rate matrices.  Three generating descriptions
are supported:

* ``extremes`` — an explicit finite family of rate matrices;
* ``row intervals`` — entrywise bounds ``lower <= q <= upper`` on each row,
  with rows constrained to sum to zero;
* ``count interval`` — a rate interval for the nearest-neighbour counting
  process (rate between ``lo`` and ``hi`` of moving one state up).

Every such operator is sublinear, positively homogeneous, maps constants to
zero and satisfies the positive maximum principle: wherever a gamble attains
a nonnegative maximum, the operator is nonpositive.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .spaces import Gamble, StateSpace, gamble_norm

__all__ = [
    "RateInterval",
    "RateMatrix",
    "UpperRateOperator",
    "apply_upper_rate",
    "rate_bound",
    "upper_envelope",
    "operator_norm_estimate",
    "check_upper_rate_axioms",
    "RateAxiomReport",
    "lower_via_conjugacy",
]

ROW_SUM_TOL = 1e-12
OFF_DIAG_TOL = 1e-12
DEFAULT_AXIOM_TOL = 1e-9


@dataclass(frozen=True)
class RateInterval:
    """Closed interval of transition rates, ``0 <= lower <= upper < inf``."""

    lower: float
    upper: float

    def __post_init__(self):
        lo, hi = float(self.lower), float(self.upper)
        if not (math.isfinite(lo) and math.isfinite(hi)):
            raise ValueError("rate bounds must be finite")
        if lo < 0:
            raise ValueError("rates are nonnegative")
        if lo > hi:
            raise ValueError("rate interval is empty")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @property
    def width(self) -> float:
        return self.upper - self.lower


@dataclass(frozen=True)
class RateMatrix:
    """Square matrix with nonnegative off-diagonal entries and zero row sums.

    ``validate=False`` skips the structural checks; it exists so tests can
    probe how downstream checks react to malformed inputs.
    """

    entries: np.ndarray
    validate: bool = True

    def __post_init__(self):
        arr = np.array(self.entries, dtype=np.float64, copy=True)
        if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
            raise ValueError("rate matrix must be square")
        if not np.all(np.isfinite(arr)):
            raise ValueError("rate matrix entries must be finite")
        if self.validate:
            off = arr.copy()
            np.fill_diagonal(off, 0.0)
            if off.min(initial=0.0) < -OFF_DIAG_TOL:
                raise ValueError("off-diagonal rates must be nonnegative")
            scale = float(np.max(np.abs(arr))) + 1.0
            sums = arr.sum(axis=1)
            if np.max(np.abs(sums)) > ROW_SUM_TOL * scale:
                raise ValueError("rows of a rate matrix must sum to zero")
        arr.setflags(write=False)
        object.__setattr__(self, "entries", arr)

    @property
    def size(self) -> int:
        return self.entries.shape[0]

    def apply(self, values: np.ndarray) -> np.ndarray:
        return self.entries @ values


def _coupling_bandwidth(entries_iter, size: int) -> int:
    """Largest |i - j| with a nonzero off-diagonal coupling."""
    band = 0
    idx = np.arange(size)
    offsets = np.abs(idx[:, None] - idx[None, :])
    for entries in entries_iter:
        mask = entries != 0.0
        np.fill_diagonal(mask, False)
        if mask.any():
            band = max(band, int(offsets[mask].max()))
    return band


@dataclass(frozen=True)
class UpperRateOperator:
    """Pointwise upper envelope of a family of rate matrices.

    Exactly one of ``extremes``, ``(row_lower, row_upper)`` or ``interval``
    is set; ``kind`` reports which.
    """

    space: StateSpace
    extremes: tuple[RateMatrix, ...] | None = None
    row_lower: np.ndarray | None = None
    row_upper: np.ndarray | None = None
    interval: RateInterval | None = None

    def __post_init__(self):
        given = [self.extremes is not None,
                 self.row_lower is not None or self.row_upper is not None,
                 self.interval is not None]
        if sum(given) != 1:
            raise ValueError("give exactly one generating description")
        n = self.space.size
        if self.extremes is not None:
            mats = tuple(self.extremes)
            if not mats:
                raise ValueError("need at least one extreme matrix")
            for q in mats:
                if not isinstance(q, RateMatrix):
                    raise TypeError("extremes must be RateMatrix instances")
                if q.size != n:
                    raise ValueError("extreme matrix size does not match space")
            object.__setattr__(self, "extremes", mats)
        elif self.interval is not None:
            if not self.space.is_truncated:
                raise ValueError("count-interval operators need a truncated space")
        else:
            lo = np.array(self.row_lower, dtype=np.float64, copy=True)
            hi = np.array(self.row_upper, dtype=np.float64, copy=True)
            if lo.shape != (n, n) or hi.shape != (n, n):
                raise ValueError("row interval bounds must be square and match the space")
            if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
                raise ValueError("row interval bounds must be finite")
            if np.any(lo > hi):
                raise ValueError("row interval bounds are crossed")
            off = lo.copy()
            np.fill_diagonal(off, 0.0)
            if off.min(initial=0.0) < -OFF_DIAG_TOL:
                raise ValueError("off-diagonal lower bounds must be nonnegative")
            scale = max(float(np.max(np.abs(lo))), float(np.max(np.abs(hi)))) + 1.0
            if np.any(lo.sum(axis=1) > ROW_SUM_TOL * scale) or \
                    np.any(hi.sum(axis=1) < -ROW_SUM_TOL * scale):
                raise ValueError("a row admits no zero-sum selection")
            lo.setflags(write=False)
            hi.setflags(write=False)
            object.__setattr__(self, "row_lower", lo)
            object.__setattr__(self, "row_upper", hi)

    # -- structure ------------------------------------------------------

    @property
    def kind(self) -> str:
        if self.extremes is not None:
            return "extremes"
        if self.interval is not None:
            return "count_interval"
        return "row_intervals"

    @property
    def bandwidth(self) -> int:
        """Interaction radius: how far one application can move information."""
        if self.interval is not None:
            return 1
        if self.extremes is not None:
            return _coupling_bandwidth((q.entries for q in self.extremes),
                                       self.space.size)
        return _coupling_bandwidth((self.row_upper,), self.space.size)

    def linear_matrix(self) -> np.ndarray | None:
        """The single generating matrix if the operator is linear, else None.

        For a point count interval the matrix is returned in augmented form,
        ``(n+1) x (n+1)`` with an absorbing final row standing in for the
        whole tail region.
        """
        if self.extremes is not None and len(self.extremes) == 1:
            return np.array(self.extremes[0].entries, copy=True)
        if self.row_lower is not None and np.array_equal(self.row_lower, self.row_upper):
            return np.array(self.row_lower, copy=True)
        if self.interval is not None and self.interval.width == 0.0:
            n = self.space.size
            lam = self.interval.lower
            aug = np.zeros((n + 1, n + 1))
            idx = np.arange(n)
            aug[idx, idx] = -lam
            aug[idx, idx + 1] = lam
            return aug
        return None

    # -- application ------------------------------------------------------

    def apply(self, f: Gamble) -> Gamble:
        return apply_upper_rate(self, f)

    def apply_to_values(self, values: np.ndarray, tail: float) -> np.ndarray:
        """Raw application on a value vector; the output tail is always 0."""
        if self.interval is not None:
            return _count_interval_apply(self.interval, values, tail)
        if self.extremes is not None:
            stacked = np.stack([q.apply(values) for q in self.extremes])
            return stacked.max(axis=0)
        return _row_interval_apply(self.row_lower, self.row_upper, values)


def _count_interval_apply(interval: RateInterval, values: np.ndarray,
                          tail: float) -> np.ndarray:
    diffs = np.empty_like(values)
    diffs[:-1] = values[1:] - values[:-1]
    diffs[-1] = tail - values[-1]
    lam = np.where(diffs >= 0.0, interval.upper, interval.lower)
    return lam * diffs


def _row_interval_apply(lower: np.ndarray, upper: np.ndarray,
                        values: np.ndarray) -> np.ndarray:
    """Row-wise maximum of ``q . values`` over zero-sum box selections.

    Greedy water filling: start every coordinate at its lower bound and hand
    the remaining budget ``-sum(lower)`` to coordinates in decreasing order
    of their payoff, ties broken by lowest state index (stable sort).
    """
    order = np.argsort(-values, kind="stable")
    caps = (upper - lower)[:, order]
    budget = np.maximum(-lower.sum(axis=1), 0.0)
    cum = np.cumsum(caps, axis=1)
    take = np.clip(budget[:, None] - (cum - caps), 0.0, caps)
    q_sorted = lower[:, order] + take
    return q_sorted @ values[order]


def apply_upper_rate(operator: UpperRateOperator, f: Gamble) -> Gamble:
    """Upper envelope application ``f -> max_Q Q f`` (pointwise).

    The result's tail is 0: beyond the truncation window every represented
    gamble is constant and rate operators kill constants.  On truncated
    spaces driven by finite matrices, states within one interaction
    bandwidth of the edge are approximations of the untruncated operator;
    the transition engine accounts for that through its influence radius.
    """
    if f.space != operator.space:
        raise ValueError("gamble and operator live on different spaces")
    out = operator.apply_to_values(f.values, f.tail)
    return Gamble(operator.space, out, tail=0.0)


def rate_bound(operator: UpperRateOperator) -> float:
    """``max_x [Q(1 - 1_x)](x)``: the largest total rate out of any state.

    Closed forms per description (all equal to the defining maximum):
    extremes — ``max_Q max_x -Q[x,x]``; row intervals — per row the least
    feasible diagonal is ``max(lower[x,x], -sum_{y!=x} upper[x,y])``;
    count interval — exactly ``upper``.
    """
    if operator.interval is not None:
        return operator.interval.upper
    if operator.extremes is not None:
        return max(0.0, max(float(-np.diag(q.entries).min())
                            for q in operator.extremes))
    lo, hi = operator.row_lower, operator.row_upper
    n = lo.shape[0]
    off_sum = hi.sum(axis=1) - np.diag(hi)
    least_diag = np.maximum(np.diag(lo), -off_sum)
    return max(0.0, float(-least_diag.min()))


def upper_envelope(matrices) -> UpperRateOperator:
    """Upper rate operator generated by an explicit family of rate matrices."""
    mats = tuple(matrices)
    if not mats:
        raise ValueError("need at least one matrix")
    sizes = {q.size for q in mats}
    if len(sizes) != 1:
        raise ValueError("matrices must share a dimension")
    space = StateSpace.finite([f"s{i}" for i in range(sizes.pop())])
    return UpperRateOperator(space=space, extremes=mats)


def operator_norm_estimate(operator: UpperRateOperator, budget: int = 4096,
                           seed: int = 0) -> tuple[float, float]:
    """Certified interval for the operator seminorm ``sup_{|f|<=1} |Qf|``.

    Lower bound: best sign-vector probe (full enumeration when it fits the
    budget, seeded sampling otherwise).  Upper bound: ``2 * rate_bound``,
    valid for every dominated rate matrix.  The two coincide only in the
    linear case; the interval is the honest report.  Operators here all map
    0 to 0, so restricting probes to gambles vanishing anywhere would not
    change the supremum.
    """
    if budget < 1:
        raise ValueError("budget must be positive")
    n = operator.space.size
    slots = n + 1 if operator.space.is_truncated else n
    upper = 2.0 * rate_bound(operator)

    def probe(signs: np.ndarray) -> float:
        tail = signs[n] if operator.space.is_truncated else 0.0
        out = operator.apply_to_values(signs[:n].astype(np.float64), float(tail))
        return float(np.max(np.abs(out))) if out.size else 0.0

    lower = 0.0
    if slots <= 20 and 2 ** slots <= budget:
        for code in range(2 ** slots):
            bits = (code >> np.arange(slots)) & 1
            lower = max(lower, probe(2.0 * bits - 1.0))
    else:
        rng = np.random.default_rng(seed)
        for _ in range(budget):
            signs = rng.integers(0, 2, size=slots) * 2.0 - 1.0
            lower = max(lower, probe(signs))
    return min(lower, upper), upper


@dataclass(frozen=True)
class RateAxiomReport:
    """Worst observed violation per axiom over the sampled gambles."""

    samples: int
    tolerance: float
    constant_dev: float
    subadditivity_excess: float
    homogeneity_dev: float
    pmp_excess: float

    @property
    def passed(self) -> bool:
        return max(self.constant_dev, self.subadditivity_excess,
                   self.homogeneity_dev, self.pmp_excess) <= self.tolerance


def _random_gamble(space: StateSpace, rng: np.random.Generator) -> Gamble:
    values = rng.uniform(-1.0, 1.0, size=space.size)
    tail = float(rng.uniform(-1.0, 1.0)) if space.is_truncated else 0.0
    return Gamble(space, values, tail=tail)


def check_upper_rate_axioms(operator: UpperRateOperator, sample_count: int = 64,
                            seed: int = 0,
                            tolerance: float = DEFAULT_AXIOM_TOL) -> RateAxiomReport:
    """Sampled check of the defining axioms of an upper rate operator.

    Constants map to zero; subadditivity ``Q(f+g) <= Qf + Qg``; positive
    homogeneity ``Q(mu f) = mu Qf``; and the positive maximum principle.
    Violations are scaled against the gamble norms involved.
    """
    if sample_count < 1:
        raise ValueError("sample_count must be positive")
    rng = np.random.default_rng(seed)
    space = operator.space
    worst_const = worst_sub = worst_hom = worst_pmp = 0.0

    for _ in range(sample_count):
        c = float(rng.uniform(-3.0, 3.0))
        out = apply_upper_rate(operator, Gamble.constant(space, c))
        worst_const = max(worst_const, gamble_norm(out) / (abs(c) + 1.0))

        f = _random_gamble(space, rng)
        g = _random_gamble(space, rng)
        lhs = apply_upper_rate(operator, f + g)
        rhs = apply_upper_rate(operator, f) + apply_upper_rate(operator, g)
        excess = float(np.max(lhs.values - rhs.values))
        worst_sub = max(worst_sub, excess / (gamble_norm(f) + gamble_norm(g) + 1.0))

        mu = float(rng.uniform(0.0, 3.0))
        scaled = apply_upper_rate(operator, mu * f)
        ref = mu * apply_upper_rate(operator, f)
        dev = float(np.max(np.abs(scaled.values - ref.values)))
        worst_hom = max(worst_hom, dev / (mu * gamble_norm(f) + 1.0))

        h = _random_gamble(space, rng)
        if space.is_truncated:
            h = Gamble(space, h.values, tail=min(h.tail, float(h.values.max())))
        top = float(h.values.max())
        if top < 0.0:
            h = h - top  # shift so the maximum sits at zero
            top = 0.0
        x_star = int(np.argmax(h.values))
        val = apply_upper_rate(operator, h)(x_star)
        worst_pmp = max(worst_pmp, val / (gamble_norm(h) + 1.0))

    return RateAxiomReport(samples=sample_count, tolerance=tolerance,
                           constant_dev=worst_const,
                           subadditivity_excess=worst_sub,
                           homogeneity_dev=worst_hom,
                           pmp_excess=worst_pmp)


def lower_via_conjugacy(apply_upper, f: Gamble) -> Gamble:
    """Conjugate lower evaluation ``-U(-f)`` for any upper evaluator ``U``."""
    return -apply_upper(-f)
