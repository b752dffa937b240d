"""Upper rate operators: envelopes, row intervals, axioms, norms."""

from __future__ import annotations

import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ictmc import (
    Gamble,
    RateInterval,
    RateMatrix,
    StateSpace,
    UpperRateOperator,
    apply_upper_rate,
    check_upper_rate_axioms,
    gamble_norm,
    lower_via_conjugacy,
    operator_norm_estimate,
    poisson_generator,
    rate_bound,
    upper_envelope,
)

SPACE2 = StateSpace.finite(("a", "b"))
Q_SLOW = np.array([[-1.0, 1.0], [2.0, -2.0]])
Q_FAST = np.array([[-3.0, 3.0], [1.0, -1.0]])


def _random_rate(rng: np.random.Generator, n: int, scale: float = 1.0) -> np.ndarray:
    off = rng.uniform(0.0, scale, (n, n))
    np.fill_diagonal(off, 0.0)
    return off - np.diag(off.sum(axis=1))


def _space(n: int) -> StateSpace:
    return StateSpace.finite(tuple(f"s{i}" for i in range(n)))


# --- construction -----------------------------------------------------------

def test_rate_matrix_rejects_negative_off_diagonal():
    with pytest.raises(ValueError):
        RateMatrix(np.array([[-1.0, -0.5], [2.0, -2.0]]))


def test_rate_matrix_rejects_nonzero_row_sums():
    with pytest.raises(ValueError):
        RateMatrix(np.array([[-1.0, 2.0], [2.0, -2.0]]))


def test_axiom_battery_catches_smuggled_matrix():
    # validate=False lets an invalid matrix through construction; the sampled
    # axiom battery must still flag it via the positive-maximum principle.
    bad = RateMatrix(np.array([[0.5, -0.5], [2.0, -2.0]]), validate=False)
    gen = UpperRateOperator(SPACE2, extremes=(bad,))
    report = check_upper_rate_axioms(gen, sample_count=64, seed=0)
    assert not report.passed
    assert report.pmp_excess > report.tolerance


def test_axiom_battery_passes_valid_envelope():
    gen = UpperRateOperator(SPACE2, extremes=(RateMatrix(Q_SLOW), RateMatrix(Q_FAST)))
    assert check_upper_rate_axioms(gen, sample_count=64, seed=0).passed


def test_axiom_battery_passes_poisson_interval():
    gen = poisson_generator(RateInterval(1.0, 2.0), StateSpace.truncated(16))
    assert check_upper_rate_axioms(gen, sample_count=64, seed=0).passed


@settings(max_examples=20, deadline=None)
@given(st.floats(0.05, 3.0), st.floats(0.0, 2.0))
def test_axiom_battery_passes_random_count_intervals(lo, width):
    gen = poisson_generator(RateInterval(lo, lo + width), StateSpace.truncated(12))
    assert check_upper_rate_axioms(gen, sample_count=32, seed=1).passed


# --- apply ------------------------------------------------------------------

def test_singleton_envelope_is_plain_matrix_action():
    rng = np.random.default_rng(5)
    gen = UpperRateOperator(SPACE2, extremes=(RateMatrix(Q_SLOW),))
    for _ in range(5):
        v = rng.uniform(-1, 1, 2)
        out = apply_upper_rate(gen, Gamble(SPACE2, v))
        np.testing.assert_allclose(out.values, Q_SLOW @ v, atol=1e-14)


def test_two_matrix_envelope_picks_the_larger_drift():
    gen = UpperRateOperator(SPACE2, extremes=(RateMatrix(Q_SLOW), RateMatrix(Q_FAST)))
    out = apply_upper_rate(gen, Gamble(SPACE2, np.array([0.0, 1.0])))
    assert out.values[0] == pytest.approx(3.0, abs=1e-14)


def test_row_interval_reaches_the_best_endpoint():
    # One free transition rate q(a->b) in [1, 3]; pushing toward the larger
    # value of f means taking the top endpoint.
    lo = np.array([[-3.0, 1.0], [0.0, 0.0]])
    hi = np.array([[-1.0, 3.0], [0.0, 0.0]])
    gen = UpperRateOperator(SPACE2, row_lower=lo, row_upper=hi)
    out = apply_upper_rate(gen, Gamble(SPACE2, np.array([0.0, 1.0])))
    assert out.values[0] == pytest.approx(3.0, abs=1e-14)


def _row_interval_brute_force(lo: np.ndarray, hi: np.ndarray,
                              values: np.ndarray) -> np.ndarray:
    """Enumerate interval endpoints per row and keep only zero-sum rows.

    Independent oracle for the greedy allocator: every off-diagonal rate sits
    at one of its two endpoints at an optimum of a linear objective over a
    box cut by the zero-row-sum plane; walking endpoint combinations and
    solving the diagonal from the row-sum constraint covers all vertices.
    """
    n = len(values)
    best = np.full(n, -np.inf)
    for x in range(n):
        others = [y for y in range(n) if y != x]
        for choice in itertools.product((0, 1), repeat=len(others)):
            rates = {}
            for y, c in zip(others, choice):
                rates[y] = lo[x, y] if c == 0 else hi[x, y]
            diag = -sum(rates.values())
            if not (lo[x, x] - 1e-12 <= diag <= hi[x, x] + 1e-12):
                continue
            total = diag * values[x] + sum(r * values[y] for y, r in rates.items())
            best[x] = max(best[x], total)
        # Vertices with one interior coordinate: fix all but one off-diagonal
        # at endpoints and solve the remaining rate from the zero-sum row
        # with the diagonal pinned at an endpoint.
        for free in others:
            rest = [y for y in others if y != free]
            for choice in itertools.product((0, 1), repeat=len(rest)):
                for dpick in (lo[x, x], hi[x, x]):
                    rates = {}
                    for y, c in zip(rest, choice):
                        rates[y] = lo[x, y] if c == 0 else hi[x, y]
                    r_free = -dpick - sum(rates.values())
                    if not (lo[x, free] - 1e-12 <= r_free <= hi[x, free] + 1e-12):
                        continue
                    total = dpick * values[x] + r_free * values[free]
                    total += sum(r * values[y] for y, r in rates.items())
                    best[x] = max(best[x], total)
    return best


def test_row_interval_apply_matches_endpoint_enumeration():
    rng = np.random.default_rng(17)
    for n in (2, 3, 4, 5, 6):
        space = _space(n)
        lo = rng.uniform(0.0, 0.5, (n, n))
        hi = lo + rng.uniform(0.05, 0.5, (n, n))
        np.fill_diagonal(lo, 0.0)
        np.fill_diagonal(hi, 0.0)
        dlo = -hi.sum(axis=1)
        dhi = -lo.sum(axis=1)
        np.fill_diagonal(lo, dlo)
        np.fill_diagonal(hi, dhi)
        gen = UpperRateOperator(space, row_lower=lo, row_upper=hi)
        for _ in range(10):
            v = rng.uniform(-1.0, 1.0, n)
            got = apply_upper_rate(gen, Gamble(space, v)).values
            ref = _row_interval_brute_force(lo, hi, v)
            np.testing.assert_allclose(got, ref, atol=1e-10)


# --- rate bound and norms ---------------------------------------------------

def test_rate_bound_poisson_is_top_rate():
    gen = poisson_generator(RateInterval(1.0, 2.0), StateSpace.truncated(16))
    assert rate_bound(gen) == 2.0


def test_rate_bound_single_matrix_is_worst_exit_rate():
    for a, b in ((1.0, 2.0), (3.0, 0.5), (0.2, 0.2)):
        q = RateMatrix(np.array([[-a, a], [b, -b]]))
        gen = UpperRateOperator(SPACE2, extremes=(q,))
        assert rate_bound(gen) == pytest.approx(max(a, b), abs=1e-14)


def test_rate_bound_envelope_is_max_over_extremes():
    gen = UpperRateOperator(SPACE2, extremes=(RateMatrix(Q_SLOW), RateMatrix(Q_FAST)))
    # Brute force: evaluate the exit-rate indicator at each state and extreme.
    brute = 0.0
    for q in (Q_SLOW, Q_FAST):
        brute = max(brute, float(np.max(-np.diag(q))))
    assert rate_bound(gen) == pytest.approx(brute, abs=1e-14)


def test_norm_estimate_single_matrix():
    gen = UpperRateOperator(SPACE2, extremes=(RateMatrix(Q_SLOW),))
    low, high = operator_norm_estimate(gen, seed=0)
    # For one matrix the operator norm is twice the worst exit rate.
    assert high == pytest.approx(4.0, rel=1e-9)
    assert low == pytest.approx(4.0, rel=1e-3)
    assert low <= high + 1e-12


def test_norm_estimate_poisson_interval():
    gen = poisson_generator(RateInterval(1.0, 2.0), StateSpace.truncated(16))
    low, high = operator_norm_estimate(gen, seed=0)
    assert high == pytest.approx(4.0, rel=1e-9)
    assert low <= high + 1e-12


def test_norm_estimate_zero_operator():
    gen = UpperRateOperator(SPACE2, extremes=(RateMatrix(np.zeros((2, 2))),))
    assert operator_norm_estimate(gen, budget=256, seed=0) == (0.0, 0.0)


# --- envelope constructor ---------------------------------------------------

def test_upper_envelope_singleton_acts_like_matrix():
    rng = np.random.default_rng(2)
    gen = upper_envelope([RateMatrix(Q_SLOW)])
    v = rng.uniform(-1, 1, 2)
    out = apply_upper_rate(gen, Gamble(gen.space, v))
    np.testing.assert_allclose(out.values, Q_SLOW @ v, atol=1e-14)


def test_upper_envelope_duplicates_are_idempotent():
    rng = np.random.default_rng(3)
    one = upper_envelope([RateMatrix(Q_SLOW)])
    two = upper_envelope([RateMatrix(Q_SLOW), RateMatrix(Q_SLOW)])
    for _ in range(5):
        v = rng.uniform(-1, 1, 2)
        a = apply_upper_rate(one, Gamble(one.space, v)).values
        b = apply_upper_rate(two, Gamble(two.space, v)).values
        np.testing.assert_array_equal(a, b)


def test_upper_envelope_dominates_each_extreme():
    rng = np.random.default_rng(4)
    gen = upper_envelope([RateMatrix(Q_SLOW), RateMatrix(Q_FAST)])
    for _ in range(20):
        v = rng.uniform(-1, 1, 2)
        out = apply_upper_rate(gen, Gamble(gen.space, v)).values
        for q in (Q_SLOW, Q_FAST):
            assert np.all(q @ v <= out + 1e-12)


# --- conjugate lower operator -----------------------------------------------

def test_conjugate_of_linear_operator_is_itself():
    gen = UpperRateOperator(SPACE2, extremes=(RateMatrix(Q_SLOW),))
    rng = np.random.default_rng(6)
    for _ in range(5):
        f = Gamble(SPACE2, rng.uniform(-1, 1, 2))
        up = apply_upper_rate(gen, f)
        low = lower_via_conjugacy(lambda g: apply_upper_rate(gen, g), f)
        np.testing.assert_array_equal(up.values, low.values)


def test_conjugate_lower_never_exceeds_upper():
    gen = UpperRateOperator(SPACE2, extremes=(RateMatrix(Q_SLOW), RateMatrix(Q_FAST)))
    rng = np.random.default_rng(7)
    for _ in range(20):
        f = Gamble(SPACE2, rng.uniform(-1, 1, 2))
        up = apply_upper_rate(gen, f)
        low = lower_via_conjugacy(lambda g: apply_upper_rate(gen, g), f)
        assert np.all(low.values <= up.values + 1e-12)


def test_poisson_lower_drift_of_increasing_gamble_uses_bottom_rate():
    space = StateSpace.truncated(16)
    gen = poisson_generator(RateInterval(1.0, 2.0), space)
    f = Gamble(space, np.arange(16, dtype=float), tail=16.0)
    low = lower_via_conjugacy(lambda g: apply_upper_rate(gen, g), f)
    # Unit increments: the least favourable rate for an increasing gamble is
    # the bottom of the interval.
    np.testing.assert_allclose(low.values[:-1], 1.0, atol=1e-12)


def test_constant_gambles_have_zero_drift():
    gen = UpperRateOperator(SPACE2, extremes=(RateMatrix(Q_SLOW), RateMatrix(Q_FAST)))
    out = apply_upper_rate(gen, Gamble(SPACE2, np.full(2, 3.7)))
    np.testing.assert_allclose(out.values, 0.0, atol=1e-12)


# --- sampled operator axioms (property-based) --------------------------------

@settings(max_examples=60, deadline=None)
@given(st.integers(2, 5), st.integers(0, 10_000), st.floats(0.0, 4.0))
def test_envelope_axioms_on_random_inputs(n, seed, mu):
    rng = np.random.default_rng(seed)
    space = _space(n)
    gen = UpperRateOperator(space, extremes=(
        RateMatrix(_random_rate(rng, n)), RateMatrix(_random_rate(rng, n))))
    fv = rng.uniform(-1, 1, n)
    gv = rng.uniform(-1, 1, n)
    f, g = Gamble(space, fv), Gamble(space, gv)
    both = apply_upper_rate(gen, Gamble(space, fv + gv))
    uf, ug = apply_upper_rate(gen, f), apply_upper_rate(gen, g)
    assert np.all(both.values
                  <= uf.values + ug.values
                  + 1e-9 * (gamble_norm(f) + gamble_norm(g)))
    scaled = apply_upper_rate(gen, Gamble(space, mu * fv))
    np.testing.assert_allclose(scaled.values, mu * uf.values, atol=1e-12)
    # Positive-maximum principle at a nonnegative argmax.
    shifted = fv - fv.max() + abs(fv).max()
    out = apply_upper_rate(gen, Gamble(space, shifted))
    assert out.values[int(np.argmax(shifted))] <= 1e-12
