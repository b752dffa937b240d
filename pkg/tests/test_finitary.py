"""Multi-time gambles: backward reduction, evaluation, and limit probes."""

from __future__ import annotations

import math

import numpy as np
import pytest

from ictmc import (
    Add,
    Const,
    Coord,
    DenseCapError,
    FinitaryGamble,
    IndicatorEq,
    IndicatorNe,
    InitialUpperExpectation,
    Max,
    Min,
    MonotoneFamilyError,
    RateInterval,
    RateMatrix,
    Scale,
    StateSpace,
    Sub,
    TimeGrid,
    TransitionEngine,
    UpperRateOperator,
    backward_reduce,
    check_consistency,
    downward_probe,
    evaluate_lower,
    evaluate_on_paths,
    evaluate_upper,
    evaluate_upper_many,
    grid_limit,
    hitting_family,
    jump_gamble,
    poisson_generator,
    rate_condition_probe,
    two_state_closed_form,
)

SPACE2 = StateSpace.finite(("a", "b"))
Q_SLOW = np.array([[-1.0, 1.0], [2.0, -2.0]])
Q_FAST = np.array([[-3.0, 3.0], [1.0, -1.0]])


def _two_state_engine(tolerance: float = 1e-10) -> TransitionEngine:
    gen = UpperRateOperator(SPACE2, extremes=(RateMatrix(Q_SLOW),))
    return TransitionEngine(generator=gen, tolerance=tolerance)


def _poisson_engine(n: int = 48, tolerance: float = 1e-7) -> TransitionEngine:
    gen = poisson_generator(RateInterval(1.0, 2.0), StateSpace.truncated(n))
    return TransitionEngine(generator=gen, tolerance=tolerance)


# --- jump gamble -----------------------------------------------------------------

def test_jump_gamble_on_recorded_paths():
    f = jump_gamble(SPACE2, 0.0, 0.5)
    values = evaluate_on_paths(f, np.array([[0, 0], [0, 1], [1, 0], [1, 1]]))
    np.testing.assert_array_equal(values, [0.0, 1.0, 1.0, 0.0])


def test_jump_gamble_window_away_from_zero():
    # Move probability over (0.2, 0.7) from state 0: sum over the state at
    # 0.2 of (arrive there) * (leave again within 0.5).
    eng = _two_state_engine()
    e0 = InitialUpperExpectation.degenerate(SPACE2, 0)
    val = evaluate_upper(e0, eng, jump_gamble(SPACE2, 0.2, 0.7))
    p1 = two_state_closed_form(1.0, 2.0, 0.2).value
    p2 = two_state_closed_form(1.0, 2.0, 0.5).value
    ref = sum(p1[0, x] * (1.0 - p2[x, x]) for x in (0, 1))
    assert val == pytest.approx(ref, abs=1e-9)


# --- backward reduction ------------------------------------------------------------

def test_reduce_ignores_an_unused_final_coordinate():
    eng = _two_state_engine()
    grid = TimeGrid((0.2, 0.6))
    f = FinitaryGamble(SPACE2, grid, expr=IndicatorEq(0, 1))  # first time only
    red = backward_reduce(eng, grid, f)
    assert red.grid.points == (0.2,)
    # every section is constant, so the reduced table is the restriction
    np.testing.assert_allclose(red.table, [0.0, 1.0], atol=1e-10)


def test_reduce_then_evaluate_matches_direct():
    eng = _two_state_engine()
    grid = TimeGrid((0.1, 0.3))
    f = FinitaryGamble(SPACE2, grid,
                       expr=Add(IndicatorEq(0, 1), IndicatorEq(1, 1)))
    e0 = InitialUpperExpectation.degenerate(SPACE2, 0)
    direct = evaluate_upper(e0, eng, f)
    red = backward_reduce(eng, grid, f)
    via_reduction = evaluate_upper(e0, eng, red)
    assert via_reduction == pytest.approx(direct, abs=1e-9)


def test_reduce_jump_section_gives_short_horizon_jump_mass():
    # Interior sections of the move indicator are not monotone, so they ride
    # the stepped ladder; keep the tolerance at the ladder-friendly level.
    eng = _poisson_engine(tolerance=1e-6)
    space = eng.generator.space
    grid = TimeGrid((0.0, 0.1))
    red = backward_reduce(eng, grid, jump_gamble(space, 0.0, 0.1))
    expected = 1.0 - math.exp(-0.2)  # top rate wins for a move indicator
    np.testing.assert_allclose(red.table, expected, atol=5e-6)


# --- evaluation ---------------------------------------------------------------------

def test_evaluate_constant_gamble():
    eng = _two_state_engine()
    e0 = InitialUpperExpectation.degenerate(SPACE2, 0)
    f = FinitaryGamble(SPACE2, TimeGrid((0.2, 0.5)), expr=Const(2.25))
    assert evaluate_upper(e0, eng, f) == pytest.approx(2.25, abs=1e-10)


def test_evaluate_jump_on_precise_chain():
    space = StateSpace.truncated(32)
    eng = TransitionEngine(
        generator=poisson_generator(RateInterval(1.3, 1.3), space),
        tolerance=1e-9)
    e0 = InitialUpperExpectation.degenerate(space, 0)
    val = evaluate_upper(e0, eng, jump_gamble(space, 0.0, 0.25))
    assert val == pytest.approx(1.0 - math.exp(-1.3 * 0.25), abs=1e-8)


def test_evaluate_jump_on_interval_chain_takes_top_rate():
    eng = _poisson_engine()
    space = eng.generator.space
    e0 = InitialUpperExpectation.degenerate(space, 0)
    val = evaluate_upper(e0, eng, jump_gamble(space, 0.0, 0.25))
    assert val == pytest.approx(1.0 - math.exp(-2.0 * 0.25), abs=1e-6)


def test_evaluate_two_state_jump_against_closed_form():
    eng = _two_state_engine()
    e0 = InitialUpperExpectation.degenerate(SPACE2, 0)
    val = evaluate_upper(e0, eng, jump_gamble(SPACE2, 0.0, 0.5))
    ref = two_state_closed_form(1.0, 2.0, 0.5).value[0, 1]
    assert val == pytest.approx(ref, abs=1e-9)


def test_lower_is_exact_conjugate_of_upper():
    eng = _two_state_engine(tolerance=1e-8)
    e0 = InitialUpperExpectation.degenerate(SPACE2, 0)
    expr = Add(IndicatorEq(0, 1), Scale(0.5, Coord(1)))
    f = FinitaryGamble(SPACE2, TimeGrid((0.2, 0.6)), expr=expr)
    neg = FinitaryGamble(SPACE2, TimeGrid((0.2, 0.6)), expr=Scale(-1.0, expr))
    assert evaluate_lower(e0, eng, f) == -evaluate_upper(e0, eng, neg)


def test_vacuous_start_takes_worst_state():
    eng = _two_state_engine()
    f = FinitaryGamble(SPACE2, TimeGrid((0.3,)), expr=IndicatorEq(0, 1))
    per_state = [evaluate_upper(InitialUpperExpectation.degenerate(SPACE2, x),
                                eng, f) for x in (0, 1)]
    vac = evaluate_upper(InitialUpperExpectation.vacuous(SPACE2), eng, f)
    assert vac == pytest.approx(max(per_state), abs=1e-12)


def test_pmf_start_mixes_states():
    eng = _two_state_engine()
    f = FinitaryGamble(SPACE2, TimeGrid((0.3,)), expr=IndicatorEq(0, 1))
    per_state = [evaluate_upper(InitialUpperExpectation.degenerate(SPACE2, x),
                                eng, f) for x in (0, 1)]
    e0 = InitialUpperExpectation.envelope(SPACE2, np.array([[0.25, 0.75]]))
    mixed = evaluate_upper(e0, eng, f)
    assert mixed == pytest.approx(0.25 * per_state[0] + 0.75 * per_state[1],
                                  abs=1e-10)


def test_hitting_shortcut_agrees_with_dense_recursion():
    eng = _two_state_engine()
    e0 = InitialUpperExpectation.degenerate(SPACE2, 0)
    grid = TimeGrid((0.0, 0.35))
    shortcut = FinitaryGamble(SPACE2, grid,
                              expr=Max((IndicatorEq(0, 1), IndicatorEq(1, 1))))
    # Wrapping one branch in an addition defeats the pattern matcher and
    # forces the generic dense route.
    dense = FinitaryGamble(SPACE2, grid,
                           expr=Max((Add(IndicatorEq(0, 1), Const(0.0)),
                                     IndicatorEq(1, 1))))
    a = evaluate_upper(e0, eng, shortcut)
    b = evaluate_upper(e0, eng, dense)
    assert a == pytest.approx(b, abs=1e-9)


def test_dense_recursion_rejects_oversized_tables():
    space = StateSpace.truncated(200)
    eng = TransitionEngine(
        generator=poisson_generator(RateInterval(1.0, 2.0), space),
        tolerance=1e-5)
    e0 = InitialUpperExpectation.degenerate(space, 0)
    pts = TimeGrid(tuple(0.1 * (k + 1) for k in range(4)))
    f = FinitaryGamble(space, pts,
                       expr=Add(Coord(0), Add(Coord(1), Add(Coord(2), Coord(3)))))
    with pytest.raises(DenseCapError):
        evaluate_upper(e0, eng, f)


def test_batched_evaluation_matches_single_calls():
    eng = _two_state_engine(tolerance=1e-8)
    e0 = InitialUpperExpectation.degenerate(SPACE2, 0)
    grid = TimeGrid((0.2, 0.5))
    batch = [FinitaryGamble(SPACE2, grid, expr=IndicatorEq(0, 1)),
             FinitaryGamble(SPACE2, grid, expr=IndicatorNe(0, 1)),
             FinitaryGamble(SPACE2, grid, expr=Const(0.5))]
    together = evaluate_upper_many(e0, eng, batch)
    for got, f in zip(together, batch):
        assert got == pytest.approx(evaluate_upper(e0, eng, f), abs=1e-8)


# --- consistency ---------------------------------------------------------------------

def test_consistency_identical_grids_is_exact():
    eng = _two_state_engine()
    e0 = InitialUpperExpectation.degenerate(SPACE2, 0)
    grid = TimeGrid((0.3, 0.6))
    f = FinitaryGamble(SPACE2, grid, expr=IndicatorEq(1, 0))
    rep = check_consistency(e0, eng, grid, grid, f, tol=0.0)
    assert rep.deviation == 0.0
    assert rep.passed


def test_consistency_inserting_an_interior_point():
    eng = _two_state_engine()
    e0 = InitialUpperExpectation.degenerate(SPACE2, 0)
    coarse = TimeGrid((0.5,))
    fine = TimeGrid((0.2, 0.5, 0.9))
    f = FinitaryGamble(SPACE2, coarse, expr=IndicatorEq(0, 1))
    rep = check_consistency(e0, eng, coarse, fine, f, tol=1e-8)
    assert rep.passed
    assert rep.deviation <= 1e-8


def test_consistency_two_inserted_points_on_interval_chain():
    eng = _poisson_engine(tolerance=1e-6)
    space = eng.generator.space
    e0 = InitialUpperExpectation.degenerate(space, 0)
    coarse = TimeGrid((0.4,))
    fine = TimeGrid((0.15, 0.4, 0.8))
    f = FinitaryGamble(space, coarse,
                       expr=Min((Const(1.0), Max((Const(0.0),
                                                  Sub(Coord(0), Const(1.0)))))))
    rep = check_consistency(e0, eng, coarse, fine, f, tol=10 * eng.tolerance)
    assert rep.passed


# --- short-horizon rate probe -----------------------------------------------------------

def test_rate_probe_precise_chain_approaches_its_rate():
    space = StateSpace.truncated(32)
    lam = 1.4
    eng = TransitionEngine(
        generator=poisson_generator(RateInterval(lam, lam), space),
        tolerance=1e-8)
    e0 = InitialUpperExpectation.degenerate(space, 0)
    deltas = [2.0 ** -k for k in range(1, 9)]
    rep = rate_condition_probe(e0, eng, 0.0, deltas)
    closed = [-math.expm1(-lam * d) / d for d in deltas]
    for got, ref in zip(rep.ratios, closed):
        assert got == pytest.approx(ref, abs=1e-6)
    assert rep.ratios == tuple(sorted(rep.ratios))  # climbing toward lam
    assert rep.passed


def test_rate_probe_interval_chain_respects_top_rate():
    eng = _poisson_engine(32, tolerance=1e-8)
    e0 = InitialUpperExpectation.degenerate(eng.generator.space, 0)
    rep = rate_condition_probe(e0, eng, 0.0, [2.0 ** -k for k in range(1, 9)])
    assert rep.bound == 2.0
    assert max(rep.ratios) <= rep.bound + rep.slack
    assert rep.passed


def test_rate_probe_two_state_bounded_by_worst_exit_rate():
    a, b = 1.0, 2.0
    eng = _two_state_engine(tolerance=1e-9)
    e0 = InitialUpperExpectation.degenerate(SPACE2, 0)
    rep = rate_condition_probe(e0, eng, 0.0, [0.5, 0.25, 0.125])
    assert rep.bound == pytest.approx(max(a, b), abs=1e-12)
    assert max(rep.ratios) <= rep.bound + rep.slack


# --- refining-grid limits ----------------------------------------------------------------

def test_grid_limit_constant_family_converges_immediately():
    eng = _two_state_engine()
    e0 = InitialUpperExpectation.degenerate(SPACE2, 0)

    def family(level: int) -> FinitaryGamble:
        return FinitaryGamble(SPACE2, TimeGrid((0.3,)), expr=Const(0.7))

    rep = grid_limit(e0, eng, family, (0, 1), 1e-9)
    np.testing.assert_allclose(rep.estimates, 0.7, atol=1e-10)
    assert rep.converged
    assert rep.estimates_monotone


def test_grid_limit_hitting_reaches_exponential_arrival_law():
    eng = _two_state_engine(tolerance=1e-11)
    e0 = InitialUpperExpectation.degenerate(SPACE2, 0)
    rep = grid_limit(e0, eng, hitting_family(SPACE2, 1, 0.7), range(0, 11), 1e-3)
    assert rep.estimates_monotone
    assert rep.converged
    assert rep.estimates[-1] == pytest.approx(1.0 - math.exp(-0.7), abs=1e-3)


def test_hitting_family_validates_inputs():
    with pytest.raises(ValueError):
        hitting_family(SPACE2, 5, 0.7)
    with pytest.raises(ValueError):
        hitting_family(SPACE2, 1, -0.1)


# --- decreasing families -----------------------------------------------------------------

def test_downward_constant_family_is_immediate():
    eng = _two_state_engine()
    e0 = InitialUpperExpectation.degenerate(SPACE2, 0)
    f = FinitaryGamble(SPACE2, TimeGrid((0.4,)), expr=IndicatorEq(0, 1))
    rep = downward_probe(e0, eng, [f, f, f], f, tol=1e-9)
    assert rep.passed
    assert rep.estimates[0] == rep.estimates[-1]


def test_downward_shifted_family_converges_like_its_shifts():
    eng = _two_state_engine()
    e0 = InitialUpperExpectation.degenerate(SPACE2, 0)
    base = IndicatorEq(0, 1)
    fams = [FinitaryGamble(SPACE2, TimeGrid((0.4,)),
                           expr=Add(base, Const(1.0 / n)))
            for n in range(1, 13)]
    limit = FinitaryGamble(SPACE2, TimeGrid((0.4,)), expr=base)
    rep = downward_probe(e0, eng, fams, limit, tol=0.1)
    assert rep.passed
    base_value = evaluate_upper(e0, eng, limit)
    np.testing.assert_allclose(
        rep.estimates,
        [base_value + 1.0 / n for n in range(1, 13)],
        atol=1e-9)


def test_downward_poisson_tail_family_vanishes():
    space = StateSpace.truncated(48)
    eng = TransitionEngine(
        generator=poisson_generator(RateInterval(1.0, 2.0), space),
        tolerance=1e-6)
    e0 = InitialUpperExpectation.degenerate(space, 0)

    def thresh(n: int):
        return Min((Const(1.0), Max((Const(0.0),
                                     Sub(Coord(0), Const(float(n - 1)))))))

    fams = [FinitaryGamble(space, TimeGrid((1.0,)), expr=thresh(n))
            for n in range(1, 21)]
    limit = FinitaryGamble(space, TimeGrid((1.0,)), expr=Const(0.0))
    rep = downward_probe(e0, eng, fams, limit, tol=1e-6)
    assert rep.passed
    assert abs(rep.estimates[-1]) <= 1e-6


def test_downward_rejects_increasing_sequences():
    eng = _two_state_engine()
    e0 = InitialUpperExpectation.degenerate(SPACE2, 0)
    growing = [FinitaryGamble(SPACE2, TimeGrid((0.4,)), expr=Const(float(n)))
               for n in range(1, 4)]
    limit = FinitaryGamble(SPACE2, TimeGrid((0.4,)), expr=Const(0.0))
    with pytest.raises(MonotoneFamilyError):
        downward_probe(e0, eng, growing, limit, tol=1e-6)
