"""
Gambles on several observation times
=====================================

Payoffs that read the chain at finitely many times reduce backwards, one
time point per stage.  This script evaluates a few, checks that refining
the observation grid never causes contradictions, and chases two limits:
hitting a state on ever finer dyadic grids, and a decreasing payoff
sequence collapsing onto its limit.
"""

import math

import numpy as np

from ictmc import (
    Add,
    Const,
    Coord,
    FinitaryGamble,
    IndicatorEq,
    InitialUpperExpectation,
    Max,
    Min,
    RateInterval,
    RateMatrix,
    StateSpace,
    Sub,
    TimeGrid,
    TransitionEngine,
    UpperRateOperator,
    check_consistency,
    downward_probe,
    evaluate_lower,
    evaluate_upper,
    grid_limit,
    hitting_family,
    jump_gamble,
    poisson_generator,
    rate_condition_probe,
)

space = StateSpace.finite(("idle", "busy"))
engine = TransitionEngine(
    generator=UpperRateOperator(
        space, extremes=(RateMatrix(np.array([[-1.0, 1.0], [2.0, -2.0]])),)),
    tolerance=1e-10)
start = InitialUpperExpectation.degenerate(space, 0)

# Did the machine change state between time 0 and time 0.5?
moved = jump_gamble(space, 0.0, 0.5)
up = evaluate_upper(start, engine, moved)
lo = evaluate_lower(start, engine, moved)
print("move probability         :", lo, "to", up)

# A payoff reading two times: busy at 0.1 pays 1, busy at 0.3 pays 1 more.
grid = TimeGrid((0.1, 0.3))
both = FinitaryGamble(space, grid,
                      expr=Add(IndicatorEq(0, 1), IndicatorEq(1, 1)))
print("expected busy readings   :", evaluate_upper(start, engine, both))

# Adding unread observation times must not change any value.
rep = check_consistency(start, engine, TimeGrid((0.5,)),
                        TimeGrid((0.2, 0.5, 0.9)),
                        FinitaryGamble(space, TimeGrid((0.5,)),
                                       expr=IndicatorEq(0, 1)),
                        tol=1e-8)
print("grid refinement deviation:", f"{rep.deviation:.2e}", "passed:", rep.passed)

# Short-window move probabilities divided by the window length approach the
# exit rate, and never exceed the generator's rate bound.
probe = rate_condition_probe(start, engine, 0.0, [2.0 ** -k for k in range(1, 7)])
print("jump-rate ratios         :", [round(r, 4) for r in probe.ratios])
print("stay below rate bound    :", probe.bound, "passed:", probe.passed)

# Watching for a visit to "busy" on dyadic grids: level m checks 2^m + 1
# equally spaced times up to the horizon.  The estimates increase with the
# level and settle at the first-arrival law.
limit = grid_limit(start, engine, hitting_family(space, 1, 0.7),
                   levels=range(0, 9), tol=1e-3)
print("hitting estimates        :", [round(e, 5) for e in limit.estimates[-3:]])
print("limit vs 1 - exp(-0.7)   :", limit.estimates[-1], 1.0 - math.exp(-0.7))

# A decreasing payoff sequence: thresholds sliding off an event counter.
cspace = StateSpace.truncated(48)
cengine = TransitionEngine(
    generator=poisson_generator(RateInterval(1.0, 2.0), cspace),
    tolerance=1e-6)
cstart = InitialUpperExpectation.degenerate(cspace, 0)

def at_least(k):
    return Min((Const(1.0), Max((Const(0.0), Sub(Coord(0), Const(k - 1.0))))))

family = [FinitaryGamble(cspace, TimeGrid((1.0,)), expr=at_least(k))
          for k in range(1, 16)]
zero = FinitaryGamble(cspace, TimeGrid((1.0,)), expr=Const(0.0))
down = downward_probe(cstart, cengine, family, zero, tol=1e-6)
print("threshold tail estimates :", [f"{e:.2e}" for e in down.estimates[-3:]])
print("collapses onto zero      :", down.passed)
