"""
Event counters with an interval arrival rate
=============================================

A counter that only ever steps upward, at a rate known to lie in an
interval, admits closed-form bounds: for a monotone gamble the worst case
is one of the two endpoint rates, and the endpoint chain is an ordinary
arrival process.  The engine exploits that; this script shows the pieces.
"""

import math

import numpy as np

from ictmc import (
    Gamble,
    InitialUpperExpectation,
    RateInterval,
    StateSpace,
    TransitionEngine,
    check_poisson_semigroup,
    default_truncation,
    evaluate_upper,
    jump_gamble,
    monotone_closed_form,
    poisson_generator,
    poisson_pmf,
    support_cap,
)

rates = RateInterval(1.0, 2.0)

# How many states to keep: enough that escaping the window within the
# horizon is negligible at the tolerance of interest.
n = default_truncation(z_max=5, rates=rates, t_max=1.5)
print("retained states          :", n)
space = StateSpace.truncated(n)

# The arrival distribution of the endpoint chain, with its truncation bound.
pmf = poisson_pmf(2.0 * 0.5, cap=support_cap(2.0 * 0.5))
print("arrival masses (first 4) :", np.round(pmf.masses[:4], 6))
print("escaped mass bound       :", f"{pmf.tail_bound:.2e}")

# Closed-form upper expectation of an increasing gamble: count the events
# up to 6, after half a time unit, starting from zero events.
count_capped = Gamble(space, np.minimum(np.arange(n), 6.0), tail=6.0)
value = monotone_closed_form(rates, 0.5, 0, count_capped, "increasing")
print("mean capped count at 0.5 :", value, "(top rate x t =", 2.0 * 0.5, ")")

# The same number through the general-purpose engine.
engine = TransitionEngine(generator=poisson_generator(rates, space),
                          tolerance=1e-8)
e0 = InitialUpperExpectation.degenerate(space, 0)
from ictmc import FinitaryGamble, TimeGrid, Coord, Min, Const
f = FinitaryGamble(space, TimeGrid((0.5,)),
                   expr=Min((Coord(0), Const(6.0))))
print("engine route             :", evaluate_upper(e0, engine, f))

# The chance of at least one arrival in a window grows with the rate, so
# its upper bound uses the top rate.
short = evaluate_upper(e0, engine, jump_gamble(space, 0.0, 0.1))
print("arrival within 0.1       :", short, "vs", 1.0 - math.exp(-0.2))

# An independent audit compares the engine against arrival pmf convolutions
# on random monotone gambles, and re-derives the short-window jump rates.
audit = check_poisson_semigroup(rates, 0.4, tol=1e-5, seed=1)
print("closed-form audit passed :", audit.passed,
      f"(worst deviation {audit.worst_deviation:.2e})")
