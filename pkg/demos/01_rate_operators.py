"""
Upper rate operators: three ways to describe uncertain rates
=============================================================

A chain whose transition rates are only known to lie in a set is driven by
an upper rate operator: for each gamble it reports the largest expected
drift any admissible rate matrix could produce.  This script builds the
three supported descriptions and pokes at their shared behaviour.
"""

import numpy as np

from ictmc import (
    Gamble,
    RateInterval,
    RateMatrix,
    StateSpace,
    UpperRateOperator,
    apply_upper_rate,
    check_upper_rate_axioms,
    lower_via_conjugacy,
    poisson_generator,
    rate_bound,
)

# Two regimes for a machine that alternates between "idle" and "busy": a
# slow rate matrix and a fast one.
space = StateSpace.finite(("idle", "busy"))
q_slow = RateMatrix(np.array([[-1.0, 1.0], [2.0, -2.0]]))
q_fast = RateMatrix(np.array([[-3.0, 3.0], [1.0, -1.0]]))

# 1. An envelope over finitely many extreme matrices.
envelope = UpperRateOperator(space, extremes=(q_slow, q_fast))

# 2. Row-wise interval bounds: every off-diagonal rate may sit anywhere
#    between its lower and upper table entry (diagonals balance the rows).
lo = np.array([[-3.0, 1.0], [0.5, -2.0]])
hi = np.array([[-1.0, 3.0], [2.0, -0.5]])
banded = UpperRateOperator(space, row_lower=lo, row_upper=hi)

# 3. An event counter whose arrival rate lives in an interval.
counter = poisson_generator(RateInterval(1.0, 2.0), StateSpace.truncated(16))

# The operator picks the drift-maximising rates separately for each gamble,
# so the result is a gamble again: one drift value per state.
f = Gamble(space, np.array([0.0, 1.0]))  # "is the machine busy?"
print("envelope drift of 1_busy :", apply_upper_rate(envelope, f).values)
print("banded drift of 1_busy   :", apply_upper_rate(banded, f).values)

# The lower drift is the conjugate of the upper drift of the negated gamble.
upper = apply_upper_rate(envelope, f)
lower = lower_via_conjugacy(lambda g: apply_upper_rate(envelope, g), f)
print("upper vs lower drift     :", upper.values, lower.values)

# Every description carries a worst-case total rate, used for step sizing.
for name, gen in (("envelope", envelope), ("banded", banded),
                  ("counter", counter)):
    print(f"rate bound [{name:8s}]   :", rate_bound(gen))

# A battery of sampled functional checks (constants, sublinearity,
# homogeneity, the positive-maximum principle) guards against ill-formed
# rate descriptions.
for name, gen in (("envelope", envelope), ("banded", banded),
                  ("counter", counter)):
    rep = check_upper_rate_axioms(gen, sample_count=64, seed=0, tolerance=1e-9)
    worst = max(rep.constant_dev, rep.subadditivity_excess,
                rep.homogeneity_dev, rep.pmp_excess)
    print(f"axiom battery [{name:8s}] passed: {rep.passed} (worst {worst:.3e})")
