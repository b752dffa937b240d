"""
Worst-case transition operators over a time horizon
====================================================

Moving a gamble backwards over a horizon ``t`` means applying the upper
transition operator: the tightest state-wise upper bound on the gamble's
expectation at ``t``, over every rate trajectory the rate set allows.  An
adaptive step-doubling ladder keeps refining its Euler discretisation until
two consecutive rungs agree within the engine tolerance.
"""

import numpy as np

from ictmc import (
    Gamble,
    RateMatrix,
    StateSpace,
    TransitionEngine,
    UpperRateOperator,
    check_contraction,
    check_semigroup_law,
    euler_product,
    exponential_apply,
    precise_exponential,
    selection_dp,
    transition_step,
)

space = StateSpace.finite(("idle", "busy"))
q_slow = np.array([[-1.0, 1.0], [2.0, -2.0]])
q_fast = np.array([[-3.0, 3.0], [1.0, -1.0]])
gen = UpperRateOperator(space, extremes=(RateMatrix(q_slow), RateMatrix(q_fast)))
engine = TransitionEngine(generator=gen, tolerance=1e-6)

f = Gamble(space, np.array([0.0, 1.0]))  # "is the machine busy?"

# One explicit Euler step moves the gamble a small time into the future.
step = transition_step(gen, 0.05, f)
print("one 0.05 step            :", step.values)

# The full operator at t = 0.5, with the ladder's own error estimate.
evolved, report = exponential_apply(engine, 0.5, f)
print("upper expectation at 0.5 :", evolved.values)
print("ladder steps / est error :", report.n_steps, f"{report.estimated_error:.2e}")

# The envelope dominates each individual matrix: compare with the precise
# chain run under the slow matrix alone (eigensolver route).
p_slow = precise_exponential(q_slow, 0.5).value
print("precise slow chain       :", p_slow @ f.values)

# Fixed-step products are available too; the selection-route product must
# agree with the plain Euler product at machine precision.
via_euler = euler_product(gen, 0.05, 10, f)
via_dp = selection_dp(gen.extremes, 0.05, 10, f)
print("fixed products agree     :", np.max(np.abs(via_euler.values - via_dp.values)))

# The law of composition: evolving over s + t equals evolving over t, then s.
law = check_semigroup_law(engine, 0.2, 0.3, [f])
print("composition deviation    :", f"{law.worst_deviation:.2e}",
      "passed:", law.passed)

# The operator never expands sup-distances between gambles.
g = Gamble(space, np.array([0.8, 0.1]))
con = check_contraction(engine, 0.3, f, g)
print("contraction lhs <= rhs   :", f"{con.lhs:.6f} <= {con.rhs:.6f}",
      "passed:", con.passed)
