"""Imprecise continuous-time Markov chains.

Upper/lower expectations for finite-window Markov chains whose transition
rates are only known up to a set: envelope generators, their sublinear
exponential semigroup, multi-time (finitary) queries, Poisson-counter
closed forms, and independent oracles for cross-checking every route.
"""

from .expressions import (Add, Const, Coord, Expr, IndicatorEq, IndicatorNe,
                          Max, Min, Scale, Sub)
from .finitary import (DenseCapError, FinitaryGamble, InitialUpperExpectation,
                       MonotoneFamilyError, TimeGrid, backward_reduce,
                       check_consistency, downward_probe, evaluate_lower,
                       evaluate_on_paths, evaluate_upper, evaluate_upper_many,
                       grid_limit, hitting_family, jump_gamble,
                       rate_condition_probe)
from .modelio import (Model, Query, SchemaError, expression_to_text,
                      parse_expression, parse_model, parse_queries,
                      round_floats, serialize_model)
from .oracles import (OracleResult, policy_mc_lower, poisson_jump_prob,
                      precise_exponential, sample_vertex_matrix,
                      two_state_closed_form)
from .poisson import (MonotonicityError, PoissonPmf, check_poisson_semigroup,
                      default_truncation, monotone_closed_form,
                      poisson_generator, poisson_pmf, support_cap)
from .rates import (RateInterval, RateMatrix, UpperRateOperator,
                    apply_upper_rate, check_upper_rate_axioms,
                    lower_via_conjugacy, operator_norm_estimate, rate_bound,
                    upper_envelope)
from .semigroup import (ConvergenceError, StepTooLargeError, TransitionEngine,
                        check_contraction, check_semigroup_law, euler_product,
                        exponential_apply, exponential_apply_many,
                        influence_radius, selection_dp, transition_step)
from .spaces import Gamble, StateSpace, gamble_norm

__version__ = "0.1.0"

__all__ = [
    "__version__",
    # spaces
    "StateSpace", "Gamble", "gamble_norm",
    # rate operators
    "RateInterval", "RateMatrix", "UpperRateOperator", "apply_upper_rate",
    "rate_bound", "upper_envelope", "operator_norm_estimate",
    "check_upper_rate_axioms", "lower_via_conjugacy",
    # semigroup
    "TransitionEngine", "transition_step", "exponential_apply",
    "exponential_apply_many", "euler_product", "selection_dp",
    "influence_radius", "check_semigroup_law", "check_contraction",
    "StepTooLargeError", "ConvergenceError",
    # poisson
    "PoissonPmf", "poisson_generator", "poisson_pmf", "support_cap",
    "default_truncation", "monotone_closed_form", "check_poisson_semigroup",
    "MonotonicityError",
    # expressions
    "Expr", "Const", "Coord", "IndicatorEq", "IndicatorNe", "Add", "Sub",
    "Scale", "Min", "Max",
    # finitary
    "TimeGrid", "FinitaryGamble", "InitialUpperExpectation", "backward_reduce",
    "evaluate_upper", "evaluate_upper_many", "evaluate_lower", "jump_gamble",
    "check_consistency", "rate_condition_probe", "grid_limit",
    "downward_probe", "hitting_family", "evaluate_on_paths", "DenseCapError",
    "MonotoneFamilyError",
    # oracles
    "OracleResult", "precise_exponential", "two_state_closed_form",
    "poisson_jump_prob", "policy_mc_lower", "sample_vertex_matrix",
    # model and query files
    "Model", "Query", "SchemaError", "parse_model", "parse_queries",
    "parse_expression", "expression_to_text", "serialize_model",
    "round_floats",
]
