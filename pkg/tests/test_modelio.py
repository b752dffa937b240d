"""JSON model/query files: parsing, diagnostics, and stable serialization."""

from __future__ import annotations

import json

import numpy as np
import pytest

from ictmc import (
    SchemaError,
    StateSpace,
    parse_expression,
    parse_model,
    parse_queries,
    round_floats,
    serialize_model,
)
from ictmc.modelio import (
    expression_to_text,
    parse_model_data,
    parse_queries_data,
)

POISSON_DOC = {
    "format": "ictmc-model/1",
    "state_space": {"kind": "truncated", "size": 8},
    "generator": {"kind": "poisson_interval", "lower": 1.0, "upper": 2.0},
    "initial": {"kind": "degenerate", "state": 0},
}

EXTREMES_DOC = {
    "format": "ictmc-model/1",
    "state_space": {"kind": "finite", "labels": ["a", "b"]},
    "generator": {"kind": "extremes",
                  "matrices": [[[-1.0, 1.0], [2.0, -2.0]],
                               [[-3.0, 3.0], [1.0, -1.0]]]},
    "initial": {"kind": "vacuous"},
}


def _issues(data) -> list[str]:
    with pytest.raises(SchemaError) as err:
        parse_model_data(data)
    return [str(i) for i in err.value.issues]


# --- model parsing --------------------------------------------------------------

def test_parse_fills_numeric_defaults():
    model = parse_model_data(POISSON_DOC)
    assert model.tolerance == 1e-6
    assert model.step_cap is None
    assert model.iteration_cap == 2 ** 20
    assert model.space.size == 8
    assert model.space.truncated


def test_serialize_parse_serialize_is_a_fixpoint():
    for doc in (POISSON_DOC, EXTREMES_DOC):
        once = serialize_model(parse_model_data(doc))
        twice = serialize_model(parse_model_data(once))
        assert once == twice
        assert once["format"] == "ictmc-model/1"


def test_file_round_trip(tmp_path):
    path = tmp_path / "model.json"
    path.write_text(json.dumps(EXTREMES_DOC))
    model = parse_model(path)
    assert model.space.labels == ("a", "b")
    assert model.generator.extremes is not None
    np.testing.assert_array_equal(model.generator.extremes[0].entries,
                                  [[-1.0, 1.0], [2.0, -2.0]])


def test_reversed_rate_interval_is_flagged():
    doc = dict(POISSON_DOC)
    doc["generator"] = {"kind": "poisson_interval", "lower": 2.0, "upper": 1.0}
    assert _issues(doc) == ["generator.upper: upper rate below lower rate"]


def test_negative_off_diagonal_is_flagged_with_its_index():
    doc = dict(EXTREMES_DOC)
    doc["generator"] = {"kind": "extremes",
                        "matrices": [[[-1.0, 1.0], [2.0, -2.0]],
                                     [[-3.0, 3.0], [-1.0, 1.0]]]}
    assert _issues(doc) == [
        "generator.matrices[1]: off-diagonal rates must be nonnegative"]


def test_unknown_top_level_key_is_flagged():
    doc = dict(POISSON_DOC)
    doc["space"] = {"kind": "truncated"}
    assert "$.space: unknown key" in _issues(doc)


def test_wrong_format_string_is_flagged():
    doc = dict(POISSON_DOC)
    doc["format"] = "ictmc-model/9"
    assert any(i.startswith("$.format:") for i in _issues(doc))


def test_several_problems_are_collected_together():
    doc = {
        "format": "ictmc-model/1",
        "state_space": {"kind": "truncated", "size": 8},
        "generator": {"kind": "poisson_interval", "lower": 2.0, "upper": 1.0},
        "initial": {"kind": "degenerate", "state": 99},
    }
    issues = _issues(doc)
    assert len(issues) >= 2
    assert any("generator.upper" in i for i in issues)
    assert any("initial" in i for i in issues)


# --- expression text ---------------------------------------------------------------

def test_expression_text_is_stable_after_one_round_trip():
    texts = [
        "0.5 * ((coord(0) + coord(1)))",
        "min(coord(0), 6)",
        "indicator(coord(0) != coord(1))",
        "indicator(coord(1) == 3)",
        "max(0, coord(0) - 2)",
    ]
    for text in texts:
        once = expression_to_text(parse_expression(text))
        twice = expression_to_text(parse_expression(once))
        assert once == twice


def test_expression_semantics_via_evaluation():
    space = StateSpace.truncated(8)
    expr = parse_expression("min(coord(0), 6) - 2 * indicator(coord(1) == 3)")
    cols = [np.array([0, 7, 7]), np.array([3, 3, 4])]
    np.testing.assert_array_equal(expr.evaluate(space, cols), [-2.0, 4.0, 6.0])


def test_expression_rejects_unretained_states_against_a_space():
    doc = {"format": "ictmc-queries/1",
           "queries": [{"kind": "eval", "grid": [0.1],
                        "gamble": "indicator(coord(0) == 99)"}]}
    with pytest.raises(SchemaError) as err:
        parse_queries_data(doc, StateSpace.truncated(8))
    assert "outside the space" in str(err.value)


# --- query parsing -------------------------------------------------------------------

def test_queries_get_positional_default_names():
    doc = {"format": "ictmc-queries/1",
           "queries": [
               {"kind": "eval", "grid": [0.0, 0.1],
                "gamble": "indicator(coord(0) != coord(1))"},
               {"kind": "transition", "t": 0.5, "gamble": "min(coord(0), 6)",
                "name": "count-mean", "lower": True},
           ]}
    first, second = parse_queries_data(doc)
    assert first.name == "q0"
    assert first.kind == "eval"
    assert first.params["lower"] is False
    assert second.name == "count-mean"
    assert second.params["lower"] is True
    assert second.params["t"] == 0.5


def test_check_queries_carry_their_kind_specific_params():
    doc = {"format": "ictmc-queries/1",
           "queries": [
               {"kind": "check", "check": "axioms", "samples": 16},
               {"kind": "check", "check": "semigroup", "s": 0.2, "t": 0.3},
               {"kind": "check", "check": "rate_condition", "t": 0.0,
                "deltas": [0.5, 0.25]},
               {"kind": "converge", "family": "hitting", "target": 3,
                "horizon": 0.7, "levels": [0, 1, 2]},
           ]}
    ax, sg, rc, cv = parse_queries_data(doc)
    assert ax.params["check"] == "axioms" and ax.params["samples"] == 16
    assert sg.params["s"] == 0.2 and sg.params["t"] == 0.3
    assert rc.params["deltas"] == (0.5, 0.25)
    assert cv.kind == "converge"
    assert cv.params["target"] == 3 and cv.params["levels"] == (0, 1, 2)


def test_query_diagnostics_name_the_offending_entry():
    doc = {"format": "ictmc-queries/1",
           "queries": [{"kind": "eval", "grid": [0.1], "gamble": "coord(0) +"}]}
    with pytest.raises(SchemaError) as err:
        parse_queries_data(doc)
    assert str(err.value).startswith("queries[0].gamble:")

    doc = {"format": "ictmc-queries/1",
           "queries": [{"kind": "check", "check": "downward"}]}
    with pytest.raises(SchemaError) as err:
        parse_queries_data(doc)
    missing = [str(i) for i in err.value.issues]
    assert "queries[0].limit: missing required key" in missing


def test_query_file_round_trip(tmp_path):
    path = tmp_path / "queries.json"
    path.write_text(json.dumps({
        "format": "ictmc-queries/1",
        "queries": [{"kind": "eval", "grid": [0.0, 0.1],
                     "gamble": "indicator(coord(0) != coord(1))",
                     "name": "jump-short"}]}))
    (query,) = parse_queries(path)
    assert query.name == "jump-short"
    assert query.params["grid"].points == (0.0, 0.1)


# --- float rounding ---------------------------------------------------------------------

def test_round_floats_rounds_to_twelve_significant_digits():
    assert round_floats(0.1 + 0.2) == 0.3
    assert round_floats({"x": [1.0 / 3.0]}) == {"x": [0.333333333333]}
    assert round_floats({"n": 3, "s": "text"}) == {"n": 3, "s": "text"}
    assert round_floats(1e-17) == 1e-17  # tiny values are not flushed to zero
    assert round_floats(True) is True  # bools are not floats
    assert round_floats(float("nan")) == "nan"  # JSON-safe sentinel
