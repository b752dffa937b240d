"""Strict JSON model/query files and deterministic serialization helpers.

Files carry a versioned ``format`` key; unknown keys are rejected with the
exact path that offended.  Gamble expressions use a small text grammar —
``coord(i)``, ``indicator(coord(i) == s)``, ``indicator(coord(i) != coord(j))``,
constants, ``+``, ``-``, scalar ``*``, ``min(...)``, ``max(...)`` — enough
for jump indicators, hitting queries, and reward sums without a general
interpreter.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field

import numpy as np

from .expressions import (Add, Const, Coord, Expr, IndicatorEq, IndicatorNe,
                          Max, Min, Scale, Sub)
from .finitary import InitialUpperExpectation, TimeGrid
from .rates import RateInterval, RateMatrix, UpperRateOperator
from .semigroup import TransitionEngine
from .spaces import StateSpace

__all__ = [
    "MODEL_FORMAT",
    "QUERY_FORMAT",
    "REPORT_FORMAT",
    "Issue",
    "SchemaError",
    "Model",
    "Query",
    "parse_model",
    "parse_model_data",
    "serialize_model",
    "parse_queries",
    "parse_queries_data",
    "parse_expression",
    "expression_to_text",
    "round_floats",
]

MODEL_FORMAT = "ictmc-model/1"
QUERY_FORMAT = "ictmc-queries/1"
REPORT_FORMAT = "ictmc-report/1"

_CHECK_KINDS = ("axioms", "semigroup", "consistency", "rate_condition", "downward")


@dataclass(frozen=True)
class Issue:
    """One diagnostic: where in the file, and what went wrong."""

    path: str
    reason: str

    def __str__(self):
        return f"{self.path}: {self.reason}"


class SchemaError(ValueError):
    """Input file rejected; ``issues`` lists every collected diagnostic."""

    def __init__(self, issues):
        self.issues = tuple(issues)
        super().__init__("; ".join(str(i) for i in self.issues))


class _Collector:
    def __init__(self):
        self.issues: list[Issue] = []

    def add(self, path: str, reason: str):
        self.issues.append(Issue(path, reason))

    def raise_if_any(self):
        if self.issues:
            raise SchemaError(self.issues)


def _expect_keys(obj, path, required, optional, issues: _Collector) -> bool:
    if not isinstance(obj, dict):
        issues.add(path, f"expected an object, got {type(obj).__name__}")
        return False
    ok = True
    for key in obj:
        if key not in required and key not in optional:
            issues.add(f"{path}.{key}", "unknown key")
            ok = False
    for key in required:
        if key not in obj:
            issues.add(f"{path}.{key}", "missing required key")
            ok = False
    return ok


def _as_number(value, path, issues: _Collector, minimum=None) -> float | None:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        issues.add(path, "expected a number")
        return None
    value = float(value)
    if not math.isfinite(value):
        issues.add(path, "must be finite")
        return None
    if minimum is not None and value < minimum:
        issues.add(path, f"must be >= {minimum}")
        return None
    return value


def _as_int(value, path, issues: _Collector, minimum=None) -> int | None:
    if isinstance(value, bool) or not isinstance(value, int):
        issues.add(path, "expected an integer")
        return None
    if minimum is not None and value < minimum:
        issues.add(path, f"must be >= {minimum}")
        return None
    return int(value)


# ---------------------------------------------------------------------------
# model files


@dataclass(frozen=True)
class Model:
    """A fully validated model file: space, generator, initial law, numerics."""

    space: StateSpace
    generator: UpperRateOperator
    initial: InitialUpperExpectation
    tolerance: float = 1e-6
    step_cap: float | None = None
    iteration_cap: int = 2 ** 20

    def engine(self, tolerance: float | None = None) -> TransitionEngine:
        return TransitionEngine(
            generator=self.generator, step_cap=self.step_cap,
            tolerance=self.tolerance if tolerance is None else float(tolerance),
            iteration_cap=self.iteration_cap)


def _parse_space(data, issues: _Collector) -> StateSpace | None:
    path = "state_space"
    if not _expect_keys(data, path, ("kind",), ("labels", "size"), issues):
        return None
    kind = data.get("kind")
    if kind == "finite":
        if "size" in data:
            issues.add(f"{path}.size", "finite spaces take labels, not size")
            return None
        labels = data.get("labels")
        if not isinstance(labels, list) or not all(isinstance(s, str) for s in labels):
            issues.add(f"{path}.labels", "expected a list of strings")
            return None
        try:
            return StateSpace.finite(labels)
        except ValueError as exc:
            issues.add(f"{path}.labels", str(exc))
            return None
    if kind == "truncated":
        if "labels" in data:
            issues.add(f"{path}.labels", "truncated spaces take size, not labels")
            return None
        size = _as_int(data.get("size"), f"{path}.size", issues, minimum=2)
        if size is None:
            return None
        return StateSpace.truncated(size)
    issues.add(f"{path}.kind", "must be 'finite' or 'truncated'")
    return None


def _square(data, path, n, issues: _Collector) -> np.ndarray | None:
    arr = None
    if isinstance(data, list) and all(isinstance(r, list) for r in data):
        try:
            arr = np.array(data, dtype=np.float64)
        except (TypeError, ValueError):
            arr = None
    if arr is None or arr.ndim != 2 or arr.shape != (n, n) or \
            not np.all(np.isfinite(arr)):
        issues.add(path, f"expected a finite {n}x{n} matrix")
        return None
    return arr


def _parse_generator(data, space: StateSpace,
                     issues: _Collector) -> UpperRateOperator | None:
    path = "generator"
    if not isinstance(data, dict) or "kind" not in data:
        issues.add(path, "expected an object with a 'kind' key")
        return None
    kind = data["kind"]
    n = space.size
    if kind == "extremes":
        if not _expect_keys(data, path, ("kind", "matrices"), (), issues):
            return None
        mats = data["matrices"]
        if not isinstance(mats, list) or not mats:
            issues.add(f"{path}.matrices", "expected a nonempty list of matrices")
            return None
        rate_mats = []
        for i, m in enumerate(mats):
            arr = _square(m, f"{path}.matrices[{i}]", n, issues)
            if arr is None:
                return None
            try:
                rate_mats.append(RateMatrix(arr))
            except ValueError as exc:
                issues.add(f"{path}.matrices[{i}]", str(exc))
                return None
        return UpperRateOperator(space, extremes=tuple(rate_mats))
    if kind == "row_intervals":
        if not _expect_keys(data, path, ("kind", "lower", "upper"), (), issues):
            return None
        lo = _square(data["lower"], f"{path}.lower", n, issues)
        hi = _square(data["upper"], f"{path}.upper", n, issues)
        if lo is None or hi is None:
            return None
        try:
            return UpperRateOperator(space, row_lower=lo, row_upper=hi)
        except ValueError as exc:
            issues.add(path, str(exc))
            return None
    if kind == "poisson_interval":
        if not _expect_keys(data, path, ("kind", "lower", "upper"), (), issues):
            return None
        lo = _as_number(data["lower"], f"{path}.lower", issues, minimum=0.0)
        hi = _as_number(data["upper"], f"{path}.upper", issues)
        if lo is None or hi is None:
            return None
        if hi < lo:
            issues.add(f"{path}.upper", "upper rate below lower rate")
            return None
        if not space.is_truncated:
            issues.add(path, "poisson_interval needs a truncated state space")
            return None
        return UpperRateOperator(space, interval=RateInterval(lo, hi))
    issues.add(f"{path}.kind",
               "must be 'extremes', 'row_intervals' or 'poisson_interval'")
    return None


def _parse_initial(data, space: StateSpace,
                   issues: _Collector) -> InitialUpperExpectation | None:
    path = "initial"
    if not isinstance(data, dict) or "kind" not in data:
        issues.add(path, "expected an object with a 'kind' key")
        return None
    kind = data["kind"]
    try:
        if kind == "degenerate":
            if not _expect_keys(data, path, ("kind", "state"), (), issues):
                return None
            state = _as_int(data["state"], f"{path}.state", issues, minimum=0)
            if state is None:
                return None
            return InitialUpperExpectation.degenerate(space, state)
        if kind == "pmfs":
            if not _expect_keys(data, path, ("kind", "pmfs"), (), issues):
                return None
            pmfs = data["pmfs"]
            if not isinstance(pmfs, list) or not pmfs:
                issues.add(f"{path}.pmfs", "expected a nonempty list of pmfs")
                return None
            return InitialUpperExpectation.envelope(space, np.array(pmfs, dtype=float))
        if kind == "vacuous":
            if not _expect_keys(data, path, ("kind",), ("states",), issues):
                return None
            states = data.get("states")
            if states is not None and (
                    not isinstance(states, list)
                    or not all(isinstance(s, int) and not isinstance(s, bool)
                               for s in states)):
                issues.add(f"{path}.states", "expected a list of state indices")
                return None
            return InitialUpperExpectation.vacuous(space, states)
    except (ValueError, TypeError) as exc:
        issues.add(path, str(exc))
        return None
    issues.add(f"{path}.kind", "must be 'degenerate', 'pmfs' or 'vacuous'")
    return None


def parse_model_data(data) -> Model:
    """Validate an already-decoded model object."""
    issues = _Collector()
    if not _expect_keys(data, "$", ("format", "state_space", "generator", "initial"),
                        ("numerics",), issues):
        issues.raise_if_any()
    if data.get("format") != MODEL_FORMAT:
        issues.add("$.format", f"expected {MODEL_FORMAT!r}")
        issues.raise_if_any()

    space = _parse_space(data["state_space"], issues)
    numerics = {"tolerance": 1e-6, "step_cap": None, "iteration_cap": 2 ** 20}
    if "numerics" in data:
        block = data["numerics"]
        if _expect_keys(block, "numerics", (),
                        ("tolerance", "step_cap", "iteration_cap"), issues):
            if "tolerance" in block:
                v = _as_number(block["tolerance"], "numerics.tolerance", issues)
                if v is not None and v <= 0.0:
                    issues.add("numerics.tolerance", "must be positive")
                elif v is not None:
                    numerics["tolerance"] = v
            if "step_cap" in block and block["step_cap"] is not None:
                v = _as_number(block["step_cap"], "numerics.step_cap", issues)
                if v is not None and v <= 0.0:
                    issues.add("numerics.step_cap", "must be positive")
                elif v is not None:
                    numerics["step_cap"] = v
            if "iteration_cap" in block:
                v = _as_int(block["iteration_cap"], "numerics.iteration_cap",
                            issues, minimum=1)
                if v is not None:
                    numerics["iteration_cap"] = v
    if space is None:
        issues.raise_if_any()
    generator = _parse_generator(data["generator"], space, issues)
    initial = _parse_initial(data["initial"], space, issues)
    issues.raise_if_any()
    return Model(space=space, generator=generator, initial=initial,
                 tolerance=numerics["tolerance"], step_cap=numerics["step_cap"],
                 iteration_cap=numerics["iteration_cap"])


def parse_model(path) -> Model:
    """Parse and validate a model file."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            data = json.load(fh)
    except OSError as exc:
        raise SchemaError([Issue("$", f"cannot read file: {exc}")]) from exc
    except json.JSONDecodeError as exc:
        raise SchemaError([Issue(f"$ (line {exc.lineno})",
                                 f"invalid JSON: {exc.msg}")]) from exc
    return parse_model_data(data)


def serialize_model(model: Model) -> dict:
    """Canonical JSON-ready form; a parse/serialize round trip is a fixpoint."""
    space = model.space
    if space.is_truncated:
        space_block = {"kind": "truncated", "size": space.size}
    else:
        space_block = {"kind": "finite", "labels": list(space.labels)}
    gen = model.generator
    if gen.extremes is not None:
        gen_block = {"kind": "extremes",
                     "matrices": [np.asarray(q.entries).tolist()
                                  for q in gen.extremes]}
    elif gen.interval is not None:
        gen_block = {"kind": "poisson_interval",
                     "lower": gen.interval.lower, "upper": gen.interval.upper}
    else:
        gen_block = {"kind": "row_intervals",
                     "lower": np.asarray(gen.row_lower).tolist(),
                     "upper": np.asarray(gen.row_upper).tolist()}
    init = model.initial
    if init.kind == "degenerate":
        init_block = {"kind": "degenerate", "state": init.state}
    elif init.kind == "envelope":
        init_block = {"kind": "pmfs", "pmfs": np.asarray(init.pmfs).tolist()}
    else:
        init_block = {"kind": "vacuous", "states": list(init.states)}
    out = {
        "format": MODEL_FORMAT,
        "state_space": space_block,
        "generator": gen_block,
        "initial": init_block,
        "numerics": {"tolerance": model.tolerance,
                     "step_cap": model.step_cap,
                     "iteration_cap": model.iteration_cap},
    }
    return out


# ---------------------------------------------------------------------------
# expression grammar

_TOKEN_RE = re.compile(r"""
    (?P<num>\d+(?:\.\d*)?(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?)
  | (?P<name>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op>==|!=|[()+\-*,])
  | (?P<ws>\s+)
  | (?P<bad>.)
""", re.VERBOSE)


class ExpressionError(ValueError):
    """Gamble expression text rejected, with the offending position."""


def _tokenize(text: str) -> list[tuple[str, str, int]]:
    tokens = []
    for m in _TOKEN_RE.finditer(text):
        kind = m.lastgroup
        if kind == "ws":
            continue
        if kind == "bad":
            raise ExpressionError(
                f"unexpected character {m.group()!r} at position {m.start()}")
        tokens.append((kind, m.group(), m.start()))
    tokens.append(("end", "", len(text)))
    return tokens


class _ExprParser:
    def __init__(self, text: str):
        self.text = text
        self.tokens = _tokenize(text)
        self.pos = 0

    def peek(self):
        return self.tokens[self.pos]

    def take(self, kind=None, value=None):
        tok = self.tokens[self.pos]
        if (kind is not None and tok[0] != kind) or \
                (value is not None and tok[1] != value):
            want = value if value is not None else kind
            raise ExpressionError(
                f"expected {want!r} at position {tok[2]}, got {tok[1]!r}")
        self.pos += 1
        return tok

    def parse(self) -> Expr:
        node = self.sum()
        tok = self.peek()
        if tok[0] != "end":
            raise ExpressionError(
                f"unexpected {tok[1]!r} at position {tok[2]}")
        return node

    def sum(self) -> Expr:
        node = self.product()
        while self.peek()[1] in ("+", "-"):
            op = self.take("op")[1]
            rhs = self.product()
            node = Add(node, rhs) if op == "+" else Sub(node, rhs)
        return node

    def product(self) -> Expr:
        node = self.unary()
        while self.peek()[1] == "*":
            tok = self.take("op")
            rhs = self.unary()
            if isinstance(node, Const):
                node = Scale(node.value, rhs)
            elif isinstance(rhs, Const):
                node = Scale(rhs.value, node)
            else:
                raise ExpressionError(
                    f"multiplication at position {tok[2]} needs a scalar side")
        return node

    def unary(self) -> Expr:
        if self.peek()[1] == "-":
            self.take("op")
            inner = self.unary()
            if isinstance(inner, Const):
                return Const(-inner.value)
            return Scale(-1.0, inner)
        return self.atom()

    def atom(self) -> Expr:
        kind, value, pos = self.peek()
        if kind == "num":
            self.take()
            return Const(float(value))
        if value == "(":
            self.take("op", "(")
            node = self.sum()
            self.take("op", ")")
            return node
        if kind == "name":
            if value == "coord":
                return self.coord()
            if value == "indicator":
                return self.indicator()
            if value in ("min", "max"):
                return self.minmax(value)
            raise ExpressionError(f"unknown name {value!r} at position {pos}")
        raise ExpressionError(f"unexpected {value!r} at position {pos}")

    def coord(self) -> Coord:
        self.take("name", "coord")
        self.take("op", "(")
        tok = self.take("num")
        if "." in tok[1] or "e" in tok[1].lower():
            raise ExpressionError(
                f"coord index at position {tok[2]} must be an integer")
        slot = int(tok[1])
        self.take("op", ")")
        return Coord(slot)

    def indicator(self) -> Expr:
        self.take("name", "indicator")
        self.take("op", "(")
        left = self.coord()
        op = self.take("op")
        if op[1] == "==":
            tok = self.take("num")
            if "." in tok[1] or "e" in tok[1].lower():
                raise ExpressionError(
                    f"state at position {tok[2]} must be an integer")
            node: Expr = IndicatorEq(left.slot, int(tok[1]))
        elif op[1] == "!=":
            right = self.coord()
            node = IndicatorNe(left.slot, right.slot)
        else:
            raise ExpressionError(
                f"expected '==' or '!=' at position {op[2]}")
        self.take("op", ")")
        return node

    def minmax(self, which: str) -> Expr:
        self.take("name", which)
        self.take("op", "(")
        items = [self.sum()]
        while self.peek()[1] == ",":
            self.take("op", ",")
            items.append(self.sum())
        self.take("op", ")")
        if len(items) < 2:
            raise ExpressionError(f"{which}() needs at least two arguments")
        return Min(tuple(items)) if which == "min" else Max(tuple(items))


def parse_expression(text: str) -> Expr:
    """Parse gamble expression text into an evaluable tree."""
    if not isinstance(text, str) or not text.strip():
        raise ExpressionError("expected a nonempty expression string")
    return _ExprParser(text).parse()


def expression_to_text(expr: Expr) -> str:
    """Canonical text for an expression tree (parses back to an equal tree)."""
    if isinstance(expr, Const):
        return f"{expr.value:.12g}"
    if isinstance(expr, Coord):
        return f"coord({expr.slot})"
    if isinstance(expr, IndicatorEq):
        return f"indicator(coord({expr.slot}) == {expr.state})"
    if isinstance(expr, IndicatorNe):
        return f"indicator(coord({expr.slot_a}) != coord({expr.slot_b}))"
    if isinstance(expr, Add):
        return f"({expression_to_text(expr.left)} + {expression_to_text(expr.right)})"
    if isinstance(expr, Sub):
        return f"({expression_to_text(expr.left)} - {expression_to_text(expr.right)})"
    if isinstance(expr, Scale):
        return f"{expr.factor:.12g} * ({expression_to_text(expr.inner)})"
    if isinstance(expr, Min):
        return "min(" + ", ".join(expression_to_text(e) for e in expr.items) + ")"
    if isinstance(expr, Max):
        return "max(" + ", ".join(expression_to_text(e) for e in expr.items) + ")"
    raise TypeError(f"unknown expression node {type(expr).__name__}")


# ---------------------------------------------------------------------------
# query files


@dataclass(frozen=True)
class Query:
    """One validated query record; ``params`` holds kind-specific fields."""

    name: str
    kind: str
    params: dict = field(default_factory=dict)


def _parse_grid(data, path, issues: _Collector) -> TimeGrid | None:
    if not isinstance(data, list) or not data:
        issues.add(path, "expected a nonempty list of times")
        return None
    pts = []
    for i, v in enumerate(data):
        num = _as_number(v, f"{path}[{i}]", issues, minimum=0.0)
        if num is None:
            return None
        pts.append(num)
    try:
        return TimeGrid(tuple(pts))
    except ValueError as exc:
        issues.add(path, str(exc))
        return None


def _parse_expr_field(data, path, issues: _Collector,
                      max_slots: int | None,
                      space: StateSpace | None) -> Expr | None:
    if not isinstance(data, str):
        issues.add(path, "expected an expression string")
        return None
    try:
        expr = parse_expression(data)
    except ExpressionError as exc:
        issues.add(path, str(exc))
        return None
    if max_slots is not None and expr.arity() > max_slots:
        issues.add(path, f"expression reads slot {expr.arity() - 1}, "
                         f"but the grid has {max_slots} points")
        return None
    if space is not None:
        bad = _states_out_of_range(expr, space)
        if bad:
            issues.add(path, f"state {bad[0]} is outside the space "
                             f"(size {space.size})")
            return None
    return expr


def _states_out_of_range(expr: Expr, space: StateSpace) -> list[int]:
    bad = []
    todo = [expr]
    while todo:
        node = todo.pop()
        if isinstance(node, IndicatorEq) and not 0 <= node.state < space.size:
            bad.append(node.state)
        for attr in ("left", "right", "inner"):
            child = getattr(node, attr, None)
            if isinstance(child, Expr):
                todo.append(child)
        for child in getattr(node, "items", ()):  # min/max
            todo.append(child)
    return bad


def _parse_query(data, idx: int, space: StateSpace | None,
                 issues: _Collector) -> Query | None:
    path = f"queries[{idx}]"
    if not isinstance(data, dict) or "kind" not in data:
        issues.add(path, "expected an object with a 'kind' key")
        return None
    kind = data["kind"]
    name = data.get("name", f"q{idx}")
    if not isinstance(name, str) or not name or "/" in name or "\\" in name:
        issues.add(f"{path}.name", "expected a plain name string")
        return None

    if kind == "eval":
        if not _expect_keys(data, path, ("kind", "grid", "gamble"),
                            ("name", "lower"), issues):
            return None
        grid = _parse_grid(data["grid"], f"{path}.grid", issues)
        if grid is None:
            return None
        expr = _parse_expr_field(data["gamble"], f"{path}.gamble", issues,
                                 len(grid), space)
        if expr is None:
            return None
        lower = data.get("lower", False)
        if not isinstance(lower, bool):
            issues.add(f"{path}.lower", "expected a boolean")
            return None
        return Query(name, "eval", {"grid": grid, "expr": expr, "lower": lower})

    if kind == "transition":
        if not _expect_keys(data, path, ("kind", "t", "gamble"),
                            ("name", "lower"), issues):
            return None
        t = _as_number(data["t"], f"{path}.t", issues, minimum=0.0)
        expr = _parse_expr_field(data["gamble"], f"{path}.gamble", issues,
                                 1, space)
        lower = data.get("lower", False)
        if t is None or expr is None or not isinstance(lower, bool):
            if not isinstance(lower, bool):
                issues.add(f"{path}.lower", "expected a boolean")
            return None
        return Query(name, "transition", {"t": t, "expr": expr, "lower": lower})

    if kind == "check":
        check = data.get("check")
        if check not in _CHECK_KINDS:
            issues.add(f"{path}.check", f"must be one of {_CHECK_KINDS}")
            return None
        return _parse_check(data, path, name, check, space, issues)

    if kind == "converge":
        if not _expect_keys(data, path,
                            ("kind", "family", "target", "horizon", "levels"),
                            ("name", "tol"), issues):
            return None
        if data["family"] != "hitting":
            issues.add(f"{path}.family", "only the 'hitting' family is supported")
            return None
        target = _as_int(data["target"], f"{path}.target", issues, minimum=0)
        horizon = _as_number(data["horizon"], f"{path}.horizon", issues)
        levels = data["levels"]
        if not isinstance(levels, list) or not levels or \
                any(isinstance(x, bool) or not isinstance(x, int) or x < 0
                    for x in levels):
            issues.add(f"{path}.levels", "expected a list of levels >= 0")
            return None
        tol = data.get("tol", 1e-3)
        tol = _as_number(tol, f"{path}.tol", issues)
        if target is None or horizon is None or tol is None:
            return None
        if horizon <= 0.0:
            issues.add(f"{path}.horizon", "must be positive")
            return None
        if space is not None and target >= space.size:
            issues.add(f"{path}.target", "state is outside the space")
            return None
        return Query(name, "converge", {"target": target, "horizon": horizon,
                                        "levels": tuple(levels), "tol": tol})

    issues.add(f"{path}.kind",
               "must be 'eval', 'transition', 'check' or 'converge'")
    return None


def _parse_check(data, path, name, check, space, issues: _Collector) -> Query | None:
    if check == "axioms":
        if not _expect_keys(data, path, ("kind", "check"),
                            ("name", "samples"), issues):
            return None
        samples = _as_int(data.get("samples", 64), f"{path}.samples", issues,
                          minimum=1)
        if samples is None:
            return None
        return Query(name, "check", {"check": check, "samples": samples})
    if check == "semigroup":
        if not _expect_keys(data, path, ("kind", "check", "s", "t"),
                            ("name", "samples"), issues):
            return None
        s = _as_number(data["s"], f"{path}.s", issues, minimum=0.0)
        t = _as_number(data["t"], f"{path}.t", issues, minimum=0.0)
        samples = _as_int(data.get("samples", 20), f"{path}.samples", issues,
                          minimum=1)
        if s is None or t is None or samples is None:
            return None
        return Query(name, "check", {"check": check, "s": s, "t": t,
                                     "samples": samples})
    if check == "consistency":
        if not _expect_keys(data, path,
                            ("kind", "check", "grid", "fine_grid", "gamble"),
                            ("name", "tol"), issues):
            return None
        grid = _parse_grid(data["grid"], f"{path}.grid", issues)
        fine = _parse_grid(data["fine_grid"], f"{path}.fine_grid", issues)
        if grid is None or fine is None:
            return None
        if grid.is_subgrid_of(fine) is None:
            issues.add(f"{path}.fine_grid", "must contain every coarse time")
            return None
        expr = _parse_expr_field(data["gamble"], f"{path}.gamble", issues,
                                 len(grid), space)
        tol = _as_number(data.get("tol", 0.0), f"{path}.tol", issues, minimum=0.0)
        if expr is None or tol is None:
            return None
        return Query(name, "check", {"check": check, "grid": grid,
                                     "fine_grid": fine, "expr": expr,
                                     "tol": tol})
    if check == "rate_condition":
        if not _expect_keys(data, path, ("kind", "check", "t", "deltas"),
                            ("name",), issues):
            return None
        t = _as_number(data["t"], f"{path}.t", issues, minimum=0.0)
        deltas = data["deltas"]
        if not isinstance(deltas, list) or not deltas:
            issues.add(f"{path}.deltas", "expected a nonempty list of steps")
            return None
        out = []
        for i, d in enumerate(deltas):
            num = _as_number(d, f"{path}.deltas[{i}]", issues)
            if num is None:
                return None
            if num <= 0.0:
                issues.add(f"{path}.deltas[{i}]", "steps must be positive")
                return None
            out.append(num)
        if t is None:
            return None
        return Query(name, "check", {"check": check, "t": t,
                                     "deltas": tuple(out)})
    # downward
    if not _expect_keys(data, path,
                        ("kind", "check", "grid", "family", "limit"),
                        ("name", "tol"), issues):
        return None
    grid = _parse_grid(data["grid"], f"{path}.grid", issues)
    if grid is None:
        return None
    fam = data["family"]
    if not isinstance(fam, list) or not fam:
        issues.add(f"{path}.family", "expected a nonempty list of expressions")
        return None
    exprs = []
    for i, item in enumerate(fam):
        expr = _parse_expr_field(item, f"{path}.family[{i}]", issues,
                                 len(grid), space)
        if expr is None:
            return None
        exprs.append(expr)
    limit = _parse_expr_field(data["limit"], f"{path}.limit", issues,
                              len(grid), space)
    tol = _as_number(data.get("tol", 1e-6), f"{path}.tol", issues, minimum=0.0)
    if limit is None or tol is None:
        return None
    return Query(name, "check", {"check": "downward", "grid": grid,
                                 "family": tuple(exprs), "limit": limit,
                                 "tol": tol})


def parse_queries_data(data, space: StateSpace | None = None) -> tuple[Query, ...]:
    """Validate an already-decoded query object."""
    issues = _Collector()
    if not _expect_keys(data, "$", ("format", "queries"), (), issues):
        issues.raise_if_any()
    if data.get("format") != QUERY_FORMAT:
        issues.add("$.format", f"expected {QUERY_FORMAT!r}")
        issues.raise_if_any()
    if not isinstance(data["queries"], list):
        issues.add("$.queries", "expected a list")
        issues.raise_if_any()
    queries = []
    seen = set()
    for i, q in enumerate(data["queries"]):
        parsed = _parse_query(q, i, space, issues)
        if parsed is not None:
            if parsed.name in seen:
                issues.add(f"queries[{i}].name", "duplicate query name")
            seen.add(parsed.name)
            queries.append(parsed)
    issues.raise_if_any()
    return tuple(queries)


def parse_queries(path, space: StateSpace | None = None) -> tuple[Query, ...]:
    """Parse and validate a query file (state ranges need ``space``)."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            data = json.load(fh)
    except OSError as exc:
        raise SchemaError([Issue("$", f"cannot read file: {exc}")]) from exc
    except json.JSONDecodeError as exc:
        raise SchemaError([Issue(f"$ (line {exc.lineno})",
                                 f"invalid JSON: {exc.msg}")]) from exc
    return parse_queries_data(data, space)


def round_floats(obj):
    """Round every float to 12 significant digits for byte-stable reports."""
    if isinstance(obj, bool):
        return obj
    if isinstance(obj, float):
        if math.isnan(obj) or math.isinf(obj):
            return str(obj)
        return float(f"{obj:.12g}")
    if isinstance(obj, dict):
        return {k: round_floats(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [round_floats(v) for v in obj]
    return obj
