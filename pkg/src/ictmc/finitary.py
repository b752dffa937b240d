"""Upper expectations of gambles observed at finitely many times.

A finitary gamble reads the chain at the points of a time grid.  Its upper
expectation reduces one grid point at a time: the last coordinate is
integrated out by the transition engine (each prefix contributes a section,
all sections of a stage share one step ladder), the resulting table loses an
axis, and the initial model absorbs what is left.  Dense tables and
expression gambles are both supported; hitting-style expressions (a max of
single-state indicators over the whole grid) bypass the exponential-size
recursion through an equivalent two-line dynamic program.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .expressions import Expr, IndicatorEq, Max
from .rates import rate_bound
from .semigroup import TransitionEngine, exponential_apply_many
from .spaces import Gamble, StateSpace

__all__ = [
    "TimeGrid",
    "FinitaryGamble",
    "InitialUpperExpectation",
    "DenseCapError",
    "MonotoneFamilyError",
    "backward_reduce",
    "evaluate_upper",
    "evaluate_upper_many",
    "evaluate_lower",
    "jump_gamble",
    "check_consistency",
    "ConsistencyReport",
    "rate_condition_probe",
    "RateConditionReport",
    "grid_limit",
    "GridLimitReport",
    "downward_probe",
    "DownwardReport",
    "hitting_family",
    "evaluate_on_paths",
]

DENSE_CELL_CAP = 10 ** 7
ESTIMATE_MONOTONE_SLACK = 1e-10


class DenseCapError(ValueError):
    """The dense table for this grid would exceed the cell cap."""


class MonotoneFamilyError(ValueError):
    """A family advertised as monotone failed a sampled comparison."""


@dataclass(frozen=True)
class TimeGrid:
    """Strictly increasing, nonnegative observation times."""

    points: tuple[float, ...]

    def __post_init__(self):
        pts = tuple(float(t) for t in self.points)
        if not pts:
            raise ValueError("a grid needs at least one point")
        if pts[0] < 0.0:
            raise ValueError("times must be nonnegative")
        if any(b <= a for a, b in zip(pts, pts[1:])):
            raise ValueError("grid points must strictly increase")
        object.__setattr__(self, "points", pts)

    def __len__(self):
        return len(self.points)

    def is_subgrid_of(self, other: "TimeGrid") -> list[int] | None:
        """Positions of self's points inside other (exact float match)."""
        positions = []
        for t in self.points:
            try:
                positions.append(other.points.index(t))
            except ValueError:
                return None
        return positions


@dataclass(frozen=True)
class FinitaryGamble:
    """Bounded gamble on state tuples observed along a time grid.

    Dense form: ``table`` of shape ``(n,) * len(grid)`` plus a ``tail`` that
    stands for any tuple with an out-of-window coordinate (a scalar, or an
    array over the leading coordinates as produced by ``backward_reduce``;
    deeper escapes then read the nearest-edge surrogate, an approximation
    bounded by the escape mass).  Expression form: an ``Expr`` reading grid
    slots, evaluated with the single out-of-window sentinel.
    """

    space: StateSpace
    grid: TimeGrid
    table: np.ndarray | None = None
    tail: float | np.ndarray = 0.0
    expr: Expr | None = None

    def __post_init__(self):
        if (self.table is None) == (self.expr is None):
            raise ValueError("give exactly one of table or expr")
        n, k = self.space.size, len(self.grid)
        if self.table is not None:
            table = np.array(self.table, dtype=np.float64, copy=True)
            if table.shape != (n,) * k:
                raise ValueError(f"table must have shape {(n,) * k}")
            if not np.all(np.isfinite(table)):
                raise ValueError("table entries must be finite")
            table.setflags(write=False)
            object.__setattr__(self, "table", table)
            if isinstance(self.tail, np.ndarray) or (
                    hasattr(self.tail, "__len__")):
                tail = np.array(self.tail, dtype=np.float64, copy=True)
                if tail.shape != (n,) * (k - 1):
                    raise ValueError("tail table must cover the leading slots")
                tail.setflags(write=False)
                object.__setattr__(self, "tail", tail)
            else:
                object.__setattr__(self, "tail", float(self.tail))
        else:
            if self.expr.arity() > k:
                raise ValueError("expression reads more slots than the grid has")

    def __neg__(self) -> "FinitaryGamble":
        if self.table is not None:
            tail = -self.tail if isinstance(self.tail, np.ndarray) else -self.tail
            return FinitaryGamble(self.space, self.grid, table=-self.table,
                                  tail=tail)
        return FinitaryGamble(self.space, self.grid, expr=-self.expr)

    @property
    def bound(self) -> float:
        if self.table is not None:
            tail_part = float(np.max(np.abs(np.atleast_1d(self.tail))))
            return max(float(np.max(np.abs(self.table))), tail_part)
        return self.expr.bound(self.space)


@dataclass(frozen=True)
class InitialUpperExpectation:
    """Upper expectation over the time-zero state.

    Kinds: ``degenerate`` (a known start), ``envelope`` (max over finitely
    many pmfs on retained states), ``vacuous`` (max over a state set).
    """

    space: StateSpace
    kind: str
    state: int | None = None
    pmfs: np.ndarray | None = None
    states: tuple[int, ...] | None = None

    def __post_init__(self):
        n = self.space.size
        if self.kind == "degenerate":
            if self.state is None or not 0 <= self.state < n:
                raise ValueError("degenerate start must be a retained state")
        elif self.kind == "envelope":
            pmfs = np.array(self.pmfs, dtype=np.float64, copy=True)
            if pmfs.ndim != 2 or pmfs.shape[1] != n or pmfs.shape[0] < 1:
                raise ValueError("need a nonempty (m, n) array of pmfs")
            if pmfs.min() < -1e-12:
                raise ValueError("pmf entries must be nonnegative")
            if np.max(np.abs(pmfs.sum(axis=1) - 1.0)) > 1e-12:
                raise ValueError("pmfs must sum to one")
            pmfs.setflags(write=False)
            object.__setattr__(self, "pmfs", pmfs)
        elif self.kind == "vacuous":
            states = tuple(self.states) if self.states is not None else tuple(range(n))
            if not states or not all(0 <= s < n for s in states):
                raise ValueError("vacuous set must be nonempty retained states")
            object.__setattr__(self, "states", states)
        else:
            raise ValueError("unknown initial kind")

    @classmethod
    def degenerate(cls, space: StateSpace, state: int) -> "InitialUpperExpectation":
        return cls(space, "degenerate", state=int(state))

    @classmethod
    def envelope(cls, space: StateSpace, pmfs) -> "InitialUpperExpectation":
        return cls(space, "envelope", pmfs=np.asarray(pmfs, dtype=np.float64))

    @classmethod
    def vacuous(cls, space: StateSpace, states=None) -> "InitialUpperExpectation":
        return cls(space, "vacuous",
                   states=tuple(states) if states is not None else None)

    def apply(self, values: np.ndarray) -> np.ndarray:
        """Upper-expect the last axis away."""
        if self.kind == "degenerate":
            return values[..., self.state]
        if self.kind == "envelope":
            return (values @ self.pmfs.T).max(axis=-1)
        return values[..., list(self.states)].max(axis=-1)


# ---------------------------------------------------------------------------
# dense recursion internals


def _restriction(e0: InitialUpperExpectation | None, grid: TimeGrid,
                 space: StateSpace) -> np.ndarray:
    """States the first slot can take (a singleton for a degenerate start)."""
    if e0 is not None and e0.kind == "degenerate" and grid.points[0] == 0.0:
        return np.array([e0.state])
    return np.arange(space.size)


def _stage_cols(space: StateSpace, lead: int, k: int,
                first_states: np.ndarray) -> list[np.ndarray]:
    """Broadcastable index columns: ``lead`` retained slots, rest escaped."""
    n = space.size
    cols: list[np.ndarray] = []
    for s in range(k):
        if s >= lead:
            cols.append(np.array(n))
        elif s == 0:
            shape = [1] * lead
            shape[0] = len(first_states)
            cols.append(first_states.reshape(shape))
        else:
            shape = [1] * lead
            shape[s] = n
            cols.append(np.arange(n).reshape(shape))
    return cols


def _lead_values(f: FinitaryGamble, lead: int,
                 first_states: np.ndarray) -> np.ndarray:
    """f with the first ``lead`` slots retained and the rest escaped.

    Shape ``(len(first_states),) + (n,) * (lead - 1)``; a 0-d array when
    ``lead`` is zero (every slot escaped).
    """
    n, k = f.space.size, len(f.grid)
    shape = (len(first_states),) + (n,) * (lead - 1) if lead else ()
    if f.expr is not None:
        cols = _stage_cols(f.space, lead, k, first_states)
        out = np.asarray(f.expr.evaluate(f.space, cols), dtype=np.float64)
        return np.ascontiguousarray(np.broadcast_to(out, shape))
    if lead == k:
        return np.ascontiguousarray(f.table[first_states])
    if isinstance(f.tail, np.ndarray):
        esc = f.tail  # shape (n,) * (k - 1)
        while esc.ndim > lead:
            # deeper escapes read the nearest-edge surrogate (see class doc)
            esc = esc[..., -1]
        if lead == 0:
            return np.array(float(esc))
        return np.ascontiguousarray(
            np.broadcast_to(esc[first_states], shape))
    if lead == 0:
        return np.array(float(f.tail))
    return np.full(shape, float(f.tail))


def _dense_cells(space: StateSpace, grid_len: int, restricted: int) -> int:
    if grid_len == 1:
        return restricted
    return restricted * space.size ** (grid_len - 1)


def _reduce_once(engine: TransitionEngine, dt: float, stage: list[np.ndarray],
                 escapes: list[np.ndarray], first_states: np.ndarray,
                 lead: int, step_log: list | None = None) -> list[np.ndarray]:
    """One backward step: integrate slot ``lead`` out of every stage table."""
    n = engine.generator.space.size
    prefix_shapes = [v.shape[:-1] for v in stage]
    flat_vals = np.concatenate([v.reshape(-1, n) for v in stage], axis=0)
    flat_tails = np.concatenate([
        np.broadcast_to(np.asarray(e, dtype=np.float64), shp).reshape(-1)
        for e, shp in zip(escapes, prefix_shapes)])
    gambles = [Gamble(engine.generator.space, flat_vals[i], tail=flat_tails[i])
               for i in range(flat_vals.shape[0])]
    outs, report = exponential_apply_many(engine, dt, gambles)
    if step_log is not None:
        step_log.append(report)
    evolved = np.stack([g.values for g in outs])
    new_stage = []
    offset = 0
    for shp in prefix_shapes:
        count = int(np.prod(shp)) if shp else 1
        block = evolved[offset:offset + count].reshape(shp + (n,))
        offset += count
        if lead == 1:
            # prefix-last axis is the (possibly restricted) first slot
            picked = np.take_along_axis(
                block, first_states.reshape((-1,) + (1,) * (block.ndim - 1)),
                axis=-1)[..., 0]
        else:
            picked = np.diagonal(block, axis1=-2, axis2=-1)
        new_stage.append(np.ascontiguousarray(picked))
    return new_stage


def _evaluate_dense_batch(e0: InitialUpperExpectation, engine: TransitionEngine,
                          gambles: list[FinitaryGamble],
                          step_log: list | None = None) -> np.ndarray:
    space = engine.generator.space
    grid = gambles[0].grid
    k = len(grid)
    first_states = _restriction(e0, grid, space)
    cells = _dense_cells(space, k, len(first_states))
    if cells > DENSE_CELL_CAP:
        raise DenseCapError(
            f"{cells} cells exceed the dense cap {DENSE_CELL_CAP}; "
            "use an expression gamble with recognised structure")
    stage = [_lead_values(f, k, first_states) for f in gambles]
    for j in range(k, 1, -1):
        dt = grid.points[j - 1] - grid.points[j - 2]
        escapes = [_lead_values(f, j - 1, first_states) for f in gambles]
        stage = _reduce_once(engine, dt, stage, escapes, first_states, j - 1,
                             step_log)
    # stage tables now cover the first grid point only
    if grid.points[0] > 0.0:
        outs, report = exponential_apply_many(
            engine, grid.points[0],
            [Gamble(space, v, tail=float(np.ravel(_lead_values(f, 0, first_states))[0]))
             for v, f in zip(stage, gambles)])
        if step_log is not None:
            step_log.append(report)
        return np.array([float(e0.apply(g.values)) for g in outs])
    results = []
    for v in stage:
        if len(first_states) == 1:
            results.append(float(v[0]))
        else:
            results.append(float(e0.apply(v)))
    return np.array(results)


# ---------------------------------------------------------------------------
# hitting-pattern fast path


def _match_hitting(expr: Expr, k: int) -> int | None:
    """Target state if expr is a max of per-slot indicators of one state."""
    if not isinstance(expr, Max):
        return None
    leaves: list[Expr] = []
    todo = list(expr.items)
    while todo:
        node = todo.pop()
        if isinstance(node, Max):
            todo.extend(node.items)
        else:
            leaves.append(node)
    if not all(isinstance(leaf, IndicatorEq) for leaf in leaves):
        return None
    states = {leaf.state for leaf in leaves}
    slots = {leaf.slot for leaf in leaves}
    if len(states) != 1 or slots != set(range(k)):
        return None
    return states.pop()


def _evaluate_hitting(e0: InitialUpperExpectation, engine: TransitionEngine,
                      grid: TimeGrid, target: int,
                      step_log: list | None = None) -> float:
    space = engine.generator.space
    hit = Gamble.indicator(space, target)
    u = hit
    pts = grid.points
    for j in range(len(pts) - 1, 0, -1):
        evolved, report = exponential_apply_many(engine, pts[j] - pts[j - 1], [u])
        if step_log is not None:
            step_log.append(report)
        v = evolved[0]
        u = Gamble(space, np.maximum(hit.values, v.values),
                   tail=max(hit.tail, v.tail))
    if pts[0] > 0.0:
        evolved, report = exponential_apply_many(engine, pts[0], [u])
        if step_log is not None:
            step_log.append(report)
        u = evolved[0]
    return float(e0.apply(u.values))


# ---------------------------------------------------------------------------
# public evaluation entry points


def evaluate_upper_many(e0: InitialUpperExpectation, engine: TransitionEngine,
                        gambles, step_log: list | None = None) -> np.ndarray:
    """Upper expectations of several gambles on one shared grid.

    Batching is not just a convenience: every reduction stage pushes all
    sections of all gambles through a single step ladder, so order and
    sublinearity relations between the results hold to rounding.
    """
    gambles = list(gambles)
    if not gambles:
        raise ValueError("need at least one gamble")
    space = engine.generator.space
    if e0.space != space:
        raise ValueError("initial model and engine disagree on the space")
    grid = gambles[0].grid
    for f in gambles:
        if f.space != space:
            raise ValueError("gamble space does not match the engine")
        if f.grid != grid:
            raise ValueError("batched gambles must share a grid")

    k = len(grid)
    dense: list[int] = []
    results = np.empty(len(gambles))
    for i, f in enumerate(gambles):
        target = _match_hitting(f.expr, k) if f.expr is not None else None
        if target is not None:
            results[i] = _evaluate_hitting(e0, engine, grid, target, step_log)
        else:
            dense.append(i)
    if dense:
        vals = _evaluate_dense_batch(e0, engine, [gambles[i] for i in dense],
                                     step_log)
        for i, v in zip(dense, vals):
            results[i] = v
    return results


def evaluate_upper(e0: InitialUpperExpectation, engine: TransitionEngine,
                   f: FinitaryGamble, step_log: list | None = None) -> float:
    """Upper expectation of one finitary gamble."""
    return float(evaluate_upper_many(e0, engine, [f], step_log)[0])


def evaluate_lower(e0: InitialUpperExpectation, engine: TransitionEngine,
                   f: FinitaryGamble, step_log: list | None = None) -> float:
    """Conjugate lower expectation, exactly ``-evaluate_upper(-f)``."""
    return -evaluate_upper(e0, engine, -f, step_log)


def backward_reduce(engine: TransitionEngine, grid_with_t: TimeGrid,
                    f: FinitaryGamble) -> FinitaryGamble:
    """Integrate out the final grid point.

    Returns the gamble ``g(x_1..x_{m-1}) = [T_{t_m - t_{m-1}} f(x.., .)](x_{m-1})``
    on the shortened grid.  Its tail entry keeps the escape values of the
    input (escaped sections evolve as constants).
    """
    if f.grid != grid_with_t:
        raise ValueError("gamble grid does not match the given grid")
    if len(grid_with_t) < 2:
        raise ValueError("need at least two grid points to reduce")
    space = engine.generator.space
    if f.space != space:
        raise ValueError("gamble space does not match the engine")
    k = len(grid_with_t)
    first_states = np.arange(space.size)
    cells = _dense_cells(space, k, space.size)
    if cells > DENSE_CELL_CAP:
        raise DenseCapError("dense reduction would exceed the cell cap")
    stage = [_lead_values(f, k, first_states)]
    escapes = [_lead_values(f, k - 1, first_states)]
    dt = grid_with_t.points[-1] - grid_with_t.points[-2]
    new_stage = _reduce_once(engine, dt, stage, escapes, first_states, k - 1)
    new_grid = TimeGrid(grid_with_t.points[:-1])
    # escape of the result's last slot: the input with slots k-2 and k-1
    # both escaped (escaped sections evolve as constants)
    if k == 2:
        tail_out: float | np.ndarray = float(
            np.ravel(_lead_values(f, 0, first_states))[0])
    else:
        tail_out = np.ascontiguousarray(np.broadcast_to(
            _lead_values(f, k - 2, first_states), (space.size,) * (k - 2)))
    return FinitaryGamble(space, new_grid, table=new_stage[0], tail=tail_out)


def jump_gamble(space: StateSpace, t1: float, t2: float) -> FinitaryGamble:
    """Indicator that the chain moved between two distinct times."""
    from .expressions import IndicatorNe

    t1, t2 = float(t1), float(t2)
    if t1 == t2:
        raise ValueError("jump gamble needs two distinct times")
    lo, hi = min(t1, t2), max(t1, t2)
    return FinitaryGamble(space, TimeGrid((lo, hi)), expr=IndicatorNe(0, 1))


# ---------------------------------------------------------------------------
# checks and probes


@dataclass(frozen=True)
class ConsistencyReport:
    coarse: float
    fine: float
    tolerance: float

    @property
    def deviation(self) -> float:
        return abs(self.coarse - self.fine)

    @property
    def passed(self) -> bool:
        return self.deviation <= self.tolerance


def _lift(f: FinitaryGamble, fine: TimeGrid, positions: list[int]) -> FinitaryGamble:
    """Lift ``f`` onto a finer grid by ignoring the extra coordinates."""
    k_fine = len(fine)
    if f.expr is not None:
        mapping = {i: p for i, p in enumerate(positions)}
        return FinitaryGamble(f.space, fine, expr=f.expr.remap(mapping))
    if isinstance(f.tail, np.ndarray):
        raise ValueError("only scalar-tail dense gambles can be lifted")
    n = f.space.size
    shape = [1] * k_fine
    for axis, p in enumerate(positions):
        shape[p] = n
    table = np.broadcast_to(f.table.reshape(shape), (n,) * k_fine)
    return FinitaryGamble(f.space, fine, table=np.ascontiguousarray(table),
                          tail=f.tail)


def check_consistency(e0: InitialUpperExpectation, engine: TransitionEngine,
                      coarse_grid: TimeGrid, fine_grid: TimeGrid,
                      f: FinitaryGamble, tol: float) -> ConsistencyReport:
    """Marginal consistency: evaluating on U and on V >= U must agree.

    ``f`` lives on the coarse grid; its lift to the fine grid ignores the
    inserted coordinates.  Both evaluations run at the engine tolerance, so
    ``tol`` should be a small multiple of it.
    """
    if f.grid != coarse_grid:
        raise ValueError("gamble lives on a different grid")
    positions = coarse_grid.is_subgrid_of(fine_grid)
    if positions is None:
        raise ValueError("coarse grid is not contained in the fine grid")
    coarse_val = evaluate_upper(e0, engine, f)
    fine_val = evaluate_upper(e0, engine, _lift(f, fine_grid, positions))
    return ConsistencyReport(coarse=coarse_val, fine=fine_val, tolerance=tol)


@dataclass(frozen=True)
class RateConditionReport:
    t: float
    deltas: tuple[float, ...]
    ratios: tuple[float, ...]
    bound: float
    slack: float

    @property
    def passed(self) -> bool:
        return all(r <= self.bound + self.slack for r in self.ratios)


def rate_condition_probe(e0: InitialUpperExpectation, engine: TransitionEngine,
                         t: float, deltas) -> RateConditionReport:
    """Jump-probability rates ``E[d_ne(t, t+D)] / D`` over a step grid.

    Each evaluation runs at a tolerance scaled by its step so the ratio
    keeps the engine accuracy; the declared bound is the generator's rate
    bound (never exceeded up to slack).
    """
    deltas = tuple(float(d) for d in deltas)
    if any(d <= 0.0 for d in deltas):
        raise ValueError("steps must be positive")
    space = engine.generator.space
    ratios = []
    for d in deltas:
        scaled = replace(engine, tolerance=engine.tolerance * min(d, 1.0))
        value = evaluate_upper(e0, scaled, jump_gamble(space, t, t + d))
        ratios.append(value / d)
    return RateConditionReport(t=float(t), deltas=deltas, ratios=tuple(ratios),
                               bound=rate_bound(engine.generator),
                               slack=10.0 * engine.tolerance)


@dataclass(frozen=True)
class GridLimitReport:
    levels: tuple[int, ...]
    estimates: tuple[float, ...]
    direction: str
    tolerance: float
    converged: bool
    estimates_monotone: bool


def _sample_tuples(rng: np.random.Generator, space: StateSpace, k: int,
                   count: int) -> np.ndarray:
    return rng.integers(0, space.size, size=(count, k))


def _gamble_on_tuples(f: FinitaryGamble, tuples: np.ndarray) -> np.ndarray:
    cols = [tuples[:, i] for i in range(tuples.shape[1])]
    if f.expr is not None:
        return np.asarray(f.expr.evaluate(f.space, cols), dtype=np.float64)
    return f.table[tuple(cols)]


def _check_family_monotone(coarse: FinitaryGamble, fine: FinitaryGamble,
                           direction: str, seed: int) -> None:
    positions = coarse.grid.is_subgrid_of(fine.grid)
    if positions is None:
        raise ValueError("family grids must be nested")
    rng = np.random.default_rng(seed)
    tuples = _sample_tuples(rng, fine.space, len(fine.grid), 256)
    fine_vals = _gamble_on_tuples(fine, tuples)
    coarse_vals = _gamble_on_tuples(coarse, tuples[:, positions])
    gap = fine_vals - coarse_vals
    bad = float(gap.min()) < -1e-12 if direction == "increasing" \
        else float(gap.max()) > 1e-12
    if bad:
        raise MonotoneFamilyError(
            f"family is not pointwise {direction} on sampled tuples")


def grid_limit(e0: InitialUpperExpectation, engine: TransitionEngine,
               family, levels, tol: float,
               direction: str = "increasing", seed: int = 0) -> GridLimitReport:
    """Evaluate a monotone family of gambles over refining grids.

    ``family(level)`` must return gambles monotone in the level (verified on
    sampled tuples for nested grids).  The estimate sequence inherits the
    direction up to a small slack; convergence means the last two estimates
    agree within ``tol``.
    """
    if direction not in ("increasing", "decreasing"):
        raise ValueError("direction must be 'increasing' or 'decreasing'")
    levels = tuple(int(x) for x in levels)
    if not levels:
        raise ValueError("need at least one level")
    gambles = {lv: family(lv) for lv in levels}
    for a, b in zip(levels, levels[1:]):
        _check_family_monotone(gambles[a], gambles[b], direction, seed)
    estimates = [evaluate_upper(e0, engine, gambles[lv]) for lv in levels]
    steps = np.diff(estimates)
    if direction == "increasing":
        monotone = bool(np.all(steps >= -ESTIMATE_MONOTONE_SLACK))
    else:
        monotone = bool(np.all(steps <= ESTIMATE_MONOTONE_SLACK))
    converged = len(estimates) >= 2 and abs(estimates[-1] - estimates[-2]) < tol
    return GridLimitReport(levels=levels, estimates=tuple(estimates),
                           direction=direction, tolerance=tol,
                           converged=converged, estimates_monotone=monotone)


@dataclass(frozen=True)
class DownwardReport:
    estimates: tuple[float, ...]
    limit_estimate: float
    tolerance: float

    @property
    def passed(self) -> bool:
        drops = np.diff(self.estimates)
        ok = bool(np.all(drops <= ESTIMATE_MONOTONE_SLACK))
        return ok and (self.estimates[-1] - self.limit_estimate) <= self.tolerance


def downward_probe(e0: InitialUpperExpectation, engine: TransitionEngine,
                   gambles, limit: FinitaryGamble, tol: float,
                   seed: int = 0) -> DownwardReport:
    """Check ``E(f_k)`` decreases to ``E(limit)`` for a decreasing family.

    All gambles must share the limit's grid; the whole family rides one
    batched evaluation, so the estimate sequence is ordered to rounding.
    Rejects families that fail a sampled pointwise-decrease check.
    """
    gambles = list(gambles)
    if not gambles:
        raise ValueError("need at least one gamble")
    rng = np.random.default_rng(seed)
    tuples = _sample_tuples(rng, limit.space, len(limit.grid), 256)
    prev = None
    for f in gambles + [limit]:
        if f.grid != limit.grid:
            raise ValueError("family and limit must share one grid")
        vals = _gamble_on_tuples(f, tuples)
        if prev is not None and float(np.max(vals - prev)) > 1e-12:
            raise MonotoneFamilyError("family is not pointwise decreasing")
        prev = vals
    all_vals = evaluate_upper_many(e0, engine, gambles + [limit])
    return DownwardReport(estimates=tuple(float(v) for v in all_vals[:-1]),
                          limit_estimate=float(all_vals[-1]), tolerance=tol)


def hitting_family(space: StateSpace, target: int, horizon: float):
    """Dyadic hitting queries: level ``m`` watches ``2^m + 1`` equispaced times.

    Returns a builder for ``grid_limit``; the gambles are max-of-indicator
    expressions, which the evaluator recognises and solves by dynamic
    programming instead of the exponential dense recursion.
    """
    if not 0 <= target < space.size:
        raise ValueError("target state must be retained")
    horizon = float(horizon)
    if horizon <= 0.0:
        raise ValueError("horizon must be positive")

    def build(level: int) -> FinitaryGamble:
        if level < 0:
            raise ValueError("level must be nonnegative")
        m = 2 ** level
        pts = tuple(horizon * j / m for j in range(m + 1))
        expr = Max(tuple(IndicatorEq(j, target) for j in range(len(pts))))
        return FinitaryGamble(space, TimeGrid(pts), expr=expr)

    return build


def evaluate_on_paths(f: FinitaryGamble, states: np.ndarray) -> np.ndarray:
    """Evaluate a finitary gamble on recorded retained-state tuples."""
    states = np.asarray(states, dtype=np.int64)
    if states.ndim != 2 or states.shape[1] != len(f.grid):
        raise ValueError("states must be (paths, grid length)")
    return _gamble_on_tuples(f, states)
