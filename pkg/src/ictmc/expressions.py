"""Composable expressions for gambles on tuples of states.

An expression names grid slots by index: ``Coord(i)`` is the numeric code of
the state observed at slot ``i`` (capped at the truncation level on
truncated spaces, so it stays bounded), ``IndicatorEq(i, s)`` tests slot
``i`` against a retained state, ``IndicatorNe(i, j)`` compares two slots.
Combinators: addition, subtraction, scaling by a constant, pointwise min and
max.

Evaluation is vectorised over integer index arrays.  On truncated spaces the
index ``space.size`` acts as the single out-of-window sentinel: coordinates
read the cap, equality with a retained state fails, and two sentinels
compare equal (escaped paths are not distinguished; the contribution of such
tuples is bounded by the escape mass the engine already accounts for).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .spaces import StateSpace

__all__ = [
    "Expr",
    "Const",
    "Coord",
    "IndicatorEq",
    "IndicatorNe",
    "Add",
    "Sub",
    "Scale",
    "Min",
    "Max",
]


class Expr:
    """Base class; all nodes are frozen dataclasses."""

    def arity(self) -> int:
        """Number of grid slots the expression reads (max index + 1)."""
        raise NotImplementedError

    def evaluate(self, space: StateSpace, cols: list[np.ndarray]) -> np.ndarray:
        """Evaluate on broadcast integer index arrays (one per slot)."""
        raise NotImplementedError

    def remap(self, mapping: dict[int, int]) -> "Expr":
        """Rewire slot indices (used to lift gambles onto finer grids)."""
        raise NotImplementedError

    def __neg__(self) -> "Expr":
        return Scale(-1.0, self)

    def bound(self, space: StateSpace) -> float:
        """A finite bound on |expression| over all tuples."""
        raise NotImplementedError


@dataclass(frozen=True)
class Const(Expr):
    value: float

    def arity(self):
        return 0

    def evaluate(self, space, cols):
        shape = np.broadcast(*cols).shape if cols else ()
        return np.full(shape, float(self.value))

    def remap(self, mapping):
        return self

    def bound(self, space):
        return abs(float(self.value))


@dataclass(frozen=True)
class Coord(Expr):
    slot: int

    def __post_init__(self):
        if self.slot < 0:
            raise ValueError("slot index must be nonnegative")

    def arity(self):
        return self.slot + 1

    def evaluate(self, space, cols):
        return np.minimum(cols[self.slot], space.size).astype(np.float64)

    def remap(self, mapping):
        return Coord(mapping[self.slot])

    def bound(self, space):
        return float(space.size)


@dataclass(frozen=True)
class IndicatorEq(Expr):
    slot: int
    state: int

    def __post_init__(self):
        if self.slot < 0:
            raise ValueError("slot index must be nonnegative")
        if self.state < 0:
            raise ValueError("state index must be nonnegative")

    def arity(self):
        return self.slot + 1

    def evaluate(self, space, cols):
        if self.state >= space.size:
            raise ValueError("indicator state must be retained")
        return (cols[self.slot] == self.state).astype(np.float64)

    def remap(self, mapping):
        return IndicatorEq(mapping[self.slot], self.state)

    def bound(self, space):
        return 1.0


@dataclass(frozen=True)
class IndicatorNe(Expr):
    slot_a: int
    slot_b: int

    def __post_init__(self):
        if min(self.slot_a, self.slot_b) < 0:
            raise ValueError("slot indices must be nonnegative")

    def arity(self):
        return max(self.slot_a, self.slot_b) + 1

    def evaluate(self, space, cols):
        return (cols[self.slot_a] != cols[self.slot_b]).astype(np.float64)

    def remap(self, mapping):
        return IndicatorNe(mapping[self.slot_a], mapping[self.slot_b])

    def bound(self, space):
        return 1.0


@dataclass(frozen=True)
class Add(Expr):
    left: Expr
    right: Expr

    def arity(self):
        return max(self.left.arity(), self.right.arity())

    def evaluate(self, space, cols):
        return self.left.evaluate(space, cols) + self.right.evaluate(space, cols)

    def remap(self, mapping):
        return Add(self.left.remap(mapping), self.right.remap(mapping))

    def bound(self, space):
        return self.left.bound(space) + self.right.bound(space)


@dataclass(frozen=True)
class Sub(Expr):
    left: Expr
    right: Expr

    def arity(self):
        return max(self.left.arity(), self.right.arity())

    def evaluate(self, space, cols):
        return self.left.evaluate(space, cols) - self.right.evaluate(space, cols)

    def remap(self, mapping):
        return Sub(self.left.remap(mapping), self.right.remap(mapping))

    def bound(self, space):
        return self.left.bound(space) + self.right.bound(space)


@dataclass(frozen=True)
class Scale(Expr):
    factor: float
    inner: Expr

    def arity(self):
        return self.inner.arity()

    def evaluate(self, space, cols):
        return float(self.factor) * self.inner.evaluate(space, cols)

    def remap(self, mapping):
        return Scale(self.factor, self.inner.remap(mapping))

    def bound(self, space):
        return abs(float(self.factor)) * self.inner.bound(space)


def _tuple_of(items) -> tuple[Expr, ...]:
    items = tuple(items)
    if not items:
        raise ValueError("need at least one operand")
    return items


@dataclass(frozen=True)
class Min(Expr):
    items: tuple[Expr, ...]

    def __post_init__(self):
        object.__setattr__(self, "items", _tuple_of(self.items))

    def arity(self):
        return max(e.arity() for e in self.items)

    def evaluate(self, space, cols):
        out = self.items[0].evaluate(space, cols)
        for e in self.items[1:]:
            out = np.minimum(out, e.evaluate(space, cols))
        return out

    def remap(self, mapping):
        return Min(tuple(e.remap(mapping) for e in self.items))

    def bound(self, space):
        return max(e.bound(space) for e in self.items)


@dataclass(frozen=True)
class Max(Expr):
    items: tuple[Expr, ...]

    def __post_init__(self):
        object.__setattr__(self, "items", _tuple_of(self.items))

    def arity(self):
        return max(e.arity() for e in self.items)

    def evaluate(self, space, cols):
        out = self.items[0].evaluate(space, cols)
        for e in self.items[1:]:
            out = np.maximum(out, e.evaluate(space, cols))
        return out

    def remap(self, mapping):
        return Max(tuple(e.remap(mapping) for e in self.items))

    def bound(self, space):
        return max(e.bound(space) for e in self.items)
