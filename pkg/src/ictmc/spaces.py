"""State spaces and bounded gambles.

A state space is either finite (an ordered tuple of labels) or a truncated
window on the nonnegative integers: the first ``size`` states are retained
and every state beyond the window is summarised by a single *tail* value on
each gamble.  The tail is what lets gambles such as constants or ``1 - 1_x``
be represented exactly on the infinite space.

All value arrays are stored read-only; instances are immutable.
"""

from __future__ import annotations

import numbers
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "StateSpace",
    "Gamble",
    "gamble_norm",
]


def _frozen_array(values, shape_hint=None) -> np.ndarray:
    arr = np.array(values, dtype=np.float64, copy=True)
    if shape_hint is not None and arr.shape != shape_hint:
        raise ValueError(f"expected array of shape {shape_hint}, got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("array entries must be finite")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class StateSpace:
    """Finite label space or truncated window on the counting states.

    ``labels is None`` marks the truncated kind: states are 0..size-1 and
    stand in for all of 0, 1, 2, ...  A finite space carries its labels and
    has no tail semantics.
    """

    size: int
    labels: tuple[str, ...] | None = None

    def __post_init__(self):
        if self.labels is not None:
            labels = tuple(str(x) for x in self.labels)
            if len(labels) < 1:
                raise ValueError("finite space needs at least one label")
            if len(set(labels)) != len(labels):
                raise ValueError("labels must be distinct")
            if self.size != len(labels):
                raise ValueError("size must equal the number of labels")
            object.__setattr__(self, "labels", labels)
        else:
            if self.size < 2:
                raise ValueError("truncated space needs at least two retained states")

    @classmethod
    def finite(cls, labels) -> "StateSpace":
        labels = tuple(labels)
        return cls(size=len(labels), labels=labels)

    @classmethod
    def truncated(cls, size: int) -> "StateSpace":
        return cls(size=int(size), labels=None)

    @property
    def is_truncated(self) -> bool:
        return self.labels is None

    def state_name(self, index: int) -> str:
        if self.labels is not None:
            return self.labels[index]
        return str(index)

    def __len__(self) -> int:
        return self.size


@dataclass(frozen=True)
class Gamble:
    """Bounded real function on a state space.

    ``values[i]`` is the payoff in retained state ``i``; ``tail`` is the
    payoff in every state beyond the truncation window.  Finite spaces ignore
    the tail (it is forced to 0 so equality and norms stay unambiguous).
    """

    space: StateSpace
    values: np.ndarray
    tail: float = 0.0

    def __post_init__(self):
        vals = _frozen_array(self.values, shape_hint=(self.space.size,))
        object.__setattr__(self, "values", vals)
        tail = float(self.tail)
        if not np.isfinite(tail):
            raise ValueError("tail must be finite")
        if not self.space.is_truncated:
            tail = 0.0
        object.__setattr__(self, "tail", tail)

    # -- constructors -------------------------------------------------

    @classmethod
    def constant(cls, space: StateSpace, c: float) -> "Gamble":
        c = float(c)
        return cls(space, np.full(space.size, c), tail=c)

    @classmethod
    def indicator(cls, space: StateSpace, index: int) -> "Gamble":
        if not 0 <= index < space.size:
            raise ValueError("indicator state must be retained")
        vals = np.zeros(space.size)
        vals[index] = 1.0
        return cls(space, vals, tail=0.0)

    # -- algebra -------------------------------------------------------

    def _binary(self, other, op) -> "Gamble":
        if isinstance(other, Gamble):
            if other.space != self.space:
                raise ValueError("gambles live on different spaces")
            return Gamble(self.space, op(self.values, other.values),
                          tail=op(self.tail, other.tail))
        if isinstance(other, numbers.Real):
            other = float(other)
            return Gamble(self.space, op(self.values, other),
                          tail=op(self.tail, other))
        return NotImplemented

    def __add__(self, other):
        return self._binary(other, lambda a, b: a + b)

    __radd__ = __add__

    def __sub__(self, other):
        return self._binary(other, lambda a, b: a - b)

    def __rsub__(self, other):
        return (-self) + other

    def __neg__(self):
        return Gamble(self.space, -self.values, tail=-self.tail)

    def __mul__(self, scalar):
        if not isinstance(scalar, numbers.Real):
            return NotImplemented
        scalar = float(scalar)
        return Gamble(self.space, scalar * self.values, tail=scalar * self.tail)

    __rmul__ = __mul__

    # -- queries -------------------------------------------------------

    @property
    def norm(self) -> float:
        return gamble_norm(self)

    def __call__(self, index: int) -> float:
        """Value at a state index; indices past the window read the tail."""
        if index < 0:
            raise IndexError("state index must be nonnegative")
        if index < self.space.size:
            return float(self.values[index])
        if not self.space.is_truncated:
            raise IndexError("state index out of range for finite space")
        return self.tail


def gamble_norm(f: Gamble) -> float:
    """Sup-norm of a gamble: ``max(max(|values|), |tail|)``.

    On finite spaces the tail is identically zero and drops out.
    """
    value_part = float(np.max(np.abs(f.values))) if f.values.size else 0.0
    if f.space.is_truncated:
        return max(value_part, abs(f.tail))
    return value_part
