"""Weight vectors, barycenters and the Jensen functional.

Weights are exact rationals throughout. Points may be Fractions (exact
mode) or floats; function values are always floats.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

from .convex_catalog import ConvexFn, evaluate, format_number, to_number
from .errors import ConfigError, DomainError, LengthMismatch


@dataclass(frozen=True)
class WeightVector:
    """Rational weights summing to exactly one.

    ``signed=True`` marks internal chain states whose entries may be
    negative; public bound checks refuse such vectors.
    """

    entries: tuple
    signed: bool = False

    def __post_init__(self):
        entries = tuple(Fraction(e) for e in self.entries)
        if not entries:
            raise ConfigError("weight vector must have at least one entry")
        if sum(entries) != 1:
            raise ConfigError(f"weights sum to {sum(entries)}, not 1")
        if not self.signed and any(e < 0 for e in entries):
            raise ConfigError("negative weight in an unsigned weight vector")
        object.__setattr__(self, "entries", entries)

    @classmethod
    def of(cls, values, signed=False) -> "WeightVector":
        """Build from ints, Fractions or ``"num/den"`` strings."""
        parsed = []
        for v in values:
            if isinstance(v, float):
                raise ConfigError("weights must be exact; pass Fractions or 'num/den' strings")
            n = to_number(v)
            if isinstance(n, float):
                raise ConfigError(f"weight {v!r} is not an exact rational")
            parsed.append(n)
        return cls(tuple(parsed), signed)

    @classmethod
    def normalized(cls, raw) -> "WeightVector":
        """Scale nonnegative integers or rationals so they sum to one."""
        raw = [Fraction(r) for r in raw]
        total = sum(raw)
        if total <= 0:
            raise ConfigError("cannot normalize weights with nonpositive total")
        return cls(tuple(r / total for r in raw))

    @classmethod
    def uniform(cls, n: int) -> "WeightVector":
        return cls(tuple(Fraction(1, n) for _ in range(n)))

    def __len__(self):
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def __getitem__(self, i):
        return self.entries[i]

    @property
    def strictly_positive(self) -> bool:
        return all(e > 0 for e in self.entries)

    def to_json(self) -> list:
        return [format_number(e) for e in self.entries]


def as_points(values) -> tuple:
    """Normalize a point sequence: Fractions stay exact, floats stay floats."""
    out = []
    for v in values:
        if isinstance(v, (str, int, Fraction)):
            v = to_number(v)
        out.append(v)
    return tuple(out)


def points_to_json(points) -> list:
    return [format_number(v) for v in points]


def _check_lengths(x, w):
    if len(x) != len(w):
        raise LengthMismatch(f"{len(x)} points but {len(w)} weights")


def barycenter(x: Sequence, w: Sequence):
    """Weighted average ``sum(w_i * x_i)``.

    Exact when every point is rational; otherwise a correctly rounded float.
    """
    _check_lengths(x, w)
    if all(not isinstance(v, float) for v in x):
        return sum((Fraction(wi) * xi for wi, xi in zip(w, x)), Fraction(0))
    return float(sum((Fraction(wi) * Fraction(xi) for wi, xi in zip(w, x)), Fraction(0)))


def weighted_sum(f: ConvexFn, x: Sequence, w: Sequence) -> float:
    """``sum(w_i * f(x_i))`` accumulated exactly and rounded once."""
    _check_lengths(x, w)
    values = [evaluate(f, xi) for xi in x]
    if not all(math.isfinite(v) for v in values):
        return math.fsum(float(wi) * v for wi, v in zip(w, values))
    return float(sum((Fraction(wi) * Fraction(v) for wi, v in zip(w, values)), Fraction(0)))


def jensen(f: ConvexFn, x: Sequence, w, allow_signed: bool = False) -> float:
    """Jensen functional ``sum(w_i f(x_i)) - f(sum(w_i x_i))``."""
    _check_lengths(x, w)
    if isinstance(w, WeightVector) and w.signed and not allow_signed:
        raise ConfigError("signed weights need allow_signed=True")
    if not allow_signed and any(wi < 0 for wi in w):
        raise ConfigError("negative weights need allow_signed=True")
    for xi in x:
        if not f.contains(xi):
            raise DomainError(f"point {xi} outside [{f.a}, {f.b})")
    if len(x) == 1:
        return 0.0
    return weighted_sum(f, x, w) - evaluate(f, barycenter(x, w))


def jensen_magnitude(f: ConvexFn, x: Sequence, w: Sequence) -> float:
    """``sum |w_i f(x_i)| + |f(center)|``: the size of the terms a Jensen
    functional is formed from, which bounds its rounding error."""
    _check_lengths(x, w)
    terms = [abs(float(wi) * evaluate(f, xi)) for wi, xi in zip(w, x)]
    return math.fsum(terms) + abs(evaluate(f, barycenter(x, w)))


def exact_weighted_sum(f: ConvexFn, x: Sequence, w: Sequence) -> Fraction:
    """``sum(w_i f(x_i))`` carried out exactly on the float values of ``f``."""
    _check_lengths(x, w)
    return sum((Fraction(wi) * Fraction(evaluate(f, xi)) for wi, xi in zip(w, x)), Fraction(0))


def exact_jensen(f: ConvexFn, x: Sequence, w: Sequence) -> Fraction:
    """Jensen functional with exact arithmetic over the float values of ``f``."""
    return exact_weighted_sum(f, x, w) - Fraction(evaluate(f, barycenter(x, w)))
