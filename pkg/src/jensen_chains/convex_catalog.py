"""Evaluable convex functions on real intervals ``[a, b)``.

The catalog is closed on purpose: every function is described by a small
JSON object, so instances can be stored, replayed and fuzzed reproducibly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from numbers import Rational, Real

from .errors import ConfigError, DomainError

KINDS = ("square", "abs", "exp", "fourth_power", "neg_log", "piecewise_linear")

# window used to sample functions whose domain is unbounded above
UNBOUNDED_WINDOW = 10**6


def to_number(value):
    """Parse a JSON scalar into a Fraction (exact) or float.

    Accepts ints, floats, Fractions and strings of the form ``"3/4"``,
    ``"-2"``, ``"0.125"`` or ``"inf"``. Strings without a decimal point or
    exponent become Fractions; decimal strings become floats.
    """
    if isinstance(value, bool):
        raise ConfigError(f"not a number: {value!r}")
    if isinstance(value, (Fraction, int)):
        return Fraction(value)
    if isinstance(value, float):
        return value
    if isinstance(value, str):
        s = value.strip()
        if s in ("inf", "+inf", "infinity"):
            return math.inf
        if any(c in s for c in ".eE") or s.lower() in ("nan", "-inf"):
            return float(s)
        try:
            return Fraction(s)
        except ValueError as exc:
            raise ConfigError(f"not a number: {value!r}") from exc
    raise ConfigError(f"not a number: {value!r}")


def format_number(value) -> str:
    """Inverse of :func:`to_number` for Fractions, ints and floats."""
    if isinstance(value, float):
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return repr(value)
    value = Fraction(value)
    if value.denominator == 1:
        return str(value.numerator)
    return f"{value.numerator}/{value.denominator}"


@dataclass(frozen=True)
class ConvexFn:
    """A convex function from the catalog, restricted to ``[a, b)``."""

    kind: str
    a: Real
    b: Real = math.inf
    breakpoints: tuple = ()

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"unknown kind {self.kind!r}; expected one of {KINDS}")
        object.__setattr__(self, "a", _exact(self.a))
        object.__setattr__(self, "b", _exact(self.b))
        if not self.a < self.b:
            raise ConfigError(f"empty domain [{self.a}, {self.b})")
        if math.isinf(self.a):
            raise ConfigError("lower end of the domain must be finite")
        if self.kind == "neg_log" and not self.a > 0:
            raise ConfigError("neg_log needs a > 0")
        if self.kind == "piecewise_linear":
            pts = tuple((_exact(u), _exact(v)) for u, v in self.breakpoints)
            if len(pts) < 2:
                raise ConfigError("piecewise_linear needs at least two breakpoints")
            for (u0, _), (u1, _) in zip(pts, pts[1:]):
                if not u0 < u1:
                    raise ConfigError("breakpoints must be strictly increasing")
            slopes = _slopes(pts)
            for s0, s1 in zip(slopes, slopes[1:]):
                if s1 < s0:
                    raise ConfigError("piecewise_linear slopes must be nondecreasing")
            object.__setattr__(self, "breakpoints", pts)
        elif self.breakpoints:
            raise ConfigError(f"breakpoints only apply to piecewise_linear, not {self.kind}")

    @classmethod
    def unchecked(cls, kind: str, a, b=math.inf, breakpoints=()) -> "ConvexFn":
        """Build without the slope test, e.g. to exercise ``check_convexity``
        on a shape that is not actually convex."""
        fn = object.__new__(cls)
        object.__setattr__(fn, "kind", kind)
        object.__setattr__(fn, "a", _exact(a))
        object.__setattr__(fn, "b", _exact(b))
        object.__setattr__(fn, "breakpoints", tuple((_exact(u), _exact(v)) for u, v in breakpoints))
        return fn

    def __call__(self, x) -> float:
        return evaluate(self, x)

    def contains(self, x) -> bool:
        return self.a <= x < self.b

    def window(self):
        """Bounded sub-interval ``[a, hi)`` used for sampling."""
        hi = self.b if not math.isinf(self.b) else self.a + UNBOUNDED_WINDOW
        return self.a, hi

    def to_json(self) -> dict:
        out = {"kind": self.kind, "a": format_number(self.a), "b": format_number(self.b)}
        if self.kind == "piecewise_linear":
            out["breakpoints"] = [[format_number(u), format_number(v)] for u, v in self.breakpoints]
        return out

    @classmethod
    def from_json(cls, obj: dict) -> "ConvexFn":
        try:
            kind = obj["kind"]
            a = to_number(obj["a"])
            b = to_number(obj.get("b", "inf"))
        except KeyError as exc:
            raise ConfigError(f"function spec missing field {exc}") from exc
        bps = tuple((to_number(u), to_number(v)) for u, v in obj.get("breakpoints", ()))
        return cls(kind, a, b, bps)


def _exact(v):
    if isinstance(v, float):
        if math.isinf(v) or math.isnan(v):
            return v
        return Fraction(v)
    if isinstance(v, (int, Rational)):
        return Fraction(v)
    return to_number(v)


def _slopes(pts):
    return [(v1 - v0) / (u1 - u0) for (u0, v0), (u1, v1) in zip(pts, pts[1:])]


def evaluate(f: ConvexFn, x) -> float:
    """Return ``f(x)`` as a float.

    Rational inputs to the polynomial and piecewise-linear kinds are
    evaluated exactly and rounded once at the end.
    """
    if not f.contains(x):
        raise DomainError(f"{x} is outside [{f.a}, {f.b}) for {f.kind}")
    kind = f.kind
    if kind == "square":
        return float(x * x)
    if kind == "abs":
        return float(abs(x))
    if kind == "fourth_power":
        return float(x**4)
    if kind == "exp":
        try:
            return math.exp(x)
        except OverflowError:
            return math.inf
    if kind == "neg_log":
        return -math.log(x)
    return float(_piecewise(f.breakpoints, x))


def _piecewise(pts, x):
    # linear extension of the end segments outside the breakpoint range
    if x <= pts[0][0]:
        (u0, v0), (u1, v1) = pts[0], pts[1]
    elif x >= pts[-1][0]:
        (u0, v0), (u1, v1) = pts[-2], pts[-1]
    else:
        for (u0, v0), (u1, v1) in zip(pts, pts[1:]):
            if u0 <= x <= u1:
                break
    if isinstance(x, float):
        u0, v0, u1, v1 = float(u0), float(v0), float(u1), float(v1)
    return v0 + (v1 - v0) * (x - u0) / (u1 - u0)


def check_convexity(f: ConvexFn, grid_size: int) -> bool:
    """Midpoint-convexity test on ``grid_size`` evenly spaced sample points.

    Every pair ``u < v`` of samples must satisfy
    ``f((u+v)/2) <= (f(u)+f(v))/2 + 1e-12*(1+|f(u)|+|f(v)|)``.
    """
    if grid_size < 3:
        raise ConfigError("grid_size must be at least 3")
    lo, hi = f.window()
    lo, hi = Fraction(lo), Fraction(hi)
    step = (hi - lo) / grid_size
    grid = [lo + i * step for i in range(grid_size)]
    values = [evaluate(f, u) for u in grid]
    for i in range(grid_size):
        fu = values[i]
        for j in range(i + 1, grid_size):
            fv = values[j]
            mid = evaluate(f, (grid[i] + grid[j]) / 2)
            tol = 1e-12 * (1 + abs(fu) + abs(fv))
            if mid > (fu + fv) / 2 + tol:
                return False
    return True
