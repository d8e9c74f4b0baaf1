"""Recursive lower and upper refinement chains on a fixed number of points.

A lower chain repeatedly peels ``m_k J(f, x_k, q_k)`` off the Jensen
functional of ``(x_1, p_1)``, where ``m_k`` is the smallest ratio
``p_{i,k}/q_{i,k}``. Every index attaining the minimum is moved to the
``q_k``-barycenter and shares the weight ``m_k`` equally. The upper chain
does the same with the ratio at a fixed pivot index, which after the first
step is the only index with positive weight.

Step ``k`` always consumes the ``k``-th supplied q vector, both for the
ratios and for the subtraction; that is the indexing under which the
per-step telescoping identity holds.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Optional, Sequence, Union

from .bounds_baseline import ratio_extremes
from .convex_catalog import ConvexFn
from .errors import ConfigError, LengthMismatch, StallWarning, ZeroDenominator
from .jensen_core import WeightVector, as_points, barycenter, jensen, jensen_magnitude

AUTO_UNIFORM = "auto-uniform"

QSource = Union[Sequence, str, Callable[[int, int], Sequence]]


@dataclass(frozen=True)
class ChainState:
    """Snapshot ``(p_k, x_k, q_k)`` plus the extreme ratio chosen at step ``k``.

    The terminal state of a chain has ``q``, ``extreme``, ``s`` and ``j`` set
    to ``None``. ``eliminated`` lists the indices of the previous state that
    were dropped to produce this one (reducing chains only).
    """

    k: int
    p: tuple
    x: tuple
    q: Optional[tuple] = None
    extreme: Optional[Fraction] = None
    s: Optional[int] = None
    j: Optional[int] = None
    tied: tuple = ()
    eliminated: tuple = ()

    @property
    def n(self) -> int:
        return len(self.p)

    @property
    def is_terminal(self) -> bool:
        return self.q is None


@dataclass
class ChainResult:
    kind: str
    f: ConvexFn
    trace: list
    terminal: ChainState
    step_functionals: list
    J_initial: float
    defect_exact: Fraction
    scale_exact: Fraction
    stalled: bool = False
    terminated_early: bool = False
    pivot: Optional[int] = None
    instance_id: Optional[str] = None
    extra: dict = field(default_factory=dict)

    @property
    def extremes(self) -> list:
        return [st.extreme for st in self.trace]

    @property
    def N(self) -> int:
        return len(self.trace)

    @property
    def is_lower(self) -> bool:
        return self.kind in ("lower", "reduce_lower")

    @property
    def defect(self) -> float:
        return _to_float(self.defect_exact)

    @property
    def scale(self) -> float:
        return _to_float(self.scale_exact)

    @property
    def tolerance(self) -> Fraction:
        return Fraction(1, 10**9) * self.scale_exact

    @property
    def sign_ok(self) -> bool:
        if self.is_lower:
            return self.defect_exact >= -self.tolerance
        return self.defect_exact <= self.tolerance

    @property
    def n_seq(self) -> list:
        return [st.n for st in self.trace] + [self.terminal.n]


def _to_float(v: Fraction) -> float:
    try:
        return float(v)
    except OverflowError:
        return float("inf") if v > 0 else float("-inf")


def _weights(w):
    if isinstance(w, WeightVector):
        return w.entries
    return WeightVector.of(w).entries


def _positive_q(q, n, step):
    q = _weights(q)
    if len(q) != n:
        raise LengthMismatch(f"step {step}: q has length {len(q)}, expected {n}")
    if any(qi == 0 for qi in q):
        raise ZeroDenominator(f"step {step}: q has a zero entry")
    return q


def q_at(qs: QSource, k: int, n: int):
    """The q vector for step ``k`` (1-based) of a chain of current length ``n``."""
    if isinstance(qs, str):
        if qs != AUTO_UNIFORM:
            raise ConfigError(f"unknown q source {qs!r}")
        return WeightVector.uniform(n)
    if callable(qs):
        return qs(k, n)
    return qs[k - 1]


def open_lower(k, p, x, q) -> ChainState:
    ext = ratio_extremes(p, q)
    return ChainState(k, tuple(p), tuple(x), tuple(q), ext.m, len(ext.argmin_set), None, ext.argmin_set)


def open_upper(k, p, x, q, j) -> ChainState:
    if q[j] == 0:
        raise ZeroDenominator(f"step {k}: q vanishes at the pivot")
    M = Fraction(p[j]) / Fraction(q[j])
    return ChainState(k, tuple(p), tuple(x), tuple(q), M, None, j)


def _start(p1, x1, q1):
    p = _weights(p1)
    x = as_points(x1)
    if len(x) != len(p):
        raise LengthMismatch(f"{len(x)} points but {len(p)} weights")
    return p, x, _positive_q(q1, len(p), 1)


def lower_start(p1, x1, q1) -> ChainState:
    return open_lower(1, *_start(p1, x1, q1))


def upper_start(p1, x1, q1) -> ChainState:
    p, x, q = _start(p1, x1, q1)
    pivot = ratio_extremes(p, q).argmax_set[0]
    return open_upper(1, p, x, q, pivot)


def _advance_lower(state: ChainState):
    m, s, tied = state.extreme, state.s, set(state.tied)
    center = barycenter(state.x, state.q)
    p, x = [], []
    for i, (pi, qi, xi) in enumerate(zip(state.p, state.q, state.x)):
        if i in tied:
            p.append(m / s)
            x.append(center)
        else:
            p.append(pi - m * qi)
            x.append(xi)
    return tuple(p), tuple(x)


def _advance_upper(state: ChainState):
    M, j = state.extreme, state.j
    center = barycenter(state.x, state.q)
    p = [pi - M * qi for pi, qi in zip(state.p, state.q)]
    x = list(state.x)
    p[j] = M
    x[j] = center
    return tuple(p), tuple(x)


def lower_step(state: ChainState, q_next=None) -> ChainState:
    """Advance a lower chain by one step.

    With ``q_next=None`` the result is the terminal state ``(p_{k+1}, x_{k+1})``.
    """
    p, x = _advance_lower(state)
    if q_next is None:
        return ChainState(state.k + 1, p, x)
    return open_lower(state.k + 1, p, x, _positive_q(q_next, len(p), state.k + 1))


def upper_step(state: ChainState, q_next=None) -> ChainState:
    p, x = _advance_upper(state)
    if q_next is None:
        return ChainState(state.k + 1, p, x, j=state.j)
    return open_upper(state.k + 1, p, x, _positive_q(q_next, len(p), state.k + 1), state.j)


def closed_form_Mk(p1, qs: QSource, j1: int, k: int) -> Fraction:
    """``p_{j1,1} / prod_{m<=k} q_{j1,m}`` for a chain whose length never changes."""
    p = _weights(p1)
    out = Fraction(p[j1])
    for step in range(1, k + 1):
        out /= Fraction(_weights(q_at(qs, step, len(p)))[j1])
    return out


def _check_N(qs, N):
    if N < 1:
        raise ConfigError("N must be a positive integer")
    if not isinstance(qs, str) and not callable(qs) and len(qs) != N:
        raise ConfigError(f"expected {N} q vectors, got {len(qs)}")


def finish(kind, f, x1, p1, trace, terminal, **extra) -> ChainResult:
    """Evaluate the step functionals and the defect of a completed trace."""
    J1 = jensen(f, x1, p1)
    Js = [jensen(f, st.x, st.q) for st in trace]
    defect = Fraction(J1) - sum((st.extreme * Fraction(J) for st, J in zip(trace, Js)), Fraction(0))
    # magnitudes, not values: J_k can cancel to rounding noise that M_k amplifies
    scale = 1 + Fraction(jensen_magnitude(f, x1, p1)) + sum(
        (abs(st.extreme) * Fraction(jensen_magnitude(f, st.x, st.q)) for st in trace), Fraction(0))
    stalled = kind in ("lower", "reduce_lower") and any(st.extreme == 0 for st in trace)
    if stalled:
        warnings.warn("lower chain stalled: m_k = 0 at some step", StallWarning, stacklevel=3)
    return ChainResult(kind, f, trace, terminal, Js, J1, defect, scale, stalled=stalled, **extra)


def lower_chain(f: ConvexFn, x1, p1, qs: QSource, N: int) -> ChainResult:
    """Run ``N`` lower-chain steps with an a-priori q sequence."""
    _check_N(qs, N)
    p = _weights(p1)
    state = lower_start(p, x1, q_at(qs, 1, len(p)))
    trace = [state]
    for k in range(2, N + 2):
        q_next = q_at(qs, k, len(p)) if k <= N else None
        state = lower_step(state, q_next)
        if k <= N:
            trace.append(state)
    return finish("lower", f, trace[0].x, p, trace, state)


def upper_chain(f: ConvexFn, x1, p1, qs: QSource, N: int) -> ChainResult:
    """Run ``N`` upper-chain steps pivoting on the smallest argmax of ``p_1/q_1``."""
    _check_N(qs, N)
    p = _weights(p1)
    state = upper_start(p, x1, q_at(qs, 1, len(p)))
    trace = [state]
    for k in range(2, N + 2):
        q_next = q_at(qs, k, len(p)) if k <= N else None
        state = upper_step(state, q_next)
        if k <= N:
            trace.append(state)
    return finish("upper", f, trace[0].x, p, trace, state, pivot=trace[0].j)
