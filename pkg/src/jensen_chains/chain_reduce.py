"""Dimension-reducing variants of the refinement chains.

The reducing lower chain drops every index that attains ``m_k`` and
appends a single barycenter point of weight ``m_k`` at the end, so the
length follows ``n_{k+1} = n_k - s_k + 1``. The reducing upper chain drops
non-pivot indices whose weight becomes exactly zero; this can only happen
on the first step, after which the length is constant.

Because lengths are data dependent, each supplied q vector must match the
length reached at its step. A mismatch raises :class:`ShapeMismatch`
carrying the step number instead of truncating.
"""

from __future__ import annotations

from dataclasses import replace
from fractions import Fraction

from .chain_refine import (
    QSource,
    ChainResult,
    ChainState,
    _check_N,
    _start,
    _weights,
    finish,
    open_lower,
    open_upper,
    q_at,
)
from .bounds_baseline import ratio_extremes
from .convex_catalog import ConvexFn
from .errors import InvariantViolation, ShapeMismatch, ZeroDenominator
from .jensen_core import barycenter


def _shaped_q(q, n, step):
    q = _weights(q)
    if len(q) != n:
        raise ShapeMismatch(
            f"step {step}: q has length {len(q)} but the chain has {n} points",
            step=step, expected=n, got=len(q),
        )
    if any(qi == 0 for qi in q):
        raise ZeroDenominator(f"step {step}: q has a zero entry")
    return q


def _advance_reduce_lower(state: ChainState):
    m, tied = state.extreme, set(state.tied)
    center = barycenter(state.x, state.q)
    p, x = [], []
    for i, (pi, qi, xi) in enumerate(zip(state.p, state.q, state.x)):
        if i not in tied:
            p.append(pi - m * qi)
            x.append(xi)
    p.append(m)
    x.append(center)
    return tuple(p), tuple(x), state.tied


def _advance_reduce_upper(state: ChainState):
    M, j = state.extreme, state.j
    center = barycenter(state.x, state.q)
    p, x, dropped = [], [], []
    new_j = None
    for i, (pi, qi, xi) in enumerate(zip(state.p, state.q, state.x)):
        if i == j:
            new_j = len(p)
            p.append(M)
            x.append(center)
            continue
        w = pi - M * qi
        if w == 0:
            dropped.append(i)
        else:
            p.append(w)
            x.append(xi)
    return tuple(p), tuple(x), tuple(dropped), new_j


def reduce_lower_step(state: ChainState, q_next=None) -> ChainState:
    p, x, dropped = _advance_reduce_lower(state)
    k = state.k + 1
    if q_next is None:
        return ChainState(k, p, x, eliminated=dropped)
    opened = open_lower(k, p, x, _shaped_q(q_next, len(p), k))
    return replace(opened, eliminated=dropped)


def reduce_upper_step(state: ChainState, q_next=None) -> ChainState:
    p, x, dropped, j = _advance_reduce_upper(state)
    k = state.k + 1
    if q_next is None:
        return ChainState(k, p, x, j=j, eliminated=dropped)
    opened = open_upper(k, p, x, _shaped_q(q_next, len(p), k), j)
    return replace(opened, eliminated=dropped)


def _run(kind, f, x1, p1, qs, N, opener, stepper, stop_at_one):
    _check_N(qs, N)
    p = _weights(p1)
    p, x, q = _start(p, x1, _shaped_q(q_at(qs, 1, len(p)), len(p), 1))
    state = opener(p, x, q)
    trace = []
    while True:
        trace.append(state)
        k = state.k + 1
        # a single point carries no Jensen functional; later steps are no-ops
        if k > N or (stop_at_one and len(state.p) == 1):
            state = stepper(state, None)
            break
        n_next = len(state.p) - _length_drop(kind, state)
        state = stepper(state, q_at(qs, k, n_next))
    return trace, state, x


def _length_drop(kind, state):
    if kind == "reduce_lower":
        return state.s - 1
    M, j = state.extreme, state.j
    return sum(1 for i, (pi, qi) in enumerate(zip(state.p, state.q)) if i != j and pi - M * qi == 0)


def reduce_lower_chain(f: ConvexFn, x1, p1, qs: QSource, N: int) -> ChainResult:
    """Reducing lower chain; stops early once a single point remains."""
    trace, terminal, x = _run(
        "reduce_lower", f, x1, p1, qs, N,
        lambda p, x, q: open_lower(1, p, x, q),
        reduce_lower_step, stop_at_one=True,
    )
    return finish(
        "reduce_lower", f, x, trace[0].p, trace, terminal,
        terminated_early=len(trace) < N,
    )


def reduce_upper_chain(f: ConvexFn, x1, p1, qs: QSource, N: int, strict: bool = True) -> ChainResult:
    """Reducing upper chain.

    With ``strict=True`` the constant length from step two on and the
    closed form of ``M_k`` are asserted, raising :class:`InvariantViolation`
    on failure.
    """
    def opener(p, x, q):
        return open_upper(1, p, x, q, ratio_extremes(p, q).argmax_set[0])

    trace, terminal, x = _run("reduce_upper", f, x1, p1, qs, N, opener, reduce_upper_step, stop_at_one=False)
    result = finish(
        "reduce_upper", f, x, trace[0].p, trace, terminal,
        pivot=trace[0].j,
    )
    if strict:
        problems = reduce_upper_problems(result)
        if problems:
            raise InvariantViolation("; ".join(problems))
    return result


def reduce_upper_problems(result: ChainResult) -> list:
    """Human-readable failures of the constant-length and closed-form claims."""
    problems = []
    states = result.trace + [result.terminal]
    if len(states) > 2:
        n2 = states[1].n
        for st in states[2:]:
            if st.n != n2:
                problems.append(f"n_{st.k} = {st.n} differs from n_2 = {n2}")
    p_pivot = Fraction(result.trace[0].p[result.trace[0].j])
    denom = Fraction(1)
    for st in result.trace:
        denom *= Fraction(st.q[st.j])
        if st.extreme != p_pivot / denom:
            problems.append(f"M_{st.k} = {st.extreme} but the closed form gives {p_pivot / denom}")
    return problems
