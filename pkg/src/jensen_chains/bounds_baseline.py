"""Single-step bounds on the Jensen functional.

* Dragomir's sandwich ``m J(q) <= J(p) <= M J(q)``.
* The three-weight bound with ``beta + gamma`` in the denominator.
* The correction-term bound built from ``H_J``.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

from .convex_catalog import ConvexFn, evaluate
from .errors import ConfigError, LengthMismatch, ZeroDenominator
from .jensen_core import WeightVector, barycenter, jensen


@dataclass(frozen=True)
class RatioExtremes:
    m: Fraction
    M: Fraction
    argmin_set: tuple
    argmax_set: tuple


def ratio_extremes(p, q) -> RatioExtremes:
    """Exact min and max of ``p_i / q_i`` with their full index sets."""
    if len(p) != len(q):
        raise LengthMismatch(f"p has {len(p)} entries, q has {len(q)}")
    if any(qi == 0 for qi in q):
        raise ZeroDenominator("q has a zero entry")
    ratios = [Fraction(pi) / Fraction(qi) for pi, qi in zip(p, q)]
    m, M = min(ratios), max(ratios)
    return RatioExtremes(
        m=m,
        M=M,
        argmin_set=tuple(i for i, r in enumerate(ratios) if r == m),
        argmax_set=tuple(i for i, r in enumerate(ratios) if r == M),
    )


def _tol(*values):
    return 1e-9 * (1 + sum(abs(v) for v in values))


def _require_unsigned(*ws):
    for w in ws:
        if isinstance(w, WeightVector) and w.signed:
            raise ConfigError("bound checks only accept unsigned weight vectors")


@dataclass(frozen=True)
class DragomirReport:
    J_p: float
    J_q: float
    m: Fraction
    M: Fraction
    lower_ok: bool
    upper_ok: bool

    @property
    def ok(self):
        return self.lower_ok and self.upper_ok

    @property
    def lower_residual(self) -> float:
        """``J_p - m J_q``; nonnegative by the lower bound."""
        return self.J_p - float(self.m) * self.J_q

    @property
    def upper_residual(self) -> float:
        """``J_p - M J_q``; nonpositive by the upper bound."""
        return self.J_p - float(self.M) * self.J_q


def check_dragomir(f: ConvexFn, x, p, q) -> DragomirReport:
    _require_unsigned(p, q)
    ext = ratio_extremes(p, q)
    J_p = jensen(f, x, p)
    J_q = jensen(f, x, q)
    tol = _tol(J_p, J_q)
    return DragomirReport(
        J_p=J_p,
        J_q=J_q,
        m=ext.m,
        M=ext.M,
        lower_ok=J_p >= float(ext.m) * J_q - tol,
        upper_ok=float(ext.M) * J_q >= J_p - tol,
    )


@dataclass(frozen=True)
class BoundReport:
    lower: float
    J_alpha: float
    upper: float
    ok: bool


def three_weight_bounds(f: ConvexFn, x, alpha, beta, gamma) -> BoundReport:
    _require_unsigned(alpha, beta, gamma)
    if not len(alpha) == len(beta) == len(gamma) == len(x):
        raise LengthMismatch("alpha, beta, gamma and x must have equal length")
    denom = [Fraction(b) + Fraction(g) for b, g in zip(beta, gamma)]
    if any(d == 0 for d in denom):
        raise ZeroDenominator("beta_i + gamma_i = 0 for some i")
    ratios = [Fraction(a) / d for a, d in zip(alpha, denom)]
    mid = [d / 2 for d in denom]
    J_a = jensen(f, x, alpha)
    lower = float(min(ratios)) * (jensen(f, x, beta) + jensen(f, x, gamma))
    upper = 2 * float(max(ratios)) * jensen(f, x, mid)
    tol = _tol(lower, J_a, upper)
    return BoundReport(lower, J_a, upper, lower - tol <= J_a <= upper + tol)


@dataclass(frozen=True)
class TtdTerms:
    J_set: tuple
    m: Fraction
    m_star: Fraction
    M_star: Fraction
    H_J: float


@dataclass(frozen=True)
class TtdReport:
    terms: TtdTerms
    lower: float
    J_alpha: float
    upper: float
    ok: bool


def ttd_terms(f: ConvexFn, x, alpha, beta) -> TtdTerms:
    """Index set, extremes and the ``H_J`` correction for the TTD bound.

    The index set collects every ``i`` with ``alpha_i != beta_i`` together
    with every ``i`` carrying nonzero residual weight ``alpha_i - m beta_i``.
    """
    ext = ratio_extremes(alpha, beta)
    m = ext.m
    residual = [Fraction(a) - m * Fraction(b) for a, b in zip(alpha, beta)]
    J_set = tuple(i for i, (a, b) in enumerate(zip(alpha, beta)) if a != b or residual[i] != 0)
    if not J_set:
        return TtdTerms(J_set, m, Fraction(0), Fraction(0), 0.0)
    candidates = [m] + [residual[i] for i in J_set]
    center = barycenter(x, beta)
    pts = [x[i] for i in J_set] + [center]
    k = len(pts)
    avg_f = sum(evaluate(f, u) for u in pts) / k
    H_J = avg_f - evaluate(f, barycenter(pts, [Fraction(1, k)] * k))
    return TtdTerms(J_set, m, min(candidates), max(candidates), H_J)


def ttd_bounds(f: ConvexFn, x, alpha, beta) -> TtdReport:
    _require_unsigned(alpha, beta)
    if len(alpha) != len(beta) or len(alpha) != len(x):
        raise LengthMismatch("alpha, beta and x must have equal length")
    if any(b == 0 for b in beta):
        raise ZeroDenominator("beta has a zero entry")
    t = ttd_terms(f, x, alpha, beta)
    base = float(t.m) * jensen(f, x, beta)
    width = (len(t.J_set) + 1) * t.H_J
    lower = base + float(t.m_star) * width
    upper = base + float(t.M_star) * width
    J_a = jensen(f, x, alpha)
    tol = _tol(lower, J_a, upper)
    return TtdReport(t, lower, J_a, upper, lower - tol <= J_a <= upper + tol)
