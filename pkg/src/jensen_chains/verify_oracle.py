"""Independent checks on chain traces and cross-family consistency.

Nothing here trusts the bookkeeping of the chain code: every identity is
recomputed from the stored ``(p_k, x_k, q_k)`` states. Weight-side checks
are exact rational comparisons; checks involving function values use
exact arithmetic over the float values of ``f`` and a relative tolerance.
"""

from __future__ import annotations

import warnings
from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

from .bounds_baseline import check_dragomir, ratio_extremes
from .chain_refine import ChainResult, lower_chain, q_at, upper_chain, _weights
from .chain_reduce import reduce_lower_chain, reduce_upper_chain
from .convex_catalog import ConvexFn, evaluate, format_number
from .errors import StallWarning
from .jensen_core import barycenter

TELESCOPING_RTOL = 1e-12
SIGN_RTOL = 1e-9
FLOAT_RTOL = 1e-12


@dataclass
class Check:
    name: str
    passed: bool
    lhs: object
    rhs: object
    tolerance: float = 0.0
    step: Optional[int] = None
    violation: float = 0.0

    def to_json(self) -> dict:
        return {
            "name": self.name,
            "step": self.step,
            "passed": self.passed,
            "lhs": _jsonable(self.lhs),
            "rhs": _jsonable(self.rhs),
            "tolerance": self.tolerance,
            "violation": self.violation,
        }


def _jsonable(v):
    if isinstance(v, Fraction):
        return format_number(v)
    if isinstance(v, float) and v != v:
        return "nan"
    if isinstance(v, (list, tuple)):
        return [_jsonable(u) for u in v]
    return v


def _float(v) -> float:
    try:
        return float(v)
    except OverflowError:
        return float("inf") if v > 0 else float("-inf")


@dataclass
class VerifyReport:
    instance_id: Optional[str] = None
    checks: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    @property
    def worst_violation(self) -> float:
        return max((c.violation for c in self.checks), default=0.0)

    @property
    def failures(self) -> list:
        return [c for c in self.checks if not c.passed]

    @property
    def worst_check(self) -> Optional[str]:
        failing = self.failures or self.checks
        if not failing:
            return None
        return max(failing, key=lambda c: c.violation).name

    def add(self, check: Check):
        self.checks.append(check)

    def extend(self, other: "VerifyReport") -> "VerifyReport":
        self.checks.extend(other.checks)
        return self

    def names(self) -> set:
        return {c.name for c in self.checks}

    def to_json(self) -> dict:
        return {
            "id": self.instance_id,
            "passed": self.passed,
            "worst_violation": self.worst_violation,
            "checks": [c.to_json() for c in self.checks],
        }


def _equal_check(name, lhs, rhs, step=None) -> Check:
    diff = abs(Fraction(lhs) - Fraction(rhs))
    return Check(name, diff == 0, lhs, rhs, 0.0, step, _float(diff))


def _close_check(name, lhs, rhs, scale, rtol, step=None) -> Check:
    """Relative comparison; the recorded violation is ``|lhs - rhs| / scale``."""
    diff = abs(Fraction(lhs) - Fraction(rhs))
    scale = Fraction(scale)
    tol = Fraction(rtol) * scale
    rel = diff / scale if scale else diff
    return Check(name, diff <= tol, _float(lhs), _float(rhs), _float(tol), step, _float(rel))


def _states(result: ChainResult) -> list:
    return list(result.trace) + [result.terminal]


def _fvals(f, xs):
    return [Fraction(evaluate(f, u)) for u in xs]


# ---------------------------------------------------------------- identities


def telescoping_check(f: ConvexFn, result: ChainResult) -> VerifyReport:
    """Per-step identity ``sum p_k f(x_k) - e_k J(f, x_k, q_k) = sum p_{k+1} f(x_{k+1})``."""
    report = VerifyReport(result.instance_id)
    states = _states(result)
    for cur, nxt in zip(states, states[1:]):
        fx = _fvals(f, cur.x)
        fc = Fraction(evaluate(f, barycenter(cur.x, cur.q)))
        pf = sum((Fraction(p) * v for p, v in zip(cur.p, fx)), Fraction(0))
        qf = sum((Fraction(q) * v for q, v in zip(cur.q, fx)), Fraction(0))
        e = Fraction(cur.extreme)
        lhs = pf - e * (qf - fc)
        fx_next = _fvals(f, nxt.x)
        rhs = sum((Fraction(p) * v for p, v in zip(nxt.p, fx_next)), Fraction(0))
        scale = (
            sum((abs(Fraction(p) * v) for p, v in zip(cur.p, fx)), Fraction(0))
            + abs(e) * (sum((Fraction(q) * abs(v) for q, v in zip(cur.q, fx)), Fraction(0)) + abs(fc))
            + sum((abs(Fraction(p) * v) for p, v in zip(nxt.p, fx_next)), Fraction(0))
        )
        report.add(_close_check("telescoping", lhs, rhs, scale, TELESCOPING_RTOL, cur.k))
    return report


def _is_exact(points) -> bool:
    return all(not isinstance(u, float) for u in points)


def conservation_check(result: ChainResult) -> VerifyReport:
    """Weight sums, barycenters and sign patterns of every state."""
    report = VerifyReport(result.instance_id)
    states = _states(result)
    first = states[0]
    center0 = sum((Fraction(p) * Fraction(u) for p, u in zip(first.p, first.x)), Fraction(0))
    for st in states:
        report.add(_equal_check("weight_sum", sum(st.p, Fraction(0)), 1, st.k))
        if len(st.p) != len(st.x):
            report.add(Check("state_shape", False, len(st.p), len(st.x), 0.0, st.k, float(abs(len(st.p) - len(st.x)))))
            continue
        center = sum((Fraction(p) * Fraction(u) for p, u in zip(st.p, st.x)), Fraction(0))
        if _is_exact(st.x) and _is_exact(first.x):
            report.add(_equal_check("barycenter", center, center0, st.k))
        else:
            scale = 1 + sum((abs(Fraction(p) * Fraction(u)) for p, u in zip(st.p, st.x)), Fraction(0))
            report.add(_close_check("barycenter", center, center0, scale, FLOAT_RTOL, st.k))
        if result.is_lower:
            worst = min(st.p)
            report.add(Check("nonnegative", worst >= 0, worst, 0, 0.0, st.k, _float(max(-worst, 0))))
        elif st.k >= 2:
            positive = [i for i, p in enumerate(st.p) if p > 0]
            ok = positive == [st.j]
            report.add(Check("single_positive_pivot", ok, positive, [st.j], 0.0, st.k, 0.0 if ok else 1.0))
    return report


def structure_check(result: ChainResult) -> VerifyReport:
    """q vectors, extreme ratios, dimension bookkeeping and closed forms."""
    report = VerifyReport(result.instance_id)
    states = _states(result)
    for st in result.trace:
        report.add(_equal_check("q_sum", sum(st.q, Fraction(0)), 1, st.k))
        ok = all(q > 0 for q in st.q) and len(st.q) == len(st.p)
        report.add(Check("q_positive", ok, len(st.q), len(st.p), 0.0, st.k, 0.0 if ok else 1.0))
        if not ok:
            continue
        ext = ratio_extremes(st.p, st.q)
        if result.is_lower:
            report.add(_equal_check("extreme", st.extreme, ext.m, st.k))
            ok = st.s == len(ext.argmin_set)
            report.add(Check("multiplicity", ok, st.s, len(ext.argmin_set), 0.0, st.k, 0.0 if ok else 1.0))
        else:
            report.add(_equal_check("extreme", st.extreme, ext.M, st.k))
            report.add(_equal_check("pivot_ratio", st.extreme, Fraction(st.p[st.j]) / Fraction(st.q[st.j]), st.k))
    if result.kind == "reduce_lower":
        for cur, nxt in zip(states, states[1:]):
            expected = cur.n - cur.s + 1
            ok = nxt.n == expected
            report.add(Check("dimension_step", ok, nxt.n, expected, 0.0, cur.k, float(abs(nxt.n - expected))))
            # survivors are the strictly positive p_i - m q_i; the appended slot is last
            for w in nxt.p[:-1]:
                if w <= 0:
                    report.add(Check("survivor_positive", False, w, 0, 0.0, nxt.k, _float(-w)))
                    break
    if result.kind == "reduce_upper" and len(states) > 2:
        n2 = states[1].n
        for st in states[2:]:
            ok = st.n == n2
            report.add(Check("dimension_stable", ok, st.n, n2, 0.0, st.k, float(abs(st.n - n2))))
    if result.kind in ("upper", "reduce_upper") and result.trace:
        j0 = result.trace[0].j
        top = ratio_extremes(result.trace[0].p, result.trace[0].q).argmax_set
        ok = j0 == top[0]
        report.add(Check("pivot_choice", ok, j0, top[0], 0.0, 1, 0.0 if ok else 1.0))
        closed = Fraction(result.trace[0].p[j0])
        for st in result.trace:
            closed /= Fraction(st.q[st.j])
            report.add(_equal_check("closed_form", st.extreme, closed, st.k))
    return report


def final_jensen_check(f: ConvexFn, result: ChainResult) -> VerifyReport:
    """Terminal Jensen comparison ``sum p f(x)`` against ``f`` of the barycenter.

    Lower chains end with ``sum p f(x) >= f(center)``; upper chains with
    ``<=``. Either way this equals the sign of the defect.
    """
    report = VerifyReport(result.instance_id)
    term = result.terminal
    fx = _fvals(f, term.x)
    lhs = sum((Fraction(p) * v for p, v in zip(term.p, fx)), Fraction(0))
    first = result.trace[0] if result.trace else term
    rhs = Fraction(evaluate(f, barycenter(first.x, first.p)))
    tol = Fraction(SIGN_RTOL) * (1 + sum((abs(Fraction(p) * v) for p, v in zip(term.p, fx)), Fraction(0)) + abs(rhs))
    gap = lhs - rhs if result.is_lower else rhs - lhs
    rel = max(-gap, 0) / (tol / Fraction(SIGN_RTOL))
    report.add(Check("final_jensen", gap >= -tol, _float(lhs), _float(rhs), _float(tol), term.k, _float(rel)))
    return report


def sign_check(result: ChainResult) -> VerifyReport:
    report = VerifyReport(result.instance_id)
    d, tol = result.defect_exact, result.tolerance
    gap = d if result.is_lower else -d
    rel = max(-gap, 0) / result.scale_exact
    report.add(Check("defect_sign", gap >= -tol, result.defect, 0.0, _float(tol), None, _float(rel)))
    return report


def verify_result(result: ChainResult) -> VerifyReport:
    """Every trace-level check for one chain result."""
    f = result.f
    report = VerifyReport(result.instance_id)
    report.extend(sign_check(result))
    report.extend(telescoping_check(f, result))
    report.extend(conservation_check(result))
    report.extend(structure_check(result))
    report.extend(final_jensen_check(f, result))
    return report


# ---------------------------------------------------------- cross-family checks


def dragomir_consistency(f: ConvexFn, x, p, q, instance_id=None) -> VerifyReport:
    """One-step chains must reproduce the residuals of the single-step bound."""
    report = VerifyReport(instance_id)
    d = check_dragomir(f, x, p, q)
    low = lower_chain(f, x, p, [q], 1)
    up = upper_chain(f, x, p, [q], 1)
    report.add(_equal_check("dragomir_m", low.extremes[0], d.m))
    report.add(_equal_check("dragomir_M", up.extremes[0], d.M))
    report.add(_close_check("dragomir_lower_residual", low.defect, d.lower_residual,
                            low.scale, FLOAT_RTOL))
    report.add(_close_check("dragomir_upper_residual", up.defect, d.upper_residual,
                            up.scale, FLOAT_RTOL))
    return report


def has_unique_argmax(p, q) -> bool:
    return len(ratio_extremes(p, q).argmax_set) == 1


def _state_key(st):
    return (st.k, tuple(st.p), tuple(st.x), st.q and tuple(st.q), st.extreme, st.j)


def unique_pivot_consistency(f: ConvexFn, x, p, qs, N, instance_id=None) -> Optional[VerifyReport]:
    """Reducing and plain upper chains agree when the first argmax is unique.

    Returns ``None`` when the hypothesis does not hold.
    """
    p = _weights(p)
    if not has_unique_argmax(p, _weights(q_at(qs, 1, len(p)))):
        return None
    report = VerifyReport(instance_id)
    plain = upper_chain(f, x, p, qs, N)
    reduced = reduce_upper_chain(f, x, p, qs, N)
    a, b = _states(plain), _states(reduced)
    ok = len(a) == len(b)
    report.add(Check("unique_pivot_length", ok, len(a), len(b), 0.0, None, 0.0 if ok else 1.0))
    for sa, sb in zip(a, b):
        ok = _state_key(sa) == _state_key(sb)
        report.add(Check("unique_pivot_state", ok, "upper", "reduce_upper", 0.0, sa.k, 0.0 if ok else 1.0))
    report.add(_equal_check("unique_pivot_defect", plain.defect_exact, reduced.defect_exact))
    return report


def mirrored_qs(plain: ChainResult) -> Optional[list]:
    """q sequence that makes the reducing lower chain mirror ``plain``.

    While every step has a single minimizer the reducing chain holds the same
    (weight, point) pairs as the plain chain, only reordered: the minimizer
    moves to the end. The plain chain's q vectors are permuted to follow.
    Returns ``None`` if some step has a tie, since lengths then diverge.
    """
    if any(st.s != 1 for st in plain.trace):
        return None
    # position r of the reducing chain holds the pair at plain index order[r]
    order = list(range(len(plain.trace[0].p)))
    out = []
    for st in plain.trace:
        out.append([st.q[i] for i in order])
        r = order.index(st.tied[0])
        order = order[:r] + order[r + 1:] + [order[r]]
    return out


def _support(st):
    return Counter((Fraction(w), u) for w, u in zip(st.p, st.x) if w != 0)


def s1_consistency(f: ConvexFn, x, p, qs, N, instance_id=None) -> Optional[VerifyReport]:
    """Reducing and plain lower chains hold the same weighted support when every ``s_k = 1``.

    Returns ``None`` when some step has a tie.
    """
    plain = lower_chain(f, x, p, qs, N)
    mirrored = mirrored_qs(plain)
    if mirrored is None:
        return None
    reduced = reduce_lower_chain(f, x, p, mirrored, N)
    report = VerifyReport(instance_id)
    by_k = {st.k: st for st in _states(plain)}
    for sb in _states(reduced):
        ok = _support(by_k[sb.k]) == _support(sb)
        report.add(Check("s1_support", ok, "lower", "reduce_lower", 0.0, sb.k, 0.0 if ok else 1.0))
    ok = plain.extremes[:reduced.N] == reduced.extremes
    report.add(Check("s1_extremes", ok, plain.extremes, reduced.extremes, 0.0, None, 0.0 if ok else 1.0))
    report.add(_close_check("s1_defect", plain.defect_exact, reduced.defect_exact,
                            plain.scale_exact, FLOAT_RTOL))
    return report


# -------------------------------------------------------------------- fuzzing


@dataclass
class FuzzConfig:
    seed: int = 0
    trials: int = 100
    n_range: tuple = (1, 8)
    N_range: tuple = (1, 6)
    catalog: tuple = ()
    mode: str = "exact"
    denominator_max: int = 10**4
    tie_rate: float = 0.35
    families: tuple = ()
    threads: Optional[int] = None

    def gen_params(self):
        from .convex_catalog import KINDS
        from .instances import FAMILIES, GenParams

        if self.trials < 1:
            from .errors import ConfigError
            raise ConfigError("trials must be at least 1")
        params = GenParams(
            n_min=self.n_range[0], n_max=self.n_range[1],
            N_min=self.N_range[0], N_max=self.N_range[1],
            catalog=tuple(self.catalog) or KINDS,
            denominator_max=self.denominator_max,
            mode=self.mode,
            tie_rate=self.tie_rate,
            families=tuple(self.families) or FAMILIES,
        )
        params.validate()
        return params

    def to_json(self) -> dict:
        params = self.gen_params()
        return {
            "seed": self.seed,
            "trials": self.trials,
            "n_range": list(self.n_range),
            "N_range": list(self.N_range),
            "catalog": list(params.catalog),
            "mode": self.mode,
            "denominator_max": self.denominator_max,
            "tie_rate": self.tie_rate,
            "families": list(params.families),
        }


@dataclass
class FuzzReport:
    config: dict
    records: list
    summary: dict

    @property
    def passed(self) -> bool:
        return self.summary["failed"] == 0

    def to_json(self) -> dict:
        return {"config": self.config, "summary": self.summary, "records": self.records}

    def csv_rows(self) -> list:
        header = ["id", "family", "defect", "worst_check", "pass"]
        rows = [header]
        for r in self.records:
            rows.append([r["id"], r["family"], repr(r["defect"]), r["worst_check"] or "", "1" if r["passed"] else "0"])
        return rows


def _record(iid, family, defect, report: VerifyReport) -> dict:
    return {
        "id": iid,
        "family": family,
        "defect": defect,
        "worst_check": report.worst_check,
        "passed": report.passed,
        "worst_violation": report.worst_violation,
        "failed_checks": sorted({c.name for c in report.failures}),
    }


def verify_baseline(inst, rep) -> VerifyReport:
    """Bound check of a single-step family, recomputed from the instance."""
    out = VerifyReport(inst.id)
    if inst.family == "dragomir":
        tol = 1e-9 * (1 + abs(rep.J_p) + abs(rep.J_q))
        lo = rep.J_p - float(rep.m) * rep.J_q
        hi = float(rep.M) * rep.J_q - rep.J_p
        size = tol / SIGN_RTOL
        out.add(Check("dragomir_lower", lo >= -tol, rep.J_p, float(rep.m) * rep.J_q, tol, None, max(-lo, 0.0) / size))
        out.add(Check("dragomir_upper", hi >= -tol, float(rep.M) * rep.J_q, rep.J_p, tol, None, max(-hi, 0.0) / size))
        return out
    tol = 1e-9 * (1 + abs(rep.lower) + abs(rep.J_alpha) + abs(rep.upper))
    lo = rep.J_alpha - rep.lower
    hi = rep.upper - rep.J_alpha
    name = inst.family
    size = tol / SIGN_RTOL
    out.add(Check(f"{name}_lower", lo >= -tol, rep.J_alpha, rep.lower, tol, None, max(-lo, 0.0) / size))
    out.add(Check(f"{name}_upper", hi >= -tol, rep.upper, rep.J_alpha, tol, None, max(-hi, 0.0) / size))
    return out


def baseline_margin(inst, rep) -> float:
    if inst.family == "dragomir":
        return min(rep.J_p - float(rep.m) * rep.J_q, float(rep.M) * rep.J_q - rep.J_p)
    return min(rep.J_alpha - rep.lower, rep.upper - rep.J_alpha)


def _error_report(iid, exc) -> VerifyReport:
    rep = VerifyReport(iid)
    rep.add(Check("error", False, type(exc).__name__, str(exc), 0.0, None, float("inf")))
    return rep


def fuzz_case(seed, index, params) -> dict:
    """Generate one case, run every family on it and verify the results."""
    from .errors import JensenError
    from .instances import CHAIN_FAMILIES, instance_for, random_case, run_instance

    case = random_case(seed, index, params)
    records, stats = [], Counter()
    stats["forced_tie_cases"] += case.forced_tie
    for family in params.families:
        try:
            inst = instance_for(case, family, seed, params)
            res = run_instance(inst)
        except JensenError as exc:
            iid = f"s{seed}-{index:06d}-{family}"
            records.append(_record(iid, family, None, _error_report(iid, exc)))
            continue
        if family in CHAIN_FAMILIES:
            rep = verify_result(res)
            records.append(_record(inst.id, family, res.defect, rep))
            if family == "lower6":
                ties = [st for st in res.trace if st.s >= 2]
                stats["tie_instances"] += bool(ties)
                stats["stalled"] += res.stalled
                for st in ties:
                    if st.k >= 2 and st.q != res.trace[st.k - 2].q:
                        stats["varying_q_tie_steps"] += 1
                        nxt = (res.trace + [res.terminal])[st.k]
                        stats["varying_q_tie_weight_sum_failures"] += sum(nxt.p, Fraction(0)) != 1
        else:
            rep = verify_baseline(inst, res)
            records.append(_record(inst.id, family, baseline_margin(inst, res), rep))
    p = case.p
    q1 = case.qs[0]
    base = f"s{seed}-{index:06d}"
    cross = [("cross-dragomir", lambda: dragomir_consistency(case.f, case.x, p, q1, base))]
    if "upper7" in params.families or "reduce9" in params.families:
        cross.append(("cross-unique-pivot", lambda: unique_pivot_consistency(case.f, case.x, p, case.qs, case.N, base)))
    if "lower6" in params.families or "reduce8" in params.families:
        cross.append(("cross-s1", lambda: s1_consistency(case.f, case.x, p, case.qs, case.N, base)))
    for name, fn in cross:
        try:
            rep = fn()
        except JensenError as exc:
            rep = _error_report(base, exc)
        if rep is None:
            continue
        stats[name] += 1
        records.append(_record(f"{base}-{name}", name, None, rep))
    return {"records": records, "stats": stats}


def _threads(config: FuzzConfig) -> int:
    import os

    if config.threads:
        return max(1, config.threads)
    try:
        return max(1, int(os.environ.get("JENSEN_CHAIN_THREADS", "1")))
    except ValueError:
        return 1


def fuzz(config: FuzzConfig) -> FuzzReport:
    """Seeded batch of random cases with every family and cross-check.

    Output depends only on the configuration: trials are seeded
    individually and records are sorted by id before aggregation.
    """
    from concurrent.futures import ThreadPoolExecutor

    params = config.gen_params()
    indices = range(config.trials)
    threads = _threads(config)
    # stalls are tallied in the summary, so the per-chain warning is noise here
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", StallWarning)
        if threads == 1:
            parts = [fuzz_case(config.seed, i, params) for i in indices]
        else:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                parts = list(pool.map(lambda i: fuzz_case(config.seed, i, params), indices))
    records = sorted((r for part in parts for r in part["records"]), key=lambda r: (r["id"], r["family"]))
    stats = Counter()
    for part in parts:
        stats.update(part["stats"])
    by_family = {}
    for r in records:
        fam = by_family.setdefault(r["family"], {"count": 0, "failed": 0, "worst_violation": 0.0})
        fam["count"] += 1
        fam["failed"] += not r["passed"]
        fam["worst_violation"] = max(fam["worst_violation"], r["worst_violation"])
    summary = {
        "instances": len(records),
        "failed": sum(not r["passed"] for r in records),
        "worst_violation": max((r["worst_violation"] for r in records), default=0.0),
        "by_family": dict(sorted(by_family.items())),
        "stats": dict(sorted(stats.items())),
    }
    return FuzzReport(config.to_json(), records, summary)
