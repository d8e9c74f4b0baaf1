"""Problem instances: random generation, execution and JSON-lines records."""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Union

from .bounds_baseline import check_dragomir, three_weight_bounds, ttd_bounds
from .chain_refine import AUTO_UNIFORM, ChainResult, ChainState, finish, lower_chain, upper_chain
from .chain_reduce import reduce_lower_chain, reduce_upper_chain
from .convex_catalog import KINDS, ConvexFn, format_number, to_number
from .errors import ConfigError
from .jensen_core import WeightVector, as_points, points_to_json
from .verify_oracle import Check, VerifyReport, mirrored_qs, verify_baseline, verify_result

FAMILIES = ("dragomir", "lower6", "upper7", "reduce8", "reduce9", "thm4", "thm5")
CHAIN_FAMILIES = {
    "lower6": ("lower", lower_chain),
    "upper7": ("upper", upper_chain),
    "reduce8": ("reduce_lower", reduce_lower_chain),
    "reduce9": ("reduce_upper", reduce_upper_chain),
}
KIND_TO_FAMILY = {kind: fam for fam, (kind, _) in CHAIN_FAMILIES.items()}


@dataclass
class Instance:
    """One problem: a function, points, initial weights and the q data.

    ``q_seq`` holds one q per step for chain families, ``[q]`` for
    ``dragomir``, ``[beta]`` for ``thm5`` and ``[beta, gamma]`` for ``thm4``.
    For chains it may also be the string ``"auto-uniform"``.
    """

    id: str
    family: str
    f: ConvexFn
    x: tuple
    p: WeightVector
    q_seq: Union[list, str]
    N: int = 1

    def __post_init__(self):
        self.x = as_points(self.x)
        if not isinstance(self.p, WeightVector):
            self.p = WeightVector.of(self.p)
        if not isinstance(self.q_seq, str):
            self.q_seq = [q if isinstance(q, WeightVector) else WeightVector.of(q) for q in self.q_seq]
        self.validate()

    def validate(self):
        fam, n = self.family, len(self.p)
        if fam not in FAMILIES:
            raise ConfigError(f"{self.id}: unknown family {fam!r}")
        if len(self.x) != n:
            raise ConfigError(f"{self.id}: {len(self.x)} points but {n} weights")
        for u in self.x:
            if not self.f.contains(u):
                raise ConfigError(f"{self.id}: point {u} outside the domain of f")
        expected = {"dragomir": 1, "thm5": 1, "thm4": 2}.get(fam)
        if expected is not None:
            if isinstance(self.q_seq, str) or len(self.q_seq) != expected:
                raise ConfigError(f"{self.id}: {fam} needs exactly {expected} auxiliary weight vectors")
            if any(len(q) != n for q in self.q_seq):
                raise ConfigError(f"{self.id}: auxiliary weights must have length {n}")
            return
        if self.N < 1:
            raise ConfigError(f"{self.id}: N must be positive")
        if isinstance(self.q_seq, str):
            if self.q_seq != AUTO_UNIFORM:
                raise ConfigError(f"{self.id}: unknown q source {self.q_seq!r}")
            return
        if len(self.q_seq) != self.N:
            raise ConfigError(f"{self.id}: {len(self.q_seq)} q vectors for N = {self.N}")
        if fam in ("lower6", "upper7") and any(len(q) != n for q in self.q_seq):
            raise ConfigError(f"{self.id}: every q must have length {n}")

    def to_json(self) -> dict:
        return {
            "id": self.id,
            "family": self.family,
            "f": self.f.to_json(),
            "x": points_to_json(self.x),
            "p": self.p.to_json(),
            "q_seq": self.q_seq if isinstance(self.q_seq, str) else [q.to_json() for q in self.q_seq],
            "N": self.N,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "Instance":
        try:
            q_seq = obj["q_seq"]
            if not isinstance(q_seq, str):
                q_seq = [WeightVector.of(q) for q in q_seq]
            return cls(
                id=str(obj["id"]),
                family=obj["family"],
                f=ConvexFn.from_json(obj["f"]),
                x=tuple(to_number(u) for u in obj["x"]),
                p=WeightVector.of(obj["p"]),
                q_seq=q_seq,
                N=int(obj.get("N", 1)),
            )
        except KeyError as exc:
            raise ConfigError(f"instance missing field {exc}") from exc


# ------------------------------------------------------------------ running


def run_instance(inst: Instance, max_N: int = 64):
    """Execute an instance; chains give a ChainResult, baselines a report."""
    if inst.family in CHAIN_FAMILIES:
        if inst.N > max_N:
            raise ConfigError(f"{inst.id}: N = {inst.N} exceeds the cap of {max_N}")
        _, runner = CHAIN_FAMILIES[inst.family]
        res = runner(inst.f, inst.x, inst.p, inst.q_seq, inst.N)
        res.instance_id = inst.id
        return res
    if inst.family == "dragomir":
        return check_dragomir(inst.f, inst.x, inst.p, inst.q_seq[0])
    if inst.family == "thm4":
        return three_weight_bounds(inst.f, inst.x, inst.p, *inst.q_seq)
    return ttd_bounds(inst.f, inst.x, inst.p, inst.q_seq[0])


def _state_json(st: ChainState) -> dict:
    out = {"k": st.k, "p": [format_number(v) for v in st.p], "x": points_to_json(st.x)}
    if st.q is not None:
        out["q"] = [format_number(v) for v in st.q]
        out["extreme"] = format_number(st.extreme)
    if st.s is not None:
        out["s"] = st.s
        out["tied"] = list(st.tied)
    if st.j is not None:
        out["j"] = st.j
    if st.eliminated:
        out["eliminated"] = list(st.eliminated)
    return out


def _state_from_json(obj: dict) -> ChainState:
    q = obj.get("q")
    return ChainState(
        k=int(obj["k"]),
        p=tuple(to_number(v) for v in obj["p"]),
        x=tuple(to_number(v) for v in obj["x"]),
        q=None if q is None else tuple(to_number(v) for v in q),
        extreme=None if q is None else to_number(obj["extreme"]),
        s=obj.get("s"),
        j=obj.get("j"),
        tied=tuple(obj.get("tied", ())),
        eliminated=tuple(obj.get("eliminated", ())),
    )


def result_to_json(inst: Instance, res) -> dict:
    if isinstance(res, ChainResult):
        return {
            "id": inst.id,
            "family": inst.family,
            "kind": res.kind,
            "f": inst.f.to_json(),
            "N": inst.N,
            "pivot": res.pivot,
            "trace": [_state_json(st) for st in res.trace],
            "terminal": _state_json(res.terminal),
            "step_functionals": res.step_functionals,
            "J_initial": res.J_initial,
            "defect": res.defect,
            "scale": res.scale,
            "sign_ok": res.sign_ok,
            "stalled": res.stalled,
            "terminated_early": res.terminated_early,
            "n_seq": res.n_seq,
            "eliminated": [list(st.eliminated) for st in res.trace[1:] + [res.terminal]],
        }
    report = {k: _plain(v) for k, v in res.__dict__.items() if k != "terms"}
    if hasattr(res, "terms"):
        report["terms"] = {k: _plain(v) for k, v in res.terms.__dict__.items()}
    return {"id": inst.id, "family": inst.family, "instance": inst.to_json(), "report": report, "ok": res.ok}


def _plain(v):
    if isinstance(v, Fraction):
        return format_number(v)
    if isinstance(v, tuple):
        return list(v)
    return v


def chain_result_from_json(obj: dict) -> ChainResult:
    """Rebuild a chain result from its record, recomputing every functional."""
    f = ConvexFn.from_json(obj["f"])
    trace = [_state_from_json(s) for s in obj["trace"]]
    terminal = _state_from_json(obj["terminal"])
    first = trace[0] if trace else terminal
    res = finish(obj["kind"], f, first.x, first.p, trace, terminal,
                 terminated_early=bool(obj.get("terminated_early")), pivot=obj.get("pivot"))
    res.instance_id = obj.get("id")
    return res


# --------------------------------------------------------------- generation


@dataclass
class GenParams:
    n_min: int = 1
    n_max: int = 8
    N_min: int = 1
    N_max: int = 6
    catalog: tuple = KINDS
    denominator_max: int = 10**4
    mode: str = "exact"
    tie_rate: float = 0.35
    families: tuple = FAMILIES
    extra: dict = field(default_factory=dict)

    def validate(self):
        if self.n_min < 1 or self.n_min > self.n_max:
            raise ConfigError(f"empty n range [{self.n_min}, {self.n_max}]")
        if self.n_max > 32:
            raise ConfigError("n range must lie within [1, 32]")
        if self.N_min < 1 or self.N_min > self.N_max:
            raise ConfigError(f"empty N range [{self.N_min}, {self.N_max}]")
        if self.N_max > 64:
            raise ConfigError("N range must lie within [1, 64]")
        if not self.catalog:
            raise ConfigError("empty function catalog")
        for kind in self.catalog:
            if kind not in KINDS:
                raise ConfigError(f"unknown catalog kind {kind!r}")
        for fam in self.families:
            if fam not in FAMILIES:
                raise ConfigError(f"unknown family {fam!r}")
        if self.mode not in ("exact", "float"):
            raise ConfigError(f"mode must be exact or float, not {self.mode!r}")
        if self.denominator_max < 1:
            raise ConfigError("denominator_max must be positive")
        if self.n_min > self.denominator_max:
            raise ConfigError("n_min exceeds denominator_max; positive q weights need n <= denominator_max")


def case_rng(seed, index) -> random.Random:
    # string seeds hash through sha512, so streams are stable across runs and platforms
    return random.Random(f"jensen-chains:{seed}:{index}")


def random_function(rng: random.Random, kind: str) -> ConvexFn:
    if kind in ("square", "abs", "fourth_power"):
        a = Fraction(rng.randint(-4, 0))
        b = rng.choice([math.inf, a + rng.randint(1, 8)])
        return ConvexFn(kind, a, b)
    if kind == "exp":
        a = Fraction(rng.randint(-3, 0))
        return ConvexFn(kind, a, a + rng.randint(1, 5))
    if kind == "neg_log":
        return ConvexFn(kind, Fraction(1, rng.randint(2, 10)), rng.choice([Fraction(10), math.inf]))
    xs = sorted(rng.sample(range(-4, 5), rng.randint(2, 5)))
    slopes = sorted(rng.randint(-3, 3) for _ in range(len(xs) - 1))
    ys = [Fraction(rng.randint(-2, 2))]
    for (u0, u1), s in zip(zip(xs, xs[1:]), slopes):
        ys.append(ys[-1] + s * (u1 - u0))
    bps = tuple((Fraction(u), y) for u, y in zip(xs, ys))
    return ConvexFn(kind, Fraction(-5), rng.choice([Fraction(5), math.inf]), bps)


def random_points(rng, f: ConvexFn, n, mode):
    lo = Fraction(f.a)
    hi = lo + 10 if math.isinf(f.b) else min(Fraction(f.b), lo + 10)
    grid = 64
    if rng.random() < 0.05:
        pts = [lo + (hi - lo) * rng.randrange(grid) / grid] * n
    else:
        pts = [lo + (hi - lo) * rng.randrange(grid) / grid for _ in range(n)]
    if mode == "float":
        # rounding may push a point just below the left end of the domain
        return tuple(float(u) if float(u) >= f.a else math.nextafter(float(u), math.inf) for u in pts)
    return tuple(pts)


def _composition(rng, n, D):
    cuts = sorted(rng.sample(range(1, D), n - 1)) if n > 1 else []
    bounds = [0] + cuts + [D]
    return [b - a for a, b in zip(bounds, bounds[1:])]


def _draw_D(rng, n, dmax):
    if rng.random() < 0.5:
        return rng.randint(n, max(n, min(12, dmax)))
    return rng.randint(n, dmax)


def random_positive(rng, n, dmax) -> WeightVector:
    return WeightVector.normalized(_composition(rng, n, _draw_D(rng, n, dmax)))


def random_nonnegative(rng, n, dmax) -> WeightVector:
    raw = _composition(rng, n, _draw_D(rng, n, dmax))
    keep = rng.randrange(n)
    raw = [r if i == keep or rng.random() > 0.15 else 0 for i, r in enumerate(raw)]
    return WeightVector.normalized(raw)


def tied_pair(rng, n, dmax, at: str):
    """(p, q) whose ratio p_i/q_i attains its ``at`` extreme on at least two indices."""
    D = _draw_D(rng, n, dmax)
    tie = set(rng.sample(range(n), rng.randint(2, n)))
    if at == "max":
        q_raw = _composition(rng, n, D)
        p_raw = [q if i in tie else rng.randint(0, q - 1) for i, q in enumerate(q_raw)]
    else:
        p_raw = _composition(rng, n, D)
        q_raw = [p if i in tie else rng.randint(1, max(1, p - 1)) for i, p in enumerate(p_raw)]
    return WeightVector.normalized(p_raw), WeightVector.normalized(q_raw)


@dataclass
class Case:
    """Shared random data from which one instance per family is derived."""

    index: int
    f: ConvexFn
    x: tuple
    p: WeightVector
    qs: list
    N: int
    beta: WeightVector
    gamma: WeightVector
    forced_tie: bool
    seed: object


def random_case(seed, index, params: GenParams) -> Case:
    rng = case_rng(seed, index)
    dmax = params.denominator_max
    n = rng.randint(params.n_min, min(params.n_max, dmax))
    N = rng.randint(params.N_min, params.N_max)
    f = random_function(rng, rng.choice(list(params.catalog)))
    x = random_points(rng, f, n, params.mode)
    forced = n >= 2 and rng.random() < params.tie_rate
    if forced:
        p, q1 = tied_pair(rng, n, dmax, rng.choice(["min", "max"]))
    else:
        p, q1 = random_nonnegative(rng, n, dmax), random_positive(rng, n, dmax)
    style = rng.random()
    if style < 1 / 3:
        qs = [q1] * N
    elif style < 0.45:
        qs = [q1] + [WeightVector.uniform(n)] * (N - 1)
    else:
        qs = [q1] + [random_positive(rng, n, dmax) for _ in range(N - 1)]
    if rng.random() < 0.5:
        beta, gamma = random_nonnegative(rng, n, dmax), random_positive(rng, n, dmax)
    else:
        beta, gamma = q1, random_nonnegative(rng, n, dmax)
    return Case(index, f, x, p, qs, N, beta, gamma, forced, seed)


def _recording_source(preferred, rng, dmax, record):
    def source(k, n):
        q = preferred[k - 1] if k - 1 < len(preferred) else None
        if q is None or len(q) != n:
            q = random_positive(rng, n, dmax)
        record.append(q)
        return q
    return source


def _reduce_qs(case: Case, family, dmax):
    preferred = case.qs
    if family == "reduce8":
        mirrored = mirrored_qs(lower_chain(case.f, case.x, case.p, case.qs, case.N))
        if mirrored is not None:
            preferred = [WeightVector(tuple(q)) for q in mirrored]
        runner = reduce_lower_chain
    else:
        runner = reduce_upper_chain
    record = []
    rng = case_rng(case.seed, f"{case.index}:{family}")
    runner(case.f, case.x, case.p, _recording_source(preferred, rng, dmax, record), case.N)
    # steps after an early stop are never read; pad with the trivial one-point q
    record += [WeightVector.uniform(1)] * (case.N - len(record))
    return record


def instance_for(case: Case, family: str, seed, params: GenParams) -> Instance:
    iid = f"s{seed}-{case.index:06d}-{family}"
    if family == "dragomir":
        return Instance(iid, family, case.f, case.x, case.p, [case.qs[0]], 1)
    if family == "thm5":
        return Instance(iid, family, case.f, case.x, case.p, [case.qs[0]], 1)
    if family == "thm4":
        return Instance(iid, family, case.f, case.x, case.p, [case.beta, case.gamma], 1)
    if family in ("lower6", "upper7"):
        return Instance(iid, family, case.f, case.x, case.p, list(case.qs), case.N)
    return Instance(iid, family, case.f, case.x, case.p, _reduce_qs(case, family, params.denominator_max), case.N)


def generate(seed, count: int, params: GenParams) -> list:
    """``count`` cases, each expanded into one instance per requested family."""
    params.validate()
    if count < 1:
        raise ConfigError("count must be at least 1")
    out = []
    for index in range(count):
        case = random_case(seed, index, params)
        for family in params.families:
            out.append(instance_for(case, family, seed, params))
    return out


# ------------------------------------------------------------- verification


def verify_record(obj: dict) -> VerifyReport:
    """Check one stored result record without trusting its stored numbers."""
    if "trace" in obj:
        res = chain_result_from_json(obj)
        report = verify_result(res)
        stored = obj.get("defect")
        if stored is not None:
            diff = abs(Fraction(stored) - res.defect_exact)
            tol = Fraction(1, 10**12) * res.scale_exact
            report.add(Check("stored_defect", diff <= tol, stored, res.defect, float(tol), None,
                             float(diff / res.scale_exact)))
        return report
    inst = Instance.from_json(obj["instance"])
    rep = run_instance(inst)
    report = verify_baseline(inst, rep)
    ok = bool(obj.get("ok")) == rep.ok
    report.add(Check("stored_ok", ok, obj.get("ok"), rep.ok, 0.0, None, 0.0 if ok else 1.0))
    return report
