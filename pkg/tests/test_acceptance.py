"""Acceptance criteria, one test per criterion.

Each test prints a single ``[PASS]``/``[FAIL]`` line, and the lines are
repeated together at the end of the pytest run.
"""

import contextlib
import time
from fractions import Fraction as F

import pytest
from click.testing import CliRunner

from conftest import ACCEPTANCE_LINES
from jensen_chains.bounds_baseline import check_dragomir, ttd_bounds
from jensen_chains.chain_refine import closed_form_Mk, lower_chain, upper_chain
from jensen_chains.chain_reduce import reduce_lower_chain, reduce_upper_chain
from jensen_chains.cli import main
from jensen_chains.convex_catalog import ConvexFn
from jensen_chains.instances import GenParams, generate, random_case, run_instance
from jensen_chains.jensen_core import WeightVector, barycenter, exact_jensen
from jensen_chains.verify_oracle import (
    dragomir_consistency,
    unique_pivot_consistency,
    s1_consistency,
    verify_result,
)

SEED = 20261019
COUNT = 1000
CHAINS = ("lower6", "upper7", "reduce8", "reduce9")
SQ = ConvexFn("square", -10)
HALF = (F(1, 2), F(1, 2))
Q = (F(1, 4), F(3, 4))


@contextlib.contextmanager
def criterion(number, title):
    detail = {}
    try:
        yield detail
    except BaseException:
        line = f"[FAIL] criterion {number}: {title}"
        print(line)
        ACCEPTANCE_LINES.append(line)
        raise
    extra = ", ".join(f"{k}={v}" for k, v in detail.items())
    line = f"[PASS] criterion {number}: {title}" + (f" ({extra})" if extra else "")
    print(line)
    ACCEPTANCE_LINES.append(line)


@pytest.fixture(scope="module")
def chain_runs():
    params = GenParams(families=CHAINS)
    runs = {fam: [] for fam in CHAINS}
    for inst in generate(SEED, COUNT, params):
        res = run_instance(inst)
        runs[inst.family].append((inst, res, verify_result(res)))
    assert all(len(v) == COUNT for v in runs.values())
    return runs


def test_1_dragomir_sandwich():
    with criterion(1, "Dragomir sandwich on 1000 instances, rtol 1e-9, under 10 s") as d:
        params = GenParams(families=("dragomir",))
        start = time.perf_counter()
        bad = 0
        for i in range(COUNT):
            case = random_case(SEED, i, params)
            assert len(case.p) <= 8
            rep = check_dragomir(case.f, case.x, case.p, case.qs[0])
            tol = 1e-9 * (1 + abs(rep.J_p) + abs(rep.J_q))
            bad += not (float(rep.m) * rep.J_q - tol <= rep.J_p <= float(rep.M) * rep.J_q + tol)
        elapsed = time.perf_counter() - start
        d["violations"], d["seconds"] = bad, round(elapsed, 2)
        assert bad == 0
        assert elapsed < 10


def test_2_lower_chains(chain_runs):
    with criterion(2, "lower chains: defect >= -1e-9*scale, ties, 1/8 and 1/32") as d:
        runs = chain_runs["lower6"]
        assert all(res.N <= 6 for _, res, _ in runs)
        bad = [inst.id for inst, res, _ in runs if res.defect_exact < -F(1, 10**9) * res.scale_exact]
        tied = sum(any(st.s >= 2 for st in res.trace) for _, res, _ in runs)
        d["instances"], d["with_ties"] = len(runs), tied
        assert not bad, bad[:5]
        assert tied >= 100

        one = lower_chain(SQ, (0, 1), HALF, [Q], 1)
        two = lower_chain(SQ, (0, 1), HALF, [Q, Q], 2)
        for res, want in ((one, F(1, 8)), (two, F(1, 32))):
            exact = exact_jensen(SQ, (0, 1), HALF) - sum(
                st.extreme * exact_jensen(SQ, st.x, st.q) for st in res.trace)
            assert exact == want
            assert abs(res.defect - float(want)) <= 1e-12
        assert two.extremes == [F(2, 3), F(8, 9)]


def test_3_upper_chains(chain_runs):
    with criterion(3, "upper chains: defect <= 1e-9*scale, M_k equals closed form, M_2 = 8") as d:
        steps = 0
        for inst, res, _ in chain_runs["upper7"]:
            assert res.defect_exact <= F(1, 10**9) * res.scale_exact, inst.id
            for st in res.trace:
                assert st.extreme == closed_form_Mk(inst.p, inst.q_seq, res.pivot, st.k), inst.id
                steps += 1
        d["instances"], d["steps"] = len(chain_runs["upper7"]), steps
        res = upper_chain(SQ, (0, 1), HALF, [Q, Q], 2)
        assert res.extremes[1] == 8 == closed_form_Mk(HALF, [Q, Q], 0, 2)


def test_4_reducing_chains(chain_runs):
    with criterion(4, "reducing chains: sign, dimension rules, closed form, defect 1/4") as d:
        for inst, res, _ in chain_runs["reduce8"]:
            assert res.defect_exact >= -F(1, 10**9) * res.scale_exact, inst.id
            states = res.trace + [res.terminal]
            for st, nxt in zip(res.trace, states[1:]):
                assert nxt.n == st.n - st.s + 1, inst.id
        for inst, res, _ in chain_runs["reduce9"]:
            assert res.defect_exact <= F(1, 10**9) * res.scale_exact, inst.id
            ns = res.n_seq
            assert all(n == ns[1] for n in ns[1:]), inst.id
            j1 = res.pivot
            denom = F(1)
            for st in res.trace:
                denom *= st.q[st.j]
                assert st.extreme == F(inst.p[j1]) / denom, inst.id
        d["reduce8"] = len(chain_runs["reduce8"])
        d["reduce9"] = len(chain_runs["reduce9"])
        res = reduce_lower_chain(SQ, (0, 1, 2), (F(1, 6), F(1, 6), F(2, 3)), [WeightVector.uniform(3)], 1)
        assert abs(res.defect - 0.25) <= 1e-12


def test_5_telescoping(chain_runs):
    with criterion(5, "telescoping identity on every consecutive trace pair, rtol 1e-12") as d:
        pairs, worst = 0, 0.0
        for fam in CHAINS:
            for inst, res, rep in chain_runs[fam]:
                tel = [c for c in rep.checks if c.name == "telescoping"]
                assert len(tel) == res.N, inst.id
                for c in tel:
                    assert c.passed and c.violation <= 1e-12, (inst.id, c)
                    worst = max(worst, c.violation)
                pairs += len(tel)
        # float points make the barycenters inexact, so the tolerance matters here
        for inst in generate(SEED + 1, 250, GenParams(families=CHAINS, mode="float")):
            res = run_instance(inst)
            for c in verify_result(res).checks:
                if c.name == "telescoping":
                    assert c.passed and c.violation <= 1e-12, (inst.id, c)
                    worst = max(worst, c.violation)
                    pairs += 1
        d["pairs"], d["worst"] = pairs, f"{worst:.2e}"


def test_6_conservation(chain_runs):
    with criterion(6, "weight sum and barycenter conserved exactly on every trace") as d:
        states = 0
        for fam in CHAINS:
            for inst, res, _ in chain_runs[fam]:
                p1, x1 = res.trace[0].p, res.trace[0].x
                assert all(isinstance(v, F) for v in x1)
                center = barycenter(x1, p1)
                for st in res.trace + [res.terminal]:
                    assert sum(st.p, F(0)) == 1, inst.id
                    assert barycenter(st.x, st.p) == center, inst.id
                    states += 1
        d["states"] = states


def test_7_cross_consistency():
    with criterion(7, "N=1 vs Dragomir, unique-argmax upper pair, single-tie lower pair") as d:
        params = GenParams()
        counts = {"dragomir": 0, "unique_pivot": 0, "s1": 0}
        for i in range(COUNT):
            case = random_case(SEED, i, params)
            rep = dragomir_consistency(case.f, case.x, case.p, case.qs[0])
            assert rep.passed, (i, rep.failures)
            counts["dragomir"] += 1
            for name, fn in (("unique_pivot", unique_pivot_consistency), ("s1", s1_consistency)):
                rep = fn(case.f, case.x, case.p, case.qs, case.N)
                if rep is not None:
                    assert rep.passed, (i, name, rep.failures)
                    counts[name] += 1
        d.update(counts)
        assert counts["unique_pivot"] >= 100 and counts["s1"] >= 100


def test_8_baselines():
    with criterion(8, "three-weight and TTD bounds on 1000 instances, TTD worked values") as d:
        insts = generate(SEED, COUNT, GenParams(families=("thm4", "thm5")))
        for inst in insts:
            assert run_instance(inst).ok, inst.id
        d["instances"] = len(insts)
        rep = ttd_bounds(SQ, (0, 1), HALF, Q)
        assert (rep.terms.m_star, rep.terms.M_star) == (0, F(2, 3))
        for got, want in ((rep.terms.H_J, 13 / 72), (rep.lower, 1 / 8), (rep.J_alpha, 1 / 4), (rep.upper, 35 / 72)):
            assert abs(got - want) <= 1e-12


def test_9_determinism(tmp_path):
    with criterion(9, "reruns with the same flags give byte-identical files") as d:
        runner = CliRunner()
        commands = [
            ["gen", "--seed", "5", "--count", "40", "--out", "{d}/inst.jsonl"],
            ["gen", "--seed", "5", "--count", "20", "--mode", "float", "--out", "{d}/float.jsonl"],
            ["run", "{d}/inst.jsonl", "--out", "{d}/res.jsonl"],
            ["verify", "{d}/res.jsonl", "--out", "{d}/verify.json"],
            ["report", "{d}/res.jsonl", "--out", "{d}/report.csv"],
            ["fuzz", "--seed", "5", "--trials", "30", "--out", "{d}/fuzz.json", "--csv", "{d}/fuzz.csv"],
        ]
        outputs = []
        for rerun in ("a", "b"):
            out = tmp_path / rerun
            out.mkdir()
            for cmd in commands:
                res = runner.invoke(main, [c.format(d=out) for c in cmd], catch_exceptions=False)
                assert res.exit_code == 0, (cmd, res.output)
            outputs.append({p.name: p.read_bytes() for p in sorted(out.iterdir())})
        assert outputs[0] == outputs[1]
        d["files"] = len(outputs[0])
