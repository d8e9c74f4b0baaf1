from fractions import Fraction as F

import pytest

from jensen_chains.chain_refine import AUTO_UNIFORM, lower_start, upper_chain, upper_start
from jensen_chains.chain_reduce import (
    reduce_lower_chain,
    reduce_lower_step,
    reduce_upper_chain,
    reduce_upper_problems,
    reduce_upper_step,
)
from jensen_chains.convex_catalog import ConvexFn
from jensen_chains.errors import ShapeMismatch
from jensen_chains.jensen_core import WeightVector

SQ = ConvexFn("square", -10)
HALF = (F(1, 2), F(1, 2))
Q = (F(1, 4), F(3, 4))
U3 = WeightVector.uniform(3)


class TestReduceLower:
    def test_step_drops_ties(self):
        nxt = reduce_lower_step(lower_start((F(1, 6), F(1, 6), F(2, 3)), (0, 1, 2), U3))
        assert nxt.p == HALF and nxt.x == (2, 1)
        assert nxt.eliminated == (0, 1)

    def test_full_tie_collapses(self):
        nxt = reduce_lower_step(lower_start(U3, (0, 1, 5), U3))
        assert nxt.p == (1,) and nxt.x == (2,)

    def test_no_tie_matches_plain(self):
        nxt = reduce_lower_step(lower_start(HALF, (0, 1), Q))
        assert nxt.p == (F(1, 3), F(2, 3)) and nxt.x == (0, F(3, 4))

    def test_chain_worked(self):
        res = reduce_lower_chain(SQ, (0, 1, 2), (F(1, 6), F(1, 6), F(2, 3)), [U3], 1)
        assert res.defect == pytest.approx(1 / 4, abs=1e-12)
        assert res.n_seq == [3, 2]

    def test_uniform_and_constant(self):
        assert reduce_lower_chain(SQ, (0, 1, 2), U3, [U3], 1).defect == 0
        res = reduce_lower_chain(SQ, (4, 4, 4), (F(1, 6), F(1, 6), F(2, 3)), AUTO_UNIFORM, 4)
        assert res.defect == 0

    def test_stops_at_one_point(self):
        res = reduce_lower_chain(SQ, (0, 1, 5), U3, AUTO_UNIFORM, 5)
        # the one-point state is recorded once; it carries a zero functional
        assert res.terminated_early and res.n_seq == [3, 1, 1]
        assert res.step_functionals[-1] == 0

    def test_shape_mismatch_names_step(self):
        with pytest.raises(ShapeMismatch) as info:
            reduce_lower_chain(SQ, (0, 1, 2), (F(1, 6), F(1, 6), F(2, 3)), [U3, U3], 2)
        assert info.value.step == 2
        assert (info.value.expected, info.value.got) == (2, 3)


class TestReduceUpper:
    def test_step(self):
        nxt = reduce_upper_step(upper_start(HALF, (0, 1), Q), Q)
        assert nxt.p == (2, -1) and nxt.x == (F(3, 4), 1)
        assert nxt.extreme == 8 and nxt.n == 2

    def test_equal_weights_collapse(self):
        nxt = reduce_upper_step(upper_start(Q, (0, 1), Q))
        assert nxt.p == (1,) and nxt.x == (F(3, 4),)

    def test_chain_worked(self):
        res = reduce_upper_chain(SQ, (0, 1), HALF, [Q, Q], 2)
        assert res.defect_exact == F(-7, 32)
        assert res.extremes == [2, 8]
        assert reduce_upper_problems(res) == []

    def test_length_stabilizes(self):
        p = (F(1, 2), F(1, 4), F(1, 4))
        res = reduce_upper_chain(SQ, (0, 1, 2), p, [(F(1, 3), F(1, 6), F(1, 2)), Q, Q, HALF], 4)
        # index 1 has ratio 3/2 as well, so it is dropped once and never again
        assert res.n_seq == [3, 2, 2, 2, 2]

    def test_unique_argmax_matches_plain_chain(self):
        qs = [(F(1, 10), F(3, 10), F(3, 5)), (F(1, 5), F(2, 5), F(2, 5)), U3]
        p = (F(1, 2), F(1, 4), F(1, 4))
        plain = upper_chain(SQ, (0, 1, 2), p, qs, 3)
        reduced = reduce_upper_chain(SQ, (0, 1, 2), p, qs, 3)
        assert [(s.p, s.x, s.extreme) for s in plain.trace] == [(s.p, s.x, s.extreme) for s in reduced.trace]
        assert plain.defect_exact == reduced.defect_exact

    def test_constant_points(self):
        assert reduce_upper_chain(SQ, (3, 3), HALF, [Q, Q], 2).defect == 0
