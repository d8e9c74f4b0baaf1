import math
import random
from fractions import Fraction as F

import pytest

from jensen_chains.convex_catalog import KINDS, ConvexFn, check_convexity, evaluate
from jensen_chains.errors import ConfigError, DomainError
from jensen_chains.instances import random_function


def test_eval_examples():
    assert evaluate(ConvexFn("square", -10), 0.5) == 0.25
    assert evaluate(ConvexFn("abs", -10), -1) == 1
    pwl = ConvexFn("piecewise_linear", -5, 5, ((0, 0), (1, 0), (2, 2)))
    assert evaluate(pwl, F(3, 2)) == 1
    assert evaluate(pwl, 1.5) == 1.0


def test_piecewise_extends_end_segments():
    pwl = ConvexFn("piecewise_linear", -5, 5, ((0, 0), (1, 0), (2, 2)))
    assert pwl(-1) == 0
    assert pwl(3) == 4


def test_eval_outside_domain():
    with pytest.raises(DomainError):
        evaluate(ConvexFn("neg_log", F(1, 10), 10), 10)
    with pytest.raises(DomainError):
        evaluate(ConvexFn("square", 0), -1)


def test_exact_inputs_round_once():
    f = ConvexFn("fourth_power", 0)
    assert evaluate(f, F(1, 3)) == float(F(1, 81))


def test_exp_overflow_is_inf():
    assert evaluate(ConvexFn("exp", 0), 10**4) == math.inf


@pytest.mark.parametrize(
    "bad",
    [
        dict(kind="cube", a=0),
        dict(kind="square", a=1, b=1),
        dict(kind="neg_log", a=0),
        dict(kind="piecewise_linear", a=0, breakpoints=((0, 0),)),
        dict(kind="piecewise_linear", a=0, breakpoints=((0, 0), (1, 1), (2, 1))),
        dict(kind="square", a=0, breakpoints=((0, 0), (1, 1))),
    ],
)
def test_invalid_functions_rejected(bad):
    with pytest.raises(ConfigError):
        ConvexFn(**bad)


def test_check_convexity_examples():
    assert check_convexity(ConvexFn("square", -10, 10), 101)
    concave = ConvexFn.unchecked("piecewise_linear", -1, 3, ((0, 0), (1, 1), (2, 1)))
    assert not check_convexity(concave, 101)
    assert check_convexity(ConvexFn("neg_log", F(1, 10), 10), 101)


def test_check_convexity_grid_too_small():
    with pytest.raises(ConfigError):
        check_convexity(ConvexFn("square", 0), 2)


def test_unbounded_window():
    assert ConvexFn("abs", -3).window() == (-3, -3 + 10**6)


def test_random_catalog_functions_are_convex():
    rng = random.Random(11)
    for kind in KINDS:
        for _ in range(5):
            f = random_function(rng, kind)
            assert check_convexity(f, rng.randint(3, 25)), f


def test_json_round_trip():
    fns = [
        ConvexFn("square", F(-1, 3)),
        ConvexFn("neg_log", F(1, 2), 7),
        ConvexFn("piecewise_linear", 0, 4, ((0, 1), (F(1, 2), 0), (3, 5))),
    ]
    for f in fns:
        assert ConvexFn.from_json(f.to_json()) == f
    assert ConvexFn("exp", 0).to_json() == {"kind": "exp", "a": "0", "b": "inf"}


def test_from_json_missing_field():
    with pytest.raises(ConfigError):
        ConvexFn.from_json({"a": "0"})


def test_eval_is_pure():
    f = ConvexFn("exp", -2, 2)
    assert [f(0.3) for _ in range(3)] == [math.exp(0.3)] * 3
