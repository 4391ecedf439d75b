import random

import pytest

from dtl.formula import closure_of, neg, parse
from dtl.frames import TypedFrame
from dtl.quasimodel import (
    LassoPath, Quasimodel, basis_member, extend_to_realizing, from_finite_model, is_g_path, is_lasso_path,
    is_realizing, lift_path, quasimodel_from_pairs, satisfies, shift, validate_quasimodel,
)
from dtl.io import example_quasimodel
from dtl.finite_model import FiniteDynModel
from helpers import STAR_BOX, random_model

C = closure_of(STAR_BOX)


def test_example_quasimodel_is_valid_and_refutes_the_formula():
    Q = example_quasimodel()
    assert Q.n == 3
    assert validate_quasimodel(Q).ok
    assert satisfies(Q, neg(STAR_BOX)) == 0
    assert satisfies(Q, STAR_BOX) == 1
    assert Q.name(0) == "u"


def test_satisfies_outside_closure():
    with pytest.raises(KeyError):
        satisfies(example_quasimodel(), parse("q"))


def test_dropping_the_loop_breaks_totality():
    Q = example_quasimodel()
    broken = Quasimodel(Q.frame, Q.g - {(2, 2)}, Q.labels)
    report = validate_quasimodel(broken)
    assert [(v.world, v.clause) for v in report] == [("w", "total")]


def test_extra_edge_breaks_sensibility_and_continuity():
    Q = example_quasimodel()
    report = validate_quasimodel(Quasimodel(Q.frame, Q.g | {(0, 2)}, Q.labels))
    assert "sensible" in report.clauses()
    report = validate_quasimodel(Quasimodel(Q.frame, (Q.g - {(0, 0)}) | {(0, 1)}, Q.labels))
    assert not report.ok


def test_unwitnessed_eventuality_is_reported():
    c = closure_of(parse("*p"))
    t = c.type([parse("p"), parse("!*p")]).bits
    Q = quasimodel_from_pairs(c, [t], [], [(0, 0)])
    assert [v.clause for v in validate_quasimodel(Q)] == ["omega"]


def test_henceforth_must_persist_along_g():
    c = closure_of(parse("*p"))
    t = c.type([parse("!p"), parse("!*p")]).bits
    s = c.type([parse("p"), parse("*p")]).bits
    Q = quasimodel_from_pairs(c, [s, t], [], [(0, 0), (1, 1)])
    assert validate_quasimodel(Q).ok
    # *p at world 0 cannot step to a world where p fails
    Q = quasimodel_from_pairs(c, [s, t], [], [(0, 1), (1, 1)])
    assert "sensible" in validate_quasimodel(Q).clauses()


def test_range_errors_stop_validation():
    Q = example_quasimodel()
    report = validate_quasimodel(Quasimodel(Q.frame, Q.g | {(0, 7)}))
    assert report.clauses() == {"range"}


def test_lasso_helpers():
    p = LassoPath((0,), (1, 2))
    assert p.unroll(6) == [0, 1, 2, 1, 2, 1]
    assert shift(p) == LassoPath((), (1, 2))
    assert shift(shift(p)) == LassoPath((), (2, 1))
    with pytest.raises(ValueError):
        LassoPath((0,), ())


def test_realizing_extensions_in_the_example():
    Q = example_quasimodel()
    assert extend_to_realizing(Q, [0]) == LassoPath((), (0,))
    p = extend_to_realizing(Q, [1])
    assert p == LassoPath((1,), (2,))
    assert is_realizing(Q, p)
    # staying at v forever never reaches the witness at w
    assert is_lasso_path(Q, LassoPath((), (1,)))
    assert not is_realizing(Q, LassoPath((), (1,)))
    with pytest.raises(ValueError):
        extend_to_realizing(Q, [0, 1])


def test_realizing_extension_is_always_realizing_on_models():
    rng = random.Random(3)
    phi = parse("*p | X!p")
    for _ in range(200):
        M = random_model(rng, rng.randint(1, 3))
        Q = from_finite_model(M, phi)
        start = rng.randrange(Q.n)
        p = extend_to_realizing(Q, [start])
        assert p.at(0) == start
        assert is_realizing(Q, p)


def test_lift_and_basis():
    Q = example_quasimodel()
    lifted = lift_path(Q, [0, 0, 0], 1)
    assert is_g_path(Q, lifted) and lifted[0] == 1
    assert all(Q.R(a, b) for a, b in zip([0, 0, 0], lifted))
    center = LassoPath((), (0,))
    assert basis_member(Q, center, 3, LassoPath((), (1,)))
    # u does not see w, so the realizing path from v leaves the neighbourhood at step 1
    assert basis_member(Q, center, 0, LassoPath((1,), (2,)))
    assert not basis_member(Q, center, 1, LassoPath((1,), (2,)))
    with pytest.raises(ValueError):
        lift_path(Q, [1], 0)


def test_finite_models_give_quasimodels():
    rng = random.Random(4)
    for text in ["*[]p -> []*p", "X[]p -> []Xp", "*(p | X!p)", "[]*!p"]:
        phi = parse(text)
        for _ in range(50):
            M = random_model(rng, rng.randint(1, 3))
            assert validate_quasimodel(from_finite_model(M, phi)).ok


def test_quasimodel_equality_ignores_labels():
    Q = example_quasimodel()
    same = Quasimodel(TypedFrame(C, Q.frame.types, Q.frame.up), Q.g)
    assert same == Q and hash(same) == hash(Q)


def test_single_point_model_quasimodel():
    M = FiniteDynModel.build(1, [], [0], {"p": [0]})
    Q = from_finite_model(M, parse("*p"))
    assert satisfies(Q, parse("*p")) == 0
