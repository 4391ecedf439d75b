import itertools
import random

import pytest

from dtl.formula import closure_of, parse
from dtl.frames import LocalFrame, embeds, is_embedded, preceq, shape_space, subframe, validate_typed_frame
from dtl.io import example_quasimodel
from dtl.report import ClosureMismatch
from dtl.temporal import (
    FrameRelation, admits, check_relation, is_coherent, is_continuous, is_non_confluent, is_successor, oplus,
    reduce_successor, sensible_pair, temporal_successor,
)
from helpers import STAR_BOX, brute_successor, frame_at, random_tree_frame

C = closure_of(STAR_BOX)
CP = closure_of(parse("p"))
P, NP = CP.type([parse("p")]).bits, CP.type([parse("!p")]).bits


def single(c, t):
    return LocalFrame(c, (t,), (1,), 0)


def test_sensible_pair_examples():
    Q = example_quasimodel()
    u, v, w = Q.type_at(0), Q.type_at(1), Q.type_at(2)
    assert sensible_pair(v, w)
    assert sensible_pair(u, u)
    # *p at u needs *p at the next world
    assert not sensible_pair(u, w)
    with pytest.raises(ClosureMismatch):
        sensible_pair(v, CP.type([parse("p")]))


def test_identity_relation_is_continuous_and_non_confluent():
    a = LocalFrame.from_pairs(CP, (P, NP), [(0, 1)])
    rel = FrameRelation(a, a, frozenset((w, w) for w in a.worlds))
    assert is_continuous(rel) and is_non_confluent(rel)
    assert check_relation(rel).ok


def test_root_only_relation_is_not_continuous():
    a = LocalFrame.from_pairs(CP, (P, NP), [(0, 1)])
    rel = FrameRelation(a, a, frozenset({(0, 0)}))
    assert not is_continuous(rel)
    assert {"total", "continuity"} <= check_relation(rel).clauses()


def test_direct_confluence_violation():
    a = LocalFrame.from_pairs(CP, (P, P, P), [(0, 1), (0, 2)])
    b = LocalFrame.from_pairs(CP, (P, P), [(0, 1)])
    rel = FrameRelation(a, b, frozenset({(0, 0), (1, 0), (2, 1)}))
    assert not is_non_confluent(rel)


def test_example_frame_at_u_is_its_own_successor():
    Q = example_quasimodel()
    a = frame_at(Q, 0)
    rel = temporal_successor(a, a)
    assert rel is not None
    assert check_relation(rel).ok
    depicted = FrameRelation(a, a, frozenset({(0, 0), (1, 1)}))
    assert check_relation(depicted).ok


def test_singleton_self_successor():
    rel = temporal_successor(single(CP, P), single(CP, P))
    assert rel.pairs == frozenset({(0, 0)})


def test_next_requirement_blocks_successor():
    c = closure_of(parse("Xp"))
    t = c.type([parse("Xp"), parse("p")]).bits
    s = c.type([parse("!Xp"), parse("!p")]).bits
    assert temporal_successor(single(c, t), single(c, s)) is None
    assert temporal_successor(single(c, t), single(c, t)) is not None


def _small_frames(text, worlds):
    c = closure_of(parse(text))
    return c, list(shape_space(c).iter_frames(3 * c.length, max_worlds=worlds))


@pytest.mark.parametrize("text", ["*p", "X[]p", "*[]p -> []*p"])
def test_successor_search_matches_brute_force(text):
    c, frames = _small_frames(text, 3)
    rng = random.Random(hash(text) % 1000)
    pairs = [(rng.choice(frames), rng.choice(frames)) for _ in range(150)]
    for a, b in pairs:
        rel = temporal_successor(a, b)
        assert (rel is not None) == brute_successor(a, b), (a.describe(), b.describe())
        if rel is not None:
            assert check_relation(rel).ok
            assert sensible_pair(a.t(), b.t())


def test_reduce_returns_b_when_already_small():
    a = single(CP, P)
    b = LocalFrame.from_pairs(CP, (P, NP), [(0, 1)])
    assert reduce_successor(a, b) is b


def test_reduce_drops_duplicate_children():
    a = single(CP, P)
    b = LocalFrame.from_pairs(CP, (P, NP, NP, NP), [(0, 1), (0, 2), (0, 3)])
    assert b.norm == 3
    d = reduce_successor(a, b)
    assert d.norm <= a.norm + CP.length
    assert embeds(d, b) is not None
    assert temporal_successor(a, d) is not None
    assert d.n < b.n


def test_reduce_rejects_non_successors():
    c = closure_of(parse("Xp"))
    t = c.type([parse("Xp"), parse("p")]).bits
    s = c.type([parse("!Xp"), parse("!p")]).bits
    with pytest.raises(ValueError):
        reduce_successor(single(c, t), single(c, s))


def test_reduction_property_on_random_pairs():
    c, frames = _small_frames("*p", 4)
    rng = random.Random(5)
    checked = 0
    for _ in range(400):
        a, b = rng.choice(frames), rng.choice(frames)
        if not is_successor(a, b):
            continue
        bound = a.norm + 1
        try:
            d = reduce_successor(a, b, bound)
        except ValueError:
            continue
        checked += 1
        assert d.norm <= bound and is_embedded(d, b) and is_successor(a, d)
        assert validate_typed_frame(d, c).ok
    assert checked > 20


def test_oplus_examples():
    assert oplus([P], [], P, closure=CP) == single(CP, P)
    two = oplus([P], [single(CP, NP)], P)
    assert two == LocalFrame.from_pairs(CP, (P, NP), [(0, 1)])
    a = LocalFrame.from_pairs(CP, (NP, P), [(0, 1)])
    b = oplus([P, NP], [a], NP)
    assert b.dpt >= 2 and b.hgt == a.hgt + 1
    assert b.root_type == NP
    with pytest.raises(ValueError):
        oplus([P], [], NP, closure=CP)


def test_coherence_of_a_single_type():
    c = closure_of(parse("[]p"))
    for t in c.all_types:
        box = bool(t >> c.idx(parse("[]p")) & 1)
        body = bool(t >> c.idx(parse("p")) & 1)
        assert is_coherent([t], [], closure=c) == (box == body)


def test_coherent_pairs_build_valid_frames():
    c, frames = _small_frames("[]p & X<>p", 2)
    rng = random.Random(12)
    for _ in range(200):
        T = rng.sample(c.all_types, rng.randint(1, 2))
        A = rng.sample(frames, rng.randint(0, 2))
        b = oplus(T, A, T[0], closure=c)
        assert validate_typed_frame(b, c).ok == is_coherent(T, A, closure=c)


def _admits_instances(text, seed, count):
    c, frames = _small_frames(text, 2)
    rng = random.Random(seed)
    out = []
    while len(out) < count:
        T = rng.sample(c.all_types, rng.randint(1, 2))
        A = rng.sample(frames, rng.randint(0, 2))
        if not is_coherent(T, A, closure=c):
            continue
        t = rng.choice(T)
        a = rng.choice(frames)
        out.append((T, A, t, a))
    return c, out


def _has_twin_children(a):
    """Two clusters right above the root cluster carry isomorphic subframes."""
    kids = a.cluster_children[a.cluster_of[a.root]]
    keys = [subframe(a, a.clusters[k][0]).key for k in kids]
    return len(keys) != len(set(keys))


@pytest.mark.parametrize("text,seed", [("*[]p -> []*p", 21), ("*p", 22), ("X[]p", 23)])
def test_admission_implies_successor_without_twin_children(text, seed):
    c, cases = _admits_instances(text, seed, 300)
    hits = 0
    for T, A, t, a in cases:
        if admits(T, A, t, a) and not _has_twin_children(a):
            hits += 1
            assert is_successor(a, oplus(T, A, t, closure=c)), (a.describe(), T, [x.describe() for x in A])
    assert hits > 10


def test_admission_can_fail_with_twin_children():
    # a root with two identical leaves; the only candidate target has a single
    # matching copy, so both leaves would have to share it and break non-confluence
    c = closure_of(parse("*p"))
    hp, hnp = parse("p"), parse("!p")
    lo = c.type([hnp, parse("!*p")]).bits
    hi = c.type([hp, parse("!*p")]).bits
    a = LocalFrame.from_pairs(c, (lo, hi, hi), [(0, 1), (0, 2)])
    top = LocalFrame.from_pairs(c, (hi, lo, lo), [(0, 1), (0, 2), (1, 2), (2, 1)])
    T, A = [hi], [top]
    assert is_coherent(T, A, closure=c)
    assert admits(T, A, hi, a)
    b = oplus(T, A, hi, closure=c)
    assert not brute_successor(a, b)
    assert not is_successor(a, b)
    # a single leaf is fine
    assert is_successor(LocalFrame.from_pairs(c, (lo, hi), [(0, 1)]), b)


def test_admits_first_clause():
    a = single(CP, P)
    assert admits([P], [single(CP, P)], P, a)
    assert not admits([NP], [], NP, a) or is_successor(a, single(CP, NP))


def test_oplus_contains_each_frame_of_a():
    c, frames = _small_frames("[]p & X<>p", 2)
    rng = random.Random(13)
    for _ in range(100):
        T = rng.sample(c.all_types, rng.randint(1, 2))
        A = rng.sample(frames, rng.randint(0, 2))
        if not is_coherent(T, A, closure=c):
            continue
        b = oplus(T, A, T[0], closure=c)
        assert all(preceq(a, b) for a in A)


def test_functional_relations_match_square_completion():
    c, frames = _small_frames("p", 3)
    for a, b in itertools.product(frames, repeat=2):
        for g in itertools.product(range(b.n), repeat=a.n):
            rel = FrameRelation(a, b, frozenset(enumerate(g)))
            square = all(b.R(g[w], g[v]) for w in a.worlds for v in a.worlds if a.R(w, v))
            injective = all(a.R(w, v) for w in a.worlds for v in a.worlds if b.R(g[w], g[v]))
            assert is_continuous(rel) == square
            assert is_non_confluent(rel) == injective
