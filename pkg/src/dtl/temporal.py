"""Transition relations between typed frames and the successor order on frames."""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Optional

import networkx as nx

from .formula import Closure, PhiType
from .frames import LocalFrame, TypedFrame, bits, frame_length, subframe_classes, validate_typed_frame
from .report import ClosureMismatch, ValidationReport

log = logging.getLogger(__name__)


def _bits(t) -> int:
    return t.bits if isinstance(t, PhiType) else t


def sensible_pair(t: PhiType, s: PhiType) -> bool:
    """Next and henceforth formulas of ``t`` agree with ``s``."""
    if t.closure != s.closure:
        raise ClosureMismatch("types over different closures")
    return t.closure.sensible(t.bits, s.bits)


@dataclass(frozen=True)
class FrameRelation:
    source: TypedFrame
    target: TypedFrame
    pairs: frozenset

    def __post_init__(self):
        if self.source.closure != self.target.closure:
            raise ClosureMismatch("relation between frames over different closures")
        object.__setattr__(self, "pairs", frozenset((int(w), int(v)) for w, v in self.pairs))

    def image(self, w: int) -> int:
        """Targets of ``w`` as a bitmask."""
        m = 0
        for x, v in self.pairs:
            if x == w:
                m |= 1 << v
        return m

    def masks(self) -> list[int]:
        out = [0] * self.source.n
        for w, v in self.pairs:
            out[w] |= 1 << v
        return out

    def to_json(self) -> list[list[int]]:
        return [list(p) for p in sorted(self.pairs)]


def is_total(rel: FrameRelation) -> bool:
    return {w for w, _ in rel.pairs} == set(rel.source.worlds)


def is_sensible_relation(rel: FrameRelation) -> bool:
    c = rel.source.closure
    return all(c.sensible(rel.source.types[w], rel.target.types[v]) for w, v in rel.pairs)


def _continuity_gaps(src: TypedFrame, tgt: TypedFrame, masks: list[int]):
    for w in src.worlds:
        for v in bits(masks[w]):
            for w2 in bits(src.up[w]):
                if not masks[w2] & tgt.up[v]:
                    yield w, v, w2


def is_continuous(rel: FrameRelation) -> bool:
    """Every accessibility step at the source can be matched at the target."""
    return next(_continuity_gaps(rel.source, rel.target, rel.masks()), None) is None


def _confluences(src: TypedFrame, tgt: TypedFrame, pairs):
    for (w, v), (w2, v2) in itertools.product(sorted(pairs), repeat=2):
        if tgt.up[v] >> v2 & 1 and not src.up[w] >> w2 & 1:
            yield w, v, w2, v2


def is_non_confluent(rel: FrameRelation) -> bool:
    """Whenever ``g w v``, ``g w' v'`` and ``R v v'`` we have ``R w w'``."""
    return next(_confluences(rel.source, rel.target, rel.pairs), None) is None


def check_relation(rel: FrameRelation) -> ValidationReport:
    """All conditions for ``rel`` to witness a temporal successor."""
    src, tgt = rel.source, rel.target
    c = src.closure
    report = ValidationReport()
    for w, v in sorted(rel.pairs):
        if not (0 <= w < src.n and 0 <= v < tgt.n):
            report.add(w, "range", f"pair ({w}, {v}) names a missing world")
    if not report.ok:
        return report
    masks = rel.masks()
    for w in src.worlds:
        if not masks[w]:
            report.add(w, "total", f"world {w} has no successor")
    for w, v in sorted(rel.pairs):
        if not c.sensible(src.types[w], tgt.types[v]):
            report.add(w, "sensible", f"pair ({w}, {v}) is not sensible")
    for w, v, w2 in _continuity_gaps(src, tgt, masks):
        report.add(w, "continuity", f"R {w} {w2} has no match above {v}")
    for w, v, w2, v2 in _confluences(src, tgt, rel.pairs):
        report.add(w, "non-confluence", f"R {v} {v2} in the target but not R {w} {w2}")
    if isinstance(src, LocalFrame) and isinstance(tgt, LocalFrame):
        if not masks[src.root] >> tgt.root & 1:
            report.add(src.root, "root", "roots are not related")
    return report


# --------------------------------------------------------- successor search

def _largest_continuous(a: TypedFrame, b: TypedFrame) -> list[int]:
    """Greatest continuous relation made of sensible pairs, as target masks."""
    c = a.closure
    g = [sum(1 << v for v in b.worlds if c.sensible(a.types[w], b.types[v])) for w in a.worlds]
    changed = True
    while changed:
        changed = False
        for w in a.worlds:
            keep = g[w]
            for v in bits(g[w]):
                if any(not g[w2] & b.up[v] for w2 in bits(a.up[w])):
                    keep &= ~(1 << v)
            if keep != g[w]:
                g[w] = keep
                changed = True
    return g


def successor_relation(a: TypedFrame, b: TypedFrame, start: Iterable[tuple[int, int]]) -> Optional[list[int]]:
    """Smallest-first search for a continuous, non-confluent, sensible relation.

    The relation must contain the ``start`` pairs; it is returned as a list of
    target bitmasks indexed by source world, or ``None`` when none exists.
    """
    if a.closure != b.closure:
        raise ClosureMismatch("frames over different closures")
    G = _largest_continuous(a, b)
    down_a = [0] * a.n
    for w in a.worlds:
        for x in bits(a.up[w]):
            down_a[x] |= 1 << w
    down_b = [0] * b.n
    for v in b.worlds:
        for y in bits(b.up[v]):
            down_b[y] |= 1 << v
    g = [0] * a.n

    def fits(w: int, v: int) -> bool:
        if not G[w] >> v & 1:
            return False
        for x in a.worlds:
            if g[x] & down_b[v] and not down_a[w] >> x & 1:
                return False
            if g[x] & b.up[v] and not a.up[w] >> x & 1:
                return False
        return True

    for w, v in start:
        if not fits(w, v):
            return None
        g[w] |= 1 << v

    def search() -> bool:
        best = None
        for w in a.worlds:
            for v in bits(g[w]):
                for w2 in bits(a.up[w]):
                    if g[w2] & b.up[v]:
                        continue
                    cands = [v2 for v2 in bits(b.up[v]) if fits(w2, v2)]
                    if not cands:
                        return False
                    if best is None or len(cands) < len(best[1]):
                        best = (w2, cands)
        if best is None:
            return True
        w2, cands = best
        for v2 in cands:
            g[w2] |= 1 << v2
            if search():
                return True
            g[w2] &= ~(1 << v2)
        return False

    return list(g) if search() else None


def temporal_successor(a: LocalFrame, b: LocalFrame) -> Optional[FrameRelation]:
    """A witness relation for ``a`` having ``b`` as temporal successor, if any."""
    if a.closure != b.closure:
        raise ClosureMismatch("frames over different closures")
    if not a.closure.sensible(a.root_type, b.root_type):
        return None
    g = successor_relation(a, b, [(a.root, b.root)])
    if g is None:
        return None
    pairs = frozenset((w, v) for w in a.worlds for v in bits(g[w]))
    return FrameRelation(a, b, pairs)


@lru_cache(maxsize=1 << 17)
def _successor_cached(a: LocalFrame, b: LocalFrame) -> bool:
    return temporal_successor(a, b) is not None


def is_successor(a: LocalFrame, b: LocalFrame) -> bool:
    """Memoized yes/no ``a ⇉ b``; depends only on the isomorphism classes."""
    return _successor_cached(a, b)


# ------------------------------------------------------------- reduction

def _restrict(b: LocalFrame, keep: list[int]) -> LocalFrame:
    sub = b.restrict(keep)
    return LocalFrame(b.closure, sub.types, sub.up, keep.index(b.root))


def reduce_successor(a: LocalFrame, b: LocalFrame, bound: Optional[int] = None) -> LocalFrame:
    """Shrink ``b`` by deleting worlds while it stays a successor of ``a``.

    The result embeds into ``b`` and has norm at most ``bound`` (default
    ``‖a‖ + |sub|``). Raises ``ValueError`` if ``a ⇉ b`` fails or the bound
    cannot be reached.
    """
    if not is_successor(a, b):
        raise ValueError("reduce_successor needs a temporal successor")
    if bound is None:
        bound = a.norm + frame_length(a.closure)
    d = b
    while d.norm > bound:
        best = None
        seen = set()
        for x in d.worlds:
            if x == d.root:
                continue
            for drop in (1 << x, d.up[x]):
                if drop >> d.root & 1 or drop in seen:
                    continue
                seen.add(drop)
                keep = [w for w in d.worlds if not drop >> w & 1]
                e = _restrict(d, keep)
                if best is not None and (e.norm, e.n) >= (best.norm, best.n):
                    continue
                if validate_typed_frame(e, e.closure).ok and is_successor(a, e):
                    best = e
        if best is None:
            break
        d = best
    if d.norm > bound:
        d = _exhaustive_reduce(a, b, bound)
    return d


def _exhaustive_reduce(a: LocalFrame, b: LocalFrame, bound: int) -> LocalFrame:
    others = [w for w in b.worlds if w != b.root]
    if len(others) > 14:
        raise ValueError(f"no reduction to norm {bound} found by deletion")
    for size in range(0, len(others) + 1):
        for combo in itertools.combinations(others, size):
            e = _restrict(b, [b.root, *combo])
            if e.norm <= bound and validate_typed_frame(e, e.closure).ok and is_successor(a, e):
                return e
    raise ValueError(f"no sub-frame of norm {bound} is a successor")


# -------------------------------------------------------- adding a root

def _type_list(T) -> list[int]:
    out = []
    for t in T:
        t = _bits(t)
        if t not in out:
            out.append(t)
    return out


def oplus(T, A: Iterable[LocalFrame], t, closure: Optional[Closure] = None) -> LocalFrame:
    """Put a new root cluster ``T`` below disjoint copies of the frames in ``A``.

    The root world carries type ``t``.
    """
    types = _type_list(T)
    t = _bits(t)
    if t not in types:
        raise ValueError("the root type must belong to T")
    frames = sorted(set(A), key=lambda x: x.key)
    if closure is None:
        if frames:
            closure = frames[0].closure
        else:
            closure = next((x.closure for x in T if isinstance(x, PhiType)), None)
    if closure is None:
        raise ValueError("cannot tell the closure; pass closure=")
    order = [t] + sorted(x for x in types if x != t)
    all_types = list(order)
    ups = []
    offset = len(order)
    for f in frames:
        if f.closure != closure:
            raise ClosureMismatch("frame over a different closure")
        all_types.extend(f.types)
        ups.extend(m << offset for m in f.up)
        offset += f.n
    full = (1 << offset) - 1
    up = [full] * len(order) + ups
    return LocalFrame(closure, tuple(all_types), tuple(up), 0)


def is_coherent(T, A: Iterable[LocalFrame], closure: Optional[Closure] = None) -> bool:
    """Box formulas of ``T`` are exactly those true across ``T`` and the roots of ``A``."""
    types = _type_list(T)
    frames = list(A)
    c = closure or (frames[0].closure if frames else next(x.closure for x in T if isinstance(x, PhiType)))
    for b, ch in c.boxes:
        forced = all(s >> ch & 1 for s in types) and all(f.root_type >> b & 1 for f in frames)
        for t in types:
            if bool(t >> b & 1) != forced:
                return False
    return True


def admits(T, A: Iterable[LocalFrame], t, b: LocalFrame) -> bool:
    """Whether ``⟨T, A⟩`` with root type ``t`` admits ``b``.

    Either ``b ⇉ x`` for some ``x`` in ``A``, or every root-cluster type of
    ``b`` has a sensible partner in ``T`` and one representative per class of
    immediate subframes of ``b`` can be sent injectively into ``A`` along ``⇉``.
    """
    c = b.closure
    types = _type_list(T)
    t = _bits(t)
    frames = sorted(set(A), key=lambda x: x.key)
    if not c.sensible(b.root_type, t):
        return False
    if any(is_successor(b, x) for x in frames):
        return True
    for w in b.root_cluster:
        if not any(c.sensible(b.types[w], s) for s in types):
            return False
    classes = subframe_classes(b)
    if len(classes) > len(frames):
        return False
    graph = nx.Graph()
    left = [("c", i) for i in range(len(classes))]
    graph.add_nodes_from(left)
    graph.add_nodes_from(("a", j) for j in range(len(frames)))
    for i, cls in enumerate(classes):
        for j, x in enumerate(frames):
            if any(is_successor(rep, x) for rep in cls):
                graph.add_edge(("c", i), ("a", j))
    if not classes:
        return True
    matching = nx.bipartite.hopcroft_karp_matching(graph, top_nodes=left)
    return all(node in matching for node in left)
