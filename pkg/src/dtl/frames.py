"""Typed Kripke frames, rooted tree-like local frames and orders between them.

Worlds are numbered ``0..n-1``; the accessibility relation is stored as one
bitmask per world (``up[w]`` has bit ``v`` set iff ``R w v``) and types as the
closure's membership bit vectors.
"""

from __future__ import annotations

import itertools
import logging
from collections import Counter
from dataclasses import dataclass
from functools import cached_property, lru_cache
from typing import Callable, Iterable, Iterator, Optional, Sequence

from .formula import Closure, PhiType, to_text
from .report import Budget, ClosureMismatch, ValidationReport

log = logging.getLogger(__name__)


class FrameError(ValueError):
    """Structurally malformed frame (not a preorder, unrooted, not tree-like)."""


def bits(mask: int) -> Iterator[int]:
    while mask:
        low = mask & -mask
        yield low.bit_length() - 1
        mask ^= low


def popcount(mask: int) -> int:
    return bin(mask).count("1")


def close_preorder(n: int, pairs: Iterable[tuple[int, int]]) -> tuple[int, ...]:
    """Reflexive-transitive closure of a relation given as pairs."""
    up = [1 << i for i in range(n)]
    for i, j in pairs:
        up[i] |= 1 << j
    changed = True
    while changed:
        changed = False
        for i in range(n):
            new = up[i]
            for j in bits(up[i]):
                new |= up[j]
            if new != up[i]:
                up[i] = new
                changed = True
    return tuple(up)


@dataclass(frozen=True, eq=False)
class TypedFrame:
    """A finite set of typed worlds with an accessibility relation.

    Nothing is checked on construction; see :func:`validate_typed_frame`.
    """

    closure: Closure
    types: tuple[int, ...]
    up: tuple[int, ...]

    @classmethod
    def from_pairs(cls, closure, types, pairs, close=False):
        types = tuple(t.bits if isinstance(t, PhiType) else t for t in types)
        n = len(types)
        if close:
            up = close_preorder(n, pairs)
        else:
            up = [0] * n
            for i, j in pairs:
                up[i] |= 1 << j
            up = tuple(up)
        return cls(closure, types, up)

    @property
    def n(self) -> int:
        return len(self.types)

    @property
    def worlds(self) -> range:
        return range(len(self.types))

    def R(self, w: int, v: int) -> bool:
        return bool(self.up[w] >> v & 1)

    def pairs(self) -> list[tuple[int, int]]:
        return [(w, v) for w in self.worlds for v in bits(self.up[w])]

    def type_at(self, w: int) -> PhiType:
        return PhiType(self.closure, self.types[w])

    def is_preorder(self) -> bool:
        for w in self.worlds:
            if not self.up[w] >> w & 1:
                return False
            for v in bits(self.up[w]):
                if self.up[v] & ~self.up[w]:
                    return False
        return True

    def restrict(self, keep: Sequence[int]) -> TypedFrame:
        pos = {w: i for i, w in enumerate(keep)}
        up = []
        for w in keep:
            m = 0
            for v in bits(self.up[w]):
                if v in pos:
                    m |= 1 << pos[v]
            up.append(m)
        return TypedFrame(self.closure, tuple(self.types[w] for w in keep), tuple(up))


def validate_typed_frame(frame: TypedFrame, closure: Closure) -> ValidationReport:
    """Check the preorder axioms and the box condition at every world."""
    if frame.closure != closure:
        raise ClosureMismatch("frame types are over a different closure")
    report = ValidationReport()
    c = closure
    for w in frame.worlds:
        problems = c.check_bits(frame.types[w])
        for p in problems:
            report.add(w, "type", p)
        if not frame.up[w] >> w & 1:
            report.add(w, "reflexive", f"R {w} {w} missing")
        for v in bits(frame.up[w]):
            for u in bits(frame.up[v] & ~frame.up[w]):
                report.add(w, "transitive", f"R {w} {v} and R {v} {u} but not R {w} {u}")
    for w in frame.worlds:
        everywhere = -1
        for v in bits(frame.up[w]):
            everywhere &= frame.types[v]
        t = frame.types[w]
        for b, ch in c.boxes:
            holds = bool(t >> b & 1)
            should = bool(everywhere >> ch & 1)
            if holds != should:
                what = "holds but a successor refutes the body" if holds else "fails but the body holds at every successor"
                report.add(w, "box", f"{to_text(c.signed[b])} {what}")
    return report


# ------------------------------------------------------------------ shapes

class Shape:
    """Unrooted cluster tree: a multiset of types with child subtrees.

    ``everywhere`` is the intersection of all types in the subtree, so a box
    formula at the bottom cluster holds iff its body's bit is set there.
    """

    __slots__ = ("types", "children", "key", "size", "hgt", "leaves", "dpt", "everywhere")

    def __init__(self, types: tuple[int, ...], children: tuple[Shape, ...]):
        children = tuple(sorted(children, key=lambda s: s.key))
        self.types = tuple(sorted(types))
        self.children = children
        self.key = (self.types, tuple(ch.key for ch in children))
        self.size = len(types) + sum(ch.size for ch in children)
        self.hgt = 1 + max((ch.hgt for ch in children), default=0)
        self.leaves = sum(ch.leaves for ch in children) or 1
        self.dpt = max([len(types)] + [ch.dpt for ch in children])
        ev = -1
        for t in types:
            ev &= t
        for ch in children:
            ev &= ch.everywhere
        self.everywhere = ev

    @property
    def norm(self) -> int:
        return max(self.hgt, self.leaves, self.dpt)

    def __repr__(self) -> str:
        return f"Shape{self.key}"


def shape_from_key(key) -> Shape:
    types, kids = key
    return Shape(types, tuple(shape_from_key(k) for k in kids))


# ------------------------------------------------------------- local frames

@dataclass(frozen=True, eq=False)
class LocalFrame(TypedFrame):
    """A rooted, tree-like typed frame in which the root sees every world.

    Two local frames compare equal iff they are isomorphic as rooted typed
    frames; the box condition is not enforced here.
    """

    root: int = 0

    def __post_init__(self):
        n = len(self.types)
        if len(self.up) != n or not 0 <= self.root < n:
            raise FrameError("root or relation does not match the worlds")
        if not self.is_preorder():
            raise FrameError("accessibility is not reflexive and transitive")
        if self.up[self.root] != (1 << n) - 1:
            missing = sorted(bits(((1 << n) - 1) & ~self.up[self.root]))
            raise FrameError(f"worlds {missing} are not reachable from the root")
        down = [0] * n
        for w in range(n):
            for v in bits(self.up[w]):
                down[v] |= 1 << w
        for w in range(n):
            for u in bits(down[w]):
                if down[w] & ~(self.up[u] | down[u]):
                    raise FrameError("cluster order is not a tree")

    @classmethod
    def from_pairs(cls, closure, types, pairs, root=0, close=True):
        f = TypedFrame.from_pairs(closure, types, pairs, close=close)
        return cls(closure, f.types, f.up, root)

    @classmethod
    def from_shape(cls, closure: Closure, shape: Shape, root_type: int) -> LocalFrame:
        types: list[int] = []
        up: list[int] = []

        def place(s: Shape, first: Optional[int]) -> int:
            order = list(s.types)
            if first is not None:
                order.remove(first)
                order.insert(0, first)
            start = len(types)
            for t in order:
                types.append(t)
                up.append(0)
            mine = ((1 << len(types)) - 1) & ~((1 << start) - 1)
            above = 0
            for ch in s.children:
                above |= place(ch, None)
            for w in range(start, start + len(order)):
                up[w] = mine | above
            return mine | above

        place(shape, root_type)
        return cls(closure, tuple(types), tuple(up), 0)

    @classmethod
    def from_key(cls, closure: Closure, key) -> LocalFrame:
        root_type, shape_key = key
        return cls.from_shape(closure, shape_from_key(shape_key), root_type)

    # --- cluster structure

    @cached_property
    def cluster_of(self) -> tuple[int, ...]:
        ids: dict[int, int] = {}
        out = []
        for w in self.worlds:
            out.append(ids.setdefault(self.up[w], len(ids)))
        return tuple(out)

    @cached_property
    def clusters(self) -> tuple[tuple[int, ...], ...]:
        groups: dict[int, list[int]] = {}
        for w, c in enumerate(self.cluster_of):
            groups.setdefault(c, []).append(w)
        return tuple(tuple(groups[c]) for c in sorted(groups))

    @cached_property
    def cluster_parent(self) -> tuple[Optional[int], ...]:
        reps = [c[0] for c in self.clusters]
        parent: list[Optional[int]] = []
        for d, rd in enumerate(reps):
            best = None
            for c, rc in enumerate(reps):
                if c != d and self.up[rc] >> rd & 1:
                    if best is None or popcount(self.up[rc]) < popcount(self.up[reps[best]]):
                        best = c
            parent.append(best)
        return tuple(parent)

    @cached_property
    def cluster_children(self) -> tuple[tuple[int, ...], ...]:
        kids: list[list[int]] = [[] for _ in self.clusters]
        for d, p in enumerate(self.cluster_parent):
            if p is not None:
                kids[p].append(d)
        return tuple(tuple(k) for k in kids)

    @property
    def root_cluster(self) -> tuple[int, ...]:
        return self.clusters[self.cluster_of[self.root]]

    @cached_property
    def shape(self) -> Shape:
        def build(c: int) -> Shape:
            return Shape(tuple(self.types[w] for w in self.clusters[c]),
                         tuple(build(d) for d in self.cluster_children[c]))

        return build(self.cluster_of[self.root])

    @cached_property
    def key(self):
        """Canonical form: equal keys iff isomorphic as rooted typed frames."""
        return (self.types[self.root], self.shape.key)

    def canonical(self) -> LocalFrame:
        return LocalFrame.from_shape(self.closure, self.shape, self.types[self.root])

    def __eq__(self, other) -> bool:
        if not isinstance(other, LocalFrame):
            return NotImplemented
        return self.closure == other.closure and self.key == other.key

    def __hash__(self) -> int:
        return hash(self.key)

    # --- measures

    @property
    def hgt(self) -> int:
        return self.shape.hgt

    @property
    def wdt(self) -> int:
        return self.shape.leaves

    @property
    def dpt(self) -> int:
        return self.shape.dpt

    @property
    def norm(self) -> int:
        return self.shape.norm

    @property
    def root_type(self) -> int:
        return self.types[self.root]

    def t(self) -> PhiType:
        return self.type_at(self.root)

    def __repr__(self) -> str:
        return f"LocalFrame(n={self.n}, root={self.root}, key={self.key})"

    def describe(self) -> str:
        c = self.closure
        lines = []
        for w in self.worlds:
            succ = ",".join(str(v) for v in bits(self.up[w]) if v != w)
            mark = "*" if w == self.root else " "
            lines.append(f"{mark}{w}: {PhiType(c, self.types[w])} -> [{succ}]")
        return "\n".join(lines)


@dataclass(frozen=True)
class FrameNorm:
    hgt: int
    wdt: int
    dpt: int

    @property
    def norm(self) -> int:
        return max(self.hgt, self.wdt, self.dpt)


def measures(a: LocalFrame) -> FrameNorm:
    return FrameNorm(a.hgt, a.wdt, a.dpt)


def clusters(frame: TypedFrame) -> list[tuple[int, ...]]:
    """Equivalence classes of mutual accessibility."""
    groups: dict[int, list[int]] = {}
    for w in frame.worlds:
        groups.setdefault(frame.up[w], []).append(w)
    return sorted(tuple(g) for g in groups.values())


def subframe(a: LocalFrame, v: int) -> LocalFrame:
    """The frame of everything ``v`` sees, rooted at ``v``."""
    keep = list(bits(a.up[v]))
    sub = a.restrict(keep)
    return LocalFrame(a.closure, sub.types, sub.up, keep.index(v))


# ------------------------------------------------------ subframe orders

def _subframe_keys(a: LocalFrame) -> list:
    return [subframe(a, v).key for v in a.worlds]


def preceq(b: LocalFrame, a: LocalFrame) -> bool:
    """``b`` is isomorphic to the subframe of ``a`` at some world."""
    if b.closure != a.closure:
        raise ClosureMismatch("frames over different closures")
    if b.n > a.n:
        return False
    return b.key in set(_subframe_keys(a))


def sim(a: LocalFrame, b: LocalFrame) -> bool:
    return preceq(a, b) and preceq(b, a)


def prec(b: LocalFrame, a: LocalFrame) -> bool:
    return preceq(b, a) and not preceq(a, b)


def prec1(b: LocalFrame, a: LocalFrame) -> bool:
    """Immediate strict subframe: nothing lies strictly between."""
    if not prec(b, a):
        return False
    seen = set()
    for v in a.worlds:
        c = subframe(a, v)
        if c.key in seen:
            continue
        seen.add(c.key)
        if prec(b, c) and prec(c, a):
            return False
    return True


def subframe_classes(a: LocalFrame) -> list[list[LocalFrame]]:
    """The ~-classes of immediate strict subframes of ``a``.

    Each class lists its pairwise non-isomorphic members, smallest key first.
    """
    n = a.n
    keys = _subframe_keys(a)
    below = [{keys[x] for x in bits(a.up[v])} for v in range(n)]
    by_key: dict = {}
    for v in range(n):
        by_key.setdefault(keys[v], v)

    def le(v, u):  # a^v is a subframe of a^u
        return keys[v] in below[u]

    def lt(v, u):
        return le(v, u) and not le(u, v)

    root = a.root
    strict = [v for v in by_key.values() if lt(v, root)]
    immediate = [v for v in strict if not any(lt(v, u) for u in strict if lt(u, root))]
    classes: list[list[int]] = []
    for v in sorted(immediate, key=lambda x: keys[x]):
        for cls in classes:
            if le(v, cls[0]) and le(cls[0], v):
                cls.append(v)
                break
        else:
            classes.append([v])
    out = [[subframe(a, v) for v in cls] for cls in classes]
    out.sort(key=lambda cls: cls[0].key)
    return out


def subframe_representatives(a: LocalFrame) -> list[LocalFrame]:
    return [cls[0] for cls in subframe_classes(a)]


# ------------------------------------------------------------- embedding

def embeds(a: LocalFrame, b: LocalFrame) -> Optional[tuple[int, ...]]:
    """Root-preserving, type-preserving, R-exact injection of ``a`` into ``b``.

    Returns the map as a tuple indexed by the worlds of ``a``, or ``None``.
    """
    if a.closure != b.closure:
        raise ClosureMismatch("frames over different closures")
    if a.root_type != b.root_type or a.n > b.n:
        return None
    if a.hgt > b.hgt or a.wdt > b.wdt or a.dpt > b.dpt:
        return None
    need, have = Counter(a.types), Counter(b.types)
    if any(have[t] < k for t, k in need.items()):
        return None
    # root cluster first, then clusters outward, biggest clusters early
    order = [a.root] + [w for w in a.root_cluster if w != a.root]
    frontier = list(a.cluster_children[a.cluster_of[a.root]])
    while frontier:
        frontier.sort(key=lambda c: -len(a.clusters[c]))
        c = frontier.pop(0)
        order.extend(a.clusters[c])
        frontier.extend(a.cluster_children[c])
    image = [-1] * a.n
    used = 0

    def ok(w: int, v: int) -> bool:
        for u, eu in zip(order, (image[u] for u in order)):
            if eu < 0:
                break
            if bool(a.up[u] >> w & 1) != bool(b.up[eu] >> v & 1):
                return False
            if bool(a.up[w] >> u & 1) != bool(b.up[v] >> eu & 1):
                return False
        return True

    def search(i: int) -> bool:
        nonlocal used
        if i == len(order):
            return True
        w = order[i]
        cands = [b.root] if w == a.root else [v for v in b.worlds if not used >> v & 1]
        for v in cands:
            if b.types[v] != a.types[w] or not ok(w, v):
                continue
            image[w] = v
            used |= 1 << v
            if search(i + 1):
                return True
            image[w] = -1
            used &= ~(1 << v)
        return False

    return tuple(image) if search(0) else None


@lru_cache(maxsize=1 << 16)
def _embeds_cached(a: LocalFrame, b: LocalFrame) -> bool:
    return embeds(a, b) is not None


def is_embedded(a: LocalFrame, b: LocalFrame) -> bool:
    """Memoized yes/no version of :func:`embeds` (iso-invariant)."""
    return _embeds_cached(a, b)


# ------------------------------------------------------------ enumeration

def frame_length(closure: Closure) -> int:
    """The size measure used in all norm bounds: distinct subformulas."""
    return closure.length


def stratum(a: LocalFrame) -> int:
    """Least K with the frame inside the K-th bounded stratum."""
    n = frame_length(a.closure)
    return max(0, -(-a.norm // n) - 1)


class ShapeSpace:
    """Lazy, memoized generator of valid cluster trees over one closure."""

    def __init__(self, closure: Closure):
        self.closure = closure
        c = closure
        # a type can sit in a cluster only if its boxes hold reflexively
        self.types = [t for t in c.all_types if c.boxes_true(t) & t == (t & c.box_mask)]
        self.by_sig: dict[int, list[int]] = {}
        for t in self.types:
            self.by_sig.setdefault(t & c.box_mask, []).append(t)
        self._memo: dict[tuple[int, int], list[Shape]] = {}

    def clusters(self, k: int, under: int, must: Optional[frozenset] = None) -> Iterator[tuple[int, ...]]:
        """Type multisets of size ``k`` forming a coherent cluster above ``under``."""
        c = self.closure
        for sig, group in sorted(self.by_sig.items()):
            for combo in itertools.combinations_with_replacement(group, k):
                if must is not None and not must.intersection(combo):
                    continue
                ev = under
                for t in combo:
                    ev &= t
                if c.boxes_true(ev) == sig:
                    yield combo

    def _forests(self, m: int, bound: int, limit: tuple) -> Iterator[tuple[Shape, ...]]:
        """Multisets of shapes with ``m`` worlds in total, non-increasing order."""
        if m == 0:
            yield ()
            return
        for size in range(min(m, limit[0]), 0, -1):
            pool = self.shapes(size, bound)
            top = len(pool) if size < limit[0] else limit[1] + 1
            for i in range(min(top, len(pool)) - 1, -1, -1):
                s = pool[i]
                for rest in self._forests(m - size, bound, (size, i)):
                    yield (s,) + rest

    def shapes(self, n: int, bound: int) -> list[Shape]:
        """All valid shapes with exactly ``n`` worlds and norm at most ``bound``."""
        memo = self._memo.get((n, bound))
        if memo is None:
            memo = sorted(self._iter_shapes(n, bound, None), key=lambda s: s.key)
            self._memo[(n, bound)] = memo
        return memo

    def _iter_shapes(self, n: int, bound: int, must, budget: Optional[Budget] = None) -> Iterator[Shape]:
        for k in range(1, min(n, bound) + 1):
            for forest in self._forests(n - k, bound, (n, 1 << 62)):
                if budget is not None:
                    budget.spend()
                if sum(s.leaves for s in forest) > bound:
                    continue
                if forest and max(s.hgt for s in forest) + 1 > bound:
                    continue
                under = -1
                for s in forest:
                    under &= s.everywhere
                for combo in self.clusters(k, under, must):
                    yield Shape(combo, forest)

    def iter_frames(self, max_norm: int, root_types: Optional[Iterable[int]] = None,
                    max_worlds: Optional[int] = None, budget: Optional[Budget] = None) -> Iterator[LocalFrame]:
        """Stream frames by size; ``budget`` is charged per candidate examined.

        The charge does not depend on what earlier calls left in the memo.
        """
        must = None if root_types is None else frozenset(root_types)
        if must is not None and not must:
            return
        top = max_norm ** 3
        if max_worlds is not None:
            top = min(top, max_worlds)
        for n in range(1, top + 1):
            for s in self._iter_shapes(n, max_norm, must, budget):
                for rt in sorted(set(s.types)):
                    if must is not None and rt not in must:
                        continue
                    if budget is not None:
                        budget.spend()
                    yield LocalFrame.from_shape(self.closure, s, rt)


@lru_cache(maxsize=64)
def shape_space(closure: Closure) -> ShapeSpace:
    return ShapeSpace(closure)


def enumerate_frames(c: Closure, K: int, pred: Optional[Callable[[LocalFrame], bool]] = None,
                     budget: Optional[Budget] = None) -> Iterator[LocalFrame]:
    """Stream valid tree-like local frames with norm at most ``(K+1)*|sub|``.

    Frames come one per isomorphism class, ordered by number of worlds, then
    by canonical key, then by root type.
    """
    if K < 0:
        raise ValueError("K must be non-negative")
    bound = (K + 1) * frame_length(c)
    for a in shape_space(c).iter_frames(bound, budget=budget):
        if pred is None or pred(a):
            yield a
