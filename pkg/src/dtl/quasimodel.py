"""Typed frames with a transition relation, and paths through them."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Optional, Sequence

from .finite_model import FiniteDynModel, type_bits
from .formula import Formula, PhiType, closure_of, to_text
from .frames import TypedFrame, bits, validate_typed_frame
from .report import ValidationReport


@dataclass(frozen=True, eq=False)
class Quasimodel:
    frame: TypedFrame
    g: frozenset
    labels: Optional[tuple[str, ...]] = None

    def __post_init__(self):
        object.__setattr__(self, "g", frozenset((int(w), int(v)) for w, v in self.g))

    @property
    def closure(self):
        return self.frame.closure

    @property
    def n(self) -> int:
        return self.frame.n

    @property
    def worlds(self) -> range:
        return self.frame.worlds

    def name(self, w: int):
        return self.labels[w] if self.labels else w

    def type_at(self, w: int) -> PhiType:
        return self.frame.type_at(w)

    @cached_property
    def succ(self) -> tuple[int, ...]:
        """g-successors of each world as bitmasks."""
        out = [0] * self.n
        for w, v in self.g:
            if 0 <= w < self.n and 0 <= v < self.n:
                out[w] |= 1 << v
        return tuple(out)

    @cached_property
    def reach(self) -> tuple[int, ...]:
        """Worlds reachable by zero or more g-steps."""
        out = [(1 << w) | self.succ[w] for w in self.worlds]
        changed = True
        while changed:
            changed = False
            for w in self.worlds:
                new = out[w]
                for v in bits(out[w]):
                    new |= out[v]
                if new != out[w]:
                    out[w] = new
                    changed = True
        return tuple(out)

    def R(self, w: int, v: int) -> bool:
        return self.frame.R(w, v)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Quasimodel):
            return NotImplemented
        return (self.frame.closure == other.frame.closure and self.frame.types == other.frame.types
                and self.frame.up == other.frame.up and self.g == other.g)

    def __hash__(self) -> int:
        return hash((self.frame.types, self.frame.up, self.g))


def validate_quasimodel(Q: Quasimodel) -> ValidationReport:
    """Every failed condition, itemized by world and clause."""
    c = Q.closure
    F = Q.frame
    report = ValidationReport()
    for v in validate_typed_frame(F, c):
        report.add(Q.name(v.world), v.clause, v.detail)
    for w, v in sorted(Q.g):
        if not (0 <= w < Q.n and 0 <= v < Q.n):
            report.add(w, "range", f"g pair ({w}, {v}) names a missing world")
    if not report.ok and "range" in report.clauses():
        return report
    for w in Q.worlds:
        if not Q.succ[w]:
            report.add(Q.name(w), "total", "no g-successor")
    for w, v in sorted(Q.g):
        if not c.sensible(F.types[w], F.types[v]):
            report.add(Q.name(w), "sensible", f"g {Q.name(w)} {Q.name(v)} is not a sensible pair")
    for w, v in sorted(Q.g):
        for w2 in bits(F.up[w]):
            if not Q.succ[w2] & F.up[v]:
                report.add(Q.name(w), "continuity",
                           f"g {Q.name(w)} {Q.name(v)} and R {Q.name(w)} {Q.name(w2)} cannot be completed")
    for w in Q.worlds:
        t = F.types[w]
        for ev, wit in c.eventualities:
            found = any(F.types[v] >> wit & 1 for v in bits(Q.reach[w]))
            if t >> ev & 1 and not found:
                report.add(Q.name(w), "omega", f"{to_text(c.signed[ev])} holds but no reachable world has "
                                               f"{to_text(c.signed[wit])}")
            elif found and not t >> ev & 1:
                report.add(Q.name(w), "omega", f"{to_text(c.signed[wit])} is reachable but "
                                               f"{to_text(c.signed[ev])} fails")
    return report


def satisfies(Q: Quasimodel, psi: Formula) -> Optional[int]:
    """First world whose type contains ``psi``; ``KeyError`` if outside the closure."""
    i = Q.closure.idx(psi)
    for w in Q.worlds:
        if Q.frame.types[w] >> i & 1:
            return w
    return None


# ----------------------------------------------------------------- paths

@dataclass(frozen=True)
class LassoPath:
    """The infinite path ``prefix`` followed by ``cycle`` repeated forever."""

    prefix: tuple[int, ...]
    cycle: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "prefix", tuple(self.prefix))
        object.__setattr__(self, "cycle", tuple(self.cycle))
        if not self.cycle:
            raise ValueError("a lasso needs a nonempty cycle")

    def at(self, n: int) -> int:
        if n < len(self.prefix):
            return self.prefix[n]
        return self.cycle[(n - len(self.prefix)) % len(self.cycle)]

    def unroll(self, length: int) -> list[int]:
        return [self.at(i) for i in range(length)]

    def to_json(self) -> dict:
        return {"prefix": list(self.prefix), "cycle": list(self.cycle)}


def shift(p: LassoPath) -> LassoPath:
    if p.prefix:
        return LassoPath(p.prefix[1:], p.cycle)
    return LassoPath((), p.cycle[1:] + p.cycle[:1])


def is_g_path(Q: Quasimodel, path: Sequence[int]) -> bool:
    return all(0 <= w < Q.n for w in path) and all(Q.succ[a] >> b & 1 for a, b in zip(path, path[1:]))


def is_lasso_path(Q: Quasimodel, p: LassoPath) -> bool:
    return is_g_path(Q, p.unroll(len(p.prefix) + len(p.cycle) + 1))


def is_realizing(Q: Quasimodel, p: LassoPath) -> bool:
    """Every eventuality along the lasso is discharged later on it."""
    if not is_lasso_path(Q, p):
        return False
    c = Q.closure
    span = len(p.prefix) + len(p.cycle)
    seq = p.unroll(span + len(p.cycle))
    for n in range(span):
        t = Q.frame.types[seq[n]]
        for ev, wit in c.eventualities:
            if t >> ev & 1 and not any(Q.frame.types[seq[k]] >> wit & 1 for k in range(n, len(seq))):
                return False
    return True


def _shortest_to(Q: Quasimodel, start: int, wit: int) -> Optional[list[int]]:
    """Shortest g-path from ``start`` to a world containing bit ``wit``."""
    prev = {start: None}
    queue = deque([start])
    while queue:
        w = queue.popleft()
        if Q.frame.types[w] >> wit & 1:
            path = []
            while w is not None:
                path.append(w)
                w = prev[w]
            return path[::-1]
        for v in bits(Q.succ[w]):
            if v not in prev:
                prev[v] = w
                queue.append(v)
    return None


def extend_to_realizing(Q: Quasimodel, path: Sequence[int]) -> LassoPath:
    """Extend a finite g-path to a realizing lasso.

    Each round starts at the current last world, chases its eventualities in
    closure order along shortest witness paths and moves at least one step.
    A round start seen before closes the cycle.
    """
    path = list(path)
    if not path or not is_g_path(Q, path):
        raise ValueError("not a g-path")
    c = Q.closure
    seq = list(path)
    starts: dict[int, int] = {}
    while True:
        x = seq[-1]
        if x in starts:
            p = starts[x]
            return LassoPath(seq[:p], seq[p:-1])
        starts[x] = len(seq) - 1
        begin = len(seq)
        for ev, wit in c.eventualities:
            if not Q.frame.types[x] >> ev & 1:
                continue
            if any(Q.frame.types[w] >> wit & 1 for w in seq[begin - 1:]):
                continue
            leg = _shortest_to(Q, seq[-1], wit)
            if leg is None:
                raise ValueError(f"{to_text(c.signed[ev])} at world {Q.name(x)} has no reachable witness")
            seq.extend(leg[1:])
        if len(seq) == begin:
            if not Q.succ[seq[-1]]:
                raise ValueError(f"world {Q.name(seq[-1])} has no g-successor")
            seq.append(next(bits(Q.succ[seq[-1]])))


def lift_path(Q: Quasimodel, path: Sequence[int], v0: int) -> list[int]:
    """A g-path starting at ``v0`` that stays R-above ``path`` pointwise."""
    path = list(path)
    if not path or not is_g_path(Q, path) or not Q.R(path[0], v0):
        raise ValueError("need a g-path whose first world sees v0")
    out = [v0]
    for w, w2 in zip(path, path[1:]):
        cands = Q.succ[out[-1]] & Q.frame.up[w2]
        if not cands:
            raise ValueError(f"no square completion above g {w} {w2}")
        out.append(next(bits(cands)))
    return out


def basis_member(Q: Quasimodel, center: LassoPath, N: int, candidate: LassoPath) -> bool:
    """Whether ``candidate`` lies in the basic neighbourhood of depth ``N``."""
    return all(Q.R(center.at(n), candidate.at(n)) for n in range(N + 1))


# ------------------------------------------------------ from finite models

def from_finite_model(M: FiniteDynModel, phi: Formula) -> Quasimodel:
    """Points as worlds, the order as R, evaluated types, and the graph of f as g."""
    c = closure_of(phi)
    frame = TypedFrame(c, tuple(type_bits(M, c)), M.up)
    return Quasimodel(frame, frozenset((x, M.f[x]) for x in M.points))


def quasimodel_from_pairs(closure, types: Sequence, order: Iterable[tuple[int, int]],
                          g: Iterable[tuple[int, int]], labels=None, close: bool = True) -> Quasimodel:
    frame = TypedFrame.from_pairs(closure, types, order, close=close)
    return Quasimodel(frame, frozenset(g), tuple(labels) if labels else None)
