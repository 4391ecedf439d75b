"""Finite Aleksandroff dynamic topological models.

A model is a preorder on points ``0..n-1`` (open sets are the up-sets), a
monotone self-map ``f`` and a valuation of the variables.  Sets of points are
bitmasks throughout.
"""

from __future__ import annotations

import enum
import itertools
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable, Iterator, Mapping, Optional

from .formula import And, Box, Closure, Formula, Henceforth, Next, Not, PhiType, Var, closure_of, variables
from .frames import TypedFrame, bits, close_preorder
from .report import ClosureMismatch, ValidationReport

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class FiniteDynModel:
    n: int
    up: tuple[int, ...]
    f: tuple[int, ...]
    valuation: tuple[tuple[str, int], ...] = ()

    @classmethod
    def build(cls, n: int, order: Iterable[tuple[int, int]], f: Iterable[int],
              valuation: Mapping[str, Iterable[int]] | None = None, close: bool = True) -> FiniteDynModel:
        if close:
            up = close_preorder(n, order)
        else:
            up = [1 << i for i in range(n)]
            for i, j in order:
                up[i] |= 1 << j
            up = tuple(up)
        val = tuple(sorted((name, sum(1 << i for i in set(pts))) for name, pts in (valuation or {}).items()))
        return cls(n, tuple(up), tuple(f), val)

    @property
    def points(self) -> range:
        return range(self.n)

    @property
    def full(self) -> int:
        return (1 << self.n) - 1

    def leq(self, x: int, y: int) -> bool:
        return bool(self.up[x] >> y & 1)

    def V(self, name: str) -> int:
        for k, m in self.valuation:
            if k == name:
                return m
        return 0

    def order_pairs(self) -> list[tuple[int, int]]:
        return [(x, y) for x in self.points for y in bits(self.up[x])]

    def to_json(self) -> dict:
        return {
            "points": self.n,
            "order": [list(p) for p in self.order_pairs()],
            "f": list(self.f),
            "valuation": {k: list(bits(m)) for k, m in self.valuation},
        }


def validate_model(M: FiniteDynModel) -> ValidationReport:
    report = ValidationReport()
    if len(M.up) != M.n or len(M.f) != M.n:
        report.add(None, "shape", "order or map has the wrong number of points")
        return report
    for x in M.points:
        if not 0 <= M.f[x] < M.n:
            report.add(x, "map", f"f({x}) = {M.f[x]} is not a point")
    if not report.ok:
        return report
    for x in M.points:
        if not M.up[x] >> x & 1:
            report.add(x, "reflexive", f"{x} <= {x} missing")
        for y in bits(M.up[x]):
            if M.up[y] & ~M.up[x]:
                report.add(x, "transitive", f"{x} <= {y} but the order is not transitive there")
            if not M.leq(M.f[x], M.f[y]):
                report.add(x, "continuity", f"{x} <= {y} but not f({x}) <= f({y})")
    for name, m in M.valuation:
        if m >> M.n:
            report.add(None, "valuation", f"{name} names points outside the model")
    return report


# ------------------------------------------------------------ evaluation

def interior(M: FiniteDynModel, s: int) -> int:
    return sum(1 << x for x in M.points if M.up[x] & ~s == 0)


def preimage(M: FiniteDynModel, s: int) -> int:
    return sum(1 << x for x in M.points if s >> M.f[x] & 1)


def henceforth_orbit(M: FiniteDynModel, s: int) -> int:
    """Points whose whole forward orbit stays inside ``s``."""
    out = 0
    for x in M.points:
        y, seen, ok = x, 0, True
        while not seen >> y & 1:
            if not s >> y & 1:
                ok = False
                break
            seen |= 1 << y
            y = M.f[y]
        if ok:
            out |= 1 << x
    return out


def henceforth_fixpoint(M: FiniteDynModel, s: int) -> int:
    """Greatest ``S`` inside ``s`` with ``S`` contained in its own preimage."""
    cur = s
    while True:
        nxt = cur & preimage(M, cur)
        if nxt == cur:
            return cur
        cur = nxt


def _eval_masks(M: FiniteDynModel, c: Closure, star=henceforth_orbit) -> list[int]:
    masks: dict[int, int] = {}

    def val(f: Formula) -> int:
        i = c.index[f]
        if i in masks:
            return masks[i]
        if isinstance(f, Var):
            m = M.V(f.name)
        elif isinstance(f, Not):
            m = M.full & ~val(f.child)
        elif isinstance(f, And):
            m = val(f.left) & val(f.right)
        elif isinstance(f, Box):
            m = interior(M, val(f.child))
        elif isinstance(f, Next):
            m = preimage(M, val(f.child))
        elif isinstance(f, Henceforth):
            m = star(M, val(f.child))
        else:
            raise TypeError(f"unknown formula node {f!r}")
        masks[i] = m
        return m

    return [val(f) for f in c.signed]


def evaluate(M: FiniteDynModel, phi: Formula) -> dict[Formula, frozenset]:
    """Truth sets of every member of the signed closure of ``phi``."""
    c = closure_of(phi)
    masks = _eval_masks(M, c)
    return {f: frozenset(bits(m)) for f, m in zip(c.signed, masks)}


def type_bits(M: FiniteDynModel, c: Closure) -> list[int]:
    masks = _eval_masks(M, c)
    out = []
    for x in M.points:
        out.append(sum(1 << i for i, m in enumerate(masks) if m >> x & 1))
    return out


def type_of(M: FiniteDynModel, x: int, phi: Formula) -> PhiType:
    c = closure_of(phi)
    return PhiType(c, type_bits(M, c)[x])


# --------------------------------------------------- model enumeration

def _extend_preorders(prev: list[tuple[int, ...]], n: int) -> list[tuple[int, ...]]:
    """All labelled preorders on ``n+1`` points extending those on ``n``."""
    out = []
    full = (1 << n) - 1
    for up in prev:
        down = [0] * n
        for x in range(n):
            for y in bits(up[x]):
                down[y] |= 1 << x
        for D in range(full + 1):
            if any(down[x] & ~D for x in bits(D)):
                continue
            for U in range(full + 1):
                if any(up[y] & ~U for y in bits(U)):
                    continue
                if any(U & ~up[x] for x in bits(D)):
                    continue
                new = [m | (1 << n) if D >> x & 1 else m for x, m in enumerate(up)]
                new.append(U | (1 << n))
                # worlds above U inherit nothing new: U is up-closed already
                out.append(tuple(new))
    return out


@lru_cache(maxsize=None)
def labelled_preorders(n: int) -> tuple[tuple[int, ...], ...]:
    cur: list[tuple[int, ...]] = [()]
    for k in range(n):
        cur = _extend_preorders(cur, k)
    return tuple(cur)


def _permute(up: tuple[int, ...], perm: tuple[int, ...]) -> tuple[int, ...]:
    n = len(up)
    out = [0] * n
    for x in range(n):
        m = 0
        for y in bits(up[x]):
            m |= 1 << perm[y]
        out[perm[x]] = m
    return tuple(out)


def canonical_preorder(up: tuple[int, ...]) -> tuple[int, ...]:
    return min(_permute(up, p) for p in itertools.permutations(range(len(up))))


@lru_cache(maxsize=None)
def preorder_classes(n: int) -> tuple[tuple[int, ...], ...]:
    """One preorder per isomorphism class, in a fixed order."""
    return tuple(sorted({canonical_preorder(up) for up in labelled_preorders(n)}))


def monotone_maps(up: tuple[int, ...]) -> Iterator[tuple[int, ...]]:
    n = len(up)
    for f in itertools.product(range(n), repeat=n):
        if all(up[f[x]] >> f[y] & 1 for x in range(n) for y in bits(up[x])):
            yield f


def iter_models(n: int, names: list[str], preorder=None) -> Iterator[FiniteDynModel]:
    """Every model on ``n`` points over ``names``, preorders up to isomorphism."""
    orders = preorder_classes(n) if preorder is None else [preorder]
    for up in orders:
        for f in monotone_maps(up):
            for vals in itertools.product(range(1 << n), repeat=len(names)):
                yield FiniteDynModel(n, up, f, tuple(zip(names, vals)))


# -------------------------------------------------------------- oracle

class OracleStatus(str, enum.Enum):
    FOUND = "found"
    EXHAUSTED = "exhausted"
    BUDGET = "budget"


@dataclass
class OracleResult:
    status: OracleStatus
    model: Optional[FiniteDynModel] = None
    point: Optional[int] = None
    units: int = 0

    def __bool__(self) -> bool:
        return self.status is OracleStatus.FOUND


def _refute_chunk(args):
    """Search one preorder class; stops at the first countermodel or the cap."""
    phi, n, up, names, cap = args
    c = closure_of(phi)
    root = c.index[c.formula]
    used = 0
    for M in iter_models(n, names, up):
        used += 1
        if used > cap:
            return ("budget", used, None, None)
        m = _eval_masks(M, c)[root]
        if m != M.full:
            x = next(x for x in M.points if not m >> x & 1)
            return ("found", used, M, x)
    return ("exhausted", used, None, None)


def oracle_refute(phi: Formula, max_points: int, budget: Optional[int] = None, workers: int = 1) -> OracleResult:
    """Look for a finite model and point falsifying ``phi``.

    Exhaustion only means no countermodel has at most ``max_points`` points;
    it says nothing about validity in general. ``budget`` counts models
    examined. The verdict does not depend on ``workers``.
    """
    if max_points < 1:
        raise ValueError("max_points must be at least 1")
    names = variables(phi)
    cap = budget if budget is not None else float("inf")
    jobs = [(phi, n, up, names, cap) for n in range(1, max_points + 1) for up in preorder_classes(n)]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = pool.map(_refute_chunk, jobs)
            return _aggregate(results, cap)
    return _aggregate(map(_refute_chunk, jobs), cap)


def _aggregate(results, cap) -> OracleResult:
    used = 0
    for status, units, M, x in results:
        if status == "found" and used + units <= cap:
            return OracleResult(OracleStatus.FOUND, M, x, used + units)
        used += units
        if used > cap or status != "exhausted":
            return OracleResult(OracleStatus.BUDGET, units=min(used, cap))
    return OracleResult(OracleStatus.EXHAUSTED, units=used)


# ---------------------------------------------------------- simulations

@dataclass(frozen=True)
class SimulationCandidate:
    frame: TypedFrame
    model: FiniteDynModel
    chi: frozenset = field(default_factory=frozenset)

    def image(self, w: int) -> int:
        return sum(1 << x for v, x in self.chi if v == w)


def check_simulation(cand: SimulationCandidate, phi: Formula) -> ValidationReport:
    """Type preservation plus continuity of the relation."""
    c = closure_of(phi)
    F, M = cand.frame, cand.model
    if F.closure != c:
        raise ClosureMismatch("frame types are not over the closure of the formula")
    report = ValidationReport()
    taus = type_bits(M, c)
    for w, x in sorted(cand.chi):
        if not (0 <= w < F.n and 0 <= x < M.n):
            report.add(w, "range", f"pair ({w}, {x}) names a missing world or point")
    if not report.ok:
        return report
    for w, x in sorted(cand.chi):
        if taus[x] != F.types[w]:
            report.add(w, "type", f"point {x} has a different type from world {w}")
    images = [cand.image(w) for w in F.worlds]
    for w, x in sorted(cand.chi):
        for w2 in bits(F.up[w]):
            if not images[w2] & M.up[x]:
                report.add(w, "continuity", f"R {w} {w2} but nothing related to {w2} lies above point {x}")
    return report


def check_omega_simulation(cand: SimulationCandidate, g: Iterable[tuple[int, int]], phi: Formula) -> ValidationReport:
    """Simulation conditions plus ``f chi ⊆ chi g``."""
    report = check_simulation(cand, phi)
    if not report.ok:
        return report
    g = frozenset(g)
    F, M = cand.frame, cand.model
    images = [cand.image(w) for w in F.worlds]
    for w, x in sorted(cand.chi):
        if not any(images[v] >> M.f[x] & 1 for u, v in g if u == w):
            report.add(w, "omega", f"no g-successor of {w} is related to f({x}) = {M.f[x]}")
    return report


def restrict_to_domain(frame: TypedFrame, g: Iterable[tuple[int, int]], chi: Iterable[tuple[int, int]]):
    """The frame and ``g`` cut down to the worlds related to some point."""
    from .quasimodel import Quasimodel

    dom = sorted({w for w, _ in chi})
    if not dom:
        raise ValueError("the relation has an empty domain")
    pos = {w: i for i, w in enumerate(dom)}
    sub = frame.restrict(dom)
    pairs = frozenset((pos[w], pos[v]) for w, v in g if w in pos and v in pos)
    return Quasimodel(sub, pairs)
