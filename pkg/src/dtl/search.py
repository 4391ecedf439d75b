"""Efficient paths of local frames, partial families of paths, and the
iterative-deepening validity search with its satisfiability certifier.

Work is counted in abstract units (frames generated, successor tests, typing
nodes) so that verdicts do not depend on timing or on the worker count.
"""

from __future__ import annotations

import enum
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterator, Optional, Sequence

from .finite_model import preorder_classes
from .formula import Closure, Formula, PhiType, closure_of, neg, to_text
from .frames import LocalFrame, TypedFrame, bits, frame_length, is_embedded, popcount, shape_space, stratum, subframe
from .quasimodel import Quasimodel, validate_quasimodel
from .report import Budget, BudgetExhausted, ValidationReport
from .temporal import _largest_continuous, is_successor, reduce_successor

log = logging.getLogger(__name__)

INF = math.inf


# ---------------------------------------------------------- eventualities

def eventualities(t: PhiType) -> set[Formula]:
    """The ``!*psi`` members of a type."""
    c = t.closure
    return {c.signed[ev] for ev, _ in c.eventualities if t.bits >> ev & 1}


@dataclass(frozen=True)
class RealizationProfile:
    N: int
    times: dict  # eventuality -> least K >= N with its witness, or inf
    rho_inf: float
    rho_fin: int

    def values(self) -> set:
        return set(self.times.values())


def _times(types: Sequence[int], c: Closure, N: int) -> dict[int, float]:
    out = {}
    t = types[N]
    for ev, wit in c.eventualities:
        if t >> ev & 1:
            out[ev] = next((K for K in range(N, len(types)) if types[K] >> wit & 1), INF)
    return out


def realization_profile(path: Sequence[LocalFrame], N: int) -> RealizationProfile:
    """Realization times at position ``N`` of a finite path of frames.

    An eventuality ``!*psi`` at ``N`` is realized at the first ``K >= N`` whose
    root type contains ``!psi``; ``inf`` if that never happens on the path.
    """
    if not 0 <= N < len(path):
        raise IndexError("position outside the path")
    c = path[0].closure
    times = _times([a.root_type for a in path], c, N)
    vals = list(times.values())
    finite = [v for v in vals if v != INF]
    return RealizationProfile(
        N,
        {c.signed[ev]: k for ev, k in times.items()},
        max(vals) if vals else 0,
        max(finite) if finite else 0,
    )


# ------------------------------------------------------------ efficiency

def find_inefficiency(path: Sequence[LocalFrame]) -> Optional[tuple[int, int, int]]:
    """Lexicographically least ``(N, M1, M2)`` forming an inefficiency."""
    if not path:
        return None
    c = path[0].closure
    types = [a.root_type for a in path]
    L = len(path)
    for N in range(L):
        times = _times(types, c, N)
        if not times:
            continue
        top = max(times.values())
        realized = {k for k in times.values() if k != INF}
        for M1 in range(N, L):
            for M2 in range(M1 + 1, L):
                if not M2 < top:
                    break
                if any(M1 < k < M2 for k in realized):
                    break
                if is_embedded(path[M1], path[M2]):
                    return N, M1, M2
    return None


def norm_growth_ok(path: Sequence[LocalFrame]) -> bool:
    if not path:
        return True
    n = frame_length(path[0].closure)
    return all(b.norm <= a.norm + n for a, b in zip(path, path[1:]))


def is_efficient(path: Sequence[LocalFrame]) -> bool:
    return norm_growth_ok(path) and find_inefficiency(path) is None


def is_successor_path(path: Sequence[LocalFrame]) -> bool:
    return all(is_successor(a, b) for a, b in zip(path, path[1:]))


def remove_inefficiency(path: Sequence[LocalFrame], triple: tuple[int, int, int]) -> list[LocalFrame]:
    """Skip the loop between ``M1`` and ``M2`` and shrink the tail as needed.

    The frame at ``M1`` embeds into the one at ``M2``, so it also has the
    frame at ``M2 + 1`` as a successor. Frames after the junction are reduced
    while they grow faster than the norm bound allows.
    """
    N, M1, M2 = triple
    path = list(path)
    if not (0 <= N <= M1 < M2 < len(path)) or not is_embedded(path[M1], path[M2]):
        raise ValueError(f"{triple} is not an inefficiency of the path")
    out = path[:M1 + 1] + path[M2 + 1:]
    n = frame_length(out[0].closure)
    for i in range(M1 + 1, len(out)):
        if out[i].norm > out[i - 1].norm + n:
            out[i] = reduce_successor(out[i - 1], out[i]).canonical()
    return out


def make_efficient(path: Sequence[LocalFrame], limit: int = 1000) -> list[LocalFrame]:
    """Remove least inefficiencies until none is left."""
    path = list(path)
    for _ in range(limit):
        triple = find_inefficiency(path)
        if triple is None:
            return path
        path = remove_inefficiency(path, triple)
    raise RuntimeError("inefficiency removal did not terminate")


# ------------------------------------------------------- partial families

def in_stratum(a: LocalFrame, k: int) -> bool:
    return a.norm <= (k + 1) * frame_length(a.closure)


@dataclass
class PartialFamily:
    """Frames of norm at most ``(depth+1)|sub|`` each with a path inside the family.

    ``frames`` and ``eps`` are keyed by canonical frame key; a frame whose
    least stratum is ``k`` carries a path of ``depth - k + 1`` frames.
    """

    depth: int
    closure: Closure
    frames: dict = field(default_factory=dict)
    eps: dict = field(default_factory=dict)

    def path(self, key) -> list[LocalFrame]:
        return [self.frames[k] for k in self.eps[key]]

    def satisfies(self, goal: Formula) -> bool:
        i = self.closure.idx(goal)
        return any(a.root_type >> i & 1 and in_stratum(a, 0) for a in self.frames.values())

    def check(self) -> ValidationReport:
        report = ValidationReport()
        N = self.depth
        for key, a in sorted(self.frames.items()):
            if a.key != key:
                report.add(key, "key", "frame stored under a foreign key")
            if not in_stratum(a, N):
                report.add(key, "stratum", f"norm {a.norm} exceeds the depth bound")
                continue
            for v in a.worlds:
                if subframe(a, v).key not in self.frames:
                    report.add(key, "open", f"subframe at world {v} is missing")
            path = self.eps.get(key)
            if path is None:
                report.add(key, "path", "no path")
                continue
            if len(path) != N - stratum(a) + 1:
                report.add(key, "path", f"path has {len(path)} frames, expected {N - stratum(a) + 1}")
            if not path or path[0] != key:
                report.add(key, "path", "path does not start at the frame")
            if any(k not in self.frames for k in path):
                report.add(key, "path", "path leaves the family")
                continue
            frames = [self.frames[k] for k in path]
            if not is_successor_path(frames):
                report.add(key, "path", "consecutive frames are not successors")
            if not is_efficient(frames):
                report.add(key, "efficiency", "path is not efficient")
        return report

    def restrict(self, k: int) -> PartialFamily:
        """The part of the family at depth ``k <= depth``."""
        if not 0 <= k <= self.depth:
            raise ValueError("can only restrict to a smaller depth")
        frames = {key: a for key, a in self.frames.items() if in_stratum(a, k)}
        eps = {key: tuple(self.eps[key][:k - stratum(a) + 1]) for key, a in frames.items()}
        return PartialFamily(k, self.closure, frames, eps)

    def to_json(self) -> dict:
        keys = sorted(self.frames)
        pos = {k: i for i, k in enumerate(keys)}
        from .io import frame_to_json

        return {
            "depth": self.depth,
            "frames": [frame_to_json(self.frames[k], with_formula=False) for k in keys],
            "paths": [[pos[k] for k in self.eps[key]] for key in keys],
        }


class FamilyStatus(str, enum.Enum):
    FOUND = "found"
    EXHAUSTED = "exhausted"
    BUDGET = "budget"


@lru_cache(maxsize=256)
def usable_types(c: Closure) -> tuple[int, ...]:
    """Types with reflexive boxes that can start an infinite sensible sequence."""
    cand = {t for t in c.all_types if c.boxes_true(t) & t == (t & c.box_mask)}
    while True:
        keep = {t for t in cand if any(c.sensible(t, s) for s in cand)}
        if keep == cand:
            return tuple(sorted(cand))
        cand = keep


def _types_with_chain(c: Closure, length: int) -> set[int]:
    base = {t for t in c.all_types if c.boxes_true(t) & t == (t & c.box_mask)}
    cur = set(base)
    for _ in range(length - 1):
        cur = {t for t in base if any(c.sensible(t, s) for s in cur)}
    return cur


class FamilyStream:
    """Efficient partial families of one depth that satisfy a goal.

    Iterating yields families as they are discovered. When iteration ends,
    ``status`` says why: the candidate space was exhausted, or the budget ran
    out. A stream that is exhausted without yielding anything proves that no
    such family exists.
    """

    def __init__(self, phi: Formula, N: int, goal: Formula, budget: Optional[Budget] = None):
        if N < 0:
            raise ValueError("depth must be non-negative")
        self.closure = closure_of(phi)
        self.N = N
        self.goal = goal
        self.budget = budget if budget is not None else Budget()
        self.status: Optional[FamilyStatus] = None
        self.found = 0
        self._goal_bit = self.closure.idx(goal)
        self._L = frame_length(self.closure)

    @property
    def proven_empty(self) -> bool:
        return self.status is FamilyStatus.EXHAUSTED and self.found == 0

    def __iter__(self) -> Iterator[PartialFamily]:
        try:
            yield from self._run()
            self.status = FamilyStatus.EXHAUSTED
        except BudgetExhausted:
            self.status = FamilyStatus.BUDGET

    # --- universe of candidate frames

    def _run(self) -> Iterator[PartialFamily]:
        c, N, L = self.closure, self.N, self._L
        goal_types = sorted(t for t in _types_with_chain(c, N + 1) if t >> self._goal_bit & 1)
        if not goal_types:
            return
        space = shape_space(c)
        self.frames: dict = {}
        self.succ: dict = {}
        self.gens: dict = {}
        goal_gen = space.iter_frames(L, root_types=goal_types, budget=self.budget)
        yielded: set = set()
        batch = 4
        while True:
            progress = False
            if goal_gen is not None:
                for _ in range(batch):
                    a = next(goal_gen, None)
                    if a is None:
                        goal_gen = None
                        break
                    self._add(a)
                    progress = True
            for key in sorted(self.gens):
                gen = self.gens[key]
                x = self.frames[key]
                for _ in range(batch):
                    d = next(gen, None)
                    if d is None:
                        del self.gens[key]
                        break
                    progress = True
                    self.budget.spend()
                    if is_successor(x, d):
                        self.succ[key].append(d.key)
                        self._add(d)
            alive, eps = self._fixpoint()
            for key in sorted(alive):
                a = self.frames[key]
                if key in yielded or not (a.root_type >> self._goal_bit & 1 and in_stratum(a, 0)):
                    continue
                yielded.add(key)
                self.found += 1
                yield self._generated(key, eps)
            if goal_gen is None and not self.gens:
                return
            if not progress:
                return
            batch *= 2

    def _add(self, a: LocalFrame) -> None:
        if a.key in self.frames:
            return
        self.frames[a.key] = a
        self.succ[a.key] = []
        if self.N - stratum(a) >= 1:
            bound = min(a.norm + self._L, (self.N + 1) * self._L)
            roots = [s for s in self.closure.all_types if self.closure.sensible(a.root_type, s)]
            self.gens[a.key] = shape_space(self.closure).iter_frames(bound, root_types=roots, budget=self.budget)
        for v in a.worlds:
            self._add(subframe(a, v))

    def _fixpoint(self):
        alive = set(self.frames)
        eps: dict = {}
        changed = True
        while changed:
            changed = False
            for key in sorted(alive):
                a = self.frames[key]
                ok = all(subframe(a, v).key in alive for v in a.worlds)
                path = self._efficient_path(key, self.N - stratum(a) + 1, alive) if ok else None
                if path is None:
                    alive.discard(key)
                    eps.pop(key, None)
                    changed = True
                else:
                    eps[key] = path
        return alive, eps

    def _efficient_path(self, key, length: int, alive: set) -> Optional[tuple]:
        path = [key]

        def grow() -> bool:
            if len(path) == length:
                return True
            for nxt in sorted(self.succ[path[-1]]):
                if nxt not in alive:
                    continue
                self.budget.spend()
                path.append(nxt)
                if is_efficient([self.frames[k] for k in path]) and grow():
                    return True
                path.pop()
            return False

        return tuple(path) if grow() else None

    def _generated(self, key, eps) -> PartialFamily:
        """The smallest sub-family containing ``key``."""
        keep: dict = {}
        todo = [key]
        while todo:
            k = todo.pop()
            if k in keep:
                continue
            a = self.frames[k]
            keep[k] = a
            todo.extend(subframe(a, v).key for v in a.worlds)
            todo.extend(eps[k])
        return PartialFamily(self.N, self.closure, keep, {k: eps[k] for k in keep})


def enumerate_partial_families(phi: Formula, N: int, goal: Formula, budget: Optional[Budget] = None) -> FamilyStream:
    return FamilyStream(phi, N, goal, budget)


# ------------------------------------------------------------ certifier

def _box_ok(c: Closure, types, up, w) -> bool:
    ev = -1
    for v in bits(up[w]):
        ev &= types[v]
    return c.boxes_true(ev) == types[w] & c.box_mask


def _relation_ok(c: Closure, frame: TypedFrame, g: list[int]) -> bool:
    """Totality and the forward eventuality clause for a continuous sensible ``g``."""
    n = frame.n
    if not all(g):
        return False
    reach = [(1 << w) | g[w] for w in range(n)]
    changed = True
    while changed:
        changed = False
        for w in range(n):
            new = reach[w]
            for v in bits(reach[w]):
                new |= reach[v]
            if new != reach[w]:
                reach[w] = new
                changed = True
    for w in range(n):
        t = frame.types[w]
        for ev, wit in c.eventualities:
            if t >> ev & 1 and not any(frame.types[v] >> wit & 1 for v in bits(reach[w])):
                return False
    return True


def _sat_chunk(args):
    psi, k, up, cap = args
    c = closure_of(psi)
    target = c.idx(psi)
    types = usable_types(c)
    order = sorted(range(k), key=lambda w: (popcount(up[w]), w))
    done = 0
    check_at: list[list[int]] = []
    checked = set()
    for i, w in enumerate(order):
        done |= 1 << w
        now = [v for v in range(k) if v not in checked and up[v] & ~done == 0]
        checked.update(now)
        check_at.append(now)
    assigned = [0] * k
    used = 0

    def leaf():
        if not any(t >> target & 1 for t in assigned):
            return None
        frame = TypedFrame(c, tuple(assigned), up)
        g = _largest_continuous(frame, frame)
        if _relation_ok(c, frame, g):
            return tuple(assigned), g
        return None

    def search(i):
        nonlocal used
        if i == k:
            return leaf()
        w = order[i]
        for t in types:
            used += 1
            if used > cap:
                raise BudgetExhausted(used)
            assigned[w] = t
            if all(_box_ok(c, assigned, up, v) for v in check_at[i]):
                hit = search(i + 1)
                if hit is not None:
                    return hit
        assigned[w] = 0
        return None

    try:
        hit = search(0)
    except BudgetExhausted:
        return ("budget", used, None)
    if hit is None:
        return ("exhausted", used, None)
    return ("found", used, (hit[0], up, tuple(hit[1])))


def _minimize(Q: Quasimodel) -> Quasimodel:
    g = set(Q.g)
    for pair in sorted(Q.g):
        trial = Quasimodel(Q.frame, frozenset(g - {pair}), Q.labels)
        if validate_quasimodel(trial).ok:
            g.discard(pair)
    return Quasimodel(Q.frame, frozenset(g), Q.labels)


@dataclass
class SatResult:
    status: FamilyStatus
    quasimodel: Optional[Quasimodel] = None
    units: int = 0

    def __bool__(self) -> bool:
        return self.quasimodel is not None


def _run_chunks(fn, jobs, cap, workers):
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            yield from pool.map(fn, jobs)
    else:
        yield from map(fn, jobs)


def find_satisfying_quasimodel(psi: Formula, max_worlds: int, budget: Optional[int] = None,
                               workers: int = 1, min_worlds: int = 1) -> SatResult:
    """Search quasimodels of up to ``max_worlds`` worlds with ``psi`` in some type.

    Frames are taken one preorder per isomorphism class; for each typing the
    largest continuous sensible relation is tried, which succeeds whenever any
    relation does. The relation is then thinned out greedily. ``budget``
    counts typing steps.
    """
    if max_worlds < 1:
        raise ValueError("max_worlds must be at least 1")
    c = closure_of(psi)
    cap = budget if budget is not None else float("inf")
    jobs = [(psi, k, up, cap) for k in range(min_worlds, max_worlds + 1) for up in preorder_classes(k)]
    used = 0
    for status, units, hit in _run_chunks(_sat_chunk, jobs, cap, workers):
        if status == "found" and used + units <= cap:
            types, up, g = hit
            frame = TypedFrame(c, types, up)
            Q = Quasimodel(frame, frozenset((w, v) for w in range(len(types)) for v in bits(g[w])))
            Q = _minimize(Q)
            report = validate_quasimodel(Q)
            if not report.ok:
                raise AssertionError(f"certificate failed validation: {report.to_json()}")
            return SatResult(FamilyStatus.FOUND, Q, used + units)
        used += units
        if used > cap or status != "exhausted":
            return SatResult(FamilyStatus.BUDGET, None, min(used, cap))
    return SatResult(FamilyStatus.EXHAUSTED, None, used)


# ---------------------------------------------------------- validity

@dataclass
class Verdict:
    verdict: str  # VALID, NOT_VALID or UNKNOWN
    depth: Optional[int] = None
    certificate: Optional[Quasimodel] = None
    log: list = field(default_factory=list)

    def to_json(self) -> dict:
        from .io import quasimodel_to_json

        out = {"verdict": self.verdict, "certificate": None}
        if self.depth is not None:
            out["depth"] = self.depth
        if self.certificate is not None:
            out["certificate"] = quasimodel_to_json(self.certificate)
        out["log"] = self.log
        return out


def decide_validity(phi: Formula, max_depth: int, budget: int = 10 ** 6, max_worlds: int = 3,
                    workers: int = 1) -> Verdict:
    """Iterative deepening over depths ``0..max_depth``.

    At each depth the family search runs on its share of the budget; VALID is
    reported only when it proves that no family satisfies the negation. The
    certifier looks for a finite quasimodel of the negation with one more
    world per depth, and once more up to ``max_worlds`` after the loop.
    """
    goal = neg(phi)
    share = max(1, budget // (2 * (max_depth + 1) + 1))
    log_: list = []
    tried = 0
    for N in range(max_depth + 1):
        stream = enumerate_partial_families(phi, N, goal, Budget(share))
        found = next(iter(stream), None)
        status = FamilyStatus.FOUND if found is not None else stream.status
        log_.append({"depth": N, "families": status.value, "units": stream.budget.used})
        if found is None and stream.status is FamilyStatus.EXHAUSTED:
            return Verdict("VALID", depth=N, log=log_)
        k = N + 1
        if k <= max_worlds:
            res = find_satisfying_quasimodel(goal, k, share, workers, min_worlds=k)
            tried = k
            log_.append({"worlds": k, "certifier": res.status.value, "units": res.units})
            if res.quasimodel is not None:
                return Verdict("NOT_VALID", certificate=res.quasimodel, log=log_)
    if tried < max_worlds:
        res = find_satisfying_quasimodel(goal, max_worlds, share, workers, min_worlds=tried + 1)
        log_.append({"worlds": max_worlds, "certifier": res.status.value, "units": res.units})
        if res.quasimodel is not None:
            return Verdict("NOT_VALID", certificate=res.quasimodel, log=log_)
    return Verdict("UNKNOWN", log=log_)
