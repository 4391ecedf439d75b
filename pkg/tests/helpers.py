"""Independent brute-force oracles and random generators for the tests.

Nothing here calls the search code it is used to check.
"""

import itertools
import random

from dtl.formula import And, Box, Henceforth, Next, Not, Var, closure_of, parse, subformulas, variables
from dtl.frames import LocalFrame, TypedFrame, bits, validate_typed_frame
from dtl.quasimodel import Quasimodel


# ------------------------------------------------------------ formulas

def random_formula(rng, depth, names=("p",)):
    if depth == 0 or rng.random() < 0.2:
        return Var(rng.choice(names))
    op = rng.choice(["not", "and", "box", "next", "star", "not", "and"])
    if op == "and":
        return And(random_formula(rng, depth - 1, names), random_formula(rng, depth - 1, names))
    child = random_formula(rng, depth - 1, names)
    return {"not": Not, "box": Box, "next": Next, "star": Henceforth}[op](child)


def formula_corpus(seed, count, max_sub, names=("p",)):
    """Distinct random formulas with at most ``max_sub`` distinct subformulas."""
    rng = random.Random(seed)
    out, seen = [], set()
    while len(out) < count:
        f = closure_of(random_formula(rng, 4, names)).formula
        if len(subformulas(f)) <= max_sub and f not in seen:
            seen.add(f)
            out.append(f)
    return out


def truth_table_tautology(f):
    """Propositional tautology check by evaluating every assignment."""
    names = variables(f)

    def ev(g, val):
        if isinstance(g, Var):
            return val[g.name]
        if isinstance(g, Not):
            return not ev(g.child, val)
        if isinstance(g, And):
            return ev(g.left, val) and ev(g.right, val)
        raise TypeError("not propositional")

    return all(ev(f, dict(zip(names, vs))) for vs in itertools.product([False, True], repeat=len(names)))


# ------------------------------------------------------------ frames

def brute_embeds(a, b):
    """Try every injection; returns True iff a root-preserving R-exact typed one exists."""
    if a.n > b.n:
        return False
    for image in itertools.permutations(range(b.n), a.n):
        if image[a.root] != b.root:
            continue
        if any(a.types[w] != b.types[image[w]] for w in range(a.n)):
            continue
        if all(a.R(w, v) == b.R(image[w], image[v]) for w in range(a.n) for v in range(a.n)):
            return True
    return False


def brute_isomorphic(a, b):
    return a.n == b.n and brute_embeds(a, b)


def brute_successor(a, b):
    """Every subset of sensible pairs, checked against the definition."""
    c = a.closure
    pairs = [(w, v) for w in range(a.n) for v in range(b.n) if c.sensible(a.types[w], b.types[v])]
    if (a.root, b.root) not in pairs:
        return False
    rest = [p for p in pairs if p != (a.root, b.root)]
    for size in range(len(rest) + 1):
        for combo in itertools.combinations(rest, size):
            g = set(combo) | {(a.root, b.root)}
            if relation_ok(a, b, g):
                return True
    return False


def relation_ok(a, b, g):
    if {w for w, _ in g} != set(range(a.n)):
        return False
    for w, v in g:
        for w2 in range(a.n):
            if a.R(w, w2) and not any((w2, v2) in g for v2 in range(b.n) if b.R(v, v2)):
                return False
    for (w, v), (w2, v2) in itertools.product(g, repeat=2):
        if b.R(v, v2) and not a.R(w, w2):
            return False
    return True


def random_tree_frame(rng, closure, n, types=None):
    """A random rooted tree-like frame; types drawn from ``types`` (any by default)."""
    pool = list(types or closure.all_types)
    cluster = [0]
    parent = [None]
    for _ in range(1, n):
        if rng.random() < 0.3:
            cluster.append(rng.choice(cluster))
        else:
            new = max(cluster) + 1
            parent.append(rng.choice(sorted(set(cluster))))
            cluster.append(new)
    k = max(cluster) + 1
    above = [{c} for c in range(k)]
    for c in range(k - 1, 0, -1):
        above[parent[c]] |= above[c]
    up = []
    for w in range(n):
        up.append(sum(1 << v for v in range(n) if cluster[v] in above[cluster[w]]))
    types = tuple(rng.choice(pool) for _ in range(n))
    return LocalFrame(closure, types, tuple(up), 0)


def permuted(a, rng):
    perm = list(range(a.n))
    rng.shuffle(perm)
    types = [0] * a.n
    up = [0] * a.n
    for w in range(a.n):
        types[perm[w]] = a.types[w]
        up[perm[w]] = sum(1 << perm[v] for v in bits(a.up[w]))
    return LocalFrame(a.closure, tuple(types), tuple(up), perm[a.root])


def all_preorders(n):
    """Every reflexive transitive relation on n points, by brute force."""
    off = [(i, j) for i in range(n) for j in range(n) if i != j]
    for chosen in itertools.product([False, True], repeat=len(off)):
        rel = {(i, i) for i in range(n)} | {p for p, c in zip(off, chosen) if c}
        if all((i, k) in rel for (i, j) in rel for (j2, k) in rel if j == j2):
            yield rel


def brute_local_frame_keys(closure, max_worlds):
    """Keys of all valid tree-like local frames with at most ``max_worlds`` worlds."""
    keys = set()
    for n in range(1, max_worlds + 1):
        for rel in all_preorders(n):
            up = tuple(sum(1 << j for j in range(n) if (i, j) in rel) for i in range(n))
            for root in range(n):
                if up[root] != (1 << n) - 1:
                    continue
                try:
                    LocalFrame(closure, (closure.all_types[0],) * n, up, root)
                except ValueError:
                    continue
                for types in itertools.product(closure.all_types, repeat=n):
                    a = LocalFrame(closure, types, up, root)
                    if validate_typed_frame(a, closure).ok:
                        keys.add(a.key)
    return keys


def frame_at(Q: Quasimodel, w):
    """The local frame of everything ``w`` sees inside a quasimodel."""
    keep = list(bits(Q.frame.up[w]))
    sub = Q.frame.restrict(keep)
    return LocalFrame(Q.closure, sub.types, sub.up, keep.index(w))


# ------------------------------------------------------------ models

def naive_eval(M, f):
    """Truth set of ``f`` straight from the semantic clauses, as a Python set."""
    X = set(range(M.n))
    if isinstance(f, Var):
        return set(bits(M.V(f.name)))
    if isinstance(f, Not):
        return X - naive_eval(M, f.child)
    if isinstance(f, And):
        return naive_eval(M, f.left) & naive_eval(M, f.right)
    if isinstance(f, Box):
        s = naive_eval(M, f.child)
        return {x for x in X if all(y in s for y in X if M.leq(x, y))}
    if isinstance(f, Next):
        s = naive_eval(M, f.child)
        return {x for x in X if M.f[x] in s}
    if isinstance(f, Henceforth):
        s = naive_eval(M, f.child)
        out = set()
        for x in X:
            y, ok = x, True
            for _ in range(M.n + 1):
                if y not in s:
                    ok = False
                    break
                y = M.f[y]
            if ok:
                out.add(x)
        return out
    raise TypeError(f)


def random_model(rng, n, names=("p",)):
    from dtl.finite_model import FiniteDynModel, labelled_preorders, monotone_maps

    up = rng.choice(labelled_preorders(n))
    f = rng.choice(list(monotone_maps(up)))
    val = tuple((name, rng.randrange(1 << n)) for name in names)
    return FiniteDynModel(n, up, f, val)


STAR_BOX = parse("*[]p -> []*p")


# ------------------------------------------------------------ paths

class SuccessorPool:
    """Local frames of a closure with lazily computed successor lists."""

    def __init__(self, closure, max_worlds):
        from dtl.frames import shape_space

        self.closure = closure
        self.frames = list(shape_space(closure).iter_frames(3 * closure.length, max_worlds=max_worlds))
        self._succ = {}

    def successors(self, a):
        from dtl.temporal import is_successor

        if a.key not in self._succ:
            c = self.closure
            self._succ[a.key] = [b for b in self.frames
                                 if c.sensible(a.root_type, b.root_type) and is_successor(a, b)]
        return self._succ[a.key]


def random_successor_path(rng, pool, max_len, repeat=0.6):
    """A random walk along successors that often revisits something embedding an earlier frame
    while postponing the eventualities of the first frame."""
    from dtl.frames import is_embedded

    c = pool.closure
    while True:
        a = rng.choice(pool.frames)
        if pool.successors(a):
            break
    wits = [w for ev, w in c.eventualities if a.root_type >> ev & 1]
    path = [a]
    length = rng.randint(1, max_len)
    while len(path) < length:
        opts = pool.successors(path[-1])
        if not opts:
            break
        lazy = [b for b in opts if not any(b.root_type >> w & 1 for w in wits)] or opts
        if rng.random() < repeat:
            back = [b for b in lazy if any(is_embedded(x, b) for x in path)]
            if back:
                lazy = back
        path.append(rng.choice(lazy))
    return path


# ------------------------------------------------------------ acceptance log

ACCEPTANCE = []  # (number, title, passed, seconds, note)
