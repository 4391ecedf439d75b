"""Formulas of dynamic topological logic, their closures and types.

Only five constructors exist internally: ``Var``, ``Not``, ``And``, ``Box``,
``Next`` and ``Henceforth``.  Disjunction, implication, equivalence and the
diamond are rewritten by the parser.  Double negations are collapsed whenever
a negation is built through :func:`neg`, so ``Not(Not(x))`` never appears in
a closure.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import cached_property, lru_cache
from typing import Iterable, Iterator


class Formula:
    __slots__ = ()

    def __str__(self) -> str:
        return to_text(self)

    def __and__(self, other: Formula) -> Formula:
        return And(self, other)

    def __invert__(self) -> Formula:
        return neg(self)


@dataclass(frozen=True, slots=True)
class Var(Formula):
    name: str

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True, slots=True)
class Not(Formula):
    child: Formula


@dataclass(frozen=True, slots=True)
class And(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True, slots=True)
class Box(Formula):
    child: Formula


@dataclass(frozen=True, slots=True)
class Next(Formula):
    child: Formula


@dataclass(frozen=True, slots=True)
class Henceforth(Formula):
    child: Formula


UNARY = (Not, Box, Next, Henceforth)


def neg(f: Formula) -> Formula:
    """Negate ``f``, identifying ``!!x`` with ``x``."""
    if isinstance(f, Not):
        return f.child
    return Not(f)


def implies(a: Formula, b: Formula) -> Formula:
    return Not(And(a, neg(b)))


def lor(a: Formula, b: Formula) -> Formula:
    return Not(And(neg(a), neg(b)))


def iff(a: Formula, b: Formula) -> Formula:
    return And(implies(a, b), implies(b, a))


def diamond(a: Formula) -> Formula:
    return Not(Box(neg(a)))


def normalize(f: Formula) -> Formula:
    """Collapse every double negation inside ``f``."""
    if isinstance(f, Var):
        return f
    if isinstance(f, Not):
        return neg(normalize(f.child))
    if isinstance(f, And):
        return And(normalize(f.left), normalize(f.right))
    return type(f)(normalize(f.child))


def children(f: Formula) -> tuple[Formula, ...]:
    if isinstance(f, Var):
        return ()
    if isinstance(f, And):
        return (f.left, f.right)
    return (f.child,)


def subformulas(f: Formula) -> list[Formula]:
    """Distinct subformulas of ``f`` in post-order (children before parents)."""
    seen: dict[Formula, None] = {}

    def walk(g: Formula) -> None:
        for c in children(g):
            walk(c)
        if g not in seen:
            seen[g] = None

    walk(f)
    return list(seen)


def variables(f: Formula) -> list[str]:
    return sorted({g.name for g in subformulas(f) if isinstance(g, Var)})


# ---------------------------------------------------------------- printing

_PREFIX = {Not: "!", Box: "[]", Next: "X", Henceforth: "*"}


def to_text(f: Formula) -> str:
    """Print ``f`` in normalized ASCII syntax.

    Conjunction is left-associative, so only a right operand that is itself a
    conjunction needs parentheses.  Unary operators bind tighter than ``&``.
    """
    if isinstance(f, Var):
        return f.name
    if isinstance(f, And):
        left = to_text(f.left)
        right = to_text(f.right)
        if isinstance(f.right, And):
            right = f"({right})"
        return f"{left} & {right}"
    inner = to_text(f.child)
    if isinstance(f.child, And):
        inner = f"({inner})"
    return _PREFIX[type(f)] + inner


def to_json(f: Formula):
    if isinstance(f, Var):
        return {"var": f.name}
    if isinstance(f, And):
        return {"and": [to_json(f.left), to_json(f.right)]}
    return {type(f).__name__.lower(): to_json(f.child)}


# ----------------------------------------------------------------- parsing

class ParseError(ValueError):
    """Raised on malformed concrete syntax.

    ``offset`` is a byte offset into the UTF-8 encoding of the input and
    ``expected`` the set of tokens that would have been accepted there.
    """

    def __init__(self, text: str, pos: int, expected: Iterable[str]):
        self.text = text
        self.offset = len(text[:pos].encode("utf-8"))
        self.expected = frozenset(expected)
        found = repr(text[pos]) if pos < len(text) else "end of input"
        super().__init__(
            f"syntax error at byte {self.offset}: found {found}, "
            f"expected one of {sorted(self.expected)}"
        )


_ALIASES = {
    "¬": "!", "∧": "&", "∨": "|", "→": "->", "↔": "<->",
    "□": "[]", "◇": "<>", "○": "X", "∗": "*",
}
_SYMBOLS = ("<->", "->", "[]", "<>", "!", "&", "|", "X", "*", "(", ")")
_UNARY_TOKENS = ("!", "[]", "<>", "X", "*")
_ATOM_START = "an atom"


def _tokenize(text: str) -> list[tuple[str, str, int]]:
    tokens = []
    i = 0
    n = len(text)
    while i < n:
        ch = text[i]
        if ch.isspace():
            i += 1
            continue
        if ch in _ALIASES:
            tokens.append((_ALIASES[ch], ch, i))
            i += 1
            continue
        if "a" <= ch <= "z":
            j = i + 1
            while j < n and (text[j].isascii() and (text[j].isalnum() or text[j] == "_")):
                j += 1
            tokens.append(("atom", text[i:j], i))
            i = j
            continue
        for sym in _SYMBOLS:
            if text.startswith(sym, i):
                tokens.append((sym, sym, i))
                i += len(sym)
                break
        else:
            raise ParseError(text, i, (_ATOM_START,) + _SYMBOLS)
    tokens.append(("eof", "", n))
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self) -> str:
        return self.tokens[self.i][0]

    def fail(self, expected):
        raise ParseError(self.text, self.tokens[self.i][2], expected)

    def take(self, kind: str):
        if self.peek() != kind:
            self.fail((kind,))
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def parse(self) -> Formula:
        f = self.implication()
        if self.peek() != "eof":
            self.fail(("&", "|", "->", "<->", "end of input"))
        return f

    def implication(self) -> Formula:
        left = self.disjunction()
        kind = self.peek()
        if kind in ("->", "<->"):
            self.i += 1
            right = self.implication()
            return implies(left, right) if kind == "->" else iff(left, right)
        return left

    def disjunction(self) -> Formula:
        f = self.conjunction()
        while self.peek() == "|":
            self.i += 1
            f = lor(f, self.conjunction())
        return f

    def conjunction(self) -> Formula:
        f = self.unary()
        while self.peek() == "&":
            self.i += 1
            f = And(f, self.unary())
        return f

    def unary(self) -> Formula:
        kind = self.peek()
        if kind in _UNARY_TOKENS:
            self.i += 1
            sub = self.unary()
            if kind == "!":
                return neg(sub)
            if kind == "[]":
                return Box(sub)
            if kind == "<>":
                return diamond(sub)
            if kind == "X":
                return Next(sub)
            return Henceforth(sub)
        if kind == "atom":
            return Var(self.take("atom")[1])
        if kind == "(":
            self.i += 1
            f = self.implication()
            self.take(")")
            return f
        self.fail((_ATOM_START, "(") + _UNARY_TOKENS)


def parse(text: str) -> Formula:
    """Parse concrete syntax into a normalized formula.

    >>> to_text(parse("*[]p -> []*p"))
    '!(*[]p & ![]*p)'
    """
    return _Parser(text).parse()


# ----------------------------------------------------------------- closure

@dataclass(frozen=True, eq=False)
class Closure:
    """The signed subformula closure of a formula.

    ``signed`` lists the post-order subformulas of ``formula`` followed by the
    negations not already present.  Membership vectors of types are integers
    whose bit ``i`` stands for ``signed[i]``.
    """

    formula: Formula
    signed: tuple[Formula, ...]
    index: dict = field(repr=False)
    length: int  # number of distinct subformulas

    def __eq__(self, other) -> bool:
        return isinstance(other, Closure) and self.formula == other.formula

    def __hash__(self) -> int:
        return hash(("Closure", self.formula))

    def __len__(self) -> int:
        return len(self.signed)

    def __contains__(self, f: Formula) -> bool:
        return f in self.index

    def __reduce__(self):
        return (closure_of, (self.formula,))

    def idx(self, f: Formula) -> int:
        try:
            return self.index[normalize(f)]
        except KeyError:
            raise KeyError(f"{to_text(f)} is not in the closure of {to_text(self.formula)}") from None

    @cached_property
    def neg_index(self) -> tuple[int, ...]:
        return tuple(self.index[neg(f)] for f in self.signed)

    @cached_property
    def bases(self) -> tuple[int, ...]:
        """Indices of the unnegated members, in closure order."""
        return tuple(i for i, f in enumerate(self.signed) if not isinstance(f, Not))

    @cached_property
    def free_bases(self) -> tuple[int, ...]:
        return tuple(i for i in self.bases if not isinstance(self.signed[i], And))

    @cached_property
    def ands(self) -> tuple[tuple[int, int, int], ...]:
        return tuple(
            (i, self.index[f.left], self.index[f.right])
            for i, f in enumerate(self.signed) if isinstance(f, And)
        )

    def _pairs(self, kind) -> tuple[tuple[int, int], ...]:
        return tuple(
            (i, self.index[f.child]) for i, f in enumerate(self.signed) if isinstance(f, kind)
        )

    @cached_property
    def boxes(self) -> tuple[tuple[int, int], ...]:
        """(index of box psi, index of psi) for every box formula."""
        return self._pairs(Box)

    @cached_property
    def nexts(self) -> tuple[tuple[int, int], ...]:
        return self._pairs(Next)

    @cached_property
    def stars(self) -> tuple[tuple[int, int], ...]:
        return self._pairs(Henceforth)

    @cached_property
    def box_mask(self) -> int:
        return sum(1 << b for b, _ in self.boxes)

    @cached_property
    def eventualities(self) -> tuple[tuple[int, int], ...]:
        """(index of !*psi, index of !psi) for every henceforth formula."""
        return tuple((self.neg_index[s], self.neg_index[c]) for s, c in self.stars)

    def boxes_true(self, everywhere: int) -> int:
        """Box bits forced by a mask of formulas holding at every successor."""
        out = 0
        for b, c in self.boxes:
            if everywhere >> c & 1:
                out |= 1 << b
        return out

    # --- type helpers on raw bitmasks

    def bits_of(self, members: Iterable[Formula]) -> int:
        bits = 0
        for f in members:
            bits |= 1 << self.idx(f)
        return bits

    def members(self, bits: int) -> list[Formula]:
        return [f for i, f in enumerate(self.signed) if bits >> i & 1]

    def check_bits(self, bits: int) -> list[str]:
        """Reasons why ``bits`` is not a type, one per violated condition."""
        problems = []
        for i in self.bases:
            j = self.neg_index[i]
            if (bits >> i & 1) == (bits >> j & 1):
                which = "both" if bits >> i & 1 else "neither"
                problems.append(f"negation: {which} of {to_text(self.signed[i])} and its negation")
        for i, l, r in self.ands:
            if (bits >> i & 1) != (bits >> l & 1 and bits >> r & 1):
                problems.append(f"conjunction: {to_text(self.signed[i])}")
        return problems

    def complete(self, assignment: dict[int, bool]) -> int:
        """Build a type from truth values of the free base formulas."""
        value: dict[int, bool] = {}
        for i in self.bases:
            f = self.signed[i]
            if isinstance(f, And):
                value[i] = self._val(value, self.index[f.left]) and self._val(value, self.index[f.right])
            else:
                value[i] = assignment[i]
        bits = 0
        for i in self.bases:
            bits |= 1 << (i if value[i] else self.neg_index[i])
        return bits

    def _val(self, value, j):
        if j in value:
            return value[j]
        return not value[self.neg_index[j]]

    @cached_property
    def all_types(self) -> tuple[int, ...]:
        out = []
        free = self.free_bases
        for combo in itertools.product((False, True), repeat=len(free)):
            out.append(self.complete(dict(zip(free, combo))))
        return tuple(sorted(out))

    def type(self, members: Iterable[Formula]) -> PhiType:
        t = PhiType(self, self.bits_of(members))
        problems = self.check_bits(t.bits)
        if problems:
            raise ValueError("not a type: " + "; ".join(problems))
        return t

    def sensible(self, t: int, s: int) -> bool:
        return _sensible(self, t, s)


@lru_cache(maxsize=1 << 18)
def _sensible(c: Closure, t: int, s: int) -> bool:
    for n, ch in c.nexts:
        if (t >> n & 1) != (s >> ch & 1):
            return False
    for st, ch in c.stars:
        if (t >> st & 1) != (t >> ch & 1 and s >> st & 1):
            return False
    return True


@lru_cache(maxsize=None)
def _closure_cached(f: Formula) -> Closure:
    sub = subformulas(f)
    signed = list(sub)
    present = set(sub)
    for g in sub:
        ng = neg(g)
        if ng not in present:
            present.add(ng)
            signed.append(ng)
    return Closure(f, tuple(signed), {g: i for i, g in enumerate(signed)}, len(sub))


def closure_of(f: Formula) -> Closure:
    """Signed closure of ``f``: subformulas and their negations, no ``!!``."""
    return _closure_cached(normalize(f))


@dataclass(frozen=True)
class PhiType:
    """A type over a closure, stored as a membership bit vector."""

    closure: Closure
    bits: int

    def __contains__(self, f: Formula) -> bool:
        i = self.closure.index.get(normalize(f))
        return i is not None and bool(self.bits >> i & 1)

    def __iter__(self) -> Iterator[Formula]:
        return iter(self.closure.members(self.bits))

    def __len__(self) -> int:
        return bin(self.bits).count("1")

    def __str__(self) -> str:
        return "{" + ", ".join(to_text(f) for f in self) + "}"


def is_type(members: Iterable[Formula], c: Closure) -> bool:
    return not c.check_bits(c.bits_of(members))


def type_violations(members: Iterable[Formula], c: Closure) -> list[str]:
    return c.check_bits(c.bits_of(members))


def enumerate_types(c: Closure) -> list[PhiType]:
    return [PhiType(c, b) for b in c.all_types]


def type_diamond(t: PhiType) -> set[Formula]:
    """Formulas whose diamond belongs to ``t``."""
    c = t.closure
    out = set()
    for f in c.signed:
        d = Not(Box(neg(f)))
        if d in c.index and t.bits >> c.index[d] & 1:
            out.add(f)
    return out


def type_of_literals(c: Closure, literals: Iterable[Formula]) -> PhiType:
    """Complete a list of formulas into a type, deriving conjunctions.

    Every non-conjunction member of the closure must be decided by
    ``literals`` (either it or its negation listed).
    """
    given = {c.idx(f) for f in literals}
    assignment = {}
    for i in c.free_bases:
        pos, negd = i in given, c.neg_index[i] in given
        if pos == negd:
            what = "both" if pos else "neither"
            raise ValueError(f"{what} of {to_text(c.signed[i])} and its negation listed")
        assignment[i] = pos
    bits = c.complete(assignment)
    missing = [to_text(c.signed[i]) for i in given if not bits >> i & 1]
    if missing:
        raise ValueError("inconsistent conjunctions: " + ", ".join(missing))
    return PhiType(c, bits)
