"""JSON and DOT serialization for frames, quasimodels, models and relations."""

from __future__ import annotations

import json
import logging
from importlib import resources
from pathlib import Path
from typing import Optional, Union

from .finite_model import FiniteDynModel
from .formula import Closure, Formula, PhiType, closure_of, parse, to_text, type_of_literals
from .frames import LocalFrame, TypedFrame, bits, close_preorder
from .quasimodel import Quasimodel
from .temporal import FrameRelation

log = logging.getLogger(__name__)

Source = Union[str, Path, dict]


class FormatError(ValueError):
    """Input document does not have the expected shape."""


def read_json(src: Source) -> dict:
    if isinstance(src, dict):
        return src
    with open(src, encoding="utf-8") as fh:
        return json.load(fh)


def _world_index(worlds: list, ref) -> int:
    if isinstance(ref, int) and not isinstance(ref, bool):
        if not 0 <= ref < len(worlds):
            raise FormatError(f"world index {ref} out of range")
        return ref
    for i, w in enumerate(worlds):
        if w.get("id") == ref:
            return i
    raise FormatError(f"unknown world {ref!r}")


def _parse_type(c: Closure, entry) -> int:
    try:
        literals = [parse(s) for s in entry]
        return type_of_literals(c, literals).bits
    except KeyError as exc:
        raise FormatError(str(exc.args[0])) from None


def frame_parts(doc: dict, c: Closure):
    """Types, closed accessibility masks and labels of a frame document."""
    worlds = doc.get("worlds")
    if not isinstance(worlds, list) or not worlds:
        raise FormatError("a frame needs a nonempty 'worlds' list")
    types = []
    for i, w in enumerate(worlds):
        try:
            types.append(_parse_type(c, w.get("type", [])))
        except ValueError as exc:
            raise FormatError(f"world {w.get('id', i)}: {exc}") from None
    pairs = [(_world_index(worlds, a), _world_index(worlds, b)) for a, b in doc.get("order", [])]
    raw = [1 << i for i in range(len(worlds))]
    for a, b in pairs:
        raw[a] |= 1 << b
    up = close_preorder(len(worlds), pairs)
    if tuple(raw) != up:
        log.warning("order was closed reflexively and transitively")
    labels = tuple(str(w.get("id", i)) for i, w in enumerate(worlds))
    return tuple(types), up, labels


def _formula_of(doc: dict, formula: Optional[Formula]) -> Formula:
    if formula is not None:
        return formula
    if "formula" not in doc:
        raise FormatError("no formula given and the document names none")
    return parse(doc["formula"])


def load_frame(src: Source, formula: Optional[Formula] = None) -> TypedFrame:
    doc = read_json(src)
    c = closure_of(_formula_of(doc, formula))
    types, up, _ = frame_parts(doc, c)
    return TypedFrame(c, types, up)


def load_local_frame(src: Source, formula: Optional[Formula] = None) -> LocalFrame:
    doc = read_json(src)
    c = closure_of(_formula_of(doc, formula))
    types, up, _ = frame_parts(doc, c)
    root = _world_index(doc["worlds"], doc.get("root", 0))
    return LocalFrame(c, types, up, root)


def load_quasimodel(src: Source, formula: Optional[Formula] = None) -> Quasimodel:
    doc = read_json(src)
    c = closure_of(_formula_of(doc, formula))
    types, up, labels = frame_parts(doc, c)
    worlds = doc["worlds"]
    g = frozenset((_world_index(worlds, a), _world_index(worlds, b)) for a, b in doc.get("g", []))
    return Quasimodel(TypedFrame(c, types, up), g, labels)


def load_model(src: Source) -> FiniteDynModel:
    doc = read_json(src)
    try:
        n = int(doc["points"])
        f = [int(x) for x in doc["f"]]
        order = [(int(a), int(b)) for a, b in doc.get("order", [])]
        valuation = {k: [int(x) for x in v] for k, v in doc.get("valuation", {}).items()}
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"bad model document: {exc}") from None
    if len(f) != n or any(not 0 <= x < n for x in f):
        raise FormatError("'f' must list one point per point")
    if any(not 0 <= x < n for pair in order for x in pair):
        raise FormatError("'order' names a missing point")
    return FiniteDynModel.build(n, order, f, valuation)


def load_relation(src: Source, formula: Optional[Formula] = None) -> FrameRelation:
    doc = read_json(src)
    phi = _formula_of(doc, formula)
    a = load_local_frame(doc["source"], phi)
    b = load_local_frame(doc["target"], phi)
    pairs = frozenset((int(x), int(y)) for x, y in doc.get("pairs", []))
    return FrameRelation(a, b, pairs)


def example_quasimodel() -> Quasimodel:
    """The three-world quasimodel falsifying ``*[]p -> []*p``."""
    text = resources.files("dtl").joinpath("data/example_quasimodel.json").read_text(encoding="utf-8")
    return load_quasimodel(json.loads(text))


# ------------------------------------------------------------- writing

def _literals(c: Closure, t: int) -> list[str]:
    return [to_text(c.signed[i]) if t >> i & 1 else to_text(c.signed[c.neg_index[i]]) for i in c.free_bases]


def frame_to_json(F: TypedFrame, labels=None, with_formula: bool = True) -> dict:
    c = F.closure
    doc = {}
    if with_formula:
        doc["formula"] = to_text(c.formula)
    doc["worlds"] = [{"id": labels[w] if labels else w, "type": _literals(c, F.types[w])} for w in F.worlds]
    doc["order"] = [[w, v] for w in F.worlds for v in bits(F.up[w]) if v != w]
    if isinstance(F, LocalFrame):
        doc["root"] = F.root
    return doc


def quasimodel_to_json(Q: Quasimodel) -> dict:
    doc = frame_to_json(Q.frame, Q.labels)
    doc["g"] = [list(p) for p in sorted(Q.g)]
    return doc


def relation_to_json(rel: FrameRelation) -> dict:
    return {
        "formula": to_text(rel.source.closure.formula),
        "source": frame_to_json(rel.source, with_formula=False),
        "target": frame_to_json(rel.target, with_formula=False),
        "pairs": rel.to_json(),
    }


def _dot_label(c: Closure, name, t: int) -> str:
    shown = ", ".join(_literals(c, t))
    return f"{name}\\n{{{shown}}}".replace('"', '\\"')


def to_dot(obj: Union[TypedFrame, Quasimodel], name: str = "frame") -> str:
    """Graphviz source: solid edges for R (reflexive loops omitted), dashed for g."""
    if isinstance(obj, Quasimodel):
        F, g, labels = obj.frame, sorted(obj.g), obj.labels
    else:
        F, g, labels = obj, [], None
    c = F.closure
    lines = [f"digraph {name} {{", "  node [shape=box];"]
    for w in F.worlds:
        label = _dot_label(c, labels[w] if labels else w, F.types[w])
        extra = ", peripheries=2" if isinstance(F, LocalFrame) and w == F.root else ""
        lines.append(f'  w{w} [label="{label}"{extra}];')
    for w in F.worlds:
        for v in bits(F.up[w]):
            if v != w:
                lines.append(f"  w{w} -> w{v};")
    for w, v in g:
        lines.append(f"  w{w} -> w{v} [style=dashed];")
    lines.append("}")
    return "\n".join(lines) + "\n"


def type_text(t: PhiType) -> list[str]:
    return [to_text(f) for f in t]
