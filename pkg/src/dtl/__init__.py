"""Decision procedures for dynamic topological logic over finite structures."""

from .formula import Formula, ParseError, PhiType, closure_of, parse, to_text
from .frames import LocalFrame, TypedFrame
from .quasimodel import Quasimodel, validate_quasimodel

__all__ = [
    "Formula",
    "LocalFrame",
    "ParseError",
    "PhiType",
    "Quasimodel",
    "TypedFrame",
    "closure_of",
    "parse",
    "to_text",
    "validate_quasimodel",
]
