"""Piecewise regular algorithms: model, parser, validator, reference interpreter."""

from gridloom.pra.model import (
    ConditionSpace,
    Equation,
    IndexingFunction,
    Inequality,
    IterationSpace,
    Literal,
    ParamExpr,
    PraProgram,
    VarRef,
    Variable,
)
from gridloom.pra.parser import parse_pra
from gridloom.pra.printer import format_pra
from gridloom.pra.validate import validate_program
from gridloom.pra.interpret import classify_dependency, enumerate_iterations, interpret

__all__ = [
    "ConditionSpace",
    "Equation",
    "IndexingFunction",
    "Inequality",
    "IterationSpace",
    "Literal",
    "ParamExpr",
    "PraProgram",
    "VarRef",
    "Variable",
    "classify_dependency",
    "enumerate_iterations",
    "format_pra",
    "interpret",
    "parse_pra",
    "validate_program",
]
