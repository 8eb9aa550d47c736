from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, Iterable, Mapping, Optional, Tuple, Union

from gridloom.errors import UnboundParameterError

KINDS = ("input", "output", "internal")

# op -> arity
OP_ARITY: Dict[str, int] = {
    "copy": 1,
    "add": 2,
    "sub": 2,
    "mul": 2,
    "div": 2,
    "select": 3,
    "compare": 2,
}

OP_SYMBOL: Dict[str, str] = {"add": "+", "sub": "-", "mul": "*", "div": "/"}


@dataclass(frozen=True)
class ParamExpr:
    """Integer constant plus a linear combination of named parameters (e.g. N - 1)."""

    const: int = 0
    terms: Tuple[Tuple[str, int], ...] = ()

    @staticmethod
    def of(const: int = 0, terms: Optional[Mapping[str, int]] = None) -> "ParamExpr":
        items = tuple(sorted((k, int(v)) for k, v in (terms or {}).items() if int(v) != 0))
        return ParamExpr(int(const), items)

    @property
    def is_constant(self) -> bool:
        return not self.terms

    @property
    def names(self) -> Tuple[str, ...]:
        return tuple(k for k, _ in self.terms)

    def evaluate(self, params: Mapping[str, int]) -> int:
        total = self.const
        for name, coef in self.terms:
            if name not in params:
                raise UnboundParameterError(f"parameter {name!r} is not bound")
            total += coef * int(params[name])
        return total

    def __add__(self, other: Union["ParamExpr", int]) -> "ParamExpr":
        if isinstance(other, int):
            return ParamExpr(self.const + other, self.terms)
        merged: Dict[str, int] = dict(self.terms)
        for k, v in other.terms:
            merged[k] = merged.get(k, 0) + v
        return ParamExpr.of(self.const + other.const, merged)

    def __neg__(self) -> "ParamExpr":
        return ParamExpr(-self.const, tuple((k, -v) for k, v in self.terms))

    def __sub__(self, other: Union["ParamExpr", int]) -> "ParamExpr":
        if isinstance(other, int):
            return ParamExpr(self.const - other, self.terms)
        return self + (-other)

    def __str__(self) -> str:
        parts = []
        for name, coef in self.terms:
            if coef == 1:
                parts.append(("+", name))
            elif coef == -1:
                parts.append(("-", name))
            else:
                parts.append(("-" if coef < 0 else "+", f"{abs(coef)}*{name}"))
        if self.const or not parts:
            parts.append(("-" if self.const < 0 else "+", str(abs(self.const))))
        text = ""
        for i, (sign, body) in enumerate(parts):
            if i == 0:
                text = body if sign == "+" else f"-{body}"
            else:
                text += f" {sign} {body}"
        return text


@dataclass(frozen=True)
class IterationSpace:
    """Rectangular box; bounds are inclusive on both ends."""

    indices: Tuple[str, ...]
    lower: Tuple[ParamExpr, ...]
    upper: Tuple[ParamExpr, ...]

    @property
    def n(self) -> int:
        return len(self.indices)

    def bounds(self, params: Mapping[str, int]) -> Tuple[Tuple[int, int], ...]:
        return tuple((lo.evaluate(params), hi.evaluate(params)) for lo, hi in zip(self.lower, self.upper))

    def extents(self, params: Mapping[str, int]) -> Tuple[int, ...]:
        return tuple(max(0, hi - lo + 1) for lo, hi in self.bounds(params))


@dataclass(frozen=True)
class Inequality:
    """row . i >= offset"""

    row: Tuple[int, ...]
    offset: ParamExpr

    def holds(self, point: Tuple[int, ...], params: Mapping[str, int]) -> bool:
        lhs = sum(a * x for a, x in zip(self.row, point))
        return lhs >= self.offset.evaluate(params)


@dataclass(frozen=True)
class ConditionSpace:
    inequalities: Tuple[Inequality, ...] = ()

    def contains(self, point: Tuple[int, ...], params: Mapping[str, int]) -> bool:
        return all(q.holds(point, params) for q in self.inequalities)

    @property
    def names(self) -> Tuple[str, ...]:
        out = []
        for q in self.inequalities:
            out.extend(q.offset.names)
        return tuple(sorted(set(out)))


@dataclass(frozen=True)
class IndexingFunction:
    """Variable index = matrix . i + offset."""

    matrix: Tuple[Tuple[int, ...], ...]
    offset: Tuple[ParamExpr, ...]

    @staticmethod
    def identity(n: int, shift: Iterable[int] = ()) -> "IndexingFunction":
        shift = tuple(shift) or (0,) * n
        rows = tuple(tuple(1 if r == c else 0 for c in range(n)) for r in range(n))
        return IndexingFunction(rows, tuple(ParamExpr(int(s)) for s in shift))

    @property
    def rank(self) -> int:
        return len(self.matrix)

    def is_identity(self, n: int) -> bool:
        if len(self.matrix) != n:
            return False
        return all(len(row) == n and all(v == (1 if r == c else 0) for c, v in enumerate(row)) for r, row in enumerate(self.matrix))

    def apply(self, point: Tuple[int, ...], params: Mapping[str, int]) -> Tuple[int, ...]:
        return tuple(
            sum(a * x for a, x in zip(row, point)) + off.evaluate(params)
            for row, off in zip(self.matrix, self.offset)
        )


@dataclass(frozen=True)
class Variable:
    name: str
    rank: int
    kind: str = "internal"
    dtype: str = "int32"


@dataclass(frozen=True)
class VarRef:
    var: str
    index: IndexingFunction


@dataclass(frozen=True)
class Literal:
    value: int


Argument = Union[VarRef, Literal]


@dataclass(frozen=True)
class Equation:
    label: str
    target: VarRef
    op: str
    args: Tuple[Argument, ...]
    domain: ConditionSpace = field(default_factory=ConditionSpace)


@dataclass(frozen=True)
class PraProgram:
    name: str
    parameters: Tuple[str, ...]
    variables: Tuple[Variable, ...]
    space: IterationSpace
    equations: Tuple[Equation, ...]

    def variable(self, name: str) -> Variable:
        for v in self.variables:
            if v.name == name:
                return v
        raise KeyError(name)

    def kind_of(self, name: str) -> str:
        return self.variable(name).kind

    @property
    def inputs(self) -> Tuple[Variable, ...]:
        return tuple(v for v in self.variables if v.kind == "input")

    @property
    def outputs(self) -> Tuple[Variable, ...]:
        return tuple(v for v in self.variables if v.kind == "output")

    @property
    def internals(self) -> Tuple[Variable, ...]:
        return tuple(v for v in self.variables if v.kind == "internal")

    def equation(self, label: str) -> Equation:
        for e in self.equations:
            if e.label == label:
                return e
        raise KeyError(label)

    def writers_of(self, name: str) -> Tuple[Equation, ...]:
        return tuple(e for e in self.equations if e.target.var == name)
