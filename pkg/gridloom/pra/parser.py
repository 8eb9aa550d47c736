from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple

from gridloom.errors import PraSemanticError, PraSyntaxError
from gridloom.pra.model import (
    OP_ARITY,
    Argument,
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
from gridloom.util.log import make_debug

_debug = make_debug("pra.parse")

_TOKEN_RE = re.compile(
    r"(?P<ws>[ \t\r]+)|(?P<nl>\n)|(?P<comment>//[^\n]*)"
    r"|(?P<num>\d+)|(?P<name>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>>=|<=|==|[-+*/<>=(){}\[\],;:])"
)

_TYPES = {"int", "int32", "float", "integer"}
_SYMBOL_OPS = {"+": "add", "-": "sub", "*": "mul", "/": "div"}


@dataclass(frozen=True)
class _Tok:
    kind: str
    text: str
    line: int
    col: int


def _tokenize(text: str) -> List[_Tok]:
    toks: List[_Tok] = []
    line, line_start, pos = 1, 0, 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise PraSyntaxError(f"unexpected character {text[pos]!r}", line=line, col=pos - line_start + 1)
        kind = m.lastgroup or ""
        if kind == "nl":
            line += 1
            line_start = m.end()
        elif kind not in ("ws", "comment"):
            toks.append(_Tok(kind, m.group(), line, m.start() - line_start + 1))
        pos = m.end()
    toks.append(_Tok("eof", "", line, pos - line_start + 1))
    return toks


class _Affine:
    """Affine form over iteration indices plus a parameter part."""

    def __init__(self, coefs: Optional[Dict[str, int]] = None, rest: Optional[ParamExpr] = None):
        self.coefs: Dict[str, int] = dict(coefs or {})
        self.rest = rest or ParamExpr()

    def scaled(self, k: int) -> "_Affine":
        rest = ParamExpr.of(self.rest.const * k, {n: c * k for n, c in self.rest.terms})
        return _Affine({n: c * k for n, c in self.coefs.items()}, rest)

    def plus(self, other: "_Affine") -> "_Affine":
        coefs = dict(self.coefs)
        for n, c in other.coefs.items():
            coefs[n] = coefs.get(n, 0) + c
        return _Affine(coefs, self.rest + other.rest)

    def row(self, indices: Tuple[str, ...]) -> Tuple[int, ...]:
        return tuple(self.coefs.get(i, 0) for i in indices)


class _Parser:
    def __init__(self, text: str):
        self.toks = _tokenize(text)
        self.pos = 0
        self.params: List[str] = []
        self.vars: Dict[str, Variable] = {}
        self.indices: Tuple[str, ...] = ()

    # -----------------
    # token helpers
    # -----------------
    @property
    def tok(self) -> _Tok:
        return self.toks[self.pos]

    def _peek(self, k: int = 1) -> _Tok:
        return self.toks[min(self.pos + k, len(self.toks) - 1)]

    def _err(self, msg: str, expected: Optional[str] = None, tok: Optional[_Tok] = None) -> PraSyntaxError:
        t = tok or self.tok
        return PraSyntaxError(msg, line=t.line, col=t.col, expected=expected)

    def _accept(self, text: str) -> bool:
        if self.tok.text == text and self.tok.kind in ("op", "name"):
            self.pos += 1
            return True
        return False

    def _expect(self, text: str) -> _Tok:
        t = self.tok
        if not self._accept(text):
            found = t.text or "end of input"
            raise self._err(f"unexpected {found!r}", expected=repr(text))
        return t

    def _name(self) -> _Tok:
        t = self.tok
        if t.kind != "name":
            raise self._err(f"unexpected {t.text or 'end of input'!r}", expected="identifier")
        self.pos += 1
        return t

    def _int(self) -> int:
        t = self.tok
        if t.kind != "num":
            raise self._err(f"unexpected {t.text or 'end of input'!r}", expected="integer")
        self.pos += 1
        return int(t.text)

    # -----------------
    # grammar
    # -----------------
    def program(self) -> PraProgram:
        self._expect("program")
        name = self._name().text
        self._expect("{")
        while self.tok.text in ("variable", "parameter"):
            self._declaration()
        self._expect("par")
        self._expect("(")
        space = self._par_predicate()
        self._expect(")")
        self._expect("{")
        equations: List[Equation] = []
        while not (self.tok.kind == "op" and self.tok.text == "}"):
            if self.tok.kind == "eof":
                raise self._err("unexpected end of input", expected="'}'")
            equations.append(self._equation(len(equations) + 1))
        self._expect("}")
        self._expect("}")
        if self.tok.kind != "eof":
            raise self._err(f"trailing input {self.tok.text!r}", expected="end of input")
        labels = [e.label for e in equations]
        if len(set(labels)) != len(labels):
            raise PraSemanticError(f"duplicate equation labels in {labels}")
        _debug(f"parsed program={name} vars={len(self.vars)} equations={len(equations)}")
        return PraProgram(
            name=name,
            parameters=tuple(self.params),
            variables=tuple(self.vars.values()),
            space=space,
            equations=tuple(equations),
        )

    def _declaration(self) -> None:
        if self._accept("parameter"):
            name = self._name()
            self._check_fresh(name)
            self.params.append(name.text)
            self._expect(";")
            return
        self._expect("variable")
        name = self._name()
        self._check_fresh(name)
        rank = self._int()
        kind = "internal"
        if self._accept("in"):
            kind = "input"
        elif self._accept("out"):
            kind = "output"
        type_tok = self._name()
        if type_tok.text not in _TYPES:
            raise self._err(f"unknown type {type_tok.text!r}", expected="int or float", tok=type_tok)
        self._expect(";")
        # Every element type is carried as a 32-bit signed word.
        self.vars[name.text] = Variable(name=name.text, rank=rank, kind=kind, dtype="int32")

    def _check_fresh(self, tok: _Tok) -> None:
        if tok.text in self.vars or tok.text in self.params:
            raise PraSemanticError(f"line {tok.line}: {tok.text!r} declared twice")

    def _par_predicate(self) -> IterationSpace:
        lower: Dict[str, ParamExpr] = {}
        upper: Dict[str, ParamExpr] = {}
        order: List[str] = []
        while True:
            first = self.tok
            idx = self._name()
            if idx.text in self.vars or idx.text in self.params:
                raise self._err(f"{idx.text!r} is not an iteration index", tok=idx)
            if idx.text not in order:
                order.append(idx.text)
            op = self.tok
            if op.text not in (">=", ">", "<=", "<"):
                raise self._err(f"unexpected {op.text!r}", expected="comparison")
            self.pos += 1
            bound = self._param_expr()
            if op.text == ">":
                bound = bound + 1
            elif op.text == "<":
                bound = bound - 1
            table = lower if op.text in (">=", ">") else upper
            if idx.text in table:
                raise PraSemanticError(
                    f"line {first.line}: non-rectangular iteration space ({idx.text} bounded twice on one side)"
                )
            table[idx.text] = bound
            if not self._accept("and"):
                break
        for i in order:
            if i not in lower or i not in upper:
                raise PraSemanticError(f"non-rectangular iteration space: {i} lacks a lower or upper bound")
        self.indices = tuple(order)
        return IterationSpace(
            indices=self.indices,
            lower=tuple(lower[i] for i in order),
            upper=tuple(upper[i] for i in order),
        )

    def _param_expr(self) -> ParamExpr:
        aff = self._affine(allow_indices=False)
        return aff.rest

    def _affine(self, *, allow_indices: bool = True) -> _Affine:
        sign = -1 if self._accept("-") else 1
        acc = self._affine_term().scaled(sign)
        while self.tok.text in ("+", "-") and self.tok.kind == "op":
            sign = 1 if self.tok.text == "+" else -1
            self.pos += 1
            acc = acc.plus(self._affine_term().scaled(sign))
        if not allow_indices and any(c for c in acc.coefs.values()):
            raise self._err("bound must not depend on iteration indices")
        return acc

    def _affine_term(self) -> _Affine:
        if self.tok.kind == "num":
            k = self._int()
            if self._accept("*"):
                return self._affine_atom().scaled(k)
            return _Affine(rest=ParamExpr(k))
        return self._affine_atom()

    def _affine_atom(self) -> _Affine:
        t = self._name()
        if t.text in self.params:
            return _Affine(rest=ParamExpr.of(0, {t.text: 1}))
        if t.text in self.indices:
            return _Affine({t.text: 1})
        if t.text in self.vars:
            raise PraSemanticError(f"line {t.line}, column {t.col}: variable {t.text!r} used in an affine expression")
        raise PraSemanticError(f"line {t.line}, column {t.col}: unknown identifier {t.text!r}")

    def _equation(self, position: int) -> Equation:
        label = f"S{position}"
        if self.tok.kind == "name" and self._peek().text == ":":
            label = self._name().text
            self._expect(":")
        target = self._var_ref(self._name())
        if self.vars[target.var].kind == "input":
            raise PraSemanticError(f"{label}: input variable {target.var!r} cannot be defined")
        self._expect("=")
        op, args = self._rhs(label)
        domain = ConditionSpace()
        if self._accept("if"):
            self._expect("(")
            domain = self._guard()
            self._expect(")")
        self._expect(";")
        return Equation(label=label, target=target, op=op, args=tuple(args), domain=domain)

    def _rhs(self, label: str) -> Tuple[str, List[Argument]]:
        if self.tok.kind == "name" and self.tok.text in ("select", "compare") and self._peek().text == "(":
            fn = self._name()
            self._expect("(")
            args = [self._operand()]
            while self._accept(","):
                args.append(self._operand())
            self._expect(")")
            if len(args) != OP_ARITY[fn.text]:
                raise PraSemanticError(
                    f"line {fn.line}: {label}: {fn.text} takes {OP_ARITY[fn.text]} arguments, got {len(args)}"
                )
            return fn.text, args
        first = self._operand()
        if self.tok.kind == "op" and self.tok.text in _SYMBOL_OPS:
            op = _SYMBOL_OPS[self.tok.text]
            self.pos += 1
            second = self._operand()
            if self.tok.kind == "op" and self.tok.text in _SYMBOL_OPS:
                raise PraSemanticError(f"line {self.tok.line}: {label}: arity mismatch, at most one operator per equation")
            return op, [first, second]
        return "copy", [first]

    def _operand(self) -> Argument:
        if self.tok.kind == "num":
            return Literal(self._int())
        if self.tok.text == "-" and self._peek().kind == "num":
            self.pos += 1
            return Literal(-self._int())
        return self._var_ref(self._name())

    def _var_ref(self, name: _Tok) -> VarRef:
        if name.text not in self.vars:
            raise PraSemanticError(f"line {name.line}, column {name.col}: unknown identifier {name.text!r}")
        var = self.vars[name.text]
        rows: List[Tuple[int, ...]] = []
        offsets: List[ParamExpr] = []
        if self._accept("["):
            while True:
                aff = self._affine()
                rows.append(aff.row(self.indices))
                offsets.append(aff.rest)
                if not self._accept(","):
                    break
            self._expect("]")
        if len(rows) != var.rank:
            raise PraSemanticError(
                f"line {name.line}: {name.text!r} has rank {var.rank} but is indexed with {len(rows)} subscripts"
            )
        return VarRef(name.text, IndexingFunction(tuple(rows), tuple(offsets)))

    def _guard(self) -> ConditionSpace:
        ineqs: List[Inequality] = []
        while True:
            if self._accept("("):
                ineqs.extend(self._guard().inequalities)
                self._expect(")")
            else:
                ineqs.extend(self._comparison())
            if not self._accept("and"):
                break
        return ConditionSpace(tuple(ineqs))

    def _comparison(self) -> List[Inequality]:
        lhs = self._affine()
        op = self.tok
        if op.kind != "op" or op.text not in (">=", ">", "<=", "<", "=="):
            raise self._err(f"unexpected {op.text or 'end of input'!r}", expected="comparison operator")
        self.pos += 1
        rhs = self._affine()
        # lhs - rhs >= 0  <=>  row . i >= (rhs.rest - lhs.rest)
        diff = lhs.plus(rhs.scaled(-1))
        row = diff.row(self.indices)
        neg_row = tuple(-a for a in row)
        bound = -diff.rest
        if op.text == ">=":
            return [Inequality(row, bound)]
        if op.text == ">":
            return [Inequality(row, bound + 1)]
        if op.text == "<=":
            return [Inequality(neg_row, -bound)]
        if op.text == "<":
            return [Inequality(neg_row, -bound + 1)]
        return [Inequality(row, bound), Inequality(neg_row, -bound)]


def parse_pra(text: str) -> PraProgram:
    """Parse a program written in the PAULA-like dialect.

    Raises PraSyntaxError (with line/column and the expected token) or
    PraSemanticError (unknown identifier, arity mismatch, non-rectangular space).
    """
    return _Parser(text).program()
