"""Structured loop-nest description used by the operation-centric path.

A nest is a perfect loop nest (at most four levels) whose body is a list of
scalar statements. Names in the body are loop indices, carried scalars (live
across iterations) and temporaries (live within one iteration). Reading a
carried scalar before it is assigned in the body yields the value from the
previous iteration (or its initial value in the first one).
"""

from __future__ import annotations

import ast
import itertools
import json
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Iterator, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from gridloom.errors import LoopNestError
from gridloom.util.words import apply_binary, select, wrap32

Bound = Union[int, str]

MAX_LEVELS = 4

# op -> arity
OPS: Dict[str, int] = {
    "copy": 1,
    "add": 2,
    "sub": 2,
    "mul": 2,
    "div": 2,
    "cmp_lt": 2,
    "cmp_eq": 2,
    "sel": 3,
}

SECTIONS = ("index", "address", "memory", "compute")


# -----------------
# Bounds
# -----------------
_ALLOWED_NODES = (
    ast.Expression,
    ast.BinOp,
    ast.UnaryOp,
    ast.Add,
    ast.Sub,
    ast.Mult,
    ast.FloorDiv,
    ast.USub,
    ast.Constant,
    ast.Name,
    ast.Load,
)


def eval_bound(b: Bound, params: Mapping[str, int]) -> int:
    """Evaluate a literal or an integer expression over parameters ("N", "N*N", "(N)//4")."""
    if isinstance(b, int):
        return b
    tree = ast.parse(str(b), mode="eval")
    for node in ast.walk(tree):
        if not isinstance(node, _ALLOWED_NODES):
            raise LoopNestError(f"unsupported bound expression {b!r}")
        if isinstance(node, ast.Name) and node.id not in params:
            raise LoopNestError(f"bound {b!r} references unbound parameter {node.id!r}")

    def ev(n: ast.AST) -> int:
        if isinstance(n, ast.Expression):
            return ev(n.body)
        if isinstance(n, ast.Constant):
            return int(n.value)
        if isinstance(n, ast.Name):
            return int(params[n.id])
        if isinstance(n, ast.UnaryOp):
            return -ev(n.operand)
        assert isinstance(n, ast.BinOp)
        lhs, rhs = ev(n.left), ev(n.right)
        if isinstance(n.op, ast.Add):
            return lhs + rhs
        if isinstance(n.op, ast.Sub):
            return lhs - rhs
        if isinstance(n.op, ast.Mult):
            return lhs * rhs
        return lhs // rhs

    return ev(tree)


def bound_names(b: Bound) -> Tuple[str, ...]:
    if isinstance(b, int):
        return ()
    return tuple(sorted({n.id for n in ast.walk(ast.parse(str(b), mode="eval")) if isinstance(n, ast.Name)}))


# -----------------
# Affine index expressions
# -----------------
@dataclass(frozen=True)
class Affine:
    """sum(coef * name) + const; names are scalars of the body or parameters."""

    terms: Tuple[Tuple[str, int], ...] = ()
    const: int = 0

    @staticmethod
    def parse(text: Union[str, int]) -> "Affine":
        if isinstance(text, int):
            return Affine((), text)
        s = str(text).replace(" ", "")
        if not s:
            raise LoopNestError("empty index expression")
        if s[0] not in "+-":
            s = "+" + s
        pieces = re.findall(r"[+-][^+-]+", s)
        if "".join(pieces) != s:
            raise LoopNestError(f"cannot parse index expression {text!r}")
        terms: Dict[str, int] = {}
        order: List[str] = []
        const = 0
        for piece in pieces:
            sign = -1 if piece[0] == "-" else 1
            body = piece[1:]
            m = re.fullmatch(r"(?:(\d+)\*)?([A-Za-z_]\w*)(?:\*(\d+))?", body)
            if re.fullmatch(r"\d+", body):
                const += sign * int(body)
            elif m:
                coef = int(m.group(1) or 1) * int(m.group(3) or 1) * sign
                name = m.group(2)
                if name not in terms:
                    order.append(name)
                terms[name] = terms.get(name, 0) + coef
            else:
                raise LoopNestError(f"non-affine index expression {text!r}")
        return Affine(tuple((n, terms[n]) for n in order if terms[n] != 0), const)

    @property
    def names(self) -> Tuple[str, ...]:
        return tuple(n for n, _ in self.terms)

    def substitute(self, name: str, repl: "Affine") -> "Affine":
        coef = dict(self.terms).get(name, 0)
        if coef == 0:
            return self
        merged: Dict[str, int] = {}
        order: List[str] = []
        for n, c in self.terms:
            if n != name:
                order.append(n)
                merged[n] = c
        for n, c in repl.terms:
            if n not in merged:
                order.append(n)
                merged[n] = 0
            merged[n] += c * coef
        return Affine(tuple((n, merged[n]) for n in order if merged[n] != 0), self.const + coef * repl.const)

    def evaluate(self, env: Mapping[str, int]) -> int:
        return self.const + sum(c * int(env[n]) for n, c in self.terms)

    def __str__(self) -> str:
        parts: List[Tuple[str, str]] = []
        for n, c in self.terms:
            parts.append(("-" if c < 0 else "+", n if abs(c) == 1 else f"{abs(c)}*{n}"))
        if self.const or not parts:
            parts.append(("-" if self.const < 0 else "+", str(abs(self.const))))
        sign, body = parts[0]
        text = f"-{body}" if sign == "-" else body
        for sign, body in parts[1:]:
            text += f" {sign} {body}"
        return text


# -----------------
# Body
# -----------------
@dataclass(frozen=True)
class Ref:
    name: str


@dataclass(frozen=True)
class Imm:
    value: Bound


Operand = Union[Ref, Imm]


@dataclass(frozen=True)
class Assign:
    dest: str
    op: str
    args: Tuple[Operand, ...]
    guard: Optional[str] = None
    section: str = "compute"


@dataclass(frozen=True)
class LoadStmt:
    dest: str
    array: str
    index: Tuple[Affine, ...]


@dataclass(frozen=True)
class StoreStmt:
    array: str
    index: Tuple[Affine, ...]
    value: Operand


Statement = Union[Assign, LoadStmt, StoreStmt]


@dataclass(frozen=True)
class Loop:
    index: str
    lower: Bound
    upper: Bound  # exclusive


@dataclass(frozen=True)
class ArrayDecl:
    name: str
    shape: Tuple[Bound, ...]
    role: str  # in | out | inout
    init: Optional[str] = None  # input image copied in before the run


@dataclass(frozen=True)
class Carried:
    name: str
    init: int = 0


@dataclass(frozen=True)
class LoopNestSpec:
    name: str
    params: Tuple[str, ...]
    loops: Tuple[Loop, ...]
    arrays: Tuple[ArrayDecl, ...]
    carried: Tuple[Carried, ...] = ()
    body: Tuple[Statement, ...] = ()
    meta: Tuple[Tuple[str, str], ...] = field(default=())

    def array(self, name: str) -> ArrayDecl:
        for a in self.arrays:
            if a.name == name:
                return a
        raise LoopNestError(f"unknown array {name!r}")

    @property
    def carried_names(self) -> Tuple[str, ...]:
        return tuple(c.name for c in self.carried)

    def extents(self, params: Mapping[str, int]) -> Tuple[int, ...]:
        return tuple(max(0, eval_bound(l.upper, params) - eval_bound(l.lower, params)) for l in self.loops)

    def trip_count(self, params: Mapping[str, int]) -> int:
        n = 1
        for e in self.extents(params):
            n *= e
        return n

    def trip_expr(self) -> str:
        parts = []
        for l in self.loops:
            if l.lower == 0:
                parts.append(f"({l.upper})")
            else:
                parts.append(f"(({l.upper}) - ({l.lower}))")
        return "*".join(parts) or "1"

    def shape(self, name: str, params: Mapping[str, int]) -> Tuple[int, ...]:
        return tuple(eval_bound(b, params) for b in self.array(name).shape)


# -----------------
# JSON form
# -----------------
def _operand(x: Any) -> Operand:
    if isinstance(x, int):
        return Imm(x)
    s = str(x)
    if s.startswith("#"):
        rest = s[1:]
        return Imm(int(rest) if re.fullmatch(r"-?\d+", rest) else rest)
    return Ref(s)


def _operand_json(o: Operand) -> Any:
    if isinstance(o, Imm):
        return o.value if isinstance(o.value, int) else f"#{o.value}"
    return o.name


def loopnest_from_dict(d: Mapping[str, Any]) -> LoopNestSpec:
    """Build a spec from its JSON form.

    Operands are strings naming scalars, integers, or "#N" for a parameter immediate.
    """
    try:
        body: List[Statement] = []
        for st in d.get("body", []):
            op = st["op"]
            if op == "load":
                body.append(LoadStmt(st["dest"], st["array"], tuple(Affine.parse(x) for x in st["index"])))
            elif op == "store":
                body.append(StoreStmt(st["array"], tuple(Affine.parse(x) for x in st["index"]), _operand(st["value"])))
            else:
                body.append(
                    Assign(
                        dest=st["dest"],
                        op=op,
                        args=tuple(_operand(a) for a in st["args"]),
                        guard=st.get("guard"),
                        section=st.get("section", "compute"),
                    )
                )
        spec = LoopNestSpec(
            name=str(d["name"]),
            params=tuple(d.get("params", [])),
            loops=tuple(Loop(str(l[0]), l[1], l[2]) for l in d["loops"]),
            arrays=tuple(
                ArrayDecl(a["name"], tuple(a["shape"]), a.get("role", "in"), a.get("init"))
                for a in d.get("arrays", [])
            ),
            carried=tuple(Carried(c["name"], int(c.get("init", 0))) for c in d.get("carried", [])),
            body=tuple(body),
        )
    except (KeyError, IndexError, TypeError) as e:
        raise LoopNestError(f"malformed loop-nest description: {e}") from e
    return spec


def loopnest_to_dict(spec: LoopNestSpec) -> Dict[str, Any]:
    body: List[Dict[str, Any]] = []
    for st in spec.body:
        if isinstance(st, LoadStmt):
            body.append({"op": "load", "dest": st.dest, "array": st.array, "index": [str(x) for x in st.index]})
        elif isinstance(st, StoreStmt):
            body.append(
                {"op": "store", "array": st.array, "index": [str(x) for x in st.index], "value": _operand_json(st.value)}
            )
        else:
            item: Dict[str, Any] = {"op": st.op, "dest": st.dest, "args": [_operand_json(a) for a in st.args]}
            if st.guard:
                item["guard"] = st.guard
            if st.section != "compute":
                item["section"] = st.section
            body.append(item)
    return {
        "name": spec.name,
        "params": list(spec.params),
        "loops": [[l.index, l.lower, l.upper] for l in spec.loops],
        "arrays": [
            {"name": a.name, "shape": list(a.shape), "role": a.role, **({"init": a.init} if a.init else {})}
            for a in spec.arrays
        ],
        "carried": [{"name": c.name, "init": c.init} for c in spec.carried],
        "body": body,
    }


def load_loopnest(path: Union[str, Path]) -> LoopNestSpec:
    return loopnest_from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


# -----------------
# Validation
# -----------------
def validate_loopnest(spec: LoopNestSpec) -> List[str]:
    """Static checks; returns diagnostics (empty list when the spec is usable)."""
    diags: List[str] = []
    if not spec.loops:
        diags.append("loop nest has no loops")
    if len(spec.loops) > MAX_LEVELS:
        diags.append(f"loop nest has {len(spec.loops)} levels, at most {MAX_LEVELS} supported")
    params = set(spec.params)
    for l in spec.loops:
        for b in (l.lower, l.upper):
            for n in bound_names(b):
                if n not in params:
                    diags.append(f"loop {l.index}: bound references unknown parameter {n!r}")
    arrays = {a.name for a in spec.arrays}
    for a in spec.arrays:
        if a.role not in ("in", "out", "inout"):
            diags.append(f"array {a.name}: unknown role {a.role!r}")
        if a.init is not None and a.role == "in":
            diags.append(f"array {a.name}: only written arrays take an init image")
    defined = set(spec.carried_names) | {l.index for l in spec.loops}
    tainted: set = set()
    for pos, st in enumerate(spec.body):
        where = f"statement {pos}"
        if isinstance(st, (LoadStmt, StoreStmt)):
            if st.array not in arrays:
                diags.append(f"{where}: unknown array {st.array!r}")
            else:
                rank = len(spec.array(st.array).shape)
                if len(st.index) != rank:
                    diags.append(f"{where}: {st.array} indexed with {len(st.index)} subscripts, rank {rank}")
            for aff in st.index:
                for n in aff.names:
                    if n in params:
                        continue
                    if n not in defined:
                        diags.append(f"{where}: index uses undefined name {n!r}")
                    elif n in tainted:
                        diags.append(f"{where}: non-affine index ({n!r} depends on loaded data)")
        if isinstance(st, StoreStmt):
            if st.array in arrays and spec.array(st.array).role == "in":
                diags.append(f"{where}: store to input array {st.array}")
            operands: Sequence[Operand] = (st.value,)
        elif isinstance(st, Assign):
            if st.op not in OPS:
                diags.append(f"{where}: unknown op {st.op!r}")
            elif len(st.args) != OPS[st.op]:
                diags.append(f"{where}: {st.op} takes {OPS[st.op]} operands, got {len(st.args)}")
            if st.section not in SECTIONS:
                diags.append(f"{where}: unknown section {st.section!r}")
            if st.guard is not None:
                if st.guard not in defined:
                    diags.append(f"{where}: guard {st.guard!r} is undefined")
                if st.dest not in defined:
                    diags.append(f"{where}: guarded assignment to {st.dest!r}, which has no prior value")
            operands = st.args
        else:
            operands = ()
        for o in operands:
            if isinstance(o, Ref) and o.name not in defined:
                diags.append(f"{where}: use of undefined name {o.name!r}")
            if isinstance(o, Imm):
                for n in bound_names(o.value):
                    if n not in params:
                        diags.append(f"{where}: immediate references unknown parameter {n!r}")
        if isinstance(st, LoadStmt):
            defined.add(st.dest)
            tainted.add(st.dest)
        elif isinstance(st, Assign):
            srcs = [o.name for o in st.args if isinstance(o, Ref)] + ([st.guard] if st.guard else [])
            if any(s in tainted for s in srcs):
                tainted.add(st.dest)
            else:
                tainted.discard(st.dest)
            defined.add(st.dest)
    return diags


def require_valid(spec: LoopNestSpec) -> None:
    diags = validate_loopnest(spec)
    if diags:
        raise LoopNestError("; ".join(diags))


# -----------------
# Scalar body evaluator
# -----------------
@dataclass(frozen=True)
class MemAccess:
    iteration: int
    stmt: int
    array: str
    address: int  # row-major element offset within the array
    kind: str  # load | store


def iterate_points(spec: LoopNestSpec, params: Mapping[str, int]) -> Iterator[Tuple[int, ...]]:
    ranges = [range(eval_bound(l.lower, params), eval_bound(l.upper, params)) for l in spec.loops]
    return itertools.product(*ranges)


def _linear(spec: LoopNestSpec, array: str, idx: Sequence[int], params: Mapping[str, int]) -> int:
    shape = spec.shape(array, params)
    addr = 0
    for x, n in zip(idx, shape):
        if x < 0 or x >= n:
            raise LoopNestError(f"index {list(idx)} outside {array}{list(shape)}")
        addr = addr * n + x
    return addr


def initial_arrays(spec: LoopNestSpec, params: Mapping[str, int], inputs: Mapping[str, np.ndarray]) -> Dict[str, np.ndarray]:
    arrays: Dict[str, np.ndarray] = {}
    for a in spec.arrays:
        shape = spec.shape(a.name, params)
        if a.role == "in":
            src = inputs.get(a.name)
        else:
            src = inputs.get(a.init) if a.init else inputs.get(a.name) if a.role == "inout" else None
        if src is None:
            if a.role == "in" or a.init:
                raise LoopNestError(f"missing input image for array {a.name} ({a.init or a.name})")
            arrays[a.name] = np.zeros(shape, dtype=np.int32)
            continue
        arr = np.array(src, dtype=np.int32)
        if arr.shape != shape:
            raise LoopNestError(f"image for {a.name} has shape {arr.shape}, expected {shape}")
        arrays[a.name] = arr
    return arrays


def evaluate_loopnest(
    spec: LoopNestSpec,
    params: Mapping[str, int],
    inputs: Mapping[str, np.ndarray],
    *,
    trace: Optional[List[MemAccess]] = None,
) -> Dict[str, np.ndarray]:
    """Execute the nest sequentially with 32-bit wrapping semantics.

    Returns the written arrays (role out/inout). If `trace` is given, every
    memory access is appended to it.
    """
    require_valid(spec)
    arrays = initial_arrays(spec, params, inputs)
    flat = {k: v.reshape(-1) for k, v in arrays.items()}
    env: Dict[str, int] = {c.name: c.init for c in spec.carried}
    index_names = [l.index for l in spec.loops]

    def val(o: Operand) -> int:
        if isinstance(o, Imm):
            return eval_bound(o.value, params)
        return env[o.name]

    for it, point in enumerate(iterate_points(spec, params)):
        env.update(zip(index_names, point))
        scope = dict(params)
        for pos, st in enumerate(spec.body):
            scope.update(env)
            if isinstance(st, LoadStmt):
                addr = _linear(spec, st.array, [a.evaluate(scope) for a in st.index], params)
                env[st.dest] = int(flat[st.array][addr])
                if trace is not None:
                    trace.append(MemAccess(it, pos, st.array, addr, "load"))
            elif isinstance(st, StoreStmt):
                addr = _linear(spec, st.array, [a.evaluate(scope) for a in st.index], params)
                flat[st.array][addr] = val(st.value)
                if trace is not None:
                    trace.append(MemAccess(it, pos, st.array, addr, "store"))
            else:
                args = [val(a) for a in st.args]
                if st.op == "copy":
                    res = wrap32(args[0])
                elif st.op == "sel":
                    res = select(args[0], args[1], args[2])
                else:
                    try:
                        res = apply_binary(st.op, args[0], args[1])
                    except ZeroDivisionError:
                        raise LoopNestError(f"division by zero in statement {pos} at iteration {point}") from None
                if st.guard is not None:
                    res = res if env[st.guard] != 0 else env[st.dest]
                env[st.dest] = res
    return {a.name: arrays[a.name] for a in spec.arrays if a.role != "in"}
