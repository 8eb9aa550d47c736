from __future__ import annotations

from typing import List, Optional, Sequence, Tuple


class GridloomError(Exception):
    """Base class for every error raised by gridloom."""


# -----------------
# pra-core
# -----------------
class PraSyntaxError(GridloomError):
    def __init__(self, msg: str, *, line: int, col: int, expected: Optional[str] = None):
        where = f"line {line}, column {col}"
        text = f"{where}: {msg}"
        if expected:
            text += f" (expected {expected})"
        super().__init__(text)
        self.line = int(line)
        self.col = int(col)
        self.expected = expected


class PraSemanticError(GridloomError):
    """Unknown identifier, arity mismatch, unsupported construct."""


class InterpretError(GridloomError):
    def __init__(self, msg: str, *, iteration: Optional[Tuple[int, ...]] = None):
        if iteration is not None:
            msg = f"{msg} at iteration {tuple(iteration)}"
        super().__init__(msg)
        self.iteration = tuple(iteration) if iteration is not None else None


class UnboundParameterError(GridloomError):
    pass


class MemImageError(GridloomError):
    pass


# -----------------
# loop-dfg
# -----------------
class LoopNestError(GridloomError):
    pass


class DfgError(GridloomError):
    pass


# -----------------
# cgra
# -----------------
class ArchError(GridloomError):
    pass


class MappingFailed(GridloomError):
    """No mapping within the II limit. Carries the last II tried and the bottleneck."""

    def __init__(self, msg: str, *, last_ii: int, bottleneck: str):
        super().__init__(f"{msg} (last II={last_ii}; bottleneck: {bottleneck})")
        self.last_ii = int(last_ii)
        self.bottleneck = str(bottleneck)


class TractabilityError(GridloomError):
    pass


class ConfigGenError(GridloomError):
    pass


class CgraSimError(GridloomError):
    def __init__(self, msg: str, *, cycle: int, pe: Optional[int] = None):
        super().__init__(f"cycle {cycle}, PE {pe}: {msg}")
        self.cycle = int(cycle)
        self.pe = pe


# -----------------
# tcpa
# -----------------
class TilingError(GridloomError):
    def __init__(self, msg: str, *, factorizations: Sequence[Tuple[int, ...]] = ()):
        if factorizations:
            msg = f"{msg}; admissible tile counts: {list(factorizations)}"
        super().__init__(msg)
        self.factorizations: List[Tuple[int, ...]] = list(factorizations)


class ScheduleError(GridloomError):
    pass


class BindingError(GridloomError):
    def __init__(self, msg: str, *, dependency: str, shortfall: int):
        super().__init__(f"{dependency}: {msg} (short by {shortfall})")
        self.dependency = dependency
        self.shortfall = int(shortfall)


class ProgramCapacityError(GridloomError):
    def __init__(self, *, fu: str, needed: int, capacity: int):
        super().__init__(f"program for FU {fu} needs {needed} words, capacity is {capacity}")
        self.fu = fu
        self.needed = int(needed)
        self.capacity = int(capacity)


class IoAllocError(GridloomError):
    pass


class TcpaSimError(GridloomError):
    def __init__(self, msg: str, *, cycle: int, pe: Optional[Tuple[int, int]] = None, register: Optional[str] = None):
        super().__init__(f"cycle {cycle}, PE {pe}, register {register}: {msg}")
        self.cycle = int(cycle)
        self.pe = pe
        self.register = register
