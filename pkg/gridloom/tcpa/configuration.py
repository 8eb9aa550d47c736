from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Any, Dict, Mapping, Optional, Sequence, Tuple

from gridloom.pra.interpret import infer_shapes
from gridloom.pra.model import PraProgram
from gridloom.tcpa.arch import TcpaArch
from gridloom.tcpa.binding import RegisterBinding, bind_registers
from gridloom.tcpa.io import IoAllocation, Layout, allocate_io
from gridloom.tcpa.programs import FuProgram, GcTable, ProcessorClass, derive_classes, generate_programs
from gridloom.tcpa.schedule import TcpaSchedule, schedule_loop
from gridloom.tcpa.tiling import Point, Tiling, partition, tileable_dims
from gridloom.util.log import make_debug

_debug = make_debug("tcpa")


@dataclass(frozen=True)
class TcpaConfiguration:
    program: PraProgram
    tiling: Tiling
    schedule: TcpaSchedule
    binding: RegisterBinding
    classes: Tuple[ProcessorClass, ...]
    programs: Dict[int, Dict[str, FuProgram]]
    gc: GcTable
    io: IoAllocation
    shapes: Dict[str, Tuple[int, ...]]

    @property
    def name(self) -> str:
        return self.program.name

    def class_of(self, k: Point) -> ProcessorClass:
        for c in self.classes:
            if k in c.tiles:
                return c
        raise KeyError(k)

    def to_dict(self) -> Dict[str, Any]:
        ii = self.schedule.ii
        return {
            "program": self.program.name,
            "tiling": self.tiling.to_dict(),
            "schedule": self.schedule.to_dict(),
            "binding": self.binding.to_dict(),
            "classes": [
                {
                    "index": c.index,
                    "tiles": [list(k) for k in c.tiles],
                    "programs": {
                        fu: {
                            "words": [w.text(ii) for w in prog.words],
                            "branch": [list(b) for b in prog.branch],
                            "length": prog.length,
                        }
                        for fu, prog in self.programs[c.index].items()
                        if prog.words
                    },
                }
                for c in self.classes
            ],
            "gc": {
                "steady": {str(k): v for k, v in sorted(self.gc.steady.items())},
                "runs": {str(k): [list(r) for r in v] for k, v in sorted(self.gc.runs.items())},
                "signals": [list(s) for s in self.gc.emitted(self.schedule, self.classes)],
            },
            "ag": [s.to_dict() for s in self.io.streams],
        }


def dumps_configuration(c: TcpaConfiguration) -> str:
    return json.dumps(c.to_dict(), indent=2, sort_keys=True) + "\n"


def compile_tcpa(
    p: PraProgram,
    params: Mapping[str, int],
    a: TcpaArch,
    *,
    counts: Optional[Sequence[int]] = None,
    layouts: Optional[Mapping[str, Layout]] = None,
) -> TcpaConfiguration:
    """Partition, schedule, bind, generate programs and address generators in one go."""
    t = partition(p.space, params, a.rows, a.cols, tileable=tileable_dims(p), counts=counts)
    sched = schedule_loop(p, t, a)
    binding = bind_registers(p, sched, t, a)
    classes = derive_classes(p, t)
    programs, gc = generate_programs(p, t, classes, sched, binding, a)
    io = allocate_io(p, t, layouts, a=a)
    _debug(
        f"{p.name} on {a.name}: t={t.counts} II={sched.ii} lambda_k={sched.lambda_k} "
        f"classes={len(classes)} unused PEs={t.unused_pes}"
    )
    return TcpaConfiguration(
        program=p,
        tiling=t,
        schedule=sched,
        binding=binding,
        classes=tuple(classes),
        programs=programs,
        gc=gc,
        io=io,
        shapes=infer_shapes(p, params),
    )
