from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, Optional

import numpy as np


@dataclass
class SimResult:
    """Outputs and cycle counts of one simulated run.

    `latency` is the cycle in which the last operation completes (0 for an
    empty run). The TCPA simulator also reports when the first and last PE
    finish, how busy each PE was and how full each FIFO got.
    """

    outputs: Dict[str, np.ndarray] = field(default_factory=dict)
    latency: int = 0
    iterations: int = 0
    first_pe_latency: Optional[int] = None
    last_pe_latency: Optional[int] = None
    busy: Dict[str, int] = field(default_factory=dict)  # PE -> cycles with at least one operation
    fifo_peak: Dict[str, int] = field(default_factory=dict)  # FIFO register -> largest occupancy read

    def matches(self, expected: Dict[str, np.ndarray]) -> bool:
        return set(expected) <= set(self.outputs) and all(
            np.array_equal(self.outputs[k], np.asarray(v, dtype=np.int32)) for k, v in expected.items()
        )
