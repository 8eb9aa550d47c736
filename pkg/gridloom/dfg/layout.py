from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, List, Mapping, Sequence, Tuple

from gridloom.errors import ConfigGenError

WORD_BYTES = 4


@dataclass(frozen=True)
class ArrayPlacement:
    array: str
    bank: int
    offset_words: int
    words: int

    @property
    def byte_offset(self) -> int:
        return self.offset_words * WORD_BYTES


@dataclass(frozen=True)
class SpmLayout:
    """Arrays placed into scratchpad banks; global word address = bank * bank_words + offset."""

    bank_words: int
    banks: int
    placements: Tuple[ArrayPlacement, ...]

    def placement(self, array: str) -> ArrayPlacement:
        for p in self.placements:
            if p.array == array:
                return p
        raise KeyError(array)

    def base(self, array: str) -> int:
        p = self.placement(array)
        return p.bank * self.bank_words + p.offset_words

    def used_words(self, bank: int) -> int:
        return sum(p.words for p in self.placements if p.bank == bank)


def plan_layout(sizes: Sequence[Tuple[str, int]], *, banks: int, bank_bytes: int) -> SpmLayout:
    """Place arrays (in the given order) into the least-used bank with room; ties go to the lowest bank."""
    bank_words = bank_bytes // WORD_BYTES
    used: List[int] = [0] * banks
    out: List[ArrayPlacement] = []
    for name, words in sizes:
        fitting = [b for b in range(banks) if used[b] + words <= bank_words]
        if not fitting:
            raise ConfigGenError(
                f"array {name} ({words * WORD_BYTES} B) does not fit any bank "
                f"(capacity {bank_bytes} B, used {[u * WORD_BYTES for u in used]})"
            )
        b = min(fitting, key=lambda k: (used[k], k))
        out.append(ArrayPlacement(name, b, used[b], words))
        used[b] += words
    return SpmLayout(bank_words=bank_words, banks=banks, placements=tuple(out))


def layout_from_mapping(raw: Mapping[str, Mapping[str, int]], *, bank_bytes: int, banks: int) -> SpmLayout:
    placements = [ArrayPlacement(k, int(v["bank"]), int(v["offset_words"]), int(v["words"])) for k, v in raw.items()]
    return SpmLayout(bank_words=bank_bytes // WORD_BYTES, banks=banks, placements=tuple(placements))


def layout_to_dict(layout: SpmLayout) -> Dict[str, Dict[str, int]]:
    return {
        p.array: {"bank": p.bank, "offset_words": p.offset_words, "words": p.words, "byte_offset": p.byte_offset}
        for p in layout.placements
    }
