"""Sum structures over a pairing of the naturals with themselves.

A sum structure glues component guessing structures along a pair codec:
conceptually the level for the pair ``(i, j)`` is level ``j`` of component
``i``.  Evaluating a subject against the sum must agree with evaluating it
against every component separately; that rectangle law is asserted on
every call.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Sequence

from .errors import CodecError, GuesslabError
from .guessing import GuessingStructure, guess_levels
from .windows import SetWindow


class CantorCodec:
    """Diagonal bijection between pairs and naturals."""

    name = "cantor"

    def encode(self, i: int, j: int) -> int:
        if i < 0 or j < 0:
            raise CodecError("pair entries must be naturals")
        s = i + j
        return s * (s + 1) // 2 + j

    def decode(self, n: int) -> tuple[int, int]:
        if n < 0:
            raise CodecError("codes must be naturals")
        w = (math.isqrt(8 * n + 1) - 1) // 2
        j = n - w * (w + 1) // 2
        return w - j, j


class RowMajorCodec:
    """Fixed-width row-major layout; columns must stay below the width."""

    name = "rowmajor"

    def __init__(self, width: int):
        if width < 1:
            raise CodecError("width must be positive")
        self.width = width

    def encode(self, i: int, j: int) -> int:
        if i < 0 or j < 0:
            raise CodecError("pair entries must be naturals")
        if j >= self.width:
            raise CodecError(f"column {j} does not fit width {self.width}")
        return i * self.width + j

    def decode(self, n: int) -> tuple[int, int]:
        if n < 0:
            raise CodecError("codes must be naturals")
        return divmod(n, self.width)


def make_codec(name: str, width: int | None = None):
    if name == "cantor":
        return CantorCodec()
    if name == "rowmajor":
        if width is None:
            raise CodecError("rowmajor codec needs a width")
        return RowMajorCodec(width)
    raise CodecError(f"unknown codec {name!r}")


@dataclass(frozen=True, eq=False)
class SumStructure:
    components: tuple[GuessingStructure, ...]
    codec: object
    code_horizon: int

    @property
    def outer_horizon(self) -> int:
        return len(self.components)

    @property
    def subject_horizon(self) -> int:
        return max((g.subject_horizon for g in self.components), default=0)

    def level(self, i: int, j: int) -> frozenset[int]:
        return self.components[i].level_codes(j)

    def to_descriptor(self, component_paths: Sequence[str]) -> dict:
        if len(component_paths) != len(self.components):
            raise ValueError("one path per component is required")
        desc = {"kind": "sum_structure", "codec": self.codec.name}
        if isinstance(self.codec, RowMajorCodec):
            desc["width"] = self.codec.width
        desc["components"] = list(component_paths)
        return desc

    @classmethod
    def from_descriptor(cls, desc: dict) -> "SumStructure":
        codec = make_codec(desc["codec"], desc.get("width"))
        comps = [GuessingStructure.load(p) for p in desc["components"]]
        return build_sum(comps, codec)


def build_sum(
    structures: Sequence[GuessingStructure], codec
) -> SumStructure:
    """Glue the components along the codec.

    Every in-range pair must encode; the sum's code horizon is one past the
    largest encoding, so decoding stays total on it.  A codec that cannot
    hold some pair (e.g. a too-narrow row-major layout) raises
    :class:`CodecError`.
    """
    if not structures:
        raise ValueError("at least one component is required")
    top = 0
    for i, g in enumerate(structures):
        for j in range(g.horizon):
            top = max(top, codec.encode(i, j))
    return SumStructure(tuple(structures), codec, top + 1 if top or structures else 0)


def sum_guess_levels(
    sum_structure: SumStructure, subject: SetWindow
) -> frozenset[tuple[int, int]]:
    """Pairs ``(i, j)`` at which the subject is guessed.

    Computed directly by decoding every code below the sum's horizon, then
    re-derived as the union of per-component guess windows; the two must
    agree (the rectangle law) and the disagreement case is a hard error.
    """
    comps = sum_structure.components
    direct = set()
    for code in range(sum_structure.code_horizon):
        i, j = sum_structure.codec.decode(code)
        if i >= len(comps) or j >= comps[i].horizon:
            continue
        g = comps[i]
        width = g.f_value(j)
        if subject.bits & ((1 << width) - 1) in g.level_codes(j):
            direct.add((i, j))
    rectangles = set()
    for i, g in enumerate(comps):
        hits = guess_levels(g, subject).hits
        rectangles.update((i, j) for j in hits)
    if direct != rectangles:
        raise GuesslabError(
            "rectangle law violated: direct and columnwise evaluations differ"
        )
    return frozenset(direct)


def guessed_columns(
    sum_structure: SumStructure, subject: SetWindow
) -> frozenset[int]:
    """First coordinates with at least one guessed pair."""
    return frozenset(i for i, _ in sum_guess_levels(sum_structure, subject))
