"""Selectors for partitions into finite pieces.

Given a partition of the window and a source set, the selector keeps the
source's trace on each piece it meets in at most one point and drops the
rest; the result meets every piece at most once by construction.  With a
seeded fair-bit source this mimics drawing a generic set and asking how
often the selector still meets a filter base.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Sequence

from .errors import PartitionError
from .filter_lab import FilterBase
from .guessing import random_subject
from .windows import SetWindow


@dataclass(frozen=True)
class FinitePartition:
    pieces: tuple[SetWindow, ...]
    horizon: int

    def __post_init__(self):
        union = 0
        total = 0
        for p in self.pieces:
            if p.horizon != self.horizon:
                raise PartitionError("piece horizon differs from partition horizon")
            if not p:
                raise PartitionError("pieces must be nonempty")
            union |= p.bits
            total += len(p)
        if union != (1 << self.horizon) - 1 or total != self.horizon:
            raise PartitionError("pieces must be disjoint and cover the window")

    @classmethod
    def from_boundaries(cls, boundaries: Sequence[int]) -> "FinitePartition":
        """Pieces ``[b_k, b_{k+1})`` for an increasing boundary list starting
        at 0; the last boundary is the horizon."""
        if len(boundaries) < 2 or boundaries[0] != 0:
            raise PartitionError("boundaries must start at 0 and name an end")
        if list(boundaries) != sorted(set(boundaries)):
            raise PartitionError("boundaries must be strictly increasing")
        horizon = boundaries[-1]
        pieces = tuple(
            SetWindow.interval(a, b, horizon)
            for a, b in zip(boundaries, boundaries[1:])
        )
        return cls(pieces, horizon)

    def to_json_dict(self) -> dict:
        return {
            "kind": "partition",
            "horizon": self.horizon,
            "pieces": [p.to_hex() for p in self.pieces],
        }

    @classmethod
    def from_json_dict(cls, data: dict) -> "FinitePartition":
        h = int(data["horizon"])
        return cls(
            tuple(SetWindow.from_hex(p, h) for p in data["pieces"]), h
        )


def square_partition(horizon: int) -> FinitePartition:
    """Pieces ``[k**2, (k+1)**2)`` clipped to the horizon."""
    bounds = [0]
    k = 1
    while bounds[-1] < horizon:
        bounds.append(min(k * k, horizon))
        k += 1
    return FinitePartition.from_boundaries(bounds)


@dataclass(frozen=True)
class SelectorResult:
    selected: SetWindow
    source: str
    piece_hits: tuple[int, ...]  # |piece & source| per piece

    def to_record(self) -> dict:
        return {
            "record": "selector",
            "source": self.source,
            "selected_hex": self.selected.to_hex(),
            "piece_hits": list(self.piece_hits),
        }


def extract_selector(
    partition: FinitePartition, source: SetWindow, label: str = "supplied"
) -> SelectorResult:
    """Union of the source's single-point traces on the pieces."""
    if source.horizon != partition.horizon:
        raise PartitionError("source horizon differs from partition horizon")
    bits = 0
    hits = []
    for p in partition.pieces:
        trace = p.bits & source.bits
        count = trace.bit_count()
        hits.append(count)
        if count == 1:
            bits |= trace
    return SelectorResult(
        SetWindow(bits, partition.horizon), label, tuple(hits)
    )


@dataclass(frozen=True)
class MeetReport:
    seed: int
    trials: int
    meets_all: int
    fraction: float
    selector_invariant_ok: bool

    def to_record(self) -> dict:
        return {
            "record": "selector_vs_base",
            "seed": self.seed,
            "trials": self.trials,
            "meets_all": self.meets_all,
            "fraction": self.fraction,
            "selector_invariant_ok": self.selector_invariant_ok,
        }


def selector_vs_base(
    partition: FinitePartition,
    base: FilterBase,
    trials: int,
    seed: int,
) -> MeetReport:
    """Fraction of fair-bit sources whose selector meets every generator.

    Each trial draws its source from the trial substream, extracts the
    selector, and asks whether it intersects every generator of the base.
    The per-piece invariant is re-checked on every trial and folded into
    the report.
    """
    if trials < 1:
        raise ValueError("at least one trial is required")
    if base.horizon != partition.horizon:
        raise PartitionError("base horizon differs from partition horizon")
    meets = 0
    invariant_ok = True
    for t in range(trials):
        source = random_subject(partition.horizon, seed, t)
        result = extract_selector(partition, source, label=f"seed={seed}/t={t}")
        for p in partition.pieces:
            if (p.bits & result.selected.bits).bit_count() > 1:
                invariant_ok = False
        if all(
            result.selected.bits & w.bits for _, w in base.generators
        ):
            meets += 1
    return MeetReport(seed, trials, meets, meets / trials, invariant_ok)
