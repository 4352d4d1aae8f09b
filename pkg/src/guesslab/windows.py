"""Finite windows on the naturals, stored as bitmask integers.

A ``SetWindow`` stands for a subset of ``[0, horizon)``; bit ``i`` of
``bits`` records membership of ``i``.  Windows are immutable and all set
operations require equal horizons.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Iterator

from .errors import HorizonError


@dataclass(frozen=True)
class SetWindow:
    bits: int
    horizon: int

    def __post_init__(self):
        if self.horizon < 0:
            raise ValueError(f"horizon must be nonnegative, got {self.horizon}")
        if self.bits < 0 or self.bits >> self.horizon:
            raise ValueError("bits outside [0, horizon)")

    # -- constructors ------------------------------------------------------

    @classmethod
    def empty(cls, horizon: int) -> "SetWindow":
        return cls(0, horizon)

    @classmethod
    def full(cls, horizon: int) -> "SetWindow":
        return cls((1 << horizon) - 1, horizon)

    @classmethod
    def from_members(cls, members: Iterable[int], horizon: int) -> "SetWindow":
        bits = 0
        for m in members:
            if not 0 <= m < horizon:
                raise ValueError(f"member {m} outside [0, {horizon})")
            bits |= 1 << m
        return cls(bits, horizon)

    @classmethod
    def from_hex(cls, text: str, horizon: int) -> "SetWindow":
        return cls(int(text, 16), horizon)

    @classmethod
    def interval(cls, start: int, stop: int, horizon: int) -> "SetWindow":
        """Window for ``[start, stop)`` clipped to ``[0, horizon)``."""
        start = max(start, 0)
        stop = min(stop, horizon)
        if stop <= start:
            return cls(0, horizon)
        return cls(((1 << (stop - start)) - 1) << start, horizon)

    # -- queries -----------------------------------------------------------

    def __contains__(self, n: int) -> bool:
        return 0 <= n < self.horizon and (self.bits >> n) & 1 == 1

    def __iter__(self) -> Iterator[int]:
        bits = self.bits
        while bits:
            low = bits & -bits
            yield low.bit_length() - 1
            bits ^= low

    def __len__(self) -> int:
        return self.bits.bit_count()

    def __bool__(self) -> bool:
        return self.bits != 0

    def members(self) -> tuple[int, ...]:
        return tuple(self)

    def min_element(self) -> int | None:
        if not self.bits:
            return None
        return (self.bits & -self.bits).bit_length() - 1

    def to_hex(self) -> str:
        return format(self.bits, "x")

    # -- algebra -----------------------------------------------------------

    def _check(self, other: "SetWindow") -> None:
        if self.horizon != other.horizon:
            raise HorizonError(
                f"window horizons differ: {self.horizon} vs {other.horizon}"
            )

    def __and__(self, other: "SetWindow") -> "SetWindow":
        self._check(other)
        return SetWindow(self.bits & other.bits, self.horizon)

    def __or__(self, other: "SetWindow") -> "SetWindow":
        self._check(other)
        return SetWindow(self.bits | other.bits, self.horizon)

    def __sub__(self, other: "SetWindow") -> "SetWindow":
        self._check(other)
        return SetWindow(self.bits & ~other.bits, self.horizon)

    def complement(self) -> "SetWindow":
        return SetWindow(~self.bits & ((1 << self.horizon) - 1), self.horizon)

    def meets(self, other: "SetWindow") -> bool:
        self._check(other)
        return self.bits & other.bits != 0

    def issubset(self, other: "SetWindow") -> bool:
        self._check(other)
        return self.bits & ~other.bits == 0

    def restrict(self, horizon: int) -> "SetWindow":
        """Truncate to a smaller horizon (or re-tag with a larger one)."""
        if horizon < 0:
            raise ValueError("horizon must be nonnegative")
        return SetWindow(self.bits & ((1 << horizon) - 1), horizon)

    def tail(self, start: int) -> "SetWindow":
        """Members at positions >= start, same horizon."""
        return self & SetWindow.interval(start, self.horizon, self.horizon)
