"""Level-indexed guessing sequences and their evaluation.

A structure holds, for each level ``n`` below its horizon, a family of
prefix patterns of length exactly ``f(n)`` with at most ``pi(n)`` members.
A subject set ``X`` is guessed at ``n`` when its length-``f(n)`` prefix is
one of the patterns.  Patterns are stored as integer codes (bit ``i`` of
the code is character ``i`` of the 0/1 string).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, Mapping

import numpy as np

from .backend import kernels
from .errors import GuesslabError, HorizonError
from .funcspec import FuncSpec, eval_func, parse_funcspec
from .windows import SetWindow


def string_to_code(s: str) -> int:
    code = 0
    for i, ch in enumerate(s):
        if ch == "1":
            code |= 1 << i
        elif ch != "0":
            raise ValueError(f"pattern must be a 0/1 string, got {s!r}")
    return code


def code_to_string(code: int, length: int) -> str:
    return "".join("1" if (code >> i) & 1 else "0" for i in range(length))


def lex_sorted(codes: Iterable[int], length: int) -> list[int]:
    """Codes in lexicographic order of their 0/1 strings (position 0 first)."""
    def rev(c: int) -> int:
        r = 0
        for i in range(length):
            if (c >> i) & 1:
                r |= 1 << (length - 1 - i)
        return r

    return sorted(codes, key=rev)


@dataclass(frozen=True, eq=False)
class GuessingStructure:
    pi: FuncSpec
    f: FuncSpec
    levels: dict[int, frozenset[int]]
    horizon: int
    _f_vals: dict[int, int] = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if self.horizon < 0:
            raise ValueError("horizon must be nonnegative")
        for n, codes in self.levels.items():
            if not 0 <= n < self.horizon:
                raise ValueError(f"level {n} outside [0, {self.horizon})")
            width = self.f_value(n)
            bound = eval_func(self.pi, n)
            if len(codes) > bound:
                raise GuesslabError(
                    f"level {n} holds {len(codes)} patterns, bound pi({n})={bound}"
                )
            for c in codes:
                if c < 0 or c >> width:
                    raise GuesslabError(
                        f"pattern code {c} does not fit width f({n})={width}"
                    )

    def __eq__(self, other) -> bool:
        if not isinstance(other, GuessingStructure):
            return NotImplemented
        return (
            self.pi == other.pi
            and self.f == other.f
            and self.horizon == other.horizon
            and self.nonempty_levels() == other.nonempty_levels()
            and all(self.levels[n] == other.levels[n] for n in self.nonempty_levels())
        )

    # -- construction --------------------------------------------------

    @classmethod
    def from_codes(
        cls,
        pi: FuncSpec,
        f: FuncSpec,
        levels: Mapping[int, Iterable[int]],
        horizon: int,
    ) -> "GuessingStructure":
        cleaned = {
            int(n): frozenset(int(c) for c in codes) for n, codes in levels.items()
        }
        return cls(pi, f, {n: cs for n, cs in cleaned.items() if cs}, horizon)

    @classmethod
    def from_strings(
        cls,
        pi: FuncSpec,
        f: FuncSpec,
        levels: Mapping[int, Iterable[str]],
        horizon: int,
    ) -> "GuessingStructure":
        converted: dict[int, frozenset[int]] = {}
        for n, patterns in levels.items():
            n = int(n)
            width = eval_func(f, n)
            codes = set()
            for s in patterns:
                if len(s) != width:
                    raise GuesslabError(
                        f"pattern {s!r} at level {n} has length {len(s)}, "
                        f"expected f({n})={width}"
                    )
                codes.add(string_to_code(s))
            converted[n] = frozenset(codes)
        return cls(pi, f, converted, horizon)

    # -- accessors ------------------------------------------------------

    def f_value(self, n: int) -> int:
        v = self._f_vals.get(n)
        if v is None:
            v = eval_func(self.f, n)
            self._f_vals[n] = v
        return v

    def level_codes(self, n: int) -> frozenset[int]:
        return self.levels.get(n, frozenset())

    def level_strings(self, n: int) -> tuple[str, ...]:
        width = self.f_value(n)
        return tuple(
            code_to_string(c, width) for c in lex_sorted(self.level_codes(n), width)
        )

    def nonempty_levels(self) -> tuple[int, ...]:
        return tuple(sorted(n for n, cs in self.levels.items() if cs))

    @property
    def subject_horizon(self) -> int:
        """Bits a subject needs so every prefix test below the horizon is
        defined."""
        return max((self.f_value(n) for n in range(self.horizon)), default=0)

    # -- kernel packing ---------------------------------------------------

    def pack_window(self, start: int, stop: int):
        """CSR arrays ``(fmasks, offsets, codes)`` for levels in
        ``[start, stop)``, or ``None`` when some prefix exceeds 64 bits."""
        fmasks, offsets, codes = [], [0], []
        for n in range(start, stop):
            width = self.f_value(n)
            if width > 64:
                return None
            fmasks.append((1 << width) - 1)
            codes.extend(sorted(self.level_codes(n)))
            offsets.append(len(codes))
        return (
            np.asarray(fmasks, dtype=np.uint64),
            np.asarray(offsets, dtype=np.int64),
            np.asarray(codes, dtype=np.uint64),
        )

    # -- serialization ----------------------------------------------------

    def to_json_dict(self) -> dict:
        return {
            "kind": "guessing_structure",
            "horizon": self.horizon,
            "pi": self.pi.name,
            "f": self.f.name,
            "levels": {
                str(n): list(self.level_strings(n)) for n in self.nonempty_levels()
            },
        }

    @classmethod
    def from_json_dict(cls, data: dict) -> "GuessingStructure":
        return cls.from_strings(
            parse_funcspec(data["pi"]),
            parse_funcspec(data["f"]),
            {int(n): pats for n, pats in data["levels"].items()},
            int(data["horizon"]),
        )

    def save(self, path: str) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_json_dict(), fh, indent=1)

    @classmethod
    def load(cls, path: str) -> "GuessingStructure":
        with open(path) as fh:
            return cls.from_json_dict(json.load(fh))


@dataclass(frozen=True)
class GuessSet:
    """Subject plus the window of levels at which it is guessed."""

    subject: SetWindow
    hits: SetWindow


# ---------------------------------------------------------------------------
# operations
# ---------------------------------------------------------------------------


def guess_levels(structure: GuessingStructure, subject: SetWindow) -> GuessSet:
    """Levels whose pattern family contains the subject's prefix."""
    if subject.horizon < structure.subject_horizon:
        raise HorizonError(
            f"subject horizon {subject.horizon} below required "
            f"{structure.subject_horizon}"
        )
    bits = 0
    for n in structure.nonempty_levels():
        width = structure.f_value(n)
        prefix = subject.bits & ((1 << width) - 1)
        if prefix in structure.levels[n]:
            bits |= 1 << n
    return GuessSet(subject, SetWindow(bits, structure.horizon))


def restrict_guessing(
    structure: GuessingStructure, g: FuncSpec
) -> GuessingStructure:
    """Intersect every pattern with the window ``g(n)``.

    The result lives on prefix lengths ``min(f(n), g(n))``; pattern counts
    never grow.  With ``g`` equal to the structure's ``f`` the structure is
    returned unchanged.
    """
    if g == structure.f:
        return structure
    new_f = FuncSpec("min", (structure.f, g))
    new_levels: dict[int, frozenset[int]] = {}
    for n in structure.nonempty_levels():
        width = min(structure.f_value(n), eval_func(g, n))
        mask = (1 << width) - 1
        new_levels[n] = frozenset(c & mask for c in structure.levels[n])
    return GuessingStructure(structure.pi, new_f, new_levels, structure.horizon)


def rk_transport(structure: GuessingStructure, p: FuncSpec) -> GuessingStructure:
    """Pull the structure back along ``p``: level ``i`` becomes the source's
    level ``p(i)``, with both index functions composed with ``p``."""
    h = structure.horizon
    new_levels: dict[int, frozenset[int]] = {}
    for i in range(h):
        j = eval_func(p, i)
        if j >= h:
            raise HorizonError(f"p({i})={j} escapes the horizon {h}")
        codes = structure.level_codes(j)
        if codes:
            new_levels[i] = codes
    return GuessingStructure(
        FuncSpec("compose", (structure.pi, p)),
        FuncSpec("compose", (structure.f, p)),
        new_levels,
        h,
    )


def trace_census(
    structure: GuessingStructure, subjects: Iterable[SetWindow]
) -> dict[int, int]:
    """Per level, the number of distinct prefixes among subjects guessed
    there.  Never exceeds the level's pattern count, hence never ``pi(n)``."""
    counts: dict[int, set[int]] = {}
    for x in subjects:
        gs = guess_levels(structure, x)
        for n in gs.hits:
            width = structure.f_value(n)
            counts.setdefault(n, set()).add(x.bits & ((1 << width) - 1))
    return {n: len(traces) for n, traces in counts.items()}


# ---------------------------------------------------------------------------
# generators for experiments
# ---------------------------------------------------------------------------


def full_powerset_structure(horizon: int) -> GuessingStructure:
    """Every level holds the entire pattern space: pi = 2**n, f = id."""
    levels = {
        n: frozenset(range(1 << n)) for n in range(horizon)
    }
    return GuessingStructure(
        parse_funcspec("pow2(id)"), parse_funcspec("id"), levels, horizon
    )


def random_structure(
    pi: FuncSpec,
    f: FuncSpec,
    horizon: int,
    seed: int,
    max_level_size: int = 1 << 16,
) -> GuessingStructure:
    """Seeded structure with ``min(pi(n), 2**f(n))`` distinct patterns per
    level, drawn from the substream for ``(seed, n)``."""
    levels: dict[int, frozenset[int]] = {}
    for n in range(horizon):
        width = eval_func(f, n)
        space = 1 << width if width < 63 else None
        target = eval_func(pi, n)
        if space is not None:
            target = min(target, space)
        if target > max_level_size:
            raise GuesslabError(
                f"level {n} would need {target} patterns, cap {max_level_size}"
            )
        nwords = max(1, (width + 63) // 64)
        chosen: set[int] = set()
        k = 0
        while len(chosen) < target:
            raw = 0
            for w in range(nwords):
                raw |= kernels.stream_word(seed, n, k * nwords + w) << (64 * w)
            k += 1
            chosen.add(raw & ((1 << width) - 1))
        if chosen:
            levels[n] = frozenset(chosen)
    return GuessingStructure(pi, f, levels, horizon)


def random_subject(horizon: int, seed: int, trial: int) -> SetWindow:
    """Fair-bit subject over ``[0, horizon)`` from the trial substream."""
    nwords = (horizon + 63) // 64
    bits = 0
    for w, word in enumerate(kernels.subject_words(seed, trial, nwords)):
        bits |= word << (64 * w)
    return SetWindow(bits & ((1 << horizon) - 1), horizon)
