"""Finite filter bases: intersection certificates, growth-gap probes,
good-style extension steps, and independent families for contrast.

A base is a named family of windows standing in for filter generators.
Everything a genuine filter quantifies over infinitely many sets or
functions is approximated three-valuedly here: a verdict is supported or
refuted *at the horizon*, never absolutely.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass
from typing import Iterable, Sequence

from .errors import FipError, GuesslabError, HorizonError
from .funcspec import FuncSpec, eval_func
from .pseudo_tree import BranchSample, PseudoTree
from .windows import SetWindow

DEFAULT_FIP_ARITY = 5


@dataclass(frozen=True)
class FilterBase:
    generators: tuple[tuple[str, SetWindow], ...]
    horizon: int

    def __post_init__(self):
        names = [n for n, _ in self.generators]
        if len(set(names)) != len(names):
            raise ValueError("generator names must be distinct")
        for _, w in self.generators:
            if w.horizon != self.horizon:
                raise HorizonError("generator horizon differs from base horizon")

    @classmethod
    def from_named(
        cls, named: Iterable[tuple[str, SetWindow]], horizon: int
    ) -> "FilterBase":
        return cls(tuple(named), horizon)

    def names(self) -> tuple[str, ...]:
        return tuple(n for n, _ in self.generators)

    def window(self, name: str) -> SetWindow:
        for n, w in self.generators:
            if n == name:
                return w
        raise KeyError(name)

    def empty_names(self) -> tuple[str, ...]:
        """Generators empty at the horizon; surfaced by FIP checks too."""
        return tuple(n for n, w in self.generators if not w)

    def extended(self, name: str, window: SetWindow) -> "FilterBase":
        return FilterBase(self.generators + ((name, window),), self.horizon)

    # -- serialization ------------------------------------------------------

    def to_json_dict(self) -> dict:
        return {
            "kind": "filter_base",
            "horizon": self.horizon,
            "generators": [
                {"name": n, "hex": w.to_hex()} for n, w in self.generators
            ],
        }

    @classmethod
    def from_json_dict(cls, data: dict) -> "FilterBase":
        h = int(data["horizon"])
        return cls(
            tuple(
                (g["name"], SetWindow.from_hex(g["hex"], h))
                for g in data["generators"]
            ),
            h,
        )

    def save(self, path: str) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_json_dict(), fh, indent=1)

    @classmethod
    def load(cls, path: str) -> "FilterBase":
        with open(path) as fh:
            return cls.from_json_dict(json.load(fh))


# ---------------------------------------------------------------------------
# base from a tree
# ---------------------------------------------------------------------------


def branch_hit_window(tree: PseudoTree, branch: BranchSample) -> SetWindow:
    """Levels whose node set contains the branch's restriction."""
    bits = 0
    for k in tree.nonempty_levels():
        width = tree.f_value(k)
        if branch.bits.bits & ((1 << width) - 1) in set(tree.levels[k]):
            bits |= 1 << k
    return SetWindow(bits, tree.horizon)


def base_from_tree(
    tree: PseudoTree, branches: Sequence[BranchSample]
) -> FilterBase:
    """One generator per branch: the window of levels guessing it."""
    gens = []
    for i, b in enumerate(branches):
        if b.bits.horizon != tree.horizon:
            raise HorizonError(
                f"branch {i} horizon {b.bits.horizon} != tree horizon {tree.horizon}"
            )
        gens.append((f"b{i}", branch_hit_window(tree, b)))
    return FilterBase(tuple(gens), tree.horizon)


# ---------------------------------------------------------------------------
# finite intersection property
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FipRecord:
    names: tuple[str, ...]
    witness: int | None


@dataclass(frozen=True)
class FipReport:
    arity: int
    records: tuple[FipRecord, ...]

    @property
    def ok(self) -> bool:
        return all(r.witness is not None for r in self.records)

    def failures(self) -> tuple[FipRecord, ...]:
        return tuple(r for r in self.records if r.witness is None)

    def to_record(self) -> dict:
        return {
            "record": "fip",
            "ok": self.ok,
            "arity": self.arity,
            "subfamilies": len(self.records),
            "failures": [list(r.names) for r in self.failures()],
        }


def check_fip(base: FilterBase, arity: int) -> FipReport:
    """Exhaustively intersect every subfamily of size up to ``arity``.

    Each record carries the least witness element, or None on failure.
    """
    if arity > len(base.generators):
        raise ValueError(
            f"arity {arity} exceeds generator count {len(base.generators)}"
        )
    records = []
    for size in range(1, arity + 1):
        for combo in itertools.combinations(base.generators, size):
            bits = (1 << base.horizon) - 1
            for _, w in combo:
                bits &= w.bits
            witness = (bits & -bits).bit_length() - 1 if bits else None
            records.append(FipRecord(tuple(n for n, _ in combo), witness))
    return FipReport(arity, tuple(records))


# ---------------------------------------------------------------------------
# growth-gap (sky) probes
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SkyProbeRecord:
    test: str
    subfamily: tuple[str, ...]
    below_window: SetWindow  # {n in X : g(pi(n)) < f(n)}
    tail_nonempty: bool      # probe tail X past the midpoint is inhabited
    supported: bool          # below-window meets the probe tail


@dataclass(frozen=True)
class SkyVerdict:
    relation: str  # "<" or ">="
    verdict: str   # "supported" | "refuted-at-horizon" | "inconclusive"
    records: tuple[SkyProbeRecord, ...]
    counterexample: SetWindow | None
    midpoint: int

    def to_record(self) -> dict:
        return {
            "record": "sky",
            "relation": self.relation,
            "verdict": self.verdict,
            "midpoint": self.midpoint,
            "counterexample": None
            if self.counterexample is None
            else self.counterexample.to_hex(),
            "probes": [
                {
                    "test": r.test,
                    "subfamily": list(r.subfamily),
                    "supported": r.supported,
                    "tail_nonempty": r.tail_nonempty,
                }
                for r in self.records
            ],
        }


def growth_gap_window(
    pi: FuncSpec, f: FuncSpec, g: FuncSpec, horizon: int
) -> SetWindow:
    """``{n < horizon : g(pi(n)) < f(n)}``; overflow counts as huge."""
    bits = 0
    for n in range(horizon):
        try:
            left = eval_func(g, eval_func(pi, n))
        except GuesslabError:
            continue  # overflowed composite dominates every f value
        try:
            right = eval_func(f, n)
        except GuesslabError:
            bits |= 1 << n
            continue
        if left < right:
            bits |= 1 << n
    return SetWindow(bits, horizon)


def sky_probe(
    pi: FuncSpec,
    f: FuncSpec,
    base: FilterBase,
    tests: Sequence[FuncSpec],
    relation: str = "<",
    arity: int = 2,
    midpoint: int | None = None,
) -> SkyVerdict:
    """Probe the growth gap between ``pi`` and ``f`` over a test family.

    For every test ``g`` and every intersection ``X`` of at most ``arity``
    generators, the probe asks whether ``{n in X : g(pi(n)) < f(n)}`` is
    inhabited past the midpoint.

    relation ``"<"`` (gap below every test): supported when every probe
    is; refuted at the horizon when some probe tail is inhabited only by
    points with ``g(pi(n)) >= f(n)``, which become the counterexample
    window; inconclusive when the undecided probes have empty tails.

    relation ``">="`` (some test dominates): supported when one test
    dominates the whole tail of every probed intersection; refuted at the
    horizon when every test fails somewhere; never inconclusive unless
    all tails are empty.

    No universally quantified claim is made either way.
    """
    if not tests:
        raise ValueError("at least one test function is required")
    if relation not in ("<", ">="):
        raise ValueError("relation must be '<' or '>='")
    h = base.horizon
    mid = h // 2 if midpoint is None else midpoint
    arity = min(arity, len(base.generators))
    probes: list[tuple[tuple[str, ...], SetWindow]] = []
    for size in range(1, arity + 1):
        for combo in itertools.combinations(base.generators, size):
            bits = (1 << h) - 1
            for _, w in combo:
                bits &= w.bits
            probes.append(
                (tuple(n for n, _ in combo), SetWindow(bits, h))
            )
    records = []
    counterexample = None
    per_test_dominates: dict[str, bool] = {}
    any_tail = False
    for g in tests:
        below = growth_gap_window(pi, f, g, h)
        dominates = True
        saw_tail = False
        for names, x in probes:
            tail = x.tail(mid)
            tail_nonempty = bool(tail)
            supported = bool(tail & below)
            if tail_nonempty:
                any_tail = saw_tail = True
                if supported:
                    dominates = False
                elif counterexample is None:
                    counterexample = tail - below
            records.append(
                SkyProbeRecord(g.name, names, below, tail_nonempty, supported)
            )
        per_test_dominates[g.name] = dominates and saw_tail
    if relation == "<":
        if all(r.supported for r in records if r.tail_nonempty) and any_tail:
            verdict, counterexample = "supported", None
        elif counterexample is not None:
            verdict = "refuted-at-horizon"
        else:
            verdict, counterexample = "inconclusive", None
    else:
        if any(per_test_dominates.values()):
            verdict = "supported"
        elif any_tail:
            verdict, counterexample = "refuted-at-horizon", counterexample
        else:
            verdict, counterexample = "inconclusive", None
    return SkyVerdict(relation, verdict, tuple(records), counterexample, mid)


# ---------------------------------------------------------------------------
# good-style extension
# ---------------------------------------------------------------------------


def extend_good(
    base: FilterBase,
    pi: FuncSpec,
    f: FuncSpec,
    g: FuncSpec,
    arity: int = DEFAULT_FIP_ARITY,
) -> FilterBase:
    """Adjoin ``{n : g(pi(n)) < f(n)}`` and re-certify intersections.

    Raises :class:`FipError` naming the first subfamily whose intersection
    with the adjoined window is empty; the base is returned extended only
    when certification succeeds.  Old witnesses are untouched (their
    subfamilies are unchanged); new subfamilies get witnesses inside the
    adjoined window by construction.
    """
    window = growth_gap_window(pi, f, g, base.horizon)
    name = f"lt:{g.name}"
    if name in base.names():
        raise ValueError(f"generator {name!r} already present")
    arity = min(arity, len(base.generators) + 1)
    for size in range(0, arity):
        for combo in itertools.combinations(base.generators, size):
            bits = window.bits
            for _, w in combo:
                bits &= w.bits
            if not bits:
                raise FipError(
                    "adjunction destroys the finite intersection property",
                    subfamily=tuple(n for n, _ in combo) + (name,),
                )
    return base.extended(name, window)


# ---------------------------------------------------------------------------
# independent families (classical coding)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GroundElement:
    support: tuple[int, ...]       # the finite set F
    marked: tuple[tuple[int, ...], ...]  # the family of subsets of F


@dataclass(frozen=True)
class IsbellFamily:
    ground_cap: int
    arity: int
    ground: tuple[GroundElement, ...]
    indices: tuple[SetWindow, ...]
    coded: tuple[SetWindow, ...]  # one window over the ground enumeration per index

    def combination(
        self, members: Sequence[int], complements: Sequence[int]
    ) -> SetWindow:
        """Intersection of chosen coded sets and complements of others."""
        overlap = set(members) & set(complements)
        if overlap:
            raise ValueError(f"indices used on both sides: {sorted(overlap)}")
        acc = SetWindow.full(len(self.ground))
        for i in members:
            acc &= self.coded[i]
        for j in complements:
            acc &= self.coded[j].complement()
        return acc


def _submasks(mask: int) -> list[int]:
    out = []
    sub = mask
    while True:
        out.append(sub)
        if sub == 0:
            break
        sub = (sub - 1) & mask
    return sorted(out)


def isbell_family(
    ground_cap: int, indices: Sequence[SetWindow], arity: int = 4
) -> IsbellFamily:
    """Code windows as subsets of pairs (finite set, family of its subsets).

    A pair ``(F, G)`` lies in the coded set of ``X`` when ``F & X`` is a
    member of ``G``.  Families ``G`` are enumerated only up to ``arity``
    members: a boolean combination of at most ``arity`` coded sets has a
    witness with at most ``arity`` marked subsets whenever it has one at
    all (dropping unused members of ``G`` keeps every membership and every
    non-membership), so nonemptiness over this truncation agrees with the
    unbounded coding.
    """
    if ground_cap < 1 or ground_cap > 6:
        raise ValueError("ground_cap must be in [1, 6] for exhaustive coding")
    elements: list[GroundElement] = []
    fmasks = sorted(range(1 << ground_cap), key=lambda m: (m.bit_count(), m))
    for fmask in fmasks:
        subs = _submasks(fmask)
        for size in range(0, arity + 1):
            for gsel in itertools.combinations(subs, size):
                elements.append(
                    GroundElement(
                        tuple(i for i in range(ground_cap) if fmask >> i & 1),
                        tuple(
                            tuple(i for i in range(ground_cap) if sm >> i & 1)
                            for sm in gsel
                        ),
                    )
                )
    ground = tuple(elements)
    coded = []
    for x in indices:
        xmask = x.bits & ((1 << ground_cap) - 1)
        bits = 0
        for pos, el in enumerate(ground):
            fmask = 0
            for i in el.support:
                fmask |= 1 << i
            trace = fmask & xmask
            marked = {
                sum(1 << i for i in sm) for sm in el.marked
            }
            if trace in marked:
                bits |= 1 << pos
        coded.append(SetWindow(bits, len(ground)))
    return IsbellFamily(ground_cap, arity, ground, tuple(indices), tuple(coded))


@dataclass(frozen=True)
class IsbellReport:
    arity: int
    combinations: int
    empty: tuple[tuple[tuple[int, ...], tuple[int, ...]], ...]

    @property
    def ok(self) -> bool:
        return not self.empty

    def to_record(self) -> dict:
        return {
            "record": "isbell",
            "ok": self.ok,
            "arity": self.arity,
            "combinations": self.combinations,
            "empty": [
                {"members": list(m), "complements": list(c)} for m, c in self.empty
            ],
        }


def isbell_independence(family: IsbellFamily, arity: int | None = None) -> IsbellReport:
    """Exhaustively test all boolean combinations of distinct indices."""
    arity = family.arity if arity is None else arity
    if arity > family.arity:
        raise ValueError("report arity exceeds the family's coded arity")
    n = len(family.coded)
    total = 0
    empty = []
    for size in range(1, arity + 1):
        for chosen in itertools.combinations(range(n), size):
            for signs in itertools.product((True, False), repeat=size):
                members = tuple(i for i, s in zip(chosen, signs) if s)
                complements = tuple(i for i, s in zip(chosen, signs) if not s)
                total += 1
                if not family.combination(members, complements):
                    empty.append((members, complements))
    return IsbellReport(arity, total, tuple(empty))
