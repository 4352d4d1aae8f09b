"""Level-indexed splitting trees inside the binary tree.

Nodes are 0/1 strings identified with ``(level, code)`` pairs, where the
code packs the string's one-positions into an integer.  Construction
alternates branching stages (every maximal node gets two extensions at a
fresh level) with chain stages (maximal nodes extend without branching
while every subset of them is given a private meeting level).  The chain
stages are what later feed filter bases: each finite set of branches is
simultaneously realized, exactly, at infinitely many levels in the
idealized object and at one level per chain stage here.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .backend import kernels
from .errors import ConstructionError, GuesslabError
from .funcspec import FuncSpec, eval_func, eval_func_array, parse_funcspec
from .guessing import GuessingStructure, code_to_string, string_to_code
from .windows import SetWindow

_SCAN_CHUNK = 1 << 18


@dataclass(frozen=True)
class BranchSample:
    """A full-length branch candidate: an element of the subject space."""

    bits: SetWindow


@dataclass(frozen=True)
class StageLog:
    stage: int
    parity: str  # "even" or "odd"
    maximal_before: tuple[tuple[int, int], ...]
    added: tuple[tuple[int, int], ...]
    mark_after: int
    allocation: dict[frozenset[int], int] | None = None
    exact_allocation: bool = True


@dataclass(frozen=True, eq=False)
class PseudoTree:
    pi: FuncSpec
    f: FuncSpec
    levels: dict[int, tuple[int, ...]]
    stage_marks: tuple[int, ...]
    horizon: int
    frontier_cache: tuple[tuple[int, int], ...] | None = field(
        default=None, repr=False, compare=False
    )
    _f_vals: dict[int, int] = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        if list(self.stage_marks) != sorted(set(self.stage_marks)):
            raise ValueError("stage marks must be strictly increasing")
        for k, codes in self.levels.items():
            if not 0 <= k < self.horizon:
                raise ValueError(f"level {k} outside [0, {self.horizon})")
            width = self.f_value(k)
            if len(set(codes)) != len(codes):
                raise ValueError(f"duplicate nodes at level {k}")
            for c in codes:
                if c < 0 or c >> width:
                    raise ValueError(f"node {c} does not fit width f({k})={width}")

    def __eq__(self, other) -> bool:
        if not isinstance(other, PseudoTree):
            return NotImplemented
        return (
            self.pi == other.pi
            and self.f == other.f
            and self.stage_marks == other.stage_marks
            and self.horizon == other.horizon
            and self.nonempty_levels() == other.nonempty_levels()
            and all(
                set(self.levels[k]) == set(other.levels[k])
                for k in self.nonempty_levels()
            )
        )

    def f_value(self, k: int) -> int:
        v = self._f_vals.get(k)
        if v is None:
            v = eval_func(self.f, k)
            self._f_vals[k] = v
        return v

    def pi_value(self, k: int) -> int:
        return eval_func(self.pi, k)

    def level_codes(self, k: int) -> tuple[int, ...]:
        return self.levels.get(k, ())

    def level_strings(self, k: int) -> tuple[str, ...]:
        width = self.f_value(k)
        return tuple(code_to_string(c, width) for c in self.level_codes(k))

    def nonempty_levels(self) -> tuple[int, ...]:
        return tuple(sorted(k for k, cs in self.levels.items() if cs))

    def node_count(self) -> int:
        return sum(len(cs) for cs in self.levels.values())

    def to_guessing_structure(self) -> GuessingStructure:
        return GuessingStructure.from_codes(
            self.pi, self.f, dict(self.levels), self.horizon
        )

    # -- serialization ------------------------------------------------------

    def to_json_dict(self) -> dict:
        return {
            "kind": "pseudo_tree",
            "horizon": self.horizon,
            "pi": self.pi.name,
            "f": self.f.name,
            "stage_marks": list(self.stage_marks),
            "levels": {
                str(k): list(self.level_strings(k)) for k in self.nonempty_levels()
            },
        }

    @classmethod
    def from_json_dict(cls, data: dict) -> "PseudoTree":
        f = parse_funcspec(data["f"])
        levels: dict[int, tuple[int, ...]] = {}
        for key, strings in data["levels"].items():
            k = int(key)
            width = eval_func(f, k)
            codes = []
            for s in strings:
                if len(s) != width:
                    raise GuesslabError(
                        f"node {s!r} at level {k} has length {len(s)}, "
                        f"expected f({k})={width}"
                    )
                codes.append(string_to_code(s))
            levels[k] = tuple(sorted(codes))
        return cls(
            parse_funcspec(data["pi"]),
            f,
            levels,
            tuple(data["stage_marks"]),
            int(data["horizon"]),
        )

    def save(self, path: str) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_json_dict(), fh, indent=1)

    @classmethod
    def load(cls, path: str) -> "PseudoTree":
        with open(path) as fh:
            return cls.from_json_dict(json.load(fh))


# ---------------------------------------------------------------------------
# construction
# ---------------------------------------------------------------------------


def _pi_chunk(pi: FuncSpec, start: int, stop: int):
    ns = np.arange(start, stop, dtype=np.uint64)
    return eval_func_array(pi, ns)


def _find_even_level(pi, start, used, h_cap):
    """Smallest unoccupied level >= start with pi >= 2."""
    k = start
    while k < h_cap:
        if k not in used and eval_func(pi, k) >= 2:
            return k
        k += 1
    return None


def _scan_exact(pi, start, demands, h_cap):
    """Collect, per value v, the first demands[v] levels >= start with
    pi(level) == v.  Returns (positions dict, satisfied_at) or None."""
    remaining = {v: c for v, c in demands.items() if c > 0}
    positions = {v: [] for v in demands}
    pos = start
    satisfied_at = start
    while remaining and pos < h_cap:
        stop = min(pos + _SCAN_CHUNK, h_cap)
        vals, ovf = _pi_chunk(pi, pos, stop)
        for v in list(remaining):
            hits = np.nonzero((vals == v) & ~ovf)[0]
            take = hits[: remaining[v]]
            positions[v].extend(int(h) + pos for h in take)
            remaining[v] -= int(take.shape[0])
            if remaining[v] == 0:
                del remaining[v]
                satisfied_at = max(satisfied_at, positions[v][-1] + 1)
        pos = stop
    if remaining:
        return None, remaining
    return positions, satisfied_at


def _scan_geq(pi, start, demands, h_cap):
    """Like _scan_exact but counting levels with pi >= v."""
    remaining = {v: c for v, c in demands.items() if c > 0}
    positions = {v: [] for v in demands}
    pos = start
    satisfied_at = start
    while remaining and pos < h_cap:
        stop = min(pos + _SCAN_CHUNK, h_cap)
        vals, ovf = _pi_chunk(pi, pos, stop)
        for v in list(remaining):
            hits = np.nonzero(ovf | (vals >= v))[0]
            take = hits[: remaining[v]]
            positions[v].extend(int(h) + pos for h in take)
            remaining[v] -= int(take.shape[0])
            if remaining[v] == 0:
                del remaining[v]
                satisfied_at = max(satisfied_at, positions[v][-1] + 1)
        pos = stop
    if remaining:
        return None, remaining
    return positions, satisfied_at


def _find_level_geq(pi, start, bound, h_cap):
    """Smallest level >= start with pi >= bound (overflow counts as huge)."""
    pos = start
    while pos < h_cap:
        stop = min(pos + _SCAN_CHUNK, h_cap)
        vals, ovf = _pi_chunk(pi, pos, stop)
        hits = np.nonzero(ovf | (vals >= bound))[0]
        if hits.shape[0]:
            return pos + int(hits[0])
        pos = stop
    return None


def construct_splitting_tree(
    pi: FuncSpec, stages: int, h_cap: int = 1 << 26
) -> tuple[PseudoTree, list[StageLog]]:
    """Run ``stages`` alternating stages starting from a virtual root.

    Even stages give every maximal node two extensions at the smallest
    empty level of capacity at least 2 (zero-pad, then vary the final
    bit).  Odd stages enumerate the maximal nodes ``s_1..s_d``, find the
    smallest admissible next mark, zero-pad each node to it, and allocate,
    injectively and smallest-level-first by descending subset size, one
    level per nonempty subset ``F`` with capacity exactly ``|F|``; the
    level receives the restrictions of exactly the members of ``F``.
    When no exact-capacity allocation exists below the cap, capacities
    ``>= |F|`` are used instead (flagged in the log).  Raises
    :class:`ConstructionError` with the unmet demand when the cap is hit.
    """
    if stages < 0:
        raise ValueError("stage count must be nonnegative")
    levels: dict[int, tuple[int, ...]] = {}
    marks = [0]
    maximal: list[tuple[int, int]] = [(0, 0)]  # virtual root: empty string
    logs: list[StageLog] = []

    for stage in range(stages):
        mark = marks[-1]
        maximal.sort()
        maximal_before = tuple(maximal)
        if stage % 2 == 0:
            used = set(levels)
            added = []
            new_max = []
            for lv, mask in maximal:
                k = _find_even_level(pi, max(mark, lv + 1), used, h_cap)
                if k is None:
                    raise ConstructionError(
                        f"no empty level with pi >= 2 above {mark} below cap "
                        f"{h_cap} (stage {stage})",
                        demand={"stage": stage, "kind": "branch-level", "need": 2},
                    )
                c0, c1 = mask, mask | (1 << (k - 1))
                levels[k] = tuple(sorted((c0, c1)))
                used.add(k)
                added += [(k, c0), (k, c1)]
                new_max += [(k, c0), (k, c1)]
            next_mark = max(k for k, _ in added) + 1
            logs.append(
                StageLog(stage, "even", maximal_before, tuple(added), next_mark)
            )
            maximal = new_max
            marks.append(next_mark)
        else:
            d = len(maximal)
            demands = {v: math.comb(d, v) for v in range(1, d + 1)}
            exact = True
            positions, info = _scan_exact(pi, mark, demands, h_cap)
            if positions is None:
                exact = False
                hall = {
                    v: sum(math.comb(d, j) for j in range(v, d + 1))
                    for v in range(1, d + 1)
                }
                positions, info = _scan_geq(pi, mark, hall, h_cap)
                if positions is None:
                    missing = dict(info)
                    raise ConstructionError(
                        f"stage {stage}: level demands unmet below cap {h_cap}: "
                        f"still need {missing}",
                        demand={"stage": stage, "kind": "allocation", **missing},
                    )
            satisfied_at = info
            next_mark = _find_level_geq(pi, satisfied_at, d, h_cap)
            if next_mark is None:
                raise ConstructionError(
                    f"stage {stage}: no level with pi >= {d} at or above "
                    f"{satisfied_at} below cap {h_cap}",
                    demand={"stage": stage, "kind": "mark", "need": d},
                )
            allocation: dict[frozenset[int], int] = {}
            added = []
            if exact:
                cursors = {v: 0 for v in demands}
                for size in range(d, 0, -1):
                    for comb in itertools.combinations(range(1, d + 1), size):
                        k = positions[size][cursors[size]]
                        cursors[size] += 1
                        allocation[frozenset(comb)] = k
            else:
                taken: set[int] = set()
                for size in range(d, 0, -1):
                    pool = [k for k in positions[size] if k not in taken]
                    it = iter(pool)
                    for comb in itertools.combinations(range(1, d + 1), size):
                        k = next(it)
                        taken.add(k)
                        allocation[frozenset(comb)] = k
            top_level = {i: -1 for i in range(1, d + 1)}
            for fset, k in allocation.items():
                nodes = tuple(sorted(maximal[i - 1][1] for i in fset))
                levels[k] = nodes
                added.extend((k, c) for c in nodes)
                for i in fset:
                    if k > top_level[i]:
                        top_level[i] = k
            maximal = [
                (top_level[i], maximal[i - 1][1]) for i in range(1, d + 1)
            ]
            logs.append(
                StageLog(
                    stage,
                    "odd",
                    maximal_before,
                    tuple(sorted(added)),
                    next_mark,
                    allocation=allocation,
                    exact_allocation=exact,
                )
            )
            marks.append(next_mark)

    horizon = marks[-1] if stages else 1
    tree = PseudoTree(
        pi,
        FuncSpec("id"),
        levels,
        tuple(marks),
        horizon,
        frontier_cache=tuple(sorted(maximal)) if stages else None,
    )
    return tree, logs


# ---------------------------------------------------------------------------
# verification
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SplittingReport:
    cardinality_violations: tuple[tuple[int, int, int], ...]  # (level, size, bound)
    nonbranching: tuple[tuple[int, int], ...]  # (level, code)
    indeterminate: int
    checked_nodes: int

    @property
    def ok(self) -> bool:
        return not self.cardinality_violations and not self.nonbranching

    def to_record(self) -> dict:
        return {
            "record": "splitting",
            "ok": self.ok,
            "cardinality_violations": [list(v) for v in self.cardinality_violations],
            "nonbranching": [list(v) for v in self.nonbranching],
            "indeterminate": self.indeterminate,
            "checked_nodes": self.checked_nodes,
        }


def _extends(upper: tuple[int, int], lower: tuple[int, int], tree: PseudoTree) -> bool:
    (lu, cu), (ll, cl) = upper, lower
    if lu <= ll:
        return False
    width = tree.f_value(ll)
    return cu & ((1 << width) - 1) == cl


def _incomparable(a: tuple[int, int], b: tuple[int, int], tree: PseudoTree) -> bool:
    if a[0] == b[0]:
        return a[1] != b[1]
    lo, hi = (a, b) if a[0] < b[0] else (b, a)
    return not _extends(hi, lo, tree)


def verify_splitting(tree: PseudoTree, safety_frontier: int) -> SplittingReport:
    """Check level-size bounds everywhere and branching below the frontier.

    Nodes at or above ``safety_frontier`` are reported as indeterminate
    rather than failing: the finite window cannot tell a leaf from a node
    whose extensions lie beyond the horizon.
    """
    if safety_frontier >= tree.horizon:
        raise ValueError("safety frontier must lie below the horizon")
    card = []
    for k in tree.nonempty_levels():
        size = len(tree.levels[k])
        bound = tree.pi_value(k)
        if size > bound:
            card.append((k, size, bound))
    nodes = [
        (k, c) for k in tree.nonempty_levels() for c in tree.levels[k]
    ]
    nodes.sort()
    nonbranching = []
    indeterminate = 0
    checked = 0
    for k, c in nodes:
        if k >= safety_frontier:
            indeterminate += 1
            continue
        checked += 1
        exts: list[tuple[int, int]] = []
        found = False
        for k2, c2 in nodes:
            if k2 <= k or not _extends((k2, c2), (k, c), tree):
                continue
            for e in exts:
                if _incomparable(e, (k2, c2), tree):
                    found = True
                    break
            if found:
                break
            exts.append((k2, c2))
        if not found:
            nonbranching.append((k, c))
    return SplittingReport(tuple(card), tuple(nonbranching), indeterminate, checked)


def frontier_branches(tree: PseudoTree) -> list[BranchSample]:
    """One zero-extended branch per maximal node, in (level, code) order."""
    if tree.node_count() == 0:
        raise GuesslabError("tree has no nodes")
    if tree.frontier_cache is not None:
        maximal = list(tree.frontier_cache)
    else:
        nodes = [(k, c) for k in tree.nonempty_levels() for c in tree.levels[k]]
        nodes.sort()
        maximal = []
        for i, nd in enumerate(nodes):
            if not any(
                _extends(other, nd, tree) for other in nodes if other[0] > nd[0]
            ):
                maximal.append(nd)
    return [
        BranchSample(SetWindow(c, tree.horizon)) for _, c in sorted(maximal)
    ]


def verify_star(tree: PseudoTree, branches: Sequence[BranchSample]) -> list[int]:
    """All levels whose node set equals exactly the branch restrictions."""
    if not branches:
        raise ValueError("at least one branch is required")
    out = []
    for k in tree.nonempty_levels():
        width = tree.f_value(k)
        mask = (1 << width) - 1
        restr = {b.bits.bits & mask for b in branches}
        if restr == set(tree.levels[k]):
            out.append(k)
    return out


class StarSweep:
    """Bulk exact-guess queries against a fixed branch universe.

    Precomputes, per level, the bitmask of branches passing through each
    node; a subset of branches is then tested across every level in one
    kernel call.  Results agree with :func:`verify_star` applied to the
    corresponding sublist of branches.
    """

    def __init__(self, tree: PseudoTree, branches: Sequence[BranchSample]):
        if len(branches) > 32:
            raise ValueError("at most 32 branches per sweep")
        self.tree = tree
        self.branches = list(branches)
        self.level_numbers = list(tree.nonempty_levels())
        kmax = max((len(tree.levels[k]) for k in self.level_numbers), default=1)
        n_lev = len(self.level_numbers)
        classes = np.full((n_lev, kmax), 0xFFFFFFFF, dtype=np.uint32)
        unions = np.zeros(n_lev, dtype=np.uint32)
        for li, k in enumerate(self.level_numbers):
            width = tree.f_value(k)
            mask = (1 << width) - 1
            per_node: dict[int, int] = {c: 0 for c in tree.levels[k]}
            for bi, b in enumerate(self.branches):
                r = b.bits.bits & mask
                if r in per_node:
                    per_node[r] |= 1 << bi
            u = 0
            for j, c in enumerate(tree.levels[k]):
                classes[li, j] = per_node[c]
                u |= per_node[c]
            unions[li] = u
        self.classes = classes
        self.unions = unions

    def exact_levels(self, branch_indices: Iterable[int]) -> list[int]:
        bf = 0
        for i in branch_indices:
            bf |= 1 << i
        flags = kernels.star_exact_levels(self.classes, self.unions, bf)
        return [self.level_numbers[i] for i in np.nonzero(flags)[0]]


def prune_thin(
    tree: PseudoTree, sample: Sequence[BranchSample], min_support: int
) -> PseudoTree:
    """Drop nodes below fewer than ``min_support`` sample branches."""
    if min_support < 1:
        raise ValueError("min_support must be at least 1")
    new_levels: dict[int, tuple[int, ...]] = {}
    for k in tree.nonempty_levels():
        width = tree.f_value(k)
        mask = (1 << width) - 1
        keep = []
        for c in tree.levels[k]:
            support = sum(1 for b in sample if b.bits.bits & mask == c)
            if support >= min_support:
                keep.append(c)
        if keep:
            new_levels[k] = tuple(keep)
    return PseudoTree(
        tree.pi, tree.f, new_levels, tree.stage_marks, tree.horizon
    )


def avoid_level_extension(
    tree: PseudoTree, p: str, target_levels: SetWindow
) -> tuple[str, int]:
    """Extend ``p`` so its restriction at some target level misses the tree.

    Works by pigeonhole: at a level of capacity ``n``, ``n + 1`` pairwise
    distinct extensions cannot all be nodes.  Candidates vary the bits just
    past ``p`` in numeric order, so the zero-pad comes first.
    """
    if not target_levels:
        raise GuesslabError("no target levels supplied")
    plen = len(p)
    pmask = string_to_code(p)
    for m in target_levels:
        if m >= tree.horizon:
            continue
        width = tree.f_value(m)
        if width < plen:
            continue
        bound = tree.pi_value(m)
        room = width - plen
        if room < 64 and (1 << room) < bound + 1:
            continue
        occupied = set(tree.levels.get(m, ()))
        for v in range(bound + 1):
            cand = pmask | (v << plen)
            if cand not in occupied:
                return code_to_string(cand, width), m
    raise GuesslabError(
        "no admissible target level below the horizon "
        f"(tried {len(target_levels)} levels)"
    )


# ---------------------------------------------------------------------------
# stage-condition checker
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class StageCheck:
    stage: int
    parity: str
    ok: bool
    failures: tuple[str, ...]


@dataclass(frozen=True)
class StageConditionReport:
    stages: tuple[StageCheck, ...]

    @property
    def ok(self) -> bool:
        return all(s.ok for s in self.stages)

    def to_record(self) -> dict:
        return {
            "record": "stage_conditions",
            "ok": self.ok,
            "stages": [
                {
                    "stage": s.stage,
                    "parity": s.parity,
                    "ok": s.ok,
                    "failures": list(s.failures),
                }
                for s in self.stages
            ],
        }


def _maximal_nodes(nodes: list[tuple[int, int]], tree: PseudoTree):
    out = []
    for nd in nodes:
        if not any(
            other[0] > nd[0] and _extends(other, nd, tree) for other in nodes
        ):
            out.append(nd)
    return sorted(out)


def check_stage_conditions(tree: PseudoTree) -> StageConditionReport:
    """Re-derive the per-stage requirements from levels and marks alone.

    The construction log is deliberately not consulted.  Stage parity
    follows the mark index (stage 0 branches).  For chain stages with more
    than 12 maximal nodes, subset coverage is recognized only through
    levels realizing a subset exactly; this is the pattern the constructor
    emits, and scanning all supersets would be combinatorially explosive.
    """
    marks = tree.stage_marks
    checks = []
    all_nodes = [(k, c) for k in tree.nonempty_levels() for c in tree.levels[k]]
    for stage in range(len(marks) - 1):
        lo, hi = marks[stage], marks[stage + 1]
        parity = "even" if stage % 2 == 0 else "odd"
        failures: list[str] = []
        prev = [nd for nd in all_nodes if nd[0] < lo]
        prev_max = _maximal_nodes(prev, tree) if prev else [(0, 0)]
        added = [nd for nd in all_nodes if lo <= nd[0] < hi]

        for k in sorted({nd[0] for nd in added}):
            size = len(tree.levels[k])
            bound = tree.pi_value(k)
            if size > bound:
                failures.append(f"(iii) level {k}: {size} nodes > pi={bound}")

        ext_of: dict[tuple[int, int], list[tuple[int, int]]] = {
            pm: [] for pm in prev_max
        }
        for nd in added:
            owners = [pm for pm in prev_max if pm == (0, 0) or _extends(nd, pm, tree)]
            if not owners:
                failures.append(f"(iv) node {nd} extends no maximal node")
                continue
            ext_of[owners[0]].append(nd)

        if parity == "even":
            for pm, exts in ext_of.items():
                if not any(
                    _incomparable(a, b, tree)
                    for i, a in enumerate(exts)
                    for b in exts[i + 1 :]
                ):
                    failures.append(f"(v) maximal node {pm} does not branch")
        else:
            d = len(prev_max)
            for pm, exts in ext_of.items():
                bad = [
                    (a, b)
                    for i, a in enumerate(exts)
                    for b in exts[i + 1 :]
                    if _incomparable(a, b, tree)
                ]
                if bad:
                    failures.append(
                        f"(vi) maximal node {pm} branches (e.g. {bad[0]})"
                    )
            anc_best: dict[frozenset[int], int] = {}
            level_anc: list[tuple[frozenset[int], int]] = []
            for k in sorted({nd[0] for nd in added}):
                width = tree.f_value(k)
                mask = (1 << width) - 1
                anc = frozenset(
                    i + 1
                    for i, pm in enumerate(prev_max)
                    if any(
                        c & ((1 << tree.f_value(pm[0])) - 1) == pm[1]
                        for c in tree.levels[k]
                    )
                )
                bound = tree.pi_value(k)
                if anc:
                    anc_best[anc] = max(anc_best.get(anc, -1), bound)
                    level_anc.append((anc, bound))
            for size in range(1, d + 1):
                for comb in itertools.combinations(range(1, d + 1), size):
                    fset = frozenset(comb)
                    if anc_best.get(fset, -1) >= size:
                        continue
                    if d <= 12 and any(
                        anc >= fset and bound >= size for anc, bound in level_anc
                    ):
                        continue
                    failures.append(
                        f"(vi) no level realizes subset {sorted(fset)} "
                        f"with pi >= {size}"
                    )
        checks.append(StageCheck(stage, parity, not failures, tuple(failures)))
    return StageConditionReport(tuple(checks))
