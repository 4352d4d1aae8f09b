"""How much a guessing structure can guess, quantified three ways.

Under the uniform product measure on subject bits, the chance of being
guessed at level ``n`` is (pattern count) / 2**f(n).  The partial sums of
those terms drive the convergent-sum dichotomy: a finite sum forces almost
every subject to be guessed only finitely often.  This module computes the
sums exactly, measures tail windows exactly by enumeration where feasible,
and estimates them by seeded Monte Carlo elsewhere.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

from .backend import kernels
from .errors import GuesslabError
from .funcspec import FuncSpec, eval_func
from .guessing import GuessingStructure, guess_levels
from .windows import SetWindow

_DENOM_BITS_CAP = 1 << 20
_DIVERGENCE_EPS = 0.01


@dataclass(frozen=True)
class BCReport:
    terms: tuple[Fraction, ...]
    partial_sums: tuple[float, ...]
    exact_sums: tuple[Fraction, ...]
    divergence_flag: bool

    def to_record(self) -> dict:
        return {
            "record": "bc_partial_sum",
            "n_terms": len(self.terms),
            "final_sum": self.partial_sums[-1] if self.partial_sums else 0.0,
            "divergence_flag": self.divergence_flag,
        }


@dataclass(frozen=True)
class TrialReport:
    seed: int
    trials: int
    window: tuple[int, int]
    hits: int
    fraction: float
    stderr: float

    def to_record(self) -> dict:
        return {
            "record": "mc_guess_fraction",
            "seed": self.seed,
            "trials": self.trials,
            "window": list(self.window),
            "hits": self.hits,
            "fraction": self.fraction,
            "stderr": self.stderr,
        }


def _level_term(count: int, width: int) -> Fraction:
    if width > _DENOM_BITS_CAP:
        raise GuesslabError(
            f"term denominator 2**{width} exceeds the high-precision cap"
        )
    return Fraction(count, 1 << width)


def bc_partial_sum(
    pi: FuncSpec | None = None,
    f: FuncSpec | None = None,
    structure: GuessingStructure | None = None,
    n_terms: int = 0,
) -> BCReport:
    """Exact partial sums of the per-level guessing chances.

    With a structure, term ``n`` is ``|patterns at n| / 2**f(n)``; with
    bare specs it is the ceiling ``pi(n) / 2**f(n)``.  Terms are exact
    rationals throughout (the float column is a rounding of the exact
    one).  The divergence flag is a heuristic: it reports whether the
    second half of the range still added more than a fixed epsilon.
    """
    if structure is not None:
        if n_terms > structure.horizon:
            raise ValueError("n_terms exceeds the structure horizon")
        counts = [len(structure.level_codes(n)) for n in range(n_terms)]
        widths = [structure.f_value(n) for n in range(n_terms)]
    else:
        if pi is None or f is None:
            raise ValueError("need either a structure or both pi and f")
        counts = [eval_func(pi, n) for n in range(n_terms)]
        widths = [eval_func(f, n) for n in range(n_terms)]
    terms = tuple(_level_term(c, w) for c, w in zip(counts, widths))
    exact = []
    acc = Fraction(0)
    for t in terms:
        acc += t
        exact.append(acc)
    sums = tuple(float(s) for s in exact)
    half = exact[math.ceil(n_terms / 2) - 1] if n_terms >= 2 else Fraction(0)
    flag = bool(n_terms >= 2 and float(exact[-1] - half) > _DIVERGENCE_EPS)
    return BCReport(terms, sums, tuple(exact), flag)


def _window_width(structure: GuessingStructure, start: int, stop: int) -> int:
    if not 0 <= start <= stop <= structure.horizon:
        raise ValueError(f"window [{start}, {stop}) outside [0, {structure.horizon})")
    return max((structure.f_value(n) for n in range(start, stop)), default=0)


def exact_guess_measure(
    structure: GuessingStructure, start: int, stop: int
) -> Fraction:
    """Exact chance that a uniform subject is guessed somewhere in the
    window, by enumerating every prefix of the window's maximal width."""
    width = _window_width(structure, start, stop)
    if width > 20:
        raise GuesslabError(
            f"window prefix width {width} exceeds the exhaustive bound 20"
        )
    packed = structure.pack_window(start, stop)
    assert packed is not None
    fmasks, offsets, codes = packed
    count = kernels.union_measure_count(width, fmasks, offsets, codes)
    return Fraction(count, 1 << width)


def mc_guess_fraction(
    structure: GuessingStructure,
    start: int,
    stop: int,
    trials: int,
    seed: int,
) -> TrialReport:
    """Fraction of sampled subjects guessed at some window level.

    Subject bits come from the per-trial substream, so the result depends
    only on ``(seed, trials)`` and not on evaluation order.  The standard
    error is the usual binomial estimate.
    """
    if trials < 100:
        raise ValueError("at least 100 trials are required")
    width = _window_width(structure, start, stop)
    if width <= 64:
        packed = structure.pack_window(start, stop)
        fmasks, offsets, codes = packed
        hits = kernels.mc_hit_count(seed, trials, width, fmasks, offsets, codes)
    else:
        nwords = (width + 63) // 64
        hits = 0
        window_levels = [
            n for n in range(start, stop) if structure.level_codes(n)
        ]
        for t in range(trials):
            bits = 0
            for w, word in enumerate(kernels.subject_words(seed, t, nwords)):
                bits |= word << (64 * w)
            for n in window_levels:
                fw = structure.f_value(n)
                if bits & ((1 << fw) - 1) in structure.levels[n]:
                    hits += 1
                    break
    p = hits / trials
    stderr = math.sqrt(p * (1 - p) / trials)
    return TrialReport(seed, trials, (start, stop), hits, p, stderr)


def union_bound(structure: GuessingStructure, start: int, stop: int) -> Fraction:
    """Sum of the window terms; an exact upper bound for the measure."""
    acc = Fraction(0)
    for n in range(start, stop):
        acc += _level_term(len(structure.level_codes(n)), structure.f_value(n))
    return acc


def tail_term_sum(start: int) -> Fraction:
    """Closed form for the identity-parameter tail: sum of n/2**n from
    ``start`` on equals (start + 1) / 2**(start - 1)."""
    if start < 1:
        raise ValueError("closed form needs start >= 1")
    return Fraction(start + 1, 1 << (start - 1))
