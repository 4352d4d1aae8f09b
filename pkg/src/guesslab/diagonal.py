"""Anti-threading diagonalization over dense guessing structures.

Where the level capacity outgrows ``2**(n//2) * n`` there is room to pick,
level by level, a pattern whose half-length prefix avoids every earlier
pick and which never restricts onto an earlier window pick.  No subject
can then reproduce the picks at two window levels: agreement at the later
level would restrict to agreement at the earlier one.  The certificate
records the picks and the pairwise avoidance data; the sweep checks the
no-two-agreements consequence against every subject.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .backend import kernels
from .errors import DiagonalError
from .funcspec import eval_func
from .guessing import GuessingStructure, code_to_string, lex_sorted, string_to_code
from .windows import SetWindow

# Levels 0 and 1 compare length-0 prefixes, which never differ; the
# counting threshold admits them vacuously, so they are cut explicitly.
_MIN_DIAG_LEVEL = 2


def threshold_window(structure: GuessingStructure) -> SetWindow:
    """Levels where the capacity bound exceeds ``2**(n//2) * n``.

    The comparison uses the integer ``2**(n//2)``, slightly enlarging the
    window relative to the real-exponent reading; levels below
    ``_MIN_DIAG_LEVEL`` are excluded (see module note).
    """
    bits = 0
    for n in range(_MIN_DIAG_LEVEL, structure.horizon):
        if eval_func(structure.pi, n) > (1 << (n // 2)) * n:
            bits |= 1 << n
    return SetWindow(bits, structure.horizon)


@dataclass(frozen=True)
class DiagonalCertificate:
    avoid_levels: SetWindow           # the window B of diagonalized levels
    chosen: dict[int, int]            # level -> picked pattern code
    pairwise: tuple[tuple[int, int, int], ...]  # (c1, c2, compared prefix len)
    horizon: int

    def chosen_strings(self) -> dict[int, str]:
        return {n: code_to_string(c, n) for n, c in sorted(self.chosen.items())}

    def verify(self) -> bool:
        """Re-check the pairwise invariant: a later pick never restricts to
        an earlier pick, so no subject reproduces two window picks."""
        levels = [n for n in sorted(self.chosen) if n in self.avoid_levels]
        for i, c1 in enumerate(levels):
            m = (1 << c1) - 1
            for c2 in levels[i + 1 :]:
                if self.chosen[c2] & m == self.chosen[c1]:
                    return False
        return True

    def to_json_dict(self) -> dict:
        return {
            "kind": "diagonal_certificate",
            "horizon": self.horizon,
            "avoid_levels_hex": self.avoid_levels.to_hex(),
            "chosen": {str(n): s for n, s in self.chosen_strings().items()},
            "pairwise": [list(p) for p in self.pairwise],
        }

    @classmethod
    def from_json_dict(cls, data: dict) -> "DiagonalCertificate":
        h = int(data["horizon"])
        chosen = {
            int(n): string_to_code(s) for n, s in data["chosen"].items()
        }
        return cls(
            SetWindow.from_hex(data["avoid_levels_hex"], h),
            chosen,
            tuple(tuple(p) for p in data["pairwise"]),
            h,
        )

    def save(self, path: str) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_json_dict(), fh, indent=1)

    @classmethod
    def load(cls, path: str) -> "DiagonalCertificate":
        with open(path) as fh:
            return cls.from_json_dict(json.load(fh))


def _require_identity_widths(structure: GuessingStructure) -> None:
    for n in range(structure.horizon):
        if structure.f_value(n) != n:
            raise DiagonalError(
                f"diagonalization needs prefix widths f(n) = n, got "
                f"f({n}) = {structure.f_value(n)}"
            )


def diagonalize(structure: GuessingStructure) -> DiagonalCertificate:
    """Pick one pattern per level so avoid-window picks pairwise disagree.

    At each level ``n`` in the window the pick must differ from every
    earlier pick on the length ``n//2`` prefix, and must not restrict onto
    any earlier window pick; the second constraint is what the certificate
    invariant and the agreement sweep rest on.  Off-window levels take
    their first pattern in string order.  Raises :class:`DiagonalError`
    when a window level lacks the required capacity or when every
    candidate is blocked, reporting the level.
    """
    _require_identity_widths(structure)
    avoid = threshold_window(structure)
    chosen: dict[int, int] = {}
    window_picks: list[int] = []  # levels in the avoid window, ascending
    pairwise = []
    for n in range(structure.horizon):
        codes = structure.level_codes(n)
        if n not in avoid:
            if codes:
                chosen[n] = lex_sorted(codes, n)[0]
            continue
        need = (1 << (n // 2)) * n
        if len(codes) <= need:
            raise DiagonalError(
                f"counting hypothesis fails at level {n}: "
                f"{len(codes)} patterns, need more than {need}",
                level=n,
            )
        half_mask = (1 << (n // 2)) - 1
        blocked = {chosen[i] & half_mask for i in range(n) if i in chosen}
        pick = None
        for cand in lex_sorted(codes, n):
            if cand & half_mask in blocked:
                continue
            if any(
                cand & ((1 << c1) - 1) == chosen[c1] for c1 in window_picks
            ):
                continue
            pick = cand
            break
        if pick is None:
            raise DiagonalError(
                f"patterns exhausted at level {n} despite the counting bound",
                level=n,
            )
        chosen[n] = pick
        for c1 in window_picks:
            pairwise.append((c1, n, c1))
        window_picks.append(n)
    return DiagonalCertificate(avoid, chosen, tuple(pairwise), structure.horizon)


@dataclass(frozen=True)
class ThreadReport:
    agreement: SetWindow
    window_agreement: SetWindow  # agreement restricted to the avoid window

    def to_record(self) -> dict:
        return {
            "record": "threadable",
            "agreement": sorted(self.agreement.members()),
            "window_agreement": sorted(self.window_agreement.members()),
        }


def check_threadable(
    chosen: dict[int, int],
    subject: SetWindow,
    levels: SetWindow,
    avoid_levels: SetWindow | None = None,
) -> ThreadReport:
    """Window of levels in ``levels`` where the subject reproduces the
    pick exactly: ``subject & n == chosen[n]``."""
    bits = 0
    for n in levels:
        if n in chosen and subject.bits & ((1 << n) - 1) == chosen[n]:
            bits |= 1 << n
    agreement = SetWindow(bits, levels.horizon)
    if avoid_levels is None:
        window_agreement = agreement
    else:
        window_agreement = SetWindow(
            bits & avoid_levels.restrict(levels.horizon).bits, levels.horizon
        )
    return ThreadReport(agreement, window_agreement)


@dataclass(frozen=True)
class SweepReport:
    subjects: int
    max_agreement: int
    witness_subject: int

    @property
    def ok(self) -> bool:
        return self.max_agreement <= 1

    def to_record(self) -> dict:
        return {
            "record": "agreement_sweep",
            "subjects": self.subjects,
            "max_agreement": self.max_agreement,
            "witness_subject": self.witness_subject,
            "ok": self.ok,
        }


def sweep_agreements(cert: DiagonalCertificate, subject_bits: int) -> SweepReport:
    """Exhaust all ``2**subject_bits`` subjects; report the worst number of
    avoid-window levels any one of them reproduces."""
    if subject_bits > 24:
        raise ValueError("exhaustive sweep is limited to 24 subject bits")
    levels = [
        n
        for n in sorted(cert.chosen)
        if n in cert.avoid_levels and n <= subject_bits
    ]
    masks = np.asarray([(1 << n) - 1 for n in levels], dtype=np.uint64)
    codes = np.asarray([cert.chosen[n] for n in levels], dtype=np.uint64)
    mx, witness = kernels.agreement_max_sweep(subject_bits, masks, codes)
    return SweepReport(1 << subject_bits, mx, witness)
