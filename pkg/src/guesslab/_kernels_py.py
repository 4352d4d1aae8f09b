"""Pure-Python/numpy implementations of the hot kernels.

The compiled module ``_kernels`` mirrors this API exactly; results must be
bit-identical between the two, including every random word.  Level data
arrives in CSR form: ``codes[offsets[i]:offsets[i+1]]`` holds the sorted
64-bit prefix codes of level ``i`` and ``fmasks[i]`` is the prefix mask
``2**f(i) - 1``.  Kernels here are limited to prefixes of at most 64 bits;
wider cases take the general big-int paths in the calling modules.
"""

from __future__ import annotations

import numpy as np

BACKEND = "python"

_M64 = (1 << 64) - 1
_GAMMA = 0x9E3779B97F4A7C15
_POS = 0xD1B54A32D192ED03


def _mix64(z: int) -> int:
    z &= _M64
    z ^= z >> 30
    z = (z * 0xBF58476D1CE4E5B9) & _M64
    z ^= z >> 27
    z = (z * 0x94D049BB133111EB) & _M64
    return z ^ (z >> 31)


def stream_word(seed: int, trial: int, k: int) -> int:
    """Word ``k`` of the substream for ``(seed, trial)``.

    Counter-based: the value depends only on the three inputs, so serial
    and parallel trial orders agree.
    """
    return _mix64(seed + (trial + 1) * _GAMMA + (k + 1) * _POS)


def subject_words(seed: int, trial: int, nwords: int) -> list[int]:
    """First ``nwords`` substream words; word ``w`` carries subject bits
    ``[64*w, 64*w + 64)``."""
    return [stream_word(seed, trial, k) for k in range(nwords)]


def _trial_words(seed: int, trials: int, k: int) -> np.ndarray:
    idx = np.arange(1, trials + 1, dtype=np.uint64)
    with np.errstate(over="ignore"):
        z = np.uint64(seed & _M64) + idx * np.uint64(_GAMMA) + np.uint64(
            ((k + 1) * _POS) & _M64
        )
        z ^= z >> np.uint64(30)
        z *= np.uint64(0xBF58476D1CE4E5B9)
        z ^= z >> np.uint64(27)
        z *= np.uint64(0x94D049BB133111EB)
        z ^= z >> np.uint64(31)
    return z


def _hits_any(
    subjects: np.ndarray,
    fmasks: np.ndarray,
    offsets: np.ndarray,
    codes: np.ndarray,
) -> np.ndarray:
    hits = np.zeros(subjects.shape, dtype=bool)
    for i in range(fmasks.shape[0]):
        lo, hi = int(offsets[i]), int(offsets[i + 1])
        if lo == hi:
            continue
        level = codes[lo:hi]
        vals = subjects & fmasks[i]
        pos = np.searchsorted(level, vals)
        np.minimum(pos, hi - lo - 1, out=pos)
        hits |= level[pos] == vals
    return hits


def mc_hit_count(
    seed: int,
    trials: int,
    nbits: int,
    fmasks: np.ndarray,
    offsets: np.ndarray,
    codes: np.ndarray,
) -> int:
    """Number of sampled subjects hitting at least one level.

    Subjects are the low ``nbits`` bits of substream word 0 per trial.
    """
    if nbits > 64:
        raise ValueError("kernel subjects are limited to 64 bits")
    mask = np.uint64(_M64 if nbits == 64 else (1 << nbits) - 1)
    subjects = _trial_words(seed, trials, 0) & mask
    return int(_hits_any(subjects, fmasks, offsets, codes).sum())


def union_measure_count(
    nbits: int,
    fmasks: np.ndarray,
    offsets: np.ndarray,
    codes: np.ndarray,
) -> int:
    """Count prefixes in ``[0, 2**nbits)`` hitting at least one level."""
    if nbits > 24:
        raise ValueError("exhaustive enumeration is limited to 24 bits")
    subjects = np.arange(1 << nbits, dtype=np.uint64)
    return int(_hits_any(subjects, fmasks, offsets, codes).sum())


def agreement_max_sweep(
    nbits: int,
    prefix_masks: np.ndarray,
    chosen: np.ndarray,
) -> tuple[int, int]:
    """Max, over all ``2**nbits`` subjects, of the number of levels whose
    chosen code the subject reproduces; returns ``(max, witness subject)``."""
    if nbits > 24:
        raise ValueError("exhaustive enumeration is limited to 24 bits")
    subjects = np.arange(1 << nbits, dtype=np.uint64)
    counts = np.zeros(1 << nbits, dtype=np.uint16)
    for i in range(prefix_masks.shape[0]):
        counts += (subjects & prefix_masks[i]) == chosen[i]
    best = int(counts.argmax())
    return int(counts[best]), best


def star_exact_levels(
    classes: np.ndarray,
    unions: np.ndarray,
    branch_set: int,
) -> np.ndarray:
    """Exact-guess test per level for one branch subset.

    ``classes[l, j]`` is the bitmask of branches restricting onto node ``j``
    of level ``l`` (0 marks a node no branch passes through; unused slots
    hold all-ones).  A level is exact when the subset is covered by the
    level's union and meets every node class.
    """
    if branch_set == 0:
        raise ValueError("branch subset must be nonempty")
    bf = np.uint32(branch_set)
    ok = (bf & ~unions) == 0
    ok &= ((classes & bf) != 0).all(axis=1)
    return ok.astype(np.uint8)


def guess_hits_u64(
    subject: int,
    fmasks: np.ndarray,
    offsets: np.ndarray,
    codes: np.ndarray,
) -> np.ndarray:
    """Indices of levels whose code set contains the subject's prefix."""
    subj = np.uint64(subject)
    out = []
    for i in range(fmasks.shape[0]):
        lo, hi = int(offsets[i]), int(offsets[i + 1])
        if lo == hi:
            continue
        val = subj & fmasks[i]
        pos = int(np.searchsorted(codes[lo:hi], val))
        if pos < hi - lo and codes[lo + pos] == val:
            out.append(i)
    return np.asarray(out, dtype=np.int64)
