# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels; bit-identical mirror of ``_kernels_py``."""

import numpy as np

BACKEND = "cython"

cdef extern from *:
    """
    typedef unsigned long long u64;
    typedef unsigned int u32;
    """
    ctypedef unsigned long long u64
    ctypedef unsigned int u32

cdef u64 _GAMMA = 0x9E3779B97F4A7C15ULL
cdef u64 _POS = 0xD1B54A32D192ED03ULL


cdef inline u64 _mix64(u64 z) nogil:
    z ^= z >> 30
    z *= 0xBF58476D1CE4E5B9ULL
    z ^= z >> 27
    z *= 0x94D049BB133111EBULL
    return z ^ (z >> 31)


cdef inline u64 _word(u64 seed, u64 trial, u64 k) nogil:
    return _mix64(seed + (trial + 1) * _GAMMA + (k + 1) * _POS)


def stream_word(seed, trial, k):
    """Word ``k`` of the substream for ``(seed, trial)``."""
    return int(_word(<u64> (seed & 0xFFFFFFFFFFFFFFFF), <u64> trial, <u64> k))


def subject_words(seed, trial, nwords):
    """First ``nwords`` substream words (bits ``[64*w, 64*w+64)``)."""
    cdef u64 s = <u64> (seed & 0xFFFFFFFFFFFFFFFF)
    cdef u64 t = <u64> trial
    return [int(_word(s, t, k)) for k in range(nwords)]


cdef inline bint _bsearch(u64 val, const u64[::1] codes, Py_ssize_t lo,
                          Py_ssize_t hi) nogil:
    cdef Py_ssize_t mid
    cdef Py_ssize_t end = hi
    while lo < hi:
        mid = (lo + hi) >> 1
        if codes[mid] < val:
            lo = mid + 1
        else:
            hi = mid
    return lo < end and codes[lo] == val


cdef inline bint _hits_any_one(u64 subject, const u64[::1] fmasks,
                               const long long[::1] offsets,
                               const u64[::1] codes) nogil:
    cdef Py_ssize_t i, lo, hi
    for i in range(fmasks.shape[0]):
        lo = <Py_ssize_t> offsets[i]
        hi = <Py_ssize_t> offsets[i + 1]
        if lo == hi:
            continue
        if _bsearch(subject & fmasks[i], codes, lo, hi):
            return True
    return False


def mc_hit_count(seed, trials, nbits, fmasks, offsets, codes):
    """Number of sampled subjects hitting at least one level."""
    if nbits > 64:
        raise ValueError("kernel subjects are limited to 64 bits")
    cdef const u64[::1] fm = np.ascontiguousarray(fmasks, dtype=np.uint64)
    cdef const long long[::1] off = np.ascontiguousarray(offsets, dtype=np.int64)
    cdef const u64[::1] cd = np.ascontiguousarray(codes, dtype=np.uint64)
    cdef u64 s = <u64> (seed & 0xFFFFFFFFFFFFFFFF)
    cdef u64 mask = 0xFFFFFFFFFFFFFFFFULL if nbits == 64 else (1ULL << nbits) - 1
    cdef Py_ssize_t t, total = trials
    cdef long long count = 0
    with nogil:
        for t in range(total):
            if _hits_any_one(_word(s, <u64> t, 0) & mask, fm, off, cd):
                count += 1
    return int(count)


def union_measure_count(nbits, fmasks, offsets, codes):
    """Count prefixes in ``[0, 2**nbits)`` hitting at least one level."""
    if nbits > 24:
        raise ValueError("exhaustive enumeration is limited to 24 bits")
    cdef const u64[::1] fm = np.ascontiguousarray(fmasks, dtype=np.uint64)
    cdef const long long[::1] off = np.ascontiguousarray(offsets, dtype=np.int64)
    cdef const u64[::1] cd = np.ascontiguousarray(codes, dtype=np.uint64)
    cdef u64 subject, top = 1ULL << nbits
    cdef long long count = 0
    with nogil:
        for subject in range(top):
            if _hits_any_one(subject, fm, off, cd):
                count += 1
    return int(count)


def agreement_max_sweep(nbits, prefix_masks, chosen):
    """Max agreement count over all subjects, with a witness subject."""
    if nbits > 24:
        raise ValueError("exhaustive enumeration is limited to 24 bits")
    cdef const u64[::1] pm = np.ascontiguousarray(prefix_masks, dtype=np.uint64)
    cdef const u64[::1] ch = np.ascontiguousarray(chosen, dtype=np.uint64)
    cdef u64 subject, top = 1ULL << nbits
    cdef Py_ssize_t i, nlev = pm.shape[0]
    cdef int cnt, best = -1
    cdef u64 witness = 0
    with nogil:
        for subject in range(top):
            cnt = 0
            for i in range(nlev):
                if (subject & pm[i]) == ch[i]:
                    cnt += 1
            if cnt > best:
                best = cnt
                witness = subject
    return int(best), int(witness)


def star_exact_levels(classes, unions, branch_set):
    """Exact-guess test per level for one branch subset (see python twin)."""
    if branch_set == 0:
        raise ValueError("branch subset must be nonempty")
    cdef const u32[:, ::1] cl = np.ascontiguousarray(classes, dtype=np.uint32)
    cdef const u32[::1] un = np.ascontiguousarray(unions, dtype=np.uint32)
    out = np.zeros(cl.shape[0], dtype=np.uint8)
    cdef unsigned char[::1] ov = out
    cdef u32 bf = <u32> branch_set
    cdef Py_ssize_t l, j, kmax = cl.shape[1]
    cdef bint ok
    with nogil:
        for l in range(cl.shape[0]):
            if bf & ~un[l]:
                continue
            ok = True
            for j in range(kmax):
                if (cl[l, j] & bf) == 0:
                    ok = False
                    break
            ov[l] = 1 if ok else 0
    return out


def guess_hits_u64(subject, fmasks, offsets, codes):
    """Indices of levels whose code set contains the subject's prefix."""
    cdef const u64[::1] fm = np.ascontiguousarray(fmasks, dtype=np.uint64)
    cdef const long long[::1] off = np.ascontiguousarray(offsets, dtype=np.int64)
    cdef const u64[::1] cd = np.ascontiguousarray(codes, dtype=np.uint64)
    cdef u64 subj = <u64> (subject & 0xFFFFFFFFFFFFFFFF)
    cdef Py_ssize_t i, lo, hi
    hits = []
    for i in range(fm.shape[0]):
        lo = <Py_ssize_t> off[i]
        hi = <Py_ssize_t> off[i + 1]
        if lo < hi and _bsearch(subj & fm[i], cd, lo, hi):
            hits.append(i)
    return np.asarray(hits, dtype=np.int64)
