"""Index functions on the naturals, given by a small expression language.

Grammar (whitespace-insensitive)::

    expr := name | name "(" expr {"," expr} ")" | integer

Catalog:

====================  =====================================================
``id``                n -> n
``const(c)``          n -> c, for an integer literal c (a bare integer
                      parses to the same function)
``ruler``             n -> 2-adic valuation of n+1 (0,1,0,2,0,1,0,3,...)
``floorlog2``         n -> floor(log2(n+1))
``pow2``              n -> 2**n
``half``              n -> n // 2
``add(a,b)``          n -> a(n) + b(n)
``mul(a,b)``          n -> a(n) * b(n)
``min(a,b)``          n -> min(a(n), b(n))
``max(a,b)``          n -> max(a(n), b(n))
``compose(a,b)``      n -> a(b(n))
====================  =====================================================

The unary catalog entries ``ruler``, ``floorlog2``, ``pow2`` and ``half``
optionally take one argument as composition sugar: ``pow2(e)`` evaluates as
``pow2`` after ``e``.  All arithmetic is over the unsigned 64-bit range;
results past 2**64 - 1 raise :class:`FuncEvalError` rather than wrapping.
"""

from __future__ import annotations

import functools
import re
from dataclasses import dataclass, field

import numpy as np

from .errors import FuncEvalError, FuncSyntaxError

U64_MAX = (1 << 64) - 1

# head -> (min arity, max arity); "lit" and "const" are special-cased
_ARITY = {
    "id": (0, 0),
    "ruler": (0, 1),
    "floorlog2": (0, 1),
    "pow2": (0, 1),
    "half": (0, 1),
    "const": (1, 1),
    "add": (2, 2),
    "mul": (2, 2),
    "min": (2, 2),
    "max": (2, 2),
    "compose": (2, 2),
}

CATALOG_NAMES = tuple(sorted(_ARITY))


@dataclass(frozen=True)
class FuncSpec:
    """Abstract syntax tree of an index function."""

    head: str
    args: tuple["FuncSpec", ...] = ()
    value: int | None = None  # payload for integer literals

    @property
    def name(self) -> str:
        """Canonical display string; parsing it back yields an equal tree."""
        if self.head == "lit":
            return str(self.value)
        if not self.args:
            return self.head
        return f"{self.head}({','.join(a.name for a in self.args)})"

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True)
class FiberReport:
    """Preimage of one value below a horizon."""

    value: int
    members: tuple[int, ...]
    truncated_at: int


# ---------------------------------------------------------------------------
# parsing
# ---------------------------------------------------------------------------

_TOKEN = re.compile(r"\s*(?:(\d+)|([A-Za-z_][A-Za-z0-9_]*)|([(),])|(\S))")


def _tokenize(text: str):
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            break
        num, name, punct, bad = m.groups()
        start = m.end() - len(m.group().lstrip()) if m.group().strip() else m.end()
        if bad is not None:
            raise FuncSyntaxError(f"unexpected character {bad!r}", start)
        if num is not None:
            tokens.append(("int", num, start))
        elif name is not None:
            tokens.append(("name", name, start))
        elif punct is not None:
            tokens.append((punct, punct, start))
        pos = m.end()
    tokens.append(("end", "", len(text)))
    return tokens


def parse_funcspec(text: str) -> FuncSpec:
    """Parse an expression into a :class:`FuncSpec`.

    Raises :class:`FuncSyntaxError` with a position on malformed input and
    on unknown identifiers.
    """
    tokens = _tokenize(text)
    idx = 0

    def peek():
        return tokens[idx]

    def advance():
        nonlocal idx
        tok = tokens[idx]
        idx += 1
        return tok

    def parse_expr() -> FuncSpec:
        kind, val, pos = advance()
        if kind == "int":
            return FuncSpec("lit", (), int(val))
        if kind != "name":
            raise FuncSyntaxError(f"expected a name or integer, got {val!r}", pos)
        if val not in _ARITY:
            raise FuncSyntaxError(f"unknown builtin name {val!r}", pos)
        args: list[FuncSpec] = []
        if peek()[0] == "(":
            advance()
            args.append(parse_expr())
            while peek()[0] == ",":
                advance()
                args.append(parse_expr())
            kind2, val2, pos2 = advance()
            if kind2 != ")":
                raise FuncSyntaxError(f"expected ')' or ',', got {val2!r}", pos2)
        lo, hi = _ARITY[val]
        if not lo <= len(args) <= hi:
            wanted = str(lo) if lo == hi else f"{lo}..{hi}"
            raise FuncSyntaxError(
                f"{val} takes {wanted} argument(s), got {len(args)}", pos
            )
        if val == "const" and args[0].head != "lit":
            raise FuncSyntaxError("const takes an integer literal", pos)
        return FuncSpec(val, tuple(args))

    spec = parse_expr()
    kind, val, pos = peek()
    if kind != "end":
        raise FuncSyntaxError(f"trailing input {val!r}", pos)
    return spec


# ---------------------------------------------------------------------------
# evaluation
# ---------------------------------------------------------------------------


def _ruler(n: int) -> int:
    v = n + 1
    return (v & -v).bit_length() - 1


def _checked(value: int, spec: FuncSpec, n: int) -> int:
    if value > U64_MAX:
        raise FuncEvalError(
            f"{spec.name} overflows the unsigned 64-bit range at n={n}"
        )
    return value


@functools.lru_cache(maxsize=1 << 20)
def _eval(spec: FuncSpec, n: int) -> int:
    head = spec.head
    if head == "lit":
        return spec.value
    if head == "id":
        return n
    if head == "const":
        return spec.args[0].value
    if head in ("ruler", "floorlog2", "pow2", "half"):
        m = _eval(spec.args[0], n) if spec.args else n
        if head == "ruler":
            return _ruler(m)
        if head == "floorlog2":
            return (m + 1).bit_length() - 1
        if head == "half":
            return m >> 1
        if m >= 64:
            raise FuncEvalError(
                f"{spec.name} overflows the unsigned 64-bit range at n={n}"
            )
        return 1 << m
    if head == "add":
        return _checked(_eval(spec.args[0], n) + _eval(spec.args[1], n), spec, n)
    if head == "mul":
        return _checked(_eval(spec.args[0], n) * _eval(spec.args[1], n), spec, n)
    if head == "min":
        return min(_eval(spec.args[0], n), _eval(spec.args[1], n))
    if head == "max":
        return max(_eval(spec.args[0], n), _eval(spec.args[1], n))
    if head == "compose":
        return _eval(spec.args[0], _eval(spec.args[1], n))
    raise FuncEvalError(f"unknown head {head!r}")


def eval_func(spec: FuncSpec, n: int) -> int:
    """Value of the function at ``n``; deterministic, overflow-checked."""
    if n < 0:
        raise FuncEvalError(f"index functions are defined on naturals, got {n}")
    return _eval(spec, n)


# ---------------------------------------------------------------------------
# vectorized evaluation (used by long level scans)
# ---------------------------------------------------------------------------


def _floorlog2_array(v: np.ndarray) -> np.ndarray:
    # integer-exact bit length minus one, for v >= 1
    out = np.zeros(v.shape, dtype=np.uint64)
    w = v.copy()
    for s in (32, 16, 8, 4, 2, 1):
        big = w >= np.uint64(1 << s)
        out[big] += np.uint64(s)
        w[big] >>= np.uint64(s)
    return out


def eval_func_array(spec: FuncSpec, ns: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Evaluate over a uint64 array.

    Returns ``(values, overflowed)``.  Entries flagged in ``overflowed``
    exceeded the 64-bit range somewhere in the computation; their value
    slot is unspecified.  The scalar path raises instead, so callers that
    want errors should use :func:`eval_func`.
    """
    ns = np.ascontiguousarray(ns, dtype=np.uint64)
    head = spec.head
    if head == "lit":
        return np.full(ns.shape, spec.value, dtype=np.uint64), np.zeros(ns.shape, bool)
    if head == "id":
        return ns.copy(), np.zeros(ns.shape, bool)
    if head == "const":
        return (
            np.full(ns.shape, spec.args[0].value, dtype=np.uint64),
            np.zeros(ns.shape, bool),
        )
    if head in ("ruler", "floorlog2", "pow2", "half"):
        if spec.args:
            m, ovf = eval_func_array(spec.args[0], ns)
        else:
            m, ovf = ns, np.zeros(ns.shape, bool)
        if head == "half":
            return m >> np.uint64(1), ovf
        if head == "pow2":
            bad = ovf | (m >= np.uint64(64))
            e = np.where(bad, np.uint64(0), m)
            return np.uint64(1) << e, bad
        v = m + np.uint64(1)  # wrap at 2**64-1 flagged below
        ovf = ovf | (v == 0)
        v = np.where(ovf, np.uint64(1), v)
        if head == "floorlog2":
            return _floorlog2_array(v), ovf
        low = v & (~v + np.uint64(1))
        return _floorlog2_array(low), ovf
    if head in ("add", "mul", "min", "max"):
        a, oa = eval_func_array(spec.args[0], ns)
        b, ob = eval_func_array(spec.args[1], ns)
        ovf = oa | ob
        if head == "min":
            return np.minimum(a, b), ovf
        if head == "max":
            return np.maximum(a, b), ovf
        if head == "add":
            with np.errstate(over="ignore"):
                c = a + b
            return c, ovf | (c < a)
        with np.errstate(over="ignore"):
            c = a * b
        nz = a != 0
        wrapped = np.zeros(ns.shape, bool)
        wrapped[nz] = (c[nz] // a[nz]) != b[nz]
        return c, ovf | wrapped
    if head == "compose":
        inner, oi = eval_func_array(spec.args[1], ns)
        outer, oo = eval_func_array(spec.args[0], np.where(oi, np.uint64(0), inner))
        return outer, oi | oo
    raise FuncEvalError(f"unknown head {head!r}")


# ---------------------------------------------------------------------------
# fibers
# ---------------------------------------------------------------------------


def fiber_census(spec: FuncSpec, horizon: int) -> list[FiberReport]:
    """Preimage members below ``horizon`` for each attained value, sorted."""
    if horizon < 1:
        raise ValueError("horizon must be at least 1")
    fibers: dict[int, list[int]] = {}
    for n in range(horizon):
        fibers.setdefault(eval_func(spec, n), []).append(n)
    return [
        FiberReport(value, tuple(members), horizon)
        for value, members in sorted(fibers.items())
    ]


# common specs, handy as defaults
IDENTITY = FuncSpec("id")
RULER = FuncSpec("ruler")
