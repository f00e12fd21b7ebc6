"""Exact arithmetic in F_q and on dense matrices over F_q.

Field elements are integer codes in ``[0, q)``.  For prime fields the code is
the residue itself; for extension fields the code ``c`` stands for the
polynomial whose base-``p`` digits (least significant first) are the
coefficients of ``1, x, x^2, ...``.

Matrices are indexed by reading their row-major entries as base-``q`` digits,
most significant first, so entry ``(0, 0)`` is the leading digit and numeric
index order coincides with lexicographic matrix order.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field
from functools import cached_property
from itertools import product
from typing import Iterator, Sequence

import numpy as np

from .errors import (
    DimensionMismatch,
    EnumerationCapExceeded,
    FieldMismatch,
    IndexOutOfRange,
    NonPrimeP,
    ReduciblePolynomial,
    UnsupportedExtension,
    ConfigError,
)

DEFAULT_ENUMERATION_CAP = 2**32
MAX_EXTENSION_ORDER = 256
MAX_RING_ORDER = 4096

# Little-endian coefficients, monic.
DEFAULT_POLYS = {
    4: (1, 1, 1),  # x^2 + x + 1
    8: (1, 1, 0, 1),  # x^3 + x + 1
    9: (1, 0, 1),  # x^2 + 1
}


def is_prime(n: int) -> bool:
    if n < 2:
        return False
    if n % 2 == 0:
        return n == 2
    f = 3
    while f * f <= n:
        if n % f == 0:
            return False
        f += 2
    return True


def prime_power(q: int) -> tuple[int, int]:
    """Split ``q = p**e``; raise ``ConfigError`` if q is not a prime power."""
    if q < 2:
        raise ConfigError(f"field order must be >= 2, got {q}")
    p = next(f for f in range(2, q + 1) if q % f == 0)
    e, r = 0, q
    while r % p == 0:
        r //= p
        e += 1
    if r != 1:
        raise NonPrimeP(f"q={q} is not a prime power")
    return p, e


# ---------------------------------------------------------------------------
# polynomials over F_p (little-endian coefficient tuples)


def _poly_trim(a: list[int]) -> list[int]:
    while a and a[-1] == 0:
        a.pop()
    return a


def _poly_mod(a: Sequence[int], b: Sequence[int], p: int) -> list[int]:
    r = [c % p for c in a]
    _poly_trim(r)
    inv_lead = pow(b[-1], p - 2, p)
    db = len(b) - 1
    while len(r) - 1 >= db and r:
        c = (r[-1] * inv_lead) % p
        shift = len(r) - 1 - db
        for i, bc in enumerate(b):
            r[shift + i] = (r[shift + i] - c * bc) % p
        _poly_trim(r)
    return r


def is_irreducible(poly: Sequence[int], p: int) -> bool:
    """Exhaustive check: no monic divisor of degree 1..deg/2."""
    deg = len(poly) - 1
    if deg < 1:
        return False
    for k in range(1, deg // 2 + 1):
        for low in product(range(p), repeat=k):
            if not _poly_mod(poly, list(low) + [1], p):
                return False
    return True


# ---------------------------------------------------------------------------
# fields


@dataclass(frozen=True)
class FieldSpec:
    """The finite field F_q with q = p**e.

    For ``e > 1`` the arithmetic is backed by q x q tables built from ``poly``.
    """

    p: int
    e: int = 1
    poly: tuple[int, ...] | None = None
    _add: np.ndarray | None = dc_field(default=None, compare=False, repr=False)
    _mul: np.ndarray | None = dc_field(default=None, compare=False, repr=False)

    @property
    def q(self) -> int:
        return self.p**self.e

    @property
    def is_prime(self) -> bool:
        return self.e == 1

    def __str__(self) -> str:
        return f"F_{self.q}"

    def add(self, a, b):
        if self.e == 1:
            return (a + b) % self.p
        return self._add[a, b]

    def neg(self, a):
        if self.e == 1:
            return (-a) % self.p
        return self._neg_table[a]

    def sub(self, a, b):
        return self.add(a, self.neg(b))

    def mul(self, a, b):
        if self.e == 1:
            return (a * b) % self.p
        return self._mul[a, b]

    def inv(self, a):
        if np.any(np.asarray(a) == 0):
            raise ZeroDivisionError("0 has no inverse")
        return self._inv_table[a]

    @cached_property
    def _neg_table(self) -> np.ndarray:
        zero_col = self._add == 0
        return np.argmax(zero_col, axis=1)

    @cached_property
    def _inv_table(self) -> np.ndarray:
        if self.e == 1:
            inv = np.zeros(self.p, dtype=np.int64)
            for a in range(1, self.p):
                inv[a] = pow(a, self.p - 2, self.p)
            return inv
        one_col = self._mul == 1
        inv = np.argmax(one_col, axis=1)
        inv[0] = 0
        return inv

    def elements(self) -> range:
        return range(self.q)


def _extension_tables(p: int, e: int, poly: tuple[int, ...]) -> tuple[np.ndarray, np.ndarray]:
    q = p**e
    codes = np.arange(q)
    weights = p ** np.arange(e)
    digits = (codes[:, None] // weights[None, :]) % p  # (q, e)

    add_digits = (digits[:, None, :] + digits[None, :, :]) % p
    add = (add_digits * weights).sum(axis=-1)

    prod = np.zeros((q, q, 2 * e - 1), dtype=np.int64)
    for i in range(e):
        for j in range(e):
            prod[:, :, i + j] += digits[:, None, i] * digits[None, :, j]
    prod %= p
    low = np.asarray(poly[:e], dtype=np.int64)
    for k in range(2 * e - 2, e - 1, -1):
        c = prod[:, :, k].copy()
        prod[:, :, k] = 0
        prod[:, :, k - e : k] = (prod[:, :, k - e : k] - c[:, :, None] * low) % p
    mul = (prod[:, :, :e] * weights).sum(axis=-1)
    return add.astype(np.int64), mul.astype(np.int64)


def field_make(p: int, e: int = 1, poly: Sequence[int] | None = None) -> FieldSpec:
    """Build F_{p^e}.

    ``poly`` holds little-endian coefficients of a degree-``e`` polynomial over
    F_p; it is normalised to monic form. When omitted for ``e > 1``, a built-in
    polynomial is used for q in {4, 8, 9}.
    """
    if not is_prime(p):
        raise NonPrimeP(f"p={p} is not prime")
    if e < 1:
        raise ConfigError(f"extension degree must be >= 1, got {e}")
    q = p**e
    if e == 1:
        if poly is not None and len(poly) not in (0, 2):
            raise ConfigError("poly is only meaningful for e > 1")
        return FieldSpec(p, 1, None)
    if poly is None:
        if q not in DEFAULT_POLYS:
            raise UnsupportedExtension(
                f"no built-in polynomial for q={q}; supply an irreducible polynomial of degree {e}"
            )
        poly = DEFAULT_POLYS[q]
    if q > MAX_EXTENSION_ORDER:
        raise UnsupportedExtension(f"table-backed fields are limited to q <= {MAX_EXTENSION_ORDER}")
    coeffs = [int(c) for c in poly]
    if len(coeffs) != e + 1 or coeffs[-1] % p == 0:
        raise ConfigError(f"poly must have degree exactly {e} over F_{p}: {tuple(poly)}")
    if any(c < 0 or c >= p for c in coeffs):
        raise ConfigError(f"poly coefficients must lie in [0, {p})")
    lead_inv = pow(coeffs[-1], p - 2, p)
    monic = tuple((c * lead_inv) % p for c in coeffs)
    if not is_irreducible(monic, p):
        raise ReduciblePolynomial(f"{monic} factors over F_{p}")
    add, mul = _extension_tables(p, e, monic)
    return FieldSpec(p, e, monic, add, mul)


def field_from_order(q: int, poly: Sequence[int] | None = None) -> FieldSpec:
    p, e = prime_power(q)
    return field_make(p, e, poly)


# ---------------------------------------------------------------------------
# matrices


@dataclass(frozen=True)
class MatFq:
    """An ``n_rows x n_cols`` matrix over ``field``, entries stored row-major."""

    n_rows: int
    n_cols: int
    entries: tuple[int, ...]
    field: FieldSpec

    def __post_init__(self):
        if len(self.entries) != self.n_rows * self.n_cols:
            raise DimensionMismatch(
                f"{len(self.entries)} entries for a {self.n_rows}x{self.n_cols} matrix"
            )
        q = self.field.q
        if any(not 0 <= x < q for x in self.entries):
            raise ConfigError(f"entry codes must lie in [0, {q})")

    @classmethod
    def from_rows(cls, rows: Sequence[Sequence[int]], field: FieldSpec) -> "MatFq":
        n_rows = len(rows)
        n_cols = len(rows[0]) if rows else 0
        if any(len(r) != n_cols for r in rows):
            raise DimensionMismatch("ragged rows")
        return cls(n_rows, n_cols, tuple(int(x) for r in rows for x in r), field)

    @classmethod
    def from_array(cls, arr: np.ndarray, field: FieldSpec) -> "MatFq":
        arr = np.asarray(arr)
        return cls(arr.shape[0], arr.shape[1], tuple(int(x) for x in arr.ravel()), field)

    @classmethod
    def zeros(cls, n_rows: int, n_cols: int, field: FieldSpec) -> "MatFq":
        return cls(n_rows, n_cols, (0,) * (n_rows * n_cols), field)

    @classmethod
    def identity(cls, n: int, field: FieldSpec) -> "MatFq":
        return cls(n, n, tuple(int(i == j) for i in range(n) for j in range(n)), field)

    def to_array(self) -> np.ndarray:
        return np.array(self.entries, dtype=np.int64).reshape(self.n_rows, self.n_cols)

    def rows(self) -> list[list[int]]:
        return self.to_array().tolist()

    @property
    def T(self) -> "MatFq":
        return MatFq.from_array(self.to_array().T, self.field)

    def index(self) -> int:
        return mat_index(self)

    def rank(self) -> int:
        return mat_rank(self)

    def __add__(self, other: "MatFq") -> "MatFq":
        return mat_arith("add", self, other)

    def __sub__(self, other: "MatFq") -> "MatFq":
        return mat_arith("sub", self, other)

    def __matmul__(self, other: "MatFq") -> "MatFq":
        return mat_arith("mul", self, other)

    def __neg__(self) -> "MatFq":
        return mat_arith("neg", self)


def batched_matmul(a: np.ndarray, b: np.ndarray, field: FieldSpec) -> np.ndarray:
    """Product of stacked code arrays ``(..., r, k) @ (..., k, c)`` over ``field``."""
    if field.is_prime:
        return (a @ b) % field.p
    k = a.shape[-1]
    out = None
    for i in range(k):
        term = field.mul(a[..., :, i, None], b[..., None, i, :])
        out = term if out is None else field.add(out, term)
    return out


def mat_arith(op: str, a: MatFq, b: MatFq | None = None) -> MatFq:
    """``add``, ``sub``, ``mul`` or ``neg`` (``b`` ignored for ``neg``)."""
    f = a.field
    if op == "neg":
        return MatFq.from_array(f.neg(a.to_array()), f)
    if b is None:
        raise ConfigError(f"{op} needs two operands")
    if b.field != f:
        raise FieldMismatch(f"{a.field} vs {b.field}")
    x, y = a.to_array(), b.to_array()
    if op in ("add", "sub"):
        if x.shape != y.shape:
            raise DimensionMismatch(f"{x.shape} vs {y.shape}")
        return MatFq.from_array(f.add(x, y) if op == "add" else f.sub(x, y), f)
    if op == "mul":
        if x.shape[1] != y.shape[0]:
            raise DimensionMismatch(f"cannot multiply {x.shape} by {y.shape}")
        return MatFq.from_array(batched_matmul(x, y, f), f)
    raise ConfigError(f"unknown matrix operation {op!r}")


def mat_hstack(mats: Sequence[MatFq]) -> MatFq:
    f = mats[0].field
    if any(m.field != f for m in mats):
        raise FieldMismatch("hstack over different fields")
    if any(m.n_rows != mats[0].n_rows for m in mats):
        raise DimensionMismatch("hstack needs equal row counts")
    return MatFq.from_array(np.hstack([m.to_array() for m in mats]), f)


def batch_rank(mats: np.ndarray, field: FieldSpec) -> np.ndarray:
    """Ranks of a stack ``(N, r, c)`` of code matrices.

    Fraction-free elimination with the first nonzero entry of each column as
    pivot: row_i <- pivot * row_i - a_i * pivot_row.
    """
    m = np.array(mats, dtype=np.int64, copy=True)
    if m.ndim != 3:
        raise DimensionMismatch(f"expected (N, r, c) array, got shape {m.shape}")
    count, r, c = m.shape
    rank = np.zeros(count, dtype=np.int64)
    rows = np.arange(r)
    for col in range(c):
        cand = (m[:, :, col] != 0) & (rows[None, :] >= rank[:, None])
        has = cand.any(axis=1)
        if not has.any():
            continue
        sel = np.nonzero(has)[0]
        piv = np.argmax(cand[sel], axis=1)
        rk = rank[sel]
        sub = m[sel]
        k = np.arange(len(sel))
        pivot_row = sub[k, piv].copy()
        sub[k, piv] = sub[k, rk]
        sub[k, rk] = pivot_row
        pv = pivot_row[:, col]
        factors = sub[:, :, col]
        scaled = field.mul(pv[:, None, None], sub)
        removed = field.mul(factors[:, :, None], pivot_row[:, None, :])
        sub = field.sub(scaled, removed)
        sub[k, rk] = pivot_row
        m[sel] = sub
        rank[sel] += 1
    return rank


def mat_rank(m: MatFq) -> int:
    if m.n_rows == 0 or m.n_cols == 0:
        return 0
    return int(batch_rank(m.to_array()[None], m.field)[0])


def rref(m: MatFq) -> tuple[MatFq, list[int]]:
    """Reduced row echelon form and the pivot columns."""
    f = m.field
    a = m.to_array()
    pivots: list[int] = []
    row = 0
    for col in range(m.n_cols):
        nz = [i for i in range(row, m.n_rows) if a[i, col] != 0]
        if not nz:
            continue
        i = nz[0]
        a[[row, i]] = a[[i, row]]
        a[row] = f.mul(int(f.inv(int(a[row, col]))), a[row])
        for j in range(m.n_rows):
            if j != row and a[j, col] != 0:
                a[j] = f.sub(a[j], f.mul(int(a[j, col]), a[row]))
        pivots.append(col)
        row += 1
        if row == m.n_rows:
            break
    return MatFq.from_array(a, f), pivots


def mat_index(m: MatFq) -> int:
    q = m.field.q
    idx = 0
    for x in m.entries:
        idx = idx * q + x
    return idx


def mat_unindex(i: int, n_rows: int, n_cols: int, field: FieldSpec) -> MatFq:
    q = field.q
    size = q ** (n_rows * n_cols)
    if not 0 <= i < size:
        raise IndexOutOfRange(f"index {i} outside [0, {size})")
    digits = []
    for _ in range(n_rows * n_cols):
        i, d = divmod(i, q)
        digits.append(d)
    return MatFq(n_rows, n_cols, tuple(reversed(digits)), field)


def index_array(mats: np.ndarray, q: int) -> np.ndarray:
    """Vectorised ``mat_index`` over a stack ``(..., r, c)``."""
    flat = mats.reshape(mats.shape[:-2] + (-1,))
    idx = np.zeros(flat.shape[:-1], dtype=np.int64)
    for j in range(flat.shape[-1]):
        idx = idx * q + flat[..., j]
    return idx


def unindex_array(idx: np.ndarray, n_rows: int, n_cols: int, q: int) -> np.ndarray:
    """Vectorised ``mat_unindex``; returns shape ``idx.shape + (n_rows, n_cols)``."""
    idx = np.asarray(idx, dtype=np.int64)
    size = n_rows * n_cols
    out = np.empty(idx.shape + (size,), dtype=np.int64)
    rest = idx.copy()
    for j in range(size - 1, -1, -1):
        rest, out[..., j] = np.divmod(rest, q)
    return out.reshape(idx.shape + (n_rows, n_cols))


def matrix_count(n_rows: int, n_cols: int, field: FieldSpec) -> int:
    return field.q ** (n_rows * n_cols)


def _check_cap(total: int, cap: int) -> None:
    if total > cap:
        raise EnumerationCapExceeded(f"{total} matrices exceed the enumeration cap {cap}")


def enumerate_matrices(
    n_rows: int, n_cols: int, field: FieldSpec, cap: int = DEFAULT_ENUMERATION_CAP
) -> Iterator[MatFq]:
    """All matrices of the given shape, in index order."""
    total = matrix_count(n_rows, n_cols, field)
    _check_cap(total, cap)
    for i in range(total):
        yield mat_unindex(i, n_rows, n_cols, field)


def matrix_blocks(
    n_rows: int,
    n_cols: int,
    field: FieldSpec,
    cap: int = DEFAULT_ENUMERATION_CAP,
    block: int = 1 << 16,
    start: int = 0,
    stop: int | None = None,
) -> Iterator[tuple[int, np.ndarray]]:
    """Array form of ``enumerate_matrices``: yields ``(first_index, codes)``.

    ``start``/``stop`` select an index interval, so disjoint intervals can be
    handed to separate workers.
    """
    total = matrix_count(n_rows, n_cols, field)
    _check_cap(total, cap)
    stop = total if stop is None else min(stop, total)
    for lo in range(start, stop, block):
        hi = min(lo + block, stop)
        yield lo, unindex_array(np.arange(lo, hi), n_rows, n_cols, field.q)


# ---------------------------------------------------------------------------
# text format: "q n t : e00 e01 ..."


def format_matrix(m: MatFq) -> str:
    body = " ".join(str(x) for x in m.entries)
    return f"{m.field.q} {m.n_rows} {m.n_cols} : {body}"


def parse_matrix(text: str, field: FieldSpec | None = None) -> MatFq:
    try:
        head, body = text.split(":", 1)
        q, n_rows, n_cols = (int(x) for x in head.split())
        entries = tuple(int(x) for x in body.split())
    except ValueError as exc:
        raise ConfigError(f"malformed matrix text {text!r}") from exc
    if field is None:
        field = field_from_order(q)
    elif field.q != q:
        raise FieldMismatch(f"text declares q={q}, field is {field}")
    return MatFq(n_rows, n_cols, entries, field)


# ---------------------------------------------------------------------------
# table-backed matrix ring


class MatrixRing:
    """M_n(F_q) with every matrix named by its index and lookup tables for
    addition, subtraction, multiplication and rank.

    Table size is ``Q**2`` with ``Q = q**(n*n)``; ``max_order`` caps ``Q``.
    """

    def __init__(self, field: FieldSpec, n: int, max_order: int = MAX_RING_ORDER):
        if n < 1:
            raise ConfigError(f"n must be >= 1, got {n}")
        self.field = field
        self.n = n
        self.order = field.q ** (n * n)
        if self.order > max_order:
            raise EnumerationCapExceeded(
                f"M_{n}(F_{field.q}) has {self.order} elements; ring tables are capped at {max_order}"
            )
        q, Q = field.q, self.order
        self.mats = unindex_array(np.arange(Q), n, n, q)
        dtype = np.int32 if Q < 2**31 else np.int64

        self.add = np.empty((Q, Q), dtype=dtype)
        self.mul = np.empty((Q, Q), dtype=dtype)
        step = max(1, (1 << 20) // (Q * n * n))
        for lo in range(0, Q, step):
            a = self.mats[lo : lo + step, None]
            self.add[lo : lo + step] = index_array(field.add(a, self.mats[None]), q)
            self.mul[lo : lo + step] = index_array(batched_matmul(a, self.mats[None], field), q)
        self.neg = index_array(field.neg(self.mats), q).astype(dtype)
        self.sub = self.add[:, self.neg]
        self.rank = batch_rank(self.mats, field)
        self.zero = 0
        self.identity = mat_index(MatFq.identity(n, field))

    def matrix(self, i: int) -> MatFq:
        return MatFq.from_array(self.mats[i], self.field)

    def index_of(self, m: MatFq) -> int:
        if m.field != self.field:
            raise FieldMismatch(f"{m.field} vs {self.field}")
        if (m.n_rows, m.n_cols) != (self.n, self.n):
            raise DimensionMismatch(f"expected {self.n}x{self.n}, got {m.n_rows}x{m.n_cols}")
        return mat_index(m)
