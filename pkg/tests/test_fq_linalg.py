import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sumprod.errors import (
    DimensionMismatch,
    EnumerationCapExceeded,
    FieldMismatch,
    IndexOutOfRange,
    NonPrimeP,
    ReduciblePolynomial,
    UnsupportedExtension,
)
from sumprod.fq_linalg import (
    MatFq,
    MatrixRing,
    batch_rank,
    enumerate_matrices,
    field_from_order,
    field_make,
    format_matrix,
    index_array,
    is_irreducible,
    mat_index,
    mat_rank,
    mat_unindex,
    matrix_blocks,
    parse_matrix,
    rref,
    unindex_array,
)

FIELDS = [
    (2, 1, None), (3, 1, None), (5, 1, None), (7, 1, None), (11, 1, None), (13, 1, None),
    (2, 2, None), (2, 3, None), (3, 2, None), (2, 4, (1, 1, 0, 0, 1)),
]


def _field(p, e, poly):
    return field_make(p, e, poly)


@pytest.mark.parametrize("p,e,poly", FIELDS)
def test_field_axioms_exhaustive(p, e, poly):
    f = _field(p, e, poly)
    q = f.q
    a, b = np.meshgrid(np.arange(q), np.arange(q), indexing="ij")
    add, mul = f.add(a, b), f.mul(a, b)
    assert np.array_equal(add, add.T)
    assert np.array_equal(mul, mul.T)
    assert np.array_equal(add[:, 0], np.arange(q))
    assert np.array_equal(mul[:, 1], np.arange(q))
    assert np.all(mul[:, 0] == 0)
    # every row of both tables is a permutation (groups), apart from mul by 0
    assert all(sorted(row) == list(range(q)) for row in add)
    assert all(sorted(row) == list(range(q)) for row in mul[1:])
    # associativity and distributivity over all triples
    c = np.arange(q)
    left = f.mul(a[..., None], f.add(b[..., None], c))
    right = f.add(f.mul(a, b)[..., None], f.mul(a[..., None], c))
    assert np.array_equal(left, right)
    assert np.array_equal(f.add(add[..., None], c), f.add(a[..., None], f.add(b[..., None], c)))
    assert np.array_equal(f.mul(mul[..., None], c), f.mul(a[..., None], f.mul(b[..., None], c)))
    nz = np.arange(1, q)
    assert np.all(f.mul(nz, f.inv(nz)) == 1)
    assert np.all(f.add(np.arange(q), f.neg(np.arange(q))) == 0)


def test_prime_field_examples():
    f5 = field_make(5)
    assert int(f5.mul(3, 4)) == 2
    assert int(f5.inv(3)) == 2
    assert int(f5.sub(1, 3)) == 3


def test_f4_is_not_z4():
    f4 = field_from_order(4)
    # x * x = x + 1 in F_2[x]/(x^2 + x + 1); codes are little-endian bit vectors
    assert int(f4.mul(2, 2)) == 3
    assert int(f4.add(3, 3)) == 0


@pytest.mark.parametrize("q", [4, 8, 9])
def test_default_extensions_are_fields(q):
    f = field_from_order(q)
    assert f.q == q
    assert is_irreducible(f.poly, f.p)


def test_invalid_fields():
    with pytest.raises(NonPrimeP):
        field_make(6)
    with pytest.raises(NonPrimeP):
        field_from_order(6)
    with pytest.raises(ReduciblePolynomial):
        field_make(2, 2, (1, 0, 1))  # x^2 + 1 = (x + 1)^2 over F_2
    with pytest.raises(UnsupportedExtension):
        field_make(2, 5)
    with pytest.raises(ZeroDivisionError):
        field_make(3).inv(0)


@pytest.mark.parametrize("poly,p,expected", [
    ((1, 1, 1), 2, True), ((1, 0, 1), 2, False), ((1, 1, 0, 1), 2, True),
    ((1, 0, 1), 3, True), ((2, 0, 1), 3, False), ((1, 1, 0, 0, 1), 2, True), ((1, 0, 0, 0, 1), 2, False),
])
def test_irreducibility(poly, p, expected):
    assert is_irreducible(poly, p) is expected


def test_rank_examples():
    f3 = field_make(3)
    assert mat_rank(MatFq.from_rows([[1, 2], [2, 1]], f3)) == 1  # second row is 2 x first
    assert mat_rank(MatFq.from_rows([[1, 0], [0, 1]], f3)) == 2
    assert mat_rank(MatFq.zeros(2, 3, f3)) == 0
    f2 = field_make(2)
    assert mat_rank(MatFq.from_rows([[1, 1], [1, 1]], f2)) == 1
    assert mat_rank(MatFq.from_rows([[1, 1, 0], [0, 1, 1], [1, 0, 1]], f2)) == 2


def test_index_examples():
    f3 = field_make(3)
    m = MatFq.from_rows([[1, 0], [0, 0]], f3)
    assert mat_index(m) == 27
    assert mat_unindex(27, 2, 2, f3) == m
    assert mat_index(MatFq.identity(2, f3)) == 27 + 1
    with pytest.raises(IndexOutOfRange):
        mat_unindex(81, 2, 2, f3)


def _row_span_size(m: MatFq) -> int:
    # oracle: enumerate every linear combination of the rows
    f, rows = m.field, m.to_array()
    span = set()
    for coeffs in itertools.product(range(f.q), repeat=m.n_rows):
        acc = np.zeros(m.n_cols, dtype=np.int64)
        for c, r in zip(coeffs, rows):
            acc = f.add(acc, f.mul(c, r))
        span.add(tuple(int(x) for x in acc))
    return len(span)


@pytest.mark.parametrize("q", [2, 3, 4, 5])
@pytest.mark.parametrize("shape", [(2, 2), (2, 3), (3, 2)])
def test_rank_matches_row_span_oracle(q, shape):
    f = field_from_order(q)
    rng = np.random.default_rng(q * 10 + shape[1])
    for idx in rng.integers(0, q ** (shape[0] * shape[1]), size=40):
        m = mat_unindex(int(idx), *shape, f)
        assert f.q ** mat_rank(m) == _row_span_size(m)


@pytest.mark.parametrize("q", [2, 3, 4, 9])
def test_rank_transpose_symmetry_exhaustive(q):
    f = field_from_order(q)
    mats = np.concatenate([block for _, block in matrix_blocks(2, 2, f)])
    assert len(mats) == q**4 == len(list(enumerate_matrices(2, 2, f)))
    assert np.array_equal(batch_rank(mats, f), batch_rank(np.swapaxes(mats, 1, 2), f))


def test_rref_pivots_and_idempotence():
    f5 = field_make(5)
    m = MatFq.from_rows([[0, 2, 4], [1, 1, 1], [1, 3, 0]], f5)
    r, pivots = rref(m)
    assert len(pivots) == mat_rank(m)
    r2, pivots2 = rref(r)
    assert r2 == r and pivots2 == pivots
    for i, c in enumerate(pivots):
        assert r.to_array()[i, c] == 1


def test_matrix_operators():
    f3 = field_make(3)
    a = MatFq.from_rows([[1, 2], [0, 1]], f3)
    b = MatFq.from_rows([[2, 0], [1, 1]], f3)
    assert (a @ b).rows() == [[1, 2], [1, 1]]
    assert (a + b).rows() == [[0, 2], [1, 2]]
    assert (a - a) == MatFq.zeros(2, 2, f3)
    assert a @ MatFq.identity(2, f3) == a
    assert (-a + a) == MatFq.zeros(2, 2, f3)
    with pytest.raises(DimensionMismatch):
        a @ MatFq.zeros(3, 1, f3)
    with pytest.raises(FieldMismatch):
        a + MatFq.zeros(2, 2, field_make(5))


def test_text_format_round_trip():
    f3 = field_make(3)
    m = MatFq.from_rows([[1, 0, 2], [2, 2, 0]], f3)
    text = format_matrix(m)
    assert text == "3 2 3 : 1 0 2 2 2 0"
    assert parse_matrix(text) == m
    with pytest.raises(FieldMismatch):
        parse_matrix(text, field_make(5))


def test_enumeration_cap():
    with pytest.raises(EnumerationCapExceeded):
        list(enumerate_matrices(3, 3, field_make(3), cap=1000))
    with pytest.raises(EnumerationCapExceeded):
        MatrixRing(field_from_order(9), 2)


@pytest.mark.parametrize("q,n", [(2, 2), (3, 2), (4, 2), (5, 1)])
def test_matrix_ring_tables_agree_with_matfq(q, n):
    f = field_from_order(q)
    ring = MatrixRing(f, n)
    rng = np.random.default_rng(q)
    for i, j in rng.integers(0, ring.order, size=(50, 2)):
        a, b = ring.matrix(int(i)), ring.matrix(int(j))
        assert ring.index_of(a @ b) == ring.mul[i, j]
        assert ring.index_of(a + b) == ring.add[i, j]
        assert ring.index_of(a - b) == ring.sub[i, j]
        assert ring.rank[i] == mat_rank(a)
    assert ring.mul[ring.identity, 5 % ring.order] == 5 % ring.order


# ---------------------------------------------------------------------------
# properties


@settings(max_examples=60, deadline=None)
@given(
    q=st.sampled_from([2, 3, 4, 5, 7, 8, 9]),
    rows=st.integers(1, 4),
    cols=st.integers(1, 4),
    data=st.data(),
)
def test_index_round_trip(q, rows, cols, data):
    f = field_from_order(q)
    idx = data.draw(st.integers(0, q ** (rows * cols) - 1))
    m = mat_unindex(idx, rows, cols, f)
    assert mat_index(m) == idx
    arr = unindex_array(np.array([idx]), rows, cols, q)
    assert index_array(arr, q)[0] == idx


@settings(max_examples=60, deadline=None)
@given(q=st.sampled_from([2, 3, 4, 5, 9]), data=st.data())
def test_rank_is_submultiplicative(q, data):
    f = field_from_order(q)
    n, k, t = (data.draw(st.integers(1, 3)) for _ in range(3))
    a = mat_unindex(data.draw(st.integers(0, q ** (n * k) - 1)), n, k, f)
    b = mat_unindex(data.draw(st.integers(0, q ** (k * t) - 1)), k, t, f)
    r = mat_rank(a @ b)
    assert r <= min(mat_rank(a), mat_rank(b))
    assert mat_rank(a) == mat_rank(a.T)


@settings(max_examples=40, deadline=None)
@given(q=st.sampled_from([3, 4, 5]), data=st.data())
def test_matmul_associative_and_distributive(q, data):
    f = field_from_order(q)
    draw = lambda: mat_unindex(data.draw(st.integers(0, q**4 - 1)), 2, 2, f)  # noqa: E731
    a, b, c = draw(), draw(), draw()
    assert (a @ b) @ c == a @ (b @ c)
    assert a @ (b + c) == a @ b + a @ c
