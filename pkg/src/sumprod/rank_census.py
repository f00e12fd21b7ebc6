"""Counting matrices over F_q by rank, and solvable systems ``M Z = C``."""

from __future__ import annotations

from dataclasses import asdict, dataclass
from math import comb, prod

import numpy as np

from .errors import BudgetExceeded, InvalidRank
from .fq_linalg import (
    DEFAULT_ENUMERATION_CAP,
    FieldSpec,
    MatFq,
    batch_rank,
    batched_matmul,
    matrix_blocks,
    rref,
    unindex_array,
)

DEFAULT_PAIR_BUDGET = 10**8


@dataclass
class CensusRecord:
    n: int
    t: int
    q: int
    k: int
    exact_count: int
    paper_bound: int

    @property
    def ratio(self) -> float:
        return self.exact_count / self.paper_bound

    def to_dict(self) -> dict:
        return {**asdict(self), "ratio": self.ratio}


@dataclass
class SolvablePairRecord:
    """``exact_count`` is the number of pairs ``(M, C)``, ``M`` n x t of rank m,
    ``C`` n x n of rank k, with ``M Z = C`` solvable."""

    n: int
    t: int
    q: int
    m: int
    k: int
    exact_count: int
    paper_bound: int

    @property
    def ratio(self) -> float:
        return self.exact_count / self.paper_bound

    def to_dict(self) -> dict:
        return {**asdict(self), "ratio": self.ratio}


def gaussian_binomial(t: int, k: int, q: int) -> int:
    """Number of k-dimensional subspaces of F_q^t."""
    if not 0 <= k <= t:
        return 0
    num = prod(q ** (t - i) - 1 for i in range(k))
    den = prod(q ** (i + 1) - 1 for i in range(k))
    return num // den


def _frames(n: int, k: int, q: int) -> int:
    # ordered k-tuples of independent vectors in F_q^n
    return prod(q**n - q**i for i in range(k))


def _check_rank(n: int, t: int, k: int) -> None:
    if not 0 <= k <= min(n, t):
        raise InvalidRank(f"rank {k} impossible for {n}x{t} matrices")


def count_rank_exact(n: int, t: int, k: int, field: FieldSpec) -> int:
    """Exact number of n x t rank-k matrices: choose the row space, then an
    n x k coordinate matrix of full column rank."""
    _check_rank(n, t, k)
    q = field.q
    return gaussian_binomial(t, k, q) * _frames(n, k, q)


def count_rank_bound(n: int, t: int, k: int, field: FieldSpec) -> int:
    """The overcount ``binom(t, k) * prod_{i<k}(q^n - q^i) * q^((t-k)k)``."""
    _check_rank(n, t, k)
    q = field.q
    return comb(t, k) * _frames(n, k, q) * q ** ((t - k) * k)


def solvable_pair_bound(n: int, t: int, m: int, k: int, q: int) -> int:
    return q ** (n * m + m * (t - m) + m * k + k * (n - k))


def census_bruteforce(
    n: int, t: int, field: FieldSpec, cap: int = DEFAULT_ENUMERATION_CAP
) -> list[CensusRecord]:
    """Rank histogram of all n x t matrices by exhaustive enumeration."""
    hist = np.zeros(min(n, t) + 1, dtype=np.int64)
    for _, block in matrix_blocks(n, t, field, cap=cap):
        hist += np.bincount(batch_rank(block, field), minlength=len(hist))
    return [
        CensusRecord(n, t, field.q, k, int(hist[k]), count_rank_bound(n, t, k, field))
        for k in range(len(hist))
    ]


def census_exact(n: int, t: int, field: FieldSpec) -> list[CensusRecord]:
    return [
        CensusRecord(n, t, field.q, k, count_rank_exact(n, t, k, field), count_rank_bound(n, t, k, field))
        for k in range(min(n, t) + 1)
    ]


def _check_pair_budget(n: int, t: int, q: int, budget: int) -> None:
    work = q ** (n * t) * q ** (n * n)
    if work > budget:
        raise BudgetExceeded(f"{work} (M, C) pairs exceed budget {budget}")


def _pair_records(n: int, t: int, q: int, table: np.ndarray) -> list[SolvablePairRecord]:
    return [
        SolvablePairRecord(n, t, q, m, k, int(table[m, k]), solvable_pair_bound(n, t, m, k, q))
        for m in range(table.shape[0])
        for k in range(table.shape[1])
    ]


def solvable_pairs_naive(
    n: int, t: int, field: FieldSpec, budget: int = DEFAULT_PAIR_BUDGET
) -> list[SolvablePairRecord]:
    """Every (M, C) pair, solvability by ``rank(M) == rank(M | C)``."""
    q = field.q
    _check_pair_budget(n, t, q, budget)
    all_c = unindex_array(np.arange(q ** (n * n)), n, n, q)
    c_rank = batch_rank(all_c, field)
    table = np.zeros((min(n, t) + 1, n + 1), dtype=np.int64)
    block = max(1, (1 << 20) // len(all_c))
    for _, ms in matrix_blocks(n, t, field, block=block):
        m_rank = batch_rank(ms, field)
        aug = np.concatenate(
            [np.broadcast_to(ms[:, None], (len(ms), len(all_c), n, t)),
             np.broadcast_to(all_c[None], (len(ms), len(all_c), n, n))],
            axis=3,
        ).reshape(-1, n, t + n)
        aug_rank = batch_rank(aug, field).reshape(len(ms), len(all_c))
        ok = aug_rank == m_rank[:, None]
        mm = np.broadcast_to(m_rank[:, None], ok.shape)[ok]
        kk = np.broadcast_to(c_rank[None, :], ok.shape)[ok]
        np.add.at(table, (mm, kk), 1)
    return _pair_records(n, t, q, table)


def _column_space_key(m: MatFq) -> tuple[int, ...]:
    reduced, pivots = rref(m.T)
    return reduced.entries[: len(pivots) * m.n_rows]


def solvable_pairs_bruteforce(
    n: int, t: int, field: FieldSpec, budget: int = DEFAULT_PAIR_BUDGET
) -> list[SolvablePairRecord]:
    """Exact counts of solvable ``(M, C)`` pairs by rank of M and of C.

    ``M Z = C`` is solvable iff every column of C lies in the column space of
    M, so per column space (basis ``W``, dimension m) the admissible C are
    ``W K`` for the ``q**(m n)`` coefficient matrices K.  Column spaces are
    keyed by reduced echelon form and each is counted once.
    """
    q = field.q
    _check_pair_budget(n, t, q, budget)
    table = np.zeros((min(n, t) + 1, n + 1), dtype=np.int64)
    per_space: dict[tuple[int, ...], np.ndarray] = {}
    for start, ms in matrix_blocks(n, t, field):
        ranks = batch_rank(ms, field)
        for arr, m in zip(ms, ranks):
            key = _column_space_key(MatFq.from_array(arr, field))
            hist = per_space.get(key)
            if hist is None:
                hist = np.zeros(n + 1, dtype=np.int64)
                if m == 0:
                    hist[0] = 1
                else:
                    basis = np.array(key, dtype=np.int64).reshape(m, n).T  # n x m
                    coeffs = unindex_array(np.arange(q ** (int(m) * n)), int(m), n, q)
                    cs = batched_matmul(basis[None], coeffs, field)
                    hist += np.bincount(batch_rank(cs, field), minlength=n + 1)
                per_space[key] = hist
            table[m] += hist
    return _pair_records(n, t, q, table)


def measured_constant(records) -> float:
    """Smallest ``c`` with ``exact <= c * bound`` across ``records``."""
    return max((r.ratio for r in records), default=0.0)
