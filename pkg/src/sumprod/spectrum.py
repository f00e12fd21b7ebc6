"""Second eigenvalue of the sum-product digraph and the expander mixing bound.

Only the symmetric operator ``A A^T`` is ever diagonalised.  Its entry
``(u, v)`` counts common out-neighbours and it fixes the all-ones vector with
eigenvalue ``degree**2``.  ``lambda_est`` is the square root of its largest
eigenvalue on the complement of that vector, i.e. the second singular value
of ``A``.  That is the quantity the mixing bound needs, whether or not ``A``
commutes with its transpose; when it does, it equals the second largest
eigenvalue modulus of ``A``.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from fractions import Fraction
from functools import partial

import numpy as np

from .digraph import SumProductDigraph
from .errors import BudgetExceeded, NoConvergence, SpectralCapExceeded
from .parallel import run_chunks, split_range

SPECTRAL_CAP = 10**6
DENSE_CAP = 10**4
DEFAULT_TOL = 1e-9
DEFAULT_MAX_ITER = 10_000
DEFAULT_BUDGET = 10**9


@dataclass
class SpectrumReport:
    q: int
    n: int
    d: int
    n_vertices: int
    degree: int
    method: str
    lambda_est: float
    lambda_sq_est: float
    iterations: int
    residual: float
    converged: bool
    paper_exponent: float
    paper_bound_value: float
    empirical_constant: float
    measured_exponent: float | None
    exponent_gap: float | None
    top_eigenvalue_simple: bool

    def to_dict(self) -> dict:
        return asdict(self)


def paper_exponent(n: int, d: int) -> float:
    return d * n * n - (d - 1) * n / 2 - 0.5


def _make_report(graph: SumProductDigraph, method: str, lam_sq: float, iterations: int,
                 residual: float, converged: bool) -> SpectrumReport:
    p = graph.params
    lam_sq = max(lam_sq, 0.0)
    lam = math.sqrt(lam_sq)
    expo = paper_exponent(p.n, p.d)
    bound = float(p.q) ** expo
    measured = math.log(lam) / math.log(p.q) if lam > 0 else None
    return SpectrumReport(
        q=p.q,
        n=p.n,
        d=p.d,
        n_vertices=p.n_vertices,
        degree=p.degree,
        method=method,
        lambda_est=lam,
        lambda_sq_est=lam_sq,
        iterations=iterations,
        residual=residual,
        converged=converged,
        paper_exponent=expo,
        paper_bound_value=bound,
        empirical_constant=lam / bound,
        measured_exponent=measured,
        exponent_gap=None if measured is None else expo - measured,
        top_eigenvalue_simple=bool(lam_sq < p.degree**2 * (1 - 1e-9)),
    )


# ---------------------------------------------------------------------------
# implicit operator


def _gather_rows(graph: SumProductDigraph, x: np.ndarray, direction: str, bounds: tuple[int, int]) -> np.ndarray:
    lo, hi = bounds
    table = graph.out_neighbor_table if direction == "out" else graph.in_neighbor_table
    out = np.empty((hi - lo,) + x.shape[1:], dtype=np.float64)
    step = graph._row_chunk()
    for a in range(lo, hi, step):
        b = min(a + step, hi)
        nbrs = table(np.arange(a, b))
        out[a - lo : b - lo] = x[nbrs].sum(axis=1)
    return out


class AAtOperator:
    """``x -> A A^T x`` without storing ``A``.

    ``A^T x`` sums ``x`` over in-neighbours, then ``A y`` sums ``y`` over
    out-neighbours. Each pass owns disjoint output rows, so splitting the
    vertex range across workers merges by concatenation.
    """

    def __init__(self, graph: SumProductDigraph, workers: int = 1):
        self.graph = graph
        self.workers = workers
        self.size = graph.n_vertices

    def _pass(self, x: np.ndarray, direction: str) -> np.ndarray:
        parts = split_range(self.size, self.workers)
        pieces = run_chunks(partial(_gather_rows, self.graph, x, direction), parts, self.workers)
        return np.concatenate(pieces)

    def transpose_apply(self, x: np.ndarray) -> np.ndarray:
        return self._pass(np.asarray(x, dtype=np.float64), "in")

    def adjacency_apply(self, y: np.ndarray) -> np.ndarray:
        return self._pass(np.asarray(y, dtype=np.float64), "out")

    def apply(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.shape[0] != self.size:
            raise ValueError(f"vector length {x.shape[0]} != {self.size}")
        return self.adjacency_apply(self.transpose_apply(x))

    __call__ = apply


def operator_AAt_apply(x: np.ndarray, graph: SumProductDigraph, workers: int = 1) -> np.ndarray:
    return AAtOperator(graph, workers).apply(x)


def second_singular_direction(
    graph: SumProductDigraph,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
    seed: int = 0,
    cap: int = SPECTRAL_CAP,
    workers: int = 1,
) -> SpectrumReport:
    """Power iteration for the top eigenvalue of ``A A^T`` on the complement
    of the all-ones vector.

    The iterate is re-projected onto that complement after every product.
    Stops when both the relative change of the Rayleigh quotient and the
    residual ``||Op v - lam v|| / lam`` are at most ``tol``.
    """
    N = graph.n_vertices
    if N > cap:
        raise SpectralCapExceeded(f"{N} vertices exceed the spectral cap {cap}")
    op = AAtOperator(graph, workers)
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(N)
    v -= v.mean()
    v /= np.linalg.norm(v)

    lam_prev = None
    best = (math.inf, 0.0)  # (residual, lam)
    for it in range(1, max_iter + 1):
        w = op(v)
        w -= w.mean()
        lam = float(v @ w)
        w_norm = float(np.linalg.norm(w))
        if lam <= 0.0 or w_norm == 0.0:
            # the complement is annihilated: the operator's second eigenvalue is 0
            return _make_report(graph, "power", 0.0, it, w_norm, True)
        residual = float(np.linalg.norm(w - lam * v)) / lam
        change = math.inf if lam_prev is None else abs(lam - lam_prev) / lam
        if residual < best[0]:
            best = (residual, lam)
        if residual <= tol and change <= tol:
            return _make_report(graph, "power", lam, it, residual, True)
        lam_prev = lam
        v = w / w_norm
    report = _make_report(graph, "power", best[1], max_iter, best[0], False)
    raise NoConvergence(f"power iteration did not converge in {max_iter} steps", report)


# ---------------------------------------------------------------------------
# dense oracles


def dense_adjacency(graph: SumProductDigraph, cap: int = DENSE_CAP) -> np.ndarray:
    """Adjacency matrix built from the edge equation (small graphs only)."""
    N = graph.n_vertices
    if N > cap:
        raise SpectralCapExceeded(f"{N} vertices exceed the dense cap {cap}")
    a = np.zeros((N, N), dtype=np.uint8)
    verts = np.arange(N)
    a[verts[:, None], graph.out_neighbor_table(verts)] = 1
    return a


def dense_spectrum(graph: SumProductDigraph, cap: int = DENSE_CAP) -> SpectrumReport:
    """Exact symmetric eigensolve of ``A A^T - (degree**2 / N) J``."""
    a = dense_adjacency(graph, cap).astype(np.float64)
    N = graph.n_vertices
    aat = a @ a.T - graph.degree**2 / N
    top = float(np.linalg.eigvalsh(aat)[-1])
    return _make_report(graph, "dense", top, 0, 0.0, True)


def adjacency_eigenvalues(graph: SumProductDigraph, cap: int = DENSE_CAP) -> np.ndarray:
    """All (complex) eigenvalues of ``A``."""
    return np.linalg.eigvals(dense_adjacency(graph, cap).astype(np.float64))


def common_out_oracle_matvec(graph: SumProductDigraph, x: np.ndarray, rows: int = 512) -> np.ndarray:
    """``A A^T x`` with ``A A^T[u, v]`` taken from the pair classification of ``u - v``.

    The matrix is formed a block of rows at a time and never kept whole.
    """
    x = np.asarray(x, dtype=np.float64)
    N = graph.n_vertices
    predicted = graph.predicted_common_table()
    cols = np.arange(N)
    out = np.empty_like(x)
    for lo in range(0, N, rows):
        hi = min(lo + rows, N)
        block = predicted[graph.difference(np.arange(lo, hi)[:, None], cols[None, :])]
        out[lo:hi] = block.astype(np.float64) @ x
    return out


# ---------------------------------------------------------------------------
# expander mixing lemma


@dataclass
class MixingResult:
    size_b: int
    size_c: int
    e_bc: int
    main_term: float
    error: float
    error_bound: float
    holds: bool

    def to_dict(self) -> dict:
        return asdict(self)


def count_edges_between(graph: SumProductDigraph, b, c, budget: int = DEFAULT_BUDGET) -> int:
    """Exact ``e(B, C)``: stream out-neighbours of ``B`` and test membership in ``C``."""
    b = np.unique(np.asarray(b, dtype=np.int64))
    c = np.unique(np.asarray(c, dtype=np.int64))
    if len(b) * graph.degree > budget:
        raise BudgetExceeded(f"|B| * degree = {len(b) * graph.degree} exceeds budget {budget}")
    member = np.zeros(graph.n_vertices, dtype=bool)
    member[c] = True
    total = 0
    step = graph._row_chunk()
    for lo in range(0, len(b), step):
        total += int(member[graph.out_neighbor_table(b[lo : lo + step])].sum())
    return total


def mixing_check(b, c, lam: float, graph: SumProductDigraph, budget: int = DEFAULT_BUDGET) -> MixingResult:
    """Test ``|e(B,C) - degree |B||C| / N| <= lam sqrt(|B||C|)``."""
    b = np.unique(np.asarray(b, dtype=np.int64))
    c = np.unique(np.asarray(c, dtype=np.int64))
    if len(b) == 0 or len(c) == 0:
        raise ValueError("B and C must be nonempty")
    e_bc = count_edges_between(graph, b, c, budget)
    main = Fraction(graph.degree * len(b) * len(c), graph.n_vertices)
    error = abs(e_bc - main)
    bound = lam * math.sqrt(len(b) * len(c))
    return MixingResult(
        size_b=len(b),
        size_c=len(c),
        e_bc=e_bc,
        main_term=float(main),
        error=float(error),
        error_bound=bound,
        holds=bool(float(error) <= bound),
    )
