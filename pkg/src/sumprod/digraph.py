"""The sum-product digraph on M_n(F_q)^(d+1).

There is an edge ``(A_1..A_d, E) -> (B_1..B_d, F)`` iff
``A_1 B_1 + ... + A_d B_d = E + F``.  Adjacency is never stored: neighbour
lists are generated from the defining equation in bounded chunks.

A vertex index packs the matrix indices ``(A_1, ..., A_d, E)`` as base-``Q``
digits (``Q = q**(n*n)``), most significant first.
"""

from __future__ import annotations

import enum
from collections import Counter
from dataclasses import asdict, dataclass, field as dc_field
from functools import cached_property, partial

import numpy as np

from .errors import AuditFailure, BudgetExceeded, ConfigError, DimensionMismatch
from .fq_linalg import FieldSpec, MatFq, MatrixRing, batch_rank, mat_hstack, mat_rank
from .parallel import run_chunks, split_range

CHUNK_ELEMS = 1 << 22
EXHAUSTIVE_PAIR_LIMIT = 10**7
DEFAULT_BUDGET = 10**9


@dataclass(frozen=True)
class GraphParams:
    field: FieldSpec
    n: int
    d: int

    def __post_init__(self):
        if self.n < 1 or self.d < 1:
            raise ConfigError(f"need n >= 1 and d >= 1, got n={self.n}, d={self.d}")

    @property
    def q(self) -> int:
        return self.field.q

    @property
    def ring_order(self) -> int:
        return self.q ** (self.n * self.n)

    @property
    def n_vertices(self) -> int:
        return self.q ** ((self.d + 1) * self.n * self.n)

    @property
    def degree(self) -> int:
        return self.q ** (self.d * self.n * self.n)

    def hypothesis_notes(self) -> list[str]:
        """Reasons this instance falls outside the stated theorem hypotheses."""
        notes = []
        if self.q % 2 == 0:
            notes.append("even q: extrapolation beyond the odd-q hypothesis")
        if self.n < 2:
            notes.append("n = 1: below the n >= 2 hypothesis")
        return notes


@dataclass(frozen=True)
class Vertex:
    a: tuple[MatFq, ...]
    e: MatFq

    def index(self) -> int:
        Q = self.e.field.q ** (self.e.n_rows * self.e.n_cols)
        idx = 0
        for m in (*self.a, self.e):
            idx = idx * Q + m.index()
        return idx


class CaseLabel(str, enum.Enum):
    FULL_RANK = "FullRank"
    NO_SOLUTION_K_GT_M = "NoSolution_kGTm"
    SAME_PAIR = "SamePair"
    NO_SOLUTION_AUGMENTED = "NoSolution_Augmented"
    SOLVABLE = "Solvable"


_LABELS = list(CaseLabel)


@dataclass(frozen=True)
class PairClass:
    """Ranks of ``M = (A_1-A'_1 ... A_d-A'_d)``, ``Y = E-E'`` and ``(M | Y)``.

    ``predicted_common`` is ``|N+(u, v)|``, from solving ``M X = Y``.
    ``predicted_common_in`` is ``|N-(u, v)|``, from solving ``X M' = Y`` where
    ``M'`` stacks the differences vertically; the two differ once n >= 2.
    """

    m: int
    k: int
    m_bar: int
    case_label: CaseLabel
    predicted_common: int
    predicted_common_in: int | None = None


def predict_common(m: int, k: int, m_bar: int, n: int, d: int, q: int) -> tuple[CaseLabel, int]:
    """Case label and the number of common out-neighbours it implies.

    Whenever ``MX = Y`` is solvable the count is ``q**(n*(d*n - m))``; with
    ``m = n`` that is 1 only for ``d = 1``.
    """
    if m == n:
        return CaseLabel.FULL_RANK, q ** (n * (d * n - m))
    if k > m:
        return CaseLabel.NO_SOLUTION_K_GT_M, 0
    if m == 0 and k == 0:
        return CaseLabel.SAME_PAIR, q ** (d * n * n)
    if m_bar > m:
        return CaseLabel.NO_SOLUTION_AUGMENTED, 0
    return CaseLabel.SOLVABLE, q ** (n * (d * n - m))


@dataclass
class NeighborhoodReport:
    vertex_sample_size: int
    exhaustive_vertices: bool
    out_degree_min: int
    out_degree_max: int
    in_degree_min: int
    in_degree_max: int
    total_out_degree: int
    total_in_degree: int
    normality_pairs_checked: int
    diagonal_pairs_checked: int
    normality_violations: int
    prediction_violations: int
    in_prediction_violations: int
    case_tallies: dict[str, int] = dc_field(default_factory=dict)
    predicted_values_off_diagonal: list[int] = dc_field(default_factory=list)
    first_counterexample: dict | None = None

    def to_dict(self) -> dict:
        return asdict(self)


class SumProductDigraph:
    """Implicit sum-product digraph for ``params``.

    Methods taking vertices accept either a ``Vertex`` or an integer index;
    array methods work on integer indices only.
    """

    def __init__(self, params: GraphParams, ring: MatrixRing | None = None):
        self.params = params
        self.ring = ring if ring is not None else MatrixRing(params.field, params.n)
        self.Q = self.ring.order
        self.d = params.d
        self.n = params.n
        self.n_vertices = params.n_vertices
        self.degree = params.degree

    # -- encoding -----------------------------------------------------------

    def split(self, idx) -> np.ndarray:
        """Matrix indices ``(..., d+1)`` of the components ``A_1..A_d, E``."""
        rest = np.asarray(idx, dtype=np.int64)
        out = np.empty(rest.shape + (self.d + 1,), dtype=np.int64)
        for j in range(self.d, -1, -1):
            rest, out[..., j] = np.divmod(rest, self.Q)
        return out

    def join(self, comps: np.ndarray) -> np.ndarray:
        comps = np.asarray(comps, dtype=np.int64)
        idx = np.zeros(comps.shape[:-1], dtype=np.int64)
        for j in range(self.d + 1):
            idx = idx * self.Q + comps[..., j]
        return idx

    def vertex(self, idx: int) -> Vertex:
        if not 0 <= idx < self.n_vertices:
            raise ConfigError(f"vertex index {idx} outside [0, {self.n_vertices})")
        comps = self.split(idx)
        mats = [self.ring.matrix(int(c)) for c in comps]
        return Vertex(tuple(mats[:-1]), mats[-1])

    def index_of(self, v) -> int:
        if isinstance(v, Vertex):
            if len(v.a) != self.d:
                raise DimensionMismatch(f"vertex has {len(v.a)} A-blocks, graph has d={self.d}")
            for m in (*v.a, v.e):
                self.ring.index_of(m)
            return v.index()
        idx = int(v)
        if not 0 <= idx < self.n_vertices:
            raise ConfigError(f"vertex index {idx} outside [0, {self.n_vertices})")
        return idx

    def difference(self, u, v) -> np.ndarray:
        """Index of the componentwise difference ``u - v``."""
        cu, cv = self.split(u), self.split(v)
        return self.join(self.ring.sub[cu, cv])

    @cached_property
    def _tuples(self) -> np.ndarray:
        """All d-tuples of matrix indices, shape ``(Q**d, d)``, in index order."""
        rest = np.arange(self.degree, dtype=np.int64)
        out = np.empty((self.degree, self.d), dtype=np.int64)
        for j in range(self.d - 1, -1, -1):
            rest, out[:, j] = np.divmod(rest, self.Q)
        return out

    def _products(self, left: np.ndarray, right: np.ndarray) -> np.ndarray:
        """``sum_i left_i right_i`` as matrix indices; inputs broadcast over ``(..., d)``."""
        ring = self.ring
        acc = ring.mul[left[..., 0], right[..., 0]]
        for i in range(1, self.d):
            acc = ring.add[acc, ring.mul[left[..., i], right[..., i]]]
        return acc

    def _row_chunk(self) -> int:
        return max(1, CHUNK_ELEMS // self.degree)

    # -- neighbourhoods -----------------------------------------------------

    def out_neighbor_table(self, vs) -> np.ndarray:
        """Out-neighbour indices, shape ``(len(vs), degree)``; column order is
        the index order of the B-tuple."""
        vs = np.atleast_1d(np.asarray(vs, dtype=np.int64))
        comps = self.split(vs)
        heads = np.arange(self.degree, dtype=np.int64) * self.Q
        tuples = self._tuples
        out = np.empty((len(vs), self.degree), dtype=np.int64)
        step = self._row_chunk()
        for lo in range(0, len(vs), step):
            c = comps[lo : lo + step]
            s = self._products(c[:, None, : self.d], tuples[None, :, :])
            f = self.ring.sub[s, c[:, None, self.d]]
            out[lo : lo + step] = heads[None, :] + f
        return out

    def in_neighbor_table(self, ws) -> np.ndarray:
        """In-neighbour indices, shape ``(len(ws), degree)``, by A-tuple index."""
        ws = np.atleast_1d(np.asarray(ws, dtype=np.int64))
        comps = self.split(ws)
        heads = np.arange(self.degree, dtype=np.int64) * self.Q
        tuples = self._tuples
        out = np.empty((len(ws), self.degree), dtype=np.int64)
        step = self._row_chunk()
        for lo in range(0, len(ws), step):
            c = comps[lo : lo + step]
            s = self._products(tuples[None, :, :], c[:, None, : self.d])
            e = self.ring.sub[s, c[:, None, self.d]]
            out[lo : lo + step] = heads[None, :] + e
        return out

    def out_neighbors(self, v) -> np.ndarray:
        return self.out_neighbor_table([self.index_of(v)])[0]

    def in_neighbors(self, w) -> np.ndarray:
        return self.in_neighbor_table([self.index_of(w)])[0]

    def out_neighbor_vertices(self, v):
        for w in self.out_neighbors(v):
            yield self.vertex(int(w))

    def in_neighbor_vertices(self, w):
        for u in self.in_neighbors(w):
            yield self.vertex(int(u))

    def has_edge_array(self, u, w) -> np.ndarray:
        cu, cw = self.split(u), self.split(w)
        lhs = self._products(cu[..., : self.d], cw[..., : self.d])
        return lhs == self.ring.add[cu[..., self.d], cw[..., self.d]]

    def has_edge(self, u, w) -> bool:
        return bool(self.has_edge_array(self.index_of(u), self.index_of(w)))

    # -- pair classification ------------------------------------------------

    def classify_differences(self, deltas) -> dict[str, np.ndarray]:
        """Vectorised classification of difference vertices ``u - v``.

        Returns arrays ``m``, ``k``, ``m_bar``, ``label`` (position in
        ``CaseLabel``), ``predicted`` and ``predicted_in``.
        """
        deltas = np.atleast_1d(np.asarray(deltas, dtype=np.int64))
        n, d, q = self.n, self.d, self.params.q
        comps = self.split(deltas)
        mats = self.ring.mats
        m_blocks = np.concatenate([mats[comps[:, i]] for i in range(d)], axis=2)
        y = mats[comps[:, d]]
        if d == 1:
            m = self.ring.rank[comps[:, 0]]
        else:
            m = batch_rank(m_blocks, self.params.field)
        k = self.ring.rank[comps[:, d]]
        m_bar = batch_rank(np.concatenate([m_blocks, y], axis=2), self.params.field)

        m_stack = np.concatenate([mats[comps[:, i]] for i in range(d)], axis=1)
        m_in = m if d == 1 else batch_rank(m_stack, self.params.field)
        m_bar_in = batch_rank(np.concatenate([m_stack, y], axis=1), self.params.field)
        predicted_in = np.where(m_bar_in == m_in, q ** (n * (d * n - m_in)), 0).astype(np.int64)

        solvable_count = q ** (n * (d * n - m))
        label = np.full(len(deltas), _LABELS.index(CaseLabel.SOLVABLE))
        predicted = solvable_count.astype(np.int64)
        aug = m_bar > m
        label[aug] = _LABELS.index(CaseLabel.NO_SOLUTION_AUGMENTED)
        predicted[aug] = 0
        same = (m == 0) & (k == 0)
        label[same] = _LABELS.index(CaseLabel.SAME_PAIR)
        predicted[same] = self.degree
        kgt = k > m
        label[kgt] = _LABELS.index(CaseLabel.NO_SOLUTION_K_GT_M)
        predicted[kgt] = 0
        full = m == n
        label[full] = _LABELS.index(CaseLabel.FULL_RANK)
        predicted[full] = solvable_count[full]
        return {
            "m": m,
            "k": k,
            "m_bar": m_bar,
            "label": label,
            "predicted": predicted,
            "predicted_in": predicted_in,
        }

    def classify_pair(self, u, v) -> PairClass:
        """Scalar classification, computed from the matrices directly."""
        pu, pv = self.vertex(self.index_of(u)), self.vertex(self.index_of(v))
        m_mat = mat_hstack([a - b for a, b in zip(pu.a, pv.a)])
        y = pu.e - pv.e
        m, k = mat_rank(m_mat), mat_rank(y)
        m_bar = mat_rank(mat_hstack([m_mat, y]))
        label, pred = predict_common(m, k, m_bar, self.n, self.d, self.params.q)
        stack = MatFq.from_array(np.vstack([(a - b).to_array() for a, b in zip(pu.a, pv.a)]), y.field)
        m_in = mat_rank(stack)
        m_bar_in = mat_rank(MatFq.from_array(np.vstack([stack.to_array(), y.to_array()]), y.field))
        q, n, d = self.params.q, self.n, self.d
        pred_in = q ** (n * (d * n - m_in)) if m_bar_in == m_in else 0
        return PairClass(m, k, m_bar, label, pred, pred_in)

    def predicted_common_table(self) -> np.ndarray:
        """Predicted ``|N+(u, v)|`` as a function of ``u - v``, for every difference."""
        out = np.empty(self.n_vertices, dtype=np.int64)
        step = 1 << 16
        for lo in range(0, self.n_vertices, step):
            hi = min(lo + step, self.n_vertices)
            out[lo:hi] = self.classify_differences(np.arange(lo, hi))["predicted"]
        return out

    # -- brute-force common neighbourhoods ----------------------------------

    def _check_budget(self, evaluations: int, budget: int) -> None:
        if evaluations > budget:
            raise BudgetExceeded(f"{evaluations} edge tests exceed budget {budget}")

    def common_out_counts(self, us, vs) -> np.ndarray:
        """``|N+(u, v)|`` for paired arrays: walk ``N+(u)`` and test edges from ``v``."""
        us = np.atleast_1d(np.asarray(us, dtype=np.int64))
        vs = np.atleast_1d(np.asarray(vs, dtype=np.int64))
        out = np.empty(len(us), dtype=np.int64)
        step = self._row_chunk()
        for lo in range(0, len(us), step):
            nbrs = self.out_neighbor_table(us[lo : lo + step])
            out[lo : lo + step] = self.has_edge_array(vs[lo : lo + step, None], nbrs).sum(axis=1)
        return out

    def common_in_counts(self, us, vs) -> np.ndarray:
        """``|N-(u, v)|``: walk ``N-(u)`` and test edges into ``v``."""
        us = np.atleast_1d(np.asarray(us, dtype=np.int64))
        vs = np.atleast_1d(np.asarray(vs, dtype=np.int64))
        out = np.empty(len(us), dtype=np.int64)
        step = self._row_chunk()
        for lo in range(0, len(us), step):
            nbrs = self.in_neighbor_table(us[lo : lo + step])
            out[lo : lo + step] = self.has_edge_array(nbrs, vs[lo : lo + step, None]).sum(axis=1)
        return out

    def common_out_bruteforce(self, u, v, budget: int = DEFAULT_BUDGET) -> int:
        self._check_budget(self.degree, budget)
        return int(self.common_out_counts([self.index_of(u)], [self.index_of(v)])[0])

    def common_in_bruteforce(self, u, v, budget: int = DEFAULT_BUDGET) -> int:
        self._check_budget(self.degree, budget)
        return int(self.common_in_counts([self.index_of(u)], [self.index_of(v)])[0])


def has_edge_matrices(u: Vertex, w: Vertex) -> bool:
    """Evaluate the edge equation with plain matrix arithmetic (no ring tables)."""
    lhs = u.a[0] @ w.a[0]
    for a, b in zip(u.a[1:], w.a[1:]):
        lhs = lhs + a @ b
    return lhs == u.e + w.e


# ---------------------------------------------------------------------------
# audits


def sample_indices(rng: np.random.Generator, total: int, size: int) -> np.ndarray:
    """``size`` distinct indices from ``[0, total)``, sorted."""
    if size >= total:
        return np.arange(total, dtype=np.int64)
    if total <= 1 << 24:
        return np.sort(rng.choice(total, size=size, replace=False)).astype(np.int64)
    picked = np.unique(rng.integers(0, total, size=size))
    while len(picked) < size:
        extra = rng.integers(0, total, size=size - len(picked))
        picked = np.unique(np.concatenate([picked, extra]))
    return picked.astype(np.int64)


def _distinct_per_row(table: np.ndarray) -> np.ndarray:
    s = np.sort(table, axis=1)
    return 1 + (np.diff(s, axis=1) != 0).sum(axis=1)


def _degree_chunk(graph: SumProductDigraph, vs: np.ndarray) -> tuple[np.ndarray, np.ndarray, int]:
    outs = np.empty(len(vs), dtype=np.int64)
    ins = np.empty(len(vs), dtype=np.int64)
    bad_edges = 0
    step = graph._row_chunk()
    for lo in range(0, len(vs), step):
        chunk = vs[lo : lo + step]
        ot = graph.out_neighbor_table(chunk)
        it = graph.in_neighbor_table(chunk)
        outs[lo : lo + step] = _distinct_per_row(ot)
        ins[lo : lo + step] = _distinct_per_row(it)
        bad_edges += int((~graph.has_edge_array(chunk[:, None], ot)).sum())
        bad_edges += int((~graph.has_edge_array(it, chunk[:, None])).sum())
    return outs, ins, bad_edges


def audit_degrees(graph: SumProductDigraph, vertices, workers: int = 1) -> tuple[np.ndarray, np.ndarray, int]:
    """Distinct out- and in-neighbour counts per vertex, plus the number of
    generated neighbours that fail the edge equation (0 on a correct build)."""
    verts = np.atleast_1d(np.asarray(vertices, dtype=np.int64))
    parts = split_range(len(verts), max(1, workers))
    res = run_chunks(partial(_degree_chunk, graph), [verts[lo:hi] for lo, hi in parts], workers)
    outs = np.concatenate([r[0] for r in res])
    ins = np.concatenate([r[1] for r in res])
    return outs, ins, sum(r[2] for r in res)


def _pair_chunk(graph: SumProductDigraph, pairs: np.ndarray) -> dict[str, np.ndarray]:
    us, vs = pairs[:, 0], pairs[:, 1]
    cls = graph.classify_differences(graph.difference(us, vs))
    return {
        "out": graph.common_out_counts(us, vs),
        "in": graph.common_in_counts(us, vs),
        "predicted": cls["predicted"],
        "predicted_in": cls["predicted_in"],
        "label": cls["label"],
    }


def audit_graph(
    graph: SumProductDigraph,
    vertex_sample_size: int,
    pair_sample_size: int,
    seed: int,
    exhaustive: bool = False,
    workers: int = 1,
    raise_on_failure: bool = True,
) -> NeighborhoodReport:
    """Check degree regularity, normality and both common-neighbour predictions.

    Any violation raises ``AuditFailure`` carrying the first counterexample
    (degree problems first, then prediction, in-prediction, normality) unless
    ``raise_on_failure`` is false, in which case it is only recorded.

    Vertices are audited exhaustively when ``exhaustive`` is set or the graph
    has no more than ``vertex_sample_size`` vertices. Pairs are exhaustive
    whenever ``n_vertices**2 <= 10**7``; otherwise
    ``pair_sample_size`` seeded random pairs ``u != v`` are drawn, plus the diagonal
    ``(v, v)`` for up to ``pair_sample_size`` audited vertices.
    """
    if vertex_sample_size < 1 or pair_sample_size < 1:
        raise ConfigError("sample sizes must be >= 1")
    rng = np.random.default_rng(seed)
    N = graph.n_vertices
    all_vertices = exhaustive or N <= vertex_sample_size
    verts = np.arange(N, dtype=np.int64) if all_vertices else sample_indices(rng, N, vertex_sample_size)

    outs, ins, bad_edges = audit_degrees(graph, verts, workers)

    if N * N <= EXHAUSTIVE_PAIR_LIMIT:
        uu, vv = np.meshgrid(np.arange(N), np.arange(N), indexing="ij")
        pairs = np.stack([uu.ravel(), vv.ravel()], axis=1)
        pairs = pairs[pairs[:, 0] != pairs[:, 1]]
    else:
        us = rng.integers(0, N, size=pair_sample_size, dtype=np.int64)
        vs = (us + rng.integers(1, N, size=pair_sample_size, dtype=np.int64)) % N
        pairs = np.stack([us, vs], axis=1)
    diag_src = verts if len(verts) <= pair_sample_size else sample_indices(rng, N, pair_sample_size)
    diag = np.stack([diag_src, diag_src], axis=1)
    all_pairs = np.concatenate([pairs, diag])
    is_diag = all_pairs[:, 0] == all_pairs[:, 1]

    step = max(1, -(-len(all_pairs) // max(1, workers)))
    chunks = [all_pairs[lo : lo + step] for lo in range(0, len(all_pairs), step)]
    res = run_chunks(partial(_pair_chunk, graph), chunks, workers)
    co = np.concatenate([r["out"] for r in res])
    ci = np.concatenate([r["in"] for r in res])
    pred = np.concatenate([r["predicted"] for r in res])
    pred_in = np.concatenate([r["predicted_in"] for r in res])
    label = np.concatenate([r["label"] for r in res])

    normal_bad = co != ci
    pred_bad = co != pred
    pred_in_bad = ci != pred_in
    tallies = Counter(_LABELS[i].value for i in label)

    first = None
    degree_bad = (outs != graph.degree) | (ins != graph.degree)
    if degree_bad.any() or bad_edges:
        i = int(np.argmax(degree_bad)) if degree_bad.any() else 0
        first = {
            "kind": "degree",
            "vertex": int(verts[i]),
            "out_degree": int(outs[i]),
            "in_degree": int(ins[i]),
            "non_edges_yielded": bad_edges,
        }
    elif pred_bad.any() or pred_in_bad.any() or normal_bad.any():
        kind, bad = next(
            (k, b) for k, b in (("prediction", pred_bad), ("in_prediction", pred_in_bad), ("normality", normal_bad))
            if b.any()
        )
        i = int(np.argmax(bad))
        first = {
            "kind": kind,
            "u": int(all_pairs[i, 0]),
            "v": int(all_pairs[i, 1]),
            "common_out": int(co[i]),
            "common_in": int(ci[i]),
            "predicted": int(pred[i]),
            "predicted_in": int(pred_in[i]),
            "case": _LABELS[label[i]].value,
        }

    report = NeighborhoodReport(
        vertex_sample_size=len(verts),
        exhaustive_vertices=bool(all_vertices),
        out_degree_min=int(outs.min()),
        out_degree_max=int(outs.max()),
        in_degree_min=int(ins.min()),
        in_degree_max=int(ins.max()),
        total_out_degree=int(outs.sum()),
        total_in_degree=int(ins.sum()),
        normality_pairs_checked=int((~is_diag).sum()),
        diagonal_pairs_checked=int(is_diag.sum()),
        normality_violations=int(normal_bad.sum()),
        prediction_violations=int(pred_bad.sum()),
        in_prediction_violations=int(pred_in_bad.sum()),
        case_tallies=dict(sorted(tallies.items())),
        predicted_values_off_diagonal=sorted(int(x) for x in np.unique(pred[~is_diag])),
        first_counterexample=first,
    )
    if first is not None and raise_on_failure:
        raise AuditFailure(f"audit failed: {first}", counterexample=first)
    return report

