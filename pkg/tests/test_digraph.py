import itertools

import numpy as np
import pytest

from sumprod.digraph import (
    CaseLabel,
    GraphParams,
    SumProductDigraph,
    Vertex,
    audit_degrees,
    audit_graph,
    has_edge_matrices,
    predict_common,
)
from sumprod.errors import AuditFailure, BudgetExceeded, ConfigError, DimensionMismatch
from sumprod.fq_linalg import MatFq, field_from_order, field_make, mat_unindex


def _graph(q=3, n=2, d=1):
    return SumProductDigraph(GraphParams(field_from_order(q), n, d))


@pytest.fixture(scope="module")
def ref():
    return _graph()


def _m(rows, q=3):
    return MatFq.from_rows(rows, field_from_order(q))


I2, Z2 = [[1, 0], [0, 1]], [[0, 0], [0, 0]]


def _vertex(*blocks, q=3):
    mats = [_m(b, q) for b in blocks]
    return Vertex(tuple(mats[:-1]), mats[-1])


def _all_vertices(q, n, d):
    f = field_from_order(q)
    mats = [mat_unindex(i, n, n, f) for i in range(q ** (n * n))]
    for combo in itertools.product(mats, repeat=d + 1):
        yield Vertex(tuple(combo[:-1]), combo[-1])


def test_params():
    p = GraphParams(field_make(3), 2, 1)
    assert (p.ring_order, p.n_vertices, p.degree) == (81, 6561, 81)
    assert GraphParams(field_make(3), 2, 2).degree == 6561
    assert GraphParams(field_make(3), 2, 1).hypothesis_notes() == []
    assert len(GraphParams(field_from_order(4), 1, 1).hypothesis_notes()) == 2
    with pytest.raises(ConfigError):
        GraphParams(field_make(3), 0, 1)


def test_vertex_encoding(ref):
    for idx in [0, 1, 80, 81, 5679, 6560]:
        v = ref.vertex(idx)
        assert ref.index_of(v) == idx == v.index()
    assert ref.index_of(_vertex([[1, 0], [0, 0]], Z2)) == 27 * 81
    with pytest.raises(ConfigError):
        ref.vertex(6561)
    with pytest.raises(DimensionMismatch):
        ref.index_of(_vertex(I2, I2, Z2))


def test_zero_vertex_neighbours(ref):
    outs = list(ref.out_neighbor_vertices(0))
    assert len(outs) == 81
    assert all(w.e == _m(Z2) for w in outs)
    assert sorted(w.a[0].index() for w in outs) == list(range(81))
    ins = list(ref.in_neighbor_vertices(0))
    assert len(ins) == 81 and all(x.e == _m(Z2) for x in ins)


@pytest.mark.parametrize("q,n,d,expected", [(3, 2, 1, 81), (3, 2, 2, 6561), (5, 2, 1, 625), (4, 2, 1, 256)])
def test_degree_formula(q, n, d, expected):
    g = _graph(q, n, d)
    rng = np.random.default_rng(0)
    for v in rng.integers(0, g.n_vertices, size=3):
        outs, ins = g.out_neighbors(int(v)), g.in_neighbors(int(v))
        assert len(np.unique(outs)) == len(np.unique(ins)) == expected
        assert g.has_edge_array(np.full(len(outs), v), outs).all()
        assert g.has_edge_array(ins, np.full(len(ins), v)).all()


def test_has_edge_examples(ref):
    zero = _vertex(Z2, Z2)
    assert ref.has_edge(zero, zero)
    assert ref.has_edge(_vertex(I2, Z2), _vertex(I2, I2))
    assert not ref.has_edge(_vertex(I2, Z2), _vertex(I2, Z2))
    assert has_edge_matrices(_vertex(I2, Z2), _vertex(I2, I2))


def test_out_neighbours_are_exactly_the_edge_set(ref):
    every = np.arange(ref.n_vertices)
    for u in [0, 1, 2000, 5679, 6560]:
        hits = np.flatnonzero(ref.has_edge_array(np.full(ref.n_vertices, u), every))
        assert np.array_equal(hits, np.sort(ref.out_neighbors(u)))
        into = np.flatnonzero(ref.has_edge_array(every, np.full(ref.n_vertices, u)))
        assert np.array_equal(into, np.sort(ref.in_neighbors(u)))


@pytest.mark.parametrize("q,n,d", [(3, 2, 1), (3, 2, 2), (4, 2, 1), (2, 2, 3)])
def test_table_edges_agree_with_matrix_arithmetic(q, n, d):
    g = _graph(q, n, d)
    rng = np.random.default_rng(q + d)
    us = rng.integers(0, g.n_vertices, size=40)
    # half random pairs, half true out-neighbours
    ws = np.concatenate([rng.integers(0, g.n_vertices, size=20),
                         [rng.choice(g.out_neighbors(int(u))) for u in us[20:]]])
    for u, w in zip(us, ws):
        assert g.has_edge(int(u), int(w)) == has_edge_matrices(g.vertex(int(u)), g.vertex(int(w)))


def test_classify_examples(ref):
    c = ref.classify_pair(_vertex(I2, Z2), _vertex(Z2, Z2))
    assert (c.m, c.case_label, c.predicted_common) == (2, CaseLabel.FULL_RANK, 1)
    c = ref.classify_pair(_vertex(Z2, [[1, 0], [0, 0]]), _vertex(Z2, Z2))
    assert (c.m, c.k, c.predicted_common) == (0, 1, 0)
    assert c.case_label == CaseLabel.NO_SOLUTION_K_GT_M
    c = ref.classify_pair(_vertex([[1, 2], [0, 0]], Z2), _vertex(Z2, Z2))
    assert (c.m, c.m_bar, c.case_label, c.predicted_common) == (1, 1, CaseLabel.SOLVABLE, 9)
    c = ref.classify_pair(_vertex([[1, 0], [0, 0]], [[0, 0], [0, 1]]), _vertex(Z2, Z2))
    assert (c.m, c.k, c.m_bar, c.case_label, c.predicted_common) == (1, 1, 2, CaseLabel.NO_SOLUTION_AUGMENTED, 0)
    v = ref.vertex(1234)
    c = ref.classify_pair(v, v)
    assert (c.case_label, c.predicted_common) == (CaseLabel.SAME_PAIR, 81)


def test_classify_examples_by_bruteforce(ref):
    assert ref.common_out_bruteforce(_vertex(I2, Z2), _vertex(Z2, Z2)) == 1
    assert ref.common_in_bruteforce(_vertex(I2, Z2), _vertex(Z2, Z2)) == 1
    assert ref.common_out_bruteforce(_vertex([[1, 2], [0, 0]], Z2), _vertex(Z2, Z2)) == 9
    assert ref.common_out_bruteforce(_vertex(Z2, I2), _vertex(Z2, Z2)) == 0
    assert ref.common_out_bruteforce(7, 7) == ref.common_in_bruteforce(7, 7) == 81
    with pytest.raises(BudgetExceeded):
        ref.common_out_bruteforce(0, 1, budget=10)


def test_full_rank_count_grows_with_d():
    # M = (I 0) has rank n but M X = Y leaves the second block free: q^(n(dn - n))
    g = _graph(3, 2, 2)
    u, v = _vertex(I2, Z2, Z2), _vertex(Z2, Z2, Z2)
    c = g.classify_pair(u, v)
    assert c.case_label == CaseLabel.FULL_RANK
    assert c.predicted_common == 81 == g.common_out_bruteforce(u, v)
    assert predict_common(2, 0, 2, 2, 1, 3) == (CaseLabel.FULL_RANK, 1)


@pytest.mark.parametrize("q,d", [(3, 1), (5, 1), (3, 2), (4, 1), (2, 3)])
def test_commutative_case_is_normal(q, d):
    g = _graph(q, 1, d)
    rep = audit_graph(g, g.n_vertices, 10_000, seed=1)
    assert rep.normality_violations == rep.prediction_violations == rep.in_prediction_violations == 0
    assert rep.out_degree_min == rep.in_degree_max == g.degree


def _common_by_matrices(u: Vertex, v: Vertex, q, n, d):
    out = inn = 0
    for w in _all_vertices(q, n, d):
        out += has_edge_matrices(u, w) and has_edge_matrices(v, w)
        inn += has_edge_matrices(w, u) and has_edge_matrices(w, v)
    return out, inn


def test_noncommutative_case_is_not_normal(ref):
    # N+ needs the columns of Y in the column space of M, N- needs its rows in
    # the row space; for a non-symmetric M these differ
    u, v = ref.vertex(5679), ref.vertex(4943)
    assert ref.common_out_bruteforce(u, v) == 0
    assert ref.common_in_bruteforce(u, v) == 9
    assert _common_by_matrices(u, v, 3, 2, 1) == (0, 9)
    c = ref.classify_pair(u, v)
    assert (c.predicted_common, c.predicted_common_in) == (0, 9)


def test_both_predictions_exact_on_small_noncommutative_graph():
    g = _graph(2, 2, 1)  # 256 vertices, all 65280 ordered pairs
    rep = audit_graph(g, g.n_vertices, 10, seed=0, raise_on_failure=False)
    assert rep.normality_pairs_checked == 256 * 255
    assert rep.prediction_violations == rep.in_prediction_violations == 0
    assert rep.normality_violations > 0
    assert rep.first_counterexample["kind"] == "normality"
    with pytest.raises(AuditFailure) as err:
        audit_graph(g, g.n_vertices, 10, seed=0)
    assert err.value.counterexample["kind"] == "normality"


def test_predicted_table_matches_bruteforce_d2():
    g = _graph(3, 2, 2)
    rng = np.random.default_rng(5)
    us = rng.integers(0, g.n_vertices, size=200)
    vs = rng.integers(0, g.n_vertices, size=200)
    # bias half the pairs towards low-rank differences so every case shows up
    vs[:100] = g.join(g.split(us[:100]) * (rng.random((100, 3)) < 0.5))
    cls = g.classify_differences(g.difference(us, vs))
    assert np.array_equal(g.common_out_counts(us, vs), cls["predicted"])
    assert np.array_equal(g.common_in_counts(us, vs), cls["predicted_in"])
    assert len(set(cls["label"].tolist())) >= 4


def test_reference_audit_sampled(ref):
    rep = audit_graph(ref, 200, 2000, seed=3, raise_on_failure=False)
    assert rep.out_degree_min == rep.out_degree_max == rep.in_degree_min == rep.in_degree_max == 81
    assert rep.normality_pairs_checked == 2000
    assert rep.diagonal_pairs_checked == 200
    assert rep.prediction_violations == rep.in_prediction_violations == 0
    assert set(rep.predicted_values_off_diagonal) <= {0, 1, 9}


def test_reference_regularity_exhaustive(ref):
    outs, ins, bad = audit_degrees(ref, np.arange(ref.n_vertices))
    assert bad == 0
    assert (outs == 81).all() and (ins == 81).all()


def test_workers_do_not_change_the_report():
    g = _graph(3, 1, 2)
    one = audit_graph(g, 300, 3000, seed=9, workers=1).to_dict()
    two = audit_graph(g, 300, 3000, seed=9, workers=2).to_dict()
    assert one == two
    a1, _, _ = audit_degrees(g, np.arange(500), workers=1)
    a2, _, _ = audit_degrees(g, np.arange(500), workers=2)
    assert np.array_equal(a1, a2)
