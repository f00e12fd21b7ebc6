import math

import numpy as np
import pytest

from sumprod.digraph import GraphParams, SumProductDigraph, sample_indices
from sumprod.errors import NoConvergence, SpectralCapExceeded
from sumprod.fq_linalg import field_from_order
from sumprod.spectrum import (
    AAtOperator,
    adjacency_eigenvalues,
    common_out_oracle_matvec,
    count_edges_between,
    dense_adjacency,
    dense_spectrum,
    mixing_check,
    operator_AAt_apply,
    paper_exponent,
    second_singular_direction,
)


def _graph(q=3, n=2, d=1):
    return SumProductDigraph(GraphParams(field_from_order(q), n, d))


@pytest.fixture(scope="module")
def ref():
    return _graph()


@pytest.fixture(scope="module")
def ref_spectrum(ref):
    return second_singular_direction(ref, seed=0)


def test_exponent():
    assert paper_exponent(2, 1) == 3.5
    assert paper_exponent(1, 1) == 0.5
    assert paper_exponent(2, 2) == 8 - 1 - 0.5


def test_operator_is_symmetric_and_fixes_ones(ref):
    op = AAtOperator(ref)
    rng = np.random.default_rng(1)
    x, y = rng.standard_normal((2, ref.n_vertices))
    assert math.isclose(x @ op(y), op(x) @ y, rel_tol=1e-12)
    ones = np.ones(ref.n_vertices)
    assert np.allclose(op(ones), 81**2)
    assert np.allclose(operator_AAt_apply(x, ref), op(x))


def test_operator_matches_classified_oracle(ref):
    x = np.random.default_rng(2).standard_normal((ref.n_vertices, 3))
    implicit = AAtOperator(ref)(x)
    oracle = common_out_oracle_matvec(ref, x)
    assert np.max(np.abs(implicit - oracle)) <= 1e-9 * np.max(np.abs(oracle))


@pytest.mark.parametrize("q,n,d", [(3, 1, 1), (5, 1, 1), (3, 1, 2), (2, 2, 1), (4, 1, 2)])
def test_operator_matches_dense(q, n, d):
    g = _graph(q, n, d)
    a = dense_adjacency(g).astype(float)
    assert (a.sum(axis=0) == g.degree).all() and (a.sum(axis=1) == g.degree).all()
    x = np.random.default_rng(q).standard_normal(g.n_vertices)
    assert np.allclose(AAtOperator(g)(x), a @ (a.T @ x))


@pytest.mark.parametrize("q,n,d", [(3, 1, 1), (5, 1, 1), (7, 1, 1), (3, 1, 2), (2, 2, 1)])
def test_power_iteration_matches_dense(q, n, d):
    g = _graph(q, n, d)
    dense = dense_spectrum(g)
    power = second_singular_direction(g, seed=4)
    assert power.converged
    assert math.isclose(power.lambda_est, dense.lambda_est, rel_tol=1e-8)


@pytest.mark.parametrize("q,d", [(3, 1), (5, 1), (3, 2)])
def test_commutative_case_lambda_is_eigenvalue_modulus(q, d):
    # for n = 1 the digraph is normal, so the second singular value equals the
    # second largest eigenvalue modulus of A
    g = _graph(q, 1, d)
    moduli = np.sort(np.abs(adjacency_eigenvalues(g)))[::-1]
    assert math.isclose(moduli[0], g.degree, rel_tol=1e-9)
    assert math.isclose(dense_spectrum(g).lambda_est, moduli[1], rel_tol=1e-7)
    assert math.isclose(dense_spectrum(g).lambda_est, math.sqrt(q) ** d, rel_tol=1e-9)


def test_reference_spectrum(ref, ref_spectrum):
    rep = ref_spectrum
    assert rep.converged and rep.residual <= 1e-9
    assert rep.lambda_est <= 81
    assert math.isclose(rep.lambda_est, 27, rel_tol=1e-9)
    assert math.isclose(rep.empirical_constant, rep.lambda_est / 3**3.5, rel_tol=1e-12)
    assert rep.paper_exponent == 3.5
    assert math.isclose(rep.measured_exponent, 3.0, rel_tol=1e-9)


def test_seed_independence(ref, ref_spectrum):
    other = second_singular_direction(ref, seed=11)
    assert math.isclose(other.lambda_est, ref_spectrum.lambda_est, rel_tol=1e-8)


def test_caps_and_convergence(ref):
    with pytest.raises(SpectralCapExceeded):
        second_singular_direction(ref, cap=1000)
    with pytest.raises(SpectralCapExceeded):
        dense_spectrum(ref, cap=1000)
    with pytest.raises(NoConvergence) as err:
        second_singular_direction(ref, max_iter=2)
    assert err.value.report.converged is False


def test_edge_count_matches_dense():
    g = _graph(3, 1, 2)
    a = dense_adjacency(g)
    rng = np.random.default_rng(3)
    for _ in range(10):
        b = sample_indices(rng, g.n_vertices, int(rng.integers(1, g.n_vertices)))
        c = sample_indices(rng, g.n_vertices, int(rng.integers(1, g.n_vertices)))
        assert count_edges_between(g, b, c) == int(a[np.ix_(b, c)].sum())


def test_mixing_full_set_is_exact(ref, ref_spectrum):
    everything = np.arange(ref.n_vertices)
    res = mixing_check(everything, everything, ref_spectrum.lambda_est, ref)
    assert res.e_bc == 81 * ref.n_vertices
    assert res.error == 0 and res.holds


def test_mixing_random_sets(ref, ref_spectrum):
    lam = ref_spectrum.lambda_est * (1 + 1e-6)
    rng = np.random.default_rng(6)
    for _ in range(30):
        sb, sc = rng.integers(1, ref.n_vertices + 1, size=2)
        res = mixing_check(sample_indices(rng, ref.n_vertices, sb), sample_indices(rng, ref.n_vertices, sc), lam, ref)
        assert res.holds


def test_mixing_near_extremal_set(ref, ref_spectrum):
    # vertices with E = 0 and a zero first row in A: structured sets are where
    # the bound is tightest
    comps = ref.split(np.arange(ref.n_vertices))
    a_rows = ref.ring.mats[comps[:, 0]]
    b = np.flatnonzero((comps[:, 1] == 0) & (a_rows[:, 0] == 0).all(axis=1))
    res = mixing_check(b, b, ref_spectrum.lambda_est * (1 + 1e-6), ref)
    assert res.holds
    with pytest.raises(ValueError):
        mixing_check([], b, 1.0, ref)
