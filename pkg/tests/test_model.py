import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate
from scipy.stats import multivariate_normal, norm

from ordered_qcd.graph import UndirectedGraph, chain_graph, perfect_sequence, tree_graph, union_graph
from ordered_qcd.model import (CoefficientSet, EmptyVertexSet, NotPositiveDefinite,
                               SingularCovariance, SlotStatistics, VertexOutOfRange, XiOutOfRange,
                               auto_xi, build_coefficients, build_cov_change_scenario,
                               build_explicit_scenario, build_mean_shift_scenario, clique_llr,
                               clique_statistics, clique_statistics_batch, is_graph_markov,
                               joint_llr, marginal, random_coefficients, sample_observation)

from conftest import random_chordal_graph, random_markov_cov, random_scenario

G1 = UndirectedGraph.from_edges(4, [(1, 2), (1, 3), (2, 3), (2, 4)])
G2 = UndirectedGraph.from_edges(4, [(1, 2), (1, 3), (2, 3), (3, 4)])


def scalar_scenario(mu1, var1):
    return build_explicit_scenario(UndirectedGraph(1), [0.0], [[1.0]], [mu1], [[var1]])


# -- coefficients --


def test_coefficients_k3():
    c = build_coefficients(3, 0.2)
    assert c.alpha[2] == pytest.approx(0.6) and c.beta[2] == pytest.approx(0.4)
    assert c.alpha[3] == pytest.approx(0.8) and c.beta[3] == pytest.approx(0.2)


@pytest.mark.parametrize("xi", [1e-6, 0.3, 0.999])
def test_coefficients_k2(xi):
    c = build_coefficients(2, xi)
    assert c.alpha[2] == pytest.approx(1 - xi) and c.beta[2] == pytest.approx(xi)


def test_coefficients_k50_half_of_upper_xi():
    c = build_coefficients(50, 0.5 / (2 ** 49 - 1))
    assert all(0 < c.alpha[k] < 1 and 0 < c.beta[k] < 1 for k in range(2, 51))
    assert auto_xi(50) == 0.5 / (2 ** 49 - 1)


@pytest.mark.parametrize("K,xi", [(3, 0.0), (3, 1 / 3), (3, -0.1), (2, 1.0), (10, 0.01)])
def test_coefficients_out_of_range(K, xi):
    with pytest.raises(XiOutOfRange):
        build_coefficients(K, xi)


@given(st.integers(2, 60), st.floats(0.001, 0.999))
def test_coefficients_sum_to_one(K, frac):
    c = build_coefficients(K, frac / (2 ** (K - 1) - 1))
    for k in range(2, K + 1):
        assert c.alpha[k] + c.beta[k] == pytest.approx(1.0, abs=1e-12)
        assert 0 < c.beta[k] < 1


def test_coefficient_set_rejects_bad_pairs():
    with pytest.raises(ValueError):
        CoefficientSet({2: 0.5}, {2: 0.6})
    with pytest.raises(ValueError):
        CoefficientSet({2: 1.5}, {2: -0.5})


# -- marginals and clique LLRs --


def test_marginal_identity():
    g = chain_graph(2)
    sc = build_explicit_scenario(g, np.zeros(4), np.eye(4), np.ones(4), np.eye(4))
    mu, S = marginal(sc, "pre", {1, 2})
    assert np.array_equal(mu, np.zeros(2)) and np.array_equal(S, np.eye(2))
    mu, S = marginal(sc, "post", set(range(1, 5)))
    assert np.array_equal(mu, sc.mu1) and np.array_equal(S, sc.sigma1)


def test_marginal_errors():
    sc = build_mean_shift_scenario(chain_graph(2), 1.0)
    with pytest.raises(EmptyVertexSet):
        marginal(sc, "pre", set())
    with pytest.raises(VertexOutOfRange):
        marginal(sc, "pre", {0, 1})
    with pytest.raises(VertexOutOfRange):
        marginal(sc, "pre", {5})


def test_marginal_matches_integrated_joint(rng):
    """Union-clique marginal of a G1-Markov joint versus numerically integrating out x1."""
    sc = random_scenario(union_graph(G1, G2), rng, graph0=G1, graph1=G2)
    mu, S = marginal(sc, "pre", {2, 3, 4})
    joint = multivariate_normal(sc.mu0, sc.sigma0)
    for p in rng.normal(size=(3, 3)):
        val, _ = integrate.quad(lambda t: joint.pdf(np.concatenate(([t], p))), -np.inf, np.inf,
                                epsabs=1e-13, epsrel=1e-10)
        assert val == pytest.approx(multivariate_normal(mu, S).pdf(p), rel=1e-8)


def test_clique_llr_mean_shift_scalar():
    sc = scalar_scenario(1.0, 1.0)
    assert clique_llr(sc, {1}, [0.0]) == pytest.approx(-0.5, abs=1e-14)
    x = 0.37
    assert clique_llr(sc, {1}, [x]) == pytest.approx(norm.logpdf(x, 1, 1) - norm.logpdf(x), abs=1e-13)


def test_clique_llr_variance_change_scalar():
    var = 2.5
    sc = scalar_scenario(0.0, var)
    assert clique_llr(sc, {1}, [0.0]) == pytest.approx(-0.5 * math.log(var), abs=1e-14)
    x = -1.3
    assert clique_llr(sc, {1}, [x]) == pytest.approx(
        norm.logpdf(x, 0, math.sqrt(var)) - norm.logpdf(x), abs=1e-13)


def test_clique_llr_zero_when_marginals_agree():
    g = chain_graph(2)
    S = random_markov_cov(g, np.random.default_rng(1))
    S1 = S.copy()
    S1[3, 3] += 1.0  # only vertex 4 changes
    sc = build_explicit_scenario(g, np.zeros(4), S, np.zeros(4), S1)
    for x in np.random.default_rng(2).normal(size=(5, 3)):
        assert clique_llr(sc, {1, 2, 3}, x) == pytest.approx(0.0, abs=1e-12)


def test_clique_llr_singular_covariance():
    g = UndirectedGraph.from_edges(2, [(1, 2)])
    sc = build_explicit_scenario(g, [0, 0], np.diag([1e3, 5e-10]), [1, 1], np.eye(2))
    with pytest.raises(SingularCovariance):
        clique_llr(sc, {1, 2}, [0.0, 0.0])


# -- clique statistics --


def test_single_clique_statistic_is_global_llr(rng):
    g = chain_graph(1)
    sc = random_scenario(g, rng)
    x = rng.normal(size=3)
    st_ = clique_statistics(sc, build_coefficients(1, 0.5), x)
    assert st_.raw.shape == (1,)
    assert st_.raw[0] == pytest.approx(float(joint_llr(sc, x)), abs=1e-10)


def test_order_by_magnitude():
    s = SlotStatistics.from_raw([-5.0, 1.0, -2.0])
    assert s.order.tolist() == [1, 3, 2]
    assert s.global_llr == -6.0


def test_order_ties_prefer_smaller_index():
    s = SlotStatistics.from_raw([1.0, -3.0, 3.0, -1.0])
    assert s.order.tolist() == [2, 3, 1, 4]


def test_chain_decomposition_matches_joint(rng):
    g = chain_graph(3)
    for _ in range(50):
        sc = random_scenario(g, rng)
        x = rng.normal(size=(1, g.M)) * 2
        L = clique_statistics_batch(sc, random_coefficients(3, rng), x)
        assert abs(L.sum() - joint_llr(sc, x[0])) < 1e-9


def _graphs(rng):
    for K in range(1, 11):
        yield chain_graph(K)
        yield tree_graph(K)
    for _ in range(20):
        yield random_chordal_graph(rng, int(rng.integers(2, 21)))


def test_decomposition_identity_many_pairs(rng):
    worst, count = 0.0, 0
    graphs = list(_graphs(rng))
    while count < 1000:
        g = graphs[count % len(graphs)]
        sc = random_scenario(g, rng)
        co = random_coefficients(sc.K, rng)
        X = rng.normal(size=(5, g.M)) * 2
        err = np.abs(clique_statistics_batch(sc, co, X).sum(axis=1) - joint_llr(sc, X))
        worst = max(worst, float(err.max()))
        count += len(X)
    assert worst < 1e-9


def test_different_coefficients_same_sum(rng):
    g = tree_graph(5)
    sc = random_scenario(g, rng)
    X = rng.normal(size=(20, g.M))
    La = clique_statistics_batch(sc, build_coefficients(5, 0.01), X)
    Lb = clique_statistics_batch(sc, random_coefficients(5, rng), X)
    assert not np.allclose(La, Lb)
    assert np.abs(La.sum(axis=1) - Lb.sum(axis=1)).max() < 1e-9


def test_clique_statistics_are_local(rng):
    g = random_chordal_graph(rng, 15)
    sc = random_scenario(g, rng)
    co = random_coefficients(sc.K, rng)
    x = rng.normal(size=g.M)
    base = clique_statistics_batch(sc, co, x)[0]
    for k in range(1, sc.K + 1):
        outside = [v - 1 for v in g.vertices if v not in sc.seq.clique(k)]
        y = x.copy()
        y[outside] += rng.normal(size=len(outside)) * 10
        assert clique_statistics_batch(sc, co, y)[0][k - 1] == base[k - 1]


def test_factorization_over_cliques(rng):
    for g in [chain_graph(6), tree_graph(4), random_chordal_graph(rng, 12)]:
        sc = random_scenario(g, rng)
        seq = sc.seq
        for h, (mu, S) in (("pre", (sc.mu0, sc.sigma0)), ("post", (sc.mu1, sc.sigma1))):
            x = rng.normal(size=g.M)
            total = 0.0
            for k in range(1, seq.K + 1):
                m, C = marginal(sc, h, seq.clique(k))
                total += multivariate_normal(m, C).logpdf(x[sorted(v - 1 for v in seq.clique(k))])
                if k >= 2 and seq.separators[k]:
                    m, C = marginal(sc, h, seq.separators[k])
                    total -= multivariate_normal(m, C).logpdf(x[sorted(v - 1 for v in seq.separators[k])])
            assert total == pytest.approx(multivariate_normal(mu, S).logpdf(x), abs=1e-9)


# -- sampling --


def test_sampling_moments():
    sc = build_mean_shift_scenario(chain_graph(3), 1.0)
    n = 100_000
    X = sample_observation(sc, "pre", np.random.default_rng(3), size=n)
    sd = np.sqrt(np.diag(sc.sigma0))
    assert np.all(np.abs(X.mean(axis=0) - sc.mu0) < 3 * sd / math.sqrt(n))
    S = np.cov(X.T)
    assert np.linalg.norm(S - sc.sigma0) / np.linalg.norm(sc.sigma0) < 0.05


def test_sampling_post_change_tree():
    sc = build_cov_change_scenario(tree_graph(3), 2.0)
    X = sample_observation(sc, "post", np.random.default_rng(4), size=100_000)
    assert np.linalg.norm(np.cov(X.T) - sc.sigma1) / np.linalg.norm(sc.sigma1) < 0.05


def test_sampling_single_vertex():
    sc = scalar_scenario(2.0, 1.0)
    x = sample_observation(sc, "post", np.random.default_rng(0))
    assert x.shape == (1,)
    X = sample_observation(sc, "post", np.random.default_rng(0), size=50_000)
    assert abs(X.mean() - 2.0) < 0.03


# -- scenario builders --


def test_mean_shift_rejects_zero():
    with pytest.raises(ValueError):
        build_mean_shift_scenario(chain_graph(2), 0.0)


def test_mean_shift_distance():
    sc = build_mean_shift_scenario(chain_graph(2), 1.0)
    assert sc.distance == pytest.approx(math.sqrt(3))


@pytest.mark.parametrize("g", [chain_graph(50), tree_graph(20), chain_graph(1)])
def test_mean_shift_covariance_is_markov(g):
    sc = build_mean_shift_scenario(g, 1.0)
    assert is_graph_markov(sc.sigma0, g)
    assert np.array_equal(sc.sigma0, sc.sigma1)


def test_cov_change_single_clique():
    g = tree_graph(1)
    sc = build_cov_change_scenario(g, 2.0)
    B = sc.sigma1
    assert np.allclose(np.diag(B), 4.0, atol=1e-12)
    assert np.allclose(B[~np.eye(4, dtype=bool)], 0.2, atol=1e-12)
    assert np.linalg.eigvalsh(B).min() == pytest.approx(3.8)
    assert sc.distance == pytest.approx(3.8)


@pytest.mark.parametrize("x", [0.05, -0.2])
def test_cov_change_not_pd(x):
    with pytest.raises(NotPositiveDefinite):
        build_cov_change_scenario(tree_graph(2), x)


@pytest.mark.parametrize("g", [tree_graph(10), chain_graph(8)])
@pytest.mark.parametrize("x", [0.5, 2.0, 10.0])
def test_cov_change_completion_reproduces_blocks(g, x):
    sc = build_cov_change_scenario(g, x)
    assert is_graph_markov(sc.sigma1, g)
    for C in sc.seq.cliques:
        idx = np.array(sorted(C)) - 1
        B = sc.sigma1[np.ix_(idx, idx)]
        n = len(idx)
        target = np.full((n, n), x / 10) + (x * x - x / 10) * np.eye(n)
        assert np.abs(B - target).max() < 1e-9


def test_scenario_rejects_non_markov_covariance(rng):
    g = chain_graph(3)
    S = random_markov_cov(UndirectedGraph.from_edges(5, [(i, j) for i in range(1, 6) for j in range(i + 1, 6)]), rng)
    with pytest.raises(ValueError):
        build_explicit_scenario(g, np.zeros(5), S, np.ones(5), S)


def test_scenario_rejects_no_change():
    g = chain_graph(1)
    with pytest.raises(ValueError):
        build_explicit_scenario(g, np.zeros(3), np.eye(3), np.zeros(3), np.eye(3))


def test_all_negative_fraction_grows_with_c():
    g = chain_graph(5)
    co = build_coefficients(5, auto_xi(5))
    fractions = []
    for c in [1, 5, 10, 40]:
        sc = build_mean_shift_scenario(g, c)
        X = sample_observation(sc, "pre", np.random.default_rng(11), size=10_000)
        L = clique_statistics_batch(sc, co, X)
        fractions.append(float((L < 0).all(axis=1).mean()))
    assert fractions == sorted(fractions)
    assert fractions[-1] > 0.99


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_decomposition_property(seed):
    rng = np.random.default_rng(seed)
    g = random_chordal_graph(rng, int(rng.integers(1, 16)))
    sc = random_scenario(g, rng)
    x = rng.normal(size=g.M)
    L = clique_statistics(sc, random_coefficients(sc.K, rng), x)
    assert abs(L.global_llr - joint_llr(sc, x)) < 1e-9
