import numpy as np
import pytest

from ordered_qcd.graph import PerfectSequence, UndirectedGraph, perfect_sequence
from ordered_qcd.model import GaussianScenario

ACCEPTANCE_LINES = []


def random_chordal_graph(rng, M, p_connect=0.8):
    """Random chordal graph grown by adding simplicial vertices.

    Each new vertex is joined to a random subset of one existing clique
    (possibly empty), then labels are shuffled.
    """
    cliques = [{0}]
    edges = set()
    for v in range(1, M):
        base = sorted(cliques[rng.integers(len(cliques))])
        if rng.uniform() < p_connect:
            size = rng.integers(1, len(base) + 1)
            nbrs = set(rng.choice(base, size=size, replace=False).tolist())
        else:
            nbrs = set()
        edges.update((u, v) for u in nbrs)
        new = nbrs | {v}
        cliques = [c for c in cliques if not c <= new] + [new]
    perm = rng.permutation(M) + 1
    return UndirectedGraph.from_edges(M, [(perm[a], perm[b]) for a, b in edges])


def random_markov_cov(graph, rng):
    """Random positive definite covariance whose precision is supported on the graph."""
    M = graph.M
    J = np.zeros((M, M))
    for i, j in graph.edges:
        J[i - 1, j - 1] = J[j - 1, i - 1] = rng.uniform(-1, 1)
    J += np.diag(np.abs(J).sum(axis=1) + rng.uniform(0.5, 2.0, size=M))
    S = np.linalg.inv(J)
    return 0.5 * (S + S.T)


def random_scenario(graph, rng, graph0=None, graph1=None):
    g0 = graph0 or graph
    g1 = graph1 or graph
    return GaussianScenario(
        graph, perfect_sequence(graph),
        rng.normal(size=graph.M), random_markov_cov(g0, rng),
        rng.normal(size=graph.M), random_markov_cov(g1, rng),
        graph0=graph0, graph1=graph1,
    )


def check_invariants(g, seq):
    """Rebuild every derived field from the cliques alone and compare."""
    K = seq.K
    rebuilt = PerfectSequence.from_cliques(seq.cliques)
    assert rebuilt == seq
    hist = set()
    for k in range(1, K + 1):
        C = seq.clique(k)
        assert g.is_complete(C)
        # maximal: no outside vertex adjacent to all of C
        assert not any(all(g.has_edge(v, u) for u in C) for v in set(g.vertices) - C)
        hist |= C
        assert seq.histories[k - 1] == hist
        if k >= 2:
            S = seq.separators[k]
            assert S == seq.histories[k - 2] & C
            assert g.is_complete(S)
            assert S <= seq.clique(seq.q[k]) and seq.q[k] < k
            assert seq.q[k] == min(j for j in range(1, k) if S <= seq.clique(j))
    for j in range(1, K + 1):
        assert seq.Q[j] == {k for k in seq.q if seq.q[k] == j}
        if seq.Q[j]:
            assert min(seq.Q[j]) > j
    assert seq.Q[K] == frozenset()
    assert hist == set(g.vertices)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
