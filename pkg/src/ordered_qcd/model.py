"""Gaussian pre/post-change scenarios on a decomposable graph.

The global log-likelihood ratio of one slot splits into clique statistics
L_1..L_K, each computed from the coordinates of a single clique. Separator
terms are shared out between cliques with weights (alpha_k, beta_k),
alpha_k + beta_k = 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from .graph import PerfectSequence, UndirectedGraph, perfect_sequence

PD_FLOOR = 1e-10
MARKOV_TOL = 1e-8
COND_LIMIT = 1e12
LOG_2PI = math.log(2 * math.pi)


class XiOutOfRange(ValueError):
    pass


class SingularCovariance(ValueError):
    pass


class NotPositiveDefinite(ValueError):
    pass


class EmptyVertexSet(ValueError):
    pass


class VertexOutOfRange(ValueError):
    pass


def _hyp(h) -> int:
    if h in (0, "pre", "f0", "H0"):
        return 0
    if h in (1, "post", "f1", "H1"):
        return 1
    raise ValueError(f"unknown hypothesis {h!r}")


# -- coefficients -------------------------------------------------------------


@dataclass(frozen=True)
class CoefficientSet:
    alpha: dict
    beta: dict
    xi: float | None = None

    def __post_init__(self):
        if set(self.alpha) != set(self.beta):
            raise ValueError("alpha and beta must be indexed by the same cliques")
        for k in self.alpha:
            a, b = self.alpha[k], self.beta[k]
            if not (0.0 <= a <= 1.0 and 0.0 <= b <= 1.0):
                raise ValueError(f"coefficients for clique {k} outside [0, 1]")
            if abs(a + b - 1.0) > 1e-12:
                raise ValueError(f"alpha_{k} + beta_{k} = {a + b} != 1")

    @property
    def K(self) -> int:
        return len(self.alpha) + 1

    @classmethod
    def from_alpha(cls, alpha) -> "CoefficientSet":
        alpha = {int(k): float(a) for k, a in alpha.items()}
        return cls(alpha, {k: 1.0 - a for k, a in alpha.items()})


def xi_upper(K: int) -> float:
    return math.inf if K == 1 else 1.0 / (2.0 ** (K - 1) - 1.0)


def auto_xi(K: int) -> float:
    """Midpoint of the admissible xi interval, 0.5 / (2^(K-1) - 1)."""
    return 0.5 if K == 1 else 0.5 * xi_upper(K)


def build_coefficients(K: int, xi: float) -> CoefficientSet:
    """alpha_k = 1 - 2^(K-k) xi and beta_k = 2^(K-k) xi for k = 2..K.

    ``xi`` must lie in the open interval (0, 1 / (2^(K-1) - 1)). K = 1 has no
    separators and returns an empty set.
    """
    if K < 1:
        raise ValueError("K must be >= 1")
    if not (0.0 < xi < xi_upper(K)):
        raise XiOutOfRange(f"xi={xi} not in (0, {xi_upper(K)}) for K={K}")
    beta = {k: 2.0 ** (K - k) * xi for k in range(2, K + 1)}
    alpha = {k: 1.0 - b for k, b in beta.items()}
    return CoefficientSet(alpha, beta, xi)


def random_coefficients(K: int, rng: np.random.Generator) -> CoefficientSet:
    return CoefficientSet.from_alpha({k: rng.uniform() for k in range(2, K + 1)})


# -- scenario -----------------------------------------------------------------


def partial_correlations(sigma: np.ndarray) -> np.ndarray:
    P = np.linalg.inv(sigma)
    d = np.sqrt(np.diag(P))
    return -P / np.outer(d, d)


def is_graph_markov(sigma: np.ndarray, graph: UndirectedGraph, tol: float = MARKOV_TOL) -> bool:
    """Zero partial correlation at every non-adjacent pair."""
    pc = np.abs(partial_correlations(sigma))
    allowed = np.eye(graph.M, dtype=bool)
    for i, j in graph.edges:
        allowed[i - 1, j - 1] = allowed[j - 1, i - 1] = True
    return bool(np.all(pc[~allowed] < tol))


def _check_pd(sigma, name):
    if not np.allclose(sigma, sigma.T, atol=1e-12, rtol=0):
        raise NotPositiveDefinite(f"{name} is not symmetric")
    lam = np.linalg.eigvalsh(sigma).min()
    if lam <= PD_FLOOR:
        raise NotPositiveDefinite(f"{name} has smallest eigenvalue {lam:.3g}")


@dataclass
class _Density:
    """Gaussian marginal on a vertex set, prepared for batched log-density."""

    mean: np.ndarray
    inv_chol: np.ndarray
    logdet: float

    @classmethod
    def build(cls, mean, cov):
        if np.linalg.cond(cov) > COND_LIMIT:
            raise SingularCovariance("marginal covariance is numerically singular")
        chol = np.linalg.cholesky(cov)
        inv_chol = linalg.solve_triangular(chol, np.eye(len(mean)), lower=True)
        return cls(mean, inv_chol, 2.0 * float(np.log(np.diag(chol)).sum()))

    def logpdf(self, X):
        z = (X - self.mean) @ self.inv_chol.T
        return -0.5 * (np.einsum("...i,...i->...", z, z) + self.logdet + len(self.mean) * LOG_2PI)


@dataclass(frozen=True, eq=False)
class GaussianScenario:
    """Pre-change N(mu0, sigma0) and post-change N(mu1, sigma1) over M sensors.

    ``graph`` is the graph whose cliques carry the computation. When the two
    hypotheses have different structure, ``graph0``/``graph1`` record them and
    ``graph`` is their union.
    """

    graph: UndirectedGraph
    seq: PerfectSequence
    mu0: np.ndarray
    sigma0: np.ndarray
    mu1: np.ndarray
    sigma1: np.ndarray
    kind: str = "explicit"
    distance: float | None = None
    graph0: UndirectedGraph | None = None
    graph1: UndirectedGraph | None = None
    _cache: dict = field(default_factory=dict, init=False, repr=False, compare=False)

    def __post_init__(self):
        M = self.graph.M
        for name in ("mu0", "mu1"):
            v = np.asarray(getattr(self, name), dtype=float)
            if v.shape != (M,):
                raise ValueError(f"{name} must have shape ({M},)")
            v.setflags(write=False)
            object.__setattr__(self, name, v)
        for name in ("sigma0", "sigma1"):
            S = np.asarray(getattr(self, name), dtype=float)
            if S.shape != (M, M):
                raise ValueError(f"{name} must have shape ({M}, {M})")
            _check_pd(S, name)
            S.setflags(write=False)
            object.__setattr__(self, name, S)
        for S, g, name in ((self.sigma0, self.graph0 or self.graph, "sigma0"),
                           (self.sigma1, self.graph1 or self.graph, "sigma1")):
            if not is_graph_markov(S, g):
                raise ValueError(f"{name} is not Markov with respect to its graph")
        if np.array_equal(self.mu0, self.mu1) and np.array_equal(self.sigma0, self.sigma1):
            raise ValueError("pre- and post-change distributions are identical")

    @property
    def M(self) -> int:
        return self.graph.M

    @property
    def K(self) -> int:
        return self.seq.K

    def params(self, hypothesis):
        return (self.mu0, self.sigma0) if _hyp(hypothesis) == 0 else (self.mu1, self.sigma1)

    def _index(self, vertices) -> np.ndarray:
        vs = sorted(vertices)
        if not vs:
            raise EmptyVertexSet("vertex set is empty")
        if vs[0] < 1 or vs[-1] > self.M:
            raise VertexOutOfRange(f"vertices must lie in 1..{self.M}")
        return np.asarray(vs, dtype=int) - 1

    def densities(self, vertices) -> tuple[_Density, _Density]:
        key = ("dens", frozenset(vertices))
        if key not in self._cache:
            idx = self._index(vertices)
            self._cache[key] = tuple(
                _Density.build(mu[idx], S[np.ix_(idx, idx)])
                for mu, S in ((self.mu0, self.sigma0), (self.mu1, self.sigma1))
            )
        return self._cache[key]


def marginal(scenario: GaussianScenario, hypothesis, vertices):
    idx = scenario._index(vertices)
    mu, S = scenario.params(hypothesis)
    return mu[idx].copy(), S[np.ix_(idx, idx)].copy()


def clique_llr(scenario: GaussianScenario, vertices, x):
    """log f1(x) - log f0(x) for the marginals on ``vertices``.

    ``x`` holds the coordinates of ``vertices`` in ascending vertex order;
    a 2-D array is treated as a batch of rows.
    """
    f0, f1 = scenario.densities(vertices)
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != len(f0.mean):
        raise ValueError(f"expected {len(f0.mean)} coordinates, got {x.shape[-1]}")
    return f1.logpdf(x) - f0.logpdf(x)


def _set_llr(scenario, vertices, X):
    return clique_llr(scenario, vertices, X[..., scenario._index(vertices)])


def clique_statistics_batch(scenario: GaussianScenario, coeffs: CoefficientSet, X) -> np.ndarray:
    """Clique statistics for a batch of observations, shape (N, K).

    L_1 = llr(C_1) - sum_{k in Q_1} beta_k llr(S_k)
    L_j = llr(C_j) - alpha_j llr(S_j) - sum_{k in Q_j} beta_k llr(S_k)
    Each column only reads the coordinates of its own clique.
    """
    seq = scenario.seq
    if coeffs.K != seq.K:
        raise ValueError(f"coefficients are for K={coeffs.K}, scenario has K={seq.K}")
    X = np.atleast_2d(np.asarray(X, dtype=float))
    sep = {k: (_set_llr(scenario, s, X) if s else np.zeros(len(X)))
           for k, s in seq.separators.items()}
    out = np.empty((len(X), seq.K))
    for j in range(1, seq.K + 1):
        L = _set_llr(scenario, seq.clique(j), X)
        if j >= 2:
            L = L - coeffs.alpha[j] * sep[j]
        for k in sorted(seq.Q[j]):
            L = L - coeffs.beta[k] * sep[k]
        out[:, j - 1] = L
    return out


@dataclass(frozen=True, eq=False)
class SlotStatistics:
    raw: np.ndarray
    order: np.ndarray  # 1-based clique indices, |raw| descending
    global_llr: float

    @classmethod
    def from_raw(cls, raw) -> "SlotStatistics":
        raw = np.asarray(raw, dtype=float)
        order = np.argsort(-np.abs(raw), kind="stable") + 1
        return cls(raw, order, float(raw.sum()))

    @property
    def K(self) -> int:
        return len(self.raw)

    @property
    def ordered(self) -> np.ndarray:
        return self.raw[self.order - 1]


def clique_statistics(scenario: GaussianScenario, coeffs: CoefficientSet, x_n) -> SlotStatistics:
    return SlotStatistics.from_raw(clique_statistics_batch(scenario, coeffs, x_n)[0])


def joint_llr(scenario: GaussianScenario, X) -> np.ndarray:
    """Full-joint log-likelihood ratio, computed without the graph."""
    from scipy.stats import multivariate_normal

    X = np.asarray(X, dtype=float)
    llr = (multivariate_normal(scenario.mu1, scenario.sigma1).logpdf(X)
           - multivariate_normal(scenario.mu0, scenario.sigma0).logpdf(X))
    # scipy squeezes single-row batches; keep the batch shape
    return np.reshape(llr, X.shape[:-1])


# -- sampling -----------------------------------------------------------------


def _sampling_plan(scenario: GaussianScenario, h: int):
    key = ("plan", h)
    if key in scenario._cache:
        return scenario._cache[key]
    mu, S = scenario.params(h)
    seq = scenario.seq
    steps = []
    for k in range(1, seq.K + 1):
        C = seq.clique(k)
        sep = sorted(seq.separators.get(k, frozenset()))
        new = sorted(C - set(sep))
        n = np.asarray(new) - 1
        s = np.asarray(sep, dtype=int) - 1
        if len(s):
            B = np.linalg.solve(S[np.ix_(s, s)], S[np.ix_(s, n)]).T
            cov = S[np.ix_(n, n)] - B @ S[np.ix_(s, n)]
        else:
            B = np.zeros((len(n), 0))
            cov = S[np.ix_(n, n)]
        if np.linalg.cond(cov) > COND_LIMIT:
            raise SingularCovariance(f"conditional covariance of clique {k} is singular")
        steps.append((n, s, B, np.linalg.cholesky(cov)))
    scenario._cache[key] = (mu, steps)
    return scenario._cache[key]


def sample_observation(scenario: GaussianScenario, hypothesis, rng: np.random.Generator, size=None):
    """Draw from the hypothesis joint by walking the clique sequence.

    C_1 comes from its marginal; each later clique draws its new vertices
    from the Gaussian conditional on its already-drawn separator.
    """
    mu, steps = _sampling_plan(scenario, _hyp(hypothesis))
    N = 1 if size is None else int(size)
    X = np.empty((N, scenario.M))
    for n, s, B, chol in steps:
        z = rng.standard_normal((N, len(n))) @ chol.T
        X[:, n] = mu[n] + (X[:, s] - mu[s]) @ B.T + z
    return X[0] if size is None else X


# -- scenario builders --------------------------------------------------------


def markov_precision(graph: UndirectedGraph, w: float = 0.25) -> np.ndarray:
    """Diagonally dominant precision with support on the graph edges."""
    M = graph.M
    A = np.zeros((M, M))
    for i, j in graph.edges:
        A[i - 1, j - 1] = A[j - 1, i - 1] = 1.0
    d = 1.0 + w * A.sum(axis=1).max(initial=0.0)
    return d * np.eye(M) - w * A


def markov_covariance(graph: UndirectedGraph, w: float = 0.25) -> np.ndarray:
    S = np.linalg.inv(markov_precision(graph, w))
    return 0.5 * (S + S.T)


def build_mean_shift_scenario(graph: UndirectedGraph, c: float, w: float = 0.25) -> GaussianScenario:
    """N(0, S) before the change and N(c*1, S) after it."""
    if c == 0:
        raise ValueError("c must be nonzero")
    seq = perfect_sequence(graph)
    S = markov_covariance(graph, w)
    mu1 = np.full(graph.M, float(c))
    s = min(abs(c) * math.sqrt(len(C)) for C in seq.cliques)
    return GaussianScenario(graph, seq, np.zeros(graph.M), S, mu1, S.copy(),
                            kind="mean_shift", distance=s)


def build_structure_change_scenario(g_pre: UndirectedGraph, g_post: UndirectedGraph,
                                    c: float, w: float = 0.25, w_post: float | None = None):
    """Mean shift where the dependence graph also changes.

    The pre-change joint is Markov on ``g_pre``, the post-change one on
    ``g_post``; the cliques come from their union.
    """
    from .graph import union_graph

    g = union_graph(g_pre, g_post)
    seq = perfect_sequence(g)
    S0 = markov_covariance(g_pre, w)
    S1 = markov_covariance(g_post, w if w_post is None else w_post)
    mu1 = np.full(g.M, float(c))
    s = min(abs(c) * math.sqrt(len(C)) for C in seq.cliques) if c else None
    return GaussianScenario(g, seq, np.zeros(g.M), S0, mu1, S1, kind="structure_change",
                            distance=s, graph0=g_pre, graph1=g_post)


def decomposable_completion(seq: PerfectSequence, M: int, blocks) -> np.ndarray:
    """Graph-Markov covariance whose clique marginals are ``blocks``.

    ``blocks[k-1]`` is the covariance of clique k in ascending vertex order.
    The precision is sum_k pad(inv(block_k)) - sum_{k>=2} pad(inv(block_{S_k})).
    """
    J = np.zeros((M, M))
    for k in range(1, seq.K + 1):
        C = sorted(seq.clique(k))
        B = np.asarray(blocks[k - 1], dtype=float)
        _check_pd(B, f"clique {k} block")
        idx = np.asarray(C) - 1
        J[np.ix_(idx, idx)] += np.linalg.inv(B)
        if k >= 2 and seq.separators[k]:
            pos = [C.index(v) for v in sorted(seq.separators[k])]
            sidx = np.asarray(sorted(seq.separators[k])) - 1
            J[np.ix_(sidx, sidx)] -= np.linalg.inv(B[np.ix_(pos, pos)])
    S = np.linalg.inv(J)
    return 0.5 * (S + S.T)


def equicorrelated_block(n: int, x: float) -> np.ndarray:
    """Diagonal x^2, off-diagonal x/10."""
    return np.full((n, n), x / 10.0) + (x * x - x / 10.0) * np.eye(n)


def build_cov_change_scenario(graph: UndirectedGraph, x: float) -> GaussianScenario:
    """N(0, I) before the change, N(0, S1) after, with clique blocks of S1
    equal to ``equicorrelated_block`` and S1 Markov on ``graph``."""
    seq = perfect_sequence(graph)
    blocks = [equicorrelated_block(len(C), x) for C in seq.cliques]
    for k, B in enumerate(blocks, 1):
        lam = np.linalg.eigvalsh(B).min()
        if lam <= PD_FLOOR:
            raise NotPositiveDefinite(f"clique {k} block is not positive definite for x={x}")
    S1 = decomposable_completion(seq, graph.M, blocks)
    s = min(float(np.linalg.eigvalsh(B).min()) for B in blocks)
    return GaussianScenario(graph, seq, np.zeros(graph.M), np.eye(graph.M),
                            np.zeros(graph.M), S1, kind="cov_change", distance=s)


def build_explicit_scenario(graph, mu0, sigma0, mu1, sigma1, graph0=None, graph1=None):
    seq = perfect_sequence(graph)
    return GaussianScenario(graph, seq, np.asarray(mu0, float), np.asarray(sigma0, float),
                            np.asarray(mu1, float), np.asarray(sigma1, float),
                            kind="explicit", graph0=graph0, graph1=graph1)
