"""Undirected decomposable graphs and their perfect clique sequences.

Vertices are labelled ``1..M``. Edges are stored as sorted pairs ``(i, j)``
with ``i < j``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property


class NotDecomposable(ValueError):
    """Raised when a graph is not chordal."""


class VertexCountMismatch(ValueError):
    pass


@dataclass(frozen=True)
class UndirectedGraph:
    M: int
    edges: frozenset = field(default_factory=frozenset)

    def __post_init__(self):
        if self.M < 1:
            raise ValueError(f"vertex count must be positive, got {self.M}")
        norm = set()
        for e in self.edges:
            i, j = (int(v) for v in e)
            if i == j:
                raise ValueError(f"self-loop at vertex {i}")
            if not (1 <= i <= self.M and 1 <= j <= self.M):
                raise ValueError(f"edge {e} outside 1..{self.M}")
            norm.add((min(i, j), max(i, j)))
        object.__setattr__(self, "edges", frozenset(norm))

    @classmethod
    def from_edges(cls, M, edges):
        return cls(M, frozenset(tuple(e) for e in edges))

    @cached_property
    def adjacency(self) -> dict[int, frozenset[int]]:
        adj = {v: set() for v in range(1, self.M + 1)}
        for i, j in self.edges:
            adj[i].add(j)
            adj[j].add(i)
        return {v: frozenset(n) for v, n in adj.items()}

    @property
    def vertices(self) -> range:
        return range(1, self.M + 1)

    def has_edge(self, i, j) -> bool:
        return (min(i, j), max(i, j)) in self.edges

    def is_complete(self, vertices) -> bool:
        vs = sorted(vertices)
        return all(self.has_edge(a, b) for n, a in enumerate(vs) for b in vs[n + 1:])

    def to_dict(self) -> dict:
        return {"M": self.M, "edges": [list(e) for e in sorted(self.edges)]}


@dataclass(frozen=True)
class PerfectSequence:
    """Cliques in perfect order plus separators, histories and the q/Q maps.

    Clique indices are 1-based to match the usual notation: ``cliques[0]`` is
    C_1, ``separators[k]`` is S_k for k >= 2, ``q[k]`` is defined for
    k = 2..K and ``Q[j]`` for j = 1..K.
    """

    cliques: tuple[frozenset[int], ...]
    separators: dict[int, frozenset[int]]
    histories: tuple[frozenset[int], ...]
    q: dict[int, int]
    Q: dict[int, frozenset[int]]

    @property
    def K(self) -> int:
        return len(self.cliques)

    def clique(self, k: int) -> frozenset[int]:
        return self.cliques[k - 1]

    @classmethod
    def from_cliques(cls, cliques) -> "PerfectSequence":
        """Derive histories, separators, q and Q from an ordered clique list.

        Raises ValueError if the ordering violates the running intersection
        property.
        """
        cliques = tuple(frozenset(c) for c in cliques)
        K = len(cliques)
        histories = []
        h = frozenset()
        for c in cliques:
            h = h | c
            histories.append(h)
        separators = {}
        q = {}
        for k in range(2, K + 1):
            s = histories[k - 2] & cliques[k - 1]
            separators[k] = s
            owners = [j for j in range(1, k) if s <= cliques[j - 1]]
            if not owners:
                raise ValueError(f"running intersection fails at clique {k}")
            q[k] = owners[0]
        Q = {j: frozenset(k for k, qk in q.items() if qk == j) for j in range(1, K + 1)}
        return cls(cliques, separators, tuple(histories), q, Q)

    def table(self) -> str:
        def fmt(s):
            return "{" + ",".join(map(str, sorted(s))) + "}"

        lines = ["k\tC_k\tS_k\tq(k)\tQ_k"]
        for k in range(1, self.K + 1):
            s = fmt(self.separators[k]) if k > 1 else "-"
            qk = str(self.q[k]) if k > 1 else "-"
            lines.append(f"{k}\t{fmt(self.clique(k))}\t{s}\t{qk}\t{fmt(self.Q[k])}")
        return "\n".join(lines)


def mcs_order(g: UndirectedGraph) -> list[int]:
    """Maximum-cardinality search visiting order.

    Ties go to the smallest vertex label, so the search starts at vertex 1.
    """
    adj = g.adjacency
    weight = {v: 0 for v in g.vertices}
    unvisited = set(g.vertices)
    order = []
    while unvisited:
        v = min(unvisited, key=lambda u: (-weight[u], u))
        unvisited.remove(v)
        order.append(v)
        for u in adj[v]:
            if u in unvisited:
                weight[u] += 1
    return order


def _earlier_neighbours(g, order):
    rank = {v: i for i, v in enumerate(order)}
    adj = g.adjacency
    return rank, [frozenset(u for u in adj[v] if rank[u] < rank[v]) for v in order]


def check_decomposable(g: UndirectedGraph) -> bool:
    """True iff ``g`` is chordal (MCS ordering with a zero fill-in check)."""
    order = mcs_order(g)
    rank, earlier = _earlier_neighbours(g, order)
    for i in range(len(order)):
        prev = earlier[i]
        if len(prev) < 2:
            continue
        parent = max(prev, key=rank.__getitem__)
        if not (prev - {parent}) <= earlier[rank[parent]]:
            return False
    return True


def perfect_sequence(g: UndirectedGraph) -> PerfectSequence:
    if not check_decomposable(g):
        raise NotDecomposable("graph is not decomposable (chordless cycle of length > 3)")
    order = mcs_order(g)
    _, earlier = _earlier_neighbours(g, order)
    # Each vertex with its earlier neighbours is a clique candidate; the maximal
    # ones are the cliques, ordered by the MCS rank of their last vertex.
    candidates = [earlier[i] | {v} for i, v in enumerate(order)]
    cliques = []
    for i, cand in enumerate(candidates):
        if i + 1 < len(candidates) and cand <= candidates[i + 1]:
            continue
        cliques.append(cand)
    return PerfectSequence.from_cliques(cliques)


def union_graph(g1: UndirectedGraph, g2: UndirectedGraph) -> UndirectedGraph:
    if g1.M != g2.M:
        raise VertexCountMismatch(f"{g1.M} != {g2.M}")
    return UndirectedGraph(g1.M, g1.edges | g2.edges)


def graph_from_cliques(M: int, cliques) -> UndirectedGraph:
    edges = set()
    for c in cliques:
        vs = sorted(c)
        edges.update((a, b) for n, a in enumerate(vs) for b in vs[n + 1:])
    return UndirectedGraph(M, frozenset(edges))


def chain_graph(K: int, clique_size: int = 3) -> UndirectedGraph:
    """Chain of cliques {k, ..., k+clique_size-1}; neighbours share clique_size-1 nodes."""
    if K < 1:
        raise ValueError("K must be >= 1")
    M = K + clique_size - 1
    return graph_from_cliques(M, [range(k, k + clique_size) for k in range(1, K + 1)])


def tree_cliques(K: int, clique_size: int = 4) -> list[list[int]]:
    """Cliques of the binary tree-of-cliques model.

    Clique 1 is {1..clique_size}. Clique k >= 2 hangs off clique k // 2 through
    a single shared vertex and adds clique_size - 1 new vertices. The root
    lends its last two vertices to its children; every other clique lends its
    last two new vertices, so K=2 gives {1,2,3,4}, {3,5,6,7}.
    """
    if K < 1:
        raise ValueError("K must be >= 1")
    if clique_size < 3:
        raise ValueError("clique_size must be >= 3 for the binary tree layout")
    cliques = [list(range(1, clique_size + 1))]
    nxt = clique_size + 1
    for k in range(2, K + 1):
        parent = cliques[k // 2 - 1]
        # children 2p and 2p+1 take the second-to-last and last vertex
        shared = parent[-2] if k % 2 == 0 else parent[-1]
        new = list(range(nxt, nxt + clique_size - 1))
        nxt += clique_size - 1
        cliques.append([shared] + new)
    return cliques


def tree_graph(K: int, clique_size: int = 4) -> UndirectedGraph:
    cliques = tree_cliques(K, clique_size)
    return graph_from_cliques(clique_size + (clique_size - 1) * (K - 1), cliques)
