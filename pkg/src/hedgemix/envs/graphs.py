"""Contact-network ingestion, generation and centrality ranking."""

from __future__ import annotations

from dataclasses import dataclass, field

import networkx as nx
import numpy as np

__all__ = ["ContactGraph", "betweenness_rank", "load_edge_list", "synth_graph"]


@dataclass(frozen=True)
class ContactGraph:
    """Undirected simple graph with a precomputed centrality ordering."""

    n: int
    edges: frozenset
    betweenness_rank: tuple

    def __post_init__(self):
        for u, v in self.edges:
            if u == v:
                raise ValueError(f"self-loop on node {u}")
            if not (0 <= u < self.n and 0 <= v < self.n):
                raise ValueError(f"edge ({u},{v}) out of range")
        if sorted(self.betweenness_rank) != list(range(self.n)):
            raise ValueError("rank must be a permutation of the nodes")

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    def adjacency(self) -> np.ndarray:
        """Dense boolean adjacency; graphs here are desk scale."""
        a = np.zeros((self.n, self.n), dtype=bool)
        for u, v in self.edges:
            a[u, v] = a[v, u] = True
        return a

    def top_fraction(self, frac: float) -> np.ndarray:
        """Node ids of the top ``frac`` of the centrality ranking."""
        k = int(np.floor(frac * self.n))
        return np.array(self.betweenness_rank[:k], dtype=np.int64)

    def rank_band(self, lo: float, hi: float) -> np.ndarray:
        """Node ids in the (lo, hi] percentile band of the ranking."""
        a = int(np.floor(lo * self.n))
        b = int(np.floor(hi * self.n))
        return np.array(self.betweenness_rank[a:b], dtype=np.int64)


def betweenness_rank(edges, n: int) -> tuple:
    """Node ordering by exact betweenness centrality, descending, ties by id."""
    if n == 0:
        raise ValueError("empty graph has no centrality ranking")
    g = nx.Graph()
    g.add_nodes_from(range(n))
    g.add_edges_from(edges)
    cent = nx.betweenness_centrality(g, normalized=False)
    return tuple(sorted(range(n), key=lambda v: (-cent[v], v)))


def _make_graph(raw_edges) -> ContactGraph:
    nodes = sorted({u for e in raw_edges for u in e})
    remap = {u: i for i, u in enumerate(nodes)}
    edges = set()
    for u, v in raw_edges:
        if u == v:
            continue
        a, b = remap[u], remap[v]
        edges.add((min(a, b), max(a, b)))
    n = len(nodes)
    return ContactGraph(n=n, edges=frozenset(edges),
                        betweenness_rank=betweenness_rank(edges, n))


def load_edge_list(path) -> ContactGraph:
    """Parse whitespace-separated ``u v`` pairs into a simple graph.

    Node labels are remapped onto a dense 0-indexed range (so 1-indexed
    files work unchanged); duplicate edges and self-loops are dropped.
    """
    raw = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) != 2:
                raise ValueError(f"{path}:{lineno}: expected 'u v', got {line!r}")
            try:
                u, v = int(parts[0]), int(parts[1])
            except ValueError:
                raise ValueError(f"{path}:{lineno}: non-integer node id in {line!r}")
            raw.append((u, v))
    if not raw:
        raise ValueError(f"{path}: no edges found")
    return _make_graph(raw)


def synth_graph(n: int, degree: int, seed: int) -> ContactGraph:
    """Connected random regular graph for desk-scale experiment runs."""
    if n < 2:
        raise ValueError("need at least two nodes")
    if degree < 1 or degree >= n or (n * degree) % 2 != 0:
        raise ValueError(f"infeasible degree {degree} for {n} nodes")
    for attempt in range(64):
        g = nx.random_regular_graph(degree, n, seed=seed * 1000 + attempt)
        if nx.is_connected(g):
            edges = {(min(u, v), max(u, v)) for u, v in g.edges()}
            return ContactGraph(n=n, edges=frozenset(edges),
                                betweenness_rank=betweenness_rank(edges, n))
    raise ValueError(f"could not build a connected {degree}-regular graph on {n} nodes")
