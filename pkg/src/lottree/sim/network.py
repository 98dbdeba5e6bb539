"""Evolving social-network model: random initial contacts plus neighbours
of those contacts, which yields clustering and a broad degree distribution."""

from __future__ import annotations

from dataclasses import dataclass

import networkx as nx
import numpy as np


@dataclass(frozen=True)
class NetworkParams:
    size: int = 1000
    n0: int = 30
    p_mr1: float = 0.95  # P(one initial contact); otherwise none
    mr_variant: bool = False  # draw the initial-contact count from {1, 2} instead of {0, 1}
    ms_min: int = 1
    ms_max: int = 3
    seed_extra_edges: int | None = None  # defaults to n0

    def __post_init__(self):
        if self.n0 < 2:
            raise ValueError("the seed network needs at least two nodes")
        if self.size < self.n0:
            raise ValueError("network size must be at least the seed size")
        if not 0 <= self.p_mr1 <= 1:
            raise ValueError("p_mr1 must be a probability")
        if not 0 <= self.ms_min <= self.ms_max:
            raise ValueError("bad secondary-contact range")


def _seed_graph(params: NetworkParams, rng: np.random.Generator) -> nx.Graph:
    """Random spanning tree over n0 nodes plus a few random extra edges."""
    g = nx.Graph()
    g.add_nodes_from(range(params.n0))
    for i in range(1, params.n0):
        g.add_edge(i, int(rng.integers(i)))
    extra = params.n0 if params.seed_extra_edges is None else params.seed_extra_edges
    possible = params.n0 * (params.n0 - 1) // 2 - g.number_of_edges()
    extra = min(extra, possible)
    while extra > 0:
        a, b = (int(x) for x in rng.choice(params.n0, size=2, replace=False))
        if not g.has_edge(a, b):
            g.add_edge(a, b)
            extra -= 1
    return g


def generate_network(params: NetworkParams = NetworkParams(), seed: int | np.random.Generator = 0) -> nx.Graph:
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    g = _seed_graph(params, rng)
    for v in range(params.n0, params.size):
        if params.mr_variant:
            mr = 1 if rng.random() < params.p_mr1 else 2
        else:
            mr = 1 if rng.random() < params.p_mr1 else 0
        existing = v  # nodes 0..v-1
        initial = rng.choice(existing, size=min(mr, existing), replace=False)
        links = set(int(x) for x in initial)
        for w in initial:
            nbrs = sorted(g.neighbors(int(w)))
            ms = int(rng.integers(params.ms_min, params.ms_max + 1))
            if nbrs and ms:
                links.update(int(x) for x in rng.choice(nbrs, size=min(ms, len(nbrs)), replace=False))
        g.add_node(v)
        g.add_edges_from((v, w) for w in links)
    return g


def shuffled_null(g: nx.Graph, seed: int = 0) -> nx.Graph:
    """Random graph with the same node and edge counts."""
    return nx.gnm_random_graph(g.number_of_nodes(), g.number_of_edges(), seed=seed)
