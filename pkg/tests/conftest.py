import numpy as np
import pytest
import scipy.sparse as sp

from TVGS.geo_graph import NodeTable, build_geo_graph, graph_from_adjacency
from TVGS.reconstruction import ReconProblem
from TVGS.sampling import SamplingPlan, draw_mask, observe


def random_nodes(rng, n_nodes):
    coords = np.column_stack([rng.uniform(-40.0, 60.0, n_nodes), rng.uniform(-120.0, 120.0, n_nodes)])
    return NodeTable(coords=coords)


def path_graph(n_nodes):
    """Unit-weight path 0 - 1 - ... - (n-1)"""
    ones = np.ones(n_nodes - 1)
    return graph_from_adjacency(sp.diags([ones, ones], [-1, 1], shape=(n_nodes, n_nodes)))


def make_problem(seed, n_nodes=10, n_steps=5, lam=1.0, epsilon=0.0, beta=1.0,
                 density=0.6, k=4, tol=1e-13, every_node_sampled=True):
    """Random geo graph, random signal and a mask where (optionally) each node is sampled at least once"""
    rng = np.random.default_rng(seed)
    graph = build_geo_graph(random_nodes(rng, n_nodes), k=k)
    X = rng.normal(size=(n_nodes, n_steps))
    J = draw_mask(SamplingPlan(density, seed), n_nodes, n_steps)
    if every_node_sampled:
        for i in np.flatnonzero(J.sum(axis=1) == 0):
            J[i, rng.integers(n_steps)] = 1.0
    variant = "qiu" if epsilon == 0.0 and beta == 1.0 else "sobolev"
    problem = ReconProblem(graph=graph, mask=observe(J, X), lam=lam, epsilon=epsilon,
                           beta=beta, tol=tol, variant=variant)
    return problem, X


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def path3():
    return path_graph(3)
