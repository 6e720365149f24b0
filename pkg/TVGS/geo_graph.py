"""
Graph construction over geolocated nodes.

Nodes are connected with a symmetrized k-nearest-neighbors rule, edges get
Gaussian weights exp(-d^2 / sigma^2) with the bandwidth estimated from the
edge lengths, and the combinatorial Laplacian L = D - W is assembled as a
sparse matrix.
"""

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Tuple, Union

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import laplacian as csgraph_laplacian
from scipy.spatial.distance import cdist
from sklearn.metrics.pairwise import haversine_distances

from TVGS.errors import DegenerateKernelError, InvalidParameterError

logger = logging.getLogger(__name__)

METRICS = ("euclidean", "haversine")
EARTH_RADIUS_KM = 6371.0088

# rows of the distance matrix materialized at once by knn_edges
_ROW_BLOCK = 512


@dataclass(frozen=True)
class NodeTable:
    """Geolocated nodes: coords[:, 0] is latitude, coords[:, 1] is longitude (degrees)"""
    coords: np.ndarray
    labels: List[str] = field(default_factory=list)

    def __post_init__(self):
        coords = np.array(self.coords, dtype=float)
        if coords.ndim != 2 or coords.shape[1] != 2:
            raise InvalidParameterError(f"coords must have shape (N, 2), got {coords.shape}")
        if coords.shape[0] < 2:
            raise InvalidParameterError("a graph needs at least 2 nodes")
        if not np.all(np.isfinite(coords)):
            raise InvalidParameterError("coordinates must be finite")
        if np.any(np.abs(coords[:, 0]) > 90.0):
            raise InvalidParameterError("latitude must lie in [-90, 90]")
        if np.any(np.abs(coords[:, 1]) > 180.0):
            raise InvalidParameterError("longitude must lie in [-180, 180]")

        labels = list(self.labels) if self.labels else [str(i) for i in range(coords.shape[0])]
        if len(labels) != coords.shape[0]:
            raise InvalidParameterError(
                f"got {len(labels)} labels for {coords.shape[0]} nodes"
            )
        coords.setflags(write=False)
        object.__setattr__(self, "coords", coords)
        object.__setattr__(self, "labels", labels)

    @property
    def count(self) -> int:
        return self.coords.shape[0]

    def extended(self, coords: np.ndarray, labels: Optional[List[str]] = None) -> "NodeTable":
        """Returns a new table with extra nodes appended after the existing ones"""
        coords = np.atleast_2d(np.asarray(coords, dtype=float))
        if labels is None:
            labels = [f"new_{i}" for i in range(coords.shape[0])]
        return NodeTable(
            coords=np.vstack([self.coords, coords]),
            labels=self.labels + list(labels),
        )


@dataclass(frozen=True)
class EdgeSet:
    """Undirected edges (i < j) with their lengths under the construction metric"""
    i: np.ndarray
    j: np.ndarray
    distance: np.ndarray
    n_nodes: int

    def __len__(self) -> int:
        return int(self.i.shape[0])

    @property
    def edges(self) -> List[Tuple[int, int, float]]:
        return [(int(a), int(b), float(d)) for a, b, d in zip(self.i, self.j, self.distance)]

    def pairs(self) -> set:
        return {(int(a), int(b)) for a, b in zip(self.i, self.j)}


@dataclass(frozen=True)
class GeoGraph:
    """Weighted undirected graph with its combinatorial Laplacian"""
    adjacency: sp.csr_matrix
    laplacian: sp.csr_matrix
    sigma: float
    k: int
    edges: EdgeSet
    metric: str = "euclidean"
    nodes: Optional[NodeTable] = None

    @property
    def n_nodes(self) -> int:
        return self.adjacency.shape[0]

    @property
    def degree(self) -> np.ndarray:
        return np.asarray(self.adjacency.sum(axis=1)).ravel()


def pairwise_distances(a: np.ndarray, b: np.ndarray, metric: str = "euclidean") -> np.ndarray:
    """
    Distance block between two coordinate arrays.

    Args:
        a: (n, 2) latitude/longitude in degrees
        b: (m, 2) latitude/longitude in degrees
        metric: 'euclidean' on raw degrees, or 'haversine' in kilometres

    Returns:
        (n, m) distance matrix
    """
    if metric == "euclidean":
        return cdist(a, b, metric="euclidean")
    if metric == "haversine":
        return EARTH_RADIUS_KM * haversine_distances(np.radians(a), np.radians(b))
    raise InvalidParameterError(f"unknown metric {metric!r}, expected one of {METRICS}")


def knn_edges(nodes: NodeTable, k: int = 10, metric: str = "euclidean") -> EdgeSet:
    """
    Connects every node to its k nearest neighbors and symmetrizes by union.

    Ties in distance are broken toward the lower node index.

    Args:
        nodes: Node table
        k: Number of neighbors per node (1 <= k < N)
        metric: 'euclidean' (degrees) or 'haversine' (km)

    Returns:
        EdgeSet with i < j and no duplicate pairs
    """
    n = nodes.count
    if not 1 <= k < n:
        raise InvalidParameterError(f"k must satisfy 1 <= k < N={n}, got k={k}")
    if metric not in METRICS:
        raise InvalidParameterError(f"unknown metric {metric!r}, expected one of {METRICS}")

    sources = []
    targets = []
    lengths = []
    for start in range(0, n, _ROW_BLOCK):
        stop = min(start + _ROW_BLOCK, n)
        block = pairwise_distances(nodes.coords[start:stop], nodes.coords, metric)
        rows = np.arange(stop - start)
        block[rows, start + rows] = np.inf
        # stable sort keeps the lower index first among equal distances
        nearest = np.argsort(block, axis=1, kind="stable")[:, :k]
        sources.append(np.repeat(np.arange(start, stop), k))
        targets.append(nearest.ravel())
        lengths.append(np.take_along_axis(block, nearest, axis=1).ravel())

    src = np.concatenate(sources)
    dst = np.concatenate(targets)
    dist = np.concatenate(lengths)

    lo = np.minimum(src, dst)
    hi = np.maximum(src, dst)
    keys, first = np.unique(lo.astype(np.int64) * n + hi, return_index=True)
    edges = EdgeSet(
        i=(keys // n).astype(np.int64),
        j=(keys % n).astype(np.int64),
        distance=dist[first],
        n_nodes=n,
    )
    logger.debug("kNN (k=%d, %s): %d undirected edges over %d nodes", k, metric, len(edges), n)
    return edges


def kernel_sigma(edges: EdgeSet, n_nodes: Optional[int] = None) -> float:
    """
    Gaussian bandwidth: sum of undirected edge lengths divided by (|E| + N).
    """
    if len(edges) == 0:
        raise InvalidParameterError("cannot estimate a kernel bandwidth from an empty edge set")
    n = edges.n_nodes if n_nodes is None else n_nodes
    sigma = float(np.sum(edges.distance)) / (len(edges) + n)
    if sigma <= 0.0:
        raise DegenerateKernelError("all edge lengths are zero, Gaussian bandwidth is 0")
    return sigma


def gaussian_weights(edges: EdgeSet, sigma: float) -> sp.csr_matrix:
    """
    Symmetric adjacency with W(i, j) = exp(-d(i, j)^2 / sigma^2) on every edge.

    Weights that underflow are floored at the smallest positive double so
    that W(i, j) > 0 exactly on the edge set.
    """
    if not sigma > 0.0:
        raise InvalidParameterError(f"sigma must be positive, got {sigma}")
    weights = np.exp(-(edges.distance / sigma) ** 2)
    weights = np.maximum(weights, np.finfo(float).tiny)

    rows = np.concatenate([edges.i, edges.j])
    cols = np.concatenate([edges.j, edges.i])
    data = np.concatenate([weights, weights])
    W = sp.coo_matrix((data, (rows, cols)), shape=(edges.n_nodes, edges.n_nodes))
    return W.tocsr()


def laplacian(W: sp.spmatrix) -> sp.csr_matrix:
    """
    Combinatorial Laplacian L = D - W of a symmetric nonnegative adjacency.
    """
    W = sp.csr_matrix(W, dtype=float)
    if W.shape[0] != W.shape[1]:
        raise InvalidParameterError(f"adjacency must be square, got {W.shape}")
    asym = abs(W - W.T)
    if asym.nnz and asym.max() > 0.0:
        raise InvalidParameterError("adjacency matrix is not symmetric")
    if W.nnz and W.data.min() < 0.0:
        raise InvalidParameterError("adjacency matrix has negative weights")
    if np.any(W.diagonal() != 0.0):
        raise InvalidParameterError("adjacency matrix has self-loops")
    return sp.csr_matrix(csgraph_laplacian(W))


def build_geo_graph(nodes: NodeTable, k: int = 10, metric: str = "euclidean") -> GeoGraph:
    """
    Full construction: kNN edges, bandwidth, Gaussian weights and Laplacian.
    """
    edges = knn_edges(nodes, k=k, metric=metric)
    sigma = kernel_sigma(edges, nodes.count)
    W = gaussian_weights(edges, sigma)
    L = laplacian(W)
    logger.info(
        "Built kNN graph: N=%d, k=%d, |E|=%d, sigma=%.6g (%s)",
        nodes.count, k, len(edges), sigma, metric,
    )
    return GeoGraph(adjacency=W, laplacian=L, sigma=sigma, k=k, edges=edges, metric=metric, nodes=nodes)


def graph_from_adjacency(W: sp.spmatrix, k: int = 0, sigma: float = 1.0) -> GeoGraph:
    """Wraps an arbitrary symmetric adjacency (synthetic or imported graphs)"""
    W = sp.csr_matrix(W, dtype=float)
    L = laplacian(W)
    upper = sp.triu(W, k=1).tocoo()
    with np.errstate(divide="ignore"):
        distance = sigma * np.sqrt(np.maximum(-np.log(upper.data), 0.0))
    edges = EdgeSet(
        i=upper.row.astype(np.int64),
        j=upper.col.astype(np.int64),
        distance=distance,
        n_nodes=W.shape[0],
    )
    return GeoGraph(adjacency=W, laplacian=L, sigma=sigma, k=k, edges=edges)


def write_edge_list(graph: GeoGraph, path: Union[str, Path]) -> None:
    """
    Writes the plain-text edge list: header 'N k sigma', then 'i j weight' per edge.
    """
    upper = sp.triu(graph.adjacency, k=1).tocoo()
    order = np.lexsort((upper.col, upper.row))
    with open(path, "w", encoding="utf-8") as f:
        f.write(f"{graph.n_nodes} {graph.k} {graph.sigma:.17e}\n")
        for idx in order:
            f.write(f"{upper.row[idx]} {upper.col[idx]} {upper.data[idx]:.17e}\n")


def read_edge_list(path: Union[str, Path]) -> GeoGraph:
    """Reads a file written by write_edge_list"""
    with open(path, "r", encoding="utf-8") as f:
        header = f.readline().split()
        if len(header) != 3:
            raise InvalidParameterError(f"{path}: header must be 'N k sigma'")
        n, k, sigma = int(header[0]), int(header[1]), float(header[2])
        rows, cols, weights = [], [], []
        for line in f:
            if not line.strip():
                continue
            a, b, w = line.split()
            rows.append(int(a))
            cols.append(int(b))
            weights.append(float(w))

    rows = np.asarray(rows, dtype=np.int64)
    cols = np.asarray(cols, dtype=np.int64)
    weights = np.asarray(weights, dtype=float)
    W = sp.coo_matrix(
        (np.concatenate([weights, weights]), (np.concatenate([rows, cols]), np.concatenate([cols, rows]))),
        shape=(n, n),
    )
    return graph_from_adjacency(W, k=k, sigma=sigma)
