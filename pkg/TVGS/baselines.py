"""
Distance-weighted kNN interpolation baseline ('idw-baseline').

Each time step is interpolated independently from its sampled nodes with
inverse-distance weights; sampled entries keep their observed values.
This is a stand-in comparison method, not natural neighbor interpolation.
"""

import logging

import numpy as np
from sklearn.neighbors import KNeighborsRegressor

from TVGS.errors import InvalidParameterError
from TVGS.geo_graph import METRICS, NodeTable
from TVGS.tv_signal import SamplingMask

logger = logging.getLogger(__name__)

IDW_LABEL = "idw-baseline"


def _features(coords: np.ndarray, metric: str) -> np.ndarray:
    # the haversine metric of scikit-learn expects radians
    return np.radians(coords) if metric == "haversine" else coords


def idw_reconstruct(nodes: NodeTable, mask: SamplingMask, k: int = 10, metric: str = "euclidean") -> np.ndarray:
    """
    Interpolates every unsampled entry from the k nearest sampled nodes of the same step.

    Args:
        nodes: Node table (N nodes)
        mask: Sampling mask and observations (N x M)
        k: Neighbors used per prediction
        metric: 'euclidean' or 'haversine'

    Returns:
        N x M reconstruction
    """
    if metric not in METRICS:
        raise InvalidParameterError(f"unknown metric {metric!r}, expected one of {METRICS}")
    if mask.shape[0] != nodes.count:
        raise InvalidParameterError("mask and node table disagree on the number of nodes")
    if k < 1:
        raise InvalidParameterError(f"k must be >= 1, got {k}")

    features = _features(nodes.coords, metric)
    X = np.array(mask.observed, dtype=float)
    for t in range(mask.shape[1]):
        sampled = mask.mask[:, t] == 1.0
        if sampled.all():
            continue
        if not sampled.any():
            logger.warning("time step %d has no samples, leaving it at zero", t)
            continue
        model = KNeighborsRegressor(
            n_neighbors=min(k, int(sampled.sum())),
            weights="distance",
            metric=metric,
            algorithm="brute",
        )
        model.fit(features[sampled], mask.observed[sampled, t])
        X[~sampled, t] = model.predict(features[~sampled])
    return X
