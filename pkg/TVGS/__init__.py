"""
Reconstruction of time-varying graph signals with Sobolev-norm regularization.
"""

from TVGS.errors import ReconstructionError
from TVGS.geo_graph import GeoGraph, NodeTable, build_geo_graph
from TVGS.reconstruction import ReconProblem, SolveReport, solve
from TVGS.tv_signal import SamplingMask, TvSignal

__all__ = [
    "GeoGraph",
    "NodeTable",
    "ReconProblem",
    "ReconstructionError",
    "SamplingMask",
    "SolveReport",
    "TvSignal",
    "build_geo_graph",
    "solve",
]
