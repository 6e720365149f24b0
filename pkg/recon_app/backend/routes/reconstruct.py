from typing import List, Optional, Tuple

import numpy as np
from fastapi import APIRouter, HTTPException
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field, model_validator
import logging

from TVGS.errors import ReconstructionError
from TVGS.geo_graph import NodeTable, build_geo_graph
from TVGS.reconstruction import ReconProblem, estimate_at_locations, solve
from TVGS.tv_signal import SamplingMask, TvSignal

router = APIRouter()

logger = logging.getLogger(__name__)


class SignalRequest(BaseModel):
    coordinates: List[Tuple[float, float]] = Field(..., min_length=2, description="(latitude, longitude) per node")
    observed: List[List[Optional[float]]] = Field(..., description="N x M matrix, null where not sampled")
    lam: float = Field(..., gt=0.0)
    epsilon: float = Field(default=0.0, ge=0.0)
    beta: float = 1.0
    k: int = Field(default=10, ge=1)
    metric: str = "euclidean"
    tol: float = Field(default=1e-7, gt=0.0)
    labels: Optional[List[str]] = None

    @model_validator(mode="after")
    def _check_shape(self):
        if len(self.observed) != len(self.coordinates):
            raise ValueError("observed needs one row per coordinate")
        if len({len(row) for row in self.observed}) != 1:
            raise ValueError("observed rows must all have the same length")
        return self

    def variant(self) -> str:
        return "qiu" if self.epsilon == 0.0 and self.beta == 1.0 else "sobolev"

    def nodes(self) -> NodeTable:
        return NodeTable(coords=np.asarray(self.coordinates, dtype=float), labels=self.labels or [])

    def mask(self) -> SamplingMask:
        values = np.array(self.observed, dtype=float)
        J = (~np.isnan(values)).astype(float)
        return SamplingMask(mask=J, observed=np.nan_to_num(values, nan=0.0))


class ReconstructResponse(BaseModel):
    values: List[List[float]]
    variant: str
    iterations: int
    converged: bool
    residual: float
    possibly_singular: bool


class EstimateRequest(SignalRequest):
    new_coordinates: List[Tuple[float, float]] = Field(..., min_length=1)
    new_labels: Optional[List[str]] = None


class EstimateResponse(BaseModel):
    labels: List[str]
    values: List[List[float]]


def _unprocessable(e: ReconstructionError) -> HTTPException:
    logger.warning(f"Rejected request: {e}")
    return HTTPException(status_code=422, detail=str(e))


@router.post("/reconstruct", response_model=ReconstructResponse)
def reconstruct(request: SignalRequest):
    try:
        nodes = request.nodes()
        graph = build_geo_graph(nodes, k=min(request.k, nodes.count - 1), metric=request.metric)
        problem = ReconProblem(
            graph=graph, mask=request.mask(), lam=request.lam, epsilon=request.epsilon,
            beta=request.beta, tol=request.tol, variant=request.variant(),
        )
        report = solve(problem)
        logger.info(f"Reconstructed {nodes.count}x{problem.n_steps} signal in {report.iterations} iterations")
        return ReconstructResponse(
            values=report.X_hat.values.tolist(),
            variant=report.variant,
            iterations=report.iterations,
            converged=report.converged,
            residual=float(report.residual_history[-1]),
            possibly_singular=report.possibly_singular,
        )
    except ReconstructionError as e:
        raise _unprocessable(e)
    except Exception as e:
        logger.error(f"Error during reconstruction: {str(e)}")
        return JSONResponse(status_code=500, content={"detail": "An error occurred while processing your request."})


@router.post("/estimate", response_model=EstimateResponse)
def estimate(request: EstimateRequest):
    try:
        nodes = request.nodes()
        sampling = request.mask()
        frame = estimate_at_locations(
            nodes,
            TvSignal(values=sampling.observed, node_labels=nodes.labels),
            np.asarray(request.new_coordinates, dtype=float),
            lam=request.lam,
            epsilon=request.epsilon,
            beta=request.beta,
            k=request.k,
            metric=request.metric,
            new_labels=request.new_labels,
            mask=sampling.mask,
            tol=request.tol,
        )
        return EstimateResponse(labels=list(frame.index), values=frame.to_numpy().tolist())
    except ReconstructionError as e:
        raise _unprocessable(e)
    except Exception as e:
        logger.error(f"Error during estimation: {str(e)}")
        return JSONResponse(status_code=500, content={"detail": "An error occurred while processing your request."})
