"""
Reconstruction of time-varying graph signals from partial samples.

Both problems minimize

    1/2 ||J o X - Y||_F^2 + lam/2 tr((X D_h)^T (L + eps*I)^beta X D_h)

Qiu's variant is the special case eps = 0, beta = 1. The stationarity
system H(X) = Y with H(V) = J o V + lam (L + eps*I)^beta V D_h D_h^T is
solved matrix-free with conjugate gradient.
"""

import logging
import time
from dataclasses import dataclass
from functools import cached_property
from typing import List, Optional

import numpy as np
import pandas as pd
import scipy.linalg

from TVGS.baselines import idw_reconstruct
from TVGS.errors import InvalidParameterError, NumericalFailureError
from TVGS.geo_graph import GeoGraph, NodeTable, build_geo_graph
from TVGS.spectral import DENSE_CAP, ShiftedOperator
from TVGS.tv_signal import SamplingMask, TemporalDiffOp, TvSignal

logger = logging.getLogger(__name__)

VARIANTS = ("qiu", "sobolev")


@dataclass(frozen=True)
class ReconProblem:
    """Objective configuration bound to a graph and a sampling mask"""
    graph: GeoGraph
    mask: SamplingMask
    lam: float
    epsilon: float = 0.0
    beta: float = 1.0
    tol: float = 1e-7
    max_iters: Optional[int] = None
    variant: str = "sobolev"

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise InvalidParameterError(f"unknown variant {self.variant!r}, expected one of {VARIANTS}")
        if not self.lam > 0.0:
            raise InvalidParameterError(f"lambda must be positive, got {self.lam}")
        if self.epsilon < 0.0:
            raise InvalidParameterError(f"epsilon must be >= 0, got {self.epsilon}")
        if self.variant == "qiu" and (self.epsilon != 0.0 or self.beta != 1.0):
            raise InvalidParameterError("the qiu variant is fixed to epsilon = 0, beta = 1")
        if not self.tol > 0.0:
            raise InvalidParameterError(f"tol must be positive, got {self.tol}")
        n, m = self.mask.shape
        if n != self.graph.n_nodes:
            raise InvalidParameterError(f"mask has {n} rows but the graph has {self.graph.n_nodes} nodes")
        if m < 2:
            raise InvalidParameterError(f"need at least 2 time steps, got {m}")
        if self.max_iters is None:
            object.__setattr__(self, "max_iters", 20 * n * m)

    @classmethod
    def qiu(cls, graph: GeoGraph, mask: SamplingMask, lam: float, **kwargs) -> "ReconProblem":
        return cls(graph=graph, mask=mask, lam=lam, epsilon=0.0, beta=1.0, variant="qiu", **kwargs)

    @classmethod
    def sobolev(cls, graph: GeoGraph, mask: SamplingMask, lam: float, epsilon: float,
                beta: float = 1.0, **kwargs) -> "ReconProblem":
        return cls(graph=graph, mask=mask, lam=lam, epsilon=epsilon, beta=beta, variant="sobolev", **kwargs)

    @property
    def n_nodes(self) -> int:
        return self.mask.shape[0]

    @property
    def n_steps(self) -> int:
        return self.mask.shape[1]

    @cached_property
    def operator(self) -> ShiftedOperator:
        return ShiftedOperator(self.graph.laplacian, epsilon=self.epsilon, beta=self.beta)

    @cached_property
    def diff(self) -> TemporalDiffOp:
        return TemporalDiffOp(self.n_steps)

    @property
    def possibly_singular(self) -> bool:
        """
        Some node is never sampled.

        Its temporal mean lies in the Hessian null space for every eps
        (X D_h ignores it), so CG leaves that component at its initial value.
        """
        return bool(np.any(self.mask.samples_per_node == 0))


@dataclass(frozen=True)
class SolveReport:
    """Outcome of one conjugate gradient solve"""
    X_hat: TvSignal
    iterations: int
    residual_history: np.ndarray
    objective_value: float
    converged: bool
    possibly_singular: bool
    wall_time: float
    variant: str
    lam: float
    epsilon: float
    beta: float

    def residual_frame(self) -> pd.DataFrame:
        return pd.DataFrame({
            "iteration": np.arange(len(self.residual_history)),
            "residual": self.residual_history,
        })

    def summary_text(self) -> str:
        rows = [
            ("variant", self.variant),
            ("lambda", f"{self.lam:.17g}"),
            ("epsilon", f"{self.epsilon:.17g}"),
            ("beta", f"{self.beta:.17g}"),
            ("iterations", self.iterations),
            ("converged", self.converged),
            ("final_residual", f"{self.residual_history[-1]:.17g}"),
            ("objective", f"{self.objective_value:.17g}"),
            ("possibly_singular", self.possibly_singular),
        ]
        return "\n".join(f"{key} = {value}" for key, value in rows) + "\n"


def _as_matrix(problem: ReconProblem, X) -> np.ndarray:
    values = X.values if isinstance(X, TvSignal) else np.asarray(X, dtype=float)
    if values.shape != problem.mask.shape:
        raise InvalidParameterError(f"expected shape {problem.mask.shape}, got {values.shape}")
    return values


def _regularizer_grad(problem: ReconProblem, X: np.ndarray) -> np.ndarray:
    """(L + eps*I)^beta X D_h D_h^T"""
    diff = problem.diff
    return diff.apply_transpose(problem.operator.apply(diff.apply(X)))


def objective(problem: ReconProblem, X) -> float:
    """Value of the reconstruction objective at X"""
    X = _as_matrix(problem, X)
    misfit = problem.mask.mask * X - problem.mask.observed
    XD = problem.diff.apply(X)
    value = 0.5 * float(np.sum(misfit * misfit)) + 0.5 * problem.lam * float(np.sum(XD * problem.operator.apply(XD)))
    if not np.isfinite(value):
        raise NumericalFailureError("objective is not finite")
    return value


def gradient(problem: ReconProblem, X) -> np.ndarray:
    """J o X - Y + lam (L + eps*I)^beta X D_h D_h^T"""
    X = _as_matrix(problem, X)
    return problem.mask.mask * X - problem.mask.observed + problem.lam * _regularizer_grad(problem, X)


def hessian_apply(problem: ReconProblem, V) -> np.ndarray:
    """J o V + lam (L + eps*I)^beta V D_h D_h^T"""
    V = _as_matrix(problem, V)
    return problem.mask.mask * V + problem.lam * _regularizer_grad(problem, V)


def vec(X: np.ndarray) -> np.ndarray:
    """Column stacking"""
    return np.asarray(X).flatten(order="F")


def unvec(z: np.ndarray, shape) -> np.ndarray:
    return np.reshape(z, shape, order="F")


def dense_hessian(problem: ReconProblem) -> np.ndarray:
    """
    Q + lam (D_h D_h^T) kron (L + eps*I)^beta with Q = diag(vec(J)).

    Only for small instances (test oracles and --direct solves).
    """
    size = problem.n_nodes * problem.n_steps
    if size > DENSE_CAP:
        raise InvalidParameterError(f"N*M={size} is too large for a dense Hessian (cap {DENSE_CAP})")
    K = np.kron(problem.diff.gram(), problem.operator.dense())
    return np.diag(vec(problem.mask.mask)) + problem.lam * K


def dense_solve(problem: ReconProblem) -> np.ndarray:
    """Direct solve of the vectorized stationarity system"""
    H = dense_hessian(problem)
    z = scipy.linalg.solve(H, vec(problem.mask.observed), assume_a="sym")
    return unvec(z, problem.mask.shape)


def solve(problem: ReconProblem, x0: Optional[np.ndarray] = None) -> SolveReport:
    """
    Conjugate gradient on H(X) = Y.

    Starts from X0 = Y unless x0 is given and stops when
    ||Y - H(X)||_F / ||Y||_F <= tol or after max_iters iterations.

    Args:
        problem: Reconstruction problem
        x0: Optional starting point

    Returns:
        SolveReport with the reconstruction and the residual history
    """
    start = time.perf_counter()
    Y = problem.mask.observed
    b_norm = float(np.linalg.norm(Y))

    if problem.possibly_singular:
        logger.warning("some nodes are never sampled: Hessian is singular along their temporal means")

    if b_norm == 0.0:
        X = np.zeros(problem.mask.shape)
        history = [0.0]
    else:
        X = np.array(Y if x0 is None else _as_matrix(problem, x0), dtype=float)
        r = Y - hessian_apply(problem, X)
        rr = float(np.sum(r * r))
        p = r.copy()
        history = [np.sqrt(rr) / b_norm]

        for it in range(1, problem.max_iters + 1):
            if history[-1] <= problem.tol:
                break
            Hp = hessian_apply(problem, p)
            pHp = float(np.sum(p * Hp))
            if not np.isfinite(pHp):
                raise NumericalFailureError(f"non-finite curvature at CG iteration {it}")
            if pHp <= 0.0:
                logger.warning("CG breakdown at iteration %d (p^T H p = %.3g)", it, pHp)
                break
            alpha = rr / pHp
            X += alpha * p
            r -= alpha * Hp
            rr_new = float(np.sum(r * r))
            residual = np.sqrt(rr_new) / b_norm
            if not np.isfinite(residual):
                raise NumericalFailureError(f"NaN residual at CG iteration {it}")
            history.append(residual)
            logger.debug("CG iter %d: relative residual %.3e", it, residual)
            p = r + (rr_new / rr) * p
            rr = rr_new

    residuals = np.asarray(history)
    converged = bool(residuals[-1] <= problem.tol)
    if not converged:
        logger.warning(
            "CG stopped after %d iterations at relative residual %.3e (tol %.1e)",
            len(residuals) - 1, residuals[-1], problem.tol,
        )

    return SolveReport(
        X_hat=TvSignal(values=X),
        iterations=len(residuals) - 1,
        residual_history=residuals,
        objective_value=objective(problem, X),
        converged=converged,
        possibly_singular=problem.possibly_singular,
        wall_time=time.perf_counter() - start,
        variant=problem.variant,
        lam=problem.lam,
        epsilon=problem.epsilon,
        beta=problem.beta,
    )


def estimate_at_locations(
    nodes: NodeTable,
    signal: TvSignal,
    new_coords: np.ndarray,
    lam: float,
    epsilon: float = 0.0,
    beta: float = 1.0,
    k: int = 10,
    metric: str = "euclidean",
    new_labels: Optional[List[str]] = None,
    mask: Optional[np.ndarray] = None,
    tol: float = 1e-7,
) -> pd.DataFrame:
    """
    Estimates the signal at locations without observations.

    The new locations are appended to the graph as nodes that are never
    sampled, the graph is rebuilt and the signal is reconstructed. The
    temporal mean of a never-sampled node is not determined by the
    objective, so CG starts from the distance-weighted kNN interpolation of
    the new rows and only refines their dynamics.

    Args:
        nodes: Observed nodes
        signal: Observed signal on those nodes (N x M)
        new_coords: (P, 2) latitude/longitude of the locations to estimate
        lam, epsilon, beta: Reconstruction parameters
        k, metric: Graph construction parameters
        new_labels: Labels for the new nodes
        mask: Optional N x M sampling mask for the observed nodes (all ones by default)

    Returns:
        DataFrame indexed by the new labels with one column per time step
    """
    if signal.n_nodes != nodes.count:
        raise InvalidParameterError("signal and node table disagree on the number of nodes")
    extended = nodes.extended(new_coords, labels=new_labels)
    n_new = extended.count - nodes.count
    graph = build_geo_graph(extended, k=min(k, extended.count - 1), metric=metric)

    observed_mask = np.ones(signal.values.shape) if mask is None else np.asarray(mask, dtype=float)
    J = np.vstack([observed_mask, np.zeros((n_new, signal.n_steps))])
    Y = J * np.vstack([signal.values, np.zeros((n_new, signal.n_steps))])

    sampling = SamplingMask(mask=J, observed=Y)
    variant = "qiu" if epsilon == 0.0 and beta == 1.0 else "sobolev"
    problem = ReconProblem(
        graph=graph, mask=sampling, lam=lam,
        epsilon=epsilon, beta=beta, tol=tol, variant=variant,
    )
    report = solve(problem, x0=idw_reconstruct(extended, sampling, k=k, metric=metric))
    logger.info("Estimated %d new locations in %d CG iterations", n_new, report.iterations)
    return pd.DataFrame(
        report.X_hat.values[nodes.count:],
        index=extended.labels[nodes.count:],
        columns=signal.time_labels,
    )
