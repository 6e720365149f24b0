"""
Time-varying graph signals and the smoothness functionals built on them.

A signal is an N x M matrix whose column t is the graph signal at time t.
The temporal difference operator D_h (M x (M-1), -1 on the diagonal and +1
on the subdiagonal) is applied as a two-column stencil and only
materialized for test oracles.
"""

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Union

import numpy as np
import pandas as pd

from TVGS.errors import DatasetParseError, InvalidParameterError, NumericalFailureError, SingularOperatorError
from TVGS.spectral import ShiftedOperator

logger = logging.getLogger(__name__)

MSE_SCOPES = ("all", "unsampled-only")


@dataclass(frozen=True)
class TvSignal:
    """N x M signal matrix with node and time labels"""
    values: np.ndarray
    node_labels: List[str] = field(default_factory=list)
    time_labels: List[str] = field(default_factory=list)

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.ndim != 2:
            raise InvalidParameterError(f"signal must be a 2-D matrix, got shape {values.shape}")
        if not np.all(np.isfinite(values)):
            raise InvalidParameterError("signal contains NaN or infinite entries")
        n, m = values.shape
        node_labels = list(self.node_labels) if self.node_labels else [str(i) for i in range(n)]
        time_labels = list(self.time_labels) if self.time_labels else [str(t) for t in range(m)]
        if len(node_labels) != n or len(time_labels) != m:
            raise InvalidParameterError("label count does not match the signal shape")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "node_labels", node_labels)
        object.__setattr__(self, "time_labels", time_labels)

    @property
    def n_nodes(self) -> int:
        return self.values.shape[0]

    @property
    def n_steps(self) -> int:
        return self.values.shape[1]

    def with_values(self, values: np.ndarray) -> "TvSignal":
        return TvSignal(values=values, node_labels=self.node_labels, time_labels=self.time_labels)


@dataclass(frozen=True)
class SamplingMask:
    """Binary sampling matrix J and observations Y = J o X_true"""
    mask: np.ndarray
    observed: np.ndarray

    def __post_init__(self):
        mask = np.array(self.mask, dtype=float)
        observed = np.array(self.observed, dtype=float)
        if mask.shape != observed.shape:
            raise InvalidParameterError(f"mask shape {mask.shape} != observed shape {observed.shape}")
        if not np.all((mask == 0.0) | (mask == 1.0)):
            raise InvalidParameterError("sampling mask must be binary")
        if np.any(observed[mask == 0.0] != 0.0):
            raise InvalidParameterError("observed values must be zero outside the sampling set")
        mask.setflags(write=False)
        observed.setflags(write=False)
        object.__setattr__(self, "mask", mask)
        object.__setattr__(self, "observed", observed)

    @property
    def shape(self):
        return self.mask.shape

    @property
    def samples_per_node(self) -> np.ndarray:
        return self.mask.sum(axis=1)

    @property
    def samples_per_step(self) -> np.ndarray:
        return self.mask.sum(axis=0)


class TemporalDiffOp:
    """Implicit D_h for a given number of time steps"""

    def __init__(self, n_steps: int):
        if n_steps < 2:
            raise InvalidParameterError(f"temporal differences need at least 2 time steps, got {n_steps}")
        self.n_steps = n_steps

    def apply(self, X: np.ndarray) -> np.ndarray:
        """X D_h: column t is x_{t+1} - x_t"""
        X = np.asarray(X, dtype=float)
        if X.shape[-1] != self.n_steps:
            raise InvalidParameterError(f"expected {self.n_steps} columns, got {X.shape[-1]}")
        return X[:, 1:] - X[:, :-1]

    def apply_transpose(self, U: np.ndarray) -> np.ndarray:
        """U D_h^T for U of shape N x (M-1)"""
        U = np.asarray(U, dtype=float)
        if U.shape[-1] != self.n_steps - 1:
            raise InvalidParameterError(f"expected {self.n_steps - 1} columns, got {U.shape[-1]}")
        out = np.zeros((U.shape[0], self.n_steps))
        out[:, :-1] -= U
        out[:, 1:] += U
        return out

    def second_difference(self, X: np.ndarray) -> np.ndarray:
        """X D_h D_h^T"""
        return self.apply_transpose(self.apply(X))

    def dense(self) -> np.ndarray:
        """Materialized M x (M-1) matrix"""
        m = self.n_steps
        D = np.zeros((m, m - 1))
        D[np.arange(m - 1), np.arange(m - 1)] = -1.0
        D[np.arange(1, m), np.arange(m - 1)] = 1.0
        return D

    def gram(self) -> np.ndarray:
        """D_h D_h^T, the tridiagonal second-difference matrix"""
        D = self.dense()
        return D @ D.T


def _values(X: Union[TvSignal, np.ndarray]) -> np.ndarray:
    if isinstance(X, TvSignal):
        return X.values
    return np.asarray(X, dtype=float)


def _check_laplacian(X: np.ndarray, L) -> None:
    if L.shape[0] != L.shape[1] or L.shape[0] != X.shape[0]:
        raise InvalidParameterError(f"Laplacian of shape {L.shape} does not match signal with {X.shape[0]} nodes")


def temporal_diff(X: Union[TvSignal, np.ndarray]) -> np.ndarray:
    """Difference signal X D_h = [x_2 - x_1, ..., x_M - x_{M-1}]"""
    values = _values(X)
    return TemporalDiffOp(values.shape[1]).apply(values)


def smoothness_s2(X: Union[TvSignal, np.ndarray], L) -> float:
    """Laplacian quadratic form of a time-varying signal, tr(X^T L X)"""
    values = _values(X)
    _check_laplacian(values, L)
    return float(np.sum(values * (L @ values)))


def sobolev_seminorm_tv(X: Union[TvSignal, np.ndarray], L, epsilon: float = 0.0, beta: float = 1.0) -> float:
    """
    tr(X^T (L + eps*I)^beta X).

    beta = 1 is evaluated sparsely as S2(X) + eps * ||X||_F^2; other
    exponents go through the shifted operator of TVGS.spectral.
    """
    values = _values(X)
    _check_laplacian(values, L)
    if epsilon < 0.0:
        raise InvalidParameterError(f"epsilon must be >= 0, got {epsilon}")
    if epsilon == 0.0 and beta < 0.0:
        raise SingularOperatorError("(L + 0*I)^beta with beta < 0 is singular")

    if beta == 1.0:
        result = smoothness_s2(values, L) + epsilon * float(np.sum(values * values))
    else:
        op = ShiftedOperator(L, epsilon=epsilon, beta=beta)
        result = float(np.sum(values * op.apply(values)))

    if not np.isfinite(result):
        raise NumericalFailureError("Sobolev seminorm is not finite")
    return result


def mse(
    X_hat: Union[TvSignal, np.ndarray],
    X_true: Union[TvSignal, np.ndarray],
    scope: str = "all",
    mask: Optional[SamplingMask] = None,
) -> float:
    """
    Mean squared error over all entries or over unsampled entries only.
    """
    a = _values(X_hat)
    b = _values(X_true)
    if a.shape != b.shape:
        raise InvalidParameterError(f"shape mismatch: {a.shape} vs {b.shape}")
    if scope not in MSE_SCOPES:
        raise InvalidParameterError(f"unknown MSE scope {scope!r}, expected one of {MSE_SCOPES}")

    sq = (a - b) ** 2
    if scope == "all":
        return float(sq.mean())

    if mask is None:
        raise InvalidParameterError("scope 'unsampled-only' requires a sampling mask")
    unsampled = mask.mask == 0.0
    if not unsampled.any():
        raise InvalidParameterError("no unsampled entries to evaluate (full sampling)")
    return float(sq[unsampled].mean())


def write_signal_csv(signal: TvSignal, path: Union[str, Path]) -> None:
    """
    Writes the node x time CSV: header row of time labels, first column node labels.
    """
    frame = pd.DataFrame(signal.values, index=signal.node_labels, columns=signal.time_labels)
    frame.index.name = "node"
    frame.to_csv(path, float_format="%.17g")


def read_signal_csv(path: Union[str, Path]) -> TvSignal:
    """Reads a file in the write_signal_csv format"""
    try:
        raw = pd.read_csv(path, dtype=str, keep_default_na=False, index_col=0)
    except (pd.errors.ParserError, pd.errors.EmptyDataError) as e:
        raise DatasetParseError(f"{path}: {e}", line=1) from e
    if raw.shape[1] == 0:
        raise DatasetParseError(f"{path}: no time columns", line=1)

    try:
        values = raw.to_numpy(dtype=float)
    except ValueError:
        numeric = raw.apply(pd.to_numeric, errors="coerce")
        bad_row, bad_col = np.argwhere(numeric.isna().to_numpy())[0]
        raise DatasetParseError(
            f"{path}: non-numeric value {raw.iat[bad_row, bad_col]!r} for node {raw.index[bad_row]!r}",
            line=int(bad_row) + 2,
            column=raw.columns[bad_col],
        )
    if not np.all(np.isfinite(values)):
        bad_row, bad_col = np.argwhere(~np.isfinite(values))[0]
        raise DatasetParseError(
            f"{path}: non-finite value for node {raw.index[bad_row]!r}",
            line=int(bad_row) + 2,
            column=raw.columns[bad_col],
        )
    return TvSignal(
        values=values,
        node_labels=[str(label) for label in raw.index],
        time_labels=[str(label) for label in raw.columns],
    )
