"""
Spectral utilities: eigendecompositions, the shifted operator (L + eps*I)^beta,
condition numbers and the perturbation checks behind the convergence argument
for the Sobolev regularizer.
"""

import logging
import math
from dataclasses import asdict, dataclass
from functools import cached_property
from typing import Optional, Tuple, Union

import numpy as np
import scipy.linalg
import scipy.sparse as sp
from scipy.sparse.linalg import ArpackNoConvergence, LinearOperator, eigsh

from TVGS.errors import (
    EstimationFailedError,
    InvalidParameterError,
    SingularOperatorError,
    UnsupportedConfigurationError,
)

logger = logging.getLogger(__name__)

DENSE_CAP = 2000
EIG_METHODS = ("auto", "dense", "power", "lanczos")


@dataclass(frozen=True)
class SpectralDecomp:
    """Ascending eigenvalues and orthonormal eigenvectors (columns)"""
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    def reconstruct(self) -> np.ndarray:
        return (self.eigenvectors * self.eigenvalues) @ self.eigenvectors.T


@dataclass(frozen=True)
class PerturbationReport:
    """Condition numbers of L and L + Psi with the perturbation bounds"""
    kappa_L: float
    kappa_shifted: float
    lower_bound: float
    upper_bound: float
    weyl_ok: Optional[bool]
    bounds_hold: bool
    lambda_min: float
    lambda_max: float
    epsilon: Optional[float] = None

    def to_text(self) -> str:
        """Flat 'key = value' block"""
        lines = []
        for key, value in asdict(self).items():
            if isinstance(value, float):
                value = f"{value:.17g}"
            lines.append(f"{key} = {value}")
        return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class WeylResult:
    ok: bool
    lower_margins: np.ndarray
    upper_margins: np.ndarray
    violating_index: Optional[int] = None


@dataclass(frozen=True)
class HessianConditioning:
    """Condition numbers of the regularization part of both Hessians"""
    kappa_time: float
    kappa_laplacian: float
    kappa_shifted_power: float
    kappa_qiu: float
    kappa_sobolev: float

    @property
    def sobolev_better(self) -> bool:
        return self.kappa_sobolev < self.kappa_qiu

    def to_text(self) -> str:
        lines = [f"{key} = {value:.17g}" for key, value in asdict(self).items()]
        lines.append(f"sobolev_better = {self.sobolev_better}")
        return "\n".join(lines) + "\n"


def _as_dense(A) -> np.ndarray:
    if sp.issparse(A):
        return A.toarray()
    return np.asarray(A, dtype=float)


def _check_symmetric(A: np.ndarray, name: str = "matrix") -> None:
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise InvalidParameterError(f"{name} must be square, got shape {A.shape}")
    scale = max(1.0, float(np.max(np.abs(A)))) if A.size else 1.0
    if not np.allclose(A, A.T, rtol=0.0, atol=1e-12 * scale):
        raise InvalidParameterError(f"{name} is not symmetric")


def dense_eig(L, dense_cap: int = DENSE_CAP) -> SpectralDecomp:
    """
    Full ascending spectrum of a symmetric matrix.

    Args:
        L: Symmetric matrix (dense or sparse)
        dense_cap: Largest N accepted; use extreme_eigs above it

    Returns:
        SpectralDecomp
    """
    n = L.shape[0]
    if n > dense_cap:
        raise UnsupportedConfigurationError(
            f"N={n} exceeds the dense eigensolver cap {dense_cap}; use extreme_eigs instead"
        )
    A = _as_dense(L)
    _check_symmetric(A)
    eigenvalues, eigenvectors = scipy.linalg.eigh(A)
    return SpectralDecomp(eigenvalues=eigenvalues, eigenvectors=eigenvectors)


class ShiftedOperator:
    """
    The symmetric operator (L + eps*I)^beta.

    Strategy is picked from beta: 'sparse-beta1' for beta = 1,
    'repeated-sparse' for other nonnegative integers (beta = 0 is the
    identity), 'dense-spectral' for fractional or negative exponents.
    """

    def __init__(self, L, epsilon: float = 0.0, beta: float = 1.0, dense_cap: int = DENSE_CAP):
        if L.shape[0] != L.shape[1]:
            raise InvalidParameterError(f"operator must be square, got {L.shape}")
        if epsilon < 0.0:
            raise InvalidParameterError(f"epsilon must be >= 0, got {epsilon}")
        if epsilon == 0.0 and beta < 0.0:
            raise SingularOperatorError("(L + 0*I)^beta with beta < 0 is singular")

        self.L = sp.csr_matrix(L, dtype=float)
        self.epsilon = float(epsilon)
        self.beta = float(beta)
        self.dense_cap = dense_cap

        if self.beta == 1.0:
            self.strategy = "sparse-beta1"
        elif self.beta >= 0.0 and self.beta.is_integer():
            self.strategy = "repeated-sparse"
        else:
            self.strategy = "dense-spectral"
            if self.n > dense_cap:
                raise UnsupportedConfigurationError(
                    f"beta={beta} needs a dense decomposition but N={self.n} exceeds the cap {dense_cap}"
                )

    @property
    def n(self) -> int:
        return self.L.shape[0]

    @cached_property
    def annihilates_constants(self) -> bool:
        """L 1 = 0, so eps^beta belongs to the spectrum exactly"""
        row_sums = np.abs(np.asarray(self.L.sum(axis=1))).ravel()
        scale = max(1.0, float(abs(self.L).max())) if self.L.nnz else 1.0
        return bool(row_sums.max() <= 1e-12 * scale)

    @property
    def shape(self) -> Tuple[int, int]:
        return self.L.shape

    @cached_property
    def decomposition(self) -> SpectralDecomp:
        return dense_eig(self.L, dense_cap=self.dense_cap)

    def _apply_once(self, X: np.ndarray) -> np.ndarray:
        return self.L @ X + self.epsilon * X

    def apply(self, X: np.ndarray) -> np.ndarray:
        """(L + eps*I)^beta X for a vector or an N x m matrix"""
        X = np.asarray(X, dtype=float)
        if X.shape[0] != self.n:
            raise InvalidParameterError(f"operand has {X.shape[0]} rows, operator is {self.n} x {self.n}")

        if self.strategy == "sparse-beta1":
            return self._apply_once(X)
        if self.strategy == "repeated-sparse":
            out = X.copy()
            for _ in range(int(self.beta)):
                out = self._apply_once(out)
            return out

        decomp = self.decomposition
        shifted = np.maximum(decomp.eigenvalues + self.epsilon, 0.0)
        if self.beta < 0.0 and np.any(shifted == 0.0):
            raise SingularOperatorError("shifted spectrum contains zero, negative power undefined")
        scale = shifted ** self.beta
        U = decomp.eigenvectors
        coeffs = U.T @ X
        if coeffs.ndim == 1:
            return U @ (scale * coeffs)
        return U @ (scale[:, None] * coeffs)

    def dense(self) -> np.ndarray:
        """Materialized operator, for small instances and oracles"""
        return self.apply(np.eye(self.n))

    def as_linear_operator(self) -> LinearOperator:
        return LinearOperator(self.shape, matvec=self.apply, rmatvec=self.apply, dtype=float)


def apply_shifted_power(op: ShiftedOperator, X: np.ndarray) -> np.ndarray:
    """(L + eps*I)^beta X using the operator's strategy"""
    return op.apply(X)


def _power_iteration(matvec, n: int, tol: float, max_iters: int, scale: Optional[float] = None) -> float:
    """Dominant eigenvalue; stops once the Rayleigh quotient moves less than tol * scale"""
    v = np.random.default_rng(0).standard_normal(n)
    v /= np.linalg.norm(v)
    rho = 0.0
    for it in range(1, max_iters + 1):
        w = matvec(v)
        rho_new = float(v @ w)
        norm = np.linalg.norm(w)
        if norm == 0.0:
            return 0.0
        v = w / norm
        reference = scale if scale is not None else max(abs(rho_new), np.finfo(float).tiny)
        if it > 1 and abs(rho_new - rho) <= tol * reference:
            return rho_new
        rho = rho_new
    raise EstimationFailedError(
        f"power iteration did not converge in {max_iters} iterations", best_estimate=rho
    )


def extreme_eigs(
    op: Union[ShiftedOperator, np.ndarray, sp.spmatrix],
    which: str = "max",
    tol: float = 1e-8,
    method: str = "auto",
    max_iters: int = 10000,
    dense_cap: int = DENSE_CAP,
) -> float:
    """
    Smallest or largest eigenvalue of a symmetric PSD operator.

    Args:
        op: ShiftedOperator or a plain symmetric matrix (treated as (A + 0*I)^1)
        which: 'min' or 'max'
        tol: Relative accuracy target
        method: 'dense' (eigvalsh), 'power' (shifted power iteration for 'min'),
            'lanczos' (scipy eigsh) or 'auto' (dense below the cap, Lanczos above)
        max_iters: Iteration cap for the iterative methods

    Returns:
        The requested eigenvalue
    """
    if which not in ("min", "max"):
        raise InvalidParameterError(f"which must be 'min' or 'max', got {which!r}")
    if method not in EIG_METHODS:
        raise InvalidParameterError(f"unknown method {method!r}, expected one of {EIG_METHODS}")
    if not isinstance(op, ShiftedOperator):
        op = ShiftedOperator(op, epsilon=0.0, beta=1.0, dense_cap=dense_cap)

    if method == "auto":
        method = "dense" if op.n <= dense_cap else "lanczos"

    if method == "dense":
        eigs = scipy.linalg.eigvalsh(op.dense())
        return float(eigs[0] if which == "min" else eigs[-1])

    # a PSD L with L 1 = 0 has lambda_1 = 0; iterative estimates only approach it from above
    if op.annihilates_constants and (which == "min") == (op.beta >= 0.0):
        return float(op.epsilon ** op.beta)

    if method == "lanczos":
        try:
            vals = eigsh(
                op.as_linear_operator(), k=1, which="LA" if which == "max" else "SA",
                tol=tol, maxiter=max_iters, return_eigenvectors=False,
            )
        except ArpackNoConvergence as e:
            best = float(e.eigenvalues[0]) if len(e.eigenvalues) else None
            raise EstimationFailedError("Lanczos did not converge", best_estimate=best) from e
        return float(vals[0])

    lam_max = _power_iteration(op.apply, op.n, tol, max_iters)
    if which == "max":
        return lam_max
    # power iteration on lam_max*I - A finds lam_max - lam_min
    gap = _power_iteration(lambda v: lam_max * v - op.apply(v), op.n, tol, max_iters, scale=abs(lam_max))
    return lam_max - gap


def effective_condition_number(eigenvalues: np.ndarray, rtol: float = 1e-10) -> float:
    """Largest over smallest nonzero eigenvalue magnitude"""
    mags = np.abs(np.asarray(eigenvalues, dtype=float))
    top = mags.max()
    nonzero = mags[mags > rtol * top]
    return float(top / nonzero.min())


def condition_number(eigenvalues: np.ndarray, rtol: float = 1e-10) -> float:
    """Spectral condition number; infinite when the smallest magnitude is numerically zero"""
    mags = np.abs(np.asarray(eigenvalues, dtype=float))
    top = mags.max()
    bottom = mags.min()
    if bottom <= rtol * top:
        return math.inf
    return float(top / bottom)


def temporal_condition_number(n_steps: int) -> float:
    """
    Effective condition number of D_h D_h^T (the path Laplacian on M steps).

    Its nonzero eigenvalues are 2 - 2 cos(pi k / M), k = 1..M-1, the same
    spectrum as the invertible D_h^T D_h.
    """
    if n_steps < 2:
        raise InvalidParameterError(f"need at least 2 time steps, got {n_steps}")
    lo = 2.0 - 2.0 * math.cos(math.pi / n_steps)
    hi = 2.0 - 2.0 * math.cos(math.pi * (n_steps - 1) / n_steps)
    return hi / lo


def weyl_check(L, Psi, slack: float = 1e-9) -> WeylResult:
    """
    Checks lambda_i + psi_1 <= nu_i <= lambda_i + psi_N for the eigenvalues nu of L + Psi.
    """
    A = _as_dense(L)
    B = _as_dense(Psi)
    if A.shape != B.shape:
        raise InvalidParameterError(f"shape mismatch: {A.shape} vs {B.shape}")
    _check_symmetric(A, "L")
    _check_symmetric(B, "Psi")

    lam = scipy.linalg.eigvalsh(A)
    psi = scipy.linalg.eigvalsh(B)
    nu = scipy.linalg.eigvalsh(A + B)

    lower = nu - (lam + psi[0])
    upper = (lam + psi[-1]) - nu
    scale = max(1.0, float(np.max(np.abs(nu))), float(np.max(np.abs(lam))) + float(np.max(np.abs(psi))))
    bad = np.flatnonzero((lower < -slack * scale) | (upper < -slack * scale))
    if bad.size:
        logger.warning("Weyl inequality violated at index %d", bad[0])
        return WeylResult(ok=False, lower_margins=lower, upper_margins=upper, violating_index=int(bad[0]))
    return WeylResult(ok=True, lower_margins=lower, upper_margins=upper)


def _sandwich_holds(lower: float, kappa: float, upper: float, rtol: float = 1e-9) -> bool:
    if math.isinf(kappa):
        return True
    return lower <= kappa * (1.0 + rtol) and kappa <= upper * (1.0 + rtol)


def perturbation_bounds(L, Psi, slack: float = 1e-9) -> PerturbationReport:
    """
    Condition number of L + Psi with the bounds
    s_max(L+Psi)/s_max(Psi) <= kappa(L+Psi) <= (s_max(L) + s_max(Psi)) / s_min(L+Psi).
    """
    A = _as_dense(L)
    B = _as_dense(Psi)
    s_L = scipy.linalg.svdvals(A)
    s_Psi = scipy.linalg.svdvals(B)
    s_sum = scipy.linalg.svdvals(A + B)

    kappa_shifted = condition_number(s_sum)
    lower = s_sum[0] / s_Psi[0] if s_Psi[0] > 0.0 else math.inf
    upper = (s_L[0] + s_Psi[0]) / s_sum[-1] if s_sum[-1] > 0.0 else math.inf
    bounds_hold = _sandwich_holds(lower, kappa_shifted, upper)
    if not bounds_hold:
        logger.warning("condition number %.6g outside [%.6g, %.6g]", kappa_shifted, lower, upper)

    lam = scipy.linalg.eigvalsh(A)
    return PerturbationReport(
        kappa_L=condition_number(s_L),
        kappa_shifted=kappa_shifted,
        lower_bound=float(lower),
        upper_bound=float(upper),
        weyl_ok=weyl_check(A, B, slack=slack).ok,
        bounds_hold=bounds_hold,
        lambda_min=float(lam[0]),
        lambda_max=float(lam[-1]),
    )


def condition_number_shifted(
    L, epsilon: float, method: str = "auto", dense_cap: int = DENSE_CAP
) -> PerturbationReport:
    """
    kappa(L + eps*I) = (lambda_N + eps) / (lambda_1 + eps) with the
    perturbation bounds for Psi = eps*I.

    eps <= 0 returns an infinite condition number.
    """
    n = L.shape[0]
    if method == "auto":
        method = "dense" if n <= dense_cap else "lanczos"

    if method == "dense":
        lam = scipy.linalg.eigvalsh(_as_dense(L))
        lam_min, lam_max = float(lam[0]), float(lam[-1])
    else:
        lam_min = extreme_eigs(L, "min", method=method, dense_cap=dense_cap)
        lam_max = extreme_eigs(L, "max", method=method, dense_cap=dense_cap)

    kappa_L = condition_number(np.array([lam_min, lam_max]))

    if epsilon <= 0.0:
        if epsilon < 0.0:
            logger.warning("epsilon=%g < 0, shifted operator is not PSD", epsilon)
        return PerturbationReport(
            kappa_L=kappa_L, kappa_shifted=math.inf, lower_bound=math.inf, upper_bound=math.inf,
            weyl_ok=None, bounds_hold=True, lambda_min=lam_min, lambda_max=lam_max, epsilon=epsilon,
        )

    kappa_shifted = (lam_max + epsilon) / (lam_min + epsilon)
    lower = (lam_max + epsilon) / epsilon
    upper = (lam_max + epsilon) / (lam_min + epsilon)
    bounds_hold = _sandwich_holds(lower, kappa_shifted, upper)
    if not bounds_hold:
        logger.warning("condition number %.6g outside [%.6g, %.6g]", kappa_shifted, lower, upper)

    weyl_ok = None
    if n <= dense_cap:
        weyl_ok = weyl_check(L, epsilon * np.eye(n)).ok

    return PerturbationReport(
        kappa_L=kappa_L,
        kappa_shifted=kappa_shifted,
        lower_bound=lower,
        upper_bound=upper,
        weyl_ok=weyl_ok,
        bounds_hold=bounds_hold,
        lambda_min=lam_min,
        lambda_max=lam_max,
        epsilon=epsilon,
    )


def kron_condition_identity(A: np.ndarray, B: np.ndarray) -> Tuple[float, float]:
    """
    (kappa(A kron B), kappa(A) * kappa(B)) from explicit dense matrices.
    """
    A = _as_dense(A)
    B = _as_dense(B)
    kappa_kron = condition_number(scipy.linalg.svdvals(np.kron(A, B)))
    kappa_prod = condition_number(scipy.linalg.svdvals(A)) * condition_number(scipy.linalg.svdvals(B))
    return kappa_kron, kappa_prod


def hessian_condition_compare(
    L,
    n_steps: int,
    lam: float,
    epsilon: float,
    beta: float = 1.0,
    method: str = "auto",
    dense_cap: int = DENSE_CAP,
) -> HessianConditioning:
    """
    Compares kappa of lam*(D_h D_h^T) kron L against lam*(D_h D_h^T) kron (L + eps*I)^beta.

    The factor lam does not change either condition number; it is accepted
    so callers can pass a problem's parameters unchanged.
    """
    if lam <= 0.0:
        raise InvalidParameterError(f"lambda must be positive, got {lam}")
    if epsilon <= 0.0:
        raise InvalidParameterError(f"epsilon must be positive, got {epsilon}")

    kappa_time = temporal_condition_number(n_steps)
    report = condition_number_shifted(L, epsilon, method=method, dense_cap=dense_cap)
    kappa_shifted_power = report.kappa_shifted ** abs(beta)
    result = HessianConditioning(
        kappa_time=kappa_time,
        kappa_laplacian=report.kappa_L,
        kappa_shifted_power=kappa_shifted_power,
        kappa_qiu=kappa_time * report.kappa_L,
        kappa_sobolev=kappa_time * kappa_shifted_power,
    )
    if not result.sobolev_better:
        logger.warning(
            "shifted Hessian term is not better conditioned (%.6g >= %.6g)",
            result.kappa_sobolev, result.kappa_qiu,
        )
    return result
