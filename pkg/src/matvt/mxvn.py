"""Flip-flop maximum-likelihood estimation for the matrix-variate normal.

The mean and the two scatter matrices are updated in turn, each update an
exact conditional maximization, so the observed log-likelihood never
decreases across sweeps.  Optional structure constraints restrict the mean
and/or either scatter matrix.
"""

import warnings
from dataclasses import dataclass, field

import numpy as np

from .datamodel import (
    MatrixStack,
    MeanStructure,
    MxvnParams,
    ScatterStructure,
    StructureSpec,
    normalize_identifiability,
)
from .distributions import mxvn_logpdf
from .errors import EstimationError
from .linalg import safe_cholesky, solve_lower_batch, symmetrize
from .structures import constrained_mean, update_scatter_inverse


@dataclass(frozen=True)
class FitConfig:
    tolerance: float = 1e-8
    max_iter: int = 1000
    structure: StructureSpec = field(default_factory=StructureSpec)

    def __post_init__(self):
        if not self.tolerance > 0:
            raise ValueError("tolerance must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")


@dataclass
class FitResult:
    params: object
    log_lik: float
    iterations: int
    converged: bool
    log_lik_trace: np.ndarray
    nu_at_bound: bool = False


def check_sample_size(n, p, q, structure):
    """Unconstrained fits need n > p/q + q/p + 2; constrained need n >= 2."""
    threshold = p / q + q / p + 2
    if structure.is_unconstrained():
        if not n > threshold:
            raise EstimationError(
                f"unconstrained fit needs n > p/q + q/p + 2 = {threshold:.3g}, got n={n}"
            )
    else:
        if n < 2:
            raise EstimationError(f"constrained fit needs n >= 2, got n={n}")
        if n <= threshold:
            warnings.warn(
                f"n={n} is at or below the unconstrained existence threshold "
                f"{threshold:.3g}; the constrained fit may be unstable",
                stacklevel=3,
            )


def _relative_change(new, old):
    return abs(new - old) / (abs(old) + 1.0)


def mxvn_fit(data, config=None):
    """Fit a matrix-variate normal by the flip-flop algorithm.

    Returns a :class:`FitResult` whose parameters satisfy the
    Sigma[0,0] = 1 identifiability normalization (applied once at the end;
    the density is invariant to when it is applied).
    """
    if not isinstance(data, MatrixStack):
        data = MatrixStack(np.asarray(data))
    config = config or FitConfig()
    structure = config.structure
    n, p, q = data.n, data.p, data.q
    check_sample_size(n, p, q, structure)

    X = data.data
    Sigma = np.eye(p)
    Omega = np.eye(q)
    M = X.mean(axis=0)

    trace = []
    prev_ll = -np.inf
    converged = False
    iterations = 0
    for iterations in range(1, config.max_iter + 1):
        if structure.mean != MeanStructure.FREE:
            # weighted statistics with S_i = Sigma^-1
            sigma_inv = np.linalg.solve(Sigma, np.eye(p))
            M = constrained_mean(
                n * sigma_inv, sigma_inv @ X.sum(axis=0), Omega, structure.mean, p, q
            )
        D = X - M

        Lo = safe_cholesky(Omega, "column scatter")
        W = solve_lower_batch(Lo, D.transpose(0, 2, 1))       # L_O^-1 D^T
        B = symmetrize(np.einsum("nki,nkj->nij", W, W).sum(axis=0))
        Sigma = update_scatter_inverse(B, n * q / 2.0, structure.row_scatter, p)

        Ls = safe_cholesky(Sigma, "row scatter")
        V = solve_lower_batch(Ls, D)                          # L_S^-1 D
        A = symmetrize(np.einsum("nki,nkj->nij", V, V).sum(axis=0))
        Omega = update_scatter_inverse(A, n * p / 2.0, structure.col_scatter, q)
        safe_cholesky(Omega, "column scatter")

        ll = float(mxvn_logpdf(X, MxvnParams(M, Sigma, Omega)).sum())
        trace.append(ll)
        if _relative_change(ll, prev_ll) < config.tolerance:
            converged = True
            break
        prev_ll = ll

    params = normalize_identifiability(MxvnParams(M, Sigma, Omega))
    return FitResult(
        params=params,
        log_lik=trace[-1],
        iterations=iterations,
        converged=converged,
        log_lik_trace=np.array(trace),
    )
