"""Shared Cholesky-based helpers.

Quadratic forms and log-determinants are always computed through Cholesky
factors; explicit inverses are avoided except where a closed form exists.
"""

import numpy as np
import scipy.linalg as sla

from .errors import SingularUpdateError


def cholesky_logdet(A):
    """Lower Cholesky factor and log-determinant of a symmetric PD matrix."""
    L = np.linalg.cholesky(A)
    return L, 2.0 * np.log(np.diag(L)).sum()


def safe_cholesky(A, what="matrix"):
    """Cholesky with a single jitter retry.

    If the factorization fails, 1e-10 * trace/d is added to the diagonal
    once; a second failure raises :class:`SingularUpdateError`.
    """
    try:
        return np.linalg.cholesky(A)
    except np.linalg.LinAlgError:
        d = A.shape[0]
        jitter = 1e-10 * np.trace(A) / d
        if jitter <= 0:
            raise SingularUpdateError(f"{what} update is not positive definite")
        try:
            return np.linalg.cholesky(A + jitter * np.eye(d))
        except np.linalg.LinAlgError:
            raise SingularUpdateError(
                f"{what} update is not positive definite (after jitter)"
            ) from None


def solve_lower_batch(L, B):
    """Solve L Y = B_i for a stack B of shape (n, d, m) with L (d, d) lower."""
    n, d, m = B.shape
    flat = B.transpose(1, 0, 2).reshape(d, n * m)
    Y = sla.solve_triangular(L, flat, lower=True)
    return Y.reshape(d, n, m).transpose(1, 0, 2)


def symmetrize(A):
    return 0.5 * (A + np.swapaxes(A, -1, -2))
