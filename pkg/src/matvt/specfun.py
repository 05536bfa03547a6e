"""Log-space multivariate gamma and digamma functions.

Both functions are defined for real ``x > (p - 1) / 2`` and reduce to the
scalar ``gammaln``/``digamma`` when ``p == 1``.  They are pure and safe to
call from any thread.
"""

import numpy as np
from scipy.special import digamma, gammaln

_LOG_PI = np.log(np.pi)


def _check_domain(p, x):
    if not (isinstance(p, (int, np.integer)) and p >= 1):
        raise ValueError(f"p must be a positive integer, got {p!r}")
    if not np.isfinite(x) or x <= (p - 1) / 2.0:
        raise ValueError(f"x must be a finite real > (p-1)/2 = {(p - 1) / 2}, got {x!r}")


def lmvgamma(p, x):
    """log of the p-variate gamma function at x.

    Computed as ``(p(p-1)/4) log(pi) + sum_i gammaln(x + (1-i)/2)`` for
    i = 1..p, which avoids the overflow of the product form.
    """
    _check_domain(p, x)
    i = np.arange(1, p + 1)
    return p * (p - 1) / 4.0 * _LOG_PI + gammaln(x + (1.0 - i) / 2.0).sum()


def mvdigamma(p, x):
    """Derivative of ``lmvgamma`` with respect to x.

    Equals ``sum_i digamma(x + (1-i)/2)`` for i = 1..p.
    """
    _check_domain(p, x)
    i = np.arange(1, p + 1)
    return digamma(x + (1.0 - i) / 2.0).sum()
