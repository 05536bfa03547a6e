"""Constrained mean and scatter updates shared by both fitters.

The mean updates are closed forms in the weighted sufficient statistics
S_S = sum_i S_i and S_SX = sum_i S_i X_i (with S_i = Sigma^-1 for the
normal fit).  Structured scatter matrices (AR(1), compound symmetry) are
fitted by profiling out the scale analytically and maximizing over the
correlation parameter with a bounded 1-D search.
"""

import numpy as np
from scipy.optimize import minimize_scalar

from .datamodel import Ar1Matrix, CsMatrix, MeanStructure, ScatterStructure

_RHO_TOL = 1e-7


def constrained_mean(s_s, s_sx, omega, mean_structure, p, q):
    """M-step mean under a structure constraint.

    ``omega`` is the column scatter used to weight across columns; it only
    enters the constant and row-constant cases.
    """
    if mean_structure == MeanStructure.FREE:
        return np.linalg.solve(s_s, s_sx)
    if mean_structure == MeanStructure.COLUMN_CONSTANT:
        mu = s_sx.sum(axis=0) / s_s.sum()
        return np.tile(mu, (p, 1))
    w = np.linalg.solve(omega, np.ones(q))
    if mean_structure == MeanStructure.CONSTANT:
        num = np.ones(p) @ s_sx @ w
        den = s_s.sum() * w.sum()
        return (num / den) * np.ones((p, q))
    if mean_structure == MeanStructure.ROW_CONSTANT:
        mu = np.linalg.solve(s_s, s_sx) @ w / w.sum()
        return np.outer(mu, np.ones(q))
    raise ValueError(f"unknown mean structure {mean_structure!r}")


def _rho_bounds(kind, d):
    if kind == ScatterStructure.AR1:
        return -0.99, 0.99
    return (-1.0 / (d - 1) + 1e-3 if d > 1 else -0.99), 0.99


def _make(kind, d, rho, scale):
    cls = Ar1Matrix if kind == ScatterStructure.AR1 else CsMatrix
    return cls(dim=d, rho=rho, scale=scale)


def _maximize_rho(objective, kind, d):
    lo, hi = _rho_bounds(kind, d)
    res = minimize_scalar(
        lambda r: -objective(r), bounds=(lo, hi), method="bounded",
        options={"xatol": _RHO_TOL},
    )
    return float(res.x)


def structured_scatter_direct(T, c1, kind, d):
    """Maximize c1*log|S| - tr(S T)/2 over S = scale * R(rho).

    This is the row-scatter update of the t fit, where the scatter enters
    the Wishart part of the objective directly (not through its inverse).
    Returns the parametric matrix object; ``.full()`` materializes it.
    """
    if d == 1:
        return _make(kind, 1, 0.0, float(2.0 * c1 / T[0, 0]))

    def profile(rho):
        R = _make(kind, d, rho, 1.0)
        tr = float(np.sum(R.full() * T))
        if tr <= 0:
            return -np.inf
        scale = 2.0 * c1 * d / tr
        return c1 * (d * np.log(scale) + R.logdet())

    rho = _maximize_rho(profile, kind, d)
    R = _make(kind, d, rho, 1.0)
    scale = 2.0 * c1 * d / float(np.sum(R.full() * T))
    return _make(kind, d, rho, scale)


def structured_scatter_inverse(A, c2, kind, d):
    """Maximize -c2*log|S| - tr(S^-1 A)/2 over S = scale * R(rho).

    Covers the normal-fit scatter updates and the column-scatter update of
    the t fit.  Uses the closed-form inverse and determinant of AR(1)/CS.
    """
    if d == 1:
        return _make(kind, 1, 0.0, float(A[0, 0] / (2.0 * c2)))

    def profile(rho):
        R = _make(kind, d, rho, 1.0)
        tr = float(np.sum(R.inverse() * A))
        if tr <= 0:
            return -np.inf
        scale = tr / (2.0 * c2 * d)
        return -c2 * (d * np.log(scale) + R.logdet()) - c2 * d

    rho = _maximize_rho(profile, kind, d)
    R = _make(kind, d, rho, 1.0)
    scale = float(np.sum(R.inverse() * A)) / (2.0 * c2 * d)
    return _make(kind, d, rho, scale)


def update_scatter_inverse(A, c2, kind, d):
    """Dense scatter maximizing -c2*log|S| - tr(S^-1 A)/2.

    FREE gives the closed form A / (2 c2); structured kinds go through the
    profile search.
    """
    if kind == ScatterStructure.FREE:
        return A / (2.0 * c2)
    return structured_scatter_inverse(A, c2, kind, d).full()
