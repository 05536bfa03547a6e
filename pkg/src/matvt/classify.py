"""Discriminant analysis over matrix-variate groups.

Per-group matrix-normal or matrix-t models are fitted by maximum
likelihood, optionally with shared (pooled) scatter matrices, and
observations are assigned by the Bayes rule argmax_i log(eta_i f_i(X)).
For normal groups the score uses the QDA-style closed form, which agrees
with the generic log-density path.
"""

import logging
from dataclasses import dataclass, field

import numpy as np

from .datamodel import (
    MatrixStack,
    MeanStructure,
    MxvnParams,
    MxvtParams,
    ScatterStructure,
    StructureSpec,
    normalize_identifiability,
)
from .distributions import mxvn_logpdf, mxvt_logpdf
from .errors import EstimationError
from .linalg import cholesky_logdet, safe_cholesky, solve_lower_batch, symmetrize
from .mxvn import FitConfig, _relative_change, mxvn_fit
from .mxvt import EcmeConfig, cme1, estep, mxvt_fit, _obs_loglik_from_bracket
from .specfun import lmvgamma
from .structures import constrained_mean, update_scatter_inverse
from .distributions import t_bracket
from scipy.optimize import minimize_scalar

logger = logging.getLogger(__name__)

_LOG_2PI = np.log(2.0 * np.pi)


@dataclass
class ClassifierModel:
    family: str                     # "normal" or "t"
    groups: list                    # per-group MxvnParams / MxvtParams
    priors: np.ndarray
    structure: StructureSpec
    pooled: bool
    class_labels: list              # original labels, ascending
    train_log_lik: float
    param_count: int
    bic: float
    nu_mode: str = "none"           # "none", "fixed", "estimate"

    @property
    def n_groups(self):
        return len(self.groups)

    @property
    def p(self):
        return self.groups[0].p

    @property
    def q(self):
        return self.groups[0].q


def _resolve_priors(priors, counts):
    counts = np.asarray(counts, dtype=float)
    g = len(counts)
    if isinstance(priors, str):
        if priors == "empirical":
            out = counts / counts.sum()
        elif priors == "equal":
            out = np.full(g, 1.0 / g)
        else:
            raise ValueError(f"unknown priors rule {priors!r}")
    else:
        out = np.asarray(priors, dtype=float)
        if out.shape != (g,) or (out <= 0).any():
            raise ValueError("given priors must be positive, one per group")
        out = out / out.sum()
    return out


def param_count(structure, p, q, n_groups, family, nu_mode, pooled):
    """Free-parameter count under the structure and Sigma[0,0]=1 constraints."""
    mean = structure.mean_param_count(p, q) * n_groups
    scatter = structure.scatter_param_count(p, q)
    if not pooled:
        scatter *= n_groups
    nu = 0
    if family == "t" and nu_mode == "estimate":
        nu = 1 if pooled else n_groups
    return mean + scatter + nu


def train(
    data,
    family="normal",
    nu="estimate",
    structure=None,
    priors="empirical",
    pooled=False,
    tolerance=1e-8,
    max_iter=1000,
):
    """Train a matrix-variate discriminant model on a labeled stack."""
    if data.labels is None:
        raise EstimationError("training data must be labeled")
    structure = structure or StructureSpec()
    if family not in ("normal", "t"):
        raise ValueError(f"family must be 'normal' or 't', got {family!r}")
    labels = [g for g, _ in data.groups()]
    stacks = [s for _, s in data.groups()]
    if len(labels) < 2:
        raise EstimationError("need at least 2 groups to train a classifier")
    counts = [s.n for s in stacks]
    eta = _resolve_priors(priors, counts)

    nu_mode = "none"
    if family == "t":
        nu_mode = "estimate" if (isinstance(nu, str) and nu == "estimate") else "fixed"

    if pooled:
        groups = _fit_pooled(
            stacks, family, nu, structure, tolerance, max_iter
        )
    else:
        groups = []
        for lab, stack in zip(labels, stacks):
            try:
                if family == "normal":
                    res = mxvn_fit(stack, FitConfig(tolerance, max_iter, structure))
                else:
                    res = mxvt_fit(
                        stack, EcmeConfig(tolerance, max_iter, structure, nu=nu)
                    )
            except EstimationError as exc:
                raise EstimationError(f"group {lab}: {exc}") from exc
            groups.append(res.params)

    ll = 0.0
    for g, stack in enumerate(stacks):
        dens = (
            mxvn_logpdf(stack.data, groups[g])
            if family == "normal"
            else mxvt_logpdf(stack.data, groups[g])
        )
        ll += float(dens.sum()) + stack.n * np.log(eta[g])

    k = param_count(structure, data.p, data.q, len(labels), family, nu_mode, pooled)
    if priors == "empirical":
        k += len(labels) - 1
    model_bic = -2.0 * ll + k * np.log(data.n)
    return ClassifierModel(
        family=family,
        groups=groups,
        priors=eta,
        structure=structure,
        pooled=pooled,
        class_labels=labels,
        train_log_lik=ll,
        param_count=k,
        bic=model_bic,
        nu_mode=nu_mode,
    )


def _fit_pooled(stacks, family, nu, structure, tolerance, max_iter):
    """Common-scatter training: group means alternate with pooled scatter sweeps."""
    p, q = stacks[0].p, stacks[0].q
    N = sum(s.n for s in stacks)
    Sigma, Omega = np.eye(p), np.eye(q)
    means = [s.data.mean(axis=0) for s in stacks]
    estimate = family == "t" and isinstance(nu, str) and nu == "estimate"
    nu_val = 10.0 if estimate else (float(nu) if family == "t" else np.inf)

    prev_ll = -np.inf
    for _ in range(max_iter):
        if family == "normal":
            sigma_inv = np.linalg.solve(Sigma, np.eye(p))
            B = np.zeros((p, p))
            for g, s in enumerate(stacks):
                if structure.mean != MeanStructure.FREE:
                    means[g] = constrained_mean(
                        s.n * sigma_inv, sigma_inv @ s.data.sum(axis=0),
                        Omega, structure.mean, p, q,
                    )
                else:
                    means[g] = s.data.mean(axis=0)
            Lo = safe_cholesky(Omega, "column scatter")
            for g, s in enumerate(stacks):
                D = s.data - means[g]
                W = solve_lower_batch(Lo, D.transpose(0, 2, 1))
                B += np.einsum("nki,nkj->nij", W, W).sum(axis=0)
            Sigma = update_scatter_inverse(
                symmetrize(B), N * q / 2.0, structure.row_scatter, p
            )
            Ls = safe_cholesky(Sigma, "row scatter")
            A = np.zeros((q, q))
            for g, s in enumerate(stacks):
                V = solve_lower_batch(Ls, s.data - means[g])
                A += np.einsum("nki,nkj->nij", V, V).sum(axis=0)
            Omega = update_scatter_inverse(
                symmetrize(A), N * p / 2.0, structure.col_scatter, q
            )
            ll = sum(
                float(mxvn_logpdf(s.data, MxvnParams(means[g], Sigma, Omega)).sum())
                for g, s in enumerate(stacks)
            )
        else:
            stats = [
                estep(s, MxvtParams(nu_val, means[g], Sigma, Omega), z_form=False)
                for g, s in enumerate(stacks)
            ]
            s_s_all = np.zeros((p, p))
            A = np.zeros((q, q))
            for g, (s, st) in enumerate(zip(stacks, stats)):
                s_s, s_sx, s_xsx = st.s_form()
                means[g] = constrained_mean(s_s, s_sx, Omega, structure.mean, p, q)
                M = means[g]
                A += s_xsx - s_sx.T @ M - M.T @ s_sx + M.T @ s_s @ M
                s_s_all += s_s
            Omega = update_scatter_inverse(
                symmetrize(A), N * p / 2.0, structure.col_scatter, q
            )
            safe_cholesky(Omega, "column scatter")
            if structure.row_scatter == ScatterStructure.FREE:
                Sigma = symmetrize(
                    N * (nu_val + p - 1) * np.linalg.inv(s_s_all)
                )
            else:
                from .structures import structured_scatter_direct

                Sigma = structured_scatter_direct(
                    s_s_all, N * (nu_val + p - 1) / 2.0, structure.row_scatter, p
                ).full()
            safe_cholesky(Sigma, "row scatter")

            _, logdet_s = cholesky_logdet(Sigma)
            _, logdet_o = cholesky_logdet(Omega)
            sums = []
            for g, s in enumerate(stacks):
                _, ldc = t_bracket(
                    s.data, MxvtParams(max(nu_val, 1.0), means[g], Sigma, Omega)
                )
                sums.append((s.n, float(ldc.sum())))
            ll_of = lambda v: sum(
                _obs_loglik_from_bracket(v, n_g, p, q, logdet_s, logdet_o, sc)
                for n_g, sc in sums
            )
            if estimate:
                res = minimize_scalar(
                    lambda v: -ll_of(v), bounds=(2.0 + 1e-9, 1000.0 - 1e-9),
                    method="bounded", options={"xatol": 1e-6},
                )
                nu_val = float(res.x)
            ll = float(ll_of(nu_val))

        if _relative_change(ll, prev_ll) < tolerance:
            break
        prev_ll = ll

    out = []
    for g in range(len(stacks)):
        if family == "normal":
            out.append(normalize_identifiability(MxvnParams(means[g], Sigma, Omega)))
        else:
            out.append(
                normalize_identifiability(MxvtParams(nu_val, means[g], Sigma, Omega))
            )
    return out


def _normal_closed_scores(model, X):
    """QDA-style closed-form scores for normal groups (batch over X)."""
    X, single = (X[None], True) if X.ndim == 2 else (X, False)
    n = X.shape[0]
    p, q = model.p, model.q
    out = np.empty((n, len(model.groups)))
    for g, prm in enumerate(model.groups):
        Ls, logdet_s = cholesky_logdet(prm.Sigma)
        Lo, logdet_o = cholesky_logdet(prm.Omega)
        sinv_x = np.linalg.solve(prm.Sigma, X.transpose(1, 0, 2).reshape(p, -1))
        sinv_x = sinv_x.reshape(p, n, q).transpose(1, 0, 2)      # Sigma^-1 X
        oinv = np.linalg.solve(prm.Omega, np.eye(q))
        sinv_m = np.linalg.solve(prm.Sigma, prm.M)
        quad_xx = np.einsum("ij,nkj,nki->n", oinv, X, sinv_x)    # tr(O^-1 X^T S^-1 X)
        cross = np.einsum("ij,kj,nki->n", oinv, prm.M, sinv_x)   # tr(O^-1 M^T S^-1 X)
        quad_mm = float(np.sum(oinv * (prm.M.T @ sinv_m)))
        out[:, g] = (
            -0.5 * quad_xx
            + cross
            - 0.5 * quad_mm
            - 0.5 * (q * logdet_s + p * logdet_o)
            - 0.5 * p * q * _LOG_2PI
            + np.log(model.priors[g])
        )
    return out[0] if single else out


def scores(model, X):
    """Bayes scores R_i(X) = log eta_i + log f_i(X) for each group.

    Accepts one matrix (returns a length-G vector) or a stack (returns
    an (n, G) array).
    """
    X = np.asarray(X, dtype=float)
    shape = (model.p, model.q)
    if X.shape[-2:] != shape:
        raise ValueError(f"X must end in shape {shape}, got {X.shape}")
    if model.family == "normal":
        return _normal_closed_scores(model, X)
    single = X.ndim == 2
    Xb = X[None] if single else X
    out = np.column_stack(
        [
            np.log(model.priors[g]) + mxvt_logpdf(Xb, prm)
            for g, prm in enumerate(model.groups)
        ]
    )
    return out[0] if single else out


def predict(model, X):
    """Assign labels by argmax score; ties go to the lowest group index.

    Returns ``(labels, scores, log_odds)``; ``log_odds`` is R_1 - R_2 for
    two-group models and None otherwise.
    """
    sc = scores(model, X)
    single = sc.ndim == 1
    scb = sc[None] if single else sc
    idx = scb.argmax(axis=1)
    labels = np.array([model.class_labels[i] for i in idx])
    log_odds = scb[:, 0] - scb[:, 1] if len(model.groups) == 2 else None
    if single:
        return labels[0], sc, (None if log_odds is None else float(log_odds[0]))
    return labels, sc, log_odds


def evaluate(model, test):
    """Error rate and confusion matrix (rows: true, columns: predicted)."""
    if test.labels is None:
        raise EstimationError("test data must be labeled")
    labels, _, _ = predict(model, test.data)
    classes = model.class_labels
    index = {c: i for i, c in enumerate(classes)}
    confusion = np.zeros((len(classes), len(classes)), dtype=int)
    for true, pred in zip(test.labels, labels):
        if int(true) not in index:
            raise EstimationError(f"test label {true} not in trained classes {classes}")
        confusion[index[int(true)], index[int(pred)]] += 1
    error = 1.0 - np.trace(confusion) / confusion.sum()
    return float(error), confusion


def bic(model, data):
    """BIC = -2 * labeled train log-likelihood + paramCount * log(n)."""
    if data.labels is None:
        raise EstimationError("BIC needs labeled data")
    ll = 0.0
    for g, (lab, stack) in enumerate(data.groups()):
        dens = (
            mxvn_logpdf(stack.data, model.groups[g])
            if model.family == "normal"
            else mxvt_logpdf(stack.data, model.groups[g])
        )
        ll += float(dens.sum()) + stack.n * np.log(model.priors[g])
    return -2.0 * ll + model.param_count * np.log(data.n)


def loocv(data, **train_kwargs):
    """Leave-one-out cross-validation: n refits, each excluding one row.

    Returns ``(error_rate, predictions, n_refits)``.
    """
    if data.labels is None:
        raise EstimationError("LOOCV needs labeled data")
    preds = []
    for i in range(data.n):
        keep = np.ones(data.n, dtype=bool)
        keep[i] = False
        model = train(data.subset(keep), **train_kwargs)
        label, _, _ = predict(model, data.data[i])
        preds.append(int(label))
        logger.info("loocv refit %d/%d", i + 1, data.n)
    preds = np.array(preds)
    error = float((preds != data.labels).mean())
    return error, preds, data.n
