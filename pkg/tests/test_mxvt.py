import numpy as np
import pytest

from matvt.datamodel import (
    Ar1Matrix,
    MatrixStack,
    MeanStructure,
    MxvtParams,
    ScatterStructure,
    StructureSpec,
)
from matvt.distributions import mxvt_logpdf, sample_mxvt, sample_wishart, t_bracket
from matvt.mxvt import (
    EcmeConfig,
    cme1,
    estep,
    mxvt_fit,
    nu_estimating_function,
    solve_nu,
)

from conftest import random_spd


def _true_params(rng, p=3, q=2, nu=6.0):
    return MxvtParams(
        nu=nu,
        M=rng.standard_normal((p, q)),
        Sigma=random_spd(rng, p),
        Omega=random_spd(rng, q),
    )


# ---------------------------------------------------------------------------
# E-step


def test_estep_weight_matrix_definition(rng):
    params = _true_params(rng, p=2, q=3, nu=5.0)
    data = sample_mxvt(params, 20, seed=1)
    kappa = params.nu + params.p + params.q - 1
    stats = estep(data, params, z_form=False)
    C, _ = t_bracket(data.data, params)
    S = kappa * np.linalg.inv(C)
    np.testing.assert_allclose(stats.s_s, S.sum(axis=0), rtol=1e-10)
    np.testing.assert_allclose(
        stats.s_sx, np.einsum("nij,njk->ik", S, data.data), rtol=1e-10
    )
    np.testing.assert_allclose(
        stats.s_xsx,
        np.einsum("nji,njk,nkl->il", data.data, S, data.data),
        rtol=1e-10,
    )


def test_estep_scalar_weight(rng):
    # p = q = 1: the weight reduces to (nu + 1) / ((x - m)^2 / omega + sigma)
    nu, m, sigma, omega = 4.0, 0.5, 2.0, 3.0
    params = MxvtParams(
        nu=nu, M=np.array([[m]]), Sigma=np.array([[sigma]]), Omega=np.array([[omega]])
    )
    x = np.array([[[1.7]], [[-0.4]]])
    stats = estep(x, params, z_form=False)
    w = (nu + 1.0) / ((x[:, 0, 0] - m) ** 2 / omega + sigma)
    assert stats.s_s[0, 0] == pytest.approx(w.sum(), rel=1e-12)
    assert stats.s_sx[0, 0] == pytest.approx((w * x[:, 0, 0]).sum(), rel=1e-12)


def test_estep_z_and_s_forms_agree(rng):
    params = _true_params(rng)
    data = sample_mxvt(params, 15, seed=2)
    z = estep(data, params, z_form=True)
    s = estep(data, params, z_form=False)
    np.testing.assert_allclose(z.s_form()[0], s.s_s, rtol=1e-12)
    np.testing.assert_allclose(s.z_form_stats()[2], z.s_xsx, rtol=1e-12)
    assert z.s_logdet == pytest.approx(s.s_logdet, rel=1e-12)
    assert z.sum_logdet_z == pytest.approx(s.sum_logdet_z, rel=1e-12)


def test_estep_expected_logdet_against_wishart_mc():
    # Conditional on X, the weight matrix is Wishart(kappa, C^-1); check the
    # analytic E(log|S|) against a Monte Carlo average over Wishart draws.
    p, q, nu = 2, 2, 6.0
    params = MxvtParams(
        nu=nu,
        M=np.zeros((p, q)),
        Sigma=np.array([[1.0, 0.3], [0.3, 1.5]]),
        Omega=np.array([[2.0, -0.4], [-0.4, 1.0]]),
    )
    X = sample_mxvt(params, 1, seed=3)
    stats = estep(X, params)
    kappa = nu + p + q - 1
    C, _ = t_bracket(X.data, params)
    draws = sample_wishart(kappa, np.linalg.inv(C[0]), seed=17, size=100_000)
    mc = np.linalg.slogdet(draws)[1]
    assert stats.s_logdet == pytest.approx(mc.mean(), abs=3 * mc.std() / np.sqrt(len(mc)))


def test_estep_shape_mismatch():
    params = MxvtParams(nu=5.0, M=np.zeros((2, 2)), Sigma=np.eye(2), Omega=np.eye(2))
    with pytest.raises(ValueError):
        estep(np.zeros((3, 2, 3)), params)


# ---------------------------------------------------------------------------
# first conditional maximization


def test_cme1_unconstrained_closed_forms(rng):
    params = _true_params(rng, p=2, q=3, nu=7.0)
    data = sample_mxvt(params, 60, seed=4)
    n, p, q = data.n, data.p, data.q
    stats = estep(data, params)
    M, Sigma, Omega = cme1(stats, params.nu, n, p, q)
    s_s, s_sx, s_xsx = stats.s_form()
    np.testing.assert_allclose(M, np.linalg.solve(s_s, s_sx), rtol=1e-10)
    np.testing.assert_allclose(
        Sigma, n * (params.nu + p - 1) * np.linalg.inv(s_s), rtol=1e-10
    )
    A = s_xsx - s_sx.T @ np.linalg.solve(s_s, s_sx)
    np.testing.assert_allclose(Omega, A / (n * p), rtol=1e-10)


def test_cme1_constant_mean(rng):
    params = _true_params(rng, p=2, q=2, nu=6.0)
    data = sample_mxvt(params, 40, seed=5)
    stats = estep(data, params)
    spec = StructureSpec(mean=MeanStructure.CONSTANT)
    M, _, _ = cme1(stats, params.nu, data.n, 2, 2, spec, prev_omega=params.Omega)
    assert np.ptp(M) == pytest.approx(0.0, abs=1e-14)
    # the scalar solves the Omega-weighted normal equation
    s_s, s_sx, _ = stats.s_form()
    w = np.linalg.solve(params.Omega, np.ones(2))
    mu = (np.ones(2) @ s_sx @ w) / (s_s.sum() * w.sum())
    assert M[0, 0] == pytest.approx(mu, rel=1e-10)


# ---------------------------------------------------------------------------
# degrees-of-freedom solve


def test_nu_estimating_function_is_negative_profile_slope(rng):
    # g is increasing, crosses zero exactly where the profile likelihood
    # over nu peaks, and has the opposite sign of the numerical slope
    params = _true_params(rng, nu=8.0)
    data = sample_mxvt(params, 80, seed=6)
    n, p, q = data.n, data.p, data.q
    stats = estep(data, params)
    grid = np.linspace(2.1, 200.0, 60)
    vals = [nu_estimating_function(v, stats, n, p, q) for v in grid]
    assert np.all(np.diff(vals) > 0)

    M, _, Omega = cme1(stats, params.nu, n, p, q)
    z_s, _, _ = stats.z_form_stats()

    def prof_ll(v):
        kap = v + p + q - 1
        Sig = n * (v + p - 1) / kap * np.linalg.inv(z_s)
        return mxvt_logpdf(data.data, MxvtParams(v, M, Sig, Omega)).sum()

    h = 1e-4
    for v in (4.0, 8.0, 20.0):
        slope = (prof_ll(v + h) - prof_ll(v - h)) / (2 * h)
        g = nu_estimating_function(v, stats, n, p, q)
        assert np.sign(g) == -np.sign(slope)


def test_solve_nu_matches_profile_likelihood(rng):
    # the root of the estimating equation must maximize the observed
    # log-likelihood over nu with (M, Sigma*, Omega) from the current stats
    params = _true_params(rng, p=2, q=2, nu=5.0)
    data = sample_mxvt(params, 200, seed=7)
    n, p, q = data.n, data.p, data.q
    stats = estep(data, params)
    M, Sigma, Omega = cme1(stats, params.nu, n, p, q)
    nu_hat, interior = solve_nu(stats, Sigma, n, p, q)
    assert interior

    def obs_ll(v):
        # Sigma rescales with nu through the conditional update
        z_s, _, _ = stats.z_form_stats()
        Sig = n * (v + p - 1) / (v + p + q - 1) * np.linalg.inv(z_s)
        return mxvt_logpdf(data.data, MxvtParams(v, M, Sig, Omega)).sum()

    ll_hat = obs_ll(nu_hat)
    for v in (nu_hat * 0.9, nu_hat * 1.1, nu_hat + 1.0):
        assert ll_hat >= obs_ll(v) - 1e-9


def test_solve_nu_boundary_cases(rng):
    params = _true_params(rng, nu=8.0)
    data = sample_mxvt(params, 100, seed=8)
    stats = estep(data, params)
    n, p, q = data.n, data.p, data.q
    nu_root, interior = solve_nu(stats, None, n, p, q)
    assert interior and 2.0 < nu_root < 1000.0
    # an interval entirely left of the root -> upper bound, not interior
    hi, flag_hi = solve_nu(stats, None, n, p, q, bounds=(2.0, nu_root / 2))
    assert hi == nu_root / 2 and not flag_hi
    lo, flag_lo = solve_nu(stats, None, n, p, q, bounds=(nu_root * 2, 1000.0))
    assert lo == nu_root * 2 and not flag_lo


# ---------------------------------------------------------------------------
# full ECME fit


def test_fit_monotone_loglik(rng):
    for rep in range(8):
        params = _true_params(rng, p=3, q=2, nu=float(rng.uniform(3, 30)))
        data = sample_mxvt(params, 80, seed=100 + rep)
        res = mxvt_fit(data)
        diffs = np.diff(res.log_lik_trace)
        floor = -1e-8 * (1.0 + np.abs(res.log_lik_trace[:-1]))
        assert np.all(diffs >= floor)
        assert res.params.Sigma[0, 0] == pytest.approx(1.0, abs=1e-12)


def test_fit_recovers_nu_and_scatter(rng):
    true = MxvtParams(
        nu=5.0,
        M=np.ones((3, 2)),
        Sigma=random_spd(rng, 3),
        Omega=random_spd(rng, 2),
    )
    data = sample_mxvt(true, 3_000, seed=9)
    res = mxvt_fit(data)
    assert res.converged
    assert res.params.nu == pytest.approx(5.0, abs=0.6)
    np.testing.assert_allclose(res.params.M, true.M, atol=0.1)
    true_n = true.Sigma / true.Sigma[0, 0]
    np.testing.assert_allclose(res.params.Sigma, true_n, rtol=0.1, atol=0.05)
    np.testing.assert_allclose(
        res.params.Omega, true.Omega * true.Sigma[0, 0], rtol=0.1
    )


def test_fit_fixed_nu(rng):
    true = _true_params(rng, nu=6.0)
    data = sample_mxvt(true, 150, seed=10)
    res = mxvt_fit(data, EcmeConfig(nu=6.0))
    assert res.params.nu == 6.0
    assert res.converged
    diffs = np.diff(res.log_lik_trace)
    assert np.all(diffs >= -1e-8 * (1.0 + np.abs(res.log_lik_trace[:-1])))


def test_fit_fixed_nu_beats_wrong_nu(rng):
    true = _true_params(rng, p=2, q=2, nu=4.0)
    data = sample_mxvt(true, 500, seed=11)
    right = mxvt_fit(data, EcmeConfig(nu=4.0))
    wrong = mxvt_fit(data, EcmeConfig(nu=100.0))
    assert right.log_lik > wrong.log_lik


def test_fit_estimated_nu_at_least_fixed_true(rng):
    true = _true_params(rng, p=2, q=3, nu=7.0)
    data = sample_mxvt(true, 300, seed=12)
    free = mxvt_fit(data)
    fixed = mxvt_fit(data, EcmeConfig(nu=7.0))
    assert free.log_lik >= fixed.log_lik - 1e-6


def test_fit_normal_data_pushes_nu_up(rng):
    # near-normal data: nu estimate drifts toward the upper bound and the
    # fit reports the bound instead of claiming convergence
    true = _true_params(rng, p=2, q=2, nu=500.0)
    data = sample_mxvt(true, 200, seed=13)
    res = mxvt_fit(data, EcmeConfig(nu_bounds=(2.0, 40.0), max_iter=300))
    assert res.params.nu == pytest.approx(40.0, abs=1e-3)
    assert res.nu_at_bound
    assert not res.converged


def test_fit_structured_scatter(rng):
    true = MxvtParams(
        nu=6.0,
        M=np.zeros((4, 2)),
        Sigma=Ar1Matrix(dim=4, rho=0.5).full(),
        Omega=np.eye(2),
    )
    data = sample_mxvt(true, 2_000, seed=14)
    cfg = EcmeConfig(structure=StructureSpec(row_scatter=ScatterStructure.AR1))
    res = mxvt_fit(data, cfg)
    assert res.params.Sigma[0, 1] == pytest.approx(0.5, abs=0.05)
    assert res.params.Sigma[1, 2] == pytest.approx(0.5, abs=0.05)
    assert res.params.nu == pytest.approx(6.0, abs=1.2)


def test_fit_vector_case_matches_ecm_oracle(rng):
    # p = 1: the model is a q-variate t. Compare against an independently
    # coded EM for the multivariate t with known df update (fixed nu), where
    # the E-step weight is w_i = (nu + q) / (nu + d_i) under the shape
    # Lambda = Omega / nu and scatter updates are the standard weighted ones.
    q, nu = 3, 5.0
    true = MxvtParams(
        nu=nu, M=rng.standard_normal((1, q)), Sigma=np.eye(1), Omega=random_spd(rng, q)
    )
    data = sample_mxvt(true, 800, seed=15)
    X = data.data[:, 0, :]

    mu = X.mean(axis=0)
    Lam = np.cov(X.T)
    for _ in range(500):
        d = np.einsum("ni,ij,nj->n", X - mu, np.linalg.inv(Lam), X - mu)
        w = (nu + q) / (nu + d)
        mu_new = (w[:, None] * X).sum(axis=0) / w.sum()
        R = X - mu_new
        Lam_new = (w[:, None, None] * np.einsum("ni,nj->nij", R, R)).mean(axis=0)
        if np.abs(Lam_new - Lam).max() < 1e-12 and np.abs(mu_new - mu).max() < 1e-12:
            mu, Lam = mu_new, Lam_new
            break
        mu, Lam = mu_new, Lam_new

    res = mxvt_fit(data, EcmeConfig(nu=nu, tolerance=1e-12, max_iter=2000))
    np.testing.assert_allclose(res.params.M[0], mu, rtol=1e-6, atol=1e-8)
    # our scatter: sigma * Omega relates to the t shape by Lambda = omega/nu
    ours = res.params.Sigma[0, 0] * res.params.Omega / nu
    np.testing.assert_allclose(ours, Lam, rtol=1e-5)


def test_config_validation():
    with pytest.raises(ValueError):
        EcmeConfig(nu=-1.0)
    with pytest.raises(ValueError):
        EcmeConfig(nu_bounds=(0.5, 10.0))
    with pytest.raises(ValueError):
        EcmeConfig(nu_bounds=(10.0, 2.0))
    assert EcmeConfig().estimate_nu
    assert not EcmeConfig(nu=5.0).estimate_nu
