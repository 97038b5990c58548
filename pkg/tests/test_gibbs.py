import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats
from scipy.special import log_ndtr

from shotprobit.exceptions import ChainError, DesignError
from shotprobit.gibbs import (
    ChainConfig, ChainState, PriorConfig, draw_latent, draw_sigma2, draw_theta, draw_w,
    gelman_rubin, initial_state, precompute_theta, run_chain, run_chains,
    sample_truncated_normal, summarize,
)
from shotprobit.ingest import build_design
from shotprobit.kernel import build_kernel
from shotprobit.synthetic import SyntheticSpec, generate


def mills_mean(mu, sigma, positive=True):
    """Mean of N(mu, sigma^2) truncated to (0, inf) (or (-inf, 0])."""
    s = 1.0 if positive else -1.0
    a = -s * mu / sigma
    # phi(a) / (1 - Phi(a)) computed on the log scale
    ratio = np.exp(stats.norm.logpdf(a) - log_ndtr(-a))
    return mu + s * sigma * ratio


@pytest.fixture(scope="module")
def small_fit_inputs():
    spec = SyntheticSpec(n_shots=120, seed=11, window=(-20.0, 1.0, 20.0, 30.0))
    recs, truth = generate(spec)
    design = build_design(recs, "all", columns=spec.columns)
    return design, build_kernel(design.coords, spec.true_phi), truth


class TestTruncatedNormal:
    def test_half_normal(self, rng):
        z = sample_truncated_normal(0.0, 1.0, "positive", rng, size=100_000)
        assert abs(z.mean() - np.sqrt(2 / np.pi)) < 0.01
        assert abs(z.var() - (1 - 2 / np.pi)) < 0.02

    def test_far_mean(self, rng):
        z = sample_truncated_normal(5.0, 1.0, "positive", rng, size=100_000)
        assert abs(z.mean() - 5.0) < 0.01

    @pytest.mark.parametrize("mu", [-8.0, -15.0, -40.0])
    def test_tail(self, rng, mu):
        z = sample_truncated_normal(mu, 1.0, "positive", rng, size=50_000)
        assert np.all(np.isfinite(z)) and np.all(z > 0)
        np.testing.assert_allclose(z.mean(), mills_mean(mu, 1.0), rtol=0.02)

    def test_negative_side_mirror(self, rng):
        z = sample_truncated_normal(1.3, 2.0, "negative", rng, size=100_000)
        assert np.all(z <= 0)
        np.testing.assert_allclose(z.mean(), mills_mean(1.3, np.sqrt(2.0), False), rtol=0.01)

    @pytest.mark.parametrize("mu, positive", [(0.7, True), (-2.5, True), (3.9, False), (-1.0, False)])
    def test_ks(self, rng, mu, positive):
        sig = 1.5
        z = sample_truncated_normal(mu, sig**2, "positive" if positive else "negative", rng,
                                    size=20_000)
        lo, hi = ((0 - mu) / sig, np.inf) if positive else (-np.inf, (0 - mu) / sig)
        ref = stats.truncnorm(lo, hi, loc=mu, scale=sig)
        assert stats.kstest(z, ref.cdf).pvalue > 0.01

    @given(st.floats(-50, 50), st.floats(1e-4, 100), st.booleans())
    @settings(max_examples=200)
    def test_support(self, mu, sigma2, positive):
        z = sample_truncated_normal(mu, sigma2, "positive" if positive else "negative",
                                    np.random.default_rng(0), size=20)
        assert np.all(np.isfinite(z))
        assert np.all(z > 0) if positive else np.all(z <= 0)

    def test_bad_inputs(self, rng):
        with pytest.raises(ValueError):
            sample_truncated_normal(0.0, 0.0, "positive", rng)
        with pytest.raises(ValueError):
            sample_truncated_normal(0.0, 1.0, "up", rng)


class TestConditionals:
    def test_sigma2_ig_mean(self, rng):
        X = np.ones((5, 1))
        theta = np.array([0.4])
        w = np.zeros(5)
        r = X @ theta + w
        k = build_kernel(np.column_stack([np.arange(5.0), np.ones(5)]), 0.5)
        prior = PriorConfig(3.0, 2.0)
        d = np.array([draw_sigma2(r, X, theta, w, k, prior, rng) for _ in range(10_000)])
        np.testing.assert_allclose(d.mean(), 2.0 / (3.0 + 5 - 1), rtol=0.02)

    def test_sigma2_rate_scalar(self):
        pts = np.array([[0.0, 3.0], [4.0, 7.0], [-2.0, 10.0]])
        k = build_kernel(pts, 0.3)
        X = np.array([[1.0, 0.2], [1.0, -1.0], [1.0, 0.5]])
        theta = np.array([0.3, -0.7])
        w = np.array([0.1, -0.4, 0.25])
        r = np.array([0.9, -1.2, 0.4])
        prior = PriorConfig(2.5, 1.5)
        # scalar recomputation of the rate
        res = [r[i] - sum(X[i, j] * theta[j] for j in range(2)) - w[i] for i in range(3)]
        S = [[np.exp(-0.3 * np.hypot(*(pts[i] - pts[j]))) for j in range(3)] for i in range(3)]
        Sinv = np.linalg.inv(np.array(S))
        quad = sum(w[i] * Sinv[i, j] * w[j] for i in range(3) for j in range(3))
        rate = 1.5 + 0.5 * sum(e * e for e in res) + 0.5 * quad
        got = draw_sigma2(r, X, theta, w, k, prior, np.random.default_rng(9))
        expect = rate / np.random.default_rng(9).gamma(2.5 + 3)
        np.testing.assert_allclose(got, expect, rtol=1e-12)

    def test_sigma2_large_n(self, rng):
        n = 2000
        pts = np.column_stack([np.arange(n) * 1.0, np.zeros(n) + 1])
        k = build_kernel(pts, 5.0)
        X = np.ones((n, 1))
        theta = np.zeros(1)
        w = 0.3 * rng.standard_normal(n)
        r = w + rng.standard_normal(n)
        d = np.array([draw_sigma2(r, X, theta, w, k, PriorConfig(1.0001, 1e-9), rng)
                      for _ in range(50)])
        scale = (np.sum((r - w) ** 2) + w @ k.Sigma_w_inv @ w) / (2 * n)
        assert np.all(np.isfinite(d)) and np.all(d > 0)
        np.testing.assert_allclose(d.mean(), scale, rtol=0.05)

    def test_theta_zero_variance(self, rng):
        X = rng.standard_normal((20, 3))
        r, w = rng.standard_normal(20), rng.standard_normal(20)
        pre = precompute_theta(X)
        t = draw_theta(r, w, pre, 1e-20, rng)
        np.testing.assert_allclose(t, np.linalg.lstsq(X, r - w, rcond=None)[0], atol=1e-8)

    def test_theta_covariance(self, rng):
        X = np.column_stack([np.ones(30), np.linspace(-1, 2, 30)])
        pre = precompute_theta(X)
        r, w = rng.standard_normal(30), np.zeros(30)
        d = np.array([draw_theta(r, w, pre, 0.7, rng) for _ in range(10_000)])
        np.testing.assert_allclose(np.cov(d.T), 0.7 * np.linalg.inv(X.T @ X), rtol=0.05)

    def test_theta_orthonormal(self, rng):
        Q, _ = np.linalg.qr(rng.standard_normal((10, 3)))
        r, w = rng.standard_normal(10), rng.standard_normal(10)
        pre = precompute_theta(Q)
        np.testing.assert_allclose(pre.XtX_inv @ (Q.T @ (r - w)), Q.T @ (r - w), atol=1e-12)

    def test_collinear_named(self):
        X = np.column_stack([np.ones(6), np.arange(6.0), 2 * np.arange(6.0)])
        with pytest.raises(DesignError, match="c2"):
            precompute_theta(X, ["c0", "c1", "c2"])

    def test_w_zero_mean_cov(self, rng):
        pts = np.array([[0.0, 2.0], [3.0, 4.0], [1.0, 9.0]])
        k = build_kernel(pts, 0.2)
        X = np.ones((3, 1))
        theta = np.array([0.5])
        r = X @ theta
        d = np.array([draw_w(r, X, theta, k, 1.3, rng) for _ in range(20_000)])
        np.testing.assert_allclose(d.mean(axis=0), 0, atol=0.02)
        np.testing.assert_allclose(np.cov(d.T), 1.3 * k.M, atol=0.03)

    def test_w_mean_two_by_two(self):
        pts = np.array([[0.0, 5.0], [0.0, 15.0]])
        k = build_kernel(pts, 0.1)
        c = np.exp(-1.0)
        # (I + S^-1)^-1 for S = [[1, c], [c, 1]], written out by hand
        det = 1 - c * c
        inv = np.array([[1, -c], [-c, 1]]) / det
        A = np.eye(2) + inv
        M = np.array([[A[1, 1], -A[0, 1]], [-A[1, 0], A[0, 0]]]) / (A[0, 0] * A[1, 1] - A[0, 1] ** 2)
        np.testing.assert_allclose(k.M, M, rtol=1e-12)
        X, theta, r = np.ones((2, 1)), np.array([0.2]), np.array([1.0, -0.4])
        mean = draw_w(r, X, theta, k, 1e-30, np.random.default_rng(0))
        np.testing.assert_allclose(mean, M @ (r - 0.2), atol=1e-12)

    def test_w_large_phi(self):
        pts = np.array([[0.0, 5.0], [10.0, 15.0], [-8.0, 30.0]])
        k = build_kernel(pts, 50.0)
        np.testing.assert_allclose(k.M, 0.5 * np.eye(3), atol=1e-12)

    def test_latent_signs(self, rng):
        Y = rng.integers(0, 2, 500)
        X = rng.standard_normal((500, 2))
        r = draw_latent(Y, X, np.array([3.0, -2.0]), rng.standard_normal(500), 0.8, rng)
        assert np.all(r[Y == 1] > 0) and np.all(r[Y == 0] <= 0)


class TestChain:
    def test_deterministic(self, small_fit_inputs):
        design, kernel, _ = small_fit_inputs
        cfg = ChainConfig(50, 20, 2, seed=5)
        a, b = run_chain(design, kernel, PriorConfig(), cfg), run_chain(design, kernel, PriorConfig(), cfg)
        np.testing.assert_array_equal(a.theta_draws, b.theta_draws)
        np.testing.assert_array_equal(a.w_draws, b.w_draws)
        np.testing.assert_array_equal(a.sigma2_draws, b.sigma2_draws)
        assert a.n_sweeps == 50 + 20 * 2 and a.n_samples == 20

    def test_shapes_and_signs(self, small_fit_inputs):
        design, kernel, _ = small_fit_inputs
        d = run_chain(design, kernel, PriorConfig(), ChainConfig(30, 10, 1, 1))
        assert d.theta_draws.shape == (10, design.p)
        assert d.w_draws.shape == (10, design.n)
        assert np.all(d.sigma2_draws > 0)
        np.testing.assert_array_equal(d.r_last > 0, design.Y > 0.5)
        header, table = d.table()
        assert header[-1] == "sigma2" and table.shape == (10, design.p + 1)

    def test_improper_prior_warns(self, small_fit_inputs):
        design, kernel, _ = small_fit_inputs
        with pytest.warns(RuntimeWarning, match="improper"):
            run_chain(design, kernel, PriorConfig(2.0, 1.0), ChainConfig(1, 1))
        with warnings.catch_warnings():
            warnings.simplefilter("error")
            run_chain(design, kernel, PriorConfig(), ChainConfig(1, 1))

    def test_nonfinite_aborts(self, small_fit_inputs):
        design, kernel, _ = small_fit_inputs
        init = initial_state(design.Y, design.p)
        bad = ChainState(init.r, np.full(design.p, np.nan), init.w, 1.0)
        with pytest.raises(ChainError) as exc:
            run_chain(design, kernel, PriorConfig(), ChainConfig(5, 5), init=bad)
        assert exc.value.sweep == 0

    def test_kernel_mismatch(self, small_fit_inputs):
        design, _, _ = small_fit_inputs
        with pytest.raises(ValueError):
            run_chain(design, build_kernel(design.coords[:5], 0.1))

    def test_stationary_from_truth(self, small_fit_inputs):
        design, kernel, truth = small_fit_inputs
        init = ChainState(truth.r.copy(), truth.theta.copy(), truth.w.copy(), 1.0)
        d = run_chain(design, kernel, PriorConfig(), ChainConfig(0, 2000, 1, 3), init=init)
        # first vs second half of the trace, batch-means standard error
        for j in range(design.p):
            x = d.theta_draws[:, j]
            batches = x.reshape(20, -1).mean(axis=1)
            se = batches.std(ddof=1) / np.sqrt(10)
            z = (batches[:10].mean() - batches[10:].mean()) / (np.sqrt(2) * se)
            assert abs(z) < 4.5

    def test_run_chains_and_rhat(self, small_fit_inputs):
        design, kernel, _ = small_fit_inputs
        chains = run_chains(design, kernel, PriorConfig(), ChainConfig(300, 200, 1, 2), n_chains=2)
        assert not np.array_equal(chains[0].theta_draws, chains[1].theta_draws)
        rhat = gelman_rubin([c.theta_draws for c in chains])
        assert rhat.shape == (design.p,) and np.all(rhat < 1.5)

    def test_config_validation(self):
        with pytest.raises(ValueError):
            PriorConfig(1.0, 1.0)
        with pytest.raises(ValueError):
            PriorConfig(2.0, 0.0)
        with pytest.raises(ValueError):
            ChainConfig(n_samples=0)
        with pytest.raises(ValueError):
            ChainConfig(thin=0)


class TestSummary:
    def _draws(self, table):
        from shotprobit.gibbs import PosteriorDraws
        return PosteriorDraws(table[:, :-1], table[:, -1], np.zeros((len(table), 1)), None,
                              tuple(f"b{j}" for j in range(table.shape[1] - 1)))

    def test_constant(self):
        s = summarize(self._draws(np.full((50, 3), 0.7)))
        np.testing.assert_allclose(s.se, 0.0, atol=1e-15)
        np.testing.assert_allclose(s.lower, s.upper)

    def test_normal_interval(self, rng):
        s = summarize(self._draws(np.column_stack([rng.standard_normal(10_000), np.ones(10_000)])))
        assert abs(s.lower[0] + 1.96) < 0.1 and abs(s.upper[0] - 1.96) < 0.1
        assert s.names == ["b0", "sigma2"]

    @given(st.lists(st.floats(-1e3, 1e3), min_size=2, max_size=50))
    def test_interval_contains_mean(self, xs):
        t = np.column_stack([xs, np.ones(len(xs))])
        s = summarize(self._draws(t))
        assert s.lower[0] - 1e-9 <= s.mean[0] <= s.upper[0] + 1e-9

    def test_too_few(self):
        with pytest.raises(ValueError):
            summarize(self._draws(np.ones((1, 2))))
