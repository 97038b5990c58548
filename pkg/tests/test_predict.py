import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.special import ndtr

from shotprobit.exceptions import DesignError
from shotprobit.geometry import PitchLocation
from shotprobit.gibbs import ChainConfig, PosteriorDraws, PriorConfig, run_chain
from shotprobit.glm import fit_glm, predict_glm
from shotprobit.ingest import build_design
from shotprobit.kernel import build_kernel, correlation
from shotprobit.predict import (
    GridSpec, PredictionRequest, heatmap_grid, krige_moments, krige_w, kriging_weights,
    predict_many, predict_probability, write_heatmap_csv, write_pgm,
)
from shotprobit.synthetic import SyntheticSpec, generate

COLS = ("intercept", "log_distance", "cos_angle", "home")


def joint_conditional(coords, s_new, phi, w, sigma2):
    """Condition the (N+1)-dim Gaussian on the first N coordinates, by blocks."""
    pts = np.vstack([coords, np.atleast_2d(s_new)])
    J = sigma2 * correlation(pts, pts, phi)
    n = len(coords)
    S11, S12, S22 = J[:n, :n], J[:n, n:], J[n:, n:]
    mean = S12.T @ np.linalg.solve(S11, w)
    var = S22 - S12.T @ np.linalg.solve(S11, S12)
    return float(mean[0]), float(var[0, 0])


def fake_draws(theta, sigma2, w, cols=COLS):
    theta = np.atleast_2d(theta)
    s = theta.shape[0]
    return PosteriorDraws(theta, np.broadcast_to(sigma2, (s,)).astype(float),
                          np.atleast_2d(w).astype(float), None, cols)


@pytest.fixture
def kern():
    pts = np.array([[-5.0, 8.0], [4.0, 12.0], [0.0, 20.0]])
    return build_kernel(pts, 0.15)


class TestKriging:
    def test_block_oracle(self, kern, rng):
        w = rng.standard_normal(3)
        for s in rng.uniform([-30, 0], [30, 50], size=(50, 2)):
            m, v = krige_moments(kern, w, 1.7, s)
            mo, vo = joint_conditional(kern.coords, s, kern.phi, w, 1.7)
            assert abs(m - mo) < 1e-10 and abs(v - vo) < 1e-10

    def test_interpolates(self, kern):
        w = np.array([0.3, -1.1, 0.8])
        m, v = krige_moments(kern, w, 2.0, PitchLocation(4.0, 12.0))
        np.testing.assert_allclose(m, -1.1, atol=1e-12)
        assert 0 <= v < 1e-10

    def test_far_reverts(self, kern):
        m, v = krige_moments(kern, np.array([0.3, -1.1, 0.8]), 2.0, (0.0, 1e4))
        assert abs(m) < 1e-12 and v == pytest.approx(2.0)

    def test_continuity(self, kern):
        w = np.array([0.3, -1.1, 0.8])
        gaps = [abs(krige_moments(kern, w, 1.0, (4.0 + h, 12.0))[0] + 1.1)
                for h in (1.0, 0.1, 0.01, 0.001)]
        assert all(a > b for a, b in zip(gaps, gaps[1:])) and gaps[-1] < 1e-2

    @settings(max_examples=50, deadline=None)
    @given(st.floats(-40, 40), st.floats(0, 60), st.floats(0.1, 5))
    def test_variance_bounds(self, x, y, sigma2):
        pts = np.array([[-5.0, 8.0], [4.0, 12.0], [0.0, 20.0], [10.0, 3.0]])
        k = build_kernel(pts, 0.15)
        _, v = krige_moments(k, np.zeros(4), sigma2, (x, y))
        assert -1e-12 <= v <= sigma2 * (1 + 1e-12)

    def test_krige_w_draws(self, kern, rng):
        w = np.array([0.3, -1.1, 0.8])
        d = np.array([krige_w(kern, w, 1.5, (2.0, 10.0), rng) for _ in range(20_000)])
        m, v = joint_conditional(kern.coords, (2.0, 10.0), kern.phi, w, 1.5)
        assert abs(d.mean() - m) < 4 * np.sqrt(v / d.size)
        np.testing.assert_allclose(d.var(), v, rtol=0.05)

    def test_weights_shapes(self, kern):
        A, q = kriging_weights(kern, np.zeros((5, 2)) + [1.0, 5.0])
        assert A.shape == (5, 3) and q.shape == (5,)


class TestPredict:
    def test_zero_model_half(self, kern):
        d = fake_draws(np.zeros((4, 4)), 1.0, np.zeros((4, 3)))
        res = predict_probability(d, kern, PredictionRequest(PitchLocation(3, 9), {"home": 1}))
        assert res.p_hat == 0.5
        np.testing.assert_allclose(res.p_draws.mean(), res.p_hat)

    @pytest.mark.parametrize("method", ["marginal", "draw"])
    def test_known_theta_zero_field(self, kern, method):
        theta = np.array([0.4, -0.3, 1.1, 0.2])
        d = fake_draws(theta, 2.0, np.zeros(3))
        loc = PitchLocation(4.0, 12.0)  # a training point, so w(s') = w_j = 0 exactly
        res = predict_probability(d, kern, PredictionRequest(loc, {"home": 1}),
                                  rng=np.random.default_rng(0), method=method)
        x = np.array([1.0, np.log(np.hypot(4, 12)), 12 / np.hypot(4, 12), 1.0])
        np.testing.assert_allclose(res.p_hat, ndtr(x @ theta / np.sqrt(2.0)), rtol=0, atol=1e-8)

    def test_marginal_is_draw_average(self, kern):
        # Rao-Blackwellised form equals the expectation of the draw form
        theta = np.array([0.4, -0.3, 1.1, 0.2])
        d = fake_draws(theta, 1.3, np.array([0.5, -0.2, 0.9]))
        req = PredictionRequest(PitchLocation(-1.0, 15.0), {"home": 0})
        exact = predict_probability(d, kern, req).p_hat
        mc = predict_probability(d.__class__(*[np.repeat(a, 40_000, axis=0) if i < 3 else a
                                               for i, a in enumerate(d.__dict__.values())]),
                                 kern, req, rng=np.random.default_rng(1), method="draw").p_hat
        assert abs(mc - exact) < 5e-3

    @settings(max_examples=20, deadline=None)
    @given(st.permutations(list(range(6))))
    def test_order_invariant(self, perm):
        rng = np.random.default_rng(5)
        pts = np.array([[-5.0, 8.0], [4.0, 12.0], [0.0, 20.0]])
        k = build_kernel(pts, 0.15)
        d = fake_draws(rng.standard_normal((6, 4)), rng.uniform(0.5, 2, 6), rng.standard_normal((6, 3)))
        X = np.array([[1.0, 2.0, 0.9, 1.0], [1.0, 3.0, 0.5, 0.0]])
        c = np.array([[1.0, 9.0], [-6.0, 25.0]])
        p = predict_many(d, k, c, X)
        dp = fake_draws(d.theta_draws[perm], d.sigma2_draws[perm], d.w_draws[perm])
        np.testing.assert_allclose(predict_many(dp, k, c, X), p, rtol=1e-13)

    def test_column_mismatch(self, kern):
        d = fake_draws(np.zeros(4), 1.0, np.zeros(3))
        with pytest.raises(DesignError):
            predict_many(d, kern, [[1.0, 5.0]], np.ones((1, 3)))
        with pytest.raises(DesignError):
            predict_probability(d, kern, PredictionRequest(PitchLocation(1, 5), {}))

    def test_sample_outcome(self, kern):
        d = fake_draws(np.tile([5.0, 0, 0, 0], (30, 1)), 1.0, np.zeros((30, 3)))
        res = predict_probability(d, kern, PredictionRequest(PitchLocation(1, 5), {"home": 0}),
                                  rng=np.random.default_rng(2), sample_outcome=True)
        assert res.y_draw.shape == (30,) and set(np.unique(res.y_draw)) <= {0, 1}
        assert res.y_draw.mean() > 0.9


class TestHeatmap:
    def test_small_grid(self, kern):
        d = fake_draws(np.array([0.4, -0.3, 1.1, 0.2]), 1.0, np.array([0.5, -0.2, 0.9]))
        xs, ys, P = heatmap_grid(d, kern, GridSpec(-1, 1, 5, 7, 1.0), {"home": 1})
        assert P.shape == (2, 2) and np.all((P >= 0) & (P <= 1))
        np.testing.assert_allclose(xs, [-0.5, 0.5])

    def test_zero_surface(self, kern):
        d = fake_draws(np.zeros(4), 1.0, np.zeros(3))
        _, _, P = heatmap_grid(d, kern, GridSpec(-3, 3, 1, 4, 1.0), {"home": 0})
        assert np.all(P == 0.5)

    def test_beyond_half_line(self, kern):
        d = fake_draws(np.zeros(4), 1.0, np.zeros(3))
        with pytest.raises(ValueError, match="half line"):
            heatmap_grid(d, kern, GridSpec(y_max=70), {"home": 0})

    def test_outputs(self, tmp_path):
        P = np.array([[0.0, 0.5], [1.0, 0.25]])
        write_heatmap_csv([0.5, 1.5], [0.5, 1.5], P, tmp_path / "h.csv")
        lines = (tmp_path / "h.csv").read_text().splitlines()
        assert lines[0] == "x,y,p_hat" and lines[2] == "1.5,0.5,0.5" and len(lines) == 5
        write_pgm(P, tmp_path / "h.pgm")
        assert (tmp_path / "h.pgm").read_text().split("\n")[:5] == \
            ["P2", "2 2", "255", "255 64", "0 128"]


@pytest.fixture(scope="module")
def synthetic_split():
    spec = SyntheticSpec(n_shots=700, seed=21, columns=COLS, true_theta=(1.2, -0.7, 0.9, 0.3),
                         window=(-25.0, 1.0, 25.0, 35.0), true_phi=0.1)
    recs, truth = generate(spec)
    design = build_design(recs, "all", columns=COLS)
    idx = np.random.default_rng(0).permutation(design.n)
    train, test = design.take(np.sort(idx[200:])), design.take(np.sort(idx[:200]))
    kernel = build_kernel(train.coords, 0.1)
    draws = run_chain(train, kernel, PriorConfig(), ChainConfig(1500, 300, 1, 4))
    return train, test, kernel, draws, truth.p_true[np.sort(idx[:200])]


def test_beats_independent_probit(synthetic_split):
    train, test, kernel, draws, p_true = synthetic_split
    p_sp = predict_many(draws, kernel, test.coords, test.X)
    p_gl = predict_glm(fit_glm(train), test.X)
    assert np.mean(np.abs(p_sp - p_true)) < np.mean(np.abs(p_gl - p_true))


def test_distance_monotone_heatmap(synthetic_split):
    _, _, kernel, draws, _ = synthetic_split
    near = predict_probability(draws, kernel, PredictionRequest(PitchLocation(0, 6), {"home": 0}))
    far = predict_probability(draws, kernel, PredictionRequest(PitchLocation(0, 30), {"home": 0}))
    assert near.p_hat >= far.p_hat
