import numpy as np
import pytest
import statsmodels.api as sm
from scipy import stats
from scipy.special import expit, ndtr, ndtri

from shotprobit.exceptions import DesignError
from shotprobit.glm import fit_glm, predict_glm
from shotprobit.ingest import EncodedDesign


def design(X, y, names=None):
    X = np.asarray(X, dtype=float)
    names = names or tuple(f"x{j}" for j in range(X.shape[1]))
    return EncodedDesign(X, np.asarray(y, dtype=float), np.zeros((len(y), 2)), names, "all")


@pytest.fixture(scope="module")
def probit_data():
    rng = np.random.default_rng(17)
    n = 2000
    X = np.column_stack([np.ones(n), rng.standard_normal(n), rng.integers(0, 2, n)])
    beta = np.array([-0.4, 0.8, 0.5])
    y = (X @ beta + rng.standard_normal(n) > 0).astype(float)
    return X, y, beta


@pytest.mark.parametrize("k, n", [(7, 20), (1, 9), (50, 60)])
def test_intercept_only(k, n):
    y = np.r_[np.ones(k), np.zeros(n - k)]
    fp = fit_glm(design(np.ones((n, 1)), y), "probit")
    np.testing.assert_allclose(fp.coefficients[0], ndtri(k / n), atol=1e-9)
    fl = fit_glm(design(np.ones((n, 1)), y), "logit")
    np.testing.assert_allclose(fl.coefficients[0], np.log(k / (n - k)), atol=1e-9)
    assert fp.converged and fl.converged


def test_recovery_within_3se(probit_data):
    X, y, beta = probit_data
    f = fit_glm(design(X, y))
    assert np.all(np.abs(f.coefficients - beta) < 3 * f.standard_errors)


@pytest.mark.parametrize("link, family", [
    ("probit", sm.families.Binomial(sm.families.links.Probit())),
    ("logit", sm.families.Binomial()),
])
def test_matches_statsmodels(probit_data, link, family):
    X, y, _ = probit_data
    f = fit_glm(design(X, y), link)
    ref = sm.GLM(y, X, family=family).fit(tol=1e-12)
    np.testing.assert_allclose(f.coefficients, ref.params, rtol=1e-7)
    # statsmodels reports expected-information SEs; equal for logit, close for probit
    np.testing.assert_allclose(f.standard_errors, ref.bse, rtol=2e-2 if link == "probit" else 1e-7)


def test_observed_information_se(probit_data):
    X, y, _ = probit_data
    f = fit_glm(design(X, y))
    # numerical Hessian of the log likelihood at the optimum
    def ll(b):
        q = 2 * y - 1
        return np.sum(stats.norm.logcdf(q * (X @ b)))
    h, p = 1e-4, X.shape[1]
    H = np.empty((p, p))
    for i in range(p):
        for j in range(p):
            e_i, e_j = np.eye(p)[i] * h, np.eye(p)[j] * h
            b = f.coefficients
            H[i, j] = (ll(b + e_i + e_j) - ll(b + e_i - e_j) - ll(b - e_i + e_j)
                       + ll(b - e_i - e_j)) / (4 * h * h)
    np.testing.assert_allclose(f.standard_errors, np.sqrt(np.diag(np.linalg.inv(-H))), rtol=1e-4)


@pytest.mark.parametrize("link", ["probit", "logit"])
def test_score_equations_and_deviance(probit_data, link):
    X, y, _ = probit_data
    f = fit_glm(design(X, y), link)
    eta = X @ f.coefficients
    if link == "logit":
        g = X.T @ (y - expit(eta))
    else:
        q = 2 * y - 1
        g = X.T @ (q * stats.norm.pdf(eta) / ndtr(q * eta))
    assert np.linalg.norm(g) < 1e-8
    assert f.converged and f.iterations <= 100
    assert np.all(np.diff(f.deviance_trace) <= 1e-9)


def test_separation_flagged():
    x = np.linspace(-1, 1, 40)
    X = np.column_stack([np.ones(40), x])
    f = fit_glm(design(X, (x > 0).astype(float)))
    assert f.separation
    assert np.all(np.diff(f.deviance_trace) <= 1e-9)


def test_rank_deficient():
    X = np.column_stack([np.ones(10), np.arange(10.0), 2 * np.arange(10.0)])
    with pytest.raises(DesignError):
        fit_glm(design(X, np.arange(10) % 2))


def test_predict(probit_data):
    X, y, _ = probit_data
    f = fit_glm(design(X, y))
    np.testing.assert_allclose(predict_glm(f, X), ndtr(X @ f.coefficients), rtol=1e-12)
    f.coefficients = np.zeros(3)
    assert np.all(predict_glm(f, X[:5]) == 0.5)
    with pytest.raises(DesignError):
        predict_glm(f, X[:, :2])


def test_links_agree():
    rng = np.random.default_rng(2)
    n = 1000
    X = np.column_stack([np.ones(n), rng.standard_normal((n, 2))])
    y = (X @ [0.0, 1.0, -0.5] + rng.standard_normal(n) > 0).astype(float)
    d = design(X, y)
    pp = predict_glm(fit_glm(d, "probit"), X)
    pl = predict_glm(fit_glm(d, "logit"), X)
    assert stats.spearmanr(pp, pl)[0] > 0.99


def test_bad_link():
    with pytest.raises(ValueError):
        fit_glm(design(np.ones((3, 1)), [0, 1, 1]), "cloglog")
