"""Independent-error binary regression (probit or logit) by maximum likelihood."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit, log_ndtr, ndtr

from .exceptions import DesignError

GRAD_TOL = 1e-8
MAX_ITER = 100


@dataclass
class GlmFit:
    coefficients: np.ndarray
    standard_errors: np.ndarray
    link: str
    converged: bool
    iterations: int
    column_names: tuple = ()
    separation: bool = False
    deviance_trace: list = field(default_factory=list)

    @property
    def z_values(self):
        return self.coefficients / self.standard_errors

    @property
    def p_values(self):
        return 2.0 * ndtr(-np.abs(self.z_values))


def _loglik_parts(X, y, beta, link):
    eta = X @ beta
    if link == "probit":
        q = 2.0 * y - 1.0
        ll = log_ndtr(q * eta)
        lam = q * np.exp(-0.5 * eta**2 - 0.5 * np.log(2 * np.pi) - ll)
        weight = lam * (lam + eta)
        grad = X.T @ lam
    else:
        p = expit(eta)
        ll = y * eta - np.logaddexp(0.0, eta)
        weight = p * (1.0 - p)
        grad = X.T @ (y - p)
    hess = (X * weight[:, None]).T @ X  # observed information
    return float(ll.sum()), grad, hess


def fit_glm(design, link: str = "probit", max_iter: int = MAX_ITER, tol: float = GRAD_TOL) -> GlmFit:
    """Newton-Raphson with step halving on the exact log likelihood.

    ``design`` is an EncodedDesign (or anything with ``X``, ``Y`` and
    ``column_names``). Stops when the gradient norm drops below ``tol``.
    Non-convergence within ``max_iter`` steps, typically caused by
    separation, is reported on the result rather than raised.
    """
    if link not in ("probit", "logit"):
        raise ValueError(f"unknown link {link!r}")
    X = np.asarray(design.X, dtype=float)
    y = np.asarray(design.Y, dtype=float)
    names = tuple(getattr(design, "column_names", ()))
    if np.linalg.matrix_rank(X) < X.shape[1]:
        raise DesignError("rank-deficient design")

    beta = np.zeros(X.shape[1])
    ll, grad, hess = _loglik_parts(X, y, beta, link)
    trace = [-2.0 * ll]
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        try:
            step = np.linalg.solve(hess, grad)
        except np.linalg.LinAlgError:
            break
        t = 1.0
        while True:
            cand = beta + t * step
            ll_new, g_new, h_new = _loglik_parts(X, y, cand, link)
            if ll_new >= ll - 1e-12 or t < 1e-10:
                break
            t *= 0.5
        beta, ll, grad, hess = cand, ll_new, g_new, h_new
        trace.append(-2.0 * ll)
        if np.linalg.norm(grad) < tol:
            converged = True
            break

    try:
        cov = np.linalg.inv(hess)
        se = np.sqrt(np.clip(np.diag(cov), 0.0, None))
    except np.linalg.LinAlgError:
        se = np.full(X.shape[1], np.inf)
    separation = (not converged) or bool(np.max(np.abs(beta)) > 30)
    return GlmFit(beta, se, link, converged, it, names, separation, trace)


def predict_glm(fit: GlmFit, X_new) -> np.ndarray:
    X_new = np.atleast_2d(np.asarray(X_new, dtype=float))
    if X_new.shape[1] != fit.coefficients.shape[0]:
        raise DesignError(
            f"X_new has {X_new.shape[1]} columns, fit has {fit.coefficients.shape[0]}"
        )
    eta = X_new @ fit.coefficients
    return ndtr(eta) if fit.link == "probit" else expit(eta)
