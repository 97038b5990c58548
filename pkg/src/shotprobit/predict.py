"""Posterior-predictive conversion probabilities at new pitch locations."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtr

from .exceptions import DesignError
from .geometry import GeometryConfig, PitchLocation
from .gibbs import PosteriorDraws
from .ingest import design_row
from .kernel import SpatialKernel, cross_covariance

NEG_VAR_TOL = 1e-10


@dataclass
class PredictionRequest:
    location: PitchLocation
    covariates: dict = field(default_factory=dict)


@dataclass
class PredictionResult:
    p_hat: float
    p_draws: np.ndarray | None = None
    y_draw: np.ndarray | None = None


def kriging_weights(kernel: SpatialKernel, coords):
    """Weights ``A = C Sigma_w^{-1}`` and unit-scale variances ``1 - rowsum(A * C)``.

    ``C`` is the (m, N) cross-correlation between ``coords`` and the kernel
    locations. The kriged mean for draw ``w`` is ``A @ w`` and its variance
    ``sigma2 * q``.
    """
    C = cross_covariance(kernel, np.asarray(coords, dtype=float).reshape(-1, 2))
    A = kernel.solve(C.T).T
    q = 1.0 - np.einsum("ij,ij->i", A, C)
    if np.any(q < -NEG_VAR_TOL):
        raise ValueError(f"negative kriging variance {q.min():.3e}")
    return A, np.maximum(q, 0.0)


def krige_moments(kernel: SpatialKernel, w, sigma2: float, s_new):
    """Conditional mean and variance of ``w(s_new)`` given the field ``w``."""
    A, q = kriging_weights(kernel, _xy(s_new))
    return float(A[0] @ w), float(sigma2 * q[0])


def krige_w(kernel: SpatialKernel, w_draw, sigma2_draw: float, s_new, rng) -> float:
    """Draw ``w(s_new) | w ~ N(c' Sigma^{-1} w, sigma2 (1 - c' Sigma^{-1} c))``."""
    mean, var = krige_moments(kernel, w_draw, sigma2_draw, s_new)
    return mean + np.sqrt(var) * rng.standard_normal()


def _xy(s):
    if hasattr(s, "x") and hasattr(s, "y"):
        return (float(s.x), float(s.y))
    return tuple(np.asarray(s, dtype=float).ravel()[:2])


def predict_many(draws: PosteriorDraws, kernel: SpatialKernel, coords, X_new,
                 rng=None, method: str = "marginal", return_draws: bool = False,
                 chunk: int = 512):
    """Posterior-mean conversion probability for many new shots.

    Parameters
    ----------
    draws, kernel
        Output of one fit; the kernel must be built on the training locations.
    coords : (m, 2) array
    X_new : (m, p) array
        Covariate rows in the fitted column order.
    method : {"marginal", "draw"}
        ``"marginal"`` integrates the kriged ``w(s')`` analytically per draw,
        ``p = Phi((x'theta + mu) / sqrt(sigma2 + var))``.
        ``"draw"`` samples ``w(s')`` per draw and uses
        ``p = Phi((x'theta + w(s')) / sigma)``; it needs ``rng``.
    return_draws : bool
        Also return the (S, m) matrix of per-draw probabilities.
    """
    coords = np.asarray(coords, dtype=float).reshape(-1, 2)
    X_new = np.atleast_2d(np.asarray(X_new, dtype=float))
    if X_new.shape[1] != draws.theta_draws.shape[1]:
        raise DesignError(
            f"covariate rows have {X_new.shape[1]} columns, fit has {draws.theta_draws.shape[1]}"
        )
    if X_new.shape[0] != coords.shape[0]:
        raise ValueError("coords and X_new must have the same number of rows")
    if method not in ("marginal", "draw"):
        raise ValueError(f"unknown method {method!r}")
    if method == "draw" and rng is None:
        raise ValueError("method='draw' needs an rng")

    sig2 = draws.sigma2_draws[:, None]
    m = coords.shape[0]
    p_hat = np.empty(m)
    per_draw = np.empty((draws.n_samples, m)) if return_draws else None
    for start in range(0, m, chunk):
        sl = slice(start, min(m, start + chunk))
        A, q = kriging_weights(kernel, coords[sl])
        mu = draws.w_draws @ A.T                      # (S, k)
        eta = draws.theta_draws @ X_new[sl].T + mu     # (S, k)
        if method == "marginal":
            P = ndtr(eta / np.sqrt(sig2 * (1.0 + q[None, :])))
        else:
            w_new = mu + np.sqrt(sig2 * q[None, :]) * rng.standard_normal(mu.shape)
            P = ndtr((draws.theta_draws @ X_new[sl].T + w_new) / np.sqrt(sig2))
        p_hat[sl] = P.mean(axis=0)
        if return_draws:
            per_draw[:, sl] = P
    return (p_hat, per_draw) if return_draws else p_hat


def predict_probability(draws: PosteriorDraws, kernel: SpatialKernel, req: PredictionRequest,
                        rng=None, method: str = "marginal", sample_outcome: bool = False,
                        cfg: GeometryConfig = GeometryConfig()) -> PredictionResult:
    """Conversion probability for one new shot.

    With ``sample_outcome`` a binary outcome is also drawn for every posterior
    draw through the latent route: ``w(s')`` is kriged, ``r(s') ~
    N(x'theta + w(s'), sigma2)`` and ``Y(s') = 1(r(s') > 0)``.
    """
    x = design_row(req.location, req.covariates, draws.column_names, cfg)
    coords = np.array([[req.location.x, req.location.y]])
    p_hat, P = predict_many(draws, kernel, coords, x[None, :], rng, method, return_draws=True)
    y = None
    if sample_outcome:
        if rng is None:
            raise ValueError("sample_outcome needs an rng")
        A, q = kriging_weights(kernel, coords)
        sig = np.sqrt(draws.sigma2_draws)
        w_new = draws.w_draws @ A[0] + sig * np.sqrt(q[0]) * rng.standard_normal(draws.n_samples)
        r_new = draws.theta_draws @ x + w_new + sig * rng.standard_normal(draws.n_samples)
        y = (r_new > 0).astype(int)
    return PredictionResult(float(p_hat[0]), P[:, 0], y)


@dataclass(frozen=True)
class GridSpec:
    x_min: float = -35.0
    x_max: float = 35.0
    y_min: float = 0.0
    y_max: float = 60.0
    step: float = 1.0

    def nodes(self):
        """Cell-centre coordinates, x varying fastest."""
        xs = np.arange(self.x_min + self.step / 2, self.x_max, self.step)
        ys = np.arange(self.y_min + self.step / 2, self.y_max, self.step)
        gx, gy = np.meshgrid(xs, ys)
        return xs, ys, np.column_stack([gx.ravel(), gy.ravel()])


def heatmap_grid(draws: PosteriorDraws, kernel: SpatialKernel, grid: GridSpec,
                 baseline_covariates: dict, cfg: GeometryConfig = GeometryConfig()):
    """Probability surface over a lattice of cell centres.

    Returns ``(xs, ys, P)`` with ``P[j, i]`` the probability at ``(xs[i], ys[j])``.
    """
    if grid.y_max > cfg.half_line:
        raise ValueError(f"grid extends beyond the half line (y_max={grid.y_max})")
    if grid.y_min < 0 or grid.step <= 0 or grid.x_max <= grid.x_min or grid.y_max <= grid.y_min:
        raise ValueError("invalid grid specification")
    xs, ys, pts = grid.nodes()
    X = np.vstack([
        design_row(PitchLocation(float(px), float(py)), baseline_covariates,
                   draws.column_names, cfg)
        for px, py in pts
    ])
    p = predict_many(draws, kernel, pts, X)
    return xs, ys, p.reshape(len(ys), len(xs))


def write_heatmap_csv(xs, ys, P, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("x,y,p_hat\n")
        for j, y in enumerate(ys):
            for i, x in enumerate(xs):
                fh.write(f"{float(x)!r},{float(y)!r},{float(P[j, i])!r}\n")


def write_pgm(P, path) -> None:
    """Plain (P2) grayscale raster, 0-255 scaled from probability; goal line at the bottom."""
    vals = np.clip(np.rint(np.asarray(P) * 255), 0, 255).astype(int)[::-1]
    with open(path, "w", encoding="ascii") as fh:
        fh.write(f"P2\n{vals.shape[1]} {vals.shape[0]}\n255\n")
        for row in vals:
            fh.write(" ".join(map(str, row)) + "\n")
