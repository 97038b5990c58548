"""Gibbs sampler for the probit model with a spatially correlated latent error.

The latent utility of shot ``i`` is ``r_i = x_i' theta + w_i + e_i`` with
``w ~ N(0, sigma2 * Sigma_w)``, ``e ~ N(0, sigma2 * I)`` and ``Y_i = 1(r_i > 0)``.
The coefficient vector has a flat prior and ``sigma2`` an inverse-gamma prior.
Each sweep draws, in order, ``r | .``, ``theta | .``, ``w | .`` and
``sigma2 | .`` from their exact full conditionals.
"""
from __future__ import annotations

import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cholesky
from scipy.special import ndtr, ndtri

from .exceptions import ChainError, DesignError
from .ingest import EncodedDesign
from .kernel import SpatialKernel

TAIL_SWITCH = 4.0


@dataclass(frozen=True)
class PriorConfig:
    """Inverse-gamma prior ``IG(a, b)`` (shape, rate) on the common variance.

    The probit likelihood only sees ``theta / sigma`` and ``w / sigma``, so the
    marginal posterior of ``sigma2`` is ``IG(a - p/2, b)`` whatever the data.
    The defaults pin the scale near 1; ``a <= p/2`` gives an improper posterior.
    """

    a: float = 100.0
    b: float = 100.0

    def __post_init__(self):
        if not self.a > 1:
            raise ValueError(f"prior shape a must exceed 1, got {self.a}")
        if not self.b > 0:
            raise ValueError(f"prior rate b must be positive, got {self.b}")


@dataclass(frozen=True)
class ChainConfig:
    burn_in: int = 10000
    n_samples: int = 500
    thin: int = 1
    seed: int = 0

    def __post_init__(self):
        if self.burn_in < 0:
            raise ValueError("burn_in must be >= 0")
        if self.n_samples < 1:
            raise ValueError("n_samples must be >= 1")
        if self.thin < 1:
            raise ValueError("thin must be >= 1")


@dataclass
class PosteriorDraws:
    theta_draws: np.ndarray
    sigma2_draws: np.ndarray
    w_draws: np.ndarray
    r_last: np.ndarray
    column_names: tuple
    subset_tag: str = "all"
    phi: float | None = None
    seed: int | None = None
    n_sweeps: int = 0
    elapsed_seconds: float = 0.0

    @property
    def n_samples(self) -> int:
        return self.theta_draws.shape[0]

    def table(self) -> tuple[list, np.ndarray]:
        """Header and matrix of theta and sigma2 draws, one row per sample."""
        header = list(self.column_names) + ["sigma2"]
        return header, np.column_stack([self.theta_draws, self.sigma2_draws])


# --------------------------------------------------------------------------
# truncated normal
# --------------------------------------------------------------------------

def _std_tn_above(a, rng):
    """Standard normal draws conditioned on ``Z > a`` (elementwise)."""
    a = np.asarray(a, dtype=float)
    z = np.full_like(a, np.nan)  # NaN bounds stay NaN for the caller to catch
    central = a <= TAIL_SWITCH
    if np.any(central):
        u = 1.0 - rng.random(int(central.sum()))  # (0, 1]
        z[central] = -ndtri(u * ndtr(-a[central]))
    tail = a > TAIL_SWITCH
    if np.any(tail):
        z[tail] = _exp_rejection(a[tail], rng)
    return z


def _exp_rejection(a, rng):
    # translated-exponential proposal with the optimal rate for bound a
    lam = 0.5 * (a + np.sqrt(a * a + 4.0))
    out = np.empty_like(a)
    todo = np.arange(a.size)
    while todo.size:
        z = a[todo] + rng.exponential(1.0, todo.size) / lam[todo]
        accept = rng.random(todo.size) <= np.exp(-0.5 * (z - lam[todo]) ** 2)
        out[todo[accept]] = z[accept]
        todo = todo[~accept]
    return out


def sample_truncated_normal(mu, sigma2, side, rng, size=None):
    """Draw from ``N(mu, sigma2)`` truncated to ``(0, inf)`` or ``(-inf, 0]``.

    Parameters
    ----------
    mu : float or array
    sigma2 : float or array
        Variance (not standard deviation).
    side : {"positive", "negative"} or boolean array
        Boolean arrays select ``positive`` where True, elementwise.
    rng : numpy.random.Generator
    size : int, optional
        Number of draws when ``mu`` is scalar.

    Notes
    -----
    Inverse-CDF sampling on the survival scale when the standardized bound is
    at most 4, and Robert's exponential rejection sampler beyond that, so
    draws stay exact and finite deep in the tail.
    """
    if isinstance(side, str):
        if side not in ("positive", "negative"):
            raise ValueError(f"side must be 'positive' or 'negative', got {side!r}")
        positive = side == "positive"
    else:
        positive = np.asarray(side, dtype=bool)
    mu = np.asarray(mu, dtype=float)
    sigma = np.sqrt(np.asarray(sigma2, dtype=float))
    if np.any(sigma <= 0):
        raise ValueError("sigma2 must be positive")
    shape = np.broadcast_shapes(mu.shape, np.shape(positive), sigma.shape,
                                () if size is None else (size,))
    mu = np.broadcast_to(mu, shape)
    sign = np.where(np.broadcast_to(positive, shape), 1.0, -1.0)
    z = _std_tn_above(-sign * mu / sigma, rng)
    r = mu + sign * sigma * z
    # keep the support exact under rounding
    r = np.where(sign > 0, np.maximum(r, np.nextafter(0.0, 1.0)), np.minimum(r, 0.0))
    return r if r.ndim else float(r)


# --------------------------------------------------------------------------
# conditional draws
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class ThetaPrecomp:
    X: np.ndarray
    XtX_inv: np.ndarray
    chol_XtX_inv: np.ndarray


def precompute_theta(X, column_names=None) -> ThetaPrecomp:
    """Factor ``(X'X)^{-1}`` once; rejects rank-deficient designs."""
    X = np.asarray(X, dtype=float)
    p = X.shape[1]
    if np.linalg.matrix_rank(X) < p:
        names = list(column_names) if column_names is not None else [f"x{j}" for j in range(p)]
        bad, rank = [], 0
        for j in range(p):
            r = np.linalg.matrix_rank(X[:, : j + 1])
            if r == rank:
                bad.append(names[j])
            rank = r
        raise DesignError(f"rank-deficient design; collinear column(s): {', '.join(bad)}")
    XtX = X.T @ X
    inv = np.linalg.inv(XtX)
    inv = 0.5 * (inv + inv.T)
    return ThetaPrecomp(X, inv, cholesky(inv, lower=True))


def draw_sigma2(r, X, theta, w, kernel: SpatialKernel, prior: PriorConfig, rng) -> float:
    """``IG(a + N, b + |r - X theta - w|^2 / 2 + w' Sigma_w^{-1} w / 2)``."""
    resid = r - X @ theta - w
    quad = float(w @ (kernel.Sigma_w_inv @ w))
    rate = prior.b + 0.5 * float(resid @ resid) + 0.5 * quad
    if not rate > 0:
        raise ValueError(f"nonpositive inverse-gamma rate {rate}")
    shape = prior.a + r.shape[0]
    return rate / rng.gamma(shape)


def draw_theta(r, w, pre: ThetaPrecomp, sigma2: float, rng) -> np.ndarray:
    """``N((X'X)^{-1} X'(r - w), sigma2 (X'X)^{-1})``."""
    mean = pre.XtX_inv @ (pre.X.T @ (r - w))
    return mean + np.sqrt(sigma2) * (pre.chol_XtX_inv @ rng.standard_normal(mean.shape[0]))


def draw_w(r, X, theta, kernel: SpatialKernel, sigma2: float, rng) -> np.ndarray:
    """``N(M (r - X theta), sigma2 M)`` with ``M = (I + Sigma_w^{-1})^{-1}``."""
    mean = kernel.M @ (r - X @ theta)
    return mean + np.sqrt(sigma2) * (kernel.chol_M @ rng.standard_normal(mean.shape[0]))


def draw_latent(Y, X, theta, w, sigma2: float, rng) -> np.ndarray:
    """Independent truncated normals around ``X theta + w``, signed by ``Y``."""
    alpha = X @ theta + w
    return sample_truncated_normal(alpha, sigma2, np.asarray(Y) > 0.5, rng)


# --------------------------------------------------------------------------
# chain
# --------------------------------------------------------------------------

@dataclass
class ChainState:
    r: np.ndarray
    theta: np.ndarray
    w: np.ndarray
    sigma2: float


def initial_state(Y, p: int) -> ChainState:
    Y = np.asarray(Y)
    n = Y.shape[0]
    return ChainState(
        r=np.where(Y > 0.5, 0.5, -0.5),
        theta=np.zeros(p),
        w=np.zeros(n),
        sigma2=1.0,
    )


def run_chain(design: EncodedDesign, kernel: SpatialKernel,
              prior: PriorConfig = PriorConfig(), chain_cfg: ChainConfig = ChainConfig(),
              init: ChainState | None = None) -> PosteriorDraws:
    """Run one Gibbs chain.

    Performs ``burn_in + n_samples * thin`` sweeps in the order
    r, theta, w, sigma2 and keeps every ``thin``-th state after burn-in.
    Bit-identical for identical inputs and seed.

    Raises
    ------
    ChainError
        If any state becomes non-finite; the sweep index is attached.
    """
    X, Y = design.X, design.Y
    n, p = X.shape
    if kernel.n != n:
        raise ValueError(f"kernel has {kernel.n} locations but design has {n} rows")
    if prior.a <= p / 2:
        warnings.warn(
            f"prior shape a={prior.a} <= p/2={p / 2}: the marginal posterior of the "
            "common variance is improper (the probit likelihood does not identify "
            "the scale) and the variance and coefficient traces will drift",
            RuntimeWarning, stacklevel=2,
        )
    pre = precompute_theta(X, design.column_names)
    rng = np.random.default_rng(chain_cfg.seed)
    st = init if init is not None else initial_state(Y, p)
    r, theta, w, sigma2 = st.r.copy(), st.theta.copy(), st.w.copy(), float(st.sigma2)

    positive = Y > 0.5
    S = chain_cfg.n_samples
    thetas = np.empty((S, p))
    sigmas = np.empty(S)
    ws = np.empty((S, n))
    total = chain_cfg.burn_in + S * chain_cfg.thin
    t0 = time.perf_counter()
    kept = 0
    for sweep in range(total):
        try:
            r = sample_truncated_normal(X @ theta + w, sigma2, positive, rng)
            theta = draw_theta(r, w, pre, sigma2, rng)
            w = draw_w(r, X, theta, kernel, sigma2, rng)
            sigma2 = draw_sigma2(r, X, theta, w, kernel, prior, rng)
        except (ValueError, FloatingPointError) as exc:
            raise ChainError(f"sweep {sweep} failed: {exc}", sweep=sweep) from exc
        if not (np.isfinite(sigma2) and np.all(np.isfinite(theta))
                and np.all(np.isfinite(w)) and np.all(np.isfinite(r))):
            raise ChainError(f"non-finite state at sweep {sweep}", sweep=sweep)
        done = sweep + 1 - chain_cfg.burn_in
        if done > 0 and done % chain_cfg.thin == 0:
            thetas[kept] = theta
            sigmas[kept] = sigma2
            ws[kept] = w
            kept += 1
    return PosteriorDraws(
        theta_draws=thetas, sigma2_draws=sigmas, w_draws=ws, r_last=r,
        column_names=tuple(design.column_names), subset_tag=design.subset_tag,
        phi=kernel.phi, seed=chain_cfg.seed, n_sweeps=total,
        elapsed_seconds=time.perf_counter() - t0,
    )


def _chain_job(args):
    design, kernel, prior, cfg = args
    return run_chain(design, kernel, prior, cfg)


def run_chains(design, kernel, prior=PriorConfig(), chain_cfg=ChainConfig(),
               n_chains: int = 2, workers: int = 1) -> list[PosteriorDraws]:
    """Independent chains with seeds spawned from ``chain_cfg.seed``."""
    seqs = np.random.SeedSequence(chain_cfg.seed).spawn(n_chains)
    cfgs = [ChainConfig(chain_cfg.burn_in, chain_cfg.n_samples, chain_cfg.thin,
                        int(s.generate_state(1)[0])) for s in seqs]
    jobs = [(design, kernel, prior, c) for c in cfgs]
    if workers <= 1:
        return [_chain_job(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(_chain_job, jobs))


def gelman_rubin(chains) -> np.ndarray:
    """Potential scale reduction factor per column for a list of (S, k) arrays."""
    arr = np.stack([np.asarray(c, dtype=float) for c in chains])
    m, s = arr.shape[:2]
    means = arr.mean(axis=1)
    B = s * means.var(axis=0, ddof=1)
    W = arr.var(axis=1, ddof=1).mean(axis=0)
    var_hat = (s - 1) / s * W + B / s
    return np.sqrt(var_hat / W)


# --------------------------------------------------------------------------
# summaries
# --------------------------------------------------------------------------

@dataclass
class FitSummary:
    names: list
    mean: np.ndarray
    se: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    n_samples: int = 0
    extra: dict = field(default_factory=dict)

    def rows(self):
        for i, name in enumerate(self.names):
            yield name, self.mean[i], self.se[i], self.lower[i], self.upper[i]


def summarize(draws: PosteriorDraws, level: float = 0.95) -> FitSummary:
    """Posterior mean, standard deviation and equal-tailed interval per parameter."""
    names, table = draws.table()
    if table.shape[0] < 2:
        raise ValueError("need at least two retained samples to summarize")
    tail = (1.0 - level) / 2.0
    lo, hi = np.quantile(table, [tail, 1.0 - tail], axis=0)
    return FitSummary(
        names=names,
        mean=table.mean(axis=0),
        se=table.std(axis=0, ddof=1),
        lower=lo,
        upper=hi,
        n_samples=table.shape[0],
    )
