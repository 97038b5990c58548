"""Forecast evaluation: Brier, log score, classification error and beta-family rules.

The beta family (Buja, Stuetzle and Shen, 2005) weights cost-weighted
misclassification losses by ``t**(alpha-1) * (1-t)**(beta-1)``. The partial
losses for a forecast ``q`` are

    L(1, q) = int_q^1 t**(alpha-1) * (1-t)**beta dt
    L(0, q) = int_0^q t**alpha * (1-t)**(beta-1) dt

``alpha = beta = 0`` gives the log loss and ``alpha = beta = 1`` half the
squared-error loss. ``alpha / (alpha + beta)`` is the cost of a false positive.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad
from scipy.special import betainc, beta as beta_fn

EPS = 1e-12
# below this the closed form multiplies a huge beta function by a tiny ratio
SMALL_PARAM = 1e-2
DEFAULT_COSTS = tuple(round(0.05 * k, 2) for k in range(1, 20))


def _aligned(y, p):
    y = np.asarray(y, dtype=float)
    p = np.asarray(p, dtype=float)
    if y.shape != p.shape:
        raise ValueError(f"length mismatch: {y.shape} vs {p.shape}")
    return y, p


def brier(y, p) -> float:
    """Mean squared difference between forecasts and outcomes."""
    y, p = _aligned(y, p)
    return float(np.mean((p - y) ** 2))


def log_score(y, p, aggregate: str = "mean") -> float:
    """Mean or total log likelihood of the outcomes (higher is better).

    Forecasts are clipped to ``[1e-12, 1 - 1e-12]`` first.
    """
    y, p = _aligned(y, p)
    p = np.clip(p, EPS, 1.0 - EPS)
    ll = y * np.log(p) + (1.0 - y) * np.log1p(-p)
    if aggregate == "mean":
        return float(ll.mean())
    if aggregate == "total":
        return float(ll.sum())
    raise ValueError(f"aggregate must be 'mean' or 'total', got {aggregate!r}")


def classification_error(y, p, threshold: float = 0.5) -> float:
    y, p = _aligned(y, p)
    return float(np.mean((p >= threshold).astype(float) != y))


def _loss_one(q, a, b):
    # int_q^1 t^(a-1) (1-t)^b dt == B(b+1, a) * I_{1-q}(b+1, a)
    if a >= SMALL_PARAM:
        return beta_fn(b + 1.0, a) * betainc(b + 1.0, a, 1.0 - q)
    return np.array([quad(lambda t: t ** (a - 1.0) * (1.0 - t) ** b, qi, 1.0,
                          epsabs=0.0, epsrel=1e-12, limit=200)[0] for qi in np.atleast_1d(q)])


def _loss_zero(q, a, b):
    # int_0^q t^a (1-t)^(b-1) dt == B(a+1, b) * I_q(a+1, b)
    if b >= SMALL_PARAM:
        return beta_fn(a + 1.0, b) * betainc(a + 1.0, b, q)
    return np.array([quad(lambda t: t ** a * (1.0 - t) ** (b - 1.0), 0.0, qi,
                          epsabs=0.0, epsrel=1e-12, limit=200)[0] for qi in np.atleast_1d(q)])


def beta_family_losses(y, p, alpha: float, beta: float) -> np.ndarray:
    """Per-observation beta-family loss (lower is better)."""
    if alpha < 0 or beta < 0:
        raise ValueError("alpha and beta must be nonnegative")
    y, p = _aligned(y, p)
    p = np.clip(p, EPS, 1.0 - EPS)
    out = np.empty_like(p)
    ones = y > 0.5
    if np.any(ones):
        out[ones] = _loss_one(p[ones], alpha, beta)
    if np.any(~ones):
        out[~ones] = _loss_zero(p[~ones], alpha, beta)
    return out


def beta_family_score(y, p, alpha: float, beta: float) -> float:
    """Total beta-family loss over all observations; negate for a score."""
    return float(beta_family_losses(y, p, alpha, beta).sum())


def cost_to_params(cost: float, scale: float = 2.0) -> tuple[float, float]:
    """``(alpha, beta)`` with ``alpha / (alpha + beta) = cost`` and ``alpha + beta = scale``."""
    if not 0 < cost < 1:
        raise ValueError(f"cost must lie strictly inside (0, 1), got {cost}")
    return cost * scale, (1.0 - cost) * scale


@dataclass
class ScoreReport:
    brier: float
    log_score_total: float
    log_score_mean: float
    error_rate: float
    n: int


def score_report(y, p) -> ScoreReport:
    y, p = _aligned(y, p)
    return ScoreReport(
        brier=brier(y, p),
        log_score_total=log_score(y, p, "total"),
        log_score_mean=log_score(y, p, "mean"),
        error_rate=classification_error(y, p),
        n=int(y.size),
    )


@dataclass
class BetaScoreCurve:
    cost_grid: np.ndarray
    scores: np.ndarray
    scale: float


def beta_curve(y, p, costs=DEFAULT_COSTS, scale: float = 2.0) -> BetaScoreCurve:
    """Mean beta-family score (negated mean loss, higher is better) per cost."""
    costs = np.asarray(costs, dtype=float)
    if np.any((costs <= 0) | (costs >= 1)):
        raise ValueError("costs must lie strictly inside (0, 1)")
    n = np.asarray(y).size
    scores = np.array([-beta_family_score(y, p, *cost_to_params(c, scale)) / n for c in costs])
    return BetaScoreCurve(costs, scores, scale)


METRICS = ("brier", "log_score_total", "error_rate")


def compare_models(inputs: dict) -> list[tuple]:
    """Side-by-side metrics for several models.

    Parameters
    ----------
    inputs : dict
        ``{model_name: {subset_tag: (y, p)}}``. Every model must be
        evaluated on the same outcomes for each subset.

    Returns
    -------
    list of tuples
        Header ``("subset", "metric", *models)`` followed by one row per
        subset and metric.
    """
    models = list(inputs)
    if not models:
        raise ValueError("no models to compare")
    subsets = list(inputs[models[0]])
    for m in models[1:]:
        if list(inputs[m]) != subsets:
            raise ValueError(f"model {m!r} was evaluated on different subsets")
    reports = {}
    for s in subsets:
        y0 = np.asarray(inputs[models[0]][s][0], dtype=float)
        for m in models:
            y, p = inputs[m][s]
            y = np.asarray(y, dtype=float)
            if y.shape != y0.shape or not np.array_equal(y, y0):
                raise ValueError(f"misaligned evaluation sets for subset {s!r} (model {m!r})")
            reports[m, s] = score_report(y, p)
    rows = [("subset", "metric", *models)]
    for s in subsets:
        for metric in METRICS:
            rows.append((s, metric, *[getattr(reports[m, s], metric) for m in models]))
    return rows
