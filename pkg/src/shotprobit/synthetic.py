"""Synthetic shot data drawn from the spatial probit model itself.

Used as ground truth for recovery and calibration checks. Situational
covariates are drawn independently: home with probability 0.56, every other
factor uniformly over its levels.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import brentq
from scipy.special import ndtr

from .geometry import GeometryConfig, PitchLocation, positional_covariates
from .ingest import GD_STATES, ShotRecord, build_design
from .kernel import build_kernel

RECOVERY_COLUMNS = ("intercept", "log_distance", "cos_angle", "home", "first_half")
BODY = ("header", "left_foot", "right_foot", "other")


@dataclass(frozen=True)
class SyntheticSpec:
    n_shots: int = 800
    true_theta: tuple = (1.5, -0.8, 0.8, 0.3, -0.2)
    columns: tuple = RECOVERY_COLUMNS
    true_phi: float = 0.1
    true_sigma2: float = 1.0
    location_process: str = "uniform_half"
    window: tuple = (-30.0, 1.0, 30.0, 40.0)
    n_parents: int = 25
    dispersion: float = 4.0
    home_prob: float = 0.56
    n_players: int = 60
    n_matches: int = 80
    n_teams: int = 16
    seed: int = 0

    def __post_init__(self):
        if self.n_shots < 1:
            raise ValueError("n_shots must be >= 1")
        if not self.true_phi > 0 or not self.true_sigma2 > 0:
            raise ValueError("true_phi and true_sigma2 must be positive")
        if len(self.true_theta) != len(self.columns):
            raise ValueError("true_theta and columns differ in length")
        if self.location_process not in ("uniform_half", "clustered", "grid"):
            raise ValueError(f"unknown location process {self.location_process!r}")


@dataclass
class SyntheticTruth:
    X: np.ndarray
    columns: tuple
    theta: np.ndarray
    w: np.ndarray
    e: np.ndarray
    r: np.ndarray
    p_true: np.ndarray
    coords: np.ndarray
    shot_ids: tuple = field(default=())


def _window_area(window):
    x0, y0, x1, y1 = window
    return (x1 - x0) * (y1 - y0)


def generate_point_pattern(kind: str, n: int, window, seed: int,
                           n_parents: int = 10, dispersion: float = 2.0) -> np.ndarray:
    """Point pattern in a rectangular ``window = (xmin, ymin, xmax, ymax)``.

    ``"csr"`` is uniform. ``"clustered"`` is a Thomas-type parent-offspring
    process: ``n_parents`` uniform parents, offspring displaced by isotropic
    normals with standard deviation ``dispersion``; offspring falling outside
    the window are redrawn.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    x0, y0, x1, y1 = window
    if _window_area(window) <= 0:
        raise ValueError("window has zero area")
    rng = np.random.default_rng(seed)
    lo, hi = np.array([x0, y0]), np.array([x1, y1])
    if kind == "csr":
        return lo + (hi - lo) * rng.random((n, 2))
    if kind != "clustered":
        raise ValueError(f"unknown point-pattern kind {kind!r}")
    parents = lo + (hi - lo) * rng.random((max(1, n_parents), 2))
    out = np.empty((0, 2))
    while out.shape[0] < n:
        k = n - out.shape[0]
        pick = parents[rng.integers(len(parents), size=k)]
        cand = pick + dispersion * rng.standard_normal((k, 2))
        inside = np.all((cand >= lo) & (cand <= hi), axis=1)
        out = np.vstack([out, cand[inside]])
    return out[:n]


def _grid_locations(n, window, rng):
    x0, y0, x1, y1 = window
    ratio = (x1 - x0) / (y1 - y0)
    ny = int(np.ceil(np.sqrt(n / ratio)))
    nx = int(np.ceil(n / ny))
    xs = x0 + (np.arange(nx) + 0.5) * (x1 - x0) / nx
    ys = y0 + (np.arange(ny) + 0.5) * (y1 - y0) / ny
    gx, gy = np.meshgrid(xs, ys)
    pts = np.column_stack([gx.ravel(), gy.ravel()])
    return pts[np.sort(rng.choice(len(pts), size=n, replace=False))]


def sample_locations(spec: SyntheticSpec, rng) -> np.ndarray:
    n = spec.n_shots
    if spec.location_process == "uniform_half":
        x0, y0, x1, y1 = spec.window
        pts = np.array([x0, y0]) + np.array([x1 - x0, y1 - y0]) * rng.random((n, 2))
    elif spec.location_process == "clustered":
        pts = generate_point_pattern("clustered", n, spec.window, int(rng.integers(2**32)),
                                     spec.n_parents, spec.dispersion)
    else:
        pts = _grid_locations(n, spec.window, rng)
    # coincident points make the correlation matrix singular: redraw them
    while True:
        _, first = np.unique(pts, axis=0, return_index=True)
        dup = np.setdiff1d(np.arange(n), first)
        if dup.size == 0 and np.all(np.hypot(pts[:, 0], pts[:, 1]) > 0):
            return pts
        bad = np.union1d(dup, np.flatnonzero(np.hypot(pts[:, 0], pts[:, 1]) == 0))
        x0, y0, x1, y1 = spec.window
        pts[bad] = np.array([x0, y0]) + np.array([x1 - x0, y1 - y0]) * rng.random((bad.size, 2))


def _situational(spec: SyntheticSpec, rng):
    n = spec.n_shots
    match = np.sort(rng.integers(spec.n_matches, size=n))
    return {
        "match": match,
        "player": rng.integers(spec.n_players, size=n),
        "opponent": (match * 7 + rng.integers(2, size=n)) % spec.n_teams,
        "home": (rng.random(n) < spec.home_prob).astype(int),
        "first_half": rng.integers(2, size=n),
        "gd": rng.integers(3, size=n),
        "stoppage": rng.integers(2, size=n),
        "body": rng.integers(4, size=n),
    }


def _records(spec, pts, sit, outcome):
    recs = []
    for i in range(spec.n_shots):
        recs.append(ShotRecord(
            shot_id=f"s{i:06d}",
            match_id=f"m{sit['match'][i]:04d}",
            player_id=f"p{sit['player'][i]:04d}",
            opponent_id=f"t{sit['opponent'][i]:02d}",
            location=PitchLocation(float(pts[i, 0]), float(pts[i, 1])),
            outcome=int(outcome[i]),
            body_part=BODY[sit["body"][i]],
            is_home=int(sit["home"][i]),
            is_first_half=int(sit["first_half"][i]),
            is_stoppage=int(sit["stoppage"][i]),
            goal_diff_state=GD_STATES[sit["gd"][i]],
            keeper_reach=None,
            timestamp_order=i,
            minute=None,
        ))
    return recs


def generate(spec: SyntheticSpec, geometry: GeometryConfig = GeometryConfig()):
    """Draw shots from ``r = X theta + w + e``, ``Y = 1(r > 0)``.

    Returns
    -------
    records : list of ShotRecord
    truth : SyntheticTruth
        Latent state and ``p_true = Phi((X theta + w) / sigma)``, the
        conversion probability conditional on the spatial field.
    """
    rng = np.random.default_rng(spec.seed)
    pts = sample_locations(spec, rng)
    sit = _situational(spec, rng)
    theta = np.asarray(spec.true_theta, dtype=float)
    sigma = np.sqrt(spec.true_sigma2)

    kernel = build_kernel(pts, spec.true_phi)
    w = sigma * (kernel.chol_Sigma_w @ rng.standard_normal(spec.n_shots))
    e = sigma * rng.standard_normal(spec.n_shots)

    placeholder = _records(spec, pts, sit, np.zeros(spec.n_shots, dtype=int))
    X = build_design(placeholder, "all", columns=spec.columns, cfg=geometry).X
    if "opponent_prop" in spec.columns:
        # running rate depends on earlier outcomes, so generate in order
        j = spec.columns.index("opponent_prop")
        shots, goals = {}, {}
        y = np.zeros(spec.n_shots, dtype=int)
        for i in range(spec.n_shots):
            opp = sit["opponent"][i]
            X[i, j] = goals.get(opp, 0) / shots[opp] if shots.get(opp) else 0.0
            y[i] = int(X[i] @ theta + w[i] + e[i] > 0)
            shots[opp] = shots.get(opp, 0) + 1
            goals[opp] = goals.get(opp, 0) + y[i]
    r = X @ theta + w + e
    y = (r > 0).astype(int)
    records = _records(spec, pts, sit, y)
    truth = SyntheticTruth(
        X=X, columns=tuple(spec.columns), theta=theta, w=w, e=e, r=r,
        p_true=ndtr((X @ theta + w) / sigma), coords=pts,
        shot_ids=tuple(rec.shot_id for rec in records),
    )
    return records, truth


def calibrate_intercept(spec: SyntheticSpec, target_rate: float, n_mc: int = 200_000,
                        geometry: GeometryConfig = GeometryConfig()) -> SyntheticSpec:
    """Shift the intercept so the marginal conversion rate equals ``target_rate``.

    The marginal rate integrates the spatial field and the noise analytically
    (``w + e ~ N(0, 2 sigma2)``) and the covariates by a seeded Monte-Carlo
    sample from the same location and covariate processes.
    """
    if "opponent_prop" in spec.columns:
        raise ValueError("calibration does not support the opponent_prop column")
    big = replace(spec, n_shots=n_mc)
    rng = np.random.default_rng(spec.seed + 1)
    x0, y0, x1, y1 = spec.window
    if spec.location_process == "clustered":
        pts = generate_point_pattern("clustered", n_mc, spec.window, spec.seed + 1,
                                     spec.n_parents, spec.dispersion)
    else:
        pts = np.array([x0, y0]) + np.array([x1 - x0, y1 - y0]) * rng.random((n_mc, 2))
    sit = _situational(big, rng)
    logd, cosa, reach = positional_covariates(pts[:, 0], pts[:, 1], None, geometry)
    feats = {
        "intercept": np.ones(n_mc), "log_distance": logd, "cos_angle": cosa,
        "keeper_reach": reach, "home": sit["home"], "first_half": sit["first_half"],
        "gd_level": sit["gd"] == 1, "gd_leading": sit["gd"] == 2,
        "stoppage": sit["stoppage"], "left_foot": sit["body"] == 1,
        "right_foot": sit["body"] == 2, "header": sit["body"] == 0,
    }
    X = np.column_stack([np.asarray(feats[c], dtype=float) for c in spec.columns])
    theta = np.asarray(spec.true_theta, dtype=float)
    rest = X[:, 1:] @ theta[1:]
    scale = np.sqrt(2.0 * spec.true_sigma2)
    f = lambda b0: float(np.mean(ndtr((b0 + rest) / scale))) - target_rate
    b0 = brentq(f, -50.0, 50.0, xtol=1e-10)
    return replace(spec, true_theta=(b0,) + tuple(spec.true_theta[1:]))
