"""Per-player Shooting Prowess (SP) and Positioning Sense (PS).

For player ``k`` with shots ``i`` spread over ``g_k`` distinct matches,
``SV_ki = Y_i - p_i``, ``SP_k = sum(SV_ki) / g_k`` and ``PS_k = sum(p_i) / g_k``.
The probabilities ``p_i`` come from a spatial fit trained without any of the
player's shots.
"""
from __future__ import annotations

import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .gibbs import ChainConfig, PriorConfig, run_chain
from .ingest import EncodedDesign, build_design
from .kernel import build_kernel
from .predict import predict_many

DEFAULT_MIN_SHOTS = {"headers": 10, "other_shots": 20, "all": 20}


@dataclass
class PlayerRating:
    player_id: str
    subset_tag: str
    sp: float
    ps: float
    n_shots: int
    n_games: int
    shooting_values: np.ndarray = field(repr=False, default=None)


@dataclass(frozen=True)
class RatingFitConfig:
    """Settings for the leave-player-out fits; ``phi`` is fixed for every player."""

    phi: float = 0.1
    prior: PriorConfig = PriorConfig()
    chain: ChainConfig = ChainConfig()


def ratings_from_predictions(player_id: str, subset_tag: str, y, p_hat, match_ids) -> PlayerRating:
    """SV, SP and PS from outcomes, forecasts and match ids of one player's shots."""
    y = np.asarray(y, dtype=float)
    p = np.asarray(p_hat, dtype=float)
    if y.shape != p.shape or y.size != len(match_ids):
        raise ValueError("outcomes, forecasts and match ids differ in length")
    if y.size == 0:
        raise ValueError(f"player {player_id!r} has no shots")
    if np.any((p < 0) | (p > 1)):
        raise ValueError("forecasts must lie in [0, 1]")
    sv = y - p
    g = len(set(match_ids))
    return PlayerRating(player_id, subset_tag, float(sv.sum() / g), float(p.sum() / g),
                        int(y.size), g, sv)


def player_seed(seed: int, player_id: str) -> int:
    """Chain seed for one player, independent of the order players are processed in."""
    ss = np.random.SeedSequence([int(seed), zlib.crc32(player_id.encode("utf-8"))])
    return int(ss.generate_state(1)[0])


def leave_player_out(design: EncodedDesign, player_id: str):
    """``(train, held)`` designs; ``train`` holds no shot by ``player_id``."""
    mine = np.array([pid == player_id for pid in design.player_ids])
    if not mine.any():
        raise KeyError(f"player {player_id!r} has no shots in subset {design.subset_tag!r}")
    train = design.take(np.flatnonzero(~mine))
    if player_id in train.player_ids:
        raise AssertionError("leave-out training set contains the held-out player")
    return train, design.take(np.flatnonzero(mine))


def rate_from_design(design: EncodedDesign, player_id: str,
                     fit_cfg: RatingFitConfig = RatingFitConfig()) -> PlayerRating:
    train, held = leave_player_out(design, player_id)
    kernel = build_kernel(train.coords, fit_cfg.phi)
    c = fit_cfg.chain
    chain = ChainConfig(c.burn_in, c.n_samples, c.thin, player_seed(c.seed, player_id))
    draws = run_chain(train, kernel, fit_cfg.prior, chain)
    p_hat = predict_many(draws, kernel, held.coords, held.X)
    return ratings_from_predictions(player_id, design.subset_tag, held.Y, p_hat, held.match_ids)


def rate_player(all_shots, player_id: str, subset_tag: str,
                fit_cfg: RatingFitConfig = RatingFitConfig(), columns=None) -> PlayerRating:
    """Leave-player-out rating from cleaned, duplicate-resolved records.

    The opponent conversion covariate is computed from the full record set.
    """
    design = build_design(all_shots, subset_tag, history=all_shots, columns=columns)
    return rate_from_design(design, player_id, fit_cfg)


def _rate_job(args):
    return rate_from_design(*args)


def rate_players(design: EncodedDesign, player_ids=None,
                 fit_cfg: RatingFitConfig = RatingFitConfig(), workers: int = 1) -> list[PlayerRating]:
    """Ratings for several players, sorted by player id.

    Unknown ids in ``player_ids`` are skipped. Results do not depend on
    ``workers`` because every player's chain seed is derived from its id.
    """
    present = sorted(set(design.player_ids))
    ids = present if player_ids is None else sorted(set(player_ids) & set(present))
    jobs = [(design, pid, fit_cfg) for pid in ids]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            out = list(ex.map(_rate_job, jobs))
    else:
        out = [_rate_job(j) for j in jobs]
    return sorted(out, key=lambda r: r.player_id)


def rank_players(ratings, measure: str = "sp", min_shots: int | None = None) -> list[PlayerRating]:
    """Descending ranking of players with at least ``min_shots`` shots.

    Ties are broken by the other measure (descending), then player id.
    """
    if measure not in ("sp", "ps"):
        raise ValueError(f"measure must be 'sp' or 'ps', got {measure!r}")
    ratings = list(ratings)
    if min_shots is None:
        tag = ratings[0].subset_tag if ratings else "all"
        min_shots = DEFAULT_MIN_SHOTS.get(tag, 20)
    other = "ps" if measure == "sp" else "sp"
    kept = [r for r in ratings if r.n_shots >= min_shots]
    return sorted(kept, key=lambda r: (-getattr(r, measure), -getattr(r, other), r.player_id))


@dataclass
class Histogram:
    edges: np.ndarray
    counts: np.ndarray

    def rows(self):
        return [(float(lo), float(hi), int(c))
                for lo, hi, c in zip(self.edges[:-1], self.edges[1:], self.counts)]


def _histogram(values, bin_width):
    values = np.asarray(values, dtype=float)
    lo = np.floor(values.min() / bin_width) * bin_width
    n_bins = max(1, int(np.floor((values.max() - lo) / bin_width)) + 1)
    edges = lo + bin_width * np.arange(n_bins + 1)
    idx = np.clip(np.floor((values - lo) / bin_width).astype(int), 0, n_bins - 1)
    return Histogram(edges, np.bincount(idx, minlength=n_bins))


def rating_histograms(ratings, bin_width: float = 0.05) -> dict:
    """Fixed-width histograms ``{"sp": Histogram, "ps": Histogram}``.

    Bins are ``[lo + k * w, lo + (k + 1) * w)`` with ``lo`` the largest
    multiple of ``w`` not above the minimum; every rating falls in one bin.
    """
    ratings = list(ratings)
    if not ratings:
        raise ValueError("no ratings to bin")
    if not bin_width > 0:
        raise ValueError("bin_width must be positive")
    return {m: _histogram([getattr(r, m) for r in ratings], bin_width) for m in ("sp", "ps")}
