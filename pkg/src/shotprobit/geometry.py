"""Pitch geometry: shot distance, angle and keeper's reach.

Coordinates are in yards with the origin at the centre of the defended goal
line. ``x`` is the signed lateral offset and ``y`` the perpendicular distance
into the pitch, so the goal posts sit at ``(-goal_width / 2, 0)`` and
``(goal_width / 2, 0)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .exceptions import GeometryError


@dataclass(frozen=True)
class PitchLocation:
    x: float
    y: float

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise GeometryError(f"non-finite location ({self.x}, {self.y})")
        if self.y < 0:
            raise GeometryError(f"y must be >= 0, got {self.y}")


@dataclass(frozen=True)
class GeometryConfig:
    pitch_length_yards: float = 120.0
    goal_width_yards: float = 8.0
    keeper_depth_yards: float = 2.0

    def __post_init__(self):
        if self.pitch_length_yards <= 0 or self.goal_width_yards <= 0:
            raise ValueError("pitch length and goal width must be positive")
        if self.keeper_depth_yards < 0:
            raise ValueError("keeper depth must be nonnegative")

    @property
    def half_line(self) -> float:
        return self.pitch_length_yards / 2.0


def beyond_half_line(loc: PitchLocation, cfg: GeometryConfig = GeometryConfig()) -> bool:
    return loc.y > cfg.half_line


def shot_distance(loc: PitchLocation) -> float:
    """Euclidean distance from the shot to the centre of the goal line."""
    return math.hypot(loc.x, loc.y)


def shot_angle(loc: PitchLocation) -> float:
    """Signed angle (radians) between the shot-to-goal segment and the bisector.

    Positive for shots with ``x > 0``. The value lies in ``[-pi/2, pi/2]``.
    """
    if loc.x == 0 and loc.y == 0:
        raise GeometryError("undefined angle at the goal-line centre")
    return math.atan2(loc.x, loc.y)


def covariate_transforms(loc: PitchLocation) -> tuple[float, float]:
    """Return ``(log distance, cos angle)`` for a shot location."""
    d = shot_distance(loc)
    if d == 0:
        raise GeometryError("log of zero distance")
    return math.log(d), loc.y / d


def keeper_reach_default(loc: PitchLocation, cfg: GeometryConfig = GeometryConfig()) -> float:
    """Geometric stand-in for the keeper's reach.

    The keeper is placed on the bisector of the angle formed by the two
    shot-to-post segments, ``keeper_depth_yards`` off the goal line. The
    returned value is the perpendicular distance from that point to the
    nearer shot-to-post line, i.e. how far the keeper has to move to block a
    shot aimed just inside a post. Shots taken from no deeper than the
    keeper's own depth give a reach of 0 (the keeper can close the shooter
    down directly).

    Only used when the data does not supply a keeper-reach value.
    """
    return float(_keeper_reach(np.array([loc.x]), np.array([loc.y]), cfg)[0])


def _keeper_reach(x, y, cfg: GeometryConfig):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    half = cfg.goal_width_yards / 2.0
    depth = cfg.keeper_depth_yards

    # shot -> post vectors
    ax, ay = -half - x, -y
    bx, by = half - x, -y
    la = np.hypot(ax, ay)
    lb = np.hypot(bx, by)
    out = np.zeros_like(x)
    ok = (y > depth) & (la > 0) & (lb > 0)
    if not np.any(ok):
        return out

    ax, ay, bx, by, la, lb = (v[ok] for v in (ax, ay, bx, by, la, lb))
    xs, ys = x[ok], y[ok]
    # internal bisector direction; its y component is strictly negative here
    dx = ax / la + bx / lb
    dy = ay / la + by / lb
    t = (depth - ys) / dy
    kx, ky = dx * t, dy * t  # keeper offset relative to the shot
    dist_a = np.abs(kx * ay - ky * ax) / la
    dist_b = np.abs(kx * by - ky * bx) / lb
    out[ok] = np.minimum(dist_a, dist_b)
    return out


def positional_covariates(x, y, keeper_reach=None, cfg: GeometryConfig = GeometryConfig()):
    """Vectorised ``(log distance, cos angle, keeper reach)`` for many shots.

    ``keeper_reach`` entries that are NaN (or the whole argument when None)
    fall back to :func:`keeper_reach_default`.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    d = np.hypot(x, y)
    if np.any(d == 0):
        raise GeometryError("log of zero distance")
    reach = _keeper_reach(x, y, cfg)
    if keeper_reach is not None:
        supplied = np.asarray(keeper_reach, dtype=float)
        reach = np.where(np.isnan(supplied), reach, supplied)
    return np.log(d), y / d, reach
