"""Exploratory spatial diagnostics: Ripley's K and the k-NN join-count test."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

DEFAULT_PERMS = 999


@dataclass
class KFunctionResult:
    radii: np.ndarray
    k_hat: np.ndarray
    k_theo: np.ndarray
    envelope_low: np.ndarray
    envelope_high: np.ndarray
    n_sims: int

    def rows(self):
        return list(zip(self.radii.tolist(), self.k_hat.tolist(), self.k_theo.tolist(),
                        self.envelope_low.tolist(), self.envelope_high.tolist()))

    def inside_fraction(self) -> float:
        inside = (self.k_hat >= self.envelope_low) & (self.k_hat <= self.envelope_high)
        return float(inside.mean())


@dataclass
class JoinCountResult:
    k_neighbors: int
    counts: tuple
    null_mean: np.ndarray
    null_sd: np.ndarray
    p_values: np.ndarray
    n_perms: int
    p_value: float

    STATISTICS = ("n11", "n00", "n01")

    def rows(self):
        return [(name, int(c), float(m), float(s), float(p)) for name, c, m, s, p in
                zip(self.STATISTICS, self.counts, self.null_mean, self.null_sd, self.p_values)]


def _window_parts(window):
    x0, y0, x1, y1 = (float(v) for v in window)
    area = (x1 - x0) * (y1 - y0)
    if not area > 0:
        raise ValueError(f"window has zero area: {window}")
    return np.array([x0, y0]), np.array([x1, y1]), area


def _k_naive(points, radii, area):
    n = points.shape[0]
    tree = cKDTree(points)
    # ordered pairs within each radius, minus the n self-pairs
    pairs = tree.count_neighbors(tree, radii).astype(float) - n
    return area / n**2 * pairs


def ripley_k(points, window, radii, n_sims: int = 99, seed: int = 0) -> KFunctionResult:
    """Naive (uncorrected) K-function with a pointwise CSR envelope.

    Parameters
    ----------
    points : (n, 2) array
        Event coordinates, all inside ``window``.
    window : tuple
        ``(xmin, ymin, xmax, ymax)``.
    radii : array
        Positive, ascending distances.
    n_sims : int
        Number of CSR patterns of ``n`` uniform points used for the envelope.
    """
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    lo, hi, area = _window_parts(window)
    radii = np.asarray(radii, dtype=float)
    if radii.size == 0 or np.any(radii <= 0) or np.any(np.diff(radii) <= 0):
        raise ValueError("radii must be positive and strictly ascending")
    inside = np.all((pts >= lo) & (pts <= hi), axis=1)
    if inside.sum() < 2:
        raise ValueError("need at least two points inside the window")
    pts = pts[inside]
    n = pts.shape[0]
    k_hat = _k_naive(pts, radii, area)

    rng = np.random.default_rng(seed)
    sims = np.empty((n_sims, radii.size))
    for s in range(n_sims):
        sims[s] = _k_naive(lo + (hi - lo) * rng.random((n, 2)), radii, area)
    low = sims.min(axis=0) if n_sims else np.full(radii.size, np.nan)
    high = sims.max(axis=0) if n_sims else np.full(radii.size, np.nan)
    return KFunctionResult(radii, k_hat, np.pi * radii**2, low, high, int(n_sims))


def default_k(n: int) -> int:
    """Nearest integer to ``sqrt(n)``, at least 1 (63 for n = 3957)."""
    return max(1, int(np.rint(np.sqrt(n))))


def knn_edges(points, k: int) -> np.ndarray:
    """Undirected k-NN edges ``(i, j)`` with ``i < j``, symmetrised by union."""
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    n = pts.shape[0]
    if not 1 <= k < n:
        raise ValueError(f"k_neighbors must lie in [1, {n - 1}], got {k}")
    _, idx = cKDTree(pts).query(pts, k=k + 1)
    # drop self; duplicates in the query result are impossible for distinct points
    src = np.repeat(np.arange(n), k)
    dst = np.array([row[row != i][:k] for i, row in enumerate(idx)]).ravel()
    edges = np.sort(np.column_stack([src, dst]), axis=1)
    return np.unique(edges, axis=0)


def _join_counts(labels, edges):
    a = labels[..., edges[:, 0]]
    b = labels[..., edges[:, 1]]
    n11 = np.sum(a & b, axis=-1)
    n00 = np.sum(~a & ~b, axis=-1)
    return n11, n00, edges.shape[0] - n11 - n00


def join_count_test(points, labels, k_neighbors: int | None = None,
                    n_perms: int = DEFAULT_PERMS, seed: int = 0) -> JoinCountResult:
    """Permutation join-count test for spatial autocorrelation of binary labels.

    One-sided p-values use ``(1 + #{null >= observed}) / (n_perms + 1)`` for
    the like-join counts and the reverse inequality for the unlike count.
    ``p_value`` is the overall test and equals the unlike-join p-value: with
    a fixed edge set, fewer unlike joins means more like joins in total.
    """
    labels = np.asarray(labels)
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    if labels.shape[0] != pts.shape[0]:
        raise ValueError("labels and points differ in length")
    if not np.all(np.isin(labels, (0, 1))):
        raise ValueError("labels must be binary")
    lab = labels.astype(bool)
    if lab.all() or not lab.any():
        raise ValueError("degenerate test: all labels identical")
    k = default_k(lab.size) if k_neighbors is None else int(k_neighbors)
    edges = knn_edges(pts, k)
    obs = np.array(_join_counts(lab, edges))

    rng = np.random.default_rng(seed)
    null = np.empty((3, n_perms))
    batch = max(1, 2_000_000 // max(1, lab.size))
    for start in range(0, n_perms, batch):
        m = min(batch, n_perms - start)
        perm = np.argsort(rng.random((m, lab.size)), axis=1)
        null[:, start:start + m] = np.array(_join_counts(lab[perm], edges))

    ge = (null >= obs[:, None]).sum(axis=1)
    le = (null <= obs[:, None]).sum(axis=1)
    extreme = np.array([ge[0], ge[1], le[2]])
    p = (1.0 + extreme) / (n_perms + 1.0)
    return JoinCountResult(k, tuple(int(c) for c in obs), null.mean(axis=1),
                           null.std(axis=1, ddof=1) if n_perms > 1 else np.zeros(3),
                           p, int(n_perms), float(p[2]))
