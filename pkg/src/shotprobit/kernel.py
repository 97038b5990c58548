"""Exponential spatial correlation matrix and its factorizations."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve, cholesky
from scipy.spatial.distance import cdist

from .exceptions import KernelError

JITTER = 1e-8


@dataclass(frozen=True)
class SpatialKernel:
    """Correlation ``exp(-phi * d)`` over a fixed set of locations.

    Every factorization the sampler and predictor need is computed once at
    construction:

    - ``chol_Sigma_w``: lower Cholesky factor of ``Sigma_w``
    - ``Sigma_w_inv``
    - ``M = (I + Sigma_w^{-1})^{-1}`` and its lower Cholesky factor ``chol_M``
    """

    phi: float
    coords: np.ndarray
    Sigma_w: np.ndarray
    chol_Sigma_w: np.ndarray
    Sigma_w_inv: np.ndarray
    M: np.ndarray
    chol_M: np.ndarray
    jittered: bool = False

    @property
    def n(self) -> int:
        return self.coords.shape[0]

    def solve(self, b):
        """``Sigma_w^{-1} b`` via the Cholesky factor."""
        return cho_solve((self.chol_Sigma_w, True), b)


def correlation(coords_a, coords_b, phi: float) -> np.ndarray:
    return np.exp(-phi * cdist(np.atleast_2d(coords_a), np.atleast_2d(coords_b)))


def _check_distinct(coords):
    order = np.lexsort((coords[:, 1], coords[:, 0]))
    s = coords[order]
    same = np.all(s[1:] == s[:-1], axis=1)
    if np.any(same):
        k = int(np.argmax(same))
        i, j = sorted((int(order[k]), int(order[k + 1])))
        raise KernelError(
            f"singular correlation matrix: locations {i} and {j} coincide at "
            f"({s[k, 0]}, {s[k, 1]})"
        )


def _cholesky(A, what):
    try:
        return cholesky(A, lower=True), False
    except np.linalg.LinAlgError:
        pass
    try:
        return cholesky(A + JITTER * np.eye(A.shape[0]), lower=True), True
    except np.linalg.LinAlgError:
        raise KernelError(f"Cholesky factorization of {what} failed after jitter") from None


def build_kernel(coords, phi: float) -> SpatialKernel:
    """Build the correlation matrix for ``coords`` (N x 2, yards).

    Raises
    ------
    KernelError
        If two locations coincide or a factorization fails even after a
        single diagonal jitter of 1e-8.
    """
    coords = np.asarray(coords, dtype=float).reshape(-1, 2)
    if not phi > 0:
        raise ValueError(f"phi must be positive, got {phi}")
    _check_distinct(coords)
    n = coords.shape[0]
    S = correlation(coords, coords, phi)
    np.fill_diagonal(S, 1.0)

    L, jit_s = _cholesky(S, "Sigma_w")
    eye = np.eye(n)
    S_inv = cho_solve((L, True), eye)
    S_inv = 0.5 * (S_inv + S_inv.T)

    # M = (I + S^-1)^-1 = S (I + S)^-1; I + S is well conditioned
    IpS = cho_factor(eye + S, lower=True)
    M = cho_solve(IpS, S)
    M = 0.5 * (M + M.T)
    LM, jit_m = _cholesky(M, "(I + Sigma_w^-1)^-1")
    return SpatialKernel(float(phi), coords, S, L, S_inv, M, LM, jit_s or jit_m)


def cross_covariance(kernel: SpatialKernel, s_new) -> np.ndarray:
    """Correlations between a new location and every kernel location.

    ``s_new`` may be a single ``(x, y)`` pair / PitchLocation, giving a
    length-N vector, or an (m, 2) array, giving an (m, N) matrix.
    """
    if hasattr(s_new, "x") and hasattr(s_new, "y"):
        s_new = (s_new.x, s_new.y)
    pts = np.asarray(s_new, dtype=float)
    C = correlation(pts.reshape(-1, 2), kernel.coords, kernel.phi)
    return C[0] if pts.ndim == 1 else C
