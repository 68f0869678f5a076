"""Gaussian kernel bank, kernel combinations and the eigenvalue bound."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist, pdist, squareform

__all__ = [
    "DEFAULT_SIGMAS",
    "JITTER_SCALE",
    "KernelBank",
    "CombinedKernel",
    "gaussian",
    "gram",
    "build_bank",
    "combine",
    "signed_kernel",
    "cross_kernel",
    "gamma_upper_bound",
]

#: Bandwidths of the ten-kernel bank shared by every benchmark dataset.
DEFAULT_SIGMAS = (0.1, 0.2, 0.3, 0.5, 0.7, 1.0, 1.2, 1.5, 1.7, 2.0)

#: Ridge added to each Gram matrix, relative to its mean diagonal.
JITTER_SCALE = 1e-8


@dataclass(frozen=True)
class KernelBank:
    """The L precomputed (jittered) m x m Gram matrices of one training set.

    Attributes
    ----------
    sigmas : tuple of float
        Gaussian bandwidths, one per kernel.
    matrices : ndarray, shape (L, m, m)
        ``matrices[l] = gram(anchors, sigmas[l]) + jitter[l] * I``.
    anchors : ndarray, shape (m, n)
        Training rows the matrices were built from.
    jitter : ndarray, shape (L,)
        Ridge applied to each matrix.
    """

    sigmas: tuple
    matrices: np.ndarray
    anchors: np.ndarray
    jitter: np.ndarray

    @property
    def L(self) -> int:
        return self.matrices.shape[0]

    @property
    def m(self) -> int:
        return self.matrices.shape[1]

    def subset(self, idx) -> "KernelBank":
        """Bank restricted to the rows/columns ``idx`` (used for CV folds)."""
        idx = np.asarray(idx, dtype=int)
        mats = self.matrices[:, idx][:, :, idx]
        return KernelBank(self.sigmas, np.ascontiguousarray(mats),
                          self.anchors[idx], self.jitter)


@dataclass(frozen=True)
class CombinedKernel:
    K_of_d: np.ndarray
    d: np.ndarray


def _check_sigma(sigma: float) -> float:
    sigma = float(sigma)
    if not sigma > 0 or not np.isfinite(sigma):
        raise ValueError(f"sigma must be a positive finite number, got {sigma}")
    return sigma


def gaussian(x, y, sigma: float) -> float:
    """exp(-||x - y||^2 / (2 sigma^2))."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape:
        raise ValueError(f"dimension mismatch: {x.shape} vs {y.shape}")
    sigma = _check_sigma(sigma)
    diff = x - y
    return float(np.exp(-(diff @ diff) / (2.0 * sigma * sigma)))


def gram(X, sigma: float) -> np.ndarray:
    """Raw Gaussian Gram matrix: exactly symmetric with unit diagonal."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    sigma = _check_sigma(sigma)
    if X.shape[0] == 1:
        return np.ones((1, 1))
    sq = squareform(pdist(X, "sqeuclidean"))
    return np.exp(-sq / (2.0 * sigma * sigma))


def build_bank(X, sigmas) -> KernelBank:
    X = np.atleast_2d(np.asarray(X, dtype=float))
    sigmas = tuple(_check_sigma(s) for s in sigmas)
    if not sigmas:
        raise ValueError("need at least one kernel bandwidth")
    m = X.shape[0]
    sq = squareform(pdist(X, "sqeuclidean")) if m > 1 else np.zeros((1, 1))
    mats = np.empty((len(sigmas), m, m))
    jitter = np.empty(len(sigmas))
    eye = np.eye(m)
    for l, s in enumerate(sigmas):
        K = np.exp(-sq / (2.0 * s * s))
        jitter[l] = JITTER_SCALE * np.trace(K) / m
        mats[l] = K + jitter[l] * eye
    return KernelBank(sigmas, mats, X.copy(), jitter)


def combine(bank: KernelBank, d) -> CombinedKernel:
    """Weighted sum of the bank matrices, sum_l d_l K_l."""
    d = np.asarray(d, dtype=float)
    if d.shape != (bank.L,):
        raise ValueError(f"weight vector has shape {d.shape}, bank has L={bank.L}")
    if not np.all(np.isfinite(d)):
        raise ValueError("kernel weights must be finite")
    return CombinedKernel(np.tensordot(d, bank.matrices, axes=1), d.copy())


def signed_kernel(ck: CombinedKernel, labels) -> np.ndarray:
    """D_y K(d): row i of the combined kernel scaled by y_i."""
    y = np.asarray(labels, dtype=float)
    if y.shape != (ck.K_of_d.shape[0],):
        raise ValueError(f"label length {y.shape} does not match kernel size")
    return y[:, None] * ck.K_of_d


def cross_kernel(anchors, X_new, sigma: float) -> np.ndarray:
    """Gaussian kernel between new rows (p x n) and anchors (m x n) -> (p x m)."""
    anchors = np.atleast_2d(np.asarray(anchors, dtype=float))
    X_new = np.asarray(X_new, dtype=float)
    if X_new.ndim == 1:
        X_new = X_new.reshape(0, anchors.shape[1]) if X_new.size == 0 else X_new[None]
    if X_new.shape[1] != anchors.shape[1]:
        raise ValueError(
            f"feature dimension mismatch: {X_new.shape[1]} vs {anchors.shape[1]}"
        )
    sigma = _check_sigma(sigma)
    if X_new.shape[0] == 0:
        return np.zeros((0, anchors.shape[0]))
    return np.exp(-cdist(X_new, anchors, "sqeuclidean") / (2.0 * sigma * sigma))


def gamma_upper_bound(bank: KernelBank) -> float:
    """Smallest eigenvalue of K(d) over the simplex.

    lambda_min is concave in d, so its minimum over the simplex sits at a
    vertex: min_l lambda_min(K_l).
    """
    return float(min(np.linalg.eigvalsh(K)[0] for K in bank.matrices))
