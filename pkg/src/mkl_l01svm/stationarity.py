"""Residuals of the P-stationarity (KKT-like) system of the finite problem.

Multiplier convention: the ADMM iterate carries theta with the opposite sign
of the multiplier in the optimality system, so the checker evaluates

    d >= 0,  sum(d) = 1,  u + D_y K(d) w + b y = 1,
    -theta >= 0,  theta_l d_l = 0,
    w + D_y lambda = 0,
    -1/2 w' K_l w + alpha + theta_l = 0       (for every l),
    y' lambda = 0,
    prox_{gamma C ||(.)_+||_0}(u - gamma lambda) = u.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .kernels import KernelBank
from .prox01 import ProxParams, prox_vector

__all__ = ["RESIDUAL_NAMES", "StationarityReport", "check_p_stationary"]

RESIDUAL_NAMES = (
    "primal_d_nonneg",
    "primal_d_sum",
    "primal_affine",
    "dual_theta_nonneg",
    "complementarity",
    "stationarity_w",
    "stationarity_d",
    "stationarity_b",
    "prox_fixed_point",
)


@dataclass(frozen=True)
class StationarityReport:
    """Absolute residuals, their scales, and the verdict at ``tol``.

    ``relative[k] = residuals[k] / (1 + scales[k])`` and the point counts as
    P-stationary when every relative residual is <= ``tol``.
    """

    residuals: dict
    scales: dict
    gamma_used: float
    tol: float

    @property
    def relative(self) -> dict:
        return {k: self.residuals[k] / (1.0 + self.scales[k]) for k in self.residuals}

    @property
    def max_relative(self) -> float:
        return max(self.relative.values())

    @property
    def satisfied(self) -> bool:
        return self.max_relative <= self.tol

    def failing(self) -> list:
        return [k for k, v in self.relative.items() if v > self.tol]

    def to_dict(self) -> dict:
        return {
            "residuals": dict(self.residuals),
            "relative": self.relative,
            "gamma": self.gamma_used,
            "tol": self.tol,
            "satisfied": self.satisfied,
            # theta is stored with the opposite sign of the optimality multiplier
            "theta_sign_convention": "multiplier = -theta",
        }


def check_p_stationary(w, d, b, u, theta, alpha, lam, bank: KernelBank, labels,
                       C: float, gamma: float, tol: float) -> StationarityReport:
    if not gamma > 0:
        raise ValueError(f"gamma must be positive, got {gamma}")
    w = np.asarray(w, dtype=float)
    d = np.asarray(d, dtype=float)
    u = np.asarray(u, dtype=float)
    theta = np.asarray(theta, dtype=float)
    lam = np.asarray(lam, dtype=float)
    y = np.asarray(labels, dtype=float)
    b = float(b)
    alpha = float(alpha)

    Kw = bank.matrices @ w  # (L, m)
    Kdw = d @ Kw
    quad = 0.5 * (Kw @ w)  # 1/2 w' K_l w per kernel
    theta_inf = float(np.max(np.abs(theta), initial=0.0))
    lam_norm = float(np.linalg.norm(lam))
    prox_arg = u - gamma * lam
    res = {
        "primal_d_nonneg": float(max(0.0, -d.min())),
        "primal_d_sum": float(abs(d.sum() - 1.0)),
        "primal_affine": float(np.linalg.norm(u + y * Kdw + b * y - 1.0)),
        "dual_theta_nonneg": float(max(0.0, theta.max())),
        "complementarity": float(np.max(np.abs(theta * d))),
        "stationarity_w": float(np.linalg.norm(w + y * lam)),
        "stationarity_d": float(np.max(np.abs(-quad + alpha + theta))),
        "stationarity_b": float(abs(y @ lam)),
        "prox_fixed_point": float(np.linalg.norm(
            prox_vector(prox_arg, ProxParams(gamma, C)) - u)),
    }
    scales = {
        "primal_d_nonneg": float(np.abs(d).max()),
        "primal_d_sum": float(np.abs(d).sum()),
        "primal_affine": float(max(np.linalg.norm(u), np.linalg.norm(Kdw),
                                   abs(b) * np.sqrt(y.size), np.sqrt(y.size))),
        "dual_theta_nonneg": theta_inf,
        "complementarity": theta_inf * float(np.abs(d).max()),
        "stationarity_w": float(max(np.linalg.norm(w), lam_norm)),
        "stationarity_d": float(max(np.abs(quad).max(), abs(alpha), theta_inf)),
        "stationarity_b": float(np.abs(lam).sum()),
        "prox_fixed_point": float(np.linalg.norm(u) + gamma * lam_norm),
    }
    return StationarityReport(res, scales, float(gamma), float(tol))
