"""Proximal operator of C * ||(.)_+||_0 and the data working set T."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = ["ProxParams", "prox_scalar", "prox_vector", "working_set_T"]


@dataclass(frozen=True)
class ProxParams:
    gamma: float
    C: float
    threshold: float = field(init=False)

    def __post_init__(self):
        if not (self.gamma > 0 and self.C > 0):
            raise ValueError(f"gamma and C must be positive, got {self.gamma}, {self.C}")
        object.__setattr__(self, "threshold", math.sqrt(2.0 * self.gamma * self.C))


def prox_scalar(z: float, p: ProxParams) -> float:
    """argmin_v C*[v > 0] + (v - z)^2 / (2 gamma).

    Values in (0, sqrt(2 gamma C)] are sent to 0; everything else is kept.
    At the right end of that interval both candidates tie and 0 is returned.
    """
    z = float(z)
    if not math.isfinite(z):
        raise ValueError(f"prox argument must be finite, got {z}")
    if 0.0 < z <= p.threshold:
        return 0.0
    return z


def prox_vector(z, p: ProxParams) -> np.ndarray:
    z = np.asarray(z, dtype=float)
    if not np.all(np.isfinite(z)):
        raise ValueError("prox argument must be finite")
    out = z.copy()
    out[(z > 0.0) & (z <= p.threshold)] = 0.0
    return out


def working_set_T(s, C: float, rho1: float) -> np.ndarray:
    """Indices i with s_i strictly inside (0, sqrt(2C/rho1))."""
    if not (C > 0 and rho1 > 0):
        raise ValueError(f"C and rho1 must be positive, got {C}, {rho1}")
    s = np.asarray(s, dtype=float)
    if not np.all(np.isfinite(s)):
        raise ValueError("working-set input must be finite")
    bound = math.sqrt(2.0 * C / rho1)
    return np.flatnonzero((s > 0.0) & (s < bound))
