"""Euclidean projection onto the probability simplex."""

import numpy as np

__all__ = ["project_simplex"]


def project_simplex(v) -> np.ndarray:
    """Project ``v`` onto {x : x >= 0, sum(x) = 1}.

    Sort-and-threshold method: with u the entries of v sorted in decreasing
    order, take rho = max{j : u_j + (1 - sum_{r<=j} u_r) / j > 0} and return
    max(v + tau, 0) where tau = (1 - sum_{r<=rho} u_r) / rho.
    """
    v = np.asarray(v, dtype=float)
    if v.ndim != 1 or v.size == 0:
        raise ValueError("project_simplex needs a non-empty 1-d vector")
    if not np.all(np.isfinite(v)):
        raise ValueError("project_simplex needs finite entries")
    # stable sort on -v: ties keep their original index order
    u = v[np.argsort(-v, kind="stable")]
    css = np.cumsum(u)
    j = np.arange(1, v.size + 1)
    rho = np.flatnonzero(u + (1.0 - css) / j > 0)[-1]
    tau = (1.0 - css[rho]) / (rho + 1)
    return np.maximum(v + tau, 0.0)
