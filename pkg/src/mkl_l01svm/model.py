"""Trained MKL-L0/1-SVM model: evaluation, prediction and JSON persistence."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .data import NormStats
from .kernels import cross_kernel

__all__ = [
    "SCHEMA_VERSION",
    "ModelFormatError",
    "Model",
    "decision_values",
    "predict",
    "accuracy",
    "save_model",
    "load_model",
]

SCHEMA_VERSION = 1


class ModelFormatError(ValueError):
    """A model file is empty, corrupted, or does not match the schema."""


@dataclass(frozen=True)
class Model:
    """Decision function f(x) + b = sum_l d_l sum_{i in SV} w_i k_l(x, x_i) + b.

    Only the support vectors (indices with a nonzero multiplier lambda_i)
    are stored; their kernel-expansion weights are w_i = -y_i * lambda_i.
    """

    sigmas: tuple
    d: np.ndarray
    b: float
    sv_index: np.ndarray
    sv_coeffs: np.ndarray
    sv_points: np.ndarray
    sv_labels: np.ndarray
    norm: NormStats | None = None
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "sigmas", tuple(float(s) for s in self.sigmas))
        object.__setattr__(self, "d", np.asarray(self.d, dtype=float))
        object.__setattr__(self, "b", float(self.b))
        object.__setattr__(self, "sv_index", np.asarray(self.sv_index, dtype=int))
        object.__setattr__(self, "sv_coeffs", np.asarray(self.sv_coeffs, dtype=float))
        object.__setattr__(self, "sv_labels", np.asarray(self.sv_labels, dtype=float))
        pts = np.asarray(self.sv_points, dtype=float)
        if pts.ndim == 1:
            pts = pts.reshape(len(self.sv_index), -1)
        object.__setattr__(self, "sv_points", pts)
        if self.d.shape != (len(self.sigmas),):
            raise ValueError("one kernel weight per bandwidth is required")
        k = len(self.sv_index)
        if not (self.sv_coeffs.shape == self.sv_labels.shape == (k,)
                and self.sv_points.shape[0] == k):
            raise ValueError("support-vector arrays have inconsistent lengths")

    @property
    def n_features(self) -> int | None:
        if self.sv_points.shape[0]:
            return self.sv_points.shape[1]
        if self.norm is not None:
            return len(self.norm.mean)
        return None

    @property
    def sv_weights(self) -> np.ndarray:
        """Expansion weights w_i = -y_i lambda_i over the support vectors."""
        return -self.sv_labels * self.sv_coeffs

    @classmethod
    def from_iterate(cls, sigmas, d, b, lam, X, y, norm=None, params=None):
        """Keep the rows of a training set where ``lam`` is nonzero."""
        lam = np.asarray(lam, dtype=float)
        idx = np.flatnonzero(lam)
        return cls(sigmas=sigmas, d=d, b=b, sv_index=idx, sv_coeffs=lam[idx],
                   sv_points=np.asarray(X, dtype=float)[idx],
                   sv_labels=np.asarray(y, dtype=float)[idx],
                   norm=norm, params=dict(params or {}))


def decision_values(model: Model, X_new) -> np.ndarray:
    X_new = np.atleast_2d(np.asarray(X_new, dtype=float))
    n = model.n_features
    if n is not None and X_new.shape[1] != n:
        raise ValueError(f"feature dimension mismatch: {X_new.shape[1]} vs {n}")
    out = np.full(X_new.shape[0], model.b)
    if len(model.sv_index) == 0:
        return out
    coef = model.sv_weights
    f = np.zeros(X_new.shape[0])
    for d_l, sigma in zip(model.d, model.sigmas):
        if d_l != 0.0:
            f += d_l * (cross_kernel(model.sv_points, X_new, sigma) @ coef)
    return f + out


def predict(model: Model, X_new) -> np.ndarray:
    """Sign of the decision values, with sign(0) taken as +1."""
    return np.where(decision_values(model, X_new) >= 0.0, 1.0, -1.0)


def accuracy(pred, truth) -> float:
    pred = np.asarray(pred, dtype=float)
    truth = np.asarray(truth, dtype=float)
    if pred.shape != truth.shape:
        raise ValueError(f"length mismatch: {pred.shape} vs {truth.shape}")
    if pred.size == 0:
        raise ValueError("accuracy of an empty prediction is undefined")
    return float(1.0 - np.abs(pred - truth).sum() / (2.0 * pred.size))


def _to_dict(model: Model) -> dict:
    norm = model.norm
    if norm is None:
        n = model.n_features or 0
        norm = NormStats(np.zeros(n), np.ones(n))
    return {
        "version": SCHEMA_VERSION,
        "sigmas": list(model.sigmas),
        "d": model.d.tolist(),
        "b": model.b,
        "support": [
            {"index": int(i), "lambda": float(lam), "label": int(yl), "x": x.tolist()}
            for i, lam, yl, x in zip(model.sv_index, model.sv_coeffs,
                                     model.sv_labels, model.sv_points)
        ],
        "norm": {"mean": norm.mean.tolist(), "std": norm.std.tolist()},
        "params": dict(model.params),
    }


_PARAM_KEYS = ("C", "rho1", "rho2", "rho3", "tol", "max_iter")


def _from_dict(doc) -> Model:
    if not isinstance(doc, dict):
        raise ModelFormatError("model document must be a JSON object")
    missing = [k for k in ("version", "sigmas", "d", "b", "support", "norm", "params")
               if k not in doc]
    if missing:
        raise ModelFormatError(f"model file is missing field(s): {', '.join(missing)}")
    if doc["version"] != SCHEMA_VERSION:
        raise ModelFormatError(
            f"schema version {doc['version']!r} is not supported "
            f"(expected {SCHEMA_VERSION})"
        )
    try:
        params = {k: doc["params"][k] for k in _PARAM_KEYS}
        support = doc["support"]
        n = len(doc["norm"]["mean"])
        pts = [s["x"] for s in support]
        model = Model(
            sigmas=doc["sigmas"],
            d=doc["d"],
            b=doc["b"],
            sv_index=[s["index"] for s in support],
            sv_coeffs=[s["lambda"] for s in support],
            sv_points=np.asarray(pts, dtype=float).reshape(len(support), n),
            sv_labels=[s["label"] for s in support],
            norm=NormStats(np.asarray(doc["norm"]["mean"], dtype=float),
                           np.asarray(doc["norm"]["std"], dtype=float)),
            params=params,
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ModelFormatError(f"corrupted model payload: {exc!r}") from None
    return model


def save_model(model: Model, path) -> None:
    # json writes floats with repr(), the shortest string that round-trips exactly
    with open(path, "w") as fh:
        json.dump(_to_dict(model), fh, indent=1)
        fh.write("\n")


def load_model(path) -> Model:
    with open(path) as fh:
        text = fh.read()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ModelFormatError(f"{path}: not a valid JSON model ({exc})") from None
    return _from_dict(doc)
