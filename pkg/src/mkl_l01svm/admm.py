"""Working-set ADMM for the multiple-kernel L0/1 SVM.

One sweep updates, in this order,

    u      proximal step on s = 1 - D_y K(d) w - b y - lambda / rho1,
           which also fixes the data working set T
    w      (I + rho1 K(d)) w = -D_y [lambda + rho1 (u + b y - 1)]
    b      closed-form minimiser of the augmented Lagrangian in b
    z      positive part of d + theta / rho2, with kernel working set S
    d      L x L linear system, projected onto the simplex, zeroed off S
    theta  dual ascent on S only
    alpha  dual ascent using the *unprojected* d
    lambda dual ascent on T, zero elsewhere

and the loop stops when every successive difference is below ``tol``.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from .data import Dataset, NormStats
from .kernels import KernelBank
from .model import Model
from .simplex import project_simplex
from .stationarity import check_p_stationary

__all__ = [
    "BETA_NAMES",
    "SolverError",
    "SolverParams",
    "SolverState",
    "TraceRecord",
    "Trace",
    "init_state",
    "objective_J",
    "w_system",
    "d_system",
    "update_u",
    "update_w",
    "update_b",
    "update_z",
    "update_d",
    "update_duals",
    "sweep",
    "stopping",
    "solve",
]

log = logging.getLogger(__name__)

BETA_NAMES = ("u", "w", "b", "z", "d", "theta", "alpha", "lambda")


class SolverError(RuntimeError):
    """The iteration produced a non-finite state or an unsolvable system."""

    def __init__(self, message, trace=None, state=None):
        super().__init__(message)
        self.trace = trace
        self.state = state


@dataclass(frozen=True)
class SolverParams:
    C: float = 1.0
    rho1: float = 1.0
    rho2: float = 1.0
    rho3: float = 1.0
    tol: float = 1e-3
    max_iter: int = 1000

    def __post_init__(self):
        for name in ("C", "rho1", "rho2", "rho3", "tol"):
            val = getattr(self, name)
            if not (math.isfinite(val) and val > 0):
                raise ValueError(f"{name} must be positive and finite, got {val}")
        if int(self.max_iter) != self.max_iter or self.max_iter < 1:
            raise ValueError(f"max_iter must be an integer >= 1, got {self.max_iter}")

    def as_dict(self) -> dict:
        return {"C": self.C, "rho1": self.rho1, "rho2": self.rho2,
                "rho3": self.rho3, "tol": self.tol, "max_iter": int(self.max_iter)}


@dataclass
class SolverState:
    w: np.ndarray
    d: np.ndarray
    b: float
    u: np.ndarray
    z: np.ndarray
    theta: np.ndarray
    alpha: float
    lam: np.ndarray
    iter: int = 0

    def copy(self) -> "SolverState":
        return SolverState(self.w.copy(), self.d.copy(), self.b, self.u.copy(),
                           self.z.copy(), self.theta.copy(), self.alpha,
                           self.lam.copy(), self.iter)

    def is_finite(self) -> bool:
        arrays = (self.w, self.d, self.u, self.z, self.theta, self.lam)
        return (all(np.all(np.isfinite(a)) for a in arrays)
                and math.isfinite(self.b) and math.isfinite(self.alpha))


@dataclass(frozen=True)
class TraceRecord:
    iter: int
    J: float
    betas: tuple
    size_T: int
    size_S: int
    d: np.ndarray
    w_residual: float = 0.0
    d_residual: float = 0.0


@dataclass
class Trace:
    records: list = field(default_factory=list)
    converged: bool = False
    final_state: SolverState | None = None
    T: np.ndarray | None = None
    S: np.ndarray | None = None

    @property
    def iterations(self) -> int:
        return len(self.records)

    def to_csv(self, path) -> None:
        L = len(self.records[0].d) if self.records else 0
        header = (["iter", "J"] + [f"beta{k}" for k in range(1, 9)]
                  + ["sizeT", "sizeS"] + [f"d_{l}" for l in range(1, L + 1)])
        with open(path, "w", newline="") as fh:
            out = csv.writer(fh)
            out.writerow(header)
            for r in self.records:
                out.writerow([r.iter, repr(r.J), *map(repr, r.betas), r.size_T,
                              r.size_S, *map(repr, r.d.tolist())])


def init_state(m: int, L: int, labels, params: SolverParams) -> SolverState:
    """w = u = lambda = 0, z = theta = 0, alpha = 0, d uniform.

    b is +1 when the negative class is not larger (J = C m_-), else -1
    (J = C m_+), so the start never costs more than C min(m_+, m_-).
    """
    y = np.asarray(labels, dtype=float)
    m_plus = int(np.count_nonzero(y > 0))
    m_minus = y.size - m_plus
    if m_plus == 0 or m_minus == 0:
        raise ValueError("both classes must be present to initialise the solver")
    b0 = 1.0 if m_minus <= m_plus else -1.0
    return SolverState(w=np.zeros(m), d=np.full(L, 1.0 / L), b=b0, u=np.zeros(m),
                       z=np.zeros(L), theta=np.zeros(L), alpha=0.0,
                       lam=np.zeros(m), iter=0)


def objective_J(w, d, b, bank: KernelBank, labels, C: float) -> float:
    """1/2 w' K(d) w + C * #{i : 1 - y_i ((K(d) w)_i + b) > 0}."""
    w = np.asarray(w, dtype=float)
    d = np.asarray(d, dtype=float)
    y = np.asarray(labels, dtype=float)
    if w.shape != (bank.m,) or d.shape != (bank.L,) or y.shape != (bank.m,):
        raise ValueError("dimension mismatch between w, d, labels and the bank")
    Kdw = d @ (bank.matrices @ w)
    viol = 1.0 - y * Kdw - b * y
    return float(0.5 * w @ Kdw + C * np.count_nonzero(viol > 0))


def _kw(bank, w):
    return bank.matrices @ w  # rows are K_l w


def w_system(state: SolverState, bank: KernelBank, labels, params: SolverParams):
    """Coefficient matrix and right-hand side of the w-update."""
    y = np.asarray(labels, dtype=float)
    Kd = np.tensordot(state.d, bank.matrices, axes=1)
    M = params.rho1 * Kd
    M[np.diag_indices_from(M)] += 1.0
    rhs = -y * (state.lam + params.rho1 * (state.u + state.b * y - 1.0))
    return M, rhs


def d_system(state: SolverState, bank: KernelBank, labels, params: SolverParams,
             Kw=None):
    """Coefficient matrix and right-hand side of the d-update.

    Uses w, u, b, z of ``state`` (already updated in this sweep) and the
    previous multipliers theta, alpha, lambda.
    """
    y = np.asarray(labels, dtype=float)
    if Kw is None:
        Kw = _kw(bank, state.w)
    shift = y * (state.u + state.b * y - 1.0)
    v = -0.5 * (Kw @ state.w) - Kw @ (y * state.lam) - params.rho1 * (Kw @ shift)
    L = bank.L
    M = params.rho1 * (Kw @ Kw.T) + params.rho3
    M[np.diag_indices(L)] += params.rho2
    rhs = v - state.theta + params.rho2 * state.z + (params.rho3 - state.alpha)
    return M, rhs


def _spd_solve(M, rhs, what):
    try:
        return cho_solve(cho_factor(M), rhs)
    except (LinAlgError, ValueError) as exc:
        raise SolverError(f"{what} system could not be factorised: {exc}") from None


def update_u(state: SolverState, bank: KernelBank, labels, params: SolverParams,
             Kdw=None):
    """Return (u_new, T) with T = {i : s_i in (0, sqrt(2C/rho1))}."""
    y = np.asarray(labels, dtype=float)
    if Kdw is None:
        Kdw = state.d @ _kw(bank, state.w)
    s = 1.0 - y * Kdw - state.b * y - state.lam / params.rho1
    bound = math.sqrt(2.0 * params.C / params.rho1)
    in_T = (s > 0.0) & (s < bound)
    u = np.where(in_T, 0.0, s)
    return u, np.flatnonzero(in_T)


def update_w(state: SolverState, bank: KernelBank, labels,
             params: SolverParams) -> np.ndarray:
    M, rhs = w_system(state, bank, labels, params)
    return _spd_solve(M, rhs, "w")


def update_b(state: SolverState, bank: KernelBank, labels, params: SolverParams,
             Kdw=None) -> float:
    y = np.asarray(labels, dtype=float)
    if Kdw is None:
        Kdw = state.d @ _kw(bank, state.w)
    r = state.lam + params.rho1 * (state.u + y * Kdw - 1.0)
    return float(-(y @ r) / (y.size * params.rho1))


def update_z(state: SolverState, params: SolverParams):
    """Return (z_new, S) with z = (d + theta/rho2)_+ and S its strict support."""
    q = state.d + state.theta / params.rho2
    pos = q > 0.0
    return np.where(pos, q, 0.0), np.flatnonzero(pos)


def update_d(state: SolverState, bank: KernelBank, labels, params: SolverParams,
             S, Kw=None):
    """Return (d_new, d_pre): solve, project onto the simplex, zero off S.

    If zeroing removed mass, the survivors are rescaled to sum to one; if it
    would remove all of it, the projection is kept unmasked.
    """
    M, rhs = d_system(state, bank, labels, params, Kw)
    d_pre = _spd_solve(M, rhs, "d")
    d = project_simplex(d_pre)
    off = np.ones(bank.L, dtype=bool)
    off[np.asarray(S, dtype=int)] = False
    removed = d[off].sum()
    if removed > 0.0:
        kept = d.sum() - removed
        if kept > 0.0:
            d = np.where(off, 0.0, d) / kept
    return d, d_pre


def update_duals(state: SolverState, d_pre, T, S, bank: KernelBank, labels,
                 params: SolverParams, Kw=None):
    """Return (theta, alpha, lambda) from the freshly updated primal block.

    ``state`` must hold the new u, w, b, z, d and the old multipliers.
    """
    y = np.asarray(labels, dtype=float)
    S = np.asarray(S, dtype=int)
    T = np.asarray(T, dtype=int)
    theta = state.theta.copy()
    theta[S] += params.rho2 * (state.d[S] - state.z[S])
    alpha = state.alpha + params.rho3 * (float(np.sum(d_pre)) - 1.0)
    if Kw is None:
        Kw = _kw(bank, state.w)
    r = state.u + y * (state.d @ Kw) + state.b * y - 1.0
    lam = np.zeros_like(state.lam)
    lam[T] = state.lam[T] + params.rho1 * r[T]
    return theta, alpha, lam


@dataclass(frozen=True)
class SweepInfo:
    T: np.ndarray
    S: np.ndarray
    d_pre: np.ndarray
    Kw: np.ndarray
    w_residual: float
    d_residual: float


def sweep(state: SolverState, bank: KernelBank, labels,
          params: SolverParams, Kw=None):
    """One full ADMM iteration. Returns (new_state, SweepInfo).

    ``Kw`` may carry the products K_l w for the incoming w (reused from the
    previous sweep).
    """
    y = np.asarray(labels, dtype=float)
    s = state.copy()
    if Kw is None:
        Kw = _kw(bank, s.w)
    s.u, T = update_u(s, bank, y, params, Kdw=s.d @ Kw)

    M, rhs = w_system(s, bank, y, params)
    s.w = _spd_solve(M, rhs, "w")
    w_res = float(np.linalg.norm(M @ s.w - rhs))
    Kw = _kw(bank, s.w)

    s.b = update_b(s, bank, y, params, Kdw=s.d @ Kw)
    s.z, S = update_z(s, params)

    Md, rhs_d = d_system(s, bank, y, params, Kw)
    s.d, d_pre = update_d(s, bank, y, params, S, Kw=Kw)
    d_res = float(np.linalg.norm(Md @ d_pre - rhs_d))

    s.theta, s.alpha, s.lam = update_duals(s, d_pre, T, S, bank, y, params, Kw=Kw)
    s.iter = state.iter + 1
    return s, SweepInfo(T, S, d_pre, Kw, w_res, d_res)


def stopping(prev: SolverState, curr: SolverState, tol: float):
    """Successive-difference norms beta_1..beta_8 and the stop flag."""
    betas = {
        "u": float(np.linalg.norm(curr.u - prev.u)),
        "w": float(np.linalg.norm(curr.w - prev.w)),
        "b": abs(curr.b - prev.b),
        "z": float(np.linalg.norm(curr.z - prev.z)),
        "d": float(np.linalg.norm(curr.d - prev.d)),
        "theta": float(np.linalg.norm(curr.theta - prev.theta)),
        "alpha": abs(curr.alpha - prev.alpha),
        "lambda": float(np.linalg.norm(curr.lam - prev.lam)),
    }
    return betas, max(betas.values()) < tol


def solve(ds: Dataset, bank: KernelBank, params: SolverParams,
          norm: NormStats | None = None, state: SolverState | None = None):
    """Run the ADMM until the stopping rule fires or ``max_iter`` sweeps.

    Returns ``(model, trace, report)``; ``trace.converged`` is False when the
    iteration budget ran out. The report checks P-stationarity of the final
    iterate with gamma = 1/rho1 at tolerance ``params.tol``.
    """
    y = ds.labels
    if bank.m != ds.m:
        raise ValueError(f"bank has {bank.m} rows but dataset has {ds.m}")
    ds.require_trainable()
    if state is None:
        state = init_state(ds.m, bank.L, y, params)
    if params.C / params.rho1 <= 2.0:
        log.debug("C/rho1 = %g <= 2: the initial point is already a fixed point",
                  params.C / params.rho1)

    trace = Trace()
    Kw = _kw(bank, state.w)
    info = None
    for _ in range(int(params.max_iter)):
        try:
            new, info = sweep(state, bank, y, params, Kw=Kw)
        except SolverError as exc:
            trace.final_state = state
            raise SolverError(f"sweep {state.iter + 1}: {exc}", trace=trace,
                              state=state) from None
        if not new.is_finite():
            trace.final_state = new
            raise SolverError(f"non-finite iterate at sweep {new.iter}",
                              trace=trace, state=new)
        Kw = info.Kw
        betas, stop = stopping(state, new, params.tol)
        Kdw = new.d @ Kw
        J = float(0.5 * new.w @ Kdw
                  + params.C * np.count_nonzero(1.0 - y * Kdw - new.b * y > 0))
        trace.records.append(TraceRecord(
            new.iter, J, tuple(betas[k] for k in BETA_NAMES), len(info.T),
            len(info.S), new.d.copy(), info.w_residual, info.d_residual))
        state = new
        if stop:
            trace.converged = True
            break

    trace.final_state = state
    if info is not None:
        trace.T, trace.S = info.T, info.S
    model = Model.from_iterate(bank.sigmas, state.d, state.b, state.lam,
                               bank.anchors, y, norm=norm, params=params.as_dict())
    report = check_p_stationary(state.w, state.d, state.b, state.u, state.theta,
                                state.alpha, state.lam, bank, y, params.C,
                                1.0 / params.rho1, params.tol)
    return model, trace, report
