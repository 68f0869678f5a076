"""Cross-validated parameter selection and repeated-split benchmarks."""

from __future__ import annotations

import itertools
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .admm import SolverError, SolverParams, solve
from .data import (DataError, Dataset, apply_normalizer, fit_normalizer,
                   make_folds, split)
from .kernels import KernelBank, DEFAULT_SIGMAS, build_bank
from .model import accuracy, decision_values, predict

__all__ = [
    "FULL_GRID",
    "REDUCED_C",
    "REDUCED_RHO1",
    "REDUCED_RHO23",
    "GridCell",
    "CellResult",
    "RunRecord",
    "BenchResult",
    "grid_cells",
    "cross_validate",
    "prepare",
    "train_and_test",
    "run_benchmark",
]

log = logging.getLogger(__name__)

FULL_GRID = tuple(2.0 ** e for e in range(-2, 9))
REDUCED_C = tuple(2.0 ** e for e in (-2, 0, 2, 4, 6, 8))
REDUCED_RHO1 = REDUCED_C
REDUCED_RHO23 = (1.0, 16.0)


@dataclass(frozen=True, order=True)
class GridCell:
    C: float
    rho1: float
    rho2: float
    rho3: float

    def params(self, tol=1e-3, max_iter=1000) -> SolverParams:
        return SolverParams(self.C, self.rho1, self.rho2, self.rho3, tol, max_iter)


@dataclass(frozen=True)
class CellResult:
    cell: GridCell
    mean_acc: float
    fold_accs: tuple
    failed: bool = False

    def sort_key(self):
        return (-self.mean_acc, self.cell.C, self.cell.rho1, self.cell.rho2,
                self.cell.rho3)


def grid_cells(full: bool = False, C=None, rho1=None, rho2=None, rho3=None) -> list:
    """Enumerate parameter cells.

    The full grid takes every value of {2^-2, ..., 2^8} for all four
    parameters (14641 cells). The default reduced grid uses six values for
    C and rho1 and ties rho2 = rho3 in {1, 16}. Explicit value lists
    override the corresponding axis.
    """
    if full:
        C = C or FULL_GRID
        rho1 = rho1 or FULL_GRID
        rho2 = rho2 or FULL_GRID
        rho3 = rho3 or FULL_GRID
        return sorted(GridCell(*c) for c in itertools.product(C, rho1, rho2, rho3))
    C = C or REDUCED_C
    rho1 = rho1 or REDUCED_RHO1
    if rho2 is None and rho3 is None:
        pairs = [(r, r) for r in REDUCED_RHO23]
    else:
        pairs = list(itertools.product(rho2 or REDUCED_RHO23, rho3 or REDUCED_RHO23))
    cells = [GridCell(c, r1, r2, r3) for c, r1 in itertools.product(C, rho1)
             for r2, r3 in pairs]
    if not cells:
        raise ValueError("parameter grid is empty")
    return sorted(set(cells))


def _fold_accuracy(train: Dataset, bank: KernelBank, plan, fold: int,
                   params: SolverParams) -> float:
    tr_idx, te_idx = plan.train_test(fold)
    tr = train.subset(tr_idx)
    model, _, _ = solve(tr, bank.subset(tr_idx), params)
    held = train.subset(te_idx)
    return accuracy(predict(model, held.features), held.labels)


def _eval_cell(job):
    train, bank, plan, cell, tol, max_iter = job
    params = cell.params(tol, max_iter)
    accs = []
    try:
        for fold in range(plan.k):
            accs.append(_fold_accuracy(train, bank, plan, fold, params))
    except (SolverError, DataError, ValueError) as exc:
        log.warning("cell %s failed: %s", cell, exc)
        return CellResult(cell, -1.0, tuple(accs), failed=True)
    return CellResult(cell, float(np.mean(accs)), tuple(accs))


def _map(fn, jobs, workers: int):
    if workers <= 1:
        return [fn(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, jobs, chunksize=max(1, len(jobs) // (4 * workers))))


def cross_validate(train: Dataset, bank: KernelBank, cells, k: int = 10,
                   seed: int = 0, tol: float = 1e-3, max_iter: int = 1000,
                   workers: int = 1) -> list:
    """Mean k-fold validation accuracy per cell, best first.

    ``train`` must already be normalized and ``bank`` built on its rows;
    folds slice the bank instead of rebuilding it. Ties in accuracy go to
    the lexicographically smaller (C, rho1, rho2, rho3). A cell whose
    solve fails scores -1.
    """
    plan = make_folds(train, k, seed)
    jobs = [(train, bank, plan, cell, tol, max_iter) for cell in cells]
    results = _map(_eval_cell, jobs, workers)
    return sorted(results, key=CellResult.sort_key)


def prepare(train: Dataset, test: Dataset | None, sigmas):
    """Fit normalization on ``train``, apply it to both sets, build the bank."""
    stats = fit_normalizer(train)
    trn = apply_normalizer(stats, train)
    ten = apply_normalizer(stats, test) if test is not None else None
    return stats, trn, ten, build_bank(trn.features, sigmas)


@dataclass(frozen=True)
class RunRecord:
    seed: int
    acc: float
    iterations: int
    converged: bool
    size_T: int
    d_nnz: int
    sv_margin_max: float
    stationarity_max_relative: float


def train_and_test(ds: Dataset, params: SolverParams, sigmas, train_frac: float,
                   seed: int) -> RunRecord:
    train, test = split(ds, train_frac, seed)
    stats, trn, ten, bank = prepare(train, test, sigmas)
    model, trace, report = solve(trn, bank, params, norm=stats)
    acc = accuracy(predict(model, ten.features), ten.labels)
    T = trace.T if trace.T is not None else np.array([], dtype=int)
    if len(T):
        f = decision_values(model, trn.features[T])
        margin = float(np.max(np.abs(trn.labels[T] * f - 1.0)))
    else:
        margin = 0.0
    return RunRecord(seed, acc, trace.iterations, trace.converged, len(T),
                     int(np.count_nonzero(model.d)), margin, report.max_relative)


def _run_job(job):
    ds, params, sigmas, train_frac, seed = job
    return train_and_test(ds, params, sigmas, train_frac, seed)


@dataclass
class BenchResult:
    name: str
    m: int
    n: int
    cell: GridCell
    runs: list = field(default_factory=list)
    cv: list = field(default_factory=list)

    @property
    def accs(self) -> np.ndarray:
        return np.array([r.acc for r in self.runs])

    def summary(self) -> dict:
        accs = self.accs
        return {
            "dataset": self.name,
            "m": self.m,
            "n": self.n,
            "C": self.cell.C,
            "rho1": self.cell.rho1,
            "rho2": self.cell.rho2,
            "rho3": self.cell.rho3,
            "acc_mean": float(accs.mean()),
            "acc_std": float(accs.std()),
            "iterations_mean": float(np.mean([r.iterations for r in self.runs])),
            "size_T_mean": float(np.mean([r.size_T for r in self.runs])),
            "d_nnz_mean": float(np.mean([r.d_nnz for r in self.runs])),
            "converged": int(sum(r.converged for r in self.runs)),
            "repeats": len(self.runs),
        }


def run_benchmark(ds: Dataset, name: str = "dataset", sigmas=DEFAULT_SIGMAS,
                  cells=None, repeats: int = 20, seed: int = 0,
                  train_frac: float = 0.7, folds: int = 10, tol: float = 1e-3,
                  max_iter: int = 1000, workers: int = 1) -> BenchResult:
    """Select parameters by CV on the first split, then average test ACC.

    Repeat r uses the split seeded with ``seed + r``; repeat 0 is the split
    on which the parameters were chosen.
    """
    cells = list(cells) if cells is not None else grid_cells()
    cv = []
    if len(cells) == 1:
        best = cells[0]
    else:
        train, _ = split(ds, train_frac, seed)
        _, trn, _, bank = prepare(train, None, sigmas)
        cv = cross_validate(trn, bank, cells, folds, seed, tol, max_iter, workers)
        best = cv[0].cell
    params = best.params(tol, max_iter)
    jobs = [(ds, params, tuple(sigmas), train_frac, seed + r) for r in range(repeats)]
    runs = _map(_run_job, jobs, workers)
    return BenchResult(name, ds.m, ds.n, best, runs, cv)
