"""Quantile-anchored stress targets and projection sweeps.

A stress level tau in [-1, 1] moves a column's target mean from its low
tail quantile (tau = -1) through the baseline mean (tau = 0) up to its high
tail quantile (tau = 1), linearly on each side:

    target(tau) = m + tau * (m - q(alpha))        for tau < 0
    target(tau) = m + tau * (q(1 - alpha) - m)    for tau > 0

The three anchor levels are returned exactly, with no arithmetic applied.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .constraints import EQUALITY, LINEAR, MODES, ConstraintSpec
from .dataset import EmpiricalDataset, column_mean, empirical_quantile
from .projection import ProjectedDataset, project
from .solver import SolverError


@dataclass(frozen=True)
class StressSweep:
    """A tau grid with per-tau target means for one column."""

    column: int
    alpha: float
    taus: np.ndarray
    targets: np.ndarray
    baseline_mean: float
    q_lo: float
    q_hi: float

    def __post_init__(self) -> None:
        taus = np.asarray(self.taus, dtype=float)
        targets = np.asarray(self.targets, dtype=float)
        if taus.shape != targets.shape:
            raise ValueError("taus and targets must have equal length")
        taus.setflags(write=False)
        targets.setflags(write=False)
        object.__setattr__(self, "taus", taus)
        object.__setattr__(self, "targets", targets)

    @property
    def count(self) -> int:
        return self.taus.size


@dataclass(frozen=True)
class SweepResult:
    """Successful projections (ordered by tau) plus per-tau failures."""

    projections: list[ProjectedDataset]
    failures: list[tuple[float, str]]


def stress_target(ds: EmpiricalDataset, j: int, tau: float, alpha: float) -> float:
    """Target mean for column j at stress level tau."""
    if not -1.0 <= tau <= 1.0:
        raise ValueError(f"tau must be in [-1, 1], got {tau}")
    if not 0.0 < alpha < 0.5:
        raise ValueError(f"alpha must be in (0, 0.5), got {alpha}")
    m = column_mean(ds, j)
    if tau == 0.0:
        return m
    if tau == -1.0:
        return empirical_quantile(ds, j, alpha)
    if tau == 1.0:
        return empirical_quantile(ds, j, 1.0 - alpha)
    if tau < 0.0:
        return m + tau * (m - empirical_quantile(ds, j, alpha))
    return m + tau * (empirical_quantile(ds, j, 1.0 - alpha) - m)


def make_sweep(ds: EmpiricalDataset, j: int, count: int, alpha: float) -> StressSweep:
    """Regular odd-size tau grid over [-1, 1] with its stressed targets.

    An odd count keeps tau = 0 on the grid; the grid is built from integer
    ratios so the endpoints and center are exact.
    """
    if count < 3 or count % 2 == 0:
        raise ValueError(f"count must be odd and >= 3, got {count}")
    half = (count - 1) // 2
    taus = np.array([(i - half) / half for i in range(count)])
    targets = np.array([stress_target(ds, j, t, alpha) for t in taus])
    return StressSweep(
        column=j,
        alpha=alpha,
        taus=taus,
        targets=targets,
        baseline_mean=column_mean(ds, j),
        q_lo=empirical_quantile(ds, j, alpha),
        q_hi=empirical_quantile(ds, j, 1.0 - alpha),
    )


def run_sweep(
    ds_test: EmpiricalDataset,
    sweep: StressSweep,
    mode: str = EQUALITY,
    tol: float | None = None,
    max_iter: int = 10_000,
) -> SweepResult:
    """Project ``ds_test`` once per tau with a single-column mean constraint.

    Solver failures are collected per tau and the sweep continues.  When the
    sweep statistics were computed from ``ds_test`` itself, the tau = 0 entry
    reproduces the input rows bit-exact.
    """
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}")
    if not 0 <= sweep.column < ds_test.d:
        raise ValueError(f"column {sweep.column} out of range for d={ds_test.d}")
    projections: list[ProjectedDataset] = []
    failures: list[tuple[float, str]] = []
    for tau, target in zip(sweep.taus, sweep.targets):
        spec = ConstraintSpec(LINEAR, (sweep.column,), np.array([target]), mode=mode)
        try:
            proj = project(ds_test, spec, tol=tol, max_iter=max_iter).with_tau(float(tau))
        except SolverError as exc:
            failures.append((float(tau), str(exc)))
            continue
        projections.append(proj)
    return SweepResult(projections=projections, failures=failures)
