"""Projected datasets, transport cost, and exact small-instance verification.

``project`` calibrates a multiplier and pushes every row through the
transport map.  ``exact_w2_small`` is an independent oracle: the squared
2-Wasserstein distance between two equal-size uniform empirical measures is
an assignment problem on the pairwise squared-distance matrix, solved
exactly.  ``optimality_check`` and ``consistency_curve`` use the oracle to
verify, on small instances, that the transported sample really is the
cheapest feasible one and that projections of subsamples approach the
full-data projection.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
from scipy.optimize import linear_sum_assignment
from scipy.spatial.distance import cdist

from .constraints import EQUALITY, NORM, ConstraintSpec, transport_rows
from .dataset import EmpiricalDataset
from .solver import Multiplier, solve_equality, solve_inequality

W2_SIZE_CAP = 512
MAP_COST_ATOL = 1e-8


@dataclass(frozen=True)
class ProjectedDataset:
    """Transported rows with the multiplier and cost that produced them."""

    source: EmpiricalDataset
    spec: ConstraintSpec
    rows: np.ndarray
    multiplier: Multiplier
    squared_cost: float
    tau: float | None = None

    def __post_init__(self) -> None:
        rows = np.asarray(self.rows, dtype=float)
        rows.setflags(write=False)
        object.__setattr__(self, "rows", rows)

    @property
    def column_names(self) -> tuple[str, ...]:
        return self.source.column_names

    def to_dataset(self) -> EmpiricalDataset:
        return EmpiricalDataset(self.rows, self.source.column_names)

    def with_tau(self, tau: float) -> "ProjectedDataset":
        return replace(self, tau=float(tau))


@dataclass(frozen=True)
class OptimalityReport:
    """Outcome of the exact-transport verification on one projection."""

    squared_cost: float
    assignment_cost: float
    map_gap: float
    trials: int
    violations: tuple[tuple[int, float], ...]  # (trial index, cost deficit)
    passed: bool


def project(
    ds: EmpiricalDataset,
    spec: ConstraintSpec,
    tol: float | None = None,
    max_iter: int = 10_000,
) -> ProjectedDataset:
    """Calibrate the multiplier for ``spec`` and transport every row."""
    spec.validate_dims(ds.d)
    if spec.mode == EQUALITY:
        mult = solve_equality(ds, spec, tol=tol, max_iter=max_iter)
    else:
        mult = solve_inequality(ds, spec, tol=tol, max_iter=max_iter)
    rows = transport_rows(spec, mult.lam, ds.rows)
    cost = float(np.mean(np.sum((rows - ds.rows) ** 2, axis=1)))
    return ProjectedDataset(
        source=ds, spec=spec, rows=rows, multiplier=mult, squared_cost=cost
    )


def exact_w2_small(a: EmpiricalDataset, b: EmpiricalDataset) -> float:
    """Exact squared 2-Wasserstein distance between equal-size uniform samples.

    Solves the minimum-cost perfect matching on the dense matrix of pairwise
    squared Euclidean distances; intended as a verification oracle, so the
    size is capped at 512 points.
    """
    if a.n != b.n:
        raise ValueError(f"size mismatch: {a.n} vs {b.n}")
    if a.d != b.d:
        raise ValueError(f"dimension mismatch: {a.d} vs {b.d}")
    if a.n > W2_SIZE_CAP:
        raise ValueError(f"n={a.n} exceeds the exact-oracle cap {W2_SIZE_CAP}")
    cost = cdist(a.rows, b.rows, "sqeuclidean")
    rows, cols = linear_sum_assignment(cost)
    return float(cost[rows, cols].sum() / a.n)


def optimality_check(
    ds: EmpiricalDataset,
    spec: ConstraintSpec,
    proj: ProjectedDataset,
    trials: int,
    seed: int,
) -> OptimalityReport:
    """Verify the projection against the exact assignment oracle.

    Two checks: the transported sample's exact distance to the source equals
    the map cost (the row-wise coupling is optimal), and ``trials`` random
    feasible competitors, built by jittering the source and re-solving the
    constraint, are never cheaper than the projection.
    """
    if ds.n > W2_SIZE_CAP:
        raise ValueError(f"n={ds.n} exceeds the exact-oracle cap {W2_SIZE_CAP}")
    assignment_cost = exact_w2_small(proj.to_dataset(), ds)
    map_gap = abs(assignment_cost - proj.squared_cost)

    rng = np.random.default_rng(seed)
    scale = 0.25 * ds.rows.std(axis=0)
    violations = []
    for trial in range(trials):
        jittered = ds.rows + rng.normal(size=ds.rows.shape) * scale
        alt = project(EmpiricalDataset(jittered, ds.column_names), spec)
        w2_alt = exact_w2_small(alt.to_dataset(), ds)
        deficit = proj.squared_cost - w2_alt
        if deficit > MAP_COST_ATOL:
            violations.append((trial, float(deficit)))
    passed = map_gap <= MAP_COST_ATOL and not violations
    return OptimalityReport(
        squared_cost=proj.squared_cost,
        assignment_cost=assignment_cost,
        map_gap=float(map_gap),
        trials=trials,
        violations=tuple(violations),
        passed=passed,
    )


def consistency_curve(
    ds: EmpiricalDataset,
    spec: ConstraintSpec,
    sizes: list[int],
    seeds: list[int],
) -> list[tuple[int, float]]:
    """Median exact distance between subsample projections and the full one.

    For each size and seed, a bootstrap subsample of the source is projected
    (the target in ``spec`` stays fixed) and compared against an equal-size
    bootstrap draw from the full-data projection.  Requesting the full size
    uses the rows as-is on both ends, so that entry is exactly zero.
    """
    for s in sizes:
        if not 1 <= s <= min(ds.n, W2_SIZE_CAP):
            raise ValueError(f"size {s} outside [1, min(n, {W2_SIZE_CAP})]")
    proj_full = project(ds, spec)
    out = []
    for size in sizes:
        dists = []
        for seed in seeds:
            if size == ds.n:
                sub = ds
                ref_rows = proj_full.rows
            else:
                rng = np.random.default_rng(seed)
                sub = ds.take(rng.integers(0, ds.n, size))
                ref_rows = proj_full.rows[rng.integers(0, ds.n, size)]
            psub = project(sub, spec)
            ref = EmpiricalDataset(ref_rows, ds.column_names)
            dists.append(exact_w2_small(psub.to_dataset(), ref))
        out.append((size, float(np.median(dists))))
    return out


def stressed_column_indices(spec: ConstraintSpec, d: int) -> tuple[int, ...]:
    """Columns whose values the transport map can move."""
    return tuple(range(d)) if spec.family == NORM else spec.indices


def write_csv(proj: ProjectedDataset, path) -> Path:
    """Export transported rows with ``__tau`` and ``__lambda_*`` provenance columns."""
    path = Path(path)
    lam = proj.multiplier.lam
    header = list(proj.column_names) + ["__tau"] + [
        f"__lambda_{i}" for i in range(lam.size)
    ]
    tau = "" if proj.tau is None else repr(float(proj.tau))
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        lam_cells = [repr(float(v)) for v in lam]
        for row in proj.rows:
            writer.writerow([repr(float(v)) for v in row] + [tau] + lam_cells)
    return path
