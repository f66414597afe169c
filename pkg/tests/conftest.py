"""Shared helpers: small dataset builders and the seeded random-instance pool."""

from __future__ import annotations

import numpy as np

from wstress import (
    CROSS_PRODUCT,
    EQUALITY,
    LINEAR,
    LINEAR_CROSS,
    LINEAR_QUADRATIC,
    NORM,
    QUADRATIC,
    ConstraintSpec,
    EmpiricalDataset,
)

FAMILY_CYCLE = (LINEAR, NORM, QUADRATIC, LINEAR_QUADRATIC, CROSS_PRODUCT, LINEAR_CROSS)
CLOSED_FAMILIES = {LINEAR, NORM, QUADRATIC, LINEAR_QUADRATIC}


def column_ds(values, name: str = "x") -> EmpiricalDataset:
    """One-column dataset from a flat list."""
    return EmpiricalDataset(np.asarray(values, dtype=float).reshape(-1, 1), (name,))


def matrix_ds(rows) -> EmpiricalDataset:
    rows = np.asarray(rows, dtype=float)
    return EmpiricalDataset(rows, tuple(f"c{i}" for i in range(rows.shape[1])))


def random_instance(
    seed: int, max_n: int = 200, max_d: int = 10, mode: str = EQUALITY
) -> tuple[EmpiricalDataset, ConstraintSpec]:
    """Seeded dataset plus an attainable-target constraint.

    Families cycle with the seed; targets are sampled as moderate
    perturbations of the current moments so every instance is solvable well
    inside the multiplier domain.
    """
    rng = np.random.default_rng(seed)
    n = int(rng.integers(8, max_n + 1))
    d = int(rng.integers(2, max_d + 1))
    rows = rng.uniform(-1, 1, d) + rng.normal(size=(n, d)) * rng.uniform(0.5, 1.5, d)
    ds = matrix_ds(rows)
    family = FAMILY_CYCLE[seed % len(FAMILY_CYCLE)]

    if family == LINEAR:
        k = int(rng.integers(1, min(3, d) + 1))
        idx = tuple(int(j) for j in rng.choice(d, k, replace=False))
        t = rows[:, list(idx)].mean(axis=0) + rng.uniform(-0.8, 0.8, k)
        spec = ConstraintSpec(LINEAR, idx, t, mode=mode)
    elif family == NORM:
        s = float(np.mean(np.sum(rows**2, axis=1)))
        spec = ConstraintSpec(NORM, (), np.array([s * rng.uniform(0.6, 1.8)]), mode=mode)
    elif family == QUADRATIC:
        k = int(rng.integers(1, min(3, d) + 1))
        idx = tuple(int(j) for j in rng.choice(d, k, replace=False))
        s = (rows[:, list(idx)] ** 2).mean(axis=0)
        spec = ConstraintSpec(QUADRATIC, idx, s * rng.uniform(0.6, 1.8, k), mode=mode)
    elif family == LINEAR_QUADRATIC:
        j0 = int(rng.integers(0, d))
        m = float(np.mean(rows[:, j0]))
        var = float(np.var(rows[:, j0]))
        a = rng.uniform(0.7, 1.4)
        t1 = a * m + rng.uniform(-0.5, 0.5)
        t2 = t1**2 + a**2 * var
        spec = ConstraintSpec(LINEAR_QUADRATIC, (j0,), np.array([t1, t2]), mode=mode)
    elif family == CROSS_PRODUCT:
        j0, j1 = (int(j) for j in rng.choice(d, 2, replace=False))
        c = float(np.mean(rows[:, j0] * rows[:, j1]))
        scale = float(rows[:, j0].std() * rows[:, j1].std()) + abs(c)
        t = c + rng.uniform(-0.25, 0.25) * scale
        spec = ConstraintSpec(CROSS_PRODUCT, (j0, j1), np.array([t]), mode=mode)
    else:
        j0, j1 = (int(j) for j in rng.choice(d, 2, replace=False))
        m0 = float(np.mean(rows[:, j0]))
        m1 = float(np.mean(rows[:, j1]))
        c = float(np.mean(rows[:, j0] * rows[:, j1]))
        scale = float(rows[:, j0].std() * rows[:, j1].std()) + abs(c)
        t = np.array(
            [
                m0 + rng.uniform(-0.3, 0.3) * (rows[:, j0].std() + 1e-6),
                m1 + rng.uniform(-0.3, 0.3) * (rows[:, j1].std() + 1e-6),
                c + rng.uniform(-0.2, 0.2) * scale,
            ]
        )
        spec = ConstraintSpec(LINEAR_CROSS, (j0, j1), t, mode=mode)
    return ds, spec
