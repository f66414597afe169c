"""Model-response and fairness measures evaluated on projected datasets.

Only label/output statistics are computed here: the projected rows have no
ground-truth responses, so error metrics (accuracy, MSE, ...) are
deliberately absent from this module's API.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import norm as _normal

from .dataset import DatasetError
from .models import ModelError
from .projection import ProjectedDataset, stressed_column_indices

METRIC_PP1 = "pp1"
METRIC_MEAN_VAR = "mean_var"
METRIC_DI = "di"


class MetricError(ValueError):
    """Empty batch, malformed labels, or an absent group."""


class UndefinedMetricError(MetricError):
    """Disparate impact with no positives in the reference group."""


@dataclass(frozen=True)
class GroupCounts:
    """Group sizes and positive-decision counts for sensitive values 0 and 1."""

    n0: int
    k0: int
    n1: int
    k1: int

    def __post_init__(self) -> None:
        if self.n0 < 1 or self.n1 < 1:
            raise MetricError("both groups need at least one member")
        if not (0 <= self.k0 <= self.n0 and 0 <= self.k1 <= self.n1):
            raise MetricError("positive counts must lie within group sizes")


@dataclass(frozen=True)
class MetricSeries:
    """One metric traced over a tau grid for one model."""

    metric_name: str
    model_name: str
    taus: np.ndarray
    values: np.ndarray
    lower_ci: np.ndarray | None = None
    upper_ci: np.ndarray | None = None
    failed: tuple[int, ...] = ()

    def __post_init__(self) -> None:
        taus = np.asarray(self.taus, dtype=float)
        values = np.asarray(self.values, dtype=float)
        if taus.shape != values.shape:
            raise MetricError("taus and values must have equal length")
        object.__setattr__(self, "taus", taus)
        object.__setattr__(self, "values", values)
        for attr in ("lower_ci", "upper_ci"):
            bound = getattr(self, attr)
            if bound is not None:
                bound = np.asarray(bound, dtype=float)
                if bound.shape != values.shape:
                    raise MetricError(f"{attr} must match values in length")
                object.__setattr__(self, attr, bound)


def pp1(preds) -> float:
    """Portion of predicted positive labels."""
    preds = np.asarray(preds, dtype=float)
    if preds.size == 0:
        raise MetricError("empty prediction batch")
    if not np.all(np.isin(preds, (0.0, 1.0))):
        raise MetricError("pp1 needs binary {0, 1} predictions")
    return float(np.mean(preds))


def reg_mean_var(preds) -> tuple[float, float]:
    """Mean and population variance of a regression batch."""
    preds = np.asarray(preds, dtype=float)
    if preds.size == 0:
        raise MetricError("empty prediction batch")
    m = float(np.mean(preds))
    return m, float(np.mean((preds - m) ** 2))


def group_counts(preds, sensitive) -> GroupCounts:
    """Tally positive predictions by binary sensitive attribute."""
    preds = np.asarray(preds, dtype=float)
    sensitive = np.asarray(sensitive, dtype=float)
    if preds.shape != sensitive.shape:
        raise MetricError("predictions and sensitive values must align")
    if not np.all(np.isin(sensitive, (0.0, 1.0))):
        raise MetricError("sensitive attribute must take values in {0, 1}")
    if not np.all(np.isin(preds, (0.0, 1.0))):
        raise MetricError("disparate impact needs binary predictions")
    g0 = sensitive == 0.0
    g1 = sensitive == 1.0
    if not np.any(g0) or not np.any(g1):
        raise MetricError("both sensitive groups must be present")
    return GroupCounts(
        n0=int(g0.sum()),
        k0=int(preds[g0].sum()),
        n1=int(g1.sum()),
        k1=int(preds[g1].sum()),
    )


def disparate_impact(
    counts: GroupCounts, confidence: float = 0.95
) -> tuple[float, float, float]:
    """Ratio of positive rates (group 0 over group 1) with a log-ratio CI.

    The interval is the delta method on log(p0/p1):

        log di +- z * sqrt((1-p0)/(n0 p0) + (1-p1)/(n1 p1))

    A zero numerator count returns a point estimate of 0 with a one-sided
    interval [0, p0_upper / p1] from the exact binomial bound on p0.  A zero
    denominator count is undefined and raises rather than reporting infinity.
    """
    if not 0.0 < confidence < 1.0:
        raise MetricError(f"confidence must be in (0, 1), got {confidence}")
    if counts.k1 == 0:
        raise UndefinedMetricError(
            "disparate impact undefined: no positive predictions in group 1"
        )
    p1 = counts.k1 / counts.n1
    if counts.k0 == 0:
        p0_upper = 1.0 - (1.0 - confidence) ** (1.0 / counts.n0)
        return 0.0, 0.0, p0_upper / p1
    p0 = counts.k0 / counts.n0
    di = (counts.k0 / counts.n0) / (counts.k1 / counts.n1)
    # log difference keeps the group-swap symmetry exact in log scale
    log_di = math.log(p0) - math.log(p1)
    se = math.sqrt((1.0 - p0) / (counts.n0 * p0) + (1.0 - p1) / (counts.n1 * p1))
    z = float(_normal.ppf((1.0 + confidence) / 2.0))
    return di, math.exp(log_di - z * se), math.exp(log_di + z * se)


def series_over_sweep(
    models: list,
    projections: list[ProjectedDataset],
    metric: str,
    sensitive_column: str | None = None,
    confidence: float = 0.95,
) -> list[MetricSeries]:
    """Evaluate each model on each projected dataset.

    Emits one series per model for ``pp1`` and ``di``, and two per model
    ("mean", "variance") for ``mean_var``.  Cells that fail to evaluate are
    recorded in ``failed`` (value NaN) and the series continues.
    """
    if metric not in (METRIC_PP1, METRIC_MEAN_VAR, METRIC_DI):
        raise MetricError(f"unknown metric {metric!r}")
    if not projections:
        raise MetricError("no projected datasets to evaluate")
    if any(p.tau is None for p in projections):
        raise MetricError("projections must carry their tau (use run_sweep)")
    taus = np.array([p.tau for p in projections])

    if metric == METRIC_DI:
        if sensitive_column is None:
            raise MetricError("disparate impact needs a sensitive column")
        for p in projections:
            s_idx = p.source.column_index(sensitive_column)
            stressed = stressed_column_indices(p.spec, p.source.d)
            if s_idx in stressed:
                raise MetricError(
                    f"sensitive column {sensitive_column!r} is stressed by the sweep"
                )

    out: list[MetricSeries] = []
    for model in models:
        name = getattr(model, "name", model.__class__.__name__)
        values = np.full(len(projections), np.nan)
        second = np.full(len(projections), np.nan)
        lo = np.full(len(projections), np.nan)
        hi = np.full(len(projections), np.nan)
        failed: list[int] = []
        for i, proj in enumerate(projections):
            try:
                feats = proj.to_dataset().select_columns(list(model.feature_names))
                preds = model.predict(feats.rows)
                if metric == METRIC_PP1:
                    values[i] = pp1(preds)
                elif metric == METRIC_MEAN_VAR:
                    values[i], second[i] = reg_mean_var(preds)
                else:
                    s_idx = proj.source.column_index(sensitive_column)
                    counts = group_counts(preds, proj.rows[:, s_idx])
                    values[i], lo[i], hi[i] = disparate_impact(counts, confidence)
            except (ModelError, MetricError, DatasetError):
                failed.append(i)
        if metric == METRIC_PP1:
            out.append(MetricSeries("pp1", name, taus, values, failed=tuple(failed)))
        elif metric == METRIC_MEAN_VAR:
            out.append(MetricSeries("mean", name, taus, values, failed=tuple(failed)))
            out.append(
                MetricSeries("variance", name, taus, second, failed=tuple(failed))
            )
        else:
            out.append(
                MetricSeries(
                    "di", name, taus, values, lower_ci=lo, upper_ci=hi,
                    failed=tuple(failed),
                )
            )
    return out
