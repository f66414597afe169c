"""Tabular data handling: CSV loading, validation, moments, quantiles, splits."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

# cells matching these (case-insensitive, stripped) count as missing values
MISSING_TOKENS = {"", "na", "nan", "null", "none"}


class DatasetError(ValueError):
    """Unreadable, non-numeric, or empty tabular input."""


@dataclass(frozen=True)
class EmpiricalDataset:
    """An n x d matrix of finite reals with unique named columns.

    The row matrix is marked read-only after construction, so instances can
    be shared across workers without defensive copies.
    """

    rows: np.ndarray
    column_names: tuple[str, ...]
    dropped_rows: int = 0

    def __post_init__(self) -> None:
        rows = np.array(self.rows, dtype=float, order="C")
        if rows.ndim != 2:
            raise DatasetError(f"expected a 2-d matrix, got shape {rows.shape}")
        n, d = rows.shape
        if n < 1 or d < 1:
            raise DatasetError("dataset needs at least one row and one column")
        if not np.all(np.isfinite(rows)):
            raise DatasetError("dataset contains non-finite values")
        names = tuple(str(c) for c in self.column_names)
        if len(names) != d:
            raise DatasetError(f"{len(names)} column names for {d} columns")
        if len(set(names)) != len(names):
            raise DatasetError("column names must be unique")
        rows.setflags(write=False)
        object.__setattr__(self, "rows", rows)
        object.__setattr__(self, "column_names", names)

    @property
    def n(self) -> int:
        return self.rows.shape[0]

    @property
    def d(self) -> int:
        return self.rows.shape[1]

    def column_index(self, name: str) -> int:
        try:
            return self.column_names.index(name)
        except ValueError:
            raise DatasetError(f"unknown column {name!r}") from None

    def column(self, j: int) -> np.ndarray:
        if not 0 <= j < self.d:
            raise DatasetError(f"column index {j} out of range for d={self.d}")
        return self.rows[:, j]

    def select_columns(self, names: list[str] | tuple[str, ...]) -> "EmpiricalDataset":
        idx = [self.column_index(c) for c in names]
        return EmpiricalDataset(self.rows[:, idx], tuple(names))

    def take(self, indices) -> "EmpiricalDataset":
        """Row subset (duplicates allowed, e.g. bootstrap resamples)."""
        indices = np.asarray(indices, dtype=int)
        if indices.size < 1:
            raise DatasetError("row selection is empty")
        return EmpiricalDataset(self.rows[indices], self.column_names)


@dataclass(frozen=True)
class ColumnStat:
    """Mean and a symmetric pair of tail quantiles for one column."""

    mean: float
    quantile_lo: float
    quantile_hi: float
    alpha: float

    def __post_init__(self) -> None:
        if not 0.0 < self.alpha < 0.5:
            raise DatasetError(f"alpha must be in (0, 0.5), got {self.alpha}")
        if self.quantile_lo > self.quantile_hi:
            raise DatasetError("quantile_lo exceeds quantile_hi")


def _is_missing(cell: str) -> bool:
    return cell.strip().lower() in MISSING_TOKENS


def _parse_cell(cell: str, row: int, name: str) -> float:
    try:
        value = float(cell)
    except ValueError:
        raise DatasetError(
            f"row {row}, column {name!r}: cannot parse {cell.strip()!r} as a number"
        ) from None
    if not math.isfinite(value):
        raise DatasetError(f"row {row}, column {name!r}: non-finite value {cell.strip()!r}")
    return value


def load_csv(path, numeric_columns: list[str] | None = None) -> EmpiricalDataset:
    """Load a UTF-8, comma-separated, headed CSV into an EmpiricalDataset.

    When ``numeric_columns`` is given, exactly those columns are kept (file
    order preserved) and every cell in them must parse as a real number.
    Otherwise columns whose non-missing cells all parse as reals are kept
    and the rest are discarded.  Rows with a missing value in any retained
    column are dropped; the count is reported on ``dropped_rows``.
    """
    path = Path(path)
    try:
        with path.open(newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            try:
                header = [c.strip() for c in next(reader)]
            except StopIteration:
                raise DatasetError(f"{path}: empty file") from None
            raw_rows = [row for row in reader if row]
    except OSError as exc:
        raise DatasetError(f"cannot read {path}: {exc}") from None
    if len(set(header)) != len(header):
        raise DatasetError(f"{path}: duplicate column names in header")

    if numeric_columns is not None:
        unknown = [c for c in numeric_columns if c not in header]
        if unknown:
            raise DatasetError(f"{path}: unknown columns {unknown}")
        keep = [i for i, c in enumerate(header) if c in set(numeric_columns)]
    else:
        keep = _detect_numeric(header, raw_rows)
        if not keep:
            raise DatasetError(f"{path}: no numeric columns found")

    names = tuple(header[i] for i in keep)
    data: list[list[float]] = []
    dropped = 0
    for r, row in enumerate(raw_rows, start=1):
        if len(row) < len(header):
            row = row + [""] * (len(header) - len(row))
        cells = [row[i] for i in keep]
        if any(_is_missing(c) for c in cells):
            dropped += 1
            continue
        data.append([_parse_cell(c, r, names[k]) for k, c in enumerate(cells)])
    if not data:
        raise DatasetError(f"{path}: no usable rows (dropped {dropped})")
    return EmpiricalDataset(np.array(data, dtype=float), names, dropped_rows=dropped)


def _detect_numeric(header: list[str], raw_rows: list[list[str]]) -> list[int]:
    keep = []
    for i in range(len(header)):
        seen = False
        ok = True
        for row in raw_rows:
            cell = row[i] if i < len(row) else ""
            if _is_missing(cell):
                continue
            seen = True
            try:
                value = float(cell)
            except ValueError:
                ok = False
                break
            if not math.isfinite(value):
                ok = False
                break
        if ok and seen:
            keep.append(i)
    return keep


def column_mean(ds: EmpiricalDataset, j: int) -> float:
    """Arithmetic mean of column j."""
    return float(np.mean(ds.column(j)))


def empirical_quantile(ds: EmpiricalDataset, j: int, p: float) -> float:
    """Nearest-rank quantile: the ceil(p*n)-th smallest value of column j."""
    if not 0.0 < p < 1.0:
        raise DatasetError(f"quantile level must be in (0, 1), got {p}")
    col = np.sort(ds.column(j))
    rank = math.ceil(p * ds.n)
    rank = min(max(rank, 1), ds.n)
    return float(col[rank - 1])


def column_stat(ds: EmpiricalDataset, j: int, alpha: float) -> ColumnStat:
    if not 0.0 < alpha < 0.5:
        raise DatasetError(f"alpha must be in (0, 0.5), got {alpha}")
    return ColumnStat(
        mean=column_mean(ds, j),
        quantile_lo=empirical_quantile(ds, j, alpha),
        quantile_hi=empirical_quantile(ds, j, 1.0 - alpha),
        alpha=alpha,
    )


def split(
    ds: EmpiricalDataset, train_fraction: float, seed: int
) -> tuple[EmpiricalDataset, EmpiricalDataset]:
    """Deterministic disjoint train/test partition; train size floor(n*fraction)."""
    if not 0.0 < train_fraction < 1.0:
        raise DatasetError(f"train_fraction must be in (0, 1), got {train_fraction}")
    train_n = int(math.floor(ds.n * train_fraction + 1e-9))
    if train_n < 1 or train_n >= ds.n:
        raise DatasetError(
            f"fraction {train_fraction} on n={ds.n} leaves an empty part"
        )
    perm = np.random.default_rng(seed).permutation(ds.n)
    train_idx = np.sort(perm[:train_n])
    test_idx = np.sort(perm[train_n:])
    return ds.take(train_idx), ds.take(test_idx)
