"""Black-box predictor handles: deterministic built-ins plus a line-protocol client.

Built-ins are deliberately scale-robust and fully deterministic (ties in
tree splits go to the lowest feature index, then the lowest threshold;
classification ties predict 0), so metric curves are reproducible bit for
bit.  External predictors are reached over a newline protocol on the child
process's stdin/stdout:

    client: HELLO v1 <cls|reg> <d>          server: READY
    client: <name_1>,...,<name_d>
    client: PREDICT <n>                     server: <v_1> .. <v_n> then END,
    client: n comma-separated rows                  or a single ERR <message>
    client: QUIT                            server exits 0

Numbers travel as shortest round-trip decimal strings (Python ``repr``).
"""

from __future__ import annotations

import shlex
import subprocess
import threading
from dataclasses import dataclass, field

import numpy as np

from .dataset import EmpiricalDataset

CLASSIFICATION = "classification"
REGRESSION = "regression"
TASKS = (CLASSIFICATION, REGRESSION)

GE = "ge"
LT = "lt"

_TASK_TOKEN = {CLASSIFICATION: "cls", REGRESSION: "reg"}
VARIANCE_FLOOR = 1e-9


class ModelError(RuntimeError):
    """Invalid training data or prediction input."""


class ExternalModelError(ModelError):
    """Protocol failure or error reply from an external predictor."""


def _check_rows(rows, feature_names) -> np.ndarray:
    rows = np.asarray(rows, dtype=float)
    if rows.size == 0:
        d = len(feature_names) if feature_names is not None else 0
        return rows.reshape(0, d)
    if rows.ndim == 1:
        rows = rows.reshape(1, -1)
    if feature_names is not None and rows.shape[1] != len(feature_names):
        raise ModelError(
            f"expected {len(feature_names)} feature columns, got {rows.shape[1]}"
        )
    return rows


# --- decision tree -----------------------------------------------------------

@dataclass
class _TreeNode:
    value: float | None = None
    feature: int = -1
    threshold: float = 0.0
    left: "_TreeNode | None" = None
    right: "_TreeNode | None" = None


def _gini(counts: np.ndarray) -> float:
    n = counts.sum()
    p = counts / n
    return float(1.0 - np.sum(p * p))


def _leaf_value(y: np.ndarray, task: str) -> float:
    if task == REGRESSION:
        return float(np.mean(y))
    ones = int(np.sum(y == 1.0))
    return 1.0 if ones > y.size - ones else 0.0  # tie predicts 0


def _best_split(X: np.ndarray, y: np.ndarray, min_leaf: int, task: str):
    """Lowest weighted child impurity; ties keep the first candidate found
    (features scanned in index order, thresholds ascending)."""
    n, d = X.shape
    if task == CLASSIFICATION:
        parent = _gini(np.array([np.sum(y == 0.0), np.sum(y == 1.0)]))
    else:
        parent = float(np.var(y))
    best = None
    best_score = parent
    for j in range(d):
        order = np.argsort(X[:, j], kind="stable")
        xs = X[order, j]
        ys = y[order]
        if task == CLASSIFICATION:
            ones_prefix = np.cumsum(ys == 1.0)
            total_ones = ones_prefix[-1]
        else:
            s_prefix = np.cumsum(ys)
            ss_prefix = np.cumsum(ys * ys)
            s_total = s_prefix[-1]
            ss_total = ss_prefix[-1]
        for i in range(1, n):
            if xs[i - 1] == xs[i]:
                continue
            n_l, n_r = i, n - i
            if n_l < min_leaf or n_r < min_leaf:
                continue
            if task == CLASSIFICATION:
                ones_l = ones_prefix[i - 1]
                imp_l = _gini(np.array([n_l - ones_l, ones_l]))
                ones_r = total_ones - ones_l
                imp_r = _gini(np.array([n_r - ones_r, ones_r]))
            else:
                s_l, ss_l = s_prefix[i - 1], ss_prefix[i - 1]
                imp_l = max(ss_l / n_l - (s_l / n_l) ** 2, 0.0)
                s_r, ss_r = s_total - s_l, ss_total - ss_l
                imp_r = max(ss_r / n_r - (s_r / n_r) ** 2, 0.0)
            score = (n_l * imp_l + n_r * imp_r) / n
            if score < best_score:
                best_score = score
                best = (j, (xs[i - 1] + xs[i]) / 2.0)
    return best


def _grow(X, y, depth, max_depth, min_leaf, task) -> _TreeNode:
    if (
        depth >= max_depth
        or y.size < 2 * min_leaf
        or y.size < 2
        or np.all(y == y[0])
    ):
        return _TreeNode(value=_leaf_value(y, task))
    found = _best_split(X, y, min_leaf, task)
    if found is None:
        return _TreeNode(value=_leaf_value(y, task))
    j, thr = found
    mask = X[:, j] < thr
    return _TreeNode(
        feature=j,
        threshold=thr,
        left=_grow(X[mask], y[mask], depth + 1, max_depth, min_leaf, task),
        right=_grow(X[~mask], y[~mask], depth + 1, max_depth, min_leaf, task),
    )


class DecisionTreeModel:
    """Axis-aligned binary tree: Gini splits for classification, variance
    reduction for regression."""

    kind = "tree"

    def __init__(self, root: _TreeNode, task: str, feature_names, name: str = "tree"):
        self._root = root
        self.task = task
        self.feature_names = tuple(feature_names)
        self.name = name

    def predict(self, rows) -> np.ndarray:
        rows = _check_rows(rows, self.feature_names)
        out = np.empty(rows.shape[0])
        for i, x in enumerate(rows):
            node = self._root
            while node.value is None:
                node = node.left if x[node.feature] < node.threshold else node.right
            out[i] = node.value
        return out


def fit_tree(
    train: EmpiricalDataset,
    target_column: str,
    task: str = CLASSIFICATION,
    max_depth: int = 4,
    min_leaf: int = 1,
    seed: int = 0,
) -> DecisionTreeModel:
    """Grow a deterministic tree; ``seed`` is accepted for interface parity
    but the construction is tie-broken, not randomized."""
    del seed
    if task not in TASKS:
        raise ModelError(f"unknown task {task!r}")
    if max_depth < 0 or min_leaf < 1:
        raise ModelError("max_depth must be >= 0 and min_leaf >= 1")
    tgt = train.column_index(target_column)
    y = train.column(tgt)
    features = [c for c in train.column_names if c != target_column]
    if not features:
        raise ModelError("training data has no feature columns")
    X = train.select_columns(features).rows
    if train.n < 2:
        raise ModelError("degenerate training set: a single row cannot be split")
    if task == CLASSIFICATION and not np.all(np.isin(y, (0.0, 1.0))):
        raise ModelError("classification target must take values in {0, 1}")
    root = _grow(X, y, 0, max_depth, min_leaf, task)
    return DecisionTreeModel(root, task, features)


# --- Gaussian naive Bayes ----------------------------------------------------

class NaiveBayesModel:
    """Per-feature Gaussian class conditionals with a variance floor;
    posterior ties predict 0."""

    kind = "naive_bayes"
    task = CLASSIFICATION

    def __init__(self, priors, means, variances, feature_names, name: str = "nb"):
        self._log_priors = np.log(priors)
        self._means = means
        self._vars = variances
        self.feature_names = tuple(feature_names)
        self.name = name

    def predict(self, rows) -> np.ndarray:
        rows = _check_rows(rows, self.feature_names)
        if rows.shape[0] == 0:
            return np.empty(0)
        scores = np.empty((rows.shape[0], 2))
        for cls in (0, 1):
            mu = self._means[cls]
            var = self._vars[cls]
            ll = -0.5 * (np.log(2.0 * np.pi * var) + (rows - mu) ** 2 / var)
            scores[:, cls] = ll.sum(axis=1) + self._log_priors[cls]
        return (scores[:, 1] > scores[:, 0]).astype(float)


def fit_naive_bayes(
    train: EmpiricalDataset, target_column: str, seed: int = 0
) -> NaiveBayesModel:
    del seed  # deterministic fit
    tgt = train.column_index(target_column)
    y = train.column(tgt)
    if not np.all(np.isin(y, (0.0, 1.0))):
        raise ModelError("classification target must take values in {0, 1}")
    features = [c for c in train.column_names if c != target_column]
    if not features:
        raise ModelError("training data has no feature columns")
    X = train.select_columns(features).rows
    priors = np.empty(2)
    means = np.empty((2, X.shape[1]))
    variances = np.empty((2, X.shape[1]))
    for cls in (0, 1):
        mask = y == float(cls)
        if not np.any(mask):
            raise ModelError(f"class {cls} absent from the training data")
        priors[cls] = mask.mean()
        means[cls] = X[mask].mean(axis=0)
        variances[cls] = np.maximum(X[mask].var(axis=0), VARIANCE_FLOOR)
    return NaiveBayesModel(priors, means, variances, features)


# --- threshold rule ----------------------------------------------------------

@dataclass
class ThresholdModel:
    """Predicts 1{x_j >= c} (direction "ge") or its complement ("lt")."""

    j: int
    c: float
    direction: str = GE
    feature_names: tuple[str, ...] | None = None
    name: str = "threshold"
    kind: str = field(default="threshold", repr=False)
    task: str = field(default=CLASSIFICATION, repr=False)

    def __post_init__(self) -> None:
        if self.direction not in (GE, LT):
            raise ModelError(f"direction must be 'ge' or 'lt', got {self.direction!r}")

    def predict(self, rows) -> np.ndarray:
        rows = _check_rows(rows, self.feature_names)
        if rows.shape[0] == 0:
            return np.empty(0)
        if not 0 <= self.j < rows.shape[1]:
            raise ModelError(f"threshold column {self.j} out of range")
        col = rows[:, self.j]
        hits = col >= self.c if self.direction == GE else col < self.c
        return hits.astype(float)


def threshold_model(
    j: int, c: float, direction: str = GE, feature_names=None
) -> ThresholdModel:
    names = tuple(feature_names) if feature_names is not None else None
    return ThresholdModel(j=int(j), c=float(c), direction=direction, feature_names=names)


# --- external predictor over the line protocol -------------------------------

class ExternalModel:
    """Client for a predictor process speaking the v1 line protocol.

    One request is in flight per handle; callers wanting parallel batches
    open several handles.  Use as a context manager or call ``close`` to send
    QUIT and reap the child.
    """

    kind = "external"

    def __init__(self, command: str, task: str, feature_names, name: str | None = None):
        if task not in TASKS:
            raise ModelError(f"unknown task {task!r}")
        self.task = task
        self.feature_names = tuple(feature_names)
        self.command = command
        self.name = name if name is not None else f"external:{command}"
        self._lock = threading.Lock()
        self._proc = subprocess.Popen(
            shlex.split(command),
            stdin=subprocess.PIPE,
            stdout=subprocess.PIPE,
            text=True,
            bufsize=1,
        )
        try:
            self._send(f"HELLO v1 {_TASK_TOKEN[task]} {len(self.feature_names)}")
            self._send(",".join(self.feature_names))
            reply = self._read_line()
            if reply != "READY":
                raise ExternalModelError(f"expected READY, got {reply!r}")
        except Exception:
            self._proc.kill()
            raise

    def _send(self, line: str) -> None:
        try:
            self._proc.stdin.write(line + "\n")
            self._proc.stdin.flush()
        except (BrokenPipeError, ValueError) as exc:
            raise ExternalModelError(f"external predictor went away: {exc}") from None

    def _read_line(self) -> str:
        line = self._proc.stdout.readline()
        if line == "":
            raise ExternalModelError("external predictor closed the stream")
        line = line.rstrip("\n")
        if line.startswith("ERR "):
            raise ExternalModelError(line[4:])
        return line

    def predict(self, rows) -> np.ndarray:
        rows = _check_rows(rows, self.feature_names)
        with self._lock:
            self._send(f"PREDICT {rows.shape[0]}")
            for row in rows:
                self._send(",".join(repr(float(v)) for v in row))
            values = np.empty(rows.shape[0])
            for i in range(rows.shape[0]):
                text = self._read_line()
                try:
                    values[i] = float(text)
                except ValueError:
                    raise ExternalModelError(f"malformed value line {text!r}") from None
            end = self._read_line()
            if end != "END":
                raise ExternalModelError(f"expected END, got {end!r}")
        if self.task == CLASSIFICATION and values.size and not np.all(
            np.isin(values, (0.0, 1.0))
        ):
            raise ExternalModelError("classification reply contained non-binary values")
        if values.size and not np.all(np.isfinite(values)):
            raise ExternalModelError("reply contained non-finite values")
        return values

    def close(self) -> None:
        if self._proc.poll() is None:
            try:
                self._send("QUIT")
            except ExternalModelError:
                pass
            try:
                self._proc.wait(timeout=5)
            except subprocess.TimeoutExpired:
                self._proc.kill()

    def __enter__(self) -> "ExternalModel":
        return self

    def __exit__(self, *exc) -> None:
        self.close()

    def __del__(self) -> None:
        try:
            if getattr(self, "_proc", None) is not None and self._proc.poll() is None:
                self._proc.kill()
        except Exception:
            pass


def external_model(command: str, task: str, feature_names) -> ExternalModel:
    return ExternalModel(command, task, feature_names)


def predict(model, rows) -> np.ndarray:
    """Uniform prediction entry point for any handle kind."""
    return model.predict(rows)
