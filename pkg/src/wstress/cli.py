"""Command-line pipeline: train, stress, project, evaluate, report.

Subcommands:
    project   one-shot projection of a stressed feature to CSV
    sweep     full protocol: train models, sweep tau per feature, write
              metric tables and charts
    di        sweep reporting disparate impact with confidence whiskers
    check     run the optimality / duality / consistency verifications

Settings come from ``--config`` files (flat ``key = value`` lines, ``#``
comments, comma-separated lists) and flags; flags override the file.
"""

from __future__ import annotations

import argparse
import csv
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.stats import spearmanr

from .charts import emit_svg
from .constraints import (
    CROSS_PRODUCT,
    EQUALITY,
    INEQUALITY_GE,
    LINEAR,
    LINEAR_QUADRATIC,
    NORM,
    QUADRATIC,
    ConstraintSpec,
)
from .dataset import DatasetError, EmpiricalDataset, load_csv, split
from .metrics import (
    METRIC_DI,
    METRIC_MEAN_VAR,
    METRIC_PP1,
    MetricError,
    MetricSeries,
    series_over_sweep,
)
from .models import (
    CLASSIFICATION,
    REGRESSION,
    ModelError,
    external_model,
    fit_naive_bayes,
    fit_tree,
    threshold_model,
)
from .projection import (
    optimality_check,
    consistency_curve,
    project as project_dataset,
    write_csv as write_projection_csv,
)
from .solver import SolverError, certify, transported_moment
from .stress import make_sweep, run_sweep, stress_target


class ConfigError(ValueError):
    """Invalid experiment configuration."""


@dataclass
class ExperimentConfig:
    data: Path
    out: Path
    features: list[str] = field(default_factory=list)
    models: list[str] = field(default_factory=list)
    columns: list[str] | None = None
    target: str | None = None
    sensitive: str | None = None
    task: str = "cls"
    taus: int = 21
    alpha: float = 0.05
    mode: str = EQUALITY
    tol: float | None = None
    max_iter: int = 10_000
    seed: int = 0
    train_fraction: float = 0.8
    with_di: bool = False


def parse_config_file(path) -> dict[str, str]:
    """Flat key/value grammar: ``key = value`` lines, ``#`` comments."""
    values: dict[str, str] = {}
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {raw!r}")
        key, value = line.split("=", 1)
        values[key.strip()] = value.strip()
    return values


def _csv_list(text: str) -> list[str]:
    return [part.strip() for part in text.split(",") if part.strip()]


def _build_models(config: ExperimentConfig, train: EmpiricalDataset, feature_cols: list[str]):
    task = CLASSIFICATION if config.task == "cls" else REGRESSION
    handles = []
    for spec in config.models:
        kind, _, rest = spec.partition(":")
        if kind == "builtin":
            parts = rest.split(":")
            if parts[0] == "tree":
                depth = int(parts[1]) if len(parts) > 1 else 4
                min_leaf = int(parts[2]) if len(parts) > 2 else 1
                if config.target is None:
                    raise ConfigError("builtin:tree needs a target column")
                model = fit_tree(
                    train, config.target, task=task,
                    max_depth=depth, min_leaf=min_leaf, seed=config.seed,
                )
                model.name = spec
            elif parts[0] == "nb":
                if config.target is None:
                    raise ConfigError("builtin:nb needs a target column")
                model = fit_naive_bayes(train, config.target, seed=config.seed)
                model.name = spec
            elif parts[0] == "threshold":
                if len(parts) != 3:
                    raise ConfigError(
                        f"threshold model spec must be builtin:threshold:<col>:<c>, got {spec!r}"
                    )
                col, cut = parts[1], float(parts[2])
                if col not in feature_cols:
                    raise ConfigError(f"threshold column {col!r} not among features")
                model = threshold_model(
                    feature_cols.index(col), cut, feature_names=feature_cols
                )
                model.name = spec
            else:
                raise ConfigError(f"unknown builtin model {rest!r}")
        elif kind == "external":
            model = external_model(rest, task, feature_cols)
            model.name = spec
        else:
            raise ConfigError(f"unknown model spec {spec!r}")
        handles.append(model)
    return handles


def _write_series_csv(series: list[MetricSeries], feature: str, path: Path) -> None:
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["model", "feature", "tau", "metric", "value", "lo", "hi"])
        for s in series:
            for i, tau in enumerate(s.taus):
                lo = "" if s.lower_ci is None else _cell(s.lower_ci[i])
                hi = "" if s.upper_ci is None else _cell(s.upper_ci[i])
                writer.writerow(
                    [s.model_name, feature, repr(float(tau)), s.metric_name,
                     _cell(s.values[i]), lo, hi]
                )


def _cell(v: float) -> str:
    return "" if not np.isfinite(v) else repr(float(v))


def _validate(config: ExperimentConfig, ds: EmpiricalDataset) -> None:
    names = set(ds.column_names)
    if config.target is not None and config.target not in names:
        raise ConfigError(f"target column {config.target!r} not in the data")
    if config.sensitive is not None and config.sensitive not in names:
        raise ConfigError(f"sensitive column {config.sensitive!r} not in the data")
    for feat in config.features:
        if feat not in names:
            raise ConfigError(f"stressed feature {feat!r} not in the data")
        if feat == config.target:
            raise ConfigError("cannot stress the target column")
    if config.taus < 3 or config.taus % 2 == 0:
        raise ConfigError(f"taus count must be odd and >= 3, got {config.taus}")
    if not 0.0 < config.alpha < 0.5:
        raise ConfigError(f"alpha must be in (0, 0.5), got {config.alpha}")
    if config.mode not in (EQUALITY, INEQUALITY_GE):
        raise ConfigError(f"mode must be 'eq' or 'ge', got {config.mode!r}")
    if config.task not in ("cls", "reg"):
        raise ConfigError(f"task must be 'cls' or 'reg', got {config.task!r}")
    if config.with_di and config.sensitive is None:
        raise ConfigError("disparate impact needs --sensitive")
    if not config.features:
        raise ConfigError("no features to stress")
    if not config.models:
        raise ConfigError("no models configured")


def run(config: ExperimentConfig) -> int:
    """Execute the train / sweep / evaluate / report pipeline.

    Returns 0 on full success, 1 when some (feature, tau, model) cells
    failed but partial outputs were written.
    """
    ds = load_csv(config.data, config.columns)
    _validate(config, ds)
    if ds.dropped_rows:
        print(f"note: dropped {ds.dropped_rows} rows with missing values")
    train, test = split(ds, config.train_fraction, config.seed)
    feature_cols = [c for c in ds.column_names if c != config.target]
    test_features = test.select_columns(feature_cols)
    models = _build_models(config, train, feature_cols)

    out = Path(config.out)
    tables = out / "tables"
    charts = out / "charts"
    tables.mkdir(parents=True, exist_ok=True)
    charts.mkdir(parents=True, exist_ok=True)

    status = 0
    try:
        for feat in config.features:
            j = test_features.column_index(feat)
            sweep = make_sweep(test_features, j, config.taus, config.alpha)
            result = run_sweep(
                test_features, sweep, config.mode, config.tol, config.max_iter
            )
            for tau, message in result.failures:
                print(f"warning: feature {feat!r} tau={tau}: {message}", file=sys.stderr)
                status = 1
            if not result.projections:
                continue
            metric_kinds = [METRIC_PP1] if config.task == "cls" else [METRIC_MEAN_VAR]
            if config.with_di:
                metric_kinds.append(METRIC_DI)
            for metric in metric_kinds:
                series = series_over_sweep(
                    models, result.projections, metric,
                    sensitive_column=config.sensitive,
                )
                for s in series:
                    for i in s.failed:
                        print(
                            f"warning: feature {feat!r} tau={s.taus[i]} "
                            f"model {s.model_name!r}: evaluation failed",
                            file=sys.stderr,
                        )
                        status = 1
                by_name: dict[str, list[MetricSeries]] = {}
                for s in series:
                    by_name.setdefault(s.metric_name, []).append(s)
                for metric_name, group in by_name.items():
                    _write_series_csv(group, feat, tables / f"{metric_name}_{feat}.csv")
                    emit_svg(
                        group,
                        charts / f"{metric_name}_{feat}.svg",
                        title=f"{metric_name} vs tau ({feat})",
                        y_label=metric_name,
                        baseline_markers=(metric_name == "di"),
                    )
            print(f"feature {feat!r}: wrote {len(metric_kinds)} metric table(s)")
    finally:
        for model in models:
            if hasattr(model, "close"):
                model.close()
    return status


def _cmd_project(args) -> int:
    ds = load_csv(args.data, args.columns)
    j = ds.column_index(args.feature)
    target = stress_target(ds, j, args.tau, args.alpha)
    spec = ConstraintSpec(LINEAR, (j,), np.array([target]), mode=args.mode)
    proj = project_dataset(ds, spec, tol=args.tol, max_iter=args.max_iter).with_tau(args.tau)
    out = Path(args.out)
    if out.is_dir():
        out = out / f"projected_{args.feature}.csv"
    write_projection_csv(proj, out)
    print(
        f"projected {ds.n} rows: column {args.feature!r} mean -> {target:.6g}, "
        f"squared cost {proj.squared_cost:.6g}, wrote {out}"
    )
    return 0


def _config_from_args(args, with_di: bool) -> ExperimentConfig:
    file_values = parse_config_file(args.config) if args.config else {}

    def pick(flag, key, cast, default):
        if flag is not None:
            return flag
        if key in file_values:
            text = file_values[key]
            return cast(text)
        return default

    data = pick(args.data, "data", Path, None)
    out = pick(args.out, "out", Path, None)
    if data is None:
        raise ConfigError("--data (or 'data' in the config file) is required")
    if out is None:
        raise ConfigError("--out (or 'out' in the config file) is required")
    return ExperimentConfig(
        data=Path(data),
        out=Path(out),
        features=pick(args.feature, "features", _csv_list, []),
        models=pick(args.model, "models", _csv_list, []),
        columns=pick(args.columns, "columns", _csv_list, None),
        target=pick(args.target, "target", str, None),
        sensitive=pick(args.sensitive, "sensitive", str, None),
        task=pick(args.task, "task", str, "cls"),
        taus=pick(args.taus, "taus", int, 21),
        alpha=pick(args.alpha, "alpha", float, 0.05),
        mode=pick(args.mode, "mode", str, EQUALITY),
        tol=pick(args.tol, "tol", float, None),
        max_iter=pick(args.max_iter, "max_iter", int, 10_000),
        seed=pick(args.seed, "seed", int, 0),
        train_fraction=pick(None, "train_fraction", float, 0.8),
        with_di=with_di,
    )


def _cmd_check(args) -> int:
    """Verification battery: feasibility, duality gap, exact-transport
    optimality, and the subsample consistency trend, printed per family."""
    ds = load_csv(args.data, args.columns)
    rng = np.random.default_rng(args.seed)
    small = ds if ds.n <= 64 else ds.take(np.sort(rng.choice(ds.n, 64, replace=False)))
    ok = True

    def report(label: str, passed: bool, detail: str) -> None:
        nonlocal ok
        ok = ok and passed
        print(f"[{'ok' if passed else 'FAIL'}] {label}: {detail}")

    specs = _check_specs(small)
    for label, spec in specs:
        try:
            proj = project_dataset(small, spec, tol=args.tol)
        except SolverError as exc:
            report(label, False, f"solver failed: {exc}")
            continue
        res = spec.target - transported_moment(small, spec, proj.multiplier.lam)
        cert = certify(small, spec, proj.multiplier)
        rep = optimality_check(small, spec, proj, trials=args.trials, seed=args.seed)
        passed = (
            float(np.max(np.abs(res))) <= 1e-5
            and abs(cert.gap) <= 1e-6 * max(1.0, cert.primal_value)
            and rep.passed
        )
        report(
            label,
            passed,
            f"residual {np.max(np.abs(res)):.2e}, gap {cert.gap:.2e}, "
            f"map gap {rep.map_gap:.2e}, {rep.trials - len(rep.violations)}/{rep.trials} trials",
        )

    # consistency trend on the first column
    sizes = [s for s in (16, 24, 32, 48) if s <= small.n]
    if len(sizes) >= 3:
        t = float(np.mean(small.column(0))) + 0.25 * float(np.std(small.column(0)))
        spec = ConstraintSpec(LINEAR, (0,), np.array([t]))
        curve = consistency_curve(small, spec, sizes, seeds=list(range(8)))
        rho = float(spearmanr([c[0] for c in curve], [c[1] for c in curve]).statistic)
        report("consistency", rho < 0.0, f"spearman(size, median W2) = {rho:.2f}")
    return 0 if ok else 1


def _check_specs(ds: EmpiricalDataset) -> list[tuple[str, ConstraintSpec]]:
    rows = ds.rows
    means = rows.mean(axis=0)
    out = [
        ("linear", ConstraintSpec(LINEAR, (0,), np.array([means[0] + 0.3 * rows[:, 0].std() + 0.1]))),
        ("norm", ConstraintSpec(NORM, (), np.array([1.3 * float(np.mean(np.sum(rows ** 2, axis=1))) + 0.1]))),
        ("quadratic", ConstraintSpec(QUADRATIC, (0,), np.array([1.2 * float(np.mean(rows[:, 0] ** 2)) + 0.1]))),
    ]
    if ds.d >= 2:
        m, s = float(np.mean(rows[:, 1])), float(np.mean(rows[:, 1] ** 2))
        var = s - m * m
        if var > 1e-12:
            t1 = m + 0.2 * np.sqrt(var)
            t2 = t1 ** 2 + 1.1 * var
            out.append(
                ("linear_quadratic", ConstraintSpec(LINEAR_QUADRATIC, (1,), np.array([t1, t2])))
            )
        c = float(np.mean(rows[:, 0] * rows[:, 1]))
        scale = float(rows[:, 0].std() * rows[:, 1].std()) + abs(c)
        out.append(
            ("cross_product", ConstraintSpec(CROSS_PRODUCT, (0, 1), np.array([c + 0.15 * scale + 1e-3])))
        )
    return out


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="flat key=value config file")
    parser.add_argument("--data", type=Path, help="input CSV path")
    parser.add_argument("--columns", type=_csv_list, help="numeric columns to load")
    parser.add_argument("--target", help="target column for builtin training")
    parser.add_argument("--sensitive", help="binary sensitive column for DI")
    parser.add_argument(
        "--feature", type=_csv_list, help="comma-separated features to stress"
    )
    parser.add_argument(
        "--model", type=_csv_list,
        help="models: builtin:tree[:depth]|builtin:nb|builtin:threshold:<col>:<c>|external:<command>",
    )
    parser.add_argument("--task", choices=("cls", "reg"), help="prediction task")
    parser.add_argument("--taus", type=int, help="odd tau grid size (default 21)")
    parser.add_argument("--alpha", type=float, help="tail quantile level (default 0.05)")
    parser.add_argument("--mode", choices=(EQUALITY, INEQUALITY_GE), help="constraint mode")
    parser.add_argument("--tol", type=float, help="solver tolerance")
    parser.add_argument("--max-iter", type=int, dest="max_iter", help="solver iteration cap")
    parser.add_argument("--seed", type=int, help="split / RNG seed (default 0)")
    parser.add_argument("--out", type=Path, help="output directory")


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="wstress",
        description="Stress-test black-box tabular predictors with Wasserstein moment projections.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_project = sub.add_parser("project", help="one-shot projection to CSV")
    p_project.add_argument("--data", type=Path, required=True)
    p_project.add_argument("--columns", type=_csv_list)
    p_project.add_argument("--feature", required=True)
    p_project.add_argument("--tau", type=float, required=True)
    p_project.add_argument("--alpha", type=float, default=0.05)
    p_project.add_argument("--mode", choices=(EQUALITY, INEQUALITY_GE), default=EQUALITY)
    p_project.add_argument("--tol", type=float, default=None)
    p_project.add_argument("--max-iter", type=int, dest="max_iter", default=10_000)
    p_project.add_argument("--out", type=Path, required=True)

    p_sweep = sub.add_parser("sweep", help="full stress-sweep protocol")
    _add_common(p_sweep)

    p_di = sub.add_parser("di", help="disparate-impact sweep")
    _add_common(p_di)

    p_check = sub.add_parser("check", help="optimality / duality / consistency checks")
    p_check.add_argument("--data", type=Path, required=True)
    p_check.add_argument("--columns", type=_csv_list)
    p_check.add_argument("--trials", type=int, default=25)
    p_check.add_argument("--tol", type=float, default=None)
    p_check.add_argument("--seed", type=int, default=0)

    args = parser.parse_args(argv)
    try:
        if args.command == "project":
            return _cmd_project(args)
        if args.command == "check":
            return _cmd_check(args)
        config = _config_from_args(args, with_di=(args.command == "di"))
        return run(config)
    except (ConfigError, DatasetError, MetricError, ModelError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
