"""Multiplier calibration so that transported moments hit their targets.

For each constraint the feasibility condition is a root-finding problem in
the multiplier:  residual(lam) = t - mean phi(T_lam(Z)) = 0 (equality mode)
or the usual nonnegativity / complementary-slackness system (inequality
mode).  Linear, norm, quadratic, and linear_quadratic specs solve in closed
form; the two cross families run projected dual ascent on

    g(lam) = lam . t + (1/n) sum_i [ ||T_lam(Z_i) - Z_i||^2 - lam . phi(T_lam(Z_i)) ]

whose gradient is exactly the residual, followed by a damped Newton polish
on the residual to push the duality gap to certificate precision.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .constraints import (
    INEQUALITY_GE,
    LINEAR,
    LINEAR_QUADRATIC,
    NORM,
    QUADRATIC,
    ConstraintSpec,
    multiplier_domain,
    phi_mean,
    phi_rows,
    transport_rows,
)
from .dataset import EmpiricalDataset

DEFAULT_TOL_CLOSED = 1e-8
DEFAULT_TOL_ASCENT = 1e-5
DEFAULT_MAX_ITER = 10_000
DOMAIN_MARGIN = 1e-6  # shrink applied to open domain bounds during ascent
SLACK_TOL = 1e-8      # complementary-slackness budget on success
PIN_LIMIT = 100       # boundary-pinned iterations before giving up

METHOD_CLOSED = "closed_form"
METHOD_ASCENT = "dual_ascent"

_CLOSED_FAMILIES = {LINEAR, NORM, QUADRATIC, LINEAR_QUADRATIC}


class SolverError(RuntimeError):
    """Base class for multiplier-calibration failures."""


class NotAttainableError(SolverError):
    """The target moment cannot be reached by any in-domain multiplier."""


class DomainHitError(SolverError):
    """Ascent pinned against the convexity-domain boundary without converging."""


class MaxIterationsError(SolverError):
    """Iteration budget exhausted above tolerance."""

    def __init__(self, message: str, residual_norm: float):
        super().__init__(message)
        self.residual_norm = residual_norm


@dataclass(frozen=True)
class Multiplier:
    """Calibrated multiplier with its reported residual t - mean phi(T(Z))."""

    lam: np.ndarray
    residual: np.ndarray
    iterations: int
    method: str

    def __post_init__(self) -> None:
        lam = np.asarray(self.lam, dtype=float).reshape(-1)
        res = np.asarray(self.residual, dtype=float).reshape(-1)
        lam.setflags(write=False)
        res.setflags(write=False)
        object.__setattr__(self, "lam", lam)
        object.__setattr__(self, "residual", res)


@dataclass(frozen=True)
class DualCertificate:
    """Primal transport cost, dual value, and their gap at a solved multiplier."""

    primal_value: float
    dual_value: float
    gap: float


def transported_moment(ds: EmpiricalDataset, spec: ConstraintSpec, lam) -> np.ndarray:
    """mean phi over the transported sample."""
    return phi_mean(spec, transport_rows(spec, lam, ds.rows))


def transport_cost(ds: EmpiricalDataset, spec: ConstraintSpec, lam) -> float:
    """(1/n) sum ||T_lam(Z_i) - Z_i||^2."""
    moved = transport_rows(spec, lam, ds.rows)
    return float(np.mean(np.sum((moved - ds.rows) ** 2, axis=1)))


def dual_objective(ds: EmpiricalDataset, spec: ConstraintSpec, lam) -> float:
    """lam . t + (1/n) sum_i [ ||T(Z_i)-Z_i||^2 - lam . phi(T(Z_i)) ]."""
    lam = np.asarray(lam, dtype=float).reshape(-1)
    moved = transport_rows(spec, lam, ds.rows)  # raises DomainError outside domain
    cost = np.sum((moved - ds.rows) ** 2, axis=1)
    inner = cost - phi_rows(spec, moved) @ lam
    return float(lam @ spec.target + np.mean(inner))


def certify(ds: EmpiricalDataset, spec: ConstraintSpec, mult: Multiplier) -> DualCertificate:
    """Duality-gap certificate for a solved multiplier."""
    primal = transport_cost(ds, spec, mult.lam)
    dual = dual_objective(ds, spec, mult.lam)
    return DualCertificate(primal_value=primal, dual_value=dual, gap=primal - dual)


def _closed_form_lambda(ds: EmpiricalDataset, spec: ConstraintSpec) -> np.ndarray:
    t = spec.target
    base = phi_mean(spec, ds.rows)
    if spec.family == LINEAR:
        return 2.0 * (t - base)
    if spec.family == NORM:
        if base[0] <= 0.0:
            raise NotAttainableError("all-zero sample cannot reach a positive norm target")
        return np.array([1.0 - np.sqrt(base[0] / t[0])])
    if spec.family == QUADRATIC:
        if np.any(base <= 0.0):
            dead = [spec.indices[i] for i in np.nonzero(base <= 0.0)[0]]
            raise NotAttainableError(
                f"columns {dead} are identically zero; positive targets unreachable"
            )
        return 1.0 - np.sqrt(base / t)
    # linear_quadratic: match mean and second moment of one column via an
    # affine map y -> a*y + b with a = 1/(1-lam2), b = a*lam1/2
    m, s = float(base[0]), float(base[1])
    var = s - m * m
    if var <= 0.0:
        raise NotAttainableError("constant column has no adjustable variance")
    spread = t[1] - t[0] ** 2
    if spread <= 0.0:
        raise NotAttainableError(
            f"second moment {t[1]} must exceed squared mean {t[0] ** 2:.6g}"
        )
    a = np.sqrt(spread / var)
    lam2 = 1.0 - 1.0 / a
    lam1 = 2.0 * (t[0] - a * m) / a
    return np.array([lam1, lam2])


def _projected_gradient(lam: np.ndarray, res: np.ndarray, nonneg: bool) -> np.ndarray:
    if not nonneg:
        return res
    return np.where(lam > 0.0, res, np.maximum(res, 0.0))


def _slack_limit(nonneg: bool, cost: float) -> float:
    # inequality mode promises an absolute slackness bound; equality mode only
    # needs the duality gap (= -lam.residual) small relative to the cost
    return SLACK_TOL if nonneg else SLACK_TOL * max(1.0, cost)


def _dual_ascent(
    ds: EmpiricalDataset,
    spec: ConstraintSpec,
    *,
    nonneg: bool,
    tol: float,
    max_iter: int,
) -> tuple[np.ndarray, int, bool]:
    """Projected backtracking ascent on the dual; returns (lam, iterations,
    pinned) without raising.  The dual value never decreases along accepted
    steps (ties broken by projected-gradient decrease), which rules out
    cycling; ``pinned`` reports a 100-iteration streak against the shrunk
    domain boundary with no residual progress.
    """
    dom = multiplier_domain(spec)
    t = spec.target
    lam = np.zeros(spec.k)

    def stats(l):
        moved = transport_rows(spec, l, ds.rows)
        cost = np.sum((moved - ds.rows) ** 2, axis=1)
        pm = phi_mean(spec, moved)
        dual = float(l @ t + np.mean(cost) - l @ pm)
        return pm, float(np.mean(cost)), dual

    lo = np.where(np.isfinite(dom.lower), dom.lower + DOMAIN_MARGIN, -np.inf)
    hi = np.where(np.isfinite(dom.upper), dom.upper - DOMAIN_MARGIN, np.inf)
    pm, cost, dual = stats(lam)
    pin_streak = 0
    prev_norm = np.inf
    iterations = 0
    pinned = False
    for iterations in range(1, max_iter + 1):
        res = t - pm
        pg = _projected_gradient(lam, res, nonneg)
        pg_norm = float(np.max(np.abs(pg)))
        slack = abs(float(lam @ res))
        if pg_norm <= tol and slack <= _slack_limit(nonneg, cost):
            return lam, iterations, False

        accepted = False
        eta = 1.0
        while eta >= 1e-14:
            cand = dom.clip(lam + eta * res, DOMAIN_MARGIN)
            if nonneg:
                cand = np.maximum(cand, 0.0)
            if np.array_equal(cand, lam):
                break  # every coordinate pinned; smaller steps change nothing
            pm_c, cost_c, dual_c = stats(cand)
            pg_c = _projected_gradient(cand, t - pm_c, nonneg)
            better_pg = float(np.max(np.abs(pg_c))) < pg_norm
            if dual_c > dual or (dual_c >= dual and better_pg):
                lam, pm, cost, dual = cand, pm_c, cost_c, dual_c
                accepted = True
                break
            eta /= 2.0

        at_bound = bool(np.any(lam <= lo) or np.any(lam >= hi))
        stalled = (not accepted) or (at_bound and pg_norm >= prev_norm - 1e-15)
        pin_streak = pin_streak + 1 if stalled else 0
        prev_norm = pg_norm
        if pin_streak >= PIN_LIMIT:
            pinned = at_bound
            break
    return lam, iterations, pinned


def _solve_by_ascent(
    ds: EmpiricalDataset,
    spec: ConstraintSpec,
    *,
    nonneg: bool,
    tol: float,
    max_iter: int,
) -> Multiplier:
    """Ascent plus Newton polish, with the success conditions verified last."""
    lam_pre, iterations, pinned = _dual_ascent(
        ds, spec, nonneg=nonneg, tol=tol, max_iter=max_iter
    )
    lam = _newton_polish(ds, spec, lam_pre, nonneg=nonneg)
    t = spec.target
    for candidate in (lam, lam_pre):
        residual = t - transported_moment(ds, spec, candidate)
        pg = _projected_gradient(candidate, residual, nonneg)
        cost = transport_cost(ds, spec, candidate)
        if (
            float(np.max(np.abs(pg))) <= tol
            and abs(float(candidate @ residual)) <= _slack_limit(nonneg, cost)
        ):
            return Multiplier(candidate, residual, iterations=iterations, method=METHOD_ASCENT)
    pg_norm = float(np.max(np.abs(_projected_gradient(lam, t - transported_moment(ds, spec, lam), nonneg))))
    if pinned:
        raise DomainHitError(
            f"multiplier pinned at the {spec.family} domain boundary with "
            f"residual {pg_norm:.3e} > tol {tol:.3e}"
        )
    raise MaxIterationsError(
        f"dual ascent stopped after {iterations} iterations with residual "
        f"{pg_norm:.3e} (tol {tol:.3e})",
        residual_norm=pg_norm,
    )


def _newton_polish(
    ds: EmpiricalDataset,
    spec: ConstraintSpec,
    lam: np.ndarray,
    *,
    nonneg: bool,
    max_steps: int = 30,
) -> np.ndarray:
    """Damped Newton refinement of residual(lam) = 0 on the active components.

    The ascent phase lands within its own tolerance; the polish drives the
    residual far enough below it that the duality gap |lam . residual|
    clears the certificate budget.  Steps are accepted only when they shrink
    the active residual, so the input solution can only improve.
    """
    dom = multiplier_domain(spec)
    t = spec.target
    target = 1e-10

    def residual(l):
        return t - transported_moment(ds, spec, l)

    res = residual(lam)
    for _ in range(max_steps):
        active = np.ones(spec.k, dtype=bool) if not nonneg else (lam > 1e-12)
        pg = _projected_gradient(lam, res, nonneg)
        if float(np.max(np.abs(pg))) <= target or not np.any(active):
            break
        idx = np.nonzero(active)[0]
        jac = np.empty((idx.size, idx.size))
        h = 1e-6
        for col, a in enumerate(idx):
            bump = np.zeros(spec.k)
            bump[a] = h
            hi_ok = dom.contains(lam + bump)
            lo_ok = dom.contains(lam - bump)
            if hi_ok and lo_ok:
                diff = (residual(lam + bump) - residual(lam - bump)) / (2 * h)
            elif hi_ok:
                diff = (residual(lam + bump) - res) / h
            else:
                diff = (res - residual(lam - bump)) / h
            jac[:, col] = diff[idx]
        try:
            step = np.linalg.solve(jac, -res[idx])
        except np.linalg.LinAlgError:
            break
        scale = 1.0
        improved = False
        base = float(np.max(np.abs(res[idx])))
        while scale >= 1e-8:
            cand = lam.copy()
            cand[idx] = cand[idx] + scale * step
            cand = dom.clip(cand, DOMAIN_MARGIN)
            if nonneg:
                cand = np.maximum(cand, 0.0)
            cand_res = residual(cand)
            if float(np.max(np.abs(cand_res[idx]))) < base:
                lam, res = cand, cand_res
                improved = True
                break
            scale /= 2.0
        if not improved:
            break
    return lam


def solve_equality(
    ds: EmpiricalDataset,
    spec: ConstraintSpec,
    tol: float | None = None,
    max_iter: int = DEFAULT_MAX_ITER,
    method: str = "auto",
) -> Multiplier:
    """Multiplier with mean phi(T(Z)) = t within tolerance.

    Closed forms cover linear, norm, quadratic, and linear_quadratic; the
    cross families go through projected dual ascent.  ``method`` can force
    "dual_ascent" on a closed-form family (used to cross-check the paths).
    Default tolerances: 1e-8 closed form, 1e-5 dual ascent.
    """
    spec.validate_dims(ds.d)
    if method not in ("auto", METHOD_CLOSED, METHOD_ASCENT):
        raise ValueError(f"unknown method {method!r}")
    if method == METHOD_CLOSED and spec.family not in _CLOSED_FAMILIES:
        raise ValueError(f"{spec.family} has no closed-form solve")
    use_closed = spec.family in _CLOSED_FAMILIES and method != METHOD_ASCENT

    if use_closed:
        tol = DEFAULT_TOL_CLOSED if tol is None else float(tol)
        lam = _closed_form_lambda(ds, spec)
        residual = spec.target - transported_moment(ds, spec, lam)
        if float(np.max(np.abs(residual))) > tol:
            raise SolverError(
                f"closed-form residual {np.max(np.abs(residual)):.3e} above tol {tol:.3e}"
            )
        return Multiplier(lam, residual, iterations=0, method=METHOD_CLOSED)

    tol = DEFAULT_TOL_ASCENT if tol is None else float(tol)
    return _solve_by_ascent(ds, spec, nonneg=False, tol=tol, max_iter=max_iter)


def solve_inequality(
    ds: EmpiricalDataset,
    spec: ConstraintSpec,
    tol: float | None = None,
    max_iter: int = DEFAULT_MAX_ITER,
) -> Multiplier:
    """Nonnegative multiplier with mean phi(T(Z)) >= t and tiny slack product.

    Already-feasible targets return the zero multiplier and leave the data
    untouched.  Separable families reduce to per-component equality solves on
    the violated components; coupled families run projected dual ascent over
    the nonnegative orthant.
    """
    if spec.mode != INEQUALITY_GE:
        raise ValueError("solve_inequality needs a spec with mode='ge'")
    spec.validate_dims(ds.d)
    t = spec.target
    base = phi_mean(spec, ds.rows)
    if np.all(base >= t):
        zero = np.zeros(spec.k)
        return Multiplier(zero, t - base, iterations=0, method=METHOD_CLOSED)

    # separable families: per-component equality solve on the violated parts
    if spec.family == LINEAR:
        lam = np.maximum(0.0, 2.0 * (t - base))
    elif spec.family == NORM:
        if base[0] <= 0.0:
            raise NotAttainableError("all-zero sample cannot reach a positive norm target")
        lam = np.array([max(0.0, 1.0 - np.sqrt(base[0] / t[0]))])
    elif spec.family == QUADRATIC:
        if np.any((base <= 0.0) & (t > 0.0)):
            raise NotAttainableError("identically-zero column cannot reach a positive target")
        lam = np.where(base >= t, 0.0, 1.0 - np.sqrt(base / t))
    else:
        ascent_tol = DEFAULT_TOL_ASCENT if tol is None else float(tol)
        return _solve_by_ascent(ds, spec, nonneg=True, tol=ascent_tol, max_iter=max_iter)

    tol = DEFAULT_TOL_CLOSED if tol is None else float(tol)
    residual = t - transported_moment(ds, spec, lam)
    if float(np.max(residual)) > tol or abs(float(lam @ residual)) > SLACK_TOL:
        raise SolverError(
            f"inequality closed form missed its tolerance: residual {residual}"
        )
    return Multiplier(lam, residual, iterations=0, method=METHOD_CLOSED)
