"""Moment-constraint families and their per-point transport maps.

A constraint is a vector function phi : R^d -> R^k applied in expectation.
Calibrating a multiplier vector lam turns it into the per-point problem

    T_lam(y) = argmin_x  H(x) = ||x - y||^2 - lam . phi(x)

which every family here solves in closed form.  The map is the unique
minimizer exactly when H is strictly convex; ``multiplier_domain`` returns
the open region of lam where that holds (from the eigenvalues of the
Hessian 2*I - sum_i lam_i * D^2 phi_i).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

EQUALITY = "eq"
INEQUALITY_GE = "ge"
MODES = (EQUALITY, INEQUALITY_GE)

LINEAR = "linear"
NORM = "norm"
QUADRATIC = "quadratic"
LINEAR_QUADRATIC = "linear_quadratic"
CROSS_PRODUCT = "cross_product"
LINEAR_CROSS = "linear_cross"
FAMILIES = (LINEAR, NORM, QUADRATIC, LINEAR_QUADRATIC, CROSS_PRODUCT, LINEAR_CROSS)

# spectral bound on D^2 phi per family, used for the descent step size
_HESSIAN_BOUND = {
    LINEAR: 0.0,
    NORM: 2.0,
    QUADRATIC: 2.0,
    LINEAR_QUADRATIC: 2.0,
    CROSS_PRODUCT: 1.0,
    LINEAR_CROSS: 1.0,
}


class DomainError(ValueError):
    """Multiplier outside the strict-convexity domain of its family."""


class ConvergenceError(RuntimeError):
    """Iterative minimization stopped above tolerance."""

    def __init__(self, message: str, grad_norm: float):
        super().__init__(message)
        self.grad_norm = grad_norm


@dataclass(frozen=True)
class ConstraintSpec:
    """One constraint family applied to named coordinate indices.

    family/indices/k:
        linear            (j1..jk)    k = len(indices), phi = coordinates
        norm              ()          k = 1,  phi = ||x||^2
        quadratic         (j1..jk)    k = len(indices), phi = squares
        linear_quadratic  (j0,)       k = 2,  phi = (x_j0, x_j0^2)
        cross_product     (j0, j1)    k = 1,  phi = x_j0 * x_j1
        linear_cross      (j0, j1)    k = 3,  phi = (x_j0, x_j1, x_j0*x_j1)
    """

    family: str
    indices: tuple[int, ...]
    target: np.ndarray
    mode: str = EQUALITY

    def __post_init__(self) -> None:
        if self.family not in FAMILIES:
            raise ValueError(f"unknown constraint family {self.family!r}")
        if self.mode not in MODES:
            raise ValueError(f"unknown mode {self.mode!r}")
        idx = tuple(int(j) for j in self.indices)
        if any(j < 0 for j in idx):
            raise ValueError("constraint indices must be non-negative")
        if len(set(idx)) != len(idx):
            raise ValueError("constraint indices must be distinct")
        target = np.array(self.target, dtype=float).reshape(-1)
        if not np.all(np.isfinite(target)):
            raise ValueError("constraint target must be finite")
        expected = self._expected_k(idx)
        if target.size != expected:
            raise ValueError(
                f"{self.family} over {len(idx)} indices needs a target of "
                f"length {expected}, got {target.size}"
            )
        if self.family == NORM and target[0] <= 0.0:
            raise ValueError("norm target must be positive")
        if self.family == QUADRATIC and np.any(target <= 0.0):
            raise ValueError("quadratic targets must be positive")
        if self.family == LINEAR_QUADRATIC and target[1] <= 0.0:
            raise ValueError("second-moment target must be positive")
        target.setflags(write=False)
        object.__setattr__(self, "indices", idx)
        object.__setattr__(self, "target", target)

    def _expected_k(self, idx: tuple[int, ...]) -> int:
        if self.family == LINEAR or self.family == QUADRATIC:
            if len(idx) < 1:
                raise ValueError(f"{self.family} needs at least one index")
            return len(idx)
        if self.family == NORM:
            if idx:
                raise ValueError("norm applies to all coordinates; pass no indices")
            return 1
        if self.family == LINEAR_QUADRATIC:
            if len(idx) != 1:
                raise ValueError("linear_quadratic takes exactly one index")
            return 2
        if len(idx) != 2:
            raise ValueError(f"{self.family} takes exactly two indices")
        return 1 if self.family == CROSS_PRODUCT else 3

    @property
    def k(self) -> int:
        return self.target.size

    def validate_dims(self, d: int) -> None:
        if any(j >= d for j in self.indices):
            raise ValueError(f"constraint indices {self.indices} exceed d={d}")


@dataclass(frozen=True)
class MultiplierDomain:
    """Open per-component box where the transport objective is strictly convex."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self) -> None:
        lower = np.asarray(self.lower, dtype=float)
        upper = np.asarray(self.upper, dtype=float)
        if np.any(lower >= upper):
            raise ValueError("multiplier domain must be nonempty")
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)

    def contains(self, lam: np.ndarray) -> bool:
        lam = np.asarray(lam, dtype=float)
        return bool(np.all(lam > self.lower) and np.all(lam < self.upper))

    def clip(self, lam: np.ndarray, margin: float) -> np.ndarray:
        """Project onto the domain shrunk by ``margin`` on each finite side."""
        lo = np.where(np.isfinite(self.lower), self.lower + margin, self.lower)
        hi = np.where(np.isfinite(self.upper), self.upper - margin, self.upper)
        return np.clip(np.asarray(lam, dtype=float), lo, hi)


def multiplier_domain(spec: ConstraintSpec) -> MultiplierDomain:
    """Strict-convexity bounds: lam < 1 for squared terms, |lam| < 2 for cross terms."""
    k = spec.k
    inf = np.inf
    if spec.family == LINEAR:
        return MultiplierDomain(np.full(k, -inf), np.full(k, inf))
    if spec.family in (NORM, QUADRATIC):
        return MultiplierDomain(np.full(k, -inf), np.full(k, 1.0))
    if spec.family == LINEAR_QUADRATIC:
        return MultiplierDomain(np.array([-inf, -inf]), np.array([inf, 1.0]))
    if spec.family == CROSS_PRODUCT:
        return MultiplierDomain(np.array([-2.0]), np.array([2.0]))
    # linear_cross: only the cross multiplier is bounded
    return MultiplierDomain(np.array([-inf, -inf, -2.0]), np.array([inf, inf, 2.0]))


def _as_lambda(spec: ConstraintSpec, lam) -> np.ndarray:
    lam = np.asarray(lam, dtype=float).reshape(-1)
    if lam.size != spec.k:
        raise ValueError(f"multiplier length {lam.size} != k={spec.k}")
    return lam


def _require_domain(spec: ConstraintSpec, lam: np.ndarray) -> None:
    if not multiplier_domain(spec).contains(lam):
        raise DomainError(
            f"multiplier {lam.tolist()} outside the {spec.family} domain"
        )


def phi_rows(spec: ConstraintSpec, rows: np.ndarray) -> np.ndarray:
    """Evaluate the constraint function on each row; returns an (n, k) matrix."""
    rows = np.asarray(rows, dtype=float)
    idx = spec.indices
    if spec.family == LINEAR:
        return rows[:, list(idx)]
    if spec.family == NORM:
        return np.sum(rows * rows, axis=1, keepdims=True)
    if spec.family == QUADRATIC:
        return rows[:, list(idx)] ** 2
    if spec.family == LINEAR_QUADRATIC:
        col = rows[:, idx[0]]
        return np.column_stack([col, col * col])
    if spec.family == CROSS_PRODUCT:
        return (rows[:, idx[0]] * rows[:, idx[1]])[:, None]
    col0, col1 = rows[:, idx[0]], rows[:, idx[1]]
    return np.column_stack([col0, col1, col0 * col1])


def phi_eval(spec: ConstraintSpec, x) -> np.ndarray:
    """Constraint value at a single point, as a length-k vector."""
    x = np.asarray(x, dtype=float).reshape(1, -1)
    if not np.all(np.isfinite(x)):
        raise ValueError("point must be finite")
    spec.validate_dims(x.shape[1])
    return phi_rows(spec, x)[0]


def phi_mean(spec: ConstraintSpec, rows: np.ndarray) -> np.ndarray:
    """Empirical moment of the constraint over the rows.

    Reduced with one 1-d mean per component, which numpy evaluates
    independently of memory layout; every moment in the package goes through
    this single reduction so "target equals current moment" comparisons are
    bit-exact.
    """
    phi = phi_rows(spec, rows)
    return np.array([np.mean(phi[:, i]) for i in range(phi.shape[1])])


def transport_rows(spec: ConstraintSpec, lam, rows: np.ndarray) -> np.ndarray:
    """Apply the closed-form map to every row.  lam must be inside the domain.

    A zero multiplier returns an untouched copy, so the identity case is
    bit-exact.
    """
    lam = _as_lambda(spec, lam)
    _require_domain(spec, lam)
    rows = np.asarray(rows, dtype=float)
    spec.validate_dims(rows.shape[1])
    if not np.any(lam):
        return rows.copy()
    idx = spec.indices
    out = rows.copy()
    if spec.family == LINEAR:
        out[:, list(idx)] = out[:, list(idx)] + lam / 2.0
    elif spec.family == NORM:
        out = rows / (1.0 - lam[0])
    elif spec.family == QUADRATIC:
        out[:, list(idx)] = out[:, list(idx)] / (1.0 - lam)
    elif spec.family == LINEAR_QUADRATIC:
        j0 = idx[0]
        out[:, j0] = (lam[0] / 2.0 + rows[:, j0]) / (1.0 - lam[1])
    elif spec.family == CROSS_PRODUCT:
        j0, j1 = idx
        den = 2.0 - lam[0] ** 2 / 2.0
        b = (2.0 * rows[:, j1] + lam[0] * rows[:, j0]) / den
        out[:, j1] = b
        out[:, j0] = rows[:, j0] + (lam[0] / 2.0) * b
    else:  # linear_cross
        j0, j1 = idx
        l1, l2, l3 = lam
        den = 1.0 - l3 * l3 / 4.0
        b = (rows[:, j1] + l2 / 2.0 + (l3 / 2.0) * (rows[:, j0] + l1 / 2.0)) / den
        out[:, j1] = b
        out[:, j0] = rows[:, j0] + l1 / 2.0 + (l3 / 2.0) * b
    return out


def transport_map(spec: ConstraintSpec, lam, y) -> np.ndarray:
    """Closed-form minimizer of ||x - y||^2 - lam . phi(x)."""
    y = np.asarray(y, dtype=float).reshape(1, -1)
    return transport_rows(spec, lam, y)[0]


def objective_gradient(spec: ConstraintSpec, lam, x, y) -> np.ndarray:
    """Gradient of H(x) = ||x - y||^2 - lam . phi(x) at x."""
    lam = _as_lambda(spec, lam)
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    g = 2.0 * (x - y)
    idx = spec.indices
    if spec.family == LINEAR:
        g[list(idx)] -= lam
    elif spec.family == NORM:
        g -= 2.0 * lam[0] * x
    elif spec.family == QUADRATIC:
        g[list(idx)] -= 2.0 * lam * x[list(idx)]
    elif spec.family == LINEAR_QUADRATIC:
        j0 = idx[0]
        g[j0] -= lam[0] + 2.0 * lam[1] * x[j0]
    elif spec.family == CROSS_PRODUCT:
        j0, j1 = idx
        g[j0] -= lam[0] * x[j1]
        g[j1] -= lam[0] * x[j0]
    else:
        j0, j1 = idx
        g[j0] -= lam[0] + lam[2] * x[j1]
        g[j1] -= lam[1] + lam[2] * x[j0]
    return g


def descent_step(spec: ConstraintSpec, lam) -> float:
    """Fixed step 1 / (2 + ||lam|| * L) that keeps gradient descent contractive."""
    lam = _as_lambda(spec, lam)
    return 1.0 / (2.0 + float(np.linalg.norm(lam)) * _HESSIAN_BOUND[spec.family])


def numeric_transport(
    spec: ConstraintSpec,
    lam,
    y,
    step: float | None = None,
    tol: float = 1e-10,
    max_iter: int = 100_000,
) -> np.ndarray:
    """Gradient-descent fallback for the transport map, warm-started at y.

    Iterates x <- x - eta * grad H(x) until ||grad H|| <= tol.  Inside the
    multiplier domain H is strongly convex, so the fixed step from
    ``descent_step`` converges; ``step`` overrides it when given.
    """
    lam = _as_lambda(spec, lam)
    _require_domain(spec, lam)
    y = np.asarray(y, dtype=float).reshape(-1)
    spec.validate_dims(y.size)
    eta = descent_step(spec, lam) if step is None else float(step)
    x = y.copy()
    grad = objective_gradient(spec, lam, x, y)
    for _ in range(max_iter):
        norm = float(np.linalg.norm(grad))
        if norm <= tol:
            return x
        x = x - eta * grad
        grad = objective_gradient(spec, lam, x, y)
    norm = float(np.linalg.norm(grad))
    if norm <= tol:
        return x
    raise ConvergenceError(
        f"gradient descent stopped after {max_iter} iterations with "
        f"|grad| = {norm:.3e} > tol = {tol:.3e}",
        grad_norm=norm,
    )
