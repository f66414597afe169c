import numpy as np
import pytest
from scipy.optimize import minimize

from wstress import (
    CROSS_PRODUCT,
    INEQUALITY_GE,
    LINEAR,
    LINEAR_CROSS,
    LINEAR_QUADRATIC,
    NORM,
    QUADRATIC,
    ConstraintSpec,
    DomainHitError,
    MaxIterationsError,
    NotAttainableError,
    certify,
    dual_objective,
    multiplier_domain,
    phi_eval,
    solve_equality,
    solve_inequality,
)
from wstress.solver import transported_moment

from conftest import CLOSED_FAMILIES, column_ds, matrix_ds, random_instance


class TestClosedForms:
    def test_linear_shift(self):
        ds = column_ds([0.0, 1.0, 2.0])
        spec = ConstraintSpec(LINEAR, (0,), np.array([2.0]))
        mult = solve_equality(ds, spec)
        assert mult.lam == pytest.approx([2.0], abs=0)
        assert mult.method == "closed_form"
        assert np.max(np.abs(mult.residual)) == 0.0

    def test_norm_doubles_symmetric_pair(self):
        # mean ||Z||^2 = 1, target 4: 1 - lam = sqrt(1/4), map doubles each point
        ds = column_ds([1.0, -1.0])
        spec = ConstraintSpec(NORM, (), np.array([4.0]))
        mult = solve_equality(ds, spec)
        assert mult.lam == pytest.approx([0.5], abs=1e-15)
        assert transported_moment(ds, spec, mult.lam) == pytest.approx([4.0], abs=1e-12)
        # independent check: the transported point minimizes the per-point objective
        y = np.array([1.0])
        ref = minimize(
            lambda x: float(np.sum((x - y) ** 2) - mult.lam @ phi_eval(spec, x)),
            y, method="BFGS", tol=1e-14,
        ).x
        assert ref == pytest.approx([2.0], abs=1e-6)

    def test_quadratic_hits_second_moment(self):
        rng = np.random.default_rng(0)
        ds = matrix_ds(rng.normal(size=(40, 3)))
        s = float(np.mean(ds.rows[:, 1] ** 2))
        spec = ConstraintSpec(QUADRATIC, (1,), np.array([1.7 * s]))
        mult = solve_equality(ds, spec)
        assert transported_moment(ds, spec, mult.lam) == pytest.approx([1.7 * s], rel=1e-12)

    def test_linear_quadratic_hits_both_moments(self):
        rng = np.random.default_rng(1)
        ds = matrix_ds(rng.normal(size=(60, 2)) + 0.5)
        m = float(np.mean(ds.rows[:, 0]))
        var = float(np.var(ds.rows[:, 0]))
        t1, t2 = m + 0.4, (m + 0.4) ** 2 + 1.3 * var
        spec = ConstraintSpec(LINEAR_QUADRATIC, (0,), np.array([t1, t2]))
        mult = solve_equality(ds, spec)
        assert transported_moment(ds, spec, mult.lam) == pytest.approx([t1, t2], rel=1e-10)

    def test_identity_when_target_matches_moment(self):
        rng = np.random.default_rng(2)
        for seed in range(12):
            ds, spec = random_instance(seed, max_n=60)
            current = transported_moment(ds, spec, np.zeros(spec.k))
            identity_spec = ConstraintSpec(spec.family, spec.indices, current)
            mult = solve_equality(ds, identity_spec)
            assert np.all(mult.lam == 0.0), spec.family
            assert np.max(np.abs(mult.residual)) == 0.0


class TestNotAttainable:
    def test_quadratic_zero_column(self):
        ds = matrix_ds([[0.0, 1.0], [0.0, 2.0]])
        spec = ConstraintSpec(QUADRATIC, (0,), np.array([1.0]))
        with pytest.raises(NotAttainableError):
            solve_equality(ds, spec)

    def test_norm_all_zero_sample(self):
        ds = matrix_ds([[0.0], [0.0]])
        spec = ConstraintSpec(NORM, (), np.array([1.0]))
        with pytest.raises(NotAttainableError):
            solve_equality(ds, spec)

    def test_linear_quadratic_infeasible_spread(self):
        ds = column_ds([0.0, 1.0, 2.0])
        spec = ConstraintSpec(LINEAR_QUADRATIC, (0,), np.array([2.0, 3.9]))  # t2 < t1^2
        with pytest.raises(NotAttainableError):
            solve_equality(ds, spec)

    def test_linear_quadratic_constant_column(self):
        ds = column_ds([1.0, 1.0, 1.0])
        spec = ConstraintSpec(LINEAR_QUADRATIC, (0,), np.array([2.0, 5.0]))
        with pytest.raises(NotAttainableError):
            solve_equality(ds, spec)


class TestDualAscent:
    def test_agrees_with_closed_forms(self):
        for seed in (0, 1, 2, 6, 7, 8, 12, 13, 14, 18, 19, 20):
            ds, spec = random_instance(seed, max_n=80)
            if spec.family not in CLOSED_FAMILIES:
                continue
            closed = solve_equality(ds, spec)
            ascended = solve_equality(ds, spec, method="dual_ascent")
            assert ascended.method == "dual_ascent"
            assert np.max(np.abs(closed.lam - ascended.lam)) <= 1e-6, spec.family

    def test_lambda_inside_domain(self):
        for seed in range(24):
            ds, spec = random_instance(seed, max_n=80)
            mult = solve_equality(ds, spec)
            assert multiplier_domain(spec).contains(mult.lam), spec.family

    def test_domain_hit_on_degenerate_cross(self):
        # all-zero columns keep the cross moment at zero for every multiplier,
        # so the ascent pins against the |lam| < 2 boundary
        ds = matrix_ds(np.zeros((10, 2)))
        spec = ConstraintSpec(CROSS_PRODUCT, (0, 1), np.array([1.0]))
        with pytest.raises(DomainHitError):
            solve_equality(ds, spec)

    def test_max_iterations_reported(self):
        # all-zero rows force the transported coordinates to constants
        # (T0, T1), so a cross moment that is not T0*T1 is inconsistent and
        # the residual can never vanish
        ds = matrix_ds(np.zeros((6, 2)))
        spec = ConstraintSpec(LINEAR_CROSS, (0, 1), np.array([0.5, 0.0, 0.3]))
        with pytest.raises(MaxIterationsError) as err:
            solve_equality(ds, spec, max_iter=500)
        assert err.value.residual_norm > 0.0


class TestDualObjective:
    def test_zero_multiplier_gives_zero(self):
        for seed in range(6):
            ds, spec = random_instance(seed, max_n=40)
            assert dual_objective(ds, spec, np.zeros(spec.k)) == 0.0

    def test_linear_example_values(self):
        # lam.t + mean(||shift||^2 - lam * (z + shift)) evaluated by hand
        ds = column_ds([0.0, 1.0, 2.0])
        spec = ConstraintSpec(LINEAR, (0,), np.array([2.0]))
        assert dual_objective(ds, spec, [2.0]) == pytest.approx(1.0, abs=1e-15)
        assert dual_objective(ds, spec, [1.0]) == pytest.approx(0.75, abs=1e-15)

    def test_weak_duality_against_solved_primal(self):
        rng = np.random.default_rng(123)
        checked = 0
        for seed in range(12):
            ds, spec = random_instance(seed, max_n=60)
            primal = certify(ds, spec, solve_equality(ds, spec)).primal_value
            dom = multiplier_domain(spec)
            lo = np.maximum(np.where(np.isfinite(dom.lower), dom.lower + 0.05, -3.0), -3.0)
            hi = np.minimum(np.where(np.isfinite(dom.upper), dom.upper - 0.05, 3.0), 3.0)
            for _ in range(15):
                lam = rng.uniform(lo, hi)
                assert dual_objective(ds, spec, lam) <= primal + 1e-8
                checked += 1
        assert checked >= 100

    def test_gradient_is_target_minus_moment(self):
        # central finite differences of the dual match t - mean phi(T(Z))
        rng = np.random.default_rng(7)
        for seed in range(8):
            ds, spec = random_instance(seed, max_n=50)
            dom = multiplier_domain(spec)
            lam = dom.clip(rng.normal(size=spec.k) * 0.3, 0.2)
            analytic = spec.target - transported_moment(ds, spec, lam)
            h = 1e-6
            for i in range(spec.k):
                bump = np.zeros(spec.k)
                bump[i] = h
                fd = (
                    dual_objective(ds, spec, lam + bump)
                    - dual_objective(ds, spec, lam - bump)
                ) / (2 * h)
                assert fd == pytest.approx(analytic[i], abs=1e-5)


class TestCertify:
    def test_identity_certificate_is_zero(self):
        ds = column_ds([0.0, 1.0, 2.0])
        spec = ConstraintSpec(LINEAR, (0,), np.array([1.0]))
        cert = certify(ds, spec, solve_equality(ds, spec))
        assert cert.primal_value == 0.0 and cert.dual_value == 0.0 and cert.gap == 0.0

    def test_linear_strong_duality_values(self):
        ds = column_ds([0.0, 1.0, 2.0])
        spec = ConstraintSpec(LINEAR, (0,), np.array([2.0]))
        cert = certify(ds, spec, solve_equality(ds, spec))
        assert cert.primal_value == pytest.approx(1.0, abs=1e-15)
        assert cert.dual_value == pytest.approx(1.0, abs=1e-15)
        assert abs(cert.gap) <= 1e-12

    def test_gap_small_over_random_instances(self):
        for seed in range(30):
            ds, spec = random_instance(seed, max_n=80)
            cert = certify(ds, spec, solve_equality(ds, spec))
            assert abs(cert.gap) <= 1e-6 * max(1.0, cert.primal_value), spec.family

    def test_monotone_multiplier_in_target(self):
        ds = column_ds([0.0, 1.0, 2.0, 5.0])
        lams = []
        for t in (1.5, 2.5, 3.5):
            spec = ConstraintSpec(LINEAR, (0,), np.array([t]))
            lams.append(float(solve_equality(ds, spec).lam[0]))
        assert lams[0] < lams[1] < lams[2]


class TestInequality:
    def test_slack_when_already_feasible(self):
        ds = column_ds([0.0, 1.0, 2.0])
        spec = ConstraintSpec(LINEAR, (0,), np.array([0.5]), mode=INEQUALITY_GE)
        mult = solve_inequality(ds, spec)
        assert np.all(mult.lam == 0.0)

    def test_active_constraint_matches_equality(self):
        ds = column_ds([0.0, 1.0, 2.0])
        ineq = ConstraintSpec(LINEAR, (0,), np.array([2.0]), mode=INEQUALITY_GE)
        mult = solve_inequality(ds, ineq)
        assert mult.lam == pytest.approx([2.0], abs=0)

    def test_quadratic_feasible_start(self):
        ds = column_ds([1.0, -1.0])
        spec = ConstraintSpec(QUADRATIC, (0,), np.array([0.25]), mode=INEQUALITY_GE)
        mult = solve_inequality(ds, spec)
        assert np.all(mult.lam == 0.0)

    def test_kkt_over_random_instances(self):
        for seed in range(36):
            ds, spec = random_instance(seed, max_n=80, mode=INEQUALITY_GE)
            mult = solve_inequality(ds, spec)
            moment = transported_moment(ds, spec, mult.lam)
            assert np.all(mult.lam >= 0.0), spec.family
            assert np.all(moment >= spec.target - 1e-5), spec.family
            assert abs(float(mult.lam @ mult.residual)) <= 1e-8, spec.family

    def test_rejects_equality_spec(self):
        ds = column_ds([0.0, 1.0])
        spec = ConstraintSpec(LINEAR, (0,), np.array([2.0]))
        with pytest.raises(ValueError, match="mode"):
            solve_inequality(ds, spec)
