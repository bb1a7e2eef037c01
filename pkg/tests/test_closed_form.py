import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gaussot.closed_form import (
    PSD_BOUNDARY,
    Problem,
    ReferencePlan,
    dual_potentials,
    dual_value,
    entropic_cost,
    is_numerically_invertible,
    primal_gradient,
    primal_objective,
    reference_covariance,
    reference_precision,
    solvability_status,
    solvability_sufficient,
    solve,
    solve_1d,
    solve_correlation,
    solver_intermediates,
    tilt_matrix,
    tolerance_scale,
)
from gaussot.errors import AssumptionError, ValidationError
from gaussot.gaussians import CorrelationMatrix, bures_wasserstein_sq
from gaussot.instances import random_problem, random_reference, random_spd
from gaussot.linalg import (
    SpdMatrix,
    SymMatrix,
    assemble_blocks,
    hs_norm,
    is_positive_definite,
    sqrt_product,
)

from conftest import make_spd

I1 = SpdMatrix([[1.0]])

# frozen via 40-digit evaluation of the scalar formulas, confirmed by the
# matrix path, the correlation path and the stationarity root of the
# strictly convex scalar primal
GOLDEN = {
    (0.0, 2.0): (0.4142135623730950, 1.5480256881730053),
    (0.9, 2.0): (0.9090702383255098, 0.1906431282912522),
    (0.5, 1.0): (0.7440306508910550, 0.7053810959074488),
}


def problem_1d(rho, eps):
    if rho == 0.0:
        return Problem(I1, I1, ReferencePlan.product(), eps)
    return Problem(I1, I1, ReferencePlan.from_correlation(CorrelationMatrix([[rho]])), eps)


class TestProblemValidation:
    def test_epsilon_must_be_positive(self):
        with pytest.raises(ValidationError):
            Problem(I1, I1, ReferencePlan.product(), 0.0)
        with pytest.raises(ValidationError):
            Problem(I1, I1, ReferencePlan.product(), -1.0)

    def test_dimension_consistency(self, rng):
        with pytest.raises(ValidationError):
            Problem(make_spd(rng, 2), make_spd(rng, 3), ReferencePlan.product(), 1.0)
        with pytest.raises(ValidationError):
            Problem(
                make_spd(rng, 2),
                make_spd(rng, 2),
                ReferencePlan.from_correlation(CorrelationMatrix([[0.5]])),
                1.0,
            )

    def test_correlation_plan_requires_strict_norm(self):
        with pytest.raises(ValidationError):
            ReferencePlan.from_correlation(CorrelationMatrix([[1.0]]))


class TestReferenceCovariance:
    def test_product_identity_marginals(self):
        a = SpdMatrix(np.eye(3))
        out = reference_covariance(ReferencePlan.product(), a, a)
        assert np.array_equal(out.mat, np.eye(6))

    def test_scalar_correlation_assembly(self):
        plan = ReferencePlan.from_correlation(CorrelationMatrix([[0.5]]))
        out = reference_covariance(plan, I1, I1)
        assert np.allclose(out.mat, [[1.0, 0.5], [0.5, 1.0]])

    def test_correlation_matches_hand_assembled_full(self, rng):
        a, b = make_spd(rng, 3), make_spd(rng, 3)
        r = CorrelationMatrix(0.4 * np.eye(3))
        plan = ReferencePlan.from_correlation(r)
        via_plan = reference_covariance(plan, a, b).mat
        by_hand = assemble_blocks(a.mat, a.sqrt() @ r.r @ b.sqrt(), b.mat)
        assert np.abs(via_plan - by_hand).max() < 1e-14


class TestReferencePrecision:
    def test_block_diagonal(self, rng):
        a, b = make_spd(rng, 2), make_spd(rng, 2)
        sigma = SpdMatrix(SymMatrix(assemble_blocks(a.mat, np.zeros((2, 2)), b.mat)))
        prec = reference_precision(sigma)
        assert np.allclose(prec.p12, 0.0)
        assert np.allclose(prec.p11.mat, a.inv())
        assert np.allclose(prec.p22.mat, b.inv())

    def test_scalar_half_correlation(self):
        sigma = SpdMatrix([[1.0, 0.5], [0.5, 1.0]])
        prec = reference_precision(sigma)
        assert abs(prec.p12[0, 0] - (-2.0 / 3.0)) < 1e-14

    def test_correlation_closed_form_agrees(self, rng):
        a, b = make_spd(rng, 3), make_spd(rng, 3)
        r = CorrelationMatrix(
            0.6 * np.linalg.qr(rng.standard_normal((3, 3)))[0]
        )
        sigma = reference_covariance(ReferencePlan.from_correlation(r), a, b)
        prec = reference_precision(sigma)
        inner_inv = np.linalg.inv(np.eye(3) - r.r.T @ r.r)
        want = -a.inv_sqrt() @ r.r @ inner_inv @ b.inv_sqrt()
        assert np.abs(prec.p12 - want).max() < 1e-10

    def test_near_singular_rejected(self):
        sigma_mat = np.array([[1.0, 1.0 - 1e-14], [1.0 - 1e-14, 1.0]])
        with pytest.raises(ValidationError):
            reference_precision(SpdMatrix(sigma_mat))


class TestTiltMatrix:
    def test_product_reference_is_identity(self, rng):
        p = Problem(make_spd(rng, 3), make_spd(rng, 3), ReferencePlan.product(), 1.5)
        assert np.array_equal(tilt_matrix(p), np.eye(3))

    def test_scalar_value(self):
        p = problem_1d(0.5, 1.0)
        assert abs(tilt_matrix(p)[0, 0] - 5.0 / 3.0) < 1e-12

    def test_both_paths_agree_on_random_references(self):
        rng = np.random.default_rng(3)
        for kind in ("correlation", "full"):
            for d in (1, 2, 4):
                p = Problem(
                    random_spd(rng, d),
                    random_spd(rng, d),
                    random_reference(rng, d, kind),
                    float(rng.uniform(0.1, 3.0)),
                )
                tilt = tilt_matrix(p)
                sigma_inv = reference_covariance(p.reference, p.a, p.b).inv()
                direct = np.eye(d) - p.epsilon * sigma_inv[:d, d:]
                assert np.abs(tilt - direct).max() < 1e-9 * max(np.abs(direct).max(), 1.0)


class TestSolvability:
    def test_product_always_sufficient(self, rng):
        p = Problem(make_spd(rng, 2), make_spd(rng, 2), ReferencePlan.product(), 500.0)
        assert solvability_sufficient(p)

    def test_scalar_threshold(self):
        assert solvability_sufficient(problem_1d(0.5, 1.0))
        assert not solvability_sufficient(problem_1d(0.5, 2.0))

    def test_two_dim_threshold(self):
        ident = SpdMatrix(np.eye(2))
        plan = ReferencePlan.from_correlation(CorrelationMatrix(0.5 * np.eye(2)))
        assert solvability_sufficient(Problem(ident, ident, plan, 0.7))
        assert not solvability_sufficient(Problem(ident, ident, plan, 0.8))

    def test_invertibility_basics(self):
        assert is_numerically_invertible(np.eye(3))
        assert not is_numerically_invertible(np.zeros((2, 2)))

    def test_sufficient_implies_invertible(self):
        rng = np.random.default_rng(5)
        checked = 0
        for _ in range(300):
            d = int(rng.choice([1, 2, 3]))
            p = Problem(
                random_spd(rng, d),
                random_spd(rng, d),
                random_reference(rng, d, str(rng.choice(["correlation", "full"]))),
                float(np.exp(rng.uniform(np.log(0.05), np.log(5.0)))),
            )
            if solvability_sufficient(p):
                checked += 1
                assert is_numerically_invertible(tilt_matrix(p))
        assert checked > 50

    def test_status_reports_both_flags(self):
        status = solvability_status(problem_1d(0.5, 2.0))
        assert not status.sufficient_condition
        assert status.tilt_invertible  # the bound is sufficient only


class TestSolve:
    def test_identity_product_case(self):
        ident = SpdMatrix(np.eye(3))
        sol = solve(Problem(ident, ident, ReferencePlan.product(), 2.0))
        assert np.abs(sol.c_eps - (np.sqrt(2.0) - 1.0) * np.eye(3)).max() < 1e-12
        assert np.abs(sol.dual_f.mat - (1.0 + np.sqrt(2.0)) * np.eye(3)).max() < 1e-12
        assert np.abs(sol.dual_g.mat - (1.0 + np.sqrt(2.0)) * np.eye(3)).max() < 1e-12

    @pytest.mark.parametrize("rho,eps", list(GOLDEN))
    def test_scalar_golden_values(self, rho, eps):
        c_want, cost_want = GOLDEN[(rho, eps)]
        sol = solve(problem_1d(rho, eps))
        assert abs(sol.c_eps[0, 0] - c_want) < 1e-12
        assert abs(sol.cost - cost_want) < 1e-12

    def test_small_eps_approaches_unregularized_root(self, rng):
        a, b = make_spd(rng, 3), make_spd(rng, 3)
        target = sqrt_product(a, b)
        sol = solve(Problem(a, b, ReferencePlan.product(), 1e-6))
        assert np.linalg.norm(sol.c_eps - target) < 1e-4 * np.linalg.norm(target)

    def test_marginals_preserved_bitwise(self, rng):
        p = random_problem(np.random.default_rng(21), 3, "full")
        sol = solve(p)
        assert sol.coupling.a is p.a
        assert sol.coupling.b is p.b

    def test_singular_tilt_rejected(self):
        # 1-D: tilt vanishes when a*b*(1-rho^2) + eps*rho = 0
        with pytest.raises(AssumptionError):
            solve(problem_1d(-0.5, 1.5))

    def test_matrix_quadratic_and_symmetry_invariants(self):
        rng = np.random.default_rng(9)
        for kind in ("product", "correlation", "full"):
            p = random_problem(rng, 4, kind)
            sol = solve(p)
            tilt = tilt_matrix(p)
            scale = tolerance_scale(p)
            w = sol.c_eps @ tilt.T
            rhs = p.a.mat @ tilt @ p.b.mat @ tilt.T
            assert hs_norm(w @ w + p.epsilon * w - rhs) < 1e-9 * max(scale, hs_norm(rhs))
            z = p.a.inv() @ sol.c_eps @ tilt.T
            assert np.abs(z - z.T).max() < 1e-9

    def test_dual_feasibility_block_pd(self):
        rng = np.random.default_rng(10)
        p = random_problem(rng, 3, "correlation")
        sol = solve(p)
        tilt = tilt_matrix(p)
        block = assemble_blocks(sol.dual_f.mat, -tilt, sol.dual_g.mat)
        assert is_positive_definite(SymMatrix(block))

    def test_dual_relation_g_from_f(self):
        rng = np.random.default_rng(12)
        p = random_problem(rng, 3, "full")
        sol = solve(p)
        tilt = tilt_matrix(p)
        want = p.epsilon * p.b.inv() + tilt.T @ np.linalg.inv(sol.dual_f.mat) @ tilt
        assert np.abs(sol.dual_g.mat - want).max() < 1e-8

    def test_trace_monotone_in_eps_product_reference(self):
        rng = np.random.default_rng(14)
        for d in (1, 3):
            a, b = random_spd(rng, d), random_spd(rng, d)
            traces = [
                np.trace(solve(Problem(a, b, ReferencePlan.product(), eps)).c_eps)
                for eps in (0.1, 0.5, 1.0, 2.0, 5.0)
            ]
            assert all(t1 > t2 for t1, t2 in zip(traces, traces[1:]))

    def test_product_reference_collapse(self, rng):
        a, b = make_spd(rng, 3), make_spd(rng, 3)
        eps = 1.3
        sol = solve(Problem(a, b, ReferencePlan.product(), eps))
        inner = SpdMatrix(
            SymMatrix(a.sqrt() @ b.mat @ a.sqrt() + 0.25 * eps**2 * np.eye(3))
        )
        known = a.sqrt() @ inner.sqrt() @ a.inv_sqrt() - 0.5 * eps * np.eye(3)
        assert np.abs(sol.c_eps - known).max() < 1e-10

    def test_eps_limit_linear_rate(self, rng):
        a, b = make_spd(rng, 2), make_spd(rng, 2)
        target = sqrt_product(a, b)
        errs = {
            eps: np.linalg.norm(
                solve(Problem(a, b, ReferencePlan.product(), eps)).c_eps - target
            )
            for eps in (1e-2, 1e-3, 1e-4)
        }
        ratios = [errs[eps] / eps for eps in errs]
        assert max(ratios) < 3.0 * np.median(ratios) + 1e-12


class TestEntropicCost:
    def test_golden_values(self):
        for (rho, eps), (_, cost_want) in GOLDEN.items():
            assert abs(entropic_cost(problem_1d(rho, eps)) - cost_want) < 1e-12

    def test_matches_primal_objective_plus_constants(self):
        rng = np.random.default_rng(17)
        for kind in ("product", "correlation", "full"):
            p = random_problem(rng, 3, kind)
            sol = solve(p)
            sigma = reference_covariance(p.reference, p.a, p.b)
            const = p.epsilon * sigma.logdet() - 2.0 * p.epsilon * p.dim
            val = primal_objective(sol.c_eps, p)
            assert abs(val + const - sol.cost) < 1e-8 * tolerance_scale(p)

    def test_strong_duality_on_seeded_instances(self):
        rng = np.random.default_rng(18)
        for kind in ("product", "correlation", "full"):
            p = random_problem(rng, 2, kind)
            f, g = dual_potentials(p)
            gap = abs(entropic_cost(p) - dual_value(f, g, p))
            assert gap < 1e-8 * tolerance_scale(p)


class TestDualPotentials:
    def test_identity_product_values(self):
        ident = SpdMatrix(np.eye(2))
        f, g = dual_potentials(Problem(ident, ident, ReferencePlan.product(), 2.0))
        assert np.abs(f.mat - (1.0 + np.sqrt(2.0)) * np.eye(2)).max() < 1e-12
        assert np.abs(g.mat - (1.0 + np.sqrt(2.0)) * np.eye(2)).max() < 1e-12

    def test_small_eps_limit(self, rng):
        a, b = make_spd(rng, 2), make_spd(rng, 2)
        f, _ = dual_potentials(Problem(a, b, ReferencePlan.product(), 1e-7))
        want = a.inv() @ sqrt_product(a, b)
        assert np.abs(f.mat - 0.5 * (want + want.T)).max() < 1e-4


class TestDualValue:
    def test_optimal_value_matches_cost(self):
        p = problem_1d(0.0, 2.0)
        f, g = dual_potentials(p)
        assert abs(dual_value(f, g, p) - GOLDEN[(0.0, 2.0)][1]) < 1e-12

    def test_perturbed_potentials_are_strictly_worse(self):
        rng = np.random.default_rng(23)
        p = random_problem(rng, 2, "correlation")
        f, g = dual_potentials(p)
        cost = entropic_cost(p)
        bumped = SpdMatrix(SymMatrix(f.mat + 0.1 * np.eye(2)))
        assert dual_value(bumped, g, p) < cost - 1e-6

    def test_infeasible_pair_rejected(self):
        p = problem_1d(0.0, 1.0)
        tiny = SpdMatrix([[1e-3]])
        with pytest.raises(ValidationError):
            dual_value(tiny, tiny, p)  # block [[f, -I], [-I, g]] indefinite

    def test_scalar_hand_evaluation(self):
        # d=1 product reference, eps=2, optimum: by-hand dual objective
        p = problem_1d(0.0, 2.0)
        f, g = dual_potentials(p)
        fv, gv = f.mat[0, 0], g.mat[0, 0]
        want = (
            (1.0 + 2.0 - fv)
            + (1.0 + 2.0 - gv)
            + 2.0 * math.log(fv * gv - 1.0)
            - 2.0 * math.log(4.0)
        )
        assert abs(dual_value(f, g, p) - want) < 1e-12


class TestPrimalObjectiveAndGradient:
    def test_boundary_sentinel(self):
        p = problem_1d(0.0, 1.0)
        assert primal_objective(np.array([[1.0]]), p) is PSD_BOUNDARY

    def test_zero_cross_identity_marginals(self):
        ident = SpdMatrix(np.eye(3))
        for eps in (0.5, 2.0):
            p = Problem(ident, ident, ReferencePlan.product(), eps)
            assert abs(primal_objective(np.zeros((3, 3)), p) - 2 * 3 * (1 + eps)) < 1e-12

    def test_gradient_vanishes_at_solution(self):
        rng = np.random.default_rng(29)
        for kind in ("product", "correlation", "full"):
            p = random_problem(rng, 3, kind)
            sol = solve(p)
            assert hs_norm(primal_gradient(sol.c_eps, p)) < 1e-8 * tolerance_scale(p)

    def test_gradient_at_zero_cross_product_reference(self, rng):
        a, b = make_spd(rng, 2), make_spd(rng, 2)
        p = Problem(a, b, ReferencePlan.product(), 1.0)
        assert np.abs(primal_gradient(np.zeros((2, 2)), p) + 2.0 * np.eye(2)).max() < 1e-12

    def test_strict_convexity_along_segment(self):
        rng = np.random.default_rng(31)
        p = random_problem(rng, 2, "product")
        c0 = np.zeros((2, 2))
        c1 = 0.3 * np.eye(2)
        f0, f1 = primal_objective(c0, p), primal_objective(c1, p)
        mid = primal_objective(0.5 * (c0 + c1), p)
        assert mid < 0.5 * f0 + 0.5 * f1 - 1e-12


class TestSolveCorrelation:
    def test_zero_correlation_collapses_to_product_formula(self, rng):
        a, b = make_spd(rng, 2), make_spd(rng, 2)
        eps = 0.8
        plan = ReferencePlan.from_correlation(CorrelationMatrix(np.zeros((2, 2))))
        sol = solve_correlation(Problem(a, b, plan, eps))
        inner = SpdMatrix(
            SymMatrix(a.sqrt() @ b.mat @ a.sqrt() + 0.25 * eps**2 * np.eye(2))
        )
        known = a.sqrt() @ inner.sqrt() @ a.inv_sqrt() - 0.5 * eps * np.eye(2)
        assert np.abs(sol.c_eps - known).max() < 1e-10

    def test_scalar_golden(self):
        sol = solve_correlation(problem_1d(0.5, 1.0))
        assert abs(sol.c_eps[0, 0] - GOLDEN[(0.5, 1.0)][0]) < 1e-12

    def test_rejects_full_reference(self):
        rng = np.random.default_rng(33)
        p = random_problem(rng, 2, "full")
        with pytest.raises(ValidationError):
            solve_correlation(p)

    def test_agreement_with_general_path(self):
        rng = np.random.default_rng(35)
        for i in range(100):
            d = (1, 2, 3, 5)[i % 4]
            p = random_problem(rng, d, "correlation")
            general = solve(p)
            fast = solve_correlation(p)
            scale = max(1.0, np.abs(general.c_eps).max())
            assert np.abs(general.c_eps - fast.c_eps).max() < 1e-9 * scale
            assert abs(general.cost - fast.cost) < 1e-9 * max(1.0, abs(general.cost))

    def test_induced_correlation_factorization(self):
        rng = np.random.default_rng(37)
        p = random_problem(rng, 3, "correlation")
        sol = solve_correlation(p)
        r_eps = p.a.inv_sqrt() @ sol.c_eps @ p.b.inv_sqrt()
        rebuilt = p.a.sqrt() @ r_eps @ p.b.sqrt()
        assert np.abs(rebuilt - sol.c_eps).max() < 1e-11


class TestSolve1d:
    @pytest.mark.parametrize("rho,eps", list(GOLDEN))
    def test_golden(self, rho, eps):
        c, cost = solve_1d(1.0, 1.0, rho, eps)
        c_want, cost_want = GOLDEN[(rho, eps)]
        assert abs(c - c_want) < 1e-14
        assert abs(cost - cost_want) < 1e-14

    def test_small_eps_limit(self):
        for rho in (-0.4, 0.0, 0.7):
            c, cost = solve_1d(4.0, 1.0, rho, 1e-9)
            assert abs(c - 2.0) < 1e-6  # a*b
            assert abs(cost - 1.0) < 1e-6  # (a - b)^2

    def test_denominator_zero_rejected(self):
        # a*b*(1 - rho^2) = -eps*rho at rho=-0.5, eps=1.5
        with pytest.raises(AssumptionError):
            solve_1d(1.0, 1.0, -0.5, 1.5)

    def test_validation(self):
        with pytest.raises(ValidationError):
            solve_1d(-1.0, 1.0, 0.0, 1.0)
        with pytest.raises(ValidationError):
            solve_1d(1.0, 1.0, 1.0, 1.0)
        with pytest.raises(ValidationError):
            solve_1d(1.0, 1.0, 0.0, 0.0)

    def test_agreement_with_matrix_path(self):
        rng = np.random.default_rng(39)
        for _ in range(25):
            a_var = float(rng.uniform(0.3, 4.0))
            b_var = float(rng.uniform(0.3, 4.0))
            rho = float(rng.uniform(-0.9, 0.95))
            eps = float(np.exp(rng.uniform(np.log(0.05), np.log(5.0))))
            a, b = SpdMatrix([[a_var]]), SpdMatrix([[b_var]])
            plan = ReferencePlan.from_correlation(CorrelationMatrix([[rho]]))
            try:
                c, cost = solve_1d(a_var, b_var, rho, eps)
            except AssumptionError:
                continue
            sol = solve(Problem(a, b, plan, eps))
            assert abs(sol.c_eps[0, 0] - c) < 1e-12 * max(1.0, abs(c))
            assert abs(sol.cost - cost) < 1e-12 * max(1.0, abs(cost))

    def test_bias_nonnegative_and_reduced_at_high_rho(self):
        _, cost0 = solve_1d(1.0, 1.0, 0.0, 2.0)
        _, cost9 = solve_1d(1.0, 1.0, 0.9, 2.0)
        bw = bures_wasserstein_sq(I1, I1)
        assert cost0 - bw >= -1e-10 and cost9 - bw >= -1e-10
        assert cost9 < cost0


class TestSolverIntermediates:
    def test_fields_and_quadratics(self):
        rng = np.random.default_rng(41)
        p = random_problem(rng, 3, "correlation")
        inter = solver_intermediates(p)
        scale = tolerance_scale(p)
        rhs = p.a.mat @ inter.tilt @ p.b.mat @ inter.tilt.T
        w = inter.primal_quad_root
        z = inter.dual_quad_root
        assert hs_norm(w @ w + p.epsilon * w - rhs) < 1e-9 * max(scale, hs_norm(rhs))
        assert hs_norm(z @ z - p.epsilon * z - rhs) < 1e-9 * max(scale, hs_norm(rhs))
        assert is_positive_definite(inter.schur)
        # tilt equals a^{-1/2} n b^{-1/2}
        rebuilt = p.a.inv_sqrt() @ inter.n_factor @ p.b.inv_sqrt()
        assert np.abs(rebuilt - inter.tilt).max() < 1e-10
        d = p.dim
        assert np.array_equal(
            inter.ot_matrix, assemble_blocks(np.eye(d), -np.eye(d), np.eye(d))
        )


@settings(deadline=None, max_examples=25)
@given(
    seed=st.integers(0, 2**32 - 1),
    d=st.sampled_from([1, 2, 3]),
    kind=st.sampled_from(["product", "correlation", "full"]),
)
def test_stationarity_and_duality_property(seed, d, kind):
    rng = np.random.default_rng(seed)
    p = random_problem(rng, d, kind)
    sol = solve(p)
    scale = tolerance_scale(p)
    assert sol.gradient_residual < 1e-8 * scale
    assert sol.duality_gap < 1e-8 * scale
    assert np.array_equal(sol.coupling.a.mat, p.a.mat)
    assert np.array_equal(sol.coupling.b.mat, p.b.mat)
