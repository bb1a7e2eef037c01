"""Cross-check suites behind the `verify` command.

Each suite runs one family of oracle-versus-closed-form properties over the
seeded standard instance set and reports the worst residual seen.  The
suites are deterministic for a fixed seed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .closed_form import (
    Problem,
    ReferencePlan,
    dual_potentials,
    entropic_cost,
    primal_gradient,
    solve,
    tolerance_scale,
)
from .gaussians import CorrelationMatrix, GaussianMeasure, kl_divergence
from .instances import standard_suite
from .linalg import SpdMatrix
from .oracles import (
    DescentOptions,
    Grid1D,
    dual_residuals,
    empirical_cross_covariance,
    finite_difference_gradient,
    kl_quadrature_1d,
    primal_descent,
    sinkhorn_discrete,
)

_GOLDEN_1D = {
    (0.0, 2.0): (0.4142135623730950, 1.5480256881730053),
    (0.9, 2.0): (0.9090702383255098, 0.1906431282912522),
    (0.5, 1.0): (0.7440306508910550, 0.7053810959074488),
}


@dataclass(frozen=True)
class PropertyResult:
    suite: str
    name: str
    passed: bool
    worst: float
    tolerance: float


def _result(suite, name, worst, tol):
    return PropertyResult(suite, name, bool(worst < tol), float(worst), float(tol))


def suite_duality(seed: int) -> list[PropertyResult]:
    worst_grad = worst_gap = worst_system = 0.0
    for p in standard_suite(seed):
        sol = solve(p)
        scale = tolerance_scale(p)
        worst_grad = max(worst_grad, sol.gradient_residual / scale)
        worst_gap = max(worst_gap, sol.duality_gap / scale)
        r1, r2 = dual_residuals(sol.dual_f, sol.dual_g, p)
        worst_system = max(worst_system, r1 / scale, r2 / scale)
    return [
        _result("duality", "stationarity residual / scale", worst_grad, 1e-8),
        _result("duality", "duality gap / scale", worst_gap, 1e-8),
        _result("duality", "dual system residuals / scale", worst_system, 1e-8),
    ]


def suite_descent(seed: int) -> list[PropertyResult]:
    worst = 0.0
    for p in standard_suite(seed):
        scale = tolerance_scale(p)
        c = primal_descent(p, DescentOptions(gradient_tolerance=1e-9 * scale))
        worst = max(worst, float(np.linalg.norm(c - solve(p).c_eps)) / scale)
    return [_result("descent", "descent vs closed form / scale", worst, 1e-6)]


def suite_sinkhorn(seed: int) -> list[PropertyResult]:
    del seed  # grid oracle is deterministic; cases are the frozen scalar ones
    worst_cost = worst_cross = 0.0
    refine_ok = True
    for (rho, eps), (c_want, cost_want) in _GOLDEN_1D.items():
        one = SpdMatrix([[1.0]])
        plan = (
            ReferencePlan.product()
            if rho == 0.0
            else ReferencePlan.from_correlation(CorrelationMatrix([[rho]]))
        )
        p = Problem(one, one, plan, eps)
        coupling, cost = sinkhorn_discrete(p, Grid1D(half_width=6.0, points=401))
        worst_cost = max(worst_cost, abs(cost - cost_want))
        cross = empirical_cross_covariance(coupling)[0, 0]
        worst_cross = max(worst_cross, abs(cross - c_want))
        _, fine_cost = sinkhorn_discrete(p, Grid1D(half_width=7.0, points=801))
        refine_ok = refine_ok and abs(fine_cost - cost_want) < abs(cost - cost_want)
    results = [
        _result("sinkhorn", "discrete cost vs closed form", worst_cost, 2e-2),
        _result("sinkhorn", "discrete cross-covariance vs closed form", worst_cross, 2e-2),
    ]
    results.append(
        PropertyResult("sinkhorn", "refinement shrinks error", refine_ok, 0.0, 1.0)
    )
    return results


def suite_finite_difference(seed: int) -> list[PropertyResult]:
    worst = 0.0
    rng = np.random.default_rng(seed)
    problems = [p for p in standard_suite(seed) if p.dim <= 5][:20]
    for p in problems:
        sol = solve(p)
        c = float(rng.uniform(0.3, 0.7)) * sol.c_eps
        fd = finite_difference_gradient(c, p, 1e-6)
        worst = max(worst, float(np.abs(fd - primal_gradient(c, p)).max()))
    return [_result("fd", "finite-difference vs analytic gradient", worst, 1e-5)]


def suite_kl(seed: int) -> list[PropertyResult]:
    del seed
    grid = Grid1D(half_width=10.0, points=40001)
    worst = 0.0
    one = GaussianMeasure(SpdMatrix([[1.0]]))
    for ratio in np.geomspace(0.1, 10.0, 9):
        p1 = GaussianMeasure(SpdMatrix([[float(ratio)]]))
        worst = max(worst, abs(kl_quadrature_1d(p1, one, grid) - kl_divergence(p1, one)))
    return [_result("kl", "quadrature vs closed form", worst, 1e-6)]


SUITES = {
    "duality": suite_duality,
    "descent": suite_descent,
    "sinkhorn": suite_sinkhorn,
    "fd": suite_finite_difference,
    "kl": suite_kl,
}


def run_suites(names, seed: int) -> list[PropertyResult]:
    results = []
    for name in names:
        if name not in SUITES:
            raise KeyError(name)
        results.extend(SUITES[name](seed))
    return results
