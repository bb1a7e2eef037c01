"""Parameter sweeps over epsilon or the reference correlation.

Grid points evaluate concurrently (the solvers are pure); rows come back in
input order regardless of completion order.  A point that violates the
solvability assumption degrades to a status row instead of aborting the
sweep, since studies near the assumption boundary are a primary use case.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor

import numpy as np

from .closed_form import Problem, ReferencePlan, solve
from .errors import AssumptionError
from .gaussians import CorrelationMatrix, bures_wasserstein_sq
from .linalg import sqrt_product


def _display_rho(problem: Problem):
    if problem.dim != 1:
        return None
    if problem.reference.kind == "product":
        return 0.0
    if problem.reference.kind == "correlation":
        return float(problem.reference.correlation.r[0, 0])
    return None


def _point_row(problem: Problem | None, epsilon: float, rho, bw: float) -> dict:
    if epsilon == 0.0:
        # unregularized endpoint: classical transport, zero entropic bias
        c = sqrt_product(problem.a, problem.b)
        return {
            "epsilon": 0.0,
            "rho": rho,
            "status": "ok",
            "cost": bw,
            "bw_cost": bw,
            "bias": 0.0,
            "c": c,
        }
    try:
        sol = solve(problem)
    except AssumptionError:
        return {
            "epsilon": epsilon,
            "rho": rho,
            "status": "assumption_violated",
            "cost": None,
            "bw_cost": bw,
            "bias": None,
            "c": None,
        }
    return {
        "epsilon": epsilon,
        "rho": rho,
        "status": "ok",
        "cost": sol.cost,
        "bw_cost": bw,
        "bias": sol.cost - bw,
        "c": sol.c_eps,
    }


def evaluate_sweep(base: Problem, axis: str, values: list[float]) -> list[dict]:
    """One row per grid value, ordered as given."""
    bw = bures_wasserstein_sq(base.a, base.b)
    points = []
    for v in values:
        if axis == "epsilon":
            if v == 0.0:
                points.append((base, 0.0, _display_rho(base)))
            else:
                p = Problem(base.a, base.b, base.reference, v)
                points.append((p, v, _display_rho(p)))
        else:
            plan = (
                ReferencePlan.product()
                if v == 0.0
                else ReferencePlan.from_correlation(CorrelationMatrix(np.array([[v]])))
            )
            p = Problem(base.a, base.b, plan, base.epsilon)
            points.append((p, base.epsilon, v))
    with ThreadPoolExecutor(max_workers=min(8, len(points))) as pool:
        rows = list(pool.map(lambda t: _point_row(t[0], t[1], t[2], bw), points))
    return rows
