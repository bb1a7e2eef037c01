"""Seeded random problem instances shared by the test-suite and `verify`.

Everything is driven by numpy Generators so the verification CLI and the
acceptance tests see the exact same instances for a given seed.
"""

from __future__ import annotations

import numpy as np

from .closed_form import Problem, ReferencePlan, is_numerically_invertible, tilt_matrix
from .gaussians import CorrelationMatrix
from .linalg import SpdMatrix, SymMatrix, assemble_blocks

REFERENCE_KINDS = ("product", "correlation", "full")
SUITE_DIMS = (1, 2, 3, 5, 10)


def random_spd(rng, d, eig_range=(0.5, 2.5)) -> SpdMatrix:
    """SPD matrix with a random eigenbasis and eigenvalues in eig_range."""
    q, _ = np.linalg.qr(rng.standard_normal((d, d)))
    lam = rng.uniform(*eig_range, size=d)
    m = (q * lam) @ q.T
    return SpdMatrix(SymMatrix(0.5 * (m + m.T)))


def random_correlation(rng, d, op_norm) -> CorrelationMatrix:
    """Random square matrix rescaled to the requested operator norm."""
    r = rng.standard_normal((d, d))
    if op_norm == 0.0:
        return CorrelationMatrix(np.zeros((d, d)))
    return CorrelationMatrix(r * (op_norm / np.linalg.norm(r, 2)))


def random_reference(rng, d, kind, max_norm=0.7) -> ReferencePlan:
    if kind == "product":
        return ReferencePlan.product()
    norm = rng.uniform(0.1, max_norm)
    r = random_correlation(rng, d, norm)
    if kind == "correlation":
        return ReferencePlan.from_correlation(r)
    a_ref, b_ref = random_spd(rng, d), random_spd(rng, d)
    cross = a_ref.sqrt() @ r.r @ b_ref.sqrt()
    sigma = SpdMatrix(SymMatrix(assemble_blocks(a_ref.mat, cross, b_ref.mat)))
    return ReferencePlan.from_covariance(sigma)


def random_problem(rng, d, kind, eps_range=(0.05, 5.0), max_norm=0.7) -> Problem:
    """A solvable instance: redraws until the direct tilt check passes."""
    lo, hi = eps_range
    for _ in range(100):
        eps = float(np.exp(rng.uniform(np.log(lo), np.log(hi))))
        problem = Problem(
            a=random_spd(rng, d),
            b=random_spd(rng, d),
            reference=random_reference(rng, d, kind, max_norm=max_norm),
            epsilon=eps,
        )
        if is_numerically_invertible(tilt_matrix(problem)):
            return problem
    raise RuntimeError("could not draw a solvable instance")  # pragma: no cover


def standard_suite(seed, count=50) -> list[Problem]:
    """The seeded instance set behind the cross-check suites.

    Cycles dimensions {1, 2, 3, 5, 10} and all three reference kinds with
    eps drawn log-uniformly from [0.05, 5].  Larger dimensions keep eps
    away from the bottom of the range so the descent oracle stays cheap.
    """
    rng = np.random.default_rng(seed)
    problems = []
    for i in range(count):
        d = SUITE_DIMS[i % len(SUITE_DIMS)]
        kind = REFERENCE_KINDS[(i // len(SUITE_DIMS)) % len(REFERENCE_KINDS)]
        eps_range = (0.05, 5.0) if d <= 3 else (0.3, 5.0)
        problems.append(random_problem(rng, d, kind, eps_range=eps_range))
    return problems
