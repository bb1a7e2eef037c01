"""Closed-form entropic optimal transport between centered Gaussians.

The quadratic-cost transport problem with a relative-entropy penalty toward
a Gaussian reference coupling reduces to a matrix program over admissible
cross-covariances.  This module carries that program end to end: the
reference precision blocks, the tilt matrix they induce, the closed-form
optimal cross-covariance and cost, the dual potentials with their value,
and the primal objective / gradient that the numerical oracles exercise.

Conventions: for marginal covariances ``a`` and ``b``, reference coupling
covariance ``sigma`` (2d x 2d, positive-definite) with precision blocks
``p11, p12, p22``, and regularization strength ``eps > 0``, the central
object is the tilt matrix ``I - eps * p12``.  With product references the
tilt is the identity and everything collapses to the classical entropic
transport formulas.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import AssumptionError, NumericalError, ValidationError
from .gaussians import CorrelationMatrix, CouplingCovariance
from .linalg import (
    BlockMatrix2x2,
    PD_RTOL,
    SpdMatrix,
    SymMatrix,
    _as_square,
    _eigh_desc,
    assemble_blocks,
    block_inverse,
    hs_inner,
    hs_norm,
    pd_logdet,
)

# Residual threshold (relative to tolerance_scale) that every returned
# Solution must satisfy for both stationarity and the duality gap.
RESIDUAL_RTOL = 1e-8
# Relative smallest-singular-value cutoff for the numerical invertibility
# check of the tilt matrix.
INVERTIBILITY_RTOL = 1e-12
# Negative eigenvalues of the inner square-root argument above this
# (times -tolerance_scale) are round-off and get clamped to zero.
CLAMP_RTOL = 1e-10
# Reference covariances with a larger condition number are refused.
MAX_REFERENCE_CONDITION = 1e12


class _PsdBoundary:
    """Tagged infinite objective value for couplings on or outside the PSD cone."""

    __slots__ = ()

    def __repr__(self):
        return "PSD_BOUNDARY"


#: Sentinel returned by the primal objective when the joint covariance is
#: singular or indefinite.  Deliberately not a float so tests can tell the
#: boundary apart from an overflow.
PSD_BOUNDARY = _PsdBoundary()


@dataclass(frozen=True, eq=False)
class ReferencePlan:
    """Reference coupling: product, correlation-parametrized, or a full matrix.

    ``product`` is sugar for a correlation reference with zero correlation.
    Correlation references need operator norm strictly below one so the
    joint reference covariance is positive-definite.
    """

    kind: str
    correlation: CorrelationMatrix | None = None
    covariance: SpdMatrix | None = None

    def __post_init__(self):
        if self.kind not in ("product", "correlation", "full"):
            raise ValidationError(f"unknown reference kind {self.kind!r}")
        if self.kind == "correlation":
            r = self.correlation
            if not isinstance(r, CorrelationMatrix):
                r = CorrelationMatrix(r)
                object.__setattr__(self, "correlation", r)
            if r.op_norm >= 1.0:
                raise ValidationError(
                    f"correlation reference needs operator norm < 1, got {r.op_norm:.6g}"
                )
        elif self.kind == "full":
            cov = self.covariance
            if not isinstance(cov, SpdMatrix):
                cov = SpdMatrix(cov)
                object.__setattr__(self, "covariance", cov)
            if cov.dim % 2:
                raise ValidationError("full reference covariance must act on a product space")

    @classmethod
    def product(cls) -> "ReferencePlan":
        return cls(kind="product")

    @classmethod
    def from_correlation(cls, r) -> "ReferencePlan":
        return cls(kind="correlation", correlation=r)

    @classmethod
    def from_covariance(cls, sigma) -> "ReferencePlan":
        return cls(kind="full", covariance=sigma)

    @property
    def dim(self) -> int | None:
        if self.kind == "correlation":
            return self.correlation.dim
        if self.kind == "full":
            return self.covariance.dim // 2
        return None


@dataclass(frozen=True, eq=False)
class Problem:
    """Marginal covariances, a reference plan and a regularization strength."""

    a: SpdMatrix
    b: SpdMatrix
    reference: ReferencePlan
    epsilon: float

    def __post_init__(self):
        a = self.a if isinstance(self.a, SpdMatrix) else SpdMatrix(self.a)
        b = self.b if isinstance(self.b, SpdMatrix) else SpdMatrix(self.b)
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)
        if a.dim != b.dim:
            raise ValidationError(f"marginal dims disagree: {a.dim} vs {b.dim}")
        eps = float(self.epsilon)
        if not math.isfinite(eps) or eps <= 0.0:
            raise ValidationError(f"epsilon must be a positive real, got {self.epsilon!r}")
        object.__setattr__(self, "epsilon", eps)
        ref_dim = self.reference.dim
        if ref_dim is not None and ref_dim != a.dim:
            raise ValidationError(
                f"reference dimension {ref_dim} does not match marginals ({a.dim})"
            )

    @property
    def dim(self) -> int:
        return self.a.dim


@dataclass(frozen=True, eq=False)
class PrecisionBlocks:
    """Blocks of the inverse reference covariance."""

    p11: SymMatrix
    p22: SymMatrix
    p12: np.ndarray

    def __post_init__(self):
        p12 = _as_square(self.p12, "p12")
        p12.setflags(write=False)
        object.__setattr__(self, "p12", p12)

    def assembled(self) -> np.ndarray:
        return assemble_blocks(self.p11.mat, self.p12, self.p22.mat)


@dataclass(frozen=True, eq=False)
class Solution:
    """Optimal coupling with its cost, dual certificate and residuals."""

    c_eps: np.ndarray
    coupling: CouplingCovariance
    cost: float
    dual_f: SpdMatrix
    dual_g: SpdMatrix
    gradient_residual: float
    duality_gap: float


@dataclass(frozen=True, eq=False)
class SolverIntermediates:
    """Internal matrices of a solved instance, exposed for verification.

    ``primal_quad_root`` is C @ tilt^T (solves W^2 + eps W = A tilt B tilt^T)
    and ``dual_quad_root`` is A @ F (solves Z^2 - eps Z = the same right side).
    """

    tilt: np.ndarray
    n_factor: np.ndarray
    dual_quad_root: np.ndarray
    primal_quad_root: np.ndarray
    schur: SymMatrix
    ot_matrix: np.ndarray


@dataclass(frozen=True)
class SolvabilityStatus:
    """Three-valued solvability report: sufficient bound, direct check."""

    sufficient_condition: bool
    tilt_invertible: bool


# --------------------------------------------------------------------------
# reference handling
# --------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class _ReferenceData:
    p11: np.ndarray
    p12: np.ndarray
    p22: np.ndarray
    logdet_sigma: float
    tilt: np.ndarray


def tolerance_scale(problem: Problem) -> float:
    """max(1, ||a||, ||b||, eps): every residual threshold is relative to it."""
    return max(
        1.0,
        float(problem.a.eigenvalues[0]),
        float(problem.b.eigenvalues[0]),
        problem.epsilon,
    )


def reference_covariance(reference: ReferencePlan, a: SpdMatrix, b: SpdMatrix) -> SpdMatrix:
    """The reference coupling covariance as a dense 2d x 2d SPD matrix."""
    if reference.kind == "full":
        if reference.covariance.dim != 2 * a.dim:
            raise ValidationError(
                f"full reference has dim {reference.covariance.dim}, expected {2 * a.dim}"
            )
        return reference.covariance
    if reference.kind == "product":
        cross = np.zeros((a.dim, b.dim))
    else:
        r = reference.correlation
        if r.dim != a.dim:
            raise ValidationError(f"correlation dim {r.dim} does not match marginals")
        cross = a.sqrt() @ r.r @ b.sqrt()
    return SpdMatrix(SymMatrix(assemble_blocks(a.mat, cross, b.mat)))


def reference_precision(sigma: SpdMatrix) -> PrecisionBlocks:
    """Blocks of the inverse of a reference covariance, via the block-inverse formula.

    Near-singular references (condition number above 1e12) are refused.
    The result is checked against the spectral inverse to 1e-10 relative.
    """
    if not isinstance(sigma, SpdMatrix):
        sigma = SpdMatrix(sigma)
    cond = sigma.eigenvalues[0] / sigma.eigenvalues[-1]
    if cond > MAX_REFERENCE_CONDITION:
        raise ValidationError(
            f"reference covariance is near-singular (condition number {cond:.3e})"
        )
    blocks = block_inverse(BlockMatrix2x2.from_dense(sigma.mat))
    out = PrecisionBlocks(blocks.a11, blocks.a22, blocks.a12)
    direct = sigma.inv()
    err = np.abs(out.assembled() - direct).max()
    if err > 1e-10 * max(np.abs(direct).max(), 1.0):
        raise NumericalError(
            f"block inverse of the reference disagrees with the spectral inverse ({err:.3e})"
        )
    return out


def _reference_data(problem: Problem) -> _ReferenceData:
    a, b, eps, d = problem.a, problem.b, problem.epsilon, problem.dim
    eye = np.eye(d)
    if problem.reference.kind == "product":
        return _ReferenceData(a.inv(), np.zeros((d, d)), b.inv(), a.logdet() + b.logdet(), eye)
    if problem.reference.kind == "correlation":
        r = problem.reference.correlation.r
        inner = SpdMatrix(SymMatrix(eye - r.T @ r))
        gain = r @ inner.inv()
        rai, rbi = a.inv_sqrt(), b.inv_sqrt()
        p12 = -rai @ gain @ rbi
        p11 = rai @ (eye + gain @ r.T) @ rai
        p22 = rbi @ inner.inv() @ rbi
        logdet_sigma = a.logdet() + b.logdet() + inner.logdet()
        tilt = eye - eps * p12
        data = _ReferenceData(0.5 * (p11 + p11.T), p12, 0.5 * (p22 + p22.T), logdet_sigma, tilt)
        # cross-check the closed forms against the assembled 2d inverse
        assert _consistent_with_dense(problem, data)
        return data
    sigma = reference_covariance(problem.reference, a, b)
    prec = reference_precision(sigma)
    tilt = eye - eps * prec.p12
    data = _ReferenceData(prec.p11.mat, prec.p12, prec.p22.mat, sigma.logdet(), tilt)
    assert _consistent_with_dense(problem, data)
    return data


def _consistent_with_dense(problem: Problem, data: _ReferenceData) -> bool:
    sigma = reference_covariance(problem.reference, problem.a, problem.b)
    direct = sigma.inv()
    d = problem.dim
    assembled = assemble_blocks(data.p11, data.p12, data.p22)
    scale = max(np.abs(direct).max(), 1.0)
    if np.abs(assembled - direct).max() > 1e-9 * scale:
        return False
    tilt_direct = np.eye(d) - problem.epsilon * direct[:d, d:]
    return bool(
        np.abs(data.tilt - tilt_direct).max()
        <= 1e-9 * max(np.abs(tilt_direct).max(), 1.0)
    )


def tilt_matrix(problem: Problem) -> np.ndarray:
    """``I - eps * p12`` for the problem's reference precision blocks.

    For correlation references this also equals
    ``a^{-1/2} (a^{1/2} b^{1/2} + eps r (I - r^T r)^{-1}) b^{-1/2}``,
    which is the form the fast path uses.
    """
    return _reference_data(problem).tilt


def is_numerically_invertible(m, tol: float = INVERTIBILITY_RTOL) -> bool:
    """True iff the smallest singular value exceeds ``tol`` times the largest."""
    arr = _as_square(m)
    svals = np.linalg.svd(arr, compute_uv=False)
    return bool(svals[0] > 0.0 and svals[-1] > tol * svals[0])


def _reference_spectral_parts(problem: Problem):
    """Singular values of the reference correlation + smallest marginal eigenvalues."""
    if problem.reference.kind == "product":
        d = problem.dim
        svals = np.zeros(d)
        lam_a = problem.a.min_eigenvalue
        lam_b = problem.b.min_eigenvalue
    elif problem.reference.kind == "correlation":
        svals = np.linalg.svd(problem.reference.correlation.r, compute_uv=False)
        lam_a = problem.a.min_eigenvalue
        lam_b = problem.b.min_eigenvalue
    else:
        sigma = problem.reference.covariance
        d = problem.dim
        a_ref = SpdMatrix(SymMatrix(sigma.mat[:d, :d]))
        b_ref = SpdMatrix(SymMatrix(sigma.mat[d:, d:]))
        r_ref = a_ref.inv_sqrt() @ sigma.mat[:d, d:] @ b_ref.inv_sqrt()
        svals = np.linalg.svd(r_ref, compute_uv=False)
        lam_a = a_ref.min_eigenvalue
        lam_b = b_ref.min_eigenvalue
    return svals, lam_a, lam_b


def solvability_sufficient(problem: Problem) -> bool:
    """Sufficient (not necessary) spectral bound for the tilt to be invertible.

    True iff ``eps * sum_i s_i / (1 - s_i^2) < sqrt(lam_min(a_ref) * lam_min(b_ref))``
    over the singular values ``s_i`` of the reference correlation.
    """
    svals, lam_a, lam_b = _reference_spectral_parts(problem)
    if np.any(svals >= 1.0):
        raise ValidationError(
            "reference correlation has a singular value >= 1; the joint reference "
            "covariance is not positive-definite"
        )
    lhs = problem.epsilon * float(np.sum(svals / (1.0 - svals**2)))
    return bool(lhs < math.sqrt(lam_a * lam_b))


def solvability_status(problem: Problem) -> SolvabilityStatus:
    """Advisory sufficient bound plus the decisive direct invertibility check."""
    return SolvabilityStatus(
        sufficient_condition=solvability_sufficient(problem),
        tilt_invertible=is_numerically_invertible(tilt_matrix(problem)),
    )


# --------------------------------------------------------------------------
# primal objective and gradient
# --------------------------------------------------------------------------


class PrimalEvaluator:
    """Fast repeated evaluation of the matrix objective and its gradient.

    Objective: ``<Y + eps * precision, X_c> - eps * logdet X_c`` over
    cross-covariances c, where Y is the block matrix [[I, -I], [-I, I]].
    Off the positive-definite cone the objective returns PSD_BOUNDARY.
    """

    def __init__(self, problem: Problem, _ref: _ReferenceData | None = None):
        self.problem = problem
        ref = _ref if _ref is not None else _reference_data(problem)
        self._ref = ref
        a, b = problem.a, problem.b
        self._a_inv = a.inv()
        self._tilt = ref.tilt
        self._eps = problem.epsilon
        # constant part: tr(a) + tr(b) + eps(<p11, a> + <p22, b>) - eps logdet(a)
        self._const = (
            a.trace()
            + b.trace()
            + self._eps * (hs_inner(ref.p11, a.mat) + hs_inner(ref.p22, b.mat))
            - self._eps * a.logdet()
        )
        self._b_mat = b.mat

    def _schur_eig(self, c):
        s = self._b_mat - c.T @ self._a_inv @ c
        return _eigh_desc(0.5 * (s + s.T))

    def objective(self, c):
        c = np.asarray(c, dtype=float)
        vals, _ = self._schur_eig(c)
        floor = PD_RTOL * max(abs(vals[0]), abs(vals[-1]))
        if vals[-1] <= floor:
            return PSD_BOUNDARY
        # -2 tr(tilt^T c) merges the transport term with the cross-precision one
        return float(
            self._const
            - 2.0 * hs_inner(self._tilt, c)
            - self._eps * np.sum(np.log(vals))
        )

    def gradient(self, c):
        c = np.asarray(c, dtype=float)
        s = self._b_mat - c.T @ self._a_inv @ c
        s = 0.5 * (s + s.T)
        vals, vecs = _eigh_desc(s)
        if vals[-1] <= PD_RTOL * max(abs(vals[0]), abs(vals[-1])):
            raise ValidationError(
                f"Schur complement is singular at this point (min eigenvalue {vals[-1]:.3e})"
            )
        s_inv = (vecs / vals) @ vecs.T
        return 2.0 * (self._eps * self._a_inv @ c @ s_inv - self._tilt)


def primal_objective(c, problem: Problem):
    """Matrix objective at cross-covariance c; PSD_BOUNDARY off the cone."""
    return PrimalEvaluator(problem).objective(c)


def primal_gradient(c, problem: Problem) -> np.ndarray:
    """``2 (eps a^{-1} c (b - c^T a^{-1} c)^{-1} - tilt)``; zero at the optimum."""
    return PrimalEvaluator(problem).gradient(c)


# --------------------------------------------------------------------------
# closed-form solve
# --------------------------------------------------------------------------


def _shifted_root(sym_psd: np.ndarray, shift: float, scale: float):
    """Eigen square root of ``sym_psd + shift * I`` with round-off clamping.

    Eigenvalues in (-CLAMP_RTOL * scale, 0) are clamped to zero; anything
    more negative is a hard numerical failure.
    """
    vals, vecs = _eigh_desc(0.5 * (sym_psd + sym_psd.T))
    arg = vals + shift
    if arg[-1] < 0.0:
        if arg[-1] <= -CLAMP_RTOL * scale:
            raise NumericalError(
                f"square-root argument is indefinite (min eigenvalue {arg[-1]:.6e})"
            )
        arg = np.clip(arg, 0.0, None)
    sqrt_arg = np.sqrt(arg)
    root = (vecs * sqrt_arg) @ vecs.T
    return 0.5 * (root + root.T), sqrt_arg


def _require_invertible_tilt(tilt: np.ndarray):
    if not is_numerically_invertible(tilt):
        svals = np.linalg.svd(tilt, compute_uv=False)
        raise AssumptionError(
            "tilt matrix is numerically singular "
            f"(singular values in [{svals[-1]:.3e}, {svals[0]:.3e}]); "
            "the closed form does not apply at this epsilon/reference"
        )


def _cost_from_parts(problem: Problem, ref: _ReferenceData, sqrt_arg: np.ndarray) -> float:
    a, b, eps, d = problem.a, problem.b, problem.epsilon, problem.dim
    return float(
        a.trace()
        + b.trace()
        - 2.0 * sqrt_arg.sum()
        + eps * np.sum(np.log(sqrt_arg + 0.5 * eps))
        + eps * (hs_inner(ref.p11, a.mat) + hs_inner(ref.p22, b.mat))
        - eps * (a.logdet() + b.logdet())
        - eps * d
        - eps * d * math.log(eps)
        + eps * ref.logdet_sigma
    )


def _dual_value_from_parts(problem, ref, f_mat, g_mat):
    a, b, eps, d = problem.a, problem.b, problem.epsilon, problem.dim
    block = assemble_blocks(f_mat, -ref.tilt, g_mat)
    logdet_block = pd_logdet(block, "dual feasibility block")
    return float(
        a.trace()
        + eps * hs_inner(ref.p11, a.mat)
        - hs_inner(f_mat, a.mat)
        + b.trace()
        + eps * hs_inner(ref.p22, b.mat)
        - hs_inner(g_mat, b.mat)
        + eps * logdet_block
        - eps * (2.0 * d * math.log(eps) - ref.logdet_sigma)
    )


def dual_value(f: SpdMatrix, g: SpdMatrix, problem: Problem) -> float:
    """Concave dual objective at feasible potentials (f, g).

    Requires the block matrix [[f, -tilt], [-tilt^T, g]] to be PD; at the
    optimal potentials the value equals the entropic transport cost.
    """
    if not isinstance(f, SpdMatrix):
        f = SpdMatrix(f)
    if not isinstance(g, SpdMatrix):
        g = SpdMatrix(g)
    return _dual_value_from_parts(problem, _reference_data(problem), f.mat, g.mat)


def _general_pieces(problem: Problem, ref: _ReferenceData):
    """Cross-covariance, dual pair and cost via the dense-reference route."""
    a, b, eps = problem.a, problem.b, problem.epsilon
    d = problem.dim
    tilt = ref.tilt
    _require_invertible_tilt(tilt)
    scale = tolerance_scale(problem)
    ra, rai = a.sqrt(), a.inv_sqrt()
    rb, rbi = b.sqrt(), b.inv_sqrt()
    eye = np.eye(d)

    g0 = ra @ tilt @ b.mat @ tilt.T @ ra
    k1, sqrt_arg = _shifted_root(g0, 0.25 * eps * eps, scale)
    root_full = ra @ k1 @ rai  # (a tilt b tilt^T + eps^2/4 I)^{1/2}
    c_eps = np.linalg.solve(tilt, (root_full - 0.5 * eps * eye).T).T

    f = SpdMatrix(SymMatrix(rai @ (k1 + 0.5 * eps * eye) @ rai))
    g2 = rb @ tilt.T @ a.mat @ tilt @ rb
    k2, _ = _shifted_root(g2, 0.25 * eps * eps, scale)
    g = SpdMatrix(SymMatrix(rbi @ (k2 + 0.5 * eps * eye) @ rbi))

    cost = _cost_from_parts(problem, ref, sqrt_arg)
    return c_eps, f, g, cost


def _correlation_pieces(problem: Problem, ref: _ReferenceData):
    """Same quantities via the d x d factor ``n = a^{1/2} b^{1/2} + eps r (I - r^T r)^{-1}``."""
    a, b, eps = problem.a, problem.b, problem.epsilon
    d = problem.dim
    eye = np.eye(d)
    if problem.reference.kind == "product":
        r = np.zeros((d, d))
    else:
        r = problem.reference.correlation.r
    inner = SpdMatrix(SymMatrix(eye - r.T @ r))
    ra, rb = a.sqrt(), b.sqrt()
    rai, rbi = a.inv_sqrt(), b.inv_sqrt()
    n = ra @ rb + eps * (r @ inner.inv())
    if not is_numerically_invertible(n):
        raise AssumptionError("correlation-path factor is numerically singular")
    scale = tolerance_scale(problem)

    k1, sqrt_arg = _shifted_root(n @ n.T, 0.25 * eps * eps, scale)
    r_eps = np.linalg.solve(n, (k1 - 0.5 * eps * eye).T).T
    c_eps = ra @ r_eps @ rb

    f = SpdMatrix(SymMatrix(rai @ (k1 + 0.5 * eps * eye) @ rai))
    k2, _ = _shifted_root(n.T @ n, 0.25 * eps * eps, scale)
    g = SpdMatrix(SymMatrix(rbi @ (k2 + 0.5 * eps * eye) @ rbi))

    cost = _cost_from_parts(problem, ref, sqrt_arg)
    return c_eps, f, g, cost


def _assemble_solution(problem, ref, c_eps, f, g, cost) -> Solution:
    scale = tolerance_scale(problem)
    grad = PrimalEvaluator(problem, _ref=ref).gradient(c_eps)
    residual = hs_norm(grad)
    gap = abs(cost - _dual_value_from_parts(problem, ref, f.mat, g.mat))
    if residual >= RESIDUAL_RTOL * scale:
        raise NumericalError(
            f"stationarity residual {residual:.3e} exceeds {RESIDUAL_RTOL:.0e} * scale"
        )
    if gap >= RESIDUAL_RTOL * scale:
        raise NumericalError(
            f"duality gap {gap:.3e} exceeds {RESIDUAL_RTOL:.0e} * scale"
        )
    coupling = CouplingCovariance(problem.a, problem.b, c_eps)
    vals, _ = _eigh_desc(coupling.assembled())
    if vals[-1] <= PD_RTOL * abs(vals[0]):
        raise NumericalError(
            f"solution coupling is not positive-definite (min eigenvalue {vals[-1]:.3e})"
        )
    return Solution(
        c_eps=c_eps,
        coupling=coupling,
        cost=cost,
        dual_f=f,
        dual_g=g,
        gradient_residual=residual,
        duality_gap=gap,
    )


def solve(problem: Problem) -> Solution:
    """Closed-form solution for any reference plan.

    The optimal cross-covariance is
    ``[(a tilt b tilt^T + eps^2/4 I)^{1/2} - eps/2 I] (tilt^T)^{-1}``
    with the non-symmetric root taken in the a-conjugated sense.
    Raises AssumptionError when the tilt matrix is numerically singular.
    """
    ref = _reference_data(problem)
    return _assemble_solution(problem, ref, *_general_pieces(problem, ref))


def solve_correlation(problem: Problem) -> Solution:
    """Fast path for correlation (and product) references.

    Works entirely with d x d factors and never assembles the 2d reference;
    agrees with :func:`solve` to solver precision.
    """
    if problem.reference.kind == "full":
        raise ValidationError("solve_correlation needs a correlation or product reference")
    ref = _reference_data(problem)
    return _assemble_solution(problem, ref, *_correlation_pieces(problem, ref))


def entropic_cost(problem: Problem) -> float:
    """Optimal value of the entropic transport problem (cost only)."""
    ref = _reference_data(problem)
    tilt = ref.tilt
    _require_invertible_tilt(tilt)
    a, b, eps = problem.a, problem.b, problem.epsilon
    ra = a.sqrt()
    g0 = ra @ tilt @ b.mat @ tilt.T @ ra
    _, sqrt_arg = _shifted_root(g0, 0.25 * eps * eps, tolerance_scale(problem))
    return _cost_from_parts(problem, ref, sqrt_arg)


def dual_potentials(problem: Problem) -> tuple[SpdMatrix, SpdMatrix]:
    """Optimal dual pair; satisfies the stationarity system of the dual."""
    ref = _reference_data(problem)
    _, f, g, _ = _general_pieces(problem, ref)
    return f, g


def solve_1d(a_var: float, b_var: float, rho: float, eps: float) -> tuple[float, float]:
    """Scalar closed form for 1-D marginals and a correlation-rho reference.

    Returns (cross-covariance, cost).  The configuration where
    ``sqrt(a_var * b_var) * (1 - rho^2) + eps * rho`` vanishes corresponds to
    a zero tilt and is rejected.
    """
    a_var, b_var, rho, eps = float(a_var), float(b_var), float(rho), float(eps)
    if a_var <= 0.0 or b_var <= 0.0:
        raise ValidationError("variances must be positive")
    if not abs(rho) < 1.0:
        raise ValidationError(f"correlation must lie in (-1, 1), got {rho}")
    if eps <= 0.0 or not math.isfinite(eps):
        raise ValidationError(f"epsilon must be a positive real, got {eps}")
    a, b = math.sqrt(a_var), math.sqrt(b_var)
    u = 1.0 - rho * rho
    den = a * b * u + eps * rho
    if abs(den) <= 1e-14 * max(a * b * u, eps, 1.0):
        raise AssumptionError(
            "1-D tilt vanishes: a*b*(1 - rho^2) + eps*rho = 0; the closed form "
            "does not apply"
        )
    ns = a * b + eps * rho / u
    h = math.hypot(ns, 0.5 * eps)
    c = (h - 0.5 * eps) * (a * b * u) / den
    cost = (
        a_var
        + b_var
        - 2.0 * h
        + eps * math.log(h + 0.5 * eps)
        + 2.0 * eps / u
        - eps
        - eps * math.log(eps)
        + eps * math.log(u)
    )
    return c, cost


def solver_intermediates(problem: Problem) -> SolverIntermediates:
    """Solve and expose the internal matrices that verification suites poke at."""
    ref = _reference_data(problem)
    if not _consistent_with_dense(problem, ref):
        raise NumericalError("tilt matrix computation paths disagree beyond 1e-9")
    c_eps, f, _, _ = _general_pieces(problem, ref)
    a, b = problem.a, problem.b
    schur = SymMatrix(b.mat - c_eps.T @ a.inv() @ c_eps)
    d = problem.dim
    eye = np.eye(d)
    return SolverIntermediates(
        tilt=ref.tilt,
        n_factor=a.sqrt() @ ref.tilt @ b.sqrt(),
        dual_quad_root=a.mat @ f.mat,
        primal_quad_root=c_eps @ ref.tilt.T,
        schur=schur,
        ot_matrix=assemble_blocks(eye, -eye, eye),
    )
