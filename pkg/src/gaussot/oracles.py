"""Independent numerical verification machinery.

Nothing here reuses the closed-form solution path: the barrier descent
minimizes the matrix objective directly, the discretized scaling iteration
solves the problem on a grid, and the quadrature integrates densities.
Agreement between these oracles and the closed forms is what certifies the
formulas; the tolerances are deliberately loose because they compare an
exact expression against an approximation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .closed_form import PSD_BOUNDARY, PrimalEvaluator, Problem, reference_covariance
from .errors import ConvergenceError, ValidationError
from .gaussians import GaussianMeasure
from .linalg import SpdMatrix, hs_norm

# Longest step-halving run inside one Armijo line search before giving up.
_MAX_BACKTRACKS = 90


@dataclass(frozen=True)
class DescentOptions:
    max_iterations: int = 200_000
    gradient_tolerance: float = 1e-9
    initial_step: float = 1.0
    backtracking_factor: float = 0.5
    armijo_constant: float = 1e-4

    def __post_init__(self):
        if self.max_iterations <= 0 or self.gradient_tolerance <= 0 or self.initial_step <= 0:
            raise ValidationError("descent options must be positive")
        if not 0.0 < self.backtracking_factor < 1.0:
            raise ValidationError("backtracking factor must lie in (0, 1)")
        if not 0.0 < self.armijo_constant < 1.0:
            raise ValidationError("armijo constant must lie in (0, 1)")


@dataclass(frozen=True)
class Grid1D:
    """Symmetric 1-D grid in units of the target's standard deviation."""

    center: float = 0.0
    half_width: float = 6.0
    points: int = 401

    def __post_init__(self):
        if self.points < 3 or self.points % 2 == 0:
            raise ValidationError("grid needs an odd number of points, at least 3")
        if self.half_width < 4.0:
            raise ValidationError("grid half-width must cover at least 4 standard deviations")

    def nodes(self, sigma: float) -> np.ndarray:
        return self.center + sigma * np.linspace(-self.half_width, self.half_width, self.points)


@dataclass(frozen=True, eq=False)
class DiscreteCoupling:
    """Coupling supported on a product grid; weights sum to one."""

    x_nodes: np.ndarray
    y_nodes: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if w.ndim != 2 or np.any(w < -1e-15):
            raise ValidationError("weights must be a nonnegative matrix")
        if abs(w.sum() - 1.0) > 1e-8:
            raise ValidationError(f"weights sum to {w.sum():.12g}, expected 1")
        object.__setattr__(self, "x_nodes", np.asarray(self.x_nodes, dtype=float))
        object.__setattr__(self, "y_nodes", np.asarray(self.y_nodes, dtype=float))
        object.__setattr__(self, "weights", w)


def primal_descent(problem: Problem, opts: DescentOptions = DescentOptions()) -> np.ndarray:
    """Armijo-backtracked gradient descent on the matrix objective.

    Starts at zero cross-covariance (always interior), halves the step until
    the trial point is both inside the PD cone and passes the Armijo test,
    and stops once the gradient norm drops below the tolerance.  The trial
    step grows again after each accepted iterate so flat regions do not pin
    the method to a tiny step.
    """
    ev = PrimalEvaluator(problem)
    d = problem.dim
    c = np.zeros((d, d))
    f_val = ev.objective(c)
    assert f_val is not PSD_BOUNDARY  # zero cross-covariance is interior
    step = opts.initial_step
    grad = ev.gradient(c)
    gnorm = hs_norm(grad)
    measurable_decrease = True
    for _ in range(opts.max_iterations):
        if gnorm < opts.gradient_tolerance:
            return c
        # grow the step only after a decrease the float comparison could see;
        # once progress drops below one ulp of f, Armijo cannot police growth
        trial = min(step / opts.backtracking_factor, 1e6) if measurable_decrease else step
        noise = 1e-14 * (1.0 + abs(f_val))
        accepted = False
        next_grad = None
        for _ in range(_MAX_BACKTRACKS):
            cand = c - trial * grad
            f_cand = ev.objective(cand)
            if f_cand is not PSD_BOUNDARY:
                required = opts.armijo_constant * trial * gnorm * gnorm
                if required >= noise:
                    accepted = f_cand <= f_val - required
                else:
                    # below the evaluation noise floor the objective cannot
                    # certify progress; require the analytic gradient norm
                    # not to grow instead (rejects divergent step sizes)
                    next_grad = ev.gradient(cand)
                    accepted = f_cand <= f_val + noise and hs_norm(next_grad) <= gnorm
                if accepted:
                    break
            next_grad = None
            trial *= opts.backtracking_factor
        if not accepted:
            raise ConvergenceError(
                f"line search stalled at gradient norm {gnorm:.3e}", residual=gnorm
            )
        measurable_decrease = f_cand < f_val
        c, f_val, step = cand, f_cand, trial
        grad = next_grad if next_grad is not None else ev.gradient(c)
        gnorm = hs_norm(grad)
    raise ConvergenceError(
        f"no convergence after {opts.max_iterations} iterations "
        f"(gradient norm {gnorm:.3e})",
        residual=gnorm,
    )


def finite_difference_gradient(c, problem: Problem, step: float) -> np.ndarray:
    """Central-difference gradient of the matrix objective, entry by entry.

    The point must sit inside the PD cone with margin larger than the step;
    stepping outside is an error rather than a silent infinity.
    """
    if step <= 0:
        raise ValidationError("step must be positive")
    ev = PrimalEvaluator(problem)
    c = np.asarray(c, dtype=float)
    out = np.empty_like(c)
    for i in range(c.shape[0]):
        for j in range(c.shape[1]):
            bump = np.zeros_like(c)
            bump[i, j] = step
            f_plus = ev.objective(c + bump)
            f_minus = ev.objective(c - bump)
            if f_plus is PSD_BOUNDARY or f_minus is PSD_BOUNDARY:
                raise ValidationError(
                    f"finite-difference step leaves the PD cone at entry ({i}, {j})"
                )
            out[i, j] = (f_plus - f_minus) / (2.0 * step)
    return out


def dual_residuals(f: SpdMatrix, g: SpdMatrix, problem: Problem) -> tuple[float, float]:
    """Residual norms of the two stationarity equations of the dual.

    r1 = ||F A F - eps F - tilt B tilt^T||, r2 = ||eps B^{-1} + tilt^T F^{-1} tilt - G||.
    Both vanish (to solver precision) at the optimal potentials.
    """
    from .closed_form import tilt_matrix

    if not isinstance(f, SpdMatrix):
        f = SpdMatrix(f)
    if not isinstance(g, SpdMatrix):
        g = SpdMatrix(g)
    tilt = tilt_matrix(problem)
    fm, gm = f.mat, g.mat
    r1 = hs_norm(fm @ problem.a.mat @ fm - problem.epsilon * fm - tilt @ problem.b.mat @ tilt.T)
    r2 = hs_norm(problem.epsilon * problem.b.inv() + tilt.T @ f.inv() @ tilt - gm)
    return r1, r2


# --------------------------------------------------------------------------
# discretized scaling oracle
# --------------------------------------------------------------------------


def _gaussian_logpdf(points: np.ndarray, cov: SpdMatrix) -> np.ndarray:
    """Log-density of N(0, cov) at rows of ``points``; analytic, no underflow."""
    pts = np.atleast_2d(points)
    quad = np.einsum("ni,ij,nj->n", pts, cov.inv(), pts)
    return -0.5 * (quad + cov.logdet() + cov.dim * math.log(2.0 * math.pi))


def _product_nodes(grids, marginal: SpdMatrix):
    """Grid nodes for one marginal: (n, d) array plus log cell volume."""
    sigmas = np.sqrt(np.diag(marginal.mat))
    axes = [g.nodes(s) for g, s in zip(grids, sigmas)]
    log_cell = sum(math.log(ax[1] - ax[0]) for ax in axes)
    if len(axes) == 1:
        return axes[0][:, None], log_cell
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=1), log_cell


def _discretize_marginal(nodes, log_cell, cov):
    logw = _gaussian_logpdf(nodes, cov) + log_cell
    logw -= logsumexp(logw)
    return logw


def sinkhorn_discrete(
    problem: Problem,
    grids,
    max_iter: int = 20_000,
    tol: float = 1e-9,
) -> tuple[DiscreteCoupling, float]:
    """Log-domain scaling iteration on the grid-discretized problem.

    The kernel weights are ``exp(-|x - y|^2 / (2 eps))`` times the reference
    density, matching the convention that the entropy penalty carries a
    factor of two epsilon.  Returns the converged coupling and the discrete
    objective (transport term plus ``2 eps`` times the KL term against the
    discretized reference).  Only d in {1, 2} is supported; grids must cover
    at least five standard deviations per axis.
    """
    d = problem.dim
    if d not in (1, 2):
        raise ValidationError("the discretized oracle only supports d in {1, 2}")
    if isinstance(grids, Grid1D):
        grids = [grids] * d
    grids = list(grids)
    if len(grids) != d:
        raise ValidationError(f"need one grid per axis, got {len(grids)} for d={d}")
    if any(g.half_width < 5.0 for g in grids):
        raise ValidationError("grids must cover at least 5 standard deviations")
    eps = problem.epsilon

    x_nodes, log_cell_x = _product_nodes(grids, problem.a)
    y_nodes, log_cell_y = _product_nodes(grids, problem.b)
    log_mu = _discretize_marginal(x_nodes, log_cell_x, problem.a)
    log_nu = _discretize_marginal(y_nodes, log_cell_y, problem.b)

    sigma = reference_covariance(problem.reference, problem.a, problem.b)
    pairs = np.concatenate(
        [
            np.repeat(x_nodes, y_nodes.shape[0], axis=0),
            np.tile(y_nodes, (x_nodes.shape[0], 1)),
        ],
        axis=1,
    )
    log_ref = _gaussian_logpdf(pairs, sigma).reshape(x_nodes.shape[0], y_nodes.shape[0])
    log_ref = log_ref + log_cell_x + log_cell_y
    log_ref -= logsumexp(log_ref)

    sq_dist = (
        np.sum(x_nodes**2, axis=1)[:, None]
        + np.sum(y_nodes**2, axis=1)[None, :]
        - 2.0 * x_nodes @ y_nodes.T
    )
    log_kernel = log_ref - sq_dist / (2.0 * eps)

    fpot = np.zeros(x_nodes.shape[0])
    gpot = np.zeros(y_nodes.shape[0])
    mu, nu = np.exp(log_mu), np.exp(log_nu)
    for it in range(max_iter):
        fpot = log_mu - logsumexp(log_kernel + gpot[None, :], axis=1)
        gpot = log_nu - logsumexp(log_kernel + fpot[:, None], axis=0)
        if it % 5 == 4 or it == max_iter - 1:
            logw = log_kernel + fpot[:, None] + gpot[None, :]
            w = np.exp(logw)
            row_err = np.abs(w.sum(axis=1) - mu).sum()
            col_err = np.abs(w.sum(axis=0) - nu).sum()
            if max(row_err, col_err) < tol:
                break
    else:
        raise ConvergenceError(
            f"scaling iteration did not reach tol={tol:g} in {max_iter} iterations; "
            "if the kernel is extremely peaked, try a narrower or finer grid",
            residual=max(row_err, col_err),
        )

    transport = float(np.sum(w * sq_dist))
    kl = float(np.sum(np.where(w > 0.0, w * (logw - log_ref), 0.0)))
    coupling = DiscreteCoupling(x_nodes, y_nodes, w / w.sum())
    return coupling, transport + 2.0 * eps * kl


def empirical_cross_covariance(coupling: DiscreteCoupling) -> np.ndarray:
    """``sum_ij w_ij x_i y_j^T`` of a discrete coupling (nodes are centered)."""
    x = np.atleast_2d(coupling.x_nodes.T).T
    y = np.atleast_2d(coupling.y_nodes.T).T
    return np.einsum("ij,ik,jl->kl", coupling.weights, x, y)


def kl_quadrature_1d(p1: GaussianMeasure, p0: GaussianMeasure, grid: Grid1D) -> float:
    """Trapezoid quadrature of the 1-D relative entropy integrand.

    Integrates ``p1 log(p1 / p0)`` on the grid scaled to p1's standard
    deviation; the grid should span +-10 sigma for 1e-6 agreement with the
    closed form across variance ratios in [0.1, 10].
    """
    if p1.dim != 1 or p0.dim != 1:
        raise ValidationError("quadrature oracle is 1-D only")
    s1 = math.sqrt(p1.covariance.mat[0, 0])
    s0 = math.sqrt(p0.covariance.mat[0, 0])
    x = grid.nodes(s1)
    log_p1 = -0.5 * (x / s1) ** 2 - math.log(s1 * math.sqrt(2.0 * math.pi))
    log_p0 = -0.5 * (x / s0) ** 2 - math.log(s0 * math.sqrt(2.0 * math.pi))
    return float(np.trapezoid(np.exp(log_p1) * (log_p1 - log_p0), x))
