"""Centered Gaussian measures, couplings and the correlation factorization.

Only centered Gaussians are modeled; a mean shift separates additively from
everything computed here and would add no coverage.  Coupling validity (the
assembled joint covariance being PSD) is checked at construction so solver
code never has to re-check.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError
from .linalg import (
    BlockMatrix2x2,
    SpdMatrix,
    _as_square,
    _eigh_desc,
    assemble_blocks,
    operator_norm,
)

# Slack on the PSD test of assembled couplings and on correlation norms;
# keeps exactly-singular boundary couplings (comonotone) constructible.
PSD_SLACK = 1e-12
# Condition number beyond which inverse square roots are refused rather
# than silently regularized.
MAX_CONDITION = 1e12


@dataclass(frozen=True, eq=False)
class GaussianMeasure:
    """Centered Gaussian on R^d with full-rank covariance."""

    covariance: SpdMatrix

    def __post_init__(self):
        cov = self.covariance
        if not isinstance(cov, SpdMatrix):
            cov = SpdMatrix(cov)
        object.__setattr__(self, "covariance", cov)

    @property
    def dim(self) -> int:
        return self.covariance.dim


@dataclass(frozen=True, eq=False)
class CorrelationMatrix:
    """Square matrix with operator norm at most one (cached).

    Joint covariances built from it are PD exactly when the norm is
    strictly below one.
    """

    r: np.ndarray
    op_norm: float = field(init=False)

    def __post_init__(self):
        arr = _as_square(self.r, "correlation matrix")
        norm = operator_norm(arr)
        if norm > 1.0 + PSD_SLACK:
            raise ValidationError(f"correlation matrix has operator norm {norm:.6g} > 1")
        arr.setflags(write=False)
        object.__setattr__(self, "r", arr)
        object.__setattr__(self, "op_norm", norm)

    @property
    def dim(self) -> int:
        return self.r.shape[0]


@dataclass(frozen=True, eq=False)
class CouplingCovariance:
    """Joint covariance of a Gaussian coupling, stored as (a, b, c) blocks.

    ``c`` is the cross-covariance E[Z1 Z2^T].  Construction verifies the
    assembled 2d x 2d matrix is PSD (up to PSD_SLACK relative slack).
    """

    a: SpdMatrix
    b: SpdMatrix
    c: np.ndarray

    def __post_init__(self):
        a = self.a if isinstance(self.a, SpdMatrix) else SpdMatrix(self.a)
        b = self.b if isinstance(self.b, SpdMatrix) else SpdMatrix(self.b)
        c = _as_square(self.c, "cross-covariance")
        if not (a.dim == b.dim == c.shape[0]):
            raise ValidationError(
                f"coupling blocks disagree: a {a.dim}, b {b.dim}, c {c.shape}"
            )
        joint = assemble_blocks(a.mat, c, b.mat)
        vals, _ = _eigh_desc(joint)
        if vals[-1] < -PSD_SLACK * max(abs(vals[0]), 1.0):
            raise ValidationError(
                f"cross-covariance is not admissible (min eigenvalue {vals[-1]:.6e})"
            )
        c.setflags(write=False)
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "c", c)

    @property
    def dim(self) -> int:
        return self.a.dim

    def assembled(self) -> np.ndarray:
        return assemble_blocks(self.a.mat, self.c, self.b.mat)

    def block(self) -> BlockMatrix2x2:
        return BlockMatrix2x2(self.a.sym, self.b.sym, self.c)


def _check_condition(m: SpdMatrix, name: str):
    cond = m.eigenvalues[0] / m.eigenvalues[-1]
    if cond > MAX_CONDITION:
        raise ValidationError(f"{name} is near-singular (condition number {cond:.3e})")


def kl_divergence(p1: GaussianMeasure, p0: GaussianMeasure) -> float:
    """KL(p1 | p0) between centered Gaussians.

    Equals ``0.5 * (<inv(S0), S1 - S0> - logdet(inv(S0) S1))`` for the two
    covariances; nonnegative, zero iff the covariances coincide.
    """
    if p1.dim != p0.dim:
        raise ValidationError(f"dimension mismatch: {p1.dim} vs {p0.dim}")
    s1, s0 = p1.covariance, p0.covariance
    cross = float(np.sum(s0.inv() * s1.mat))  # tr(inv(S0) S1), both symmetric
    return 0.5 * (cross - s1.dim - (s1.logdet() - s0.logdet()))


def bures_wasserstein_sq(a: SpdMatrix, b: SpdMatrix) -> float:
    """Squared Bures-Wasserstein distance between N(0, a) and N(0, b)."""
    if not isinstance(a, SpdMatrix):
        a = SpdMatrix(a)
    if not isinstance(b, SpdMatrix):
        b = SpdMatrix(b)
    if a.dim != b.dim:
        raise ValidationError(f"dimension mismatch: {a.dim} vs {b.dim}")
    ra = a.sqrt()
    inner_vals, _ = _eigh_desc(ra @ b.mat @ ra)
    cross = np.sqrt(np.clip(inner_vals, 0.0, None)).sum()
    return max(a.trace() + b.trace() - 2.0 * float(cross), 0.0)


def transport_cost(x: CouplingCovariance) -> float:
    """Expected squared distance under the coupling: tr(a) + tr(b) - 2 tr(c)."""
    return x.a.trace() + x.b.trace() - 2.0 * float(np.trace(x.c))


def correlation_factor(x: CouplingCovariance) -> CorrelationMatrix:
    """The unique r with ``c = a^{1/2} r b^{1/2}``; norm <= 1 iff x is valid."""
    _check_condition(x.a, "first marginal covariance")
    _check_condition(x.b, "second marginal covariance")
    return CorrelationMatrix(x.a.inv_sqrt() @ x.c @ x.b.inv_sqrt())


def coupling_from_correlation(
    a: SpdMatrix, b: SpdMatrix, r: CorrelationMatrix
) -> CouplingCovariance:
    """Coupling with cross-covariance ``a^{1/2} r b^{1/2}``.

    PD exactly when r has operator norm strictly below one; at norm one the
    joint covariance is PSD but singular.
    """
    if not isinstance(r, CorrelationMatrix):
        r = CorrelationMatrix(r)
    if not isinstance(a, SpdMatrix):
        a = SpdMatrix(a)
    if not isinstance(b, SpdMatrix):
        b = SpdMatrix(b)
    if not (a.dim == b.dim == r.dim):
        raise ValidationError(
            f"dimension mismatch: a {a.dim}, b {b.dim}, r {r.dim}"
        )
    return CouplingCovariance(a, b, a.sqrt() @ r.r @ b.sqrt())
