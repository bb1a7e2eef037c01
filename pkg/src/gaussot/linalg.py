"""Dense symmetric / positive-definite matrix primitives.

Everything downstream (Gaussian measures, couplings, the closed-form solver
and its oracles) is built on what lives here: eigendecompositions, symmetric
and non-symmetric product square roots, 2x2 block inverses, Schur complements
and definiteness tests.

All square roots go through a single eigendecomposition primitive; there is
no Newton-Schulz iteration.  Log-determinants are sums of eigenvalue
logarithms, never a determinant.  Every value is immutable once constructed,
so instances can be shared freely across threads.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import NumericalError, ValidationError

# Relative floor under which an eigenvalue no longer counts as positive.
PD_RTOL = 1e-12
# Relative asymmetry beyond which an input is malformed rather than merely
# drifted; below it we silently symmetrize.
SYM_RTOL = 1e-8


def _as_square(mat, name="matrix"):
    arr = np.array(mat, dtype=float)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1] or arr.shape[0] < 1:
        raise ValidationError(f"{name} must be square with dim >= 1, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValidationError(f"{name} has non-finite entries")
    return arr


def _eigh_desc(arr):
    """Eigenvalues (descending) and matching orthonormal eigenvectors."""
    try:
        vals, vecs = np.linalg.eigh(arr)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"eigendecomposition did not converge: {exc}") from exc
    return vals[::-1].copy(), vecs[:, ::-1].copy()


@dataclass(frozen=True, eq=False)
class SymMatrix:
    """Dense real symmetric matrix, symmetrized on construction.

    Asymmetry above ``SYM_RTOL * max|entry|`` is rejected instead of being
    silently averaged away.
    """

    mat: np.ndarray

    def __post_init__(self):
        arr = _as_square(self.mat)
        scale = np.abs(arr).max()
        if scale > 0.0 and np.abs(arr - arr.T).max() > SYM_RTOL * scale:
            raise ValidationError(
                "matrix is not symmetric (relative asymmetry "
                f"{np.abs(arr - arr.T).max() / scale:.2e} exceeds {SYM_RTOL:.0e})"
            )
        arr = 0.5 * (arr + arr.T)
        arr.setflags(write=False)
        object.__setattr__(self, "mat", arr)

    @property
    def dim(self) -> int:
        return self.mat.shape[0]


@dataclass(frozen=True, eq=False)
class SpdMatrix:
    """Symmetric positive-definite matrix with an eager eigen-cache.

    Construction rejects matrices whose smallest eigenvalue does not clear
    ``PD_RTOL`` times the largest one, which keeps the test scale-free.
    The cached decomposition backs ``sqrt`` / ``inv_sqrt`` / ``inv`` /
    ``logdet`` so those derived quantities are deterministic and cheap.
    """

    sym: SymMatrix
    eigenvalues: np.ndarray = field(init=False, repr=False)
    eigenvectors: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        base = self.sym if isinstance(self.sym, SymMatrix) else SymMatrix(self.sym)
        object.__setattr__(self, "sym", base)
        vals, vecs = _eigh_desc(base.mat)
        if vals[-1] <= PD_RTOL * max(abs(vals[0]), abs(vals[-1])):
            raise ValidationError(
                f"matrix is not positive-definite (min eigenvalue {vals[-1]:.6e})"
            )
        vals.setflags(write=False)
        vecs.setflags(write=False)
        object.__setattr__(self, "eigenvalues", vals)
        object.__setattr__(self, "eigenvectors", vecs)

    @property
    def mat(self) -> np.ndarray:
        return self.sym.mat

    @property
    def dim(self) -> int:
        return self.sym.dim

    @property
    def min_eigenvalue(self) -> float:
        return float(self.eigenvalues[-1])

    def _transform(self, fn):
        vecs = self.eigenvectors
        out = (vecs * fn(self.eigenvalues)) @ vecs.T
        return 0.5 * (out + out.T)

    def sqrt(self) -> np.ndarray:
        return self._transform(np.sqrt)

    def inv_sqrt(self) -> np.ndarray:
        return self._transform(lambda v: 1.0 / np.sqrt(v))

    def inv(self) -> np.ndarray:
        return self._transform(lambda v: 1.0 / v)

    def logdet(self) -> float:
        return float(np.sum(np.log(self.eigenvalues)))

    def trace(self) -> float:
        return float(np.trace(self.mat))


@dataclass(frozen=True, eq=False)
class BlockMatrix2x2:
    """Symmetric 2d x 2d matrix stored as blocks [[a11, a12], [a12^T, a22]]."""

    a11: SymMatrix
    a22: SymMatrix
    a12: np.ndarray

    def __post_init__(self):
        a11 = self.a11 if isinstance(self.a11, SymMatrix) else SymMatrix(self.a11)
        a22 = self.a22 if isinstance(self.a22, SymMatrix) else SymMatrix(self.a22)
        a12 = _as_square(self.a12, "a12")
        if not (a11.dim == a22.dim == a12.shape[0]):
            raise ValidationError(
                f"block dims disagree: a11 {a11.dim}, a22 {a22.dim}, a12 {a12.shape}"
            )
        a12.setflags(write=False)
        object.__setattr__(self, "a11", a11)
        object.__setattr__(self, "a22", a22)
        object.__setattr__(self, "a12", a12)

    @property
    def dim(self) -> int:
        return self.a11.dim

    @classmethod
    def from_dense(cls, mat) -> "BlockMatrix2x2":
        arr = _as_square(mat)
        if arr.shape[0] % 2:
            raise ValidationError(f"dense block matrix must have even size, got {arr.shape[0]}")
        d = arr.shape[0] // 2
        # a21 must actually be the transpose of a12 for the split to be lossless
        scale = max(np.abs(arr).max(), 1.0)
        if np.abs(arr[d:, :d] - arr[:d, d:].T).max() > SYM_RTOL * scale:
            raise ValidationError("dense matrix is not block-symmetric")
        return cls(SymMatrix(arr[:d, :d]), SymMatrix(arr[d:, d:]), arr[:d, d:])

    def assembled(self) -> np.ndarray:
        return np.block([[self.a11.mat, self.a12], [self.a12.T, self.a22.mat]])


def assemble_blocks(a11, a12, a22) -> np.ndarray:
    """Dense [[a11, a12], [a12^T, a22]] from raw arrays."""
    return np.block([[a11, a12], [np.asarray(a12).T, a22]])


def sym_eig(m: SymMatrix):
    """Eigenvalues (descending) and orthonormal eigenvectors of a symmetric matrix.

    The reconstruction ``V diag(vals) V^T`` matches the input to machine
    precision relative to its norm.
    """
    if not isinstance(m, SymMatrix):
        m = SymMatrix(m)
    return _eigh_desc(m.mat)


def spd_sqrt(m: SpdMatrix) -> SpdMatrix:
    """Symmetric positive-definite square root, via the eigen-cache."""
    if not isinstance(m, SpdMatrix):
        m = SpdMatrix(m)
    return SpdMatrix(SymMatrix(m.sqrt()))


def sqrt_product(a: SpdMatrix, k: SpdMatrix) -> np.ndarray:
    """The (generally non-symmetric) square root of the product ``a @ k``.

    Computed as ``a^{1/2} (a^{1/2} k a^{1/2})^{1/2} a^{-1/2}``; squaring the
    result reproduces ``a @ k``.
    """
    if not isinstance(a, SpdMatrix):
        a = SpdMatrix(a)
    if not isinstance(k, SpdMatrix):
        k = SpdMatrix(k)
    if a.dim != k.dim:
        raise ValidationError(f"dimension mismatch: {a.dim} vs {k.dim}")
    ra = a.sqrt()
    inner = SpdMatrix(SymMatrix(ra @ k.mat @ ra))
    return ra @ inner.sqrt() @ a.inv_sqrt()


def schur_complement(x: BlockMatrix2x2) -> SymMatrix:
    """``a22 - a12^T a11^{-1} a12``, symmetrized.  Requires a11 PD."""
    a11 = SpdMatrix(x.a11)
    return SymMatrix(x.a22.mat - x.a12.T @ a11.inv() @ x.a12)


def block_inverse(x: BlockMatrix2x2) -> BlockMatrix2x2:
    """Inverse of a PD block matrix, block by block.

    Top-left is ``a11^{-1} + a11^{-1} a12 S^{-1} a12^T a11^{-1}``, the
    off-diagonal is ``-a11^{-1} a12 S^{-1}`` and the bottom-right is
    ``S^{-1}`` with ``S`` the Schur complement.
    """
    a11 = SpdMatrix(x.a11)
    schur = schur_complement(x)
    vals, _ = _eigh_desc(schur.mat)
    if vals[-1] <= PD_RTOL * max(abs(vals[0]), abs(vals[-1]), 1e-300):
        raise ValidationError(
            f"Schur complement is singular (smallest eigenvalue {vals[-1]:.6e})"
        )
    s_inv = SpdMatrix(schur).inv()
    a11_inv = a11.inv()
    t = a11_inv @ x.a12
    top_left = SymMatrix(a11_inv + t @ s_inv @ t.T)
    return BlockMatrix2x2(top_left, SymMatrix(s_inv), -t @ s_inv)


def is_positive_definite(x, tol: float | None = None) -> bool:
    """True iff the smallest eigenvalue exceeds ``tol``.

    ``x`` may be a SymMatrix, a BlockMatrix2x2 (tested on its assembled
    form, which agrees with the Schur criterion) or a raw symmetric array.
    When ``tol`` is None a relative threshold of ``PD_RTOL`` times the
    largest absolute eigenvalue is used.
    """
    if isinstance(x, BlockMatrix2x2):
        arr = x.assembled()
    elif isinstance(x, SymMatrix):
        arr = x.mat
    elif isinstance(x, SpdMatrix):
        arr = x.mat
    else:
        arr = SymMatrix(x).mat
    vals, _ = _eigh_desc(arr)
    if tol is None:
        tol = PD_RTOL * max(abs(vals[0]), abs(vals[-1]))
    return bool(vals[-1] > tol)


def operator_norm(m) -> float:
    """Largest singular value of a dense matrix."""
    arr = np.asarray(m, dtype=float)
    if arr.size == 0:
        return 0.0
    return float(np.linalg.norm(arr, 2))


def pd_logdet(mat, name="matrix") -> float:
    """Log-determinant of a symmetric PD array via eigenvalue logarithms.

    Raises ValidationError when the argument is not positive-definite.
    """
    arr = SymMatrix(mat).mat
    vals, _ = _eigh_desc(arr)
    if vals[-1] <= PD_RTOL * max(abs(vals[0]), abs(vals[-1])):
        raise ValidationError(
            f"{name} is not positive-definite (min eigenvalue {vals[-1]:.6e})"
        )
    return float(np.sum(np.log(vals)))


def hs_inner(a, b) -> float:
    """Hilbert-Schmidt (Frobenius) inner product  tr(a b^T)."""
    return float(np.sum(np.asarray(a) * np.asarray(b)))


def hs_norm(a) -> float:
    """Hilbert-Schmidt (Frobenius) norm."""
    return float(np.linalg.norm(np.asarray(a)))
