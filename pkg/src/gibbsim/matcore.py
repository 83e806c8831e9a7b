"""Dense complex linear-algebra primitives shared by the whole package.

Everything downstream (channel construction, weak-coupling analysis, chain
bounds) runs through the handful of operations here: tensor products, the
bath partial trace, Hermitian and general eigendecompositions, Hermitian
matrix exponentials, and the trace / operator-2 norms.

Conventions frozen repo-wide:

* An operator ``chi`` on an N-dimensional space vectorizes row-major,
  index ``(m, n) -> m*N + n`` (this is exactly ``chi.ravel()`` in C order).
* Hermiticity is checked against an absolute tolerance of 1e-12, trace
  normalization against 1e-10, and positivity against -1e-10.  Inputs that
  violate these are rejected, never silently repaired.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

HERMITICITY_TOL = 1e-12
TRACE_TOL = 1e-10
PSD_TOL = 1e-10

#: Eigenvector-matrix condition number beyond which a general (possibly
#: non-normal) matrix is flagged as numerically defective.
DEFECTIVE_COND = 1e8


class DimensionError(ValueError):
    """Shapes or factorizations do not line up."""


class ConvergenceError(RuntimeError):
    """Eigensolver failed or left a residual above tolerance."""

    def __init__(self, message: str, residual: float = float("nan")):
        super().__init__(message)
        self.residual = residual


class DefectiveMatrixWarning(UserWarning):
    """Eigenvector matrix is so ill-conditioned the matrix is near-defective."""


def as_complex_matrix(a) -> np.ndarray:
    """Coerce to a 2-D complex ndarray, rejecting NaN/Inf entries."""
    m = np.asarray(a, dtype=complex)
    if m.ndim != 2:
        raise DimensionError(f"expected a 2-D matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m.view(float))):
        raise ValueError("matrix contains non-finite entries")
    return m


def _square(m: np.ndarray) -> np.ndarray:
    if m.shape[0] != m.shape[1]:
        raise DimensionError(f"expected a square matrix, got shape {m.shape}")
    return m


def mat(x) -> np.ndarray:
    """Unwrap HermitianOperator / DensityMatrix / ndarray to a plain array."""
    if isinstance(x, (HermitianOperator, DensityMatrix)):
        return x.matrix
    return as_complex_matrix(x)


class HermitianOperator:
    """A validated Hermitian matrix.

    Raises if ``|A - A^dagger|`` exceeds 1e-12 anywhere; the stored array is
    read-only so instances are safe to share.
    """

    __slots__ = ("matrix",)

    def __init__(self, matrix):
        m = _square(as_complex_matrix(matrix))
        dev = np.max(np.abs(m - m.conj().T))
        if dev > HERMITICITY_TOL:
            raise ValueError(f"matrix is not Hermitian (max deviation {dev:.3e})")
        m = m.copy()
        m.flags.writeable = False
        object.__setattr__(self, "matrix", m)

    def __setattr__(self, name, value):
        raise AttributeError("HermitianOperator is immutable")

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def __repr__(self):
        return f"HermitianOperator(dim={self.dim})"


class DensityMatrix:
    """Hermitian, unit-trace, positive-semidefinite matrix.

    Validation tolerances: Hermiticity 1e-12, trace 1e-10, smallest
    eigenvalue >= -1e-10.
    """

    __slots__ = ("matrix",)

    def __init__(self, matrix):
        m = _square(as_complex_matrix(matrix))
        dev = np.max(np.abs(m - m.conj().T))
        if dev > HERMITICITY_TOL:
            raise ValueError(f"density matrix is not Hermitian (max deviation {dev:.3e})")
        tr = m.trace()
        if abs(tr - 1.0) > TRACE_TOL:
            raise ValueError(f"density matrix trace is {tr}, expected 1")
        lo = float(np.linalg.eigvalsh((m + m.conj().T) / 2.0)[0])
        if lo < -PSD_TOL:
            raise ValueError(f"density matrix has negative eigenvalue {lo:.3e}")
        m = m.copy()
        m.flags.writeable = False
        object.__setattr__(self, "matrix", m)

    def __setattr__(self, name, value):
        raise AttributeError("DensityMatrix is immutable")

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def populations(self) -> np.ndarray:
        """Real diagonal of the matrix."""
        return np.real(np.diag(self.matrix)).copy()

    def __repr__(self):
        return f"DensityMatrix(dim={self.dim})"


def pure_state(vector) -> DensityMatrix:
    """|v><v| for a (normalized after the fact) state vector."""
    v = np.asarray(vector, dtype=complex).ravel()
    v = v / np.linalg.norm(v)
    return DensityMatrix(np.outer(v, v.conj()))


def computational_zero(dim: int) -> DensityMatrix:
    """|0...0><0...0| on a dim-dimensional space."""
    m = np.zeros((dim, dim), dtype=complex)
    m[0, 0] = 1.0
    return DensityMatrix(m)


def maximally_mixed(dim: int) -> DensityMatrix:
    return DensityMatrix(np.eye(dim, dtype=complex) / dim)


@dataclass(frozen=True)
class SpectralDecomposition:
    """Eigenvalues plus eigenvector columns of a square matrix.

    ``residual`` is max_i ||A v_i - lambda_i v_i||_2.  For general matrices,
    ``cond`` is the condition number of the eigenvector matrix and
    ``defective`` flags cond > 1e8 (diagonalization is then unreliable).
    """

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    residual: float
    cond: float = float("nan")
    defective: bool = False

    @property
    def dim(self) -> int:
        return len(self.eigenvalues)


def _residual(a: np.ndarray, vals: np.ndarray, vecs: np.ndarray) -> float:
    return float(np.max(np.linalg.norm(a @ vecs - vecs * vals[None, :], axis=0)))


def eigh(h, tol: float = 1e-10) -> SpectralDecomposition:
    """Eigendecomposition of a Hermitian operator.

    Eigenvalues come back real and ascending, eigenvectors orthonormal.
    Raises ConvergenceError when the reconstruction residual exceeds ``tol``.
    """
    m = mat(h) if isinstance(h, HermitianOperator) else HermitianOperator(h).matrix
    try:
        vals, vecs = np.linalg.eigh(m)
    except np.linalg.LinAlgError as exc:
        raise ConvergenceError(f"eigh failed to converge: {exc}") from exc
    res = _residual(m, vals.astype(complex), vecs)
    if res > tol:
        raise ConvergenceError(f"eigh residual {res:.3e} exceeds {tol:.3e}", residual=res)
    return SpectralDecomposition(eigenvalues=vals, eigenvectors=vecs, residual=res, cond=1.0)


def eig_general(m, warn_defective: bool = True) -> SpectralDecomposition:
    """Full complex spectrum of a general square matrix.

    Eigenvectors are normalized to unit 2-norm.  Diagonalizability is judged
    by the eigenvector-matrix condition number; above 1e8 the result is
    flagged defective (and a DefectiveMatrixWarning is emitted).
    """
    a = _square(as_complex_matrix(m))
    try:
        vals, vecs = np.linalg.eig(a)
    except np.linalg.LinAlgError as exc:
        raise ConvergenceError(f"eig failed to converge: {exc}") from exc
    norms = np.linalg.norm(vecs, axis=0)
    norms[norms == 0] = 1.0
    vecs = vecs / norms[None, :]
    try:
        cond = float(np.linalg.cond(vecs))
    except np.linalg.LinAlgError:
        cond = float("inf")
    defective = not np.isfinite(cond) or cond > DEFECTIVE_COND
    if defective and warn_defective:
        warnings.warn(
            f"eigenvector matrix condition number {cond:.3e} exceeds {DEFECTIVE_COND:.0e}; "
            "matrix is numerically defective",
            DefectiveMatrixWarning,
            stacklevel=2,
        )
    res = _residual(a, vals, vecs)
    return SpectralDecomposition(
        eigenvalues=vals, eigenvectors=vecs, residual=res, cond=cond, defective=defective
    )


def kron(a, b) -> np.ndarray:
    """Kronecker product (dims multiply)."""
    return np.kron(mat(a), mat(b))


def trace_out_bath(matrix, dim_s: int, dim_b: int) -> np.ndarray:
    """Partial trace over the bath factor of a (dim_s*dim_b)-dim operator.

    Linear and trace-preserving on arbitrary square inputs; the typed
    wrapper ``partial_trace_bath`` adds the density-matrix validation.
    """
    m = _square(as_complex_matrix(matrix))
    if m.shape[0] != dim_s * dim_b:
        raise DimensionError(
            f"cannot factor dim {m.shape[0]} as dim_s*dim_b = {dim_s}*{dim_b}"
        )
    t = m.reshape(dim_s, dim_b, dim_s, dim_b)
    return np.einsum("abcb->ac", t)


def partial_trace_bath(rho: DensityMatrix, dim_s: int, dim_b: int) -> DensityMatrix:
    """Trace out the bath of a system-bath density matrix."""
    out = trace_out_bath(rho.matrix, dim_s, dim_b)
    return DensityMatrix((out + out.conj().T) / 2.0)


def matrix_exp_herm(h, scale: complex = 1.0) -> np.ndarray:
    """exp(scale * H) for Hermitian H via eigendecomposition.

    For purely imaginary ``scale`` the result is unitary.
    """
    dec = eigh(h)
    w = np.exp(scale * dec.eigenvalues.astype(complex))
    return (dec.eigenvectors * w[None, :]) @ dec.eigenvectors.conj().T


def trace_norm(a) -> float:
    """Sum of singular values (for Hermitian input: sum of |eigenvalues|)."""
    m = _square(mat(a))
    return float(np.sum(np.linalg.svd(m, compute_uv=False)))


def op2norm(a) -> float:
    """Largest singular value, i.e. the Euclidean operator norm."""
    m = mat(a)
    if m.size == 0:
        return 0.0
    return float(np.linalg.svd(m, compute_uv=False)[0])


def vec_index(m: int, n: int, dim: int) -> int:
    """Row-major vectorization index of matrix entry (m, n)."""
    return m * dim + n


PAULI_X = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)
PAULI_Y = np.array([[0.0, -1.0j], [1.0j, 0.0]], dtype=complex)
PAULI_Z = np.array([[1.0, 0.0], [0.0, -1.0]], dtype=complex)
