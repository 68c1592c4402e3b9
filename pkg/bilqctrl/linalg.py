"""
Dense Complex Linear Algebra
----------------------------
Vector/matrix helpers and the skew-Hermitian matrix exponential that every
propagation in the package goes through.

Matrices and vectors are plain numpy complex128 arrays. The exponential of a
skew-Hermitian M is computed from the eigendecomposition of the Hermitian
matrix iM, which is exact up to rounding because M is normal; scipy's
scaling-and-squaring expm is kept as a cross-check path.
"""
import numpy as np
import numpy.typing as npt
import scipy.linalg

from .exceptions import ValidationError

ComplexMatrix = npt.NDArray[np.complex128]
ComplexVector = npt.NDArray[np.complex128]

# Tolerances are relative to max(1, max|entry|)
SKEW_TOL = 1e-12
UNITARY_TOL = 1e-10

EXPM_METHODS = ("eigh", "pade")


def as_matrix(entries, name: str = "matrix") -> ComplexMatrix:
    """
    Convert entries to a validated square complex matrix.

    Args:
        entries: Anything numpy can turn into a 2-D array
        name: Label used in error messages

    Returns:
        ComplexMatrix: A complex128 copy of the entries
    """
    m = np.array(entries, dtype=np.complex128)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValidationError(f"{name} must be square, got shape {m.shape}")
    if m.shape[0] == 0:
        raise ValidationError(f"{name} must have dim >= 1")
    if not np.all(np.isfinite(m)):
        raise ValidationError(f"{name} has non-finite entries")
    return m


def as_vector(entries, name: str = "vector") -> ComplexVector:
    """Convert entries to a validated 1-D complex vector."""
    v = np.array(entries, dtype=np.complex128)
    if v.ndim != 1 or v.shape[0] == 0:
        raise ValidationError(f"{name} must be a non-empty 1-D array, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise ValidationError(f"{name} has non-finite entries")
    return v


def _scale(m: np.ndarray) -> float:
    return max(1.0, float(np.max(np.abs(m)))) if m.size else 1.0


def skew_hermitian_defect(m: ComplexMatrix) -> float:
    """Largest entry of M + M^dagger, relative to max(1, max|M|)."""
    return float(np.max(np.abs(m + m.conj().T))) / _scale(m)


def is_skew_hermitian(m: ComplexMatrix, tol: float = SKEW_TOL) -> bool:
    """True if M^dagger = -M within tol (relative)."""
    return skew_hermitian_defect(m) <= tol


def unitarity_defect(u: ComplexMatrix) -> float:
    """Largest entry of U^dagger U - I."""
    return float(np.max(np.abs(u.conj().T @ u - np.eye(u.shape[0]))))


def is_unitary(u: ComplexMatrix, tol: float = UNITARY_TOL) -> bool:
    """True if U^dagger U = I within tol."""
    return unitarity_defect(u) <= tol


def adjoint(m: ComplexMatrix) -> ComplexMatrix:
    """Conjugate transpose."""
    return as_matrix(m).conj().T


def matvec(m: ComplexMatrix, v: ComplexVector) -> ComplexVector:
    """Matrix-vector product with dimension checking."""
    m = np.asarray(m, dtype=np.complex128)
    v = np.asarray(v, dtype=np.complex128)
    if m.ndim != 2 or v.ndim != 1 or m.shape[1] != v.shape[0]:
        raise ValidationError(f"dimension mismatch: matrix {m.shape} vs vector {v.shape}")
    return m @ v


def inner(u: ComplexVector, v: ComplexVector) -> complex:
    """Hilbert product <u, v>, conjugate-linear in u."""
    u = np.asarray(u, dtype=np.complex128)
    v = np.asarray(v, dtype=np.complex128)
    if u.shape != v.shape:
        raise ValidationError(f"dimension mismatch: {u.shape} vs {v.shape}")
    return complex(np.vdot(u, v))


def norm(v: ComplexVector) -> float:
    """Euclidean norm."""
    return float(np.linalg.norm(np.asarray(v, dtype=np.complex128)))


def basis_vector(dim: int, k: int) -> ComplexVector:
    """Unit vector e_k (1-based index, as levels are numbered)."""
    if not 1 <= k <= dim:
        raise ValidationError(f"level {k} outside 1..{dim}")
    e = np.zeros(dim, dtype=np.complex128)
    e[k - 1] = 1.0
    return e


def _is_diagonal(m: np.ndarray) -> bool:
    return not np.any(m - np.diag(np.diagonal(m)))


def _check_skew(m: ComplexMatrix, tol: float = SKEW_TOL) -> None:
    defect = skew_hermitian_defect(m)
    if defect > tol:
        raise ValidationError(
            f"matrix is not skew-Hermitian: |M + M^dagger| = {defect:.3e} > tol {tol:.0e}"
        )


class SkewHermitianGenerator:
    """
    Spectral factorisation of a skew-Hermitian generator M.

    M = -i V diag(w) V^dagger with w real, so exp(tM) = V diag(e^{-i w t}) V^dagger
    for every t. One factorisation serves all step lengths.
    """

    def __init__(self, m: ComplexMatrix):
        m = as_matrix(m, "generator")
        _check_skew(m)
        self.dim = m.shape[0]
        self.diagonal = _is_diagonal(m)
        if self.diagonal:
            # exact: exp of a diagonal matrix is entrywise
            self._diag = np.diagonal(m).copy()
            self.eigenvalues = None
            self.eigenvectors = None
        else:
            hermitian = 1j * m
            hermitian = 0.5 * (hermitian + hermitian.conj().T)
            w, v = scipy.linalg.eigh(hermitian)
            self.eigenvalues = w
            self.eigenvectors = v

    def expm(self, t: float) -> ComplexMatrix:
        """exp(t M) as a dense unitary matrix."""
        if self.diagonal:
            return np.diag(np.exp(t * self._diag))
        phases = np.exp(-1j * self.eigenvalues * t)
        return (self.eigenvectors * phases) @ self.eigenvectors.conj().T

    def apply(self, t: float, psi: ComplexVector) -> ComplexVector:
        """exp(t M) psi without forming the matrix."""
        if self.diagonal:
            return np.exp(t * self._diag) * psi
        phases = np.exp(-1j * self.eigenvalues * t)
        return self.eigenvectors @ (phases * (self.eigenvectors.conj().T @ psi))


def expm_skew(m: ComplexMatrix, t: float, method: str = "eigh") -> ComplexMatrix:
    """
    Matrix exponential exp(t M) of a skew-Hermitian matrix.

    Args:
        m: Skew-Hermitian matrix (validated within SKEW_TOL)
        t: Real time
        method: 'eigh' (spectral, default) or 'pade' (scipy scaling-and-squaring)

    Returns:
        ComplexMatrix: Unitary matrix U = exp(tM)
    """
    if method not in EXPM_METHODS:
        raise ValidationError(f"unknown expm method '{method}', expected one of {EXPM_METHODS}")
    if not np.isfinite(t):
        raise ValidationError(f"time must be finite, got {t}")
    m = as_matrix(m, "generator")
    if method == "pade":
        _check_skew(m)
        return scipy.linalg.expm(t * m)
    return SkewHermitianGenerator(m).expm(t)


def expm_cross_check(m: ComplexMatrix, t: float) -> float:
    """Max entry difference between the spectral and Pade exponentials."""
    return float(np.max(np.abs(expm_skew(m, t, "eigh") - expm_skew(m, t, "pade"))))

