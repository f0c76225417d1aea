"""Linear algebra helpers shared by the covariance and metric modules."""

import numpy as np
from scipy import linalg

from allianceauth.services.hooks import get_extension_logger
from app_utils.logging import LoggerAddTag

from isaclimits import __title__
from isaclimits.app_settings import ISAC_EIGEN_CUTOFF
from isaclimits.exceptions import NumericalError

logger = LoggerAddTag(get_extension_logger(__name__), __title__)


def hermitian(matrix: np.ndarray) -> np.ndarray:
    """Return the Hermitian part of a square matrix."""
    matrix = np.asarray(matrix)
    return (matrix + matrix.conj().T) / 2


def cholesky_lower(matrix: np.ndarray, what: str = "matrix") -> np.ndarray:
    """Return the lower Cholesky factor of a Hermitian PD matrix.

    Raises:
        NumericalError: If the matrix is not numerically positive definite
    """
    matrix = hermitian(matrix)
    try:
        return linalg.cholesky(matrix, lower=True)
    except linalg.LinAlgError:
        condition = float(np.linalg.cond(matrix))
        logger.warning("Cholesky factorization of %s failed", what)
        raise NumericalError(
            f"Cholesky factorization of {what} failed", condition=condition
        ) from None


def is_positive_definite(matrix: np.ndarray) -> bool:
    """Return True when a Cholesky factorization succeeds."""
    try:
        linalg.cholesky(hermitian(matrix), lower=True)
    except linalg.LinAlgError:
        return False
    return True


def logdet2_pd(matrix: np.ndarray, what: str = "matrix") -> float:
    """Base-2 log-determinant of a Hermitian PD matrix via Cholesky."""
    if np.asarray(matrix).size == 0:
        return 0.0
    factor = cholesky_lower(matrix, what)
    return float(2.0 * np.sum(np.log2(np.diag(factor).real)))


def psd_sqrt(matrix: np.ndarray, cutoff: float = None) -> np.ndarray:
    """Return a square root ``S`` with ``S @ S^H`` equal to a Hermitian PSD matrix.

    Eigenvalues below ``cutoff`` times the largest one are treated as zero
    and their columns dropped, so ``S`` may have fewer columns than rows.
    """
    cutoff = ISAC_EIGEN_CUTOFF if cutoff is None else cutoff
    matrix = hermitian(matrix)
    dim = matrix.shape[0]
    if dim == 0:
        return np.zeros((0, 0), dtype=complex)
    eigvals, eigvecs = linalg.eigh(matrix)
    largest = float(np.max(np.abs(eigvals)))
    if largest == 0.0:
        return np.zeros((dim, 0), dtype=complex)
    keep = eigvals > cutoff * largest
    return eigvecs[:, keep] * np.sqrt(eigvals[keep])


def logdet2_identity_plus(root: np.ndarray, inner: np.ndarray, scale: float) -> float:
    """Return ``log2 det(I + scale * root^H @ inner @ root)``.

    This is the reduced form of ``log2 det(I + scale * A @ root @ root^H @ A^H)``
    for any ``A`` with ``A^H @ A = inner``.
    """
    if root.shape[1] == 0:
        return 0.0
    core = root.conj().T @ inner @ root
    matrix = np.eye(core.shape[0]) + scale * hermitian(core)
    return logdet2_pd(matrix, "identity-plus-Gram matrix")
