"""Dense linear algebra shared by every solver.

Matrices are plain float64 ndarrays; the helpers here add the validation
the rest of the package relies on (finite entries, shape checks) and the
SVD-based pseudoinverse with an explicit rank cutoff.
"""

import numpy as np
import scipy.linalg

from .errors import InvalidInputError


def as_matrix(a, name: str = "matrix") -> np.ndarray:
    """Coerce to a 2-D float64 array, rejecting NaN/Inf entries."""
    arr = np.asarray(a, dtype=float)
    if arr.ndim != 2:
        raise InvalidInputError(f"{name} must be 2-dimensional, got ndim={arr.ndim}")
    if not np.all(np.isfinite(arr)):
        raise InvalidInputError(f"{name} contains non-finite entries")
    return arr


def as_vector(a, name: str = "vector") -> np.ndarray:
    """Coerce to a 1-D float64 array, rejecting NaN/Inf entries."""
    arr = np.asarray(a, dtype=float)
    if arr.ndim != 1:
        raise InvalidInputError(f"{name} must be 1-dimensional, got ndim={arr.ndim}")
    if not np.all(np.isfinite(arr)):
        raise InvalidInputError(f"{name} contains non-finite entries")
    return arr


def pinv(m, rtol: float = 1e-12) -> np.ndarray:
    """Moore-Penrose pseudoinverse via full SVD.

    Singular values at or below ``rtol * sigma_max`` are treated as zero,
    which makes the rank decision explicit for rank-deficient input.
    """
    a = as_matrix(m)
    if rtol < 0:
        raise InvalidInputError("rtol must be >= 0")
    if a.size == 0:
        return np.zeros((a.shape[1], a.shape[0]))
    u, s, vt = np.linalg.svd(a, full_matrices=False)
    cutoff = rtol * s[0]
    inv = np.zeros_like(s)
    keep = s > cutoff
    inv[keep] = 1.0 / s[keep]
    return (vt.T * inv) @ u.T


def solve_spd(a, b, ridge: float = 0.0) -> np.ndarray:
    """Solve (a + ridge*I) x = b for symmetric a, via Cholesky when possible.

    Falls back to the pseudoinverse when the factorization fails, so
    semidefinite systems still return the least-squares solution.
    """
    a = as_matrix(a, "a")
    b = as_vector(b, "b")
    n = a.shape[0]
    if a.shape[0] != a.shape[1]:
        raise InvalidInputError(f"a must be square, got shape {a.shape}")
    if b.shape[0] != n:
        raise InvalidInputError(f"b has length {b.shape[0]}, expected {n}")
    if ridge < 0:
        raise InvalidInputError("ridge must be >= 0")
    scale = np.abs(a).max() if a.size else 0.0
    if np.abs(a - a.T).max(initial=0.0) > 1e-8 * (1.0 + scale):
        raise InvalidInputError("a must be symmetric")
    m = a + ridge * np.eye(n)
    try:
        c, low = scipy.linalg.cho_factor(m, check_finite=False)
        return scipy.linalg.cho_solve((c, low), b, check_finite=False)
    except scipy.linalg.LinAlgError:
        return pinv(m) @ b


def is_psd(a, tol: float = 1e-8) -> bool:
    """True iff the smallest eigenvalue of symmetric ``a`` is >= -tol."""
    a = as_matrix(a, "a")
    if a.shape[0] != a.shape[1]:
        raise InvalidInputError(f"a must be square, got shape {a.shape}")
    if a.size == 0:
        return True
    scale = np.abs(a).max()
    if np.abs(a - a.T).max() > tol * (1.0 + scale):
        raise InvalidInputError("a must be symmetric within tol")
    eigs = np.linalg.eigvalsh(0.5 * (a + a.T))
    return bool(eigs[0] >= -tol)
