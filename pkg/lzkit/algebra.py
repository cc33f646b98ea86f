"""Exact 2x2 operator and 4x4 superoperator arithmetic.

Operators are ``numpy`` arrays of shape (2, 2); superoperators are arrays of
shape (4, 4) acting on the row-major vectorization ``(rho00, rho01, rho10, rho11)``.
With this convention ``vec(A @ X @ B) == kron(A, B.T) @ vec(X)``.
"""
from typing import Tuple

import numpy as np

# Basis order of vectorize(); every superoperator builder relies on it.
VEC_ORDER: Tuple[Tuple[int, int], ...] = ((0, 0), (0, 1), (1, 0), (1, 1))

DEFAULT_TOL: float = 1e-10

IDENTITY2 = np.eye(2, dtype=complex)

# vec(X.T) = SWAP @ vec(X)
_SWAP = np.eye(4, dtype=complex)[[0, 2, 1, 3]]


def as_operator(M) -> np.ndarray:
    """Return a complex (2, 2) copy of ``M``."""
    out = np.array(M, dtype=complex)
    if out.shape != (2, 2):
        raise ValueError(f"expected a 2x2 matrix, got shape {out.shape}")
    return out


def dagger(M: np.ndarray) -> np.ndarray:
    """Hermitian conjugate."""
    return np.conj(M).T


def vectorize(rho: np.ndarray) -> np.ndarray:
    """Flatten a 2x2 operator to its 4-component vector in :data:`VEC_ORDER`."""
    return np.array(rho, dtype=complex).reshape(4)


def devectorize(vec: np.ndarray) -> np.ndarray:
    """Inverse of :func:`vectorize`."""
    return np.array(vec, dtype=complex).reshape(2, 2)


def apply(S: np.ndarray, rho: np.ndarray) -> np.ndarray:
    """Apply superoperator ``S`` to operator ``rho``."""
    return (S @ vectorize(rho)).reshape(2, 2)


def identity_superop() -> np.ndarray:
    return np.eye(4, dtype=complex)


def sandwich_superop(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Superoperator of ``X -> A X B``."""
    return np.kron(A, np.transpose(B))


def left_multiplication(A: np.ndarray) -> np.ndarray:
    """Superoperator of ``X -> A X``."""
    return np.kron(A, IDENTITY2)


def right_multiplication(B: np.ndarray) -> np.ndarray:
    """Superoperator of ``X -> X B``."""
    return np.kron(IDENTITY2, np.transpose(B))


def commutator_superop(H: np.ndarray) -> np.ndarray:
    """Superoperator of ``X -> [H, X]``."""
    return left_multiplication(H) - right_multiplication(H)


def compose(*superops: np.ndarray) -> np.ndarray:
    """Composition ``S1 S2 ... Sn`` (the rightmost acts first)."""
    out = identity_superop()
    for S in superops:
        out = out @ S
    return out


def dual_superop(S: np.ndarray) -> np.ndarray:
    """Dual map with respect to the pairing ``tr(A rho)``.

    Returns ``S*`` such that ``tr(S*(A) rho) == tr(A S(rho))`` for all ``A, rho``.
    """
    return _SWAP @ np.transpose(S) @ _SWAP


def singular_values(M: np.ndarray) -> Tuple[float, float]:
    """Both singular values of a 2x2 matrix, largest first.

    Closed form from the eigenvalues of ``M* M``: with ``t = ||M||_F^2`` and
    ``d = |det M|`` one has ``s1 + s2 = sqrt(t + 2d)`` and ``s1 - s2 = sqrt(t - 2d)``.
    """
    t = float(np.sum(np.abs(M) ** 2))
    d = float(abs(M[0, 0] * M[1, 1] - M[0, 1] * M[1, 0]))
    total = np.sqrt(t + 2.0 * d)
    spread = np.sqrt(max(t - 2.0 * d, 0.0))
    return 0.5 * (total + spread), max(0.5 * (total - spread), 0.0)


def trace_norm(M: np.ndarray) -> float:
    """Sum of singular values."""
    t = float(np.sum(np.abs(M) ** 2))
    d = float(abs(M[0, 0] * M[1, 1] - M[0, 1] * M[1, 0]))
    return float(np.sqrt(t + 2.0 * d))


def operator_norm(M: np.ndarray) -> float:
    """Largest singular value."""
    return singular_values(M)[0]


def hs_inner(A: np.ndarray, B: np.ndarray) -> complex:
    """Hilbert-Schmidt inner product ``tr(A* B)``."""
    return complex(np.vdot(A, B))


def is_hermitian(M: np.ndarray, tol: float = DEFAULT_TOL) -> bool:
    return bool(np.max(np.abs(M - dagger(M))) <= tol)


def is_density(M: np.ndarray, tol: float = DEFAULT_TOL) -> bool:
    """Hermitian, unit trace and both eigenvalues >= -tol."""
    if not is_hermitian(M, tol):
        return False
    if abs(np.trace(M) - 1.0) > tol:
        return False
    eigs = np.linalg.eigvalsh(0.5 * (M + dagger(M)))
    return bool(eigs[0] >= -tol)


def is_hermiticity_preserving(S: np.ndarray, tol: float = DEFAULT_TOL) -> bool:
    """Check ``S(X*) == S(X)*`` on the four matrix units."""
    for i, j in VEC_ORDER:
        unit = np.zeros((2, 2), dtype=complex)
        unit[i, j] = 1.0
        if np.max(np.abs(apply(S, dagger(unit)) - dagger(apply(S, unit)))) > tol:
            return False
    return True


def is_trace_annihilating(S: np.ndarray, tol: float = DEFAULT_TOL) -> bool:
    """Check ``tr(S(X)) == 0`` for every X, i.e. the dual map kills the identity."""
    return bool(np.max(np.abs(apply(dual_superop(S), IDENTITY2))) <= tol)


def choi_matrix(S: np.ndarray) -> np.ndarray:
    """Choi matrix ``sum_ij |i><j| (x) S(|i><j|)``."""
    choi = np.zeros((4, 4), dtype=complex)
    for i, j in VEC_ORDER:
        choi[2 * i:2 * i + 2, 2 * j:2 * j + 2] = devectorize(S[:, 2 * i + j])
    return choi
