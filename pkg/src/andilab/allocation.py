"""Linear control allocation ``A x = b`` with the minimum-norm solution."""

from __future__ import annotations

import numpy as np

RANK_TOL = 1e-10


class RankError(np.linalg.LinAlgError):
    def __init__(self, rank: int, rows: int):
        super().__init__(f"effectiveness matrix has numerical rank {rank} < {rows} rows")
        self.rank = rank
        self.rows = rows


class NoSolutionError(np.linalg.LinAlgError):
    def __init__(self, residual: float, solution: np.ndarray):
        super().__init__(f"allocation problem is inconsistent; least-squares residual {residual:.3g}")
        self.residual = residual
        self.solution = solution


def _matrix(A) -> np.ndarray:
    A = np.asarray(A, dtype=float)
    if A.ndim == 0:
        return A.reshape(1, 1)
    if A.ndim == 1:
        return A.reshape(1, -1)
    return A


def numerical_rank(A) -> int:
    s = np.linalg.svd(_matrix(A), compute_uv=False)
    if s.size == 0 or s[0] == 0.0:
        return 0
    return int(np.sum(s > RANK_TOL * s[0]))


def right_inverse(A) -> np.ndarray:
    """Moore-Penrose right inverse of a full-row-rank ``A``."""
    A = _matrix(A)
    m = A.shape[0]
    U, s, Vt = np.linalg.svd(A, full_matrices=False)
    rank = int(np.sum(s > RANK_TOL * s[0])) if s.size and s[0] > 0 else 0
    if rank < m:
        raise RankError(rank, m)
    return (Vt.T / s) @ U.T


def allocate(A, b) -> np.ndarray:
    """Minimum-norm ``x`` with ``A x = b``.

    Rank-deficient but consistent systems are still solved; inconsistent ones
    raise :class:`NoSolutionError` carrying the least-squares residual.
    """
    A = _matrix(A)
    b = np.atleast_1d(np.asarray(b, dtype=float))
    if b.shape != (A.shape[0],):
        raise ValueError(f"right-hand side: expected {A.shape[0]} entries, got shape {b.shape}")
    if numerical_rank(A) == A.shape[0]:
        return right_inverse(A) @ b
    x = np.linalg.pinv(A, rcond=RANK_TOL) @ b
    residual = float(np.linalg.norm(A @ x - b))
    if residual > RANK_TOL * max(1.0, float(np.linalg.norm(b))):
        raise NoSolutionError(residual, x)
    return x


def superposition_split(A, u, rhs_without_u) -> np.ndarray:
    """Incremental allocation ``u_c = u + C_a(A, rhs)``.

    ``A u_c = A u + rhs`` splits into ``A u_c1 = A u`` (solved by ``u``) and
    ``A u_c2 = rhs``.
    """
    return np.atleast_1d(np.asarray(u, dtype=float)) + allocate(A, rhs_without_u)
