"""Brute-force reference solvers for verification at small ``n``.

Nothing here shares code with the iterative solvers: Lyapunov equations are
solved through the Kronecker form ``(F^T kron I + I kron F^T) vec(X) = vec(Q)``
and ADI sweeps use plain dense solves.  ``vec`` stacks columns.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .errors import DenseThresholdExceeded, MaxIterations, NotStabilizing, SingularOperator, SingularShift

MAX_N = 48


def vec(X):
    return np.asarray(X).reshape(-1, order="F")


def unvec(x, n, m=None):
    return np.asarray(x).reshape((n, n if m is None else m), order="F")


def _dense(M):
    return M.toarray() if hasattr(M, "toarray") else np.asarray(M, dtype=np.float64)


@dataclass(frozen=True)
class KronOperator:
    n: int
    matrix: np.ndarray

    def __post_init__(self):
        if self.n > MAX_N:
            raise DenseThresholdExceeded(f"Kronecker oracle is limited to n <= {MAX_N}, got {self.n}")

    @classmethod
    def from_matrix(cls, F):
        F = _dense(F)
        n = F.shape[0]
        if n > MAX_N:
            raise DenseThresholdExceeded(f"Kronecker oracle is limited to n <= {MAX_N}, got {n}")
        I = np.eye(n)
        return cls(n, np.kron(F.T, I) + np.kron(I, F.T))

    def condition_number(self):
        return float(np.linalg.cond(self.matrix))

    def solve(self, q):
        with warnings.catch_warnings():
            # singularity is reported below as SingularOperator
            warnings.simplefilter("ignore", sla.LinAlgWarning)
            lu, piv = sla.lu_factor(self.matrix, check_finite=False)
        if np.abs(np.diag(lu)).min() <= 1e-14 * np.abs(self.matrix).sum(axis=0).max():
            raise SingularOperator("Kronecker operator is singular")
        return sla.lu_solve((lu, piv), q, check_finite=False)


def lyap_kron_solve(F, Q):
    """Solve ``F^T X + X F = Q`` exactly through the vectorized system."""
    op = KronOperator.from_matrix(F)
    Q = _dense(Q)
    X = unvec(op.solve(vec(Q)), op.n)
    scale = max(1.0, np.linalg.norm(X))
    if np.linalg.norm(X - X.T) > 1e-10 * scale:
        raise ValueError("solution is not symmetric; Q must be symmetric")
    return (X + X.T) / 2


def _check_n(n):
    if n > MAX_N:
        raise DenseThresholdExceeded(f"dense oracle is limited to n <= {MAX_N}, got {n}")


def _solve(M, R):
    try:
        return np.linalg.solve(M, R)
    except np.linalg.LinAlgError as exc:
        raise SingularShift(str(exc)) from exc


def adi2_dense(F, Q, alpha, beta, k, history=False):
    """``k`` sweeps of two-shift ADI from ``X_0 = 0``::

        (F^T + alpha I) X_half = Q - X_k (F - alpha I)
        X_{k+1} (F + beta I)  = Q - (F^T - beta I) X_half
    """
    F = _dense(F)
    Q = _dense(Q)
    n = F.shape[0]
    _check_n(n)
    I = np.eye(n)
    X = np.zeros((n, n))
    out = []
    for _ in range(k):
        X_half = _solve(F.T + alpha * I, Q - X @ (F - alpha * I))
        rhs = Q - (F.T - beta * I) @ X_half
        X = _solve((F + beta * I).T, rhs.T).T
        out.append(X)
    return out if history else X


def adi1_dense(F, Q, alpha, k, history=False):
    """``k`` sweeps of single-shift ADI (two-shift with ``beta = alpha``)."""
    return adi2_dense(F, Q, alpha, alpha, k, history)


def _care_residual(A, B, C, X):
    Q = C.T @ C
    R = A.T @ X + X @ A + Q - X @ B @ B.T @ X
    return np.linalg.norm(R, 2) / np.linalg.norm(Q, 2)


def care_newton_exact(problem, K0=None, tol=1e-12, max_iter=30, history=False):
    """Newton's method for the CARE with every Lyapunov step solved exactly.

    Each step solves ``A_k^T X + X A_k = K K^T + C^T C`` with
    ``A_k = B K^T - A`` and ``K = X_prev B``.  Returns the final ``X`` (or the
    list ``[X_1, X_2, ...]`` with ``history=True``).
    """
    A = _dense(problem.A)
    B = np.asarray(problem.B)
    C = np.asarray(problem.C)
    n = A.shape[0]
    _check_n(n)
    K = np.zeros((n, B.shape[1])) if K0 is None else np.asarray(K0, dtype=np.float64)
    if not np.all(np.linalg.eigvals(B @ K.T - A).real > 0):
        raise NotStabilizing("B K0^T - A is not positive-real")
    iterates = []
    for _ in range(max_iter):
        Ak = B @ K.T - A
        X = lyap_kron_solve(Ak, K @ K.T + C.T @ C)
        iterates.append(X)
        K = X @ B
        if _care_residual(A, B, C, X) <= tol:
            return iterates if history else X
    raise MaxIterations(f"exact Newton did not reach {tol} in {max_iter} steps")
