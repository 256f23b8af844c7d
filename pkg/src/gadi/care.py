"""Kleinman-Newton iteration for ``A^T X + X A + Q - X G X = 0`` with low-rank GADI inner solves.

Each outer step solves the Lyapunov equation ``A_k^T X + X A_k = M_k M_k^T``
with ``A_k = B K_k^T - A`` and ``M_k = [K_k, C^T]``, then updates the feedback
``K_{k+1} = X_{k+1} B``.  ``A_k`` is kept as sparse-plus-rank-``m`` so large
problems never form an ``n x n`` dense matrix.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import DimensionMismatch, MaxOuterIterations, NotStabilizing, ZeroFeedback
from .lyap import Criterion, LyapProblem, SolveOptions, gadi_dense_iterates, lyap_residual, rgadi
from .matcore import (
    DESK_THRESHOLD,
    EIG_THRESHOLD,
    LowRankFactors,
    SparsePlusLowRank,
    as_dense,
    as_sparse,
    lowrank_norm,
    materialize,
    max_singular_value,
    spectral_norm,
)


@dataclass(frozen=True)
class CareProblem:
    """Riccati data: ``A`` n x n (sparse), ``B`` n x m, ``C`` p x n; ``G = B B^T``, ``Q = C^T C``."""

    A: object
    B: np.ndarray
    C: np.ndarray

    def __post_init__(self):
        A = as_sparse(self.A)
        B = as_dense(self.B, "B")
        C = as_dense(self.C, "C")
        n = A.shape[0]
        if A.shape != (n, n):
            raise DimensionMismatch(f"A must be square, got {A.shape}")
        if B.shape[0] != n:
            raise DimensionMismatch(f"B has {B.shape[0]} rows, A is {n} x {n}")
        if C.shape[1] != n:
            raise DimensionMismatch(f"C has {C.shape[1]} columns, A is {n} x {n}")
        for a in (B, C):
            a.flags.writeable = False
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "C", C)

    @property
    def n(self):
        return self.A.shape[0]

    @property
    def m(self):
        return self.B.shape[1]

    @property
    def p(self):
        return self.C.shape[0]

    def G(self):
        return self.B @ self.B.T

    def Q(self):
        return self.C.T @ self.C

    def is_stable(self):
        """All eigenvalues of ``A`` in the open left half-plane (dense check)."""
        return bool(np.all(np.linalg.eigvals(self.A.toarray()).real < 0))


@dataclass(frozen=True)
class NewtonState:
    K: np.ndarray
    A_k: SparsePlusLowRank
    M_k: np.ndarray
    outer_index: int = 0

    def lyapunov(self):
        """The inner problem ``A_k^T X + X A_k = M_k M_k^T``."""
        return LyapProblem(self.A_k, self.M_k.T)


@dataclass
class CareSolution:
    factors: Optional[LowRankFactors]
    K: np.ndarray
    outer_iterations: int
    inner_iterations: list
    residual_history: list
    converged: bool
    criterion: Criterion
    alphas: list = field(default_factory=list)
    omega: Optional[float] = None
    width_history: list = field(default_factory=list)
    inner_residuals: list = field(default_factory=list)
    X: Optional[np.ndarray] = None

    def solution(self, max_n=DESK_THRESHOLD):
        if self.X is not None:
            return self.X
        return materialize(self.factors, max_n)


def kn_step_operator(problem, K, outer_index=0):
    """Closed-loop data ``A_k = B K^T - A`` and ``M_k = [K, C^T]`` for feedback ``K``."""
    K = as_dense(K, "K")
    if K.shape != (problem.n, problem.m):
        raise DimensionMismatch(f"K must be {problem.n} x {problem.m}, got {K.shape}")
    A_k = SparsePlusLowRank(-problem.A, problem.B, K)
    M_k = np.hstack([K, problem.C.T])
    return NewtonState(K, A_k, M_k, outer_index)


def is_stabilizing(problem, K):
    """Whether every eigenvalue of ``B K^T - A`` has positive real part."""
    A_k = kn_step_operator(problem, K).A_k.toarray()
    return bool(np.all(np.linalg.eigvals(A_k).real > 0))


def inner_rgadi(state, alpha_k=None, omega_k=None, opts=None, tol=None, callback=None):
    """Low-rank GADI on the Newton step's Lyapunov equation, starting from ``X = 0``.

    ``alpha_k`` defaults to the largest singular value of ``A_k``.  Stops once
    the inner relative residual (scaled by ``||M_k M_k^T||_2``) drops below
    ``tol`` or after ``opts.inner_max_iter`` sweeps.  Returns the
    :class:`~gadi.lyap.LyapSolution`, whose ``factors`` hold ``V, W``.
    """
    opts = opts or SolveOptions()
    alpha_k = max_singular_value(state.A_k, fallback=True) if alpha_k is None else float(alpha_k)
    omega_k = opts.omega if omega_k is None else float(omega_k)
    inner = opts.replace(
        alpha=alpha_k,
        omega=omega_k,
        tol=opts.tol if tol is None else tol,
        max_iter=opts.inner_max_iter,
        criterion=Criterion.RELATIVE_RESIDUAL,
    )
    return rgadi(state.lyapunov(), inner, callback=callback)


def care_q_norm(problem):
    return lowrank_norm(problem.C.T, problem.C.T)


def care_residual(problem, X, dense_threshold=DESK_THRESHOLD, qnorm=None):
    """Relative residual ``||A^T X + X A - X G X + Q||_2 / ||Q||_2``.

    For factors with ``n > dense_threshold`` the residual is written as
    ``[A^T V, V, C^T, -K] [W, A^T W, C^T, L]^T`` with ``K = X B`` and
    ``L = X^T B`` and its norm taken from a QR-reduced core.
    """
    n = problem.n
    At = problem.A.T
    B = problem.B
    den = care_q_norm(problem) if qnorm is None else qnorm
    if isinstance(X, LowRankFactors):
        if X.n != n:
            raise DimensionMismatch(f"factors have {X.n} rows, problem has n={n}")
        if n > dense_threshold:
            K = X.times(B)
            L = X.transpose_times(B)
            Ct = problem.C.T
            U = np.hstack([At @ X.V, X.V, Ct, -K])
            Z = np.hstack([X.W, At @ X.W, Ct, L])
            return lowrank_norm(U, Z) / den
        X = materialize(X, dense_threshold)
    X = np.asarray(X, dtype=np.float64)
    if X.shape != (n, n):
        raise DimensionMismatch(f"X has shape {X.shape}, expected {(n, n)}")
    XB = X @ B
    R = At @ X + (At @ X.T).T + problem.Q() - XB @ (B.T @ X)
    if qnorm is None:
        den = spectral_norm(problem.Q())
    return spectral_norm(R) / den


def feedback_change(K_next, K_prev):
    """Relative feedback variation ``||K_next - K_prev||_2 / ||K_next||_2``."""
    K_next = np.asarray(K_next, dtype=np.float64)
    K_prev = np.asarray(K_prev, dtype=np.float64)
    if K_next.shape != K_prev.shape:
        raise DimensionMismatch(f"feedback shapes differ: {K_next.shape} vs {K_prev.shape}")
    top = spectral_norm(K_next)
    if top == 0:
        raise ZeroFeedback("feedback matrix is zero; the variation criterion is undefined")
    return spectral_norm(K_next - K_prev) / top


def _inner_tol(opts, outer_res, state, qnorm):
    """Inner relative tolerance from the current CARE residual ``outer_res``.

    The forcing value is relative to ``||Q||``; rescaling by
    ``||Q|| / ||M_k M_k^T||`` makes both loops target the same absolute residual.
    """
    if opts.inner_forcing == "linear":
        rel = max(opts.tol, 0.1 * outer_res)
    else:
        rel = max(opts.tol, min(0.1, outer_res) * outer_res)
    return rel * qnorm / lowrank_norm(state.M_k, state.M_k)


def _initial_feedback(problem, K0, opts):
    K = np.zeros((problem.n, problem.m)) if K0 is None else as_dense(K0, "K0")
    if K.shape != (problem.n, problem.m):
        raise DimensionMismatch(f"K0 must be {problem.n} x {problem.m}, got {K.shape}")
    if problem.n <= min(opts.dense_threshold, EIG_THRESHOLD) and not is_stabilizing(problem, K):
        raise NotStabilizing("B K0^T - A is not positive-real; supply a stabilizing K0")
    return K


def kleinman_newton(problem, K0=None, opts=None, callback=None):
    """Low-rank Kleinman-Newton-GADI solver.

    Parameters
    ----------
    problem : CareProblem
    K0 : ndarray, optional
        Initial feedback (n x m).  Zero by default, which is admissible only
        when ``A`` is stable.
    opts : SolveOptions, optional
        ``alpha=None`` recomputes the largest singular value of ``A_k`` each
        outer step; ``omega`` is held fixed; ``criterion`` selects the
        relative CARE residual or the relative feedback change.
    callback : callable, optional
        ``callback(k, state, inner_solution, K_next, value)`` after each outer step.

    Returns
    -------
    CareSolution

    Raises
    ------
    NotStabilizing
        If the eager desk-scale check on ``K0`` fails.
    MaxOuterIterations
        If ``opts.max_iter`` outer steps pass without meeting ``opts.tol``;
        the partial :class:`CareSolution` is attached as ``.solution``.
    """
    opts = opts or SolveOptions()
    K = _initial_feedback(problem, K0, opts)
    qn = care_q_norm(problem)
    sol = CareSolution(None, K, 0, [], [], False, opts.criterion, omega=opts.omega)
    if problem.p == 0 and not np.any(K):
        sol.factors = LowRankFactors.zeros(problem.n)
        sol.converged = True
        return sol

    res = 1.0
    for k in range(opts.max_iter):
        state = kn_step_operator(problem, K, k)
        alpha_k = opts.alpha if opts.alpha is not None else max_singular_value(state.A_k, fallback=True)
        inner = inner_rgadi(state, alpha_k, opts.omega, opts, tol=_inner_tol(opts, res, state, qn))
        f = inner.factors
        K_next = f.times(problem.B)
        # the CARE residual drives the inner forcing under either stopping rule
        res = care_residual(problem, f, opts.dense_threshold, qnorm=qn)
        value = res
        if opts.criterion is Criterion.FEEDBACK_CHANGE:
            try:
                value = feedback_change(K_next, K)
            except ZeroFeedback:
                pass

        sol.factors = f
        sol.K = K_next
        sol.outer_iterations = k + 1
        sol.inner_iterations.append(inner.iterations)
        sol.inner_residuals.append(inner.residual_history[-1] if inner.residual_history else 0.0)
        sol.residual_history.append(value)
        sol.alphas.append(alpha_k)
        sol.width_history.append(f.width)
        if callback is not None:
            callback(k + 1, state, inner, K_next, value)
        K = K_next
        if value < opts.tol:
            sol.converged = True
            return sol
    raise MaxOuterIterations(
        f"no convergence in {opts.max_iter} outer steps (last value {value:.3e})", solution=sol
    )


def kleinman_newton_dense(problem, K0=None, opts=None, warm_start=True):
    """Dense Kleinman-Newton-GADI for study at desk scale.

    With ``warm_start`` each inner GADI solve starts from the previous outer
    iterate instead of zero.
    """
    opts = opts or SolveOptions()
    n = problem.n
    K = _initial_feedback(problem, K0, opts)
    qn = care_q_norm(problem)
    X = np.zeros((n, n))
    sol = CareSolution(None, K, 0, [], [], False, opts.criterion, omega=opts.omega)
    res = 1.0
    for k in range(opts.max_iter):
        state = kn_step_operator(problem, K, k)
        lp = state.lyapunov()
        alpha_k = opts.alpha if opts.alpha is not None else max_singular_value(state.A_k, fallback=True)
        tol = _inner_tol(opts, res, state, qn)
        X0 = X if warm_start else None
        inner_qn = lowrank_norm(lp.C.T, lp.C.T)
        its = gadi_dense_iterates(lp, alpha_k, opts.omega, X0=X0, max_n=opts.dense_threshold)
        count = 0
        for count, X in zip(range(1, opts.inner_max_iter + 1), its):
            r = lyap_residual(lp, X, opts.dense_threshold, qnorm=inner_qn)
            if r < tol:
                break
        K_next = X @ problem.B
        res = care_residual(problem, X, opts.dense_threshold, qnorm=qn)
        value = res
        if opts.criterion is Criterion.FEEDBACK_CHANGE and np.any(K_next):
            value = feedback_change(K_next, K)
        sol.X, sol.K = X, K_next
        sol.outer_iterations = k + 1
        sol.inner_iterations.append(count)
        sol.inner_residuals.append(r)
        sol.residual_history.append(value)
        sol.alphas.append(alpha_k)
        K = K_next
        if value < opts.tol:
            sol.converged = True
            return sol
    raise MaxOuterIterations(
        f"no convergence in {opts.max_iter} outer steps (last value {value:.3e})", solution=sol
    )
