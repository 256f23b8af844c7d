"""ADI-type iterations for the Lyapunov equation ``F^T X + X F = C^T C``.

Four schemes are provided: the single-shift low-rank ADI (:func:`r1_adi`),
the two-shift low-rank ADI (:func:`r2_adi`), the dense generalized ADI
(:func:`gadi_dense`) and its low-rank counterpart (:func:`rgadi`).  ``F`` must
have its spectrum in the open right half-plane.  Each scheme is available as
a generator of iterates (``*_iterates``) and as a driver that applies the
relative-residual stopping rule.
"""

from __future__ import annotations

import dataclasses
import enum
from dataclasses import dataclass, field
from typing import Callable, Iterator, Optional

import numpy as np

from .errors import DenseThresholdExceeded, DimensionMismatch, WidthCapExceeded
from .matcore import (
    DESK_THRESHOLD,
    LowRankFactors,
    SparsePlusLowRank,
    as_dense,
    as_sparse,
    compress_factors,
    lowrank_norm,
    materialize,
    max_singular_value,
    shifted_factorize,
    spectral_norm,
    to_array,
)


class Criterion(str, enum.Enum):
    RELATIVE_RESIDUAL = "res"
    FEEDBACK_CHANGE = "feedback"


@dataclass(frozen=True)
class SolveOptions:
    """Parameters shared by the Lyapunov and Riccati drivers.

    ``alpha=None`` selects the largest singular value of the coefficient
    matrix.  ``max_iter`` is the sweep cap for Lyapunov solves and the outer
    cap for Kleinman-Newton; ``inner_max_iter`` bounds each inner solve.
    ``inner_forcing`` is ``"superlinear"`` (inner tolerance
    ``max(tol, min(0.1, r) * r)``) or ``"linear"`` (``max(tol, 0.1 * r)``),
    where ``r`` is the current outer criterion value.
    """

    alpha: Optional[float] = None
    beta: Optional[float] = None
    omega: float = 0.015
    max_iter: int = 50
    tol: float = 1e-12
    criterion: Criterion = Criterion.RELATIVE_RESIDUAL
    compress_tol: Optional[float] = None
    dense_threshold: int = DESK_THRESHOLD
    max_factor_entries: int = 2**25
    inner_max_iter: int = 16
    inner_forcing: str = "superlinear"

    def __post_init__(self):
        if self.alpha is not None and not self.alpha > 0:
            raise ValueError(f"alpha must be positive, got {self.alpha}")
        if self.beta is not None and not self.beta > 0:
            raise ValueError(f"beta must be positive, got {self.beta}")
        if not 0 <= self.omega < 2:
            raise ValueError(f"omega must lie in [0, 2), got {self.omega}")
        if self.max_iter < 0 or self.inner_max_iter < 1:
            raise ValueError("iteration caps must be positive")
        if not self.tol >= 0:
            raise ValueError("tol must be non-negative")
        if self.compress_tol is not None and self.compress_tol < 0:
            raise ValueError("compress_tol must be non-negative")
        if self.inner_forcing not in ("superlinear", "linear"):
            raise ValueError(f"unknown inner_forcing {self.inner_forcing!r}")
        object.__setattr__(self, "criterion", Criterion(self.criterion))

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)


@dataclass(frozen=True)
class LyapProblem:
    """``F^T X + X F = Q`` with ``Q = C^T C``; ``F`` is n x n, ``C`` is p x n."""

    F: object
    C: np.ndarray

    def __post_init__(self):
        F = self.F if isinstance(self.F, SparsePlusLowRank) else as_sparse(self.F)
        C = as_dense(self.C, "C")
        n = F.shape[0]
        if F.shape != (n, n):
            raise DimensionMismatch(f"F must be square, got {F.shape}")
        if C.shape[1] != n:
            raise DimensionMismatch(f"C has {C.shape[1]} columns, F is {n} x {n}")
        C.flags.writeable = False
        object.__setattr__(self, "F", F)
        object.__setattr__(self, "C", C)

    @property
    def n(self):
        return self.F.shape[0]

    @property
    def p(self):
        return self.C.shape[0]

    def Q(self, max_n=DESK_THRESHOLD):
        if self.n > max_n:
            raise DenseThresholdExceeded(f"n={self.n} exceeds dense limit {max_n}")
        return self.C.T @ self.C

    def dense_F(self):
        return to_array(self.F)

    def is_positive_real(self):
        """Dense eigenvalue check that every eigenvalue of ``F`` has positive real part."""
        return bool(np.all(np.linalg.eigvals(self.dense_F()).real > 0))


@dataclass
class LyapSolution:
    factors: Optional[LowRankFactors]
    X: Optional[np.ndarray]
    residual_history: list
    iterations: int
    converged: bool
    solver: str
    alpha: float
    omega: Optional[float] = None
    beta: Optional[float] = None
    width_history: list = field(default_factory=list)
    compress_tol: Optional[float] = None

    def solution(self, max_n=DESK_THRESHOLD):
        """Dense ``X`` (materialized from the factors if necessary)."""
        if self.X is not None:
            return self.X
        return materialize(self.factors, max_n)


def q_norm(problem):
    """``||C^T C||_2``."""
    return lowrank_norm(problem.C.T, problem.C.T)


def lyap_residual(problem, X, dense_threshold=DESK_THRESHOLD, qnorm=None):
    """Relative residual ``||F^T X + X F - Q||_2 / ||Q||_2``.

    ``X`` is a dense array or :class:`LowRankFactors`.  Factors with
    ``n > dense_threshold`` are evaluated through the thin form
    ``[F^T V, V, C^T] [W, F^T W, -C^T]^T`` and a QR-reduced core, so no
    ``n x n`` array is formed.
    """
    n = problem.n
    Ft = problem.F.T
    if isinstance(X, LowRankFactors):
        if X.n != n:
            raise DimensionMismatch(f"factors have {X.n} rows, problem has n={n}")
        if n > dense_threshold:
            Ct = problem.C.T
            U = np.hstack([Ft @ X.V, X.V, Ct])
            Z = np.hstack([X.W, Ft @ X.W, -Ct])
            num = lowrank_norm(U, Z)
            den = q_norm(problem) if qnorm is None else qnorm
            return num / den
        X = materialize(X, dense_threshold)
    X = np.asarray(X, dtype=np.float64)
    if X.shape != (n, n):
        raise DimensionMismatch(f"X has shape {X.shape}, expected {(n, n)}")
    Q = problem.Q(max_n=max(n, dense_threshold))
    R = Ft @ X + (Ft @ X.T).T - Q
    den = spectral_norm(Q) if qnorm is None else qnorm
    return spectral_norm(R) / den


def resolve_alpha(problem, alpha):
    return max_singular_value(problem.F, fallback=True) if alpha is None else float(alpha)


def _check_width(n, width, opts):
    if opts.compress_tol is None and n * width > opts.max_factor_entries:
        raise WidthCapExceeded(
            f"factor width {width} at n={n} exceeds the cap of {opts.max_factor_entries} entries"
        )


# --- iterate generators -------------------------------------------------------


def r1_adi_iterates(problem, alpha) -> Iterator[LowRankFactors]:
    """Single-shift low-rank ADI: ``V_k = [S V_{k-1}, V_1]``, ``X_k = V_k V_k^T``.

    ``S = (F^T - alpha I)(F^T + alpha I)^{-1}``; widths grow by ``p`` per step.
    """
    solver = shifted_factorize(problem.F.T, alpha)
    Ft = problem.F.T
    V1 = np.sqrt(2 * alpha) * solver.solve(problem.C.T)
    V = V1
    widths = [problem.p]
    while True:
        yield LowRankFactors(V, V, tuple(widths))
        Y = solver.solve(V)
        V = np.hstack([Ft @ Y - alpha * Y, V1])
        widths = [V.shape[1] - problem.p, problem.p]


def r2_adi_iterates(problem, alpha, beta) -> Iterator[LowRankFactors]:
    """Two-shift low-rank ADI producing ``X_k = V_k W_k^T``."""
    sa = shifted_factorize(problem.F.T, alpha)
    sb = sa if beta == alpha else shifted_factorize(problem.F.T, beta)
    Ft = problem.F.T
    c = np.sqrt(alpha + beta)
    V1 = c * sa.solve(problem.C.T)
    W1 = c * sb.solve(problem.C.T)
    V, W = V1, W1
    widths = [problem.p]
    while True:
        yield LowRankFactors(V, W, tuple(widths))
        Y = sa.solve(V)
        V = np.hstack([Ft @ Y - beta * Y, V1])
        W = np.hstack([sb.solve(Ft @ W - alpha * W), W1])
        widths = [V.shape[1] - problem.p, problem.p]


def rgadi_iterates(problem, alpha, omega, opts=None) -> Iterator[LowRankFactors]:
    """Low-rank GADI factors, one :class:`LowRankFactors` per sweep.

    With ``s = sqrt((2 - omega) alpha)`` and ``P = alpha I + F^T``::

        V_1 = W_1 = s P^{-1} C^T
        V_k = [V_{k-1},  s P^{-1} V_{k-1},  V_1]
        W_k = [P^{-1}(F^T - (1 - omega) alpha I) W_{k-1},
               s P^{-1}(alpha I - F^T) W_{k-1},  W_1]

    so the width is ``(2^k - 1) p`` unless ``opts.compress_tol`` is set.
    """
    opts = opts or SolveOptions()
    n, p = problem.n, problem.p
    solver = shifted_factorize(problem.F.T, alpha)
    Ft = problem.F.T
    s = np.sqrt((2.0 - omega) * alpha)
    V1 = s * solver.solve(problem.C.T)
    f = LowRankFactors(V1, V1, (p,))
    while True:
        yield f
        _check_width(n, 2 * f.width + p, opts)
        V, W = f.V, f.W
        FtW = Ft @ W
        f = LowRankFactors.concat(
            [
                (V, solver.solve(FtW - (1.0 - omega) * alpha * W)),
                (s * solver.solve(V), s * solver.solve(alpha * W - FtW)),
                (V1, V1),
            ]
        )
        if opts.compress_tol is not None:
            f = compress_factors(f, opts.compress_tol)


def gadi_dense_iterates(problem, alpha, omega, X0=None, max_n=DESK_THRESHOLD) -> Iterator[np.ndarray]:
    """Dense GADI iterates ``X_1, X_2, ...`` from the two half-steps

    ``(alpha I + F^T) X_half = X_k (alpha I - F) + Q`` and
    ``X_{k+1} (alpha I + F) = X_k (F - (1 - omega) alpha I) + (2 - omega) alpha X_half``.
    """
    n = problem.n
    if n > max_n:
        raise DenseThresholdExceeded(f"dense GADI needs n <= {max_n}, got n={n}")
    F = problem.dense_F()
    Q = problem.Q(max_n=max_n)
    solver = shifted_factorize(F.T, alpha)
    X = np.zeros((n, n)) if X0 is None else as_dense(X0, "X0")
    while True:
        X_half = solver.solve(X @ (alpha * np.eye(n) - F) + Q)
        rhs = X @ F - (1.0 - omega) * alpha * X + (2.0 - omega) * alpha * X_half
        X = solver.solve(rhs.T).T
        yield X


# --- drivers ------------------------------------------------------------------


def _drive(problem, iterates, opts, solver_name, alpha, omega=None, beta=None, callback=None):
    if opts.criterion is not Criterion.RELATIVE_RESIDUAL:
        raise ValueError("Lyapunov solvers stop on the relative residual only")
    qn = q_norm(problem)
    history, widths = [], []
    last = None
    converged = False
    for k, X in zip(range(1, opts.max_iter + 1), iterates):
        res = lyap_residual(problem, X, opts.dense_threshold, qnorm=qn)
        history.append(res)
        widths.append(X.width if isinstance(X, LowRankFactors) else problem.n)
        last = X
        if callback is not None:
            callback(k, X, res)
        if res < opts.tol:
            converged = True
            break
    dense = not isinstance(last, LowRankFactors) and last is not None
    return LyapSolution(
        factors=None if dense else last,
        X=last if dense else None,
        residual_history=history,
        iterations=len(history),
        converged=converged,
        solver=solver_name,
        alpha=alpha,
        omega=omega,
        beta=beta,
        width_history=widths,
        compress_tol=opts.compress_tol if solver_name == "rgadi" else None,
    )


def _trivial(problem, solver_name, alpha, omega=None, beta=None):
    # p = 0: Q = 0 and X = 0 is the exact solution
    return LyapSolution(
        LowRankFactors.zeros(problem.n), None, [], 0, True, solver_name, alpha, omega, beta
    )


def r1_adi(problem, alpha=None, opts=None, callback=None):
    """Solve with single-shift low-rank ADI; ``X = V V^T``."""
    opts = opts or SolveOptions()
    alpha = resolve_alpha(problem, alpha if alpha is not None else opts.alpha)
    if problem.p == 0:
        return _trivial(problem, "r1adi", alpha)
    return _drive(problem, r1_adi_iterates(problem, alpha), opts, "r1adi", alpha, callback=callback)


def r2_adi(problem, alpha=None, beta=None, opts=None, callback=None):
    """Solve with two-shift low-rank ADI; ``beta`` defaults to ``opts.beta``."""
    opts = opts or SolveOptions()
    alpha = resolve_alpha(problem, alpha if alpha is not None else opts.alpha)
    beta = beta if beta is not None else opts.beta
    if beta is None:
        raise ValueError("r2_adi needs a second shift beta")
    if not beta > 0:
        raise ValueError(f"beta must be positive, got {beta}")
    if problem.p == 0:
        return _trivial(problem, "r2adi", alpha, beta=beta)
    return _drive(
        problem, r2_adi_iterates(problem, alpha, float(beta)), opts, "r2adi", alpha, beta=float(beta),
        callback=callback,
    )


def gadi_dense(problem, opts=None, X0=None, callback=None):
    """Dense GADI; materializes ``X_k`` and therefore needs ``n <= opts.dense_threshold``."""
    opts = opts or SolveOptions()
    if problem.n > opts.dense_threshold:
        raise DenseThresholdExceeded(f"dense GADI needs n <= {opts.dense_threshold}, got n={problem.n}")
    alpha = resolve_alpha(problem, opts.alpha)
    if problem.p == 0 and X0 is None:
        sol = _trivial(problem, "gadi", alpha, opts.omega)
        sol.factors, sol.X = None, np.zeros((problem.n, problem.n))
        return sol
    its = gadi_dense_iterates(problem, alpha, opts.omega, X0=X0, max_n=opts.dense_threshold)
    return _drive(problem, its, opts, "gadi", alpha, omega=opts.omega, callback=callback)


def rgadi(problem, opts=None, callback: Optional[Callable] = None):
    """Low-rank GADI; returns factors with ``X ~= V W^T``.

    ``callback(k, factors, residual)`` is invoked after every sweep.
    """
    opts = opts or SolveOptions()
    alpha = resolve_alpha(problem, opts.alpha)
    if problem.p == 0:
        return _trivial(problem, "rgadi", alpha, opts.omega)
    return _drive(
        problem, rgadi_iterates(problem, alpha, opts.omega, opts), opts, "rgadi", alpha,
        omega=opts.omega, callback=callback,
    )


SOLVERS = {"r1adi": r1_adi, "r2adi": r2_adi, "gadi": gadi_dense, "rgadi": rgadi}
