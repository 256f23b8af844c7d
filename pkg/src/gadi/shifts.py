"""Shift selection and convergence diagnostics for GADI.

The iteration matrix of GADI on the vectorized Lyapunov equation is
``T(alpha, omega) = ((2 - omega) T(alpha) + omega I) / 2`` where ``T(alpha)``
is the ADI iteration matrix.  :func:`spectral_factors` assembles both
explicitly (small ``n`` only), :func:`contraction_bound` evaluates the
per-step error bound constants, and :func:`alpha_star` picks the shift as
the largest singular value of ``F``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.linalg as sla

from .errors import DenseThresholdExceeded
from .lyap import SolveOptions, rgadi
from .matcore import EIG_THRESHOLD, max_singular_value, to_array

KRON_MAX_N = 48


class ShiftSource(str, enum.Enum):
    MAX_SIGMA = "maxsigma"
    GEOMETRIC_EIG = "geomeig"
    USER_FIXED = "fixed"


@dataclass(frozen=True)
class ShiftSelection:
    alpha_star: float
    mu: Optional[float]
    nu: Optional[float]
    source: ShiftSource


@dataclass(frozen=True)
class ContractionDiagnostics:
    alpha: float
    omega: float
    delta: Optional[float] = None
    eta: Optional[float] = None
    rho_gadi: Optional[float] = None
    rho_adi: Optional[float] = None
    dominant_eig_adi: Optional[complex] = None
    dominant_eig_gadi: Optional[complex] = None
    eigs_adi: Optional[np.ndarray] = None
    eigs_gadi: Optional[np.ndarray] = None


def _min_real_eig(F):
    return float(np.linalg.eigvals(to_array(F)).real.min())


def alpha_star(F, eig_threshold=EIG_THRESHOLD):
    """Shift ``alpha* = mu = max sigma(F)``.

    ``nu = min Re lambda(F)`` is reported when ``n <= eig_threshold`` and is
    ``None`` above it; it is not needed to pick the shift.
    """
    mu = max_singular_value(F, fallback=True)
    nu = _min_real_eig(F) if F.shape[0] <= eig_threshold else None
    return ShiftSelection(mu, mu, nu, ShiftSource.MAX_SIGMA)


def geometric_eig_shift(F, imag_rtol=1e-4):
    """``alpha = sqrt(lambda_max * lambda_min)`` for ``F`` with a real positive spectrum.

    Raises ``ValueError`` when the eigenvalues are not (numerically) real.
    """
    lam = np.linalg.eigvals(to_array(F))
    scale = np.abs(lam).max()
    if np.abs(lam.imag).max() > imag_rtol * scale:
        raise ValueError("geometric eigenvalue shift needs a real spectrum")
    re = lam.real
    if re.min() <= 0:
        raise ValueError("geometric eigenvalue shift needs a positive spectrum")
    return ShiftSelection(float(np.sqrt(re.max() * re.min())), None, float(re.min()), ShiftSource.GEOMETRIC_EIG)


def fixed_shift(alpha):
    if not alpha > 0:
        raise ValueError(f"alpha must be positive, got {alpha}")
    return ShiftSelection(float(alpha), None, None, ShiftSource.USER_FIXED)


def scalar_bound(alpha, mu, nu):
    """``(mu^2 - 2 alpha nu + alpha^2) / (mu^2 + 2 alpha nu + alpha^2)``, minimized at ``alpha = mu``."""
    return (mu**2 - 2 * alpha * nu + alpha**2) / (mu**2 + 2 * alpha * nu + alpha**2)


def contraction_bound(F, alpha, omega, max_n=EIG_THRESHOLD):
    """Constants ``delta, eta`` of the bound
    ``||X_{k+1} - X|| <= delta ||X_k - X|| + eta ||R(X_k)||`` (spectral norms)::

        delta = ||F (aI+F)^-1|| + a ||(aI+F^T)^-1|| ||(aI-F)(aI+F)^-1||
        eta   = |1-omega| a ||(aI+F^T)^-1|| ||(aI+F)^-1||
    """
    F = to_array(F)
    n = F.shape[0]
    if n > max_n:
        raise DenseThresholdExceeded(f"contraction bound is dense; n={n} exceeds {max_n}")
    I = np.eye(n)
    P_inv = np.linalg.inv(alpha * I + F)
    Pt_inv = np.linalg.inv(alpha * I + F.T)
    norm = lambda M: float(sla.svdvals(M)[0])  # noqa: E731
    delta = norm(F @ P_inv) + alpha * norm(Pt_inv) * norm((alpha * I - F) @ P_inv)
    eta = abs(1 - omega) * alpha * norm(Pt_inv) * norm(P_inv)
    return ContractionDiagnostics(alpha=alpha, omega=omega, delta=delta, eta=eta)


def kron_iteration_matrices(F, alpha, omega, max_n=KRON_MAX_N):
    """Explicit ``n^2 x n^2`` matrices ``T(alpha)`` and ``T(alpha, omega)``.

    ``T(alpha, omega)`` is assembled from its defining product, not from the
    affine relation to ``T(alpha)``, so the two can be checked against each other.
    """
    F = to_array(F)
    n = F.shape[0]
    if n > max_n:
        raise DenseThresholdExceeded(f"Kronecker operators need n <= {max_n}, got n={n}")
    I = np.eye(n)
    N = n * n
    IN = np.eye(N)
    L = np.kron(I, F.T)
    R = np.kron(F.T, I)
    left = lambda M: np.linalg.solve(alpha * IN + R, np.linalg.solve(alpha * IN + L, M))  # noqa: E731
    T_adi = left((alpha * IN - L) @ (alpha * IN - R))
    T_gadi = left(alpha**2 * IN + L @ R - (1 - omega) * alpha * (L + R))
    return T_adi, T_gadi


def spectral_factors(F, alpha, omega, max_n=KRON_MAX_N):
    """Spectral radii and dominant eigenvalues of the ADI and GADI iteration matrices."""
    T_adi, T_gadi = kron_iteration_matrices(F, alpha, omega, max_n)
    ea = np.linalg.eigvals(T_adi)
    eg = np.linalg.eigvals(T_gadi)
    ia = int(np.argmax(np.abs(ea)))
    ig = int(np.argmax(np.abs(eg)))
    return ContractionDiagnostics(
        alpha=alpha,
        omega=omega,
        rho_adi=float(np.abs(ea[ia])),
        rho_gadi=float(np.abs(eg[ig])),
        dominant_eig_adi=complex(ea[ia]),
        dominant_eig_gadi=complex(eg[ig]),
        eigs_adi=ea,
        eigs_gadi=eg,
    )


@dataclass(frozen=True)
class RateComparison:
    """Which of ADI / GADI the dominant-eigenvalue test predicts to be faster.

    ``case`` is ``"i"`` when ``|eta|^2 <= c`` (ADI no slower), ``"ii"`` when
    ``|eta|^2 > c`` and ``0 < omega < omega_upper`` (GADI faster), else ``None``.
    ``subdominant_conflict`` is set when some other eigenvalue of ``T(alpha)``
    would reverse the verdict.
    """

    case: Optional[str]
    omega_upper: Optional[float]
    subdominant_conflict: bool


def compare_rates(diag):
    """Evaluate the ADI-vs-GADI rate conditions on the dominant eigenvalue ``c + di`` of ``T(alpha)``."""
    eta = diag.dominant_eig_adi
    c, d = eta.real, eta.imag
    mod2 = abs(eta) ** 2
    omega = diag.omega
    mapped = 0.5 * np.abs((2 - omega) * diag.eigs_adi + omega)
    if mod2 <= c:
        return RateComparison("i", None, False)
    upper = 4 * (mod2 - c) / ((1 - c) ** 2 + d**2)
    if 0 < omega < upper < 2:
        conflict = bool(mapped.max() >= diag.rho_adi)
        return RateComparison("ii", upper, conflict)
    return RateComparison(None, upper, False)


def omega_scan(problem, omegas, alpha=None, budget=8, tol=0.0, opts=None):
    """Run R-GADI for each candidate ``omega`` with the same sweep budget.

    Returns ``(best_omega, table)`` where ``table`` lists
    ``{"omega", "residual", "iterations"}`` per candidate and ties go to the
    smallest ``omega``.
    """
    omegas = [float(w) for w in omegas]
    if not omegas:
        raise ValueError("need at least one omega candidate")
    base = opts or SolveOptions()
    if alpha is None:
        alpha = max_singular_value(problem.F, fallback=True)
    table = []
    for w in omegas:
        sol = rgadi(problem, base.replace(alpha=alpha, omega=w, max_iter=budget, tol=tol))
        table.append({"omega": w, "residual": sol.residual_history[-1], "iterations": sol.iterations})
    best = min(table, key=lambda row: (row["residual"], row["omega"]))
    return best["omega"], table
