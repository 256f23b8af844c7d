"""Matrix storage, cached shifted factorizations and low-rank factor containers.

Dense matrices are plain ``numpy.ndarray`` objects of dtype float64 in
row-major (C) order.  Sparse matrices are ``scipy.sparse.csr_matrix`` with
canonical structure (sorted column indices, no duplicates).  Closed-loop
Kleinman-Newton matrices ``B K^T - A`` are carried as
:class:`SparsePlusLowRank` so that no ``n x n`` dense array is formed.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import DimensionMismatch, NoConvergence, SingularShift

#: Largest ``n`` for which helpers are allowed to form ``n x n`` dense matrices.
DESK_THRESHOLD = 4096
#: Largest ``n`` for which dense eigenvalue checks are run eagerly.
EIG_THRESHOLD = 1024
#: Largest dimension for which spectral norms use a full SVD instead of power iteration.
SVD_NORM_LIMIT = 1024

_PIVOT_RTOL = 1e-14


def as_dense(x, name="matrix"):
    """Return ``x`` as a finite, 2-D, C-ordered float64 array."""
    if sp.issparse(x):
        x = x.toarray()
    elif isinstance(x, SparsePlusLowRank):
        x = x.toarray()
    a = np.array(x, dtype=np.float64, order="C", ndmin=2, copy=True)
    if a.ndim != 2:
        raise DimensionMismatch(f"{name} must be 2-D, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name} has non-finite entries")
    return a


def as_sparse(x):
    """Return ``x`` as a canonical CSR matrix (sorted indices, no stored zeros)."""
    m = sp.csr_matrix(x, dtype=np.float64, copy=True)
    m.sum_duplicates()
    m.eliminate_zeros()
    m.sort_indices()
    if not np.all(np.isfinite(m.data)):
        raise ValueError("sparse matrix has non-finite entries")
    return m


def to_array(M):
    """Dense copy of any supported matrix type."""
    if sp.issparse(M) or isinstance(M, SparsePlusLowRank):
        return M.toarray()
    return np.asarray(M, dtype=np.float64)


def _square_dim(M):
    if M.shape[0] != M.shape[1]:
        raise DimensionMismatch(f"expected a square matrix, got shape {M.shape}")
    return M.shape[0]


class SparsePlusLowRank:
    """The matrix ``S + U @ V.T`` with ``S`` sparse and ``U, V`` thin.

    Supports ``@`` products, ``.T`` and ``toarray()``; shifted solves go
    through the Sherman-Morrison-Woodbury identity in :func:`shifted_factorize`.
    """

    def __init__(self, S, U, V):
        self.S = as_sparse(S)
        self.U = as_dense(U, "U")
        self.V = as_dense(V, "V")
        n, m = self.S.shape
        if self.U.shape[0] != n or self.V.shape[0] != m or self.U.shape[1] != self.V.shape[1]:
            raise DimensionMismatch("low-rank update does not match sparse part")

    @property
    def shape(self):
        return self.S.shape

    @property
    def rank(self):
        return self.U.shape[1]

    @property
    def T(self):
        return SparsePlusLowRank(self.S.T, self.V, self.U)

    def __matmul__(self, x):
        x = np.asarray(x, dtype=np.float64)
        return self.S @ x + self.U @ (self.V.T @ x)

    def toarray(self):
        return self.S.toarray() + self.U @ self.V.T


@dataclass(frozen=True)
class ShiftedSolver:
    """Reusable factorization of ``base + alpha*I``."""

    alpha: float
    base: object = field(repr=False)
    n: int
    kind: str
    factorization: tuple = field(repr=False)

    def solve(self, R):
        return solve_shifted(self, R)


def _check_pivots(diag, scale):
    piv = np.abs(diag)
    if piv.size and (not np.all(np.isfinite(piv)) or piv.min() <= _PIVOT_RTOL * scale):
        raise SingularShift(
            f"shifted matrix is numerically singular (min pivot {piv.min():.3e}, scale {scale:.3e})"
        )


def _factor_sparse(S):
    scale = float(abs(S).sum(axis=0).max()) if S.nnz else 0.0
    try:
        lu = spla.splu(sp.csc_matrix(S))
    except RuntimeError as exc:
        raise SingularShift(str(exc)) from exc
    _check_pivots(lu.U.diagonal(), scale)
    return lu


def _factor_dense(D):
    scale = float(np.abs(D).sum(axis=0).max()) if D.size else 0.0
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", sla.LinAlgWarning)
        lu, piv = sla.lu_factor(D, check_finite=False)
    _check_pivots(np.diag(lu), scale)
    return lu, piv


def shifted_factorize(M, alpha):
    """Factorize ``M + alpha*I`` once for repeated multi-column solves.

    Sparse input is factorized with SuperLU (partial pivoting), dense input
    with LAPACK ``getrf``, and :class:`SparsePlusLowRank` input with a sparse
    factorization of ``S + alpha*I`` plus a small Woodbury capacitance matrix.

    Raises
    ------
    SingularShift
        If a pivot falls below ``1e-14`` times the 1-norm of the shifted matrix.
    """
    alpha = float(alpha)
    if not alpha > 0:
        raise ValueError(f"alpha must be positive, got {alpha}")
    n = _square_dim(M)

    if isinstance(M, SparsePlusLowRank):
        P = M.S + alpha * sp.identity(n, format="csr")
        lu = _factor_sparse(P)
        PU = lu.solve(M.U) if M.rank else np.zeros((n, 0))
        cap = np.eye(M.rank) + M.V.T @ PU
        cap_lu = _factor_dense(cap) if M.rank else None
        return ShiftedSolver(alpha, M, n, "woodbury", (lu, PU, cap_lu))
    if sp.issparse(M):
        P = as_sparse(M) + alpha * sp.identity(n, format="csr")
        return ShiftedSolver(alpha, M, n, "sparse", (_factor_sparse(P),))
    D = as_dense(M) + alpha * np.eye(n)
    return ShiftedSolver(alpha, M, n, "dense", _factor_dense(D))


def solve_shifted(s, R):
    """Return ``Y`` with ``(M + alpha*I) Y = R``; ``R`` may be a vector or n x m block."""
    R = np.asarray(R, dtype=np.float64)
    if R.shape[0] != s.n:
        raise DimensionMismatch(f"right-hand side has {R.shape[0]} rows, solver dimension is {s.n}")
    if R.size == 0:
        return R.copy()
    if s.kind == "dense":
        return sla.lu_solve(s.factorization, R, check_finite=False)
    if s.kind == "sparse":
        return s.factorization[0].solve(R)
    lu, PU, cap_lu = s.factorization
    Y = lu.solve(R)
    if cap_lu is None:
        return Y
    V = s.base.V
    return Y - PU @ sla.lu_solve(cap_lu, V.T @ Y, check_finite=False)


@dataclass(frozen=True)
class LowRankFactors:
    """Factor pair ``(V, W)`` representing ``X = V @ W.T``.

    ``block_widths`` records the column counts of the blocks concatenated to
    build the factors, in order.  The arrays are made read-only.
    """

    V: np.ndarray
    W: np.ndarray
    block_widths: tuple = ()

    def __post_init__(self):
        V = as_dense(self.V, "V")
        W = as_dense(self.W, "W")
        if V.shape != W.shape:
            raise DimensionMismatch(f"V {V.shape} and W {W.shape} differ in shape")
        widths = tuple(int(b) for b in self.block_widths) or ((V.shape[1],) if V.shape[1] else ())
        if sum(widths) != V.shape[1]:
            raise DimensionMismatch(f"block widths {widths} do not sum to {V.shape[1]}")
        V.flags.writeable = False
        W.flags.writeable = False
        object.__setattr__(self, "V", V)
        object.__setattr__(self, "W", W)
        object.__setattr__(self, "block_widths", widths)

    @property
    def n(self):
        return self.V.shape[0]

    @property
    def width(self):
        return self.V.shape[1]

    @classmethod
    def zeros(cls, n):
        return cls(np.zeros((n, 0)), np.zeros((n, 0)), ())

    @classmethod
    def concat(cls, pairs):
        """Horizontally stack ``[(V_i, W_i), ...]`` into one factor pair."""
        Vs = [np.atleast_2d(v) for v, _ in pairs]
        Ws = [np.atleast_2d(w) for _, w in pairs]
        return cls(np.hstack(Vs), np.hstack(Ws), tuple(v.shape[1] for v in Vs))

    def times(self, B):
        """``(V W^T) B`` evaluated right to left."""
        return self.V @ (self.W.T @ B)

    def transpose_times(self, B):
        """``(V W^T)^T B`` evaluated right to left."""
        return self.W @ (self.V.T @ B)


def materialize(f, max_n=DESK_THRESHOLD):
    """Form ``V @ W.T`` densely.  Refuses when ``n > max_n``."""
    from .errors import DenseThresholdExceeded

    if f.n > max_n:
        raise DenseThresholdExceeded(f"refusing to materialize a {f.n} x {f.n} matrix (limit {max_n})")
    return f.V @ f.W.T


def compress_factors(f, tol):
    """Truncate ``(V, W)`` to a narrower pair with the same product up to ``tol``.

    Pivoted QR of both factors reduces the product to a small core matrix whose
    SVD is truncated so that the discarded tail satisfies
    ``||VW^T - V'W'^T||_F <= tol * ||VW^T||_F``.  The singular values are split
    evenly between the two new factors.
    """
    if tol < 0:
        raise ValueError("tol must be non-negative")
    if f.width == 0:
        return f
    Qv, Rv, pv = sla.qr(f.V, mode="economic", pivoting=True)
    Qw, Rw, pw = sla.qr(f.W, mode="economic", pivoting=True)
    # V = Qv Rv Pv^T, W = Qw Rw Pw^T  =>  V W^T = Qv (Rv Pv^T Pw Rw^T) Qw^T
    core = Rv[:, np.argsort(pv)] @ Rw[:, np.argsort(pw)].T
    U, s, Zt = sla.svd(core, full_matrices=False)
    total = float(np.sqrt(np.sum(s**2)))
    # tail[k] = Frobenius error when keeping the first k singular triplets
    tail = np.sqrt(np.maximum(np.cumsum((s**2)[::-1])[::-1], 0.0))
    tail = np.append(tail, 0.0)
    keep = next(k for k in range(len(s) + 1) if tail[k] <= tol * total)
    if tol == 0:
        keep = max(keep, int(np.count_nonzero(s)))
    keep = min(keep, f.width)
    root = np.sqrt(s[:keep])
    Vn = Qv @ (U[:, :keep] * root)
    Wn = Qw @ (Zt[:keep].T * root)
    return LowRankFactors(Vn, Wn, (keep,) if keep else ())


def max_singular_value(M, tol=1e-10, max_iter=5000, fallback=False):
    """Largest singular value of ``M`` by power iteration on ``M^T M``.

    The start vector is the normalized all-ones vector, so results are
    reproducible.  Iteration stops once the relative change of the estimate
    drops below ``tol``.  Clustered top singular values make plain power
    iteration slow; with ``fallback=True`` a stalled run is finished by
    Lanczos (``eigsh`` on the Gram operator) started from the last iterate.

    Raises
    ------
    NoConvergence
        If ``max_iter`` iterations pass without meeting ``tol`` and
        ``fallback`` is off.
    """
    n = M.shape[1]
    x = np.full(n, 1.0 / np.sqrt(n))
    Mt = M.T
    y = M @ x
    if not np.any(y):
        x = np.random.default_rng(0).standard_normal(n)
        x /= np.linalg.norm(x)
        y = M @ x
        if not np.any(y):
            raise ValueError("matrix is zero")
    sigma = np.linalg.norm(y)
    for _ in range(max_iter):
        z = Mt @ y
        x = z / np.linalg.norm(z)
        y = M @ x
        new = np.linalg.norm(y)
        if abs(new - sigma) <= tol * new:
            return float(new)
        sigma = new
    if fallback:
        return _lanczos_max_singular(M, x, tol)
    raise NoConvergence(f"power iteration did not reach tol={tol} in {max_iter} iterations (sigma~{sigma:.6g})")


def _lanczos_max_singular(M, x0, tol):
    n = M.shape[1]
    if n <= 2:
        return float(sla.svdvals(to_array(M))[0])
    Mt = M.T
    gram = spla.LinearOperator((n, n), matvec=lambda v: Mt @ (M @ v), dtype=np.float64)
    w = spla.eigsh(gram, k=1, which="LA", v0=x0, tol=tol, return_eigenvectors=False)
    return float(np.sqrt(w[0]))


def min_singular_value(M, tol=1e-10, max_iter=5000):
    """Smallest singular value of a square nonsingular ``M`` by inverse power iteration."""
    n = _square_dim(M)
    if n <= SVD_NORM_LIMIT:
        return float(sla.svdvals(to_array(M))[-1])
    lu = spla.splu(sp.csc_matrix(M)) if sp.issparse(M) else None
    if lu is None:
        raise ValueError("inverse iteration above the SVD limit needs a sparse matrix")
    x = np.full(n, 1.0 / np.sqrt(n))
    sigma = 0.0
    for _ in range(max_iter):
        z = lu.solve(lu.solve(x, trans="T"))
        x = z / np.linalg.norm(z)
        new = 1.0 / np.sqrt(np.linalg.norm(z))
        if abs(new - sigma) <= tol * new:
            break
        sigma = new
    return float(np.linalg.norm(M @ x))


def spectral_norm(M):
    """2-norm of a dense matrix: exact SVD when small, power iteration (tol 1e-8) otherwise."""
    M = np.asarray(M, dtype=np.float64)
    if M.size == 0:
        return 0.0
    if min(M.shape) <= SVD_NORM_LIMIT:
        return float(sla.svdvals(M, check_finite=False)[0])
    if not np.any(M):
        return 0.0
    try:
        return max_singular_value(M, tol=1e-8)
    except NoConvergence:
        # the power estimate is a lower bound that is already accurate to a few digits
        warnings.warn("spectral norm power iteration hit its cap", RuntimeWarning)
        x = np.full(M.shape[1], 1.0 / np.sqrt(M.shape[1]))
        for _ in range(200):
            z = M.T @ (M @ x)
            x = z / np.linalg.norm(z)
        return float(np.linalg.norm(M @ x))


def lowrank_norm(U, Z):
    """``||U @ Z.T||_2`` without forming the product when ``U`` is thin."""
    U = np.asarray(U, dtype=np.float64)
    Z = np.asarray(Z, dtype=np.float64)
    if U.shape[1] != Z.shape[1]:
        raise DimensionMismatch("factor widths differ")
    if U.shape[1] == 0:
        return 0.0
    if U.shape[1] >= min(U.shape[0], Z.shape[0]):
        return spectral_norm(U @ Z.T)
    Ru = np.linalg.qr(U, mode="r")
    Rz = np.linalg.qr(Z, mode="r")
    return spectral_norm(Ru @ Rz.T)
