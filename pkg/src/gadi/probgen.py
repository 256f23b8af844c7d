"""Deterministic benchmark problem generators.

The banded families reproduce the test matrices of the numerical examples
exactly; the random families draw strictly diagonally dominant matrices so
their spectra are provably on the required side of the imaginary axis.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .care import CareProblem
from .errors import UnknownFamily
from .lyap import LyapProblem


class Family(str, enum.Enum):
    LYAP251 = "lyap251"
    LYAP252 = "lyap252"
    CARE341 = "care341"
    CARE342 = "care342"
    RANDOM_POSITIVE_REAL = "random"
    RANDOM_STABLE_CARE = "random-care"

    @property
    def is_care(self):
        return self in (Family.CARE341, Family.CARE342, Family.RANDOM_STABLE_CARE)


@dataclass(frozen=True)
class ProblemSpec:
    family: Family
    n: int
    seed: int = 0
    p: int = 1
    m: int = 1

    def __post_init__(self):
        try:
            object.__setattr__(self, "family", Family(self.family))
        except ValueError:
            raise UnknownFamily(f"unknown problem family {self.family!r}") from None
        if self.n < 2:
            raise ValueError(f"n must be at least 2, got {self.n}")


def banded(n, bands):
    """Toeplitz band matrix from ``{offset: value}`` in CSR form."""
    offsets = sorted(bands)
    diags = [np.full(n - abs(k), float(bands[k])) for k in offsets]
    return sp.diags(diags, offsets, shape=(n, n), format="csr")


def random_positive_real(n, seed=0, density=None):
    """Random sparse-ish matrix whose Gershgorin discs lie in ``Re z >= 1``.

    Off-diagonal entries are N(0, 0.25/n) on a random pattern; the diagonal is
    the absolute row sum plus U(1, 2), which makes the matrix strictly
    row diagonally dominant with positive diagonal.
    """
    rng = np.random.default_rng(seed)
    density = min(1.0, 4.0 / n) if density is None else density
    mask = rng.random((n, n)) < density
    F = np.where(mask, rng.standard_normal((n, n)) * 0.5 / np.sqrt(n), 0.0)
    np.fill_diagonal(F, 0.0)
    F[np.diag_indices(n)] = np.abs(F).sum(axis=1) + rng.uniform(1.0, 2.0, n)
    return sp.csr_matrix(F)


def generate(spec):
    """Build the :class:`LyapProblem` or :class:`CareProblem` described by ``spec``."""
    n = spec.n
    fam = spec.family
    if fam is Family.LYAP251:
        return LyapProblem(banded(n, {-1: 0.2, 0: 5.0, 1: 0.3}), np.ones((1, n)))
    if fam is Family.LYAP252:
        return LyapProblem(banded(n, {-1: -2.0, 0: 9.0, 1: 3.0}), np.ones((1, n)))
    if fam is Family.CARE341:
        A = banded(n, {-1: 2.0, 0: -12.0, 1: -3.0})
        return CareProblem(A, np.full((n, 1), 0.2), np.full((1, n), 0.1))
    if fam is Family.CARE342:
        A = banded(n, {-2: 1.0, -1: 2.0, 0: -12.0, 1: -3.0, 2: -2.0})
        return CareProblem(A, np.full((n, 1), 0.2), np.full((1, n), 0.1))
    rng = np.random.default_rng([spec.seed, 1])
    F = random_positive_real(n, spec.seed)
    C = rng.standard_normal((spec.p, n))
    if fam is Family.RANDOM_POSITIVE_REAL:
        return LyapProblem(F, C)
    if fam is Family.RANDOM_STABLE_CARE:
        # O(1) norms for B and C keep the closed-loop term B K^T from swamping A
        B = rng.standard_normal((n, spec.m)) / np.sqrt(n)
        return CareProblem(-F, B, C / np.sqrt(n))
    raise UnknownFamily(f"unknown problem family {fam!r}")
