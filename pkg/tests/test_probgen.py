import numpy as np
import pytest

from gadi.care import CareProblem
from gadi.errors import UnknownFamily
from gadi.lyap import LyapProblem
from gadi.probgen import Family, ProblemSpec, generate


def test_lyap251_stencil():
    p = generate(ProblemSpec(Family.LYAP251, 3))
    np.testing.assert_array_equal(p.F.toarray(), [[5, 0.3, 0], [0.2, 5, 0.3], [0, 0.2, 5]])
    np.testing.assert_array_equal(p.C, [[1, 1, 1]])


def test_lyap252_stencil():
    p = generate(ProblemSpec(Family.LYAP252, 3))
    np.testing.assert_array_equal(p.F.toarray(), [[9, 3, 0], [-2, 9, 3], [0, -2, 9]])


def test_care341_stencil():
    p = generate(ProblemSpec(Family.CARE341, 2))
    np.testing.assert_array_equal(p.A.toarray(), [[-12, -3], [2, -12]])
    np.testing.assert_array_equal(p.B, [[0.2], [0.2]])
    np.testing.assert_array_equal(p.C, [[0.1, 0.1]])


def test_care342_pentadiagonal():
    A = generate(ProblemSpec(Family.CARE342, 7)).A.toarray()
    for offset, value in {-2: 1, -1: 2, 0: -12, 1: -3, 2: -2}.items():
        assert np.all(np.diagonal(A, offset) == value)
    assert np.count_nonzero(A) == 7 + 2 * 6 + 2 * 5


@pytest.mark.parametrize("family", list(Family))
def test_generation_is_deterministic(family):
    a = generate(ProblemSpec(family, 12, seed=3))
    b = generate(ProblemSpec(family, 12, seed=3))
    if isinstance(a, LyapProblem):
        assert (a.F != b.F).nnz == 0 and np.array_equal(a.C, b.C)
    else:
        assert (a.A != b.A).nnz == 0 and np.array_equal(a.B, b.B) and np.array_equal(a.C, b.C)


def test_random_family_is_positive_real():
    for seed in range(10):
        p = generate(ProblemSpec(Family.RANDOM_POSITIVE_REAL, 8, seed=seed))
        assert p.is_positive_real()
    assert not np.array_equal(
        generate(ProblemSpec(Family.RANDOM_POSITIVE_REAL, 8, seed=0)).F.toarray(),
        generate(ProblemSpec(Family.RANDOM_POSITIVE_REAL, 8, seed=1)).F.toarray(),
    )


@pytest.mark.parametrize("n", [2, 8, 48])
def test_riccati_families_are_stable(n):
    for family in (Family.CARE341, Family.CARE342, Family.RANDOM_STABLE_CARE):
        p = generate(ProblemSpec(family, n))
        assert isinstance(p, CareProblem) and p.is_stable()


def test_random_shapes():
    p = generate(ProblemSpec("random-care", 10, seed=1, p=3, m=2))
    assert (p.n, p.m, p.p) == (10, 2, 3)


def test_spec_validation():
    with pytest.raises(UnknownFamily):
        ProblemSpec("lyap999", 8)
    with pytest.raises(ValueError):
        ProblemSpec(Family.LYAP251, 1)
    assert Family.CARE342.is_care and not Family.LYAP252.is_care
