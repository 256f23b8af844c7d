import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gadi import oracle
from gadi.care import CareProblem
from gadi.errors import DenseThresholdExceeded, MaxIterations, NotStabilizing, SingularOperator
from gadi.lyap import r1_adi_iterates, r2_adi_iterates
from gadi.matcore import materialize, max_singular_value, min_singular_value
from gadi.probgen import Family, ProblemSpec, generate


@settings(max_examples=30, deadline=None)
@given(n=st.integers(1, 48), m=st.integers(1, 48), seed=st.integers(0, 1000))
def test_vec_round_trip(n, m, seed):
    X = np.random.default_rng(seed).standard_normal((n, m))
    np.testing.assert_array_equal(oracle.unvec(oracle.vec(X), n, m), X)


def test_vec_kronecker_product_rule():
    rng = np.random.default_rng(0)
    for _ in range(5):
        A, X, B = rng.standard_normal((3, 4, 4))
        np.testing.assert_allclose(oracle.vec(A @ X @ B), np.kron(B.T, A) @ oracle.vec(X), atol=1e-12)


def test_kron_solve_examples():
    np.testing.assert_allclose(oracle.lyap_kron_solve(np.diag([2.0, 3.0]), np.eye(2)), np.diag([0.25, 1 / 6]))
    Q = np.random.default_rng(1).standard_normal((4, 4))
    Q = Q + Q.T
    np.testing.assert_allclose(oracle.lyap_kron_solve(np.eye(4), Q), Q / 2, atol=1e-14)


def test_kron_solve_example_251():
    p = generate(ProblemSpec(Family.LYAP251, 8))
    F, Q = p.F.toarray(), p.Q()
    X = oracle.lyap_kron_solve(F, Q)
    assert np.linalg.norm(F.T @ X + X @ F - Q, 2) / np.linalg.norm(Q, 2) <= 1e-11


def test_kron_solution_is_unique_under_reordering():
    p = generate(ProblemSpec(Family.RANDOM_POSITIVE_REAL, 10, seed=2))
    F, Q = p.F.toarray(), p.Q()
    op = oracle.KronOperator.from_matrix(F)
    assert np.isfinite(op.condition_number())
    perm = np.random.default_rng(3).permutation(100)
    x = oracle.vec(oracle.lyap_kron_solve(F, Q))
    # solve the row-permuted system
    y = np.linalg.solve(op.matrix[perm], oracle.vec(Q)[perm])
    np.testing.assert_allclose(y, x, atol=1e-10)


def test_kron_errors():
    with pytest.raises(SingularOperator):
        oracle.lyap_kron_solve(np.diag([1.0, -1.0]), np.eye(2))
    with pytest.raises(DenseThresholdExceeded):
        oracle.KronOperator.from_matrix(np.eye(49))
    with pytest.raises(ValueError):
        oracle.lyap_kron_solve(np.eye(2), np.array([[0.0, 1.0], [0.0, 0.0]]))


def test_adi_scalar_and_shift_collapse():
    assert oracle.adi1_dense(np.array([[1.0]]), np.array([[1.0]]), 1.0, 1)[0, 0] == pytest.approx(0.5)
    p = generate(ProblemSpec(Family.RANDOM_POSITIVE_REAL, 6, seed=4))
    a = 2.0
    for X1, X2 in zip(oracle.adi1_dense(p.F, p.Q(), a, 4, history=True), oracle.adi2_dense(p.F, p.Q(), a, a, 4, history=True)):
        np.testing.assert_allclose(X1, X2, atol=1e-14)


def test_adi_matches_low_rank():
    p = generate(ProblemSpec(Family.RANDOM_POSITIVE_REAL, 8, seed=5))
    a, b = max_singular_value(p.F), min_singular_value(p.F)
    d1 = oracle.adi1_dense(p.F, p.Q(), a, 6, history=True)
    d2 = oracle.adi2_dense(p.F, p.Q(), a, b, 6, history=True)
    for f, X in zip(r1_adi_iterates(p, a), d1):
        np.testing.assert_allclose(materialize(f), X, atol=1e-11)
    for f, X in zip(r2_adi_iterates(p, a, b), d2):
        np.testing.assert_allclose(materialize(f), X, atol=1e-11)


def test_exact_newton_decoupled():
    cp = CareProblem(-np.eye(2), np.zeros((2, 1)), np.array([[1.0, 1.0]]))
    hist = oracle.care_newton_exact(cp, history=True)
    assert len(hist) == 1
    np.testing.assert_allclose(hist[0], np.ones((2, 2)) / 2)


def test_exact_newton_example_341():
    cp = generate(ProblemSpec(Family.CARE341, 8))
    X = oracle.care_newton_exact(cp)
    A, B, Q = cp.A.toarray(), cp.B, cp.Q()
    res = np.linalg.norm(A.T @ X + X @ A + Q - X @ B @ B.T @ X, 2) / np.linalg.norm(Q, 2)
    assert res <= 1e-12
    assert np.all(np.linalg.eigvals(A - B @ B.T @ X).real < 0)


def test_exact_newton_quadratic_tail():
    cp = generate(ProblemSpec(Family.RANDOM_STABLE_CARE, 12, seed=7))
    hist = oracle.care_newton_exact(cp, history=True)
    X = hist[-1]
    errs = [np.linalg.norm(Xk - X, 2) for Xk in hist[:-1]]
    ratios = [e1 / e0**2 for e0, e1 in zip(errs, errs[1:]) if e1 > 1e-12]
    assert ratios and max(ratios) < 100


def test_exact_newton_errors():
    with pytest.raises(NotStabilizing):
        oracle.care_newton_exact(CareProblem(np.eye(2), np.ones((2, 1)), np.ones((1, 2))))
    with pytest.raises(MaxIterations):
        oracle.care_newton_exact(generate(ProblemSpec(Family.RANDOM_STABLE_CARE, 8)), max_iter=1)
