import numpy as np
import pytest

from gadi import oracle
from gadi.care import (
    CareProblem,
    care_residual,
    feedback_change,
    inner_rgadi,
    is_stabilizing,
    kleinman_newton,
    kleinman_newton_dense,
    kn_step_operator,
)
from gadi.errors import DimensionMismatch, MaxOuterIterations, NotStabilizing, ZeroFeedback
from gadi.lyap import Criterion, LyapProblem, SolveOptions, gadi_dense_iterates
from gadi.matcore import materialize, max_singular_value
from gadi.probgen import Family, ProblemSpec, generate


def decoupled():
    # G = 0 turns the Riccati equation into X I + I X = C^T C
    return CareProblem(-np.eye(2), np.zeros((2, 1)), np.array([[1.0, 1.0]]))


def test_step_operator_at_zero_feedback():
    cp = generate(ProblemSpec(Family.CARE341, 6))
    st = kn_step_operator(cp, np.zeros((6, 1)))
    np.testing.assert_array_equal(st.A_k.toarray(), -cp.A.toarray())
    np.testing.assert_array_equal(st.M_k, np.hstack([np.zeros((6, 1)), cp.C.T]))
    np.testing.assert_allclose(st.M_k @ st.M_k.T, cp.Q())


def test_step_operator_arithmetic():
    cp = CareProblem(-np.eye(2), np.array([[1.0], [0.0]]), np.ones((1, 2)))
    st = kn_step_operator(cp, np.array([[1.0], [0.0]]))
    np.testing.assert_allclose(st.A_k.toarray(), [[2.0, 0.0], [0.0, 1.0]])
    assert st.M_k.shape == (2, 2)
    with pytest.raises(DimensionMismatch):
        kn_step_operator(cp, np.ones((3, 1)))


def test_stabilizing_feedback_gives_positive_real_closed_loop():
    cp = generate(ProblemSpec(Family.RANDOM_STABLE_CARE, 8, seed=2))
    K = oracle.care_newton_exact(cp) @ cp.B
    assert is_stabilizing(cp, K)
    assert np.all(np.linalg.eigvals(kn_step_operator(cp, K).A_k.toarray()).real > 0)


def test_inner_first_step_is_exact_for_identity():
    st = kn_step_operator(decoupled(), np.zeros((2, 1)))
    sol = inner_rgadi(st, 1.0, 0.0, SolveOptions(), tol=1e-14)
    assert sol.iterations == 1
    np.testing.assert_allclose(materialize(sol.factors), np.ones((2, 2)) / 2, atol=1e-15)


def test_inner_matches_dense_iterates():
    cp = generate(ProblemSpec(Family.CARE342, 24))
    K = 0.3 * np.ones((24, 1))
    st = kn_step_operator(cp, K)
    a = max_singular_value(st.A_k, fallback=True)
    dense_lp = LyapProblem(st.A_k.toarray(), st.M_k.T)
    seen = []
    inner_rgadi(st, a, 0.015, SolveOptions(tol=0.0, inner_max_iter=6), callback=lambda k, f, r: seen.append(materialize(f)))
    for X_lr, X in zip(seen, gadi_dense_iterates(dense_lp, a, 0.015)):
        assert np.linalg.norm(X_lr - X) <= 1e-10


def test_inner_sweeps_on_example_341():
    sol = kleinman_newton(generate(ProblemSpec(Family.CARE341, 128)))
    assert max(sol.inner_iterations) <= 10


def test_decoupled_problem_one_outer_step():
    sol = kleinman_newton(decoupled(), opts=SolveOptions(omega=0.0))
    assert sol.outer_iterations == 1
    np.testing.assert_allclose(sol.solution(), np.ones((2, 2)) / 2, atol=1e-15)
    np.testing.assert_array_equal(sol.K, np.zeros((2, 1)))
    assert care_residual(decoupled(), sol.solution()) <= 1e-15


@pytest.mark.parametrize("family", [Family.CARE341, Family.CARE342])
def test_matches_exact_newton(family):
    cp = generate(ProblemSpec(family, 8))
    sol = kleinman_newton(cp)
    assert np.linalg.norm(sol.solution() - oracle.care_newton_exact(cp)) <= 1e-9


def test_converged_solution_properties():
    cp = generate(ProblemSpec(Family.RANDOM_STABLE_CARE, 32, seed=1, m=2, p=2))
    sol = kleinman_newton(cp)
    X = sol.solution()
    assert sol.converged and sol.residual_history[-1] < 1e-12
    assert np.linalg.norm(X - X.T) <= 1e-8 * np.linalg.norm(X)
    np.testing.assert_allclose(sol.K, X @ cp.B, atol=1e-14)
    assert np.all(np.linalg.eigvals(cp.A.toarray() - cp.B @ cp.B.T @ X).real < 0)
    assert len(sol.inner_iterations) == sol.outer_iterations == len(sol.residual_history)


def test_residual_examples():
    cp = generate(ProblemSpec(Family.CARE341, 8))
    assert care_residual(cp, oracle.care_newton_exact(cp)) <= 1e-10
    assert care_residual(cp, np.zeros((8, 8))) == 1.0


def test_factored_residual_matches_dense():
    cp = generate(ProblemSpec(Family.RANDOM_STABLE_CARE, 32, seed=3))
    st = kn_step_operator(cp, np.zeros((32, 1)))
    f = inner_rgadi(st, opts=SolveOptions(inner_max_iter=3), tol=0.0).factors
    assert abs(care_residual(cp, f, dense_threshold=8) - care_residual(cp, f)) <= 1e-10


def test_feedback_change_examples():
    K = np.array([[1.0], [2.0]])
    assert feedback_change(K, K) == 0.0
    assert feedback_change(2 * K, K) == pytest.approx(0.5)
    with pytest.raises(ZeroFeedback):
        feedback_change(np.zeros((2, 1)), K)
    with pytest.raises(DimensionMismatch):
        feedback_change(K, np.ones((3, 1)))


def test_feedback_sequence_decreases():
    cp = generate(ProblemSpec(Family.CARE341, 16))
    sol = kleinman_newton(cp, opts=SolveOptions(criterion=Criterion.FEEDBACK_CHANGE))
    tail = sol.residual_history[1:]
    assert sol.converged
    assert all(b < a for a, b in zip(tail, tail[1:]))


def test_feedback_criterion_falls_back_when_feedback_is_zero():
    sol = kleinman_newton(decoupled(), opts=SolveOptions(criterion="feedback", omega=0.0))
    assert sol.converged and sol.outer_iterations == 1


def test_not_stabilizing_initial_feedback():
    unstable = CareProblem(np.eye(3), np.ones((3, 1)), np.ones((1, 3)))
    with pytest.raises(NotStabilizing):
        kleinman_newton(unstable)


def test_unstable_problem_with_stabilizing_feedback():
    A = np.array([[1.0, 0.0], [0.0, -1.0]])
    cp = CareProblem(A, np.array([[1.0], [0.0]]), np.eye(2))
    sol = kleinman_newton(cp, K0=np.array([[3.0], [0.0]]))
    assert sol.converged
    np.testing.assert_allclose(sol.solution(), oracle.care_newton_exact(cp, K0=np.array([[3.0], [0.0]])), atol=1e-9)


def test_max_outer_iterations_carries_partial_solution():
    with pytest.raises(MaxOuterIterations) as info:
        kleinman_newton(generate(ProblemSpec(Family.CARE341, 16)), opts=SolveOptions(max_iter=1))
    assert info.value.solution.outer_iterations == 1


def test_dense_variant_with_and_without_warm_start():
    cp = generate(ProblemSpec(Family.CARE342, 16))
    X = oracle.care_newton_exact(cp)
    for warm in (True, False):
        sol = kleinman_newton_dense(cp, warm_start=warm)
        assert sol.converged and np.linalg.norm(sol.solution() - X) <= 1e-9


def test_linear_forcing_also_converges():
    sol = kleinman_newton(generate(ProblemSpec(Family.CARE341, 64)), opts=SolveOptions(inner_forcing="linear"))
    assert sol.converged and sol.residual_history[-1] < 1e-12
