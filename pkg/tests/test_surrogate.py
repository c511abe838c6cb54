"""l1 surrogate solvers: BP, l1-regularized LS, homotopy, LASSO, ADMM."""

import numpy as np
import pytest
from numpy.testing import assert_allclose

from cardopt import surrogate
from cardopt.surrogate import SolverOptions

import oracles


def _kkt_residual(A, b, x, lam):
    """Stationarity violation of min lam*||x||_1 + 0.5*||Ax-b||^2."""
    g = A.T @ (b - A @ x)
    worst = 0.0
    for j in range(x.size):
        if abs(x[j]) > 1e-10:
            worst = max(worst, abs(g[j] - lam * np.sign(x[j])))
        else:
            worst = max(worst, max(0.0, abs(g[j]) - lam))
    return worst


# ---------------------------------------------------------------------------
# bp_lp


def test_bp_zero_rhs(rng):
    A = rng.standard_normal((4, 9))
    s = surrogate.bp_lp(A, np.zeros(4))
    assert_allclose(s.x, np.zeros(9))
    assert s.objective == 0.0


def test_bp_identity_measurements():
    b = np.array([1.0, -2.0, 0.5])
    s = surrogate.bp_lp(np.eye(3), b)
    assert_allclose(s.x, b, atol=1e-10)


def test_bp_recovers_one_sparse_under_coherence(rng):
    A, x, b = oracles.mu_compliant_instance(rng, 3, 6, 1)
    s = surrogate.bp_lp(A, b)
    assert_allclose(s.x, x, atol=1e-8)


def test_bp_inconsistent_system():
    A = np.array([[1.0, 1.0], [1.0, 1.0]])
    assert surrogate.bp_lp(A, np.array([1.0, 2.0])).status == "infeasible"


# ---------------------------------------------------------------------------
# l1ls_proxgrad (ISTA / FISTA)


def test_l1ls_zero_above_lambda_max():
    s = surrogate.l1ls_proxgrad(np.eye(2), np.array([3.0, -0.5]), 3.5)
    assert_allclose(s.x, np.zeros(2))


def test_l1ls_identity_soft_threshold():
    s = surrogate.l1ls_proxgrad(np.eye(2), np.array([3.0, -0.5]), 1.0)
    assert_allclose(s.x, [2.0, 0.0], atol=1e-8)
    assert s.objective == pytest.approx(2.0 + 0.5 * (1.0 + 0.25), abs=1e-8)


def test_l1ls_matches_homotopy(rng):
    A = rng.standard_normal((6, 12))
    b = rng.standard_normal(6)
    lam = 0.4 * float(np.max(np.abs(A.T @ b)))
    path = surrogate.homotopy_path(A, b)
    x_h = surrogate.homotopy_solution_at(path, lam)
    obj_h = np.sum(np.abs(x_h)) + np.sum((A @ x_h - b) ** 2) / (2 * lam)
    s = surrogate.l1ls_proxgrad(A, b, lam, SolverOptions(max_iter=20000, tol=1e-12))
    assert s.objective == pytest.approx(obj_h, abs=1e-6)


def test_ista_objective_monotone(rng):
    A = rng.standard_normal((5, 10))
    b = rng.standard_normal(5)
    lam = 0.3 * float(np.max(np.abs(A.T @ b)))
    objs = [
        surrogate.l1ls_proxgrad(A, b, lam, SolverOptions(max_iter=i, tol=1e-16)).objective
        for i in range(1, 40)
    ]
    assert all(a >= b_ - 1e-12 for a, b_ in zip(objs, objs[1:]))


def test_fista_at_least_as_good_as_longer_ista(rng):
    A = rng.standard_normal((8, 16))
    b = rng.standard_normal(8)
    lam = 0.2 * float(np.max(np.abs(A.T @ b)))
    budget = 120
    ista = surrogate.l1ls_proxgrad(A, b, lam, SolverOptions(max_iter=3 * budget, tol=1e-16))
    fista = surrogate.l1ls_proxgrad(
        A, b, lam, SolverOptions(max_iter=budget, tol=1e-16, accelerate=True)
    )
    assert fista.objective <= ista.objective + 1e-8


def test_l1ls_kkt_across_lambdas(rng):
    A = rng.standard_normal((6, 9))
    b = rng.standard_normal(6)
    lam_max = float(np.max(np.abs(A.T @ b)))
    for frac in (0.8, 0.4, 0.15):
        lam = frac * lam_max
        s = surrogate.l1ls_proxgrad(A, b, lam, SolverOptions(max_iter=50000, tol=1e-13))
        assert _kkt_residual(A, b, s.x, lam) <= 1e-6


def test_l1ls_step_rules_agree(rng):
    A = rng.standard_normal((5, 8))
    b = rng.standard_normal(5)
    lam = 0.3 * float(np.max(np.abs(A.T @ b)))
    ref = surrogate.l1ls_proxgrad(A, b, lam, SolverOptions(max_iter=30000, tol=1e-13))
    bt = surrogate.l1ls_proxgrad(
        A, b, lam, SolverOptions(max_iter=30000, tol=1e-13, step_rule="backtracking")
    )
    fixed = surrogate.l1ls_proxgrad(
        A, b, lam,
        SolverOptions(max_iter=30000, tol=1e-13, step_rule=("fixed", 0.3 / np.linalg.norm(A, 2) ** 2)),
    )
    assert bt.objective == pytest.approx(ref.objective, abs=1e-7)
    assert fixed.objective == pytest.approx(ref.objective, abs=1e-7)


# ---------------------------------------------------------------------------
# homotopy


def test_homotopy_one_dimensional_closed_form():
    path = surrogate.homotopy_path(np.array([[1.0]]), np.array([2.0]))
    assert path[0].lam == pytest.approx(2.0)
    assert len(path) == 2  # insertion at lambda_max, endpoint at 0
    assert_allclose(surrogate.homotopy_solution_at(path, 1.0), [1.0])
    assert_allclose(surrogate.homotopy_solution_at(path, 0.5), [1.5])
    assert_allclose(path[-1].x, [2.0])


def test_homotopy_zero_rhs_sentinel():
    path = surrogate.homotopy_path(np.array([[1.0, 0.0]]), np.array([0.0]))
    assert len(path) == 1
    assert path[0].lam == 0.0
    assert_allclose(path[0].x, np.zeros(2))


def test_homotopy_k_step_on_compliant_instance(rng):
    for trial in range(5):
        m, k = (16, 2) if trial % 2 else (64, 4)
        A, x, b = oracles.hadamard_identity_instance(rng, m, k)
        path = surrogate.homotopy_path(A, b)
        sizes = [len(bp.support) for bp in path]
        # k insertions, never a removal, then the flat endpoint
        assert sizes == list(range(1, k + 1)) + [k]
        assert sorted(path[-1].support) == sorted(np.nonzero(x)[0].tolist())
        assert_allclose(path[-1].x, x, atol=1e-8)


def test_homotopy_kkt_at_sampled_lambdas(rng):
    A = rng.standard_normal((7, 14))
    b = rng.standard_normal(7)
    path = surrogate.homotopy_path(A, b)
    lam_max = path[0].lam
    for lam in np.linspace(1e-3 * lam_max, lam_max * 0.999, 20):
        x = surrogate.homotopy_solution_at(path, float(lam))
        assert _kkt_residual(A, b, x, float(lam)) <= 1e-7


def test_homotopy_above_lambda_max_is_zero(rng):
    A = rng.standard_normal((4, 6))
    b = rng.standard_normal(4)
    path = surrogate.homotopy_path(A, b)
    assert_allclose(surrogate.homotopy_solution_at(path, path[0].lam * 2), np.zeros(6))


# ---------------------------------------------------------------------------
# lasso_spg


def test_spg_zero_radius(rng):
    A = rng.standard_normal((5, 8))
    b = rng.standard_normal(5)
    s = surrogate.lasso_spg(A, b, 0.0)
    assert_allclose(s.x, np.zeros(8))
    assert s.objective == pytest.approx(0.5 * np.dot(b, b))


def test_spg_radius_beyond_bp_norm_fits_exactly(rng):
    A = rng.standard_normal((4, 10))
    xs = np.zeros(10)
    xs[[1, 6]] = [1.0, -0.5]
    b = A @ xs
    bp = surrogate.bp_lp(A, b)
    s = surrogate.lasso_spg(A, b, bp.objective * 1.5, SolverOptions(max_iter=20000))
    assert s.objective == pytest.approx(0.0, abs=1e-7)


def test_spg_consistent_with_l1ls(rng):
    A = rng.standard_normal((6, 12))
    b = rng.standard_normal(6)
    lam = 0.3 * float(np.max(np.abs(A.T @ b)))
    reg = surrogate.l1ls_proxgrad(A, b, lam, SolverOptions(max_iter=40000, tol=1e-13))
    tau = float(np.sum(np.abs(reg.x)))
    s = surrogate.lasso_spg(A, b, tau, SolverOptions(max_iter=40000, tol=1e-13))
    assert_allclose(s.x, reg.x, atol=1e-5)


# ---------------------------------------------------------------------------
# bp_admm


def test_admm_zero_rhs(rng):
    A = rng.standard_normal((4, 7))
    assert_allclose(surrogate.bp_admm(A, np.zeros(4)).x, np.zeros(7), atol=1e-10)


def test_admm_identity():
    b = np.array([1.0, -2.0, 0.5])
    assert_allclose(surrogate.bp_admm(np.eye(3), b).x, b, atol=1e-6)


def test_admm_matches_bp_lp(rng):
    A = rng.standard_normal((5, 10))
    xs = np.zeros(10)
    xs[[0, 4, 7]] = [1.0, 2.0, -1.0]
    b = A @ xs
    admm = surrogate.bp_admm(A, b, opts=SolverOptions(max_iter=20000, tol=1e-12))
    ref = surrogate.bp_lp(A, b)
    assert np.sum(np.abs(admm.x)) == pytest.approx(ref.objective, abs=1e-4)
    assert_allclose(A @ admm.x, b, atol=1e-6)


# ---------------------------------------------------------------------------
# param_equivalence


def test_param_equivalence_above_lambda_max():
    tau, delta, x = surrogate.param_equivalence(np.eye(2), np.array([3.0, -0.5]), 4.0)
    assert tau == 0.0
    assert delta == pytest.approx(np.hypot(3.0, 0.5))
    assert_allclose(x, np.zeros(2))


def test_param_equivalence_one_dimensional():
    tau, delta, x = surrogate.param_equivalence(np.array([[1.0]]), np.array([2.0]), 1.0)
    assert tau == pytest.approx(1.0, abs=1e-9)
    assert delta == pytest.approx(1.0, abs=1e-9)
    assert_allclose(x, [1.0], atol=1e-9)


def test_param_equivalence_lasso_reaches_half_delta_sq(rng):
    for trial in range(5):
        A = rng.standard_normal((6, 10))
        b = rng.standard_normal(6)
        lam = 0.35 * float(np.max(np.abs(A.T @ b)))
        tau, delta, _ = surrogate.param_equivalence(A, b, lam)
        s = surrogate.lasso_spg(A, b, tau, SolverOptions(max_iter=40000, tol=1e-13))
        assert s.objective == pytest.approx(0.5 * delta**2, abs=1e-5)


def test_solver_options_validation():
    with pytest.raises(ValueError):
        SolverOptions(max_iter=0)
    with pytest.raises(ValueError):
        SolverOptions(tol=-1.0)
    with pytest.raises(ValueError):
        SolverOptions(step_rule="newton")
