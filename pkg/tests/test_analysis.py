"""Recovery-condition calculators and the exhaustive cross-check oracle."""

import itertools
import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from cardopt import analysis, core, models, surrogate

import oracles


def _inst(A, b, kind, **kw):
    return core.ProblemInstance(
        A=core.Matrix.from_array(np.asarray(A, float)), b=b, kind=kind, **kw
    )


# ---------------------------------------------------------------------------
# mutual_coherence


def test_mu_orthogonal_columns():
    assert analysis.mutual_coherence(np.eye(4)) == 0.0


def test_mu_hand_computed_three_columns():
    A = np.array([[1.0, 0.0, 2**-0.5], [0.0, 1.0, 2**-0.5]])
    assert analysis.mutual_coherence(A) == pytest.approx(2**-0.5)


def test_mu_duplicated_column():
    A = np.array([[1.0, 2.0, 1.0], [0.0, 1.0, 0.0]])
    assert analysis.mutual_coherence(A) == pytest.approx(1.0)


def test_mu_zero_column_rejected():
    with pytest.raises(ValueError):
        analysis.mutual_coherence(np.array([[1.0, 0.0], [0.0, 0.0]]))


def test_mu_range_and_scale_invariance(rng):
    A = rng.standard_normal((5, 9))
    mu = analysis.mutual_coherence(A)
    assert 0.0 <= mu <= 1.0
    assert analysis.mutual_coherence(A * np.arange(1, 10)) == pytest.approx(mu)


# ---------------------------------------------------------------------------
# spark


def test_spark_identity_has_no_circuit():
    out = analysis.spark(np.eye(4))
    assert out is analysis.NO_CIRCUIT
    assert repr(out) == "NoCircuit"


def test_spark_hand_example():
    assert analysis.spark(np.array([[1.0, 0.0, 1.0], [0.0, 1.0, 1.0]])) == 3


def test_spark_methods_agree_on_generic_wide_matrix(rng):
    A = rng.standard_normal((4, 8))
    # verify (not assume) generic position: every 4-column subset invertible
    for sub in itertools.combinations(range(8), 4):
        assert abs(np.linalg.det(A[:, sub])) > 1e-10
    assert analysis.spark(A, analysis.BruteForce()) == 5
    assert analysis.spark(A, analysis.CoveringBnb()) == 5


def test_spark_duplicate_column_pair(rng):
    col = rng.standard_normal(4)
    A = np.column_stack([col, rng.standard_normal((4, 2)), 3.0 * col])
    assert analysis.spark(A, analysis.BruteForce()) == 2
    assert analysis.spark(A, analysis.CoveringBnb()) == 2


def test_spark_bruteforce_size_limit(rng):
    with pytest.raises(ValueError):
        analysis.spark(rng.standard_normal((3, 23)), analysis.BruteForce())


# ---------------------------------------------------------------------------
# cospark


def test_cospark_identity():
    assert analysis.cospark(np.eye(3)) == 1


def test_cospark_square_invertible(rng):
    q, _ = np.linalg.qr(rng.standard_normal((4, 4)))
    assert analysis.cospark(q) == 1


def test_cospark_zero_row_never_contributes(rng):
    base = rng.standard_normal((4, 2))
    padded = np.vstack([base[:2], np.zeros(2), base[2:]])
    assert analysis.cospark(padded) == analysis.cospark(base)


def test_cospark_matches_zero_pattern_oracle(rng):
    for _ in range(5):
        A = rng.standard_normal((6, 3))
        assert analysis.cospark(A) == oracles.cospark_zero_patterns(A)


def test_cospark_rank_deficiency_rejected(rng):
    col = rng.standard_normal(5)
    with pytest.raises(ValueError):
        analysis.cospark(np.column_stack([col, 2.0 * col]))


# ---------------------------------------------------------------------------
# nsc


def test_nsc_empty_support():
    assert analysis.nsc(np.array([[1.0, 0.0, 1.0], [0.0, 1.0, 1.0]]), 0) == 0.0


def test_nsc_full_support(rng):
    A = rng.standard_normal((2, 5))
    assert analysis.nsc(A, 5) == pytest.approx(1.0)


def test_nsc_single_circuit_by_hand():
    # nullspace spanned by (1, 1, -1): best single coordinate holds 1/3 of the mass
    A = np.array([[1.0, 0.0, 1.0], [0.0, 1.0, 1.0]])
    assert analysis.nsc(A, 1) == pytest.approx(1.0 / 3.0)
    assert analysis.nsc(A, 2) == pytest.approx(2.0 / 3.0)


def test_nsc_matches_sign_enumeration_oracle(rng):
    for _ in range(5):
        A = rng.standard_normal((2, 4))
        for k in (1, 2):
            assert analysis.nsc(A, k) == pytest.approx(
                oracles.nsc_circuit(A, k), abs=1e-8
            )


def test_nsc_size_limit(rng):
    with pytest.raises(ValueError):
        analysis.nsc(rng.standard_normal((2, 17)), 1)


# ---------------------------------------------------------------------------
# ric


def test_ric_orthonormal_columns():
    assert analysis.ric(np.eye(5)[:, :3], 1) == pytest.approx(0.0, abs=1e-12)


def test_ric_nondecreasing_in_k(rng):
    A = rng.standard_normal((6, 8))
    A /= np.linalg.norm(A, axis=0)
    deltas = [analysis.ric(A, k) for k in range(1, 5)]
    assert all(d2 >= d1 - 1e-12 for d1, d2 in zip(deltas, deltas[1:]))


def test_ric_coherence_bound_unit_columns(rng):
    for _ in range(5):
        A = rng.standard_normal((7, 9))
        A /= np.linalg.norm(A, axis=0)
        mu = analysis.mutual_coherence(A)
        for k in (2, 3):
            assert analysis.ric(A, k) <= (k - 1) * mu + 1e-10


def test_ric_direct_eigenvalue_check(rng):
    A = rng.standard_normal((5, 6))
    A /= np.linalg.norm(A, axis=0)
    k = 2
    worst = 0.0
    for sub in itertools.combinations(range(6), k):
        w = np.linalg.eigvalsh(A[:, sub].T @ A[:, sub])
        worst = max(worst, w[-1] - 1.0, 1.0 - w[0])
    assert analysis.ric(A, k) == pytest.approx(worst, abs=1e-10)


# ---------------------------------------------------------------------------
# strong_source_condition


def test_ssc_identity_unit_vector():
    holds, w = analysis.strong_source_condition(np.eye(3), np.array([1.0, 0.0, 0.0]))
    assert holds
    assert_allclose(w, [1.0, 0.0, 0.0], atol=1e-9)


def test_ssc_zero_vector(rng):
    A = rng.standard_normal((3, 6))
    holds, w = analysis.strong_source_condition(A, np.zeros(6))
    assert holds
    assert_allclose(w, np.zeros(3))


def test_ssc_witness_is_a_dual_certificate(rng):
    found = 0
    for _ in range(20):
        A = rng.standard_normal((5, 10))
        x = np.zeros(10)
        x[rng.choice(10, 2, replace=False)] = rng.standard_normal(2) + 0.5
        holds, w = analysis.strong_source_condition(A, x)
        if not holds:
            continue
        found += 1
        g = A.T @ w
        on = np.abs(x) > 0
        assert_allclose(g[on], np.sign(x[on]), atol=1e-8)
        assert np.max(np.abs(g[~on])) < 1.0
    assert found >= 5


def test_ssc_certified_instances_are_bp_unique(rng):
    for _ in range(15):
        A = rng.standard_normal((4, 9))
        x = np.zeros(9)
        x[rng.choice(9, 2, replace=False)] = rng.standard_normal(2) + 0.5
        holds, _ = analysis.strong_source_condition(A, x)
        if holds:
            sol = surrogate.bp_lp(A, A @ x)
            assert_allclose(sol.x, x, atol=1e-8)


def test_ssc_fails_with_dependent_support_columns(rng):
    col = rng.standard_normal(4)
    A = np.column_stack([col, 2.0 * col, rng.standard_normal((4, 3))])
    x = np.array([1.0, 1.0, 0.0, 0.0, 0.0])
    holds, _ = analysis.strong_source_condition(A, x)
    assert not holds  # rank(A_S) < ||x||_0


# ---------------------------------------------------------------------------
# oracle_solve


def test_oracle_single_column_target(rng):
    A = rng.standard_normal((4, 7))
    sol = analysis.oracle_solve(_inst(A, 1.7 * A[:, 5], core.CARDMIN, delta=0.0))
    assert sol.objective == 1.0
    assert sol.support == [5]


_ANCHOR = np.array([[0.0, 1.0], [1.0, 2.0]])


def test_oracle_two_by_two_cardcons_sweep():
    for k, want in ((0, 1.0), (1, 0.8), (2, 0.0)):
        sol = analysis.oracle_solve(_inst(_ANCHOR, [1.0, 0.0], core.CARDCONS, k=k))
        assert sol.objective == pytest.approx(want, abs=1e-12)


def test_oracle_agrees_with_exact_solver(rng):
    A = rng.standard_normal((4, 10))
    x = np.zeros(10)
    x[[2, 7]] = [1.5, -0.5]
    b = A @ x
    insts = [
        _inst(A, b, core.CARDMIN, delta=0.0),
        _inst(A, rng.standard_normal(4), core.CARDCONS, k=2),
        _inst(A, rng.standard_normal(4), core.CARDREG, lam=0.7),
    ]
    for inst in insts:
        a = analysis.oracle_solve(inst)
        m = models.solve_exact(inst, models.SupportBnb()).solution
        assert a.objective == pytest.approx(m.objective, abs=1e-8)


def test_oracle_size_guard(rng):
    with pytest.raises(ValueError):
        analysis.oracle_solve(
            _inst(rng.standard_normal((3, 21)), np.zeros(3), core.CARDMIN, delta=0.0)
        )


# ---------------------------------------------------------------------------
# recovery_report


def test_report_flags_all_pass():
    A = np.array([[1.0, 0.0, 2**-0.5], [0.0, 1.0, 2**-0.5]])
    rep = analysis.recovery_report(A, 1)
    assert rep.mu == pytest.approx(2**-0.5)
    assert rep.spark == 3
    assert rep.conditions == {
        "l0_unique_2k_mu": True,
        "l0l1_equiv_mu": True,
        "nsp_half": True,
        "spark_half": True,
    }


def test_report_flags_all_fail_on_parallel_columns():
    # powers of two keep mu at exactly 1.0, so every strict inequality fails
    A = np.array([[2.0, 1.0, 0.0], [0.0, 0.0, 1.0]])
    rep = analysis.recovery_report(A, 1)
    assert rep.mu == 1.0
    assert rep.spark == 2
    assert not any(rep.conditions.values())


def test_spark_mu_lower_bound(rng):
    for _ in range(10):
        A = rng.standard_normal((4, 8))
        mu = analysis.mutual_coherence(A)
        sp = analysis.spark(A, analysis.BruteForce())
        assert sp is not analysis.NO_CIRCUIT
        assert sp >= math.ceil(1.0 + 1.0 / mu**2)


# ---------------------------------------------------------------------------
# recovery invariants (small-scale versions; the acceptance suite scales up)


def test_nsc_below_half_gives_uniform_bp_recovery(rng):
    k = 2
    for _ in range(50):
        A = rng.standard_normal((6, 8))
        if analysis.nsc(A, k) < 0.5:
            break
    else:
        pytest.fail("no draw satisfied the nullspace condition")
    for supp in itertools.combinations(range(8), k):
        for signs in itertools.product((-1.0, 1.0), repeat=k):
            x = np.zeros(8)
            x[list(supp)] = np.array(signs) * (1.0 + np.arange(k))
            sol = surrogate.bp_lp(A, A @ x)
            assert_allclose(sol.x, x, atol=1e-7)


def test_two_k_below_spark_gives_unique_minimizer(rng):
    for _ in range(8):
        A = rng.standard_normal((5, 9))
        if analysis.spark(A, analysis.BruteForce()) != 6:
            continue  # needs the generic draw; 2k = 4 < 5 would also do
        x = np.zeros(9)
        x[rng.choice(9, 2, replace=False)] = rng.standard_normal(2) + 0.5
        b = A @ x
        sol = analysis.oracle_solve(_inst(A, b, core.CARDMIN, delta=0.0))
        assert sol.objective == 2.0
        card, supports = oracles.optimal_supports_cardmin(A, b)
        assert card == 2
        assert supports == [tuple(sorted(np.nonzero(x)[0].tolist()))]


def test_reg_optimum_solves_induced_problems(rng):
    for _ in range(5):
        A = rng.standard_normal((3, 6))
        b = rng.standard_normal(3)
        reg = analysis.oracle_solve(_inst(A, b, core.CARDREG, lam=0.6))
        card = core.norm(reg.x, "l0", tol=1e-9)
        resid_sq = float(np.sum((A @ reg.x - b) ** 2))
        cons = analysis.oracle_solve(_inst(A, b, core.CARDCONS, k=int(card)))
        assert resid_sq == pytest.approx(cons.objective, abs=1e-8)
        if resid_sq < np.dot(b, b) - 1e-9:
            mini = analysis.oracle_solve(
                _inst(A, b, core.CARDMIN, delta=math.sqrt(resid_sq) + 1e-9)
            )
            assert mini.objective == card


def test_anchor_middle_solution_never_reg_optimal():
    # sweep lam over {0.05, 0.10, ..., 5.00}: the cardinality-1 fit is
    # always strictly beaten by x = 0 or by the exact 2-sparse solution
    for lam in np.arange(1, 101) * 0.05:
        sol = analysis.oracle_solve(_inst(_ANCHOR, [1.0, 0.0], core.CARDREG, lam=lam))
        middle = 1.0 + 0.8 / lam
        assert sol.objective == pytest.approx(min(1.0 / lam, middle, 2.0), abs=1e-12)
        assert sol.objective < middle - 1e-9
