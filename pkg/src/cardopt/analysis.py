"""Recovery-condition calculators and exhaustive reference solvers.

Everything in this module is deliberately small-scale and certified:
mutual coherence, spark and cospark (minimum circuits of the column
matroid and of its nullspace dual), the order-k nullspace constant, the
restricted isometry constant, a dual-certificate uniqueness test for
basis pursuit, and ``oracle_solve`` -- a support-enumeration solver used
as ground truth for every other solver in the package.

Scale limits are enforced, not advisory: ``nsc``/``ric`` enumerate all
size-k supports (times sign patterns for ``nsc``) and ``oracle_solve``
walks supports by increasing cardinality, so the preconditions are what
keep runtimes sane.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from . import core, models
from .core import ProblemInstance, Solution
from .lp import EQ, LE, LpModel, residual_fit_lp, solve_lp


class NoCircuit:
    """Sentinel for ``spark`` of a matrix with independent columns.

    A distinct type (rather than, say, ``n + 1``) so callers are forced
    to handle the no-dependent-subset case explicitly.
    """

    __slots__ = ()

    def __repr__(self) -> str:
        return "NoCircuit"


NO_CIRCUIT = NoCircuit()


@dataclass(frozen=True)
class BruteForce:
    """Enumerate column subsets by increasing size (n <= 22)."""


@dataclass(frozen=True)
class CoveringBnb:
    """Branch-and-cut on the covering formulation of minimum circuits."""


def mutual_coherence(A) -> float:
    """Largest normalized inner product between two distinct columns."""
    A = core.as_array(A, ndim=2)
    if A.shape[1] == 0:
        return 0.0
    norms = np.linalg.norm(A, axis=0)
    if np.any(norms <= 0.0):
        raise ValueError("mutual coherence is undefined with a zero column")
    G = np.abs((A / norms).T @ (A / norms))
    np.fill_diagonal(G, 0.0)
    return min(float(G.max(initial=0.0)), 1.0)


def spark(A, method=None):
    """Size of the smallest linearly dependent column subset.

    Returns :data:`NO_CIRCUIT` when the columns are linearly independent
    (square or tall full-rank input). ``method`` is :class:`BruteForce`
    (subset enumeration, n <= 22) or :class:`CoveringBnb` (branch-and-cut
    over support indicators); by default the brute-force route is used at
    brute scale and the covering route beyond it.
    """
    A = core.as_array(A, ndim=2)
    n = A.shape[1]
    if method is None:
        method = BruteForce() if n <= 22 else CoveringBnb()
    if isinstance(method, BruteForce):
        if n > 22:
            raise ValueError("brute-force spark is limited to n <= 22")
        return _spark_brute(A)
    if isinstance(method, CoveringBnb):
        return _spark_covering(A)
    raise ValueError(f"unknown spark method {method!r}")


def _spark_brute(A):
    n = A.shape[1]
    r = core.rank_by_elimination(A)
    if r == n:
        return NO_CIRCUIT
    # any r + 1 columns are dependent, so the scan below always lands
    for size in range(1, r + 2):
        for subset in itertools.combinations(range(n), size):
            if core.rank_by_elimination(A[:, subset]) < size:
                return size
    raise AssertionError("no circuit found at rank + 1")


def _spark_covering(A):
    m, n = A.shape
    if min(m, n) == 0:
        return NO_CIRCUIT
    u, s, vt = np.linalg.svd(A)
    r = int(np.sum(s > 1e-9 * max(1.0, float(s[0]))))
    if r == n:
        return NO_CIRCUIT
    # the covering separation needs full row rank; compress to a row
    # basis with the same nullspace (hence the same circuits) first
    rows = A if r == m else vt[:r]
    report = models.solve_spark_covering(rows)
    if report.status != core.OPTIMAL:
        raise RuntimeError(f"covering spark search ended with {report.status!r}")
    return int(round(report.solution.objective))


def cospark(A) -> int:
    """``min ||Ax||_0`` over ``x != 0`` for a full-column-rank ``A``.

    Sparse vectors of the column space are circuits of its orthogonal
    complement: ``y`` lies in the column space iff ``N^T y = 0`` for a
    nullspace basis ``N`` of ``A^T``, so the answer is the spark of
    ``N^T``. Square invertible input short-circuits to 1 (every unit
    vector is reachable).
    """
    A = core.as_array(A, ndim=2)
    m, n = A.shape
    if core.rank_by_elimination(A) < n:
        raise ValueError("cospark reduction requires full column rank")
    if m == n:
        return 1
    u = np.linalg.svd(A)[0]
    result = spark(u[:, n:].T)
    if isinstance(result, NoCircuit):
        raise AssertionError("nullspace dual of a tall matrix has a circuit")
    return result


def nsc(A, k: int) -> float:
    """Order-k nullspace constant: the worst l1 mass a size-k support can
    capture inside the unit-l1 slice of the nullspace.

    Exact via enumeration: for every size-k support S and sign pattern
    on S, one LP maximizes the signed mass ``sum_S sigma_j x_j`` subject
    to ``A(p - q) = 0`` and ``1^T(p + q) = 1`` over the split
    ``x = p - q``. The unsigned objective ``sum_S (p_j + q_j)`` is NOT
    usable: overlapping ``p_j = q_j > 0`` fakes unit mass at ``x = 0``.
    Returns 0 when the nullspace is trivial (every support recovers).
    """
    A = core.as_array(A, ndim=2)
    m, n = A.shape
    if not 0 <= k <= n:
        raise ValueError("k must lie in [0, n]")
    if n > 16:
        raise ValueError("nsc enumeration is limited to n <= 16")
    if k == 0:
        return 0.0
    if core.rank_by_elimination(A) == n:
        return 0.0
    rows = [(np.concatenate([A[i], -A[i]]), EQ, 0.0) for i in range(m)]
    rows.append((np.ones(2 * n), EQ, 1.0))
    bounds = [(0.0, math.inf)] * (2 * n)
    best = 0.0
    for supp in itertools.combinations(range(n), k):
        # sigma and -sigma see mirrored nullspace vectors: pin one sign
        for tail in itertools.product((1.0, -1.0), repeat=k - 1):
            c = np.zeros(2 * n)
            for j, sign in zip(supp, (1.0,) + tail):
                c[j] = -sign
                c[n + j] = sign
            res = solve_lp(LpModel(c, rows, bounds))
            if res.status == "optimal":
                best = max(best, -res.objective)
    return min(best, 1.0)


def ric(A, k: int) -> float:
    """Order-k restricted isometry constant, exact by enumeration.

    Worst deviation of a k-column Gram spectrum from 1; only size-k
    supports are scanned because smaller ones are dominated by
    eigenvalue interlacing.
    """
    A = core.as_array(A, ndim=2)
    n = A.shape[1]
    if not 0 <= k <= n:
        raise ValueError("k must lie in [0, n]")
    if n > 16:
        raise ValueError("ric enumeration is limited to n <= 16")
    worst = 0.0
    for supp in itertools.combinations(range(n), k):
        cols = A[:, supp]
        w = core.eigh_sym(cols.T @ cols)[0]
        worst = max(worst, float(w[0] - 1.0), float(1.0 - w[-1]))
    return worst


def strong_source_condition(A, xhat):
    """Dual-certificate test for uniqueness of the basis pursuit solution.

    Returns ``(holds, w)``. The test passes when the columns of ``A`` on
    the support of ``xhat`` are independent and some ``w`` satisfies
    ``(A^T w)_S = sign(xhat_S)`` with ``|(A^T w)_j| < 1`` off the
    support; the witness LP minimizes the off-support sup-norm, so
    ``holds`` is ``t_opt < 1 - 1e-9`` (an infeasible LP means no valid
    certificate exists). ``w`` is the witness when the test passes,
    otherwise ``None``.
    """
    A = core.as_array(A, ndim=2)
    xhat = core.as_array(xhat, ndim=1)
    m, n = A.shape
    if xhat.size != n:
        raise ValueError("xhat length must match the columns of A")
    supp, card = core.support_of(xhat)
    if card == 0:
        return True, np.zeros(m)
    if core.rank_by_elimination(A[:, supp]) < card:
        return False, None
    in_supp = set(supp)
    c = np.zeros(m + 1)
    c[m] = 1.0
    rows = []
    for j in supp:
        rows.append((np.concatenate([A[:, j], [0.0]]), EQ, float(np.sign(xhat[j]))))
    for j in range(n):
        if j in in_supp:
            continue
        rows.append((np.concatenate([A[:, j], [-1.0]]), LE, 0.0))
        rows.append((np.concatenate([-A[:, j], [-1.0]]), LE, 0.0))
    bounds = [(-math.inf, math.inf)] * m + [(0.0, math.inf)]
    res = solve_lp(LpModel(c, rows, bounds))
    if res.status != "optimal" or res.objective >= 1.0 - 1e-9:
        return False, None
    return True, res.x[:m].copy()


# --------------------------------------------------------------------------
# exhaustive reference solver


_ORACLE_MAX_N = 20
_ORACLE_BUDGET = 2_000_000


def _residual_min(A, b, supp, norm_kind):
    """Best residual norm achievable on a fixed support, plus the point."""
    n = A.shape[1]
    x = np.zeros(n)
    if supp:
        cols = list(supp)
        if norm_kind == "l2":
            x[cols] = np.linalg.lstsq(A[:, cols], b, rcond=None)[0]
        else:
            model, nv = residual_fit_lp(A[:, cols], b, norm_kind)
            res = solve_lp(model)
            if res.status != "optimal":
                return math.inf, x
            x[cols] = res.x[:nv]
    return core.norm(A @ x - b, norm_kind), x


def oracle_solve(inst: ProblemInstance) -> Solution:
    """Certified optimum by support enumeration.

    Ground truth for the branch-and-bound solvers and the heuristics:
    supports are walked in increasing cardinality and each one is solved
    to optimality (restricted least squares for the l2 residual, an LP
    for l1/linf), so the returned solution is a certified global
    optimum. Limited to ``n <= 20`` and two million supports; variable
    boxes are not supported here.
    """
    if inst.n > _ORACLE_MAX_N:
        raise ValueError("oracle_solve is limited to n <= 20")
    if inst.var_bounds is not None:
        raise ValueError("oracle_solve does not handle variable bounds")
    A, b = inst.A.array, inst.b
    n = inst.n
    if inst.kind == core.CARDMIN:
        scale = max(1.0, core.norm(b, inst.residual_norm))
        tol = inst.delta + 1e-9 if inst.delta > 0 else 1e-9 * scale
        for size in range(n + 1):
            for supp in itertools.combinations(range(n), size):
                r, x = _residual_min(A, b, supp, inst.residual_norm)
                if r <= tol:
                    return Solution.from_x(x, core.norm(x, "l0"), core.OPTIMAL)
        raise AssertionError("the full support always fits within delta")
    if inst.kind == core.CARDCONS:
        size = min(inst.k, n)
        if math.comb(n, size) > _ORACLE_BUDGET:
            raise ValueError("oracle_solve enumeration budget exceeded")
        best, best_x = math.inf, np.zeros(n)
        # size-k supports suffice: extra columns never hurt least squares
        for supp in itertools.combinations(range(n), size):
            r, x = _residual_min(A, b, supp, "l2")
            if r * r < best:
                best, best_x = r * r, x
        return Solution.from_x(best_x, best, core.OPTIMAL)
    if 2 ** n > _ORACLE_BUDGET:
        raise ValueError("oracle_solve enumeration budget exceeded")
    best, best_x = math.inf, np.zeros(n)
    for size in range(n + 1):
        if size >= best:
            break
        for supp in itertools.combinations(range(n), size):
            r, x = _residual_min(A, b, supp, "l2")
            obj = size + r * r / inst.lam
            if obj < best:
                best, best_x = obj, x
    return Solution.from_x(best_x, best, core.OPTIMAL)


# --------------------------------------------------------------------------
# condition report


@dataclass
class RecoveryReport:
    """Coherence / spark / NSC / RIC summary with the usual flags.

    ``conditions`` maps flag names to booleans (or ``None`` when the
    underlying quantity was out of enumeration range):

    * ``l0_unique_2k_mu`` -- ``2k < 1 + 1/mu^2``, coherence-based
      uniqueness of every k-sparse representation;
    * ``l0l1_equiv_mu`` -- ``k < (1 + 1/mu)/2``, coherence-based l0/l1
      equivalence;
    * ``nsp_half`` -- ``nsc < 1/2``, uniform recovery via the nullspace
      constant;
    * ``spark_half`` -- ``k < spark/2``, uniqueness of the sparsest
      representation.
    """

    mu: float
    spark: object
    nsc: float | None
    ric: float | None
    conditions: dict


def recovery_report(A, k: int) -> RecoveryReport:
    """Evaluate the standard order-k recovery conditions for ``A``.

    ``nsc``/``ric`` are filled only within their enumeration range
    (n <= 16); the spark route is picked automatically by size.
    """
    A = core.as_array(A, ndim=2)
    n = A.shape[1]
    if not 0 <= k <= n:
        raise ValueError("k must lie in [0, n]")
    mu = mutual_coherence(A)
    sp = spark(A)
    alpha = nsc(A, k) if n <= 16 else None
    delta = ric(A, k) if n <= 16 else None
    inv_mu = math.inf if mu == 0.0 else 1.0 / mu
    sp_val = math.inf if isinstance(sp, NoCircuit) else sp
    conditions = {
        "l0_unique_2k_mu": bool(2 * k < 1.0 + inv_mu ** 2),
        "l0l1_equiv_mu": bool(k < 0.5 * (1.0 + inv_mu)),
        "nsp_half": None if alpha is None else bool(alpha < 0.5),
        "spark_half": bool(k < 0.5 * sp_val),
    }
    return RecoveryReport(mu=mu, spark=sp, nsc=alpha, ric=delta, conditions=conditions)
