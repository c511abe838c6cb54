"""Exact formulations and solvers for the cardinality problem classes.

Three exact routes, all driven by the :mod:`.bnb` engine:

* big-M mixed-integer models (``build_bigm_cardmin`` + ``solve_exact`` with
  :class:`BigM`), with per-variable bound helpers ``ellipsoid_bounds`` and
  ``tighten_bounds``;
* a covering integer program over binary support indicators with greedy
  matroid separation (:class:`Covering`, ``separate_covering_cut``), also
  usable to compute the spark of a matrix (``solve_spark_covering``);
* direct branching on support membership with least-squares node bounds
  (:class:`SupportBnb`), the only route that handles all three problem
  kinds.

A portfolio-selection MIQP with long/short position indicators rounds out
the module (``PortfolioInstance`` / ``solve_portfolio``), including the
reduced-rank covariance preprocessing ``reduced_rank``.

Implementation notes. The big-M search for the equality-residual case with
a scalar M solves its node relaxations in a reduced variable space (the
binaries are eliminated analytically; the split positive/negative parts
carry cost 1/M), which is equivalent to the full relaxation but far
smaller; vector bounds and inequality residuals fall back to the generic
MILP adapter on the full model. Portfolio node bounds combine a concave
separable over-estimator of the linear term (a continuous knapsack) with
Frank-Wolfe linearization gaps on small instances; leaves are solved by an
accelerated projected-gradient method and certified by a single
linear-minimization gap evaluation.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from . import bnb, core, lp
from .bnb import BnbConfig, SolveReport
from .core import Matrix, ProblemInstance, Solution
from .heuristics import omp
from .lp import EQ, GE, LE, LpModel, solve_lp

INT_TOL = 1e-6
FEAS_EPS = 1e-9
RANK_TOL = 1e-9


@dataclass(frozen=True)
class Covering:
    """Covering-IP route (CardMin with equality residual)."""


@dataclass(frozen=True)
class SupportBnb:
    """Support-membership branching (all kinds, l2 residual)."""


@dataclass(frozen=True)
class BigM:
    """Big-M MILP route; ``M`` is a scalar or a ``(lo, hi)`` bound pair."""

    M: object = None


@dataclass
class MilpModel:
    """An LP base model plus a set of binary columns.

    Binary columns must carry bounds inside ``[0, 1]``; dropping the
    integrality requirement yields the LP relaxation ``base``.
    """

    base: LpModel
    integral: list

    def __post_init__(self):
        if not isinstance(self.base, LpModel):
            self.base = LpModel(*self.base)
        cols, seen = [], set()
        for j in self.integral:
            j = int(j)
            if not 0 <= j < self.base.n or j in seen:
                raise ValueError("integral column indices must be unique and in range")
            seen.add(j)
            lo, hi = self.base.bounds[j]
            if lo < -1e-12 or hi > 1.0 + 1e-12:
                raise ValueError("binary columns must have bounds inside [0, 1]")
            cols.append(j)
        self.integral = sorted(cols)


# --------------------------------------------------------------------------
# generic MILP branch and bound


class _MilpNode:
    __slots__ = ("fixed", "relax")

    def __init__(self, fixed):
        self.fixed = fixed  # column -> 0.0 / 1.0
        self.relax = None


class _MilpAdapter:
    """bnb adapter solving LP relaxations with branched bound fixings."""

    def __init__(self, model: MilpModel, warm: Solution | None = None,
                 objective_is_integral: bool = False):
        self.model = model
        self.warm = warm
        self.objective_is_integral = objective_is_integral

    def root(self):
        return _MilpNode({})

    def _relax(self, node):
        if node.relax is None:
            base = self.model.base
            bounds = list(base.bounds)
            for j, v in node.fixed.items():
                bounds[j] = (v, v)
            node.relax = solve_lp(LpModel(base.c.copy(), list(base.rows), bounds))
        return node.relax

    def lower_bound(self, node):
        res = self._relax(node)
        if res.status == "infeasible":
            return math.inf
        if res.status == "unbounded":
            return -math.inf
        return res.objective

    def _branch_col(self, node):
        res = self._relax(node)
        if res.x is None:
            return None
        best, best_j = None, None
        for j in self.model.integral:
            v = float(res.x[j])
            if abs(v - round(v)) <= INT_TOL:
                continue
            score = abs(v - 0.5)
            if best is None or score < best - 1e-15:
                best, best_j = score, j
        return best_j

    def branch(self, node):
        res = self._relax(node)
        if res.status == "infeasible":
            return []
        if res.status == "unbounded":
            unfixed = [j for j in self.model.integral if j not in node.fixed]
            if not unfixed:
                return []
            j, near = unfixed[0], 0.0
        else:
            j = self._branch_col(node)
            if j is None:
                return []
            near = 1.0 if res.x[j] >= 0.5 else 0.0
        children = []
        for val in (near, 1.0 - near):
            fixed = dict(node.fixed)
            fixed[j] = val
            children.append(_MilpNode(fixed))
        return children

    def incumbent_check(self, node):
        best = None
        if self.warm is not None:
            best, self.warm = self.warm, None
        res = self._relax(node)
        if res.status == "optimal" and self._branch_col(node) is None:
            x = res.x.copy()
            for j in self.model.integral:
                x[j] = round(x[j])
            cand = Solution.from_x(x, float(self.model.base.c @ x), core.FEASIBLE)
            if best is None or cand.objective < best.objective:
                best = cand
        return best


def solve_milp(model: MilpModel, config: BnbConfig | None = None,
               warm: Solution | None = None,
               objective_is_integral: bool = False) -> SolveReport:
    """Branch and bound over the binary columns of ``model``.

    ``warm`` (a feasible solution in model coordinates) seeds the
    incumbent; ``objective_is_integral`` enables ceil-rounded node bounds.
    """
    adapter = _MilpAdapter(model, warm=warm, objective_is_integral=objective_is_integral)
    return bnb.run(adapter, config)


# --------------------------------------------------------------------------
# big-M construction and variable-bound helpers


def _bigm_box(inst: ProblemInstance, M):
    """Normalize ``M`` into per-variable ``(lo, hi)`` arrays."""
    n = inst.n
    if M is None:
        raise ValueError("the big-M route needs explicit variable bounds")
    if np.isscalar(M):
        M = float(M)
        if not (M > 0 and math.isfinite(M)):
            raise ValueError("scalar M must be positive and finite")
        lo, hi = np.full(n, -M), np.full(n, M)
    else:
        lo = core.as_array(M[0], ndim=1).copy()
        hi = core.as_array(M[1], ndim=1).copy()
        if lo.size != n or hi.size != n:
            raise ValueError("bound arrays must have length n")
        if np.any(lo > hi):
            raise ValueError("variable bounds with lo > hi")
        if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
            raise ValueError("big-M bounds must be finite (tighten_bounds "
                             "reported an unbounded coordinate?)")
    if inst.var_bounds is not None:
        lo = np.maximum(lo, inst.var_bounds[0])
        hi = np.minimum(hi, inst.var_bounds[1])
    return lo, hi


def build_bigm_cardmin(inst: ProblemInstance, M) -> MilpModel:
    """Big-M MILP for CardMin: minimize the sum of support indicators.

    Variable layout: ``x`` (n), then for the l1 residual the per-row
    auxiliaries ``t`` (m), then the binaries ``y`` (n). Rows: the
    measurement encoding first (equality rows for delta = 0; split
    absolute-value rows plus the budget row for l1; two-sided rows for
    linf), then per variable the pair ``x_j - hi_j y_j <= 0`` and
    ``x_j - lo_j y_j >= 0``. An l2 residual with delta > 0 is not
    linearly representable and is rejected.
    """
    if inst.kind != core.CARDMIN:
        raise ValueError("big-M construction applies to CardMin instances")
    if inst.delta > 0 and inst.residual_norm == "l2":
        raise ValueError("l2 residual with delta > 0 is not LP-representable")
    lo, hi = _bigm_box(inst, M)
    A, b = inst.A.array, inst.b
    m, n = inst.m, inst.n
    n_aux = m if (inst.delta > 0 and inst.residual_norm == "l1") else 0
    nvar = n + n_aux + n
    y0 = n + n_aux

    rows = []
    if inst.delta == 0:
        for i in range(m):
            e = np.zeros(nvar)
            e[:n] = A[i]
            rows.append((e, EQ, b[i]))
    elif inst.residual_norm == "l1":
        for i in range(m):
            e = np.zeros(nvar)
            e[:n] = A[i]
            e[n + i] = -1.0
            rows.append((e, LE, b[i]))
            e2 = np.zeros(nvar)
            e2[:n] = -A[i]
            e2[n + i] = -1.0
            rows.append((e2, LE, -b[i]))
        e = np.zeros(nvar)
        e[n : n + m] = 1.0
        rows.append((e, LE, inst.delta))
    else:  # linf
        for i in range(m):
            e = np.zeros(nvar)
            e[:n] = A[i]
            rows.append((e, LE, b[i] + inst.delta))
            e2 = np.zeros(nvar)
            e2[:n] = A[i]
            rows.append((e2, GE, b[i] - inst.delta))
    for j in range(n):
        e = np.zeros(nvar)
        e[j] = 1.0
        e[y0 + j] = -hi[j]
        rows.append((e, LE, 0.0))
        e2 = np.zeros(nvar)
        e2[j] = 1.0
        e2[y0 + j] = -lo[j]
        rows.append((e2, GE, 0.0))

    c = np.zeros(nvar)
    c[y0:] = 1.0
    bounds = [(min(lo[j], 0.0), max(hi[j], 0.0)) for j in range(n)]
    bounds += [(0.0, inst.delta)] * n_aux
    bounds += [(0.0, 1.0)] * n
    return MilpModel(LpModel(c, rows, bounds), list(range(y0, nvar)))


def ellipsoid_bounds(Q, center, eps):
    """Tight per-coordinate bounds of ``{x : (x-center)' Q (x-center) <= eps}``.

    ``lo_i = center_i - sqrt(eps * (Q^-1)_ii)`` and symmetrically for the
    upper bound. Requires positive definite ``Q`` (a singular direction
    would let the set extend infinitely).
    """
    Q = core.as_array(Q, ndim=2)
    center = core.as_array(center, ndim=1)
    if eps <= 0:
        raise ValueError("eps must be positive")
    w, V = core.eigh_sym(Q)
    if w[-1] <= 1e-10:
        raise ValueError("Q must be positive definite")
    inv_diag = np.sum(V**2 / w, axis=1)
    spread = np.sqrt(eps * inv_diag)
    return center - spread, center + spread


def tighten_bounds(inst: ProblemInstance, M0=1.0, growth=2.0):
    """Per-variable bounds valid for every solution with at most m nonzeros.

    The feasible set is a union of affine pieces, one per size-m support
    ``S``: ``{x : supp(x) subset of S, A_S x_S = b}``. On each piece a
    coordinate is either constant (determined by the pseudoinverse
    solution) or unbounded in both directions (the piece has a null
    direction touching it), so the exact per-coordinate extremes come
    from enumerating the pieces; coordinates touched by a null direction
    of any feasible piece are reported as ``+-inf`` rather than guessed
    at. Working boxes (``M0``, ``growth``) only seed the reported box
    when a coordinate has no feasible piece at all.

    Desk scale: the support enumeration is ``C(n, m)``; oversized inputs
    are rejected.
    """
    if inst.kind != core.CARDMIN or inst.delta != 0:
        raise ValueError("bound tightening applies to equality-residual CardMin")
    if M0 <= 0:
        raise ValueError("M0 must be positive")
    if growth <= 1:
        raise ValueError("growth must exceed 1")
    A, b = inst.A.array, np.asarray(inst.b, float)
    m, n = A.shape
    if core.rank_by_elimination(A) < m:
        raise ValueError("full row rank required")
    size = min(m, n)
    if math.comb(n, size) > 500_000:
        raise ValueError("bound tightening enumerates supports; instance too large")

    tol = 1e-8 * max(1.0, float(np.linalg.norm(b)))
    lo = np.full(n, math.inf)
    hi = np.full(n, -math.inf)
    for supp in itertools.combinations(range(n), size):
        sub = A[:, supp]
        coef, _, rank, sv = np.linalg.lstsq(sub, b, rcond=None)
        if float(np.linalg.norm(sub @ coef - b)) > tol:
            continue  # b not reachable on this piece
        vals = np.zeros(n)
        vals[list(supp)] = coef
        if rank < size:
            # null directions of the piece: touched coordinates are free
            _, _, vt = np.linalg.svd(sub)
            null_rows = np.max(np.abs(vt[rank:]), axis=0)
            for idx, j in enumerate(supp):
                if null_rows[idx] > 1e-9:
                    lo[j], hi[j] = -math.inf, math.inf
        lo = np.minimum(lo, vals)
        hi = np.maximum(hi, vals)
    # a coordinate with no feasible piece keeps the seeded working box
    unset = lo > hi
    lo[unset], hi[unset] = -M0, M0
    return lo, hi


# --------------------------------------------------------------------------
# covering formulation


class _SpanTracker:
    """Incremental column span via an orthonormal basis."""

    def __init__(self, m, tol=RANK_TOL):
        self.Q = np.zeros((m, 0))
        self.tol = tol

    def _residual(self, col):
        r = col - self.Q @ (self.Q.T @ col)
        return r - self.Q @ (self.Q.T @ r)  # re-orthogonalize once

    def contains(self, col) -> bool:
        r = self._residual(col)
        return float(np.linalg.norm(r)) <= self.tol * max(1.0, float(np.linalg.norm(col)))

    def try_add(self, col) -> bool:
        r = self._residual(col)
        nr = float(np.linalg.norm(r))
        if nr <= self.tol * max(1.0, float(np.linalg.norm(col))):
            return False
        self.Q = np.column_stack([self.Q, r / nr])
        return True

    @property
    def rank(self) -> int:
        return self.Q.shape[1]


def separate_covering_cut(A, y, b=None):
    """Greedy matroid separation for support-covering inequalities.

    Builds a maximum-``y``-weight basis ``B`` of the columns of ``A``
    (with the column ``-b`` forced in first when ``b`` is given) by the
    matroid greedy — sort by ``y`` descending, ties to the lowest index,
    keep independent columns. Returns the sorted complement of ``B`` as a
    cut (``sum of y over it >= 1``) iff the candidate violates it by more
    than 1e-7, else ``None``.
    """
    A = core.as_array(A, ndim=2)
    y = core.as_array(y, ndim=1)
    m, n = A.shape
    if y.size != n:
        raise ValueError("y must have one entry per column")
    if core.rank_by_elimination(A) < m:
        raise ValueError("full row rank required")
    span = _SpanTracker(m)
    if b is not None:
        b = core.as_array(b, ndim=1)
        if np.any(b != 0.0):
            span.try_add(-b)
    basis = set()
    for j in np.argsort(-y, kind="stable"):
        if span.rank == m:
            break
        if span.try_add(A[:, j]):
            basis.add(int(j))
    comp = sorted(set(range(n)) - basis)
    if float(np.sum(y[comp])) < 1.0 - 1e-7:
        return comp
    return None


def _support_feasible(A, b, cols) -> bool:
    """Exact test for ``b`` in the span of the chosen columns."""
    sub = A[:, cols]
    return core.rank_by_elimination(np.column_stack([sub, b])) == core.rank_by_elimination(sub)


class _CovNode:
    __slots__ = ("fixed", "pool_len", "relax", "start")

    def __init__(self, fixed, start=None):
        self.fixed = fixed
        self.pool_len = -1
        self.relax = None
        self.start = start  # warm-start hint for the node's first relaxation


class _CoveringAdapter:
    """Covering IP over support indicators with lazy greedy cuts.

    ``b`` given: minimum support carrying ``b`` (CardMin with equality
    residual). ``b`` omitted: minimum dependent column set (spark). Both
    start from the always-valid full cut (any feasible support is
    nonempty). Integral candidates are verified by exact rank tests, and
    rejected ones contribute a no-good cut over the complement of a
    maximal infeasible (resp. independent) extension of their support.
    """

    objective_is_integral = True

    def __init__(self, A, b=None, warm: Solution | None = None):
        self.A = core.as_array(A, ndim=2)
        self.b = None if b is None else core.as_array(b, ndim=1)
        self.m, self.n = self.A.shape
        self.pool = [tuple(range(self.n))]
        self.pool_set = {tuple(range(self.n))}
        self.warm = warm

    def root(self):
        return _CovNode({})

    def _relax(self, node):
        if node.relax is None or node.pool_len != len(self.pool):
            c = np.ones(self.n)
            rows = []
            for cut in self.pool:
                e = np.zeros(self.n)
                e[list(cut)] = 1.0
                rows.append((e, GE, 1.0))
            bounds = [(0.0, 1.0)] * self.n
            for j, v in node.fixed.items():
                bounds[j] = (v, v)
            # warm start: the node's previous optimum (valid for every cut
            # but the newest), else the parent's, else all-ones (feasible
            # for any cut pool); y=0 would put phase 1 through a massively
            # degenerate crawl on big pools
            if node.relax is not None and node.relax.x is not None:
                x0 = node.relax.x
            elif node.start is not None:
                x0 = node.start
            else:
                x0 = np.ones(self.n)
            node.relax = solve_lp(LpModel(c, rows, bounds), x0=x0)
            node.pool_len = len(self.pool)
        return node.relax

    def lower_bound(self, node):
        res = self._relax(node)
        return math.inf if res.status != "optimal" else res.objective

    def _fractional(self, node):
        res = self._relax(node)
        if res.x is None:
            return None
        best, best_j = None, None
        for j in range(self.n):
            v = float(res.x[j])
            if abs(v - round(v)) <= INT_TOL:
                continue
            score = abs(v - 0.5)
            if best is None or score < best - 1e-15:
                best, best_j = score, j
        return best_j

    def _integral_support(self, node):
        res = self._relax(node)
        return [j for j in range(self.n) if res.x[j] > 1.0 - INT_TOL]

    def _support_ok(self, cols) -> bool:
        if self.b is not None:
            return _support_feasible(self.A, self.b, cols)
        return core.rank_by_elimination(self.A[:, cols]) < len(cols)

    def _nogood_cut(self, support):
        """Complement cut of a maximal extension that stays rejected."""
        span = _SpanTracker(self.m)
        grown = set(support)
        for j in support:
            span.try_add(self.A[:, j])
        if self.b is not None:
            # extend while b stays outside the span
            b_res = self.b - span.Q @ (span.Q.T @ self.b)
            for j in range(self.n):
                if j in grown:
                    continue
                col = self.A[:, j]
                r = span._residual(col)
                nr = float(np.linalg.norm(r))
                if nr <= RANK_TOL * max(1.0, float(np.linalg.norm(col))):
                    grown.add(j)  # adds nothing to the span
                    continue
                q = r / nr
                drop = float(q @ b_res)
                if float(np.linalg.norm(b_res - drop * q)) > RANK_TOL * max(
                    1.0, float(np.linalg.norm(self.b))
                ):
                    span.Q = np.column_stack([span.Q, q])
                    b_res = b_res - drop * q
                    grown.add(j)
        else:
            # extend the independent set to a basis
            for j in range(self.n):
                if j not in grown and span.rank < self.m:
                    if span.try_add(self.A[:, j]):
                        grown.add(j)
        return tuple(sorted(set(range(self.n)) - grown))

    def separate(self, node):
        res = self._relax(node)
        if res.status != "optimal":
            return None
        if self._fractional(node) is None:
            support = self._integral_support(node)
            if self._support_ok(support):
                return None
            cut = self._nogood_cut(support)
        else:
            cut = separate_covering_cut(self.A, res.x, self.b)
            cut = None if cut is None else tuple(cut)
        if cut is None or not cut or cut in self.pool_set:
            return None
        self.pool.append(cut)
        self.pool_set.add(cut)
        return cut

    def branch(self, node):
        res = self._relax(node)
        if res.status != "optimal":
            return []
        j = self._fractional(node)
        if j is None:
            support = self._integral_support(node)
            if self._support_ok(support):
                return []  # genuine leaf; incumbent_check picks it up
            j = next((i for i in support if i not in node.fixed), None)
            if j is None:
                return []  # fully fixed and rejected: dead end
            near = 1.0
        else:
            near = 1.0 if res.x[j] >= 0.5 else 0.0
        children = []
        for val in (near, 1.0 - near):
            fixed = dict(node.fixed)
            fixed[j] = val
            start = res.x.copy()
            start[j] = val
            children.append(_CovNode(fixed, start=start))
        return children

    def incumbent_check(self, node):
        best = None
        if self.warm is not None:
            best, self.warm = self.warm, None
        res = self._relax(node)
        if res.status == "optimal" and self._fractional(node) is None:
            support = self._integral_support(node)
            cand = None
            if support and self._support_ok(support):
                if self.b is not None:
                    coef, *_ = np.linalg.lstsq(self.A[:, support], self.b, rcond=None)
                    x = np.zeros(self.n)
                    x[support] = coef
                    cand = Solution.from_x(x, core.norm(x, "l0"), core.FEASIBLE)
                else:
                    sub = self.A[:, support]
                    _, _, vt = np.linalg.svd(sub)
                    v = vt[-1]
                    x = np.zeros(self.n)
                    x[support] = v
                    supp2, card2 = core.support_of(x)
                    if card2 < len(support) and card2 > 0 and self._support_ok(supp2):
                        cand = Solution.from_x(x, float(card2), core.FEASIBLE)
                    else:
                        cand = Solution(x=x, objective=float(len(support)),
                                        support=list(support),
                                        cardinality=len(support), status=core.FEASIBLE)
            if cand is not None and (best is None or cand.objective < best.objective):
                best = cand
        return best


def solve_spark_covering(A, config: BnbConfig | None = None) -> SolveReport:
    """Minimum dependent column set of ``A`` via the covering IP.

    Infeasible status means every column subset is independent (no
    circuit exists).
    """
    return bnb.run(_CoveringAdapter(core.as_array(A, ndim=2)), config)


# --------------------------------------------------------------------------
# warm starts


def _omp_warm_cardmin(inst: ProblemInstance, allowed=None) -> Solution | None:
    """A rank- or residual-verified greedy solution, or None."""
    A, b = inst.A.array, inst.b
    cols = list(range(inst.n)) if allowed is None else list(allowed)
    cols = [j for j in cols if float(np.linalg.norm(A[:, j])) > 0]
    if not cols:
        return None
    scale = max(1.0, float(np.linalg.norm(b)))
    target = inst.delta if inst.delta > 0 else FEAS_EPS * scale
    try:
        sol, _ = omp(A[:, cols], b, delta=target)
    except (ValueError, np.linalg.LinAlgError):
        return None
    support = [cols[j] for j in sol.support]
    if inst.delta == 0:
        x = np.zeros(inst.n)
        if support:
            if not _support_feasible(A, b, support):
                return None
            x[support] = np.linalg.lstsq(A[:, support], b, rcond=None)[0]
        elif float(np.linalg.norm(b)) > FEAS_EPS * scale:
            return None
        return Solution.from_x(x, core.norm(x, "l0"), core.FEASIBLE)
    # inequality residual: refit on the support in the instance norm
    x = np.zeros(inst.n)
    if support:
        if inst.residual_norm == "l2":
            x[support] = np.linalg.lstsq(A[:, support], b, rcond=None)[0]
        else:
            model, nx = lp.residual_fit_lp(A[:, support], b, inst.residual_norm)
            res = solve_lp(model)
            if res.status != "optimal":
                return None
            x[support] = res.x[:nx]
    if inst.residual_value(x) <= inst.delta + FEAS_EPS:
        return Solution.from_x(x, core.norm(x, "l0"), core.FEASIBLE)
    return None


# --------------------------------------------------------------------------
# reduced big-M search (equality residual, scalar M)


class _BigmNode:
    __slots__ = ("fix1", "fix0", "relax")

    def __init__(self, fix1, fix0):
        self.fix1 = fix1
        self.fix0 = fix0
        self.relax = None


class _BigmAdapter:
    """Big-M CardMin search in the reduced split-variable space.

    The LP relaxation of the full model always sets ``y_j = |x_j| / M``
    for unfixed binaries, so the relaxation is equivalent to minimizing
    ``|fixed-to-1| + sum |x_j| / M`` over ``Ax = b`` with ``|x| <= M`` —
    an LP in split parts ``x = p - q`` with m rows instead of m + 2n.
    """

    objective_is_integral = True

    def __init__(self, inst: ProblemInstance, M: float, warm: Solution | None):
        self.A, self.b = inst.A.array, inst.b
        self.m, self.n = self.A.shape
        self.M = float(M)
        lo = np.full(self.n, -self.M)
        hi = np.full(self.n, self.M)
        if inst.var_bounds is not None:
            lo = np.maximum(lo, inst.var_bounds[0])
            hi = np.minimum(hi, inst.var_bounds[1])
        self.p_hi = np.maximum(hi, 0.0)
        self.q_hi = np.maximum(-lo, 0.0)
        self.warm = warm

    def root(self):
        return _BigmNode(frozenset(), frozenset())

    def _relax(self, node):
        if node.relax is None:
            n = self.n
            c = np.zeros(2 * n)
            free = [j for j in range(n) if j not in node.fix1 and j not in node.fix0]
            c[free] = 1.0 / self.M
            c[[n + j for j in free]] = 1.0 / self.M
            rows = []
            for i in range(self.m):
                e = np.concatenate([self.A[i], -self.A[i]])
                rows.append((e, EQ, self.b[i]))
            bounds = [(0.0, self.p_hi[j]) for j in range(n)]
            bounds += [(0.0, self.q_hi[j]) for j in range(n)]
            for j in node.fix0:
                bounds[j] = (0.0, 0.0)
                bounds[n + j] = (0.0, 0.0)
            node.relax = solve_lp(LpModel(c, rows, bounds))
        return node.relax

    def _y_values(self, node):
        res = self._relax(node)
        x_abs = res.x[: self.n] + res.x[self.n :]
        y = x_abs / self.M
        for j in node.fix1:
            y[j] = 1.0
        for j in node.fix0:
            y[j] = 0.0
        return y

    def lower_bound(self, node):
        res = self._relax(node)
        if res.status != "optimal":
            return math.inf  # bounded by construction, so never unbounded
        return res.objective + len(node.fix1)

    def _branch_col(self, node):
        y = self._y_values(node)
        best, best_j = None, None
        for j in range(self.n):
            if j in node.fix1 or j in node.fix0:
                continue
            if abs(y[j] - round(y[j])) <= INT_TOL:
                continue
            score = abs(y[j] - 0.5)
            if best is None or score < best - 1e-15:
                best, best_j = score, j
        return best_j

    def branch(self, node):
        res = self._relax(node)
        if res.status != "optimal":
            return []
        j = self._branch_col(node)
        if j is None:
            return []
        up_first = self._y_values(node)[j] >= 0.5
        up = _BigmNode(node.fix1 | {j}, node.fix0)
        down = _BigmNode(node.fix1, node.fix0 | {j})
        return [up, down] if up_first else [down, up]

    def incumbent_check(self, node):
        best = None
        if self.warm is not None:
            best, self.warm = self.warm, None
        res = self._relax(node)
        if res.status == "optimal" and self._branch_col(node) is None:
            x = res.x[: self.n] - res.x[self.n :]
            cand = Solution.from_x(x, core.norm(x, "l0"), core.FEASIBLE)
            if best is None or cand.objective < best.objective:
                best = cand
        return best


# --------------------------------------------------------------------------
# support branching


class _SupNode:
    __slots__ = ("s_in", "s_out", "bound", "xrel", "leaf")

    def __init__(self, s_in, s_out):
        self.s_in = s_in
        self.s_out = s_out
        self.bound = None
        self.xrel = None
        self.leaf = None  # (x, value) cached at leaves


def _lstsq_fit(A, b, cols):
    """Exact least squares on the chosen columns: (x_cols, residual^2)."""
    if not cols:
        return np.zeros(0), float(b @ b)
    sub = A[:, cols]
    coef, *_ = np.linalg.lstsq(sub, b, rcond=None)
    r = b - sub @ coef
    return coef, float(r @ r)


class _SupportAdapter:
    """Branch on support membership; bound by least squares.

    Node = (forced-nonzero set, forced-zero set). Bounds use the exact
    minimum residual over the allowed columns — a relaxation for every
    kind — plus kind-specific cardinality terms; see ``lower_bound``.
    """

    def __init__(self, inst: ProblemInstance):
        if inst.residual_norm != "l2":
            raise ValueError("support branching requires the l2 residual")
        self.inst = inst
        self.A, self.b = inst.A.array, inst.b
        self.kind = inst.kind
        self.objective_is_integral = inst.kind == core.CARDMIN
        self.bnorm = max(1.0, float(np.linalg.norm(inst.b)))

    def root(self):
        return _SupNode(frozenset(), frozenset())

    def _allowed(self, node):
        return [j for j in range(self.inst.n) if j not in node.s_out]

    def _feasible_cols(self, cols) -> bool:
        if self.inst.delta == 0:
            if not cols:
                return float(np.linalg.norm(self.b)) <= FEAS_EPS * self.bnorm
            return _support_feasible(self.A, self.b, cols)
        _, r2 = _lstsq_fit(self.A, self.b, cols)
        return math.sqrt(max(r2, 0.0)) <= self.inst.delta + FEAS_EPS

    def lower_bound(self, node):
        if node.bound is not None:
            return node.bound
        inst = self.inst
        allowed = self._allowed(node)
        k_in = len(node.s_in)
        if self.kind == core.CARDMIN:
            if not self._feasible_cols(allowed):
                node.bound = math.inf
                return node.bound
            node.xrel = _lstsq_fit(self.A, self.b, allowed)[0]
            s_cols = sorted(node.s_in)
            if self._feasible_cols(s_cols):
                x = self._refit(s_cols)
                if self._point_feasible(x):
                    # nothing below this node beats the refit; close it
                    node.leaf = (x, core.norm(x, "l0"))
                node.bound = float(k_in)
            else:
                node.bound = float(k_in + 1)
            return node.bound
        if self.kind == core.CARDCONS:
            if k_in > inst.k:
                node.bound = math.inf
                return node.bound
            if k_in == inst.k or len(allowed) == k_in:
                cols = sorted(node.s_in)
                coef, r2 = _lstsq_fit(self.A, self.b, cols)
                x = np.zeros(inst.n)
                if cols:
                    x[cols] = coef
                node.leaf = (x, r2)
                node.bound = r2
                return node.bound
            coef, r2 = _lstsq_fit(self.A, self.b, allowed)
            node.xrel = coef
            node.bound = r2
            return node.bound
        # cardreg
        coef, r2 = _lstsq_fit(self.A, self.b, allowed)
        node.xrel = coef
        node.bound = k_in + r2 / inst.lam
        if len(allowed) == k_in:
            cols = sorted(node.s_in)
            x = np.zeros(inst.n)
            if cols:
                x[cols] = coef if cols == allowed else _lstsq_fit(self.A, self.b, cols)[0]
            node.leaf = (x, float(inst.objective(x)))
        return node.bound

    def branch(self, node):
        if node.bound is None:
            self.lower_bound(node)
        if not math.isfinite(node.bound) or node.leaf is not None:
            return []
        allowed = self._allowed(node)
        undecided = [j for j in allowed if j not in node.s_in]
        if not undecided:
            return []
        scores = dict(zip(allowed, np.abs(node.xrel))) if node.xrel is not None else {}
        j = max(undecided, key=lambda i: (scores.get(i, 0.0), -i))
        return [
            _SupNode(node.s_in | {j}, node.s_out),
            _SupNode(node.s_in, node.s_out | {j}),
        ]

    def _refit(self, cols):
        x = np.zeros(self.inst.n)
        if cols:
            x[cols] = _lstsq_fit(self.A, self.b, cols)[0]
        return x

    def incumbent_check(self, node):
        if node.bound is None:
            self.lower_bound(node)
        if not math.isfinite(node.bound):
            return None
        inst = self.inst
        if node.leaf is not None:
            x, val = node.leaf
            return Solution.from_x(x, val, core.FEASIBLE)
        if self.kind == core.CARDMIN:
            if not node.s_in and not node.s_out:  # root: greedy warm start
                return _omp_warm_cardmin(inst)
            return None
        allowed = self._allowed(node)
        scores = dict(zip(allowed, np.abs(node.xrel)))
        order = sorted(allowed, key=lambda i: (-scores[i], i))
        if self.kind == core.CARDCONS:
            cols = sorted(order[: inst.k])
            x = self._refit(cols)
            return Solution.from_x(x, float(inst.objective(x)), core.FEASIBLE)
        best = None
        for size in range(min(inst.m, len(order)) + 1):
            x = self._refit(sorted(order[:size]))
            val = float(inst.objective(x))
            if best is None or val < best.objective:
                best = Solution.from_x(x, val, core.FEASIBLE)
        return best

    def _point_feasible(self, x) -> bool:
        if self.inst.delta == 0:
            return float(np.linalg.norm(self.A @ x - self.b)) <= FEAS_EPS * self.bnorm
        return self.inst.residual_value(x) <= self.inst.delta + FEAS_EPS


# --------------------------------------------------------------------------
# exact-solve dispatch


def _trivial_report(inst: ProblemInstance) -> SolveReport:
    x = np.zeros(inst.n)
    sol = Solution.from_x(x, float(inst.objective(x)), core.OPTIMAL)
    return SolveReport(solution=sol, lower_bound=sol.objective, gap=0.0,
                       nodes_processed=0, cuts_added=0, status=core.OPTIMAL)


def solve_exact(inst: ProblemInstance, method, config: BnbConfig | None = None) -> SolveReport:
    """Certified solve of ``inst`` with the chosen exact method.

    ``SupportBnb()`` handles all three kinds (l2 residual); ``Covering()``
    and ``BigM(M)`` handle CardMin — covering needs the equality residual,
    big-M additionally accepts l1/linf residual balls.
    """
    if isinstance(method, SupportBnb):
        return bnb.run(_SupportAdapter(inst), config)
    if isinstance(method, Covering):
        if inst.kind != core.CARDMIN or inst.delta != 0:
            raise ValueError("the covering route requires equality-residual CardMin")
        if not np.any(inst.b != 0.0):
            return _trivial_report(inst)
        if core.rank_by_elimination(inst.A.array) < inst.m:
            raise ValueError("full row rank required")
        warm = _omp_warm_cardmin(inst)
        return bnb.run(_CoveringAdapter(inst.A.array, inst.b, warm=warm), config)
    if isinstance(method, BigM):
        if inst.kind != core.CARDMIN:
            raise ValueError("the big-M route requires CardMin")
        if method.M is None:
            raise ValueError("BigM needs an explicit M")
        warm = _omp_warm_cardmin(inst)
        if inst.delta == 0 and np.isscalar(method.M):
            M = float(method.M)
            if not (M > 0 and math.isfinite(M)):
                raise ValueError("scalar M must be positive and finite")
            if warm is not None and float(np.max(np.abs(warm.x), initial=0.0)) > M:
                warm = None
            rep = bnb.run(_BigmAdapter(inst, M, warm), config)
        else:
            model = build_bigm_cardmin(inst, method.M)
            rep = bnb.run(
                _MilpAdapter(model, warm=_embed_bigm_warm(inst, model, warm),
                             objective_is_integral=True),
                config,
            )
            if rep.solution is not None:
                x = rep.solution.x[: inst.n]
                rep.solution = Solution.from_x(x, core.norm(x, "l0"),
                                               rep.solution.status)
        return rep
    raise ValueError(f"unknown exact method {method!r}")


def _embed_bigm_warm(inst, model: MilpModel, warm: Solution | None):
    """Lift an n-space warm start into full big-M model coordinates."""
    if warm is None:
        return None
    n, nvar = inst.n, model.base.n
    x = np.zeros(nvar)
    x[:n] = warm.x
    y0 = nvar - n
    for j in warm.support:
        x[y0 + j] = 1.0
    if y0 > n:  # l1 residual auxiliaries
        x[n:y0] = np.abs(inst.A.array @ warm.x - inst.b)
    for j in range(n):
        lo, hi = model.base.bounds[j]
        if not lo - 1e-12 <= x[j] <= hi + 1e-12:
            return None
    return Solution(x=x, objective=float(warm.cardinality),
                    support=list(warm.support), cardinality=warm.cardinality,
                    status=core.FEASIBLE)


# --------------------------------------------------------------------------
# portfolio MIQP


@dataclass
class PortfolioInstance:
    """Cardinality-limited long/short mean-variance selection.

    Objective ``lam * x' Q x - mu' x`` over positions ``x = x+ - x-``
    where each asset is long (``theta_plus_j <= x+_j <= u_plus_j``),
    short (likewise with the minus data), or neutral (``x_j = 0``), at
    most ``k`` assets are non-neutral, and the gross exposures satisfy
    ``Lp <= sum x+ <= Up`` and ``Lm <= sum x- <= Um``. ``H`` selects the
    reduced-rank covariance surrogate; ``x0`` (initial positions) is
    carried for reporting but no turnover constraints are imposed.
    """

    Q: Matrix
    mu: np.ndarray
    lam: float
    k: int
    theta_plus: np.ndarray
    theta_minus: np.ndarray
    u_plus: np.ndarray
    u_minus: np.ndarray
    exposure: tuple
    x0: np.ndarray | None = None
    H: int | None = None

    def __post_init__(self):
        if not isinstance(self.Q, Matrix):
            self.Q = Matrix.from_array(self.Q)
        n = self.Q.cols
        if self.Q.rows != n:
            raise ValueError("Q must be square")
        w, _ = core.eigh_sym(self.Q.array)
        if w[-1] < -1e-8:
            raise ValueError("Q must be positive semidefinite")
        self.mu = core.as_array(self.mu, ndim=1)
        if self.mu.size != n:
            raise ValueError("mu must have length n")
        if self.lam <= 0:
            raise ValueError("lam must be positive")
        if not 0 <= int(self.k) <= n:
            raise ValueError("k must lie in [0, n]")
        self.k = int(self.k)
        for name in ("theta_plus", "theta_minus", "u_plus", "u_minus"):
            setattr(self, name, core.as_array(getattr(self, name), ndim=1))
            if getattr(self, name).size != n:
                raise ValueError(f"{name} must have length n")
        if np.any(self.theta_plus < 0) or np.any(self.theta_minus < 0):
            raise ValueError("thresholds must be nonnegative")
        if np.any(self.theta_plus > self.u_plus) or np.any(self.theta_minus > self.u_minus):
            raise ValueError("thresholds must not exceed the position caps")
        lp_, up_, lm_, um_ = (float(v) for v in self.exposure)
        if not (0 <= lp_ <= up_ and 0 <= lm_ <= um_):
            raise ValueError("exposure intervals must satisfy 0 <= L <= U")
        self.exposure = (lp_, up_, lm_, um_)
        if self.x0 is not None:
            self.x0 = core.as_array(self.x0, ndim=1)
            if self.x0.size != n:
                raise ValueError("x0 must have length n")
        if self.H is not None and not 1 <= int(self.H) <= n:
            raise ValueError("H must lie in [1, n]")

    @property
    def n(self) -> int:
        return self.Q.cols


@dataclass
class ReducedRank:
    """Spectral truncation of a covariance: top eigenpairs plus residuals."""

    omegas: np.ndarray
    V_H: np.ndarray  # H x n; row i is the i-th eigenvector
    rho: np.ndarray

    def dense(self) -> np.ndarray:
        return self.V_H.T @ (self.omegas[:, None] * self.V_H) + np.diag(self.rho)


def reduced_rank(Q, H: int) -> ReducedRank:
    """Top-``H`` spectral truncation with diagonal residual make-up.

    Residuals ``rho_j = Q_jj - sum_i omega_i v_ij^2`` are the variance
    mass outside the kept eigenspace; for PSD input they are nonnegative,
    and values within 1e-10 of zero are clipped to exactly zero.
    """
    Q = core.as_array(Q, ndim=2)
    n = Q.shape[0]
    if not 0 <= int(H) <= n:
        raise ValueError("H must lie in [0, n]")
    H = int(H)
    w, V = core.eigh_sym(Q)
    omegas = w[:H].copy()
    V_H = V[:, :H].T.copy()
    rho = np.diag(Q) - (omegas[:, None] * V_H**2).sum(axis=0)
    if np.any(rho < -1e-10):
        raise ValueError("negative residual variance: Q is not PSD")
    rho = np.where(np.abs(rho) <= 1e-10, 0.0, rho)
    return ReducedRank(omegas=omegas, V_H=V_H, rho=rho)


def _portfolio_quadratic(p: PortfolioInstance) -> np.ndarray:
    """The PSD quadratic actually optimized (reduced-rank when H is set)."""
    if p.H is not None:
        return reduced_rank(p.Q.array, p.H).dense()
    w, V = core.eigh_sym(p.Q.array)
    return V @ (np.maximum(w, 0.0)[:, None] * V.T)


def _greedy_linear_max(gain, caps, budget):
    """max gain't over 0 <= t <= caps, sum t <= budget (continuous greedy)."""
    t = np.zeros(gain.size)
    rem = float(budget)
    for j in np.argsort(-gain, kind="stable"):
        if gain[j] <= 0 or rem <= 0:
            break
        t[j] = min(float(caps[j]), rem)
        rem -= t[j]
    taken = t > 0  # avoid 0 * -inf on excluded assets
    return float(gain[taken] @ t[taken]), t


def _box_sum_project(v, lo, hi, lo_sum, hi_sum):
    """Project onto ``{lo <= x <= hi, lo_sum <= sum x <= hi_sum}``."""
    x = np.clip(v, lo, hi)
    s = float(x.sum())
    if lo_sum - 1e-14 <= s <= hi_sum + 1e-14:
        return x
    target = lo_sum if s < lo_sum else hi_sum
    t_lo = float(np.min(lo - v)) - 1.0
    t_hi = float(np.max(hi - v)) + 1.0
    for _ in range(100):
        t = 0.5 * (t_lo + t_hi)
        if float(np.clip(v + t, lo, hi).sum()) < target:
            t_lo = t
        else:
            t_hi = t
    return np.clip(v + t_hi, lo, hi)


LONG, SHORT, NEUTRAL = 1, -1, 0


class _PortNode:
    __slots__ = ("decided", "parent_bound", "bound", "xguess", "leaf")

    def __init__(self, decided, parent_bound):
        self.decided = decided  # asset -> LONG / SHORT / NEUTRAL
        self.parent_bound = parent_bound
        self.bound = None
        self.xguess = None
        self.leaf = None  # (value, x) cached at decided leaves


class _PortfolioAdapter:
    """Three-way branching (long / short / neutral) on asset roles."""

    objective_is_integral = False

    def __init__(self, p: PortfolioInstance):
        self.p = p
        self.Qt = _portfolio_quadratic(p)
        self.rows, self.base_bounds = self._polytope_rows()
        self.fw_everywhere = p.n <= 3

    # objective over raw positions
    def _f(self, x):
        return float(self.p.lam * (x @ self.Qt @ x) - self.p.mu @ x)

    def _grad(self, x):
        return 2.0 * self.p.lam * (self.Qt @ x) - self.p.mu

    def _polytope_rows(self):
        p, n = self.p, self.p.n
        nv = 4 * n  # x+, x-, y, z
        rows = []
        for j in range(n):
            e = np.zeros(nv)
            e[j] = 1.0
            e[2 * n + j] = -p.u_plus[j]
            rows.append((e, LE, 0.0))
            e = np.zeros(nv)
            e[j] = -1.0
            e[2 * n + j] = p.theta_plus[j]
            rows.append((e, LE, 0.0))
            e = np.zeros(nv)
            e[n + j] = 1.0
            e[3 * n + j] = -p.u_minus[j]
            rows.append((e, LE, 0.0))
            e = np.zeros(nv)
            e[n + j] = -1.0
            e[3 * n + j] = p.theta_minus[j]
            rows.append((e, LE, 0.0))
            e = np.zeros(nv)
            e[2 * n + j] = 1.0
            e[3 * n + j] = 1.0
            rows.append((e, LE, 1.0))
        e = np.zeros(nv)
        e[2 * n :] = 1.0
        rows.append((e, LE, float(p.k)))
        lp_, up_, lm_, um_ = p.exposure
        e = np.zeros(nv)
        e[:n] = 1.0
        rows.append((e, LE, up_))
        rows.append((-e, LE, -lp_))
        e = np.zeros(nv)
        e[n : 2 * n] = 1.0
        rows.append((e, LE, um_))
        rows.append((-e, LE, -lm_))
        bounds = [(0.0, float(v)) for v in p.u_plus]
        bounds += [(0.0, float(v)) for v in p.u_minus]
        bounds += [(0.0, 1.0)] * (2 * n)
        return rows, bounds

    def _node_bounds(self, node):
        n = self.p.n
        bounds = list(self.base_bounds)
        for j, role in node.decided.items():
            ybnd = (1.0, 1.0) if role == LONG else (0.0, 0.0)
            zbnd = (1.0, 1.0) if role == SHORT else (0.0, 0.0)
            bounds[2 * n + j] = ybnd
            bounds[3 * n + j] = zbnd
            if role != LONG:
                bounds[j] = (0.0, 0.0)
            if role != SHORT:
                bounds[n + j] = (0.0, 0.0)
        return bounds

    def _quick_infeasible(self, node) -> bool:
        p = self.p
        longs = [j for j, r in node.decided.items() if r == LONG]
        shorts = [j for j, r in node.decided.items() if r == SHORT]
        if len(longs) + len(shorts) > p.k:
            return True
        lp_, up_, lm_, um_ = p.exposure
        undecided = [j for j in range(p.n) if j not in node.decided]
        if float(np.sum(p.theta_plus[longs])) > up_ + 1e-12:
            return True
        if float(np.sum(p.u_plus[longs]) + np.sum(p.u_plus[undecided])) < lp_ - 1e-12:
            return True
        if float(np.sum(p.theta_minus[shorts])) > um_ + 1e-12:
            return True
        if float(np.sum(p.u_minus[shorts]) + np.sum(p.u_minus[undecided])) < lm_ - 1e-12:
            return True
        return False

    def _knapsack_bound(self, node):
        """PSD floor on the quadratic minus the best achievable return."""
        p = self.p
        neutral = {j for j, r in node.decided.items() if r == NEUTRAL}
        long_ok = np.array([j not in neutral and node.decided.get(j) != SHORT
                            for j in range(p.n)])
        short_ok = np.array([j not in neutral and node.decided.get(j) != LONG
                             for j in range(p.n)])
        lp_, up_, lm_, um_ = p.exposure
        gain_plus, tp = _greedy_linear_max(
            np.where(long_ok, p.mu, -np.inf), p.u_plus, up_)
        gain_minus, tm = _greedy_linear_max(
            np.where(short_ok, -p.mu, -np.inf), p.u_minus, um_)
        node.xguess = tp - tm
        return -(gain_plus + gain_minus)

    def _fw_bound(self, node, budget=40, gap_goal=1e-4):
        n = self.p.n
        bounds = self._node_bounds(node)
        zero = np.zeros(4 * n)
        start = solve_lp(LpModel(zero, self.rows, bounds))
        if start.status != "optimal":
            return math.inf
        cur = start.x.copy()
        best = -math.inf
        for _ in range(budget):
            v = cur[:n] - cur[n : 2 * n]
            f = self._f(v)
            g = self._grad(v)
            c = np.concatenate([g, -g, np.zeros(2 * n)])
            lmo = solve_lp(LpModel(c, self.rows, bounds))
            if lmo.status != "optimal":
                break
            gap = float(c @ (cur - lmo.x))
            best = max(best, f - max(gap, 0.0))
            if gap <= gap_goal * max(1.0, abs(f)):
                break
            d = lmo.x - cur
            dv = d[:n] - d[n : 2 * n]
            a = self.p.lam * float(dv @ self.Qt @ dv)
            step = 1.0 if a <= 1e-18 else min(1.0, max(0.0, gap / (2.0 * a)))
            cur = cur + step * d
        node.xguess = cur[:n] - cur[n : 2 * n]
        return best

    def _solve_leaf(self, node):
        """(value, x, certified_gap) for a fully decided node, or None."""
        p = self.p
        longs = sorted(j for j, r in node.decided.items() if r == LONG)
        shorts = sorted(j for j, r in node.decided.items() if r == SHORT)
        lp_, up_, lm_, um_ = p.exposure
        groups = [
            (longs, p.theta_plus[longs], p.u_plus[longs], lp_, up_),
            (shorts, p.theta_minus[shorts], p.u_minus[shorts], lm_, um_),
        ]
        for idx, glo, ghi, gl, gu in groups:
            if not idx:
                if gl > 1e-12:
                    return None
                continue
            if float(glo.sum()) > gu + 1e-12 or float(ghi.sum()) < gl - 1e-12:
                return None
        nl = len(longs)
        dim = nl + len(shorts)
        if dim == 0:
            return 0.0, np.zeros(p.n), 0.0
        E = np.zeros((p.n, dim))
        for i, j in enumerate(longs):
            E[j, i] = 1.0
        for i, j in enumerate(shorts):
            E[j, nl + i] = -1.0
        P = 2.0 * p.lam * (E.T @ self.Qt @ E)
        c = -(E.T @ p.mu)
        lo = np.concatenate([p.theta_plus[longs], p.theta_minus[shorts]])
        hi = np.concatenate([p.u_plus[longs], p.u_minus[shorts]])

        def project(u):
            out = u.copy()
            if nl:
                out[:nl] = _box_sum_project(u[:nl], lo[:nl], hi[:nl], lp_, up_)
            if dim > nl:
                out[nl:] = _box_sum_project(u[nl:], lo[nl:], hi[nl:], lm_, um_)
            return out

        w, _ = core.eigh_sym(0.5 * (P + P.T))
        L = max(float(w[0]), 1e-12)
        u = project(0.5 * (lo + hi))
        yv, t = u.copy(), 1.0
        fval = 0.5 * float(u @ P @ u) + float(c @ u)
        for _ in range(5000):
            g = P @ yv + c
            u_new = project(yv - g / L)
            f_new = 0.5 * float(u_new @ P @ u_new) + float(c @ u_new)
            if f_new > fval + 1e-15:  # restart the momentum
                yv, t = u, 1.0
                continue
            t_new = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * t * t))
            yv = u_new + ((t - 1.0) / t_new) * (u_new - u)
            moved = float(np.max(np.abs(u_new - u)))
            u, t, fval = u_new, t_new, f_new
            if moved <= 1e-13 * max(1.0, float(np.max(np.abs(u)))):
                break
        # certify with one linear-minimization gap evaluation
        g = P @ u + c
        rows = []
        if nl:
            e = np.zeros(dim)
            e[:nl] = 1.0
            rows.append((e, LE, up_))
            rows.append((-e, LE, -lp_))
        if dim > nl:
            e = np.zeros(dim)
            e[nl:] = 1.0
            rows.append((e, LE, um_))
            rows.append((-e, LE, -lm_))
        lmo = solve_lp(LpModel(g, rows, list(zip(lo, hi))))
        gap = float(g @ (u - lmo.x)) if lmo.status == "optimal" else math.inf
        x = E @ u
        return self._f(x), x, max(gap, 0.0)

    def root(self):
        return _PortNode({}, -math.inf)

    def lower_bound(self, node):
        if node.bound is not None:
            return node.bound
        if self._quick_infeasible(node):
            node.bound = math.inf
            return node.bound
        undecided = [j for j in range(self.p.n) if j not in node.decided]
        if not undecided:
            leaf = self._solve_leaf(node)
            if leaf is None:
                node.bound = math.inf
            else:
                val, x, gap = leaf
                node.leaf = (val, x)
                node.bound = max(node.parent_bound, val - gap)
            return node.bound
        cand = [node.parent_bound, self._knapsack_bound(node)]
        if self.fw_everywhere or (len(node.decided) <= 1 and 4 * self.p.n <= 48):
            cand.append(self._fw_bound(node))
        node.bound = max(cand)
        return node.bound

    def branch(self, node):
        if node.bound is None:
            self.lower_bound(node)
        if not math.isfinite(node.bound) or node.leaf is not None:
            return []
        p = self.p
        undecided = [j for j in range(p.n) if j not in node.decided]
        if not undecided:
            return []
        used = sum(1 for r in node.decided.values() if r != NEUTRAL)
        if used >= p.k:
            decided = dict(node.decided)
            for j in undecided:
                decided[j] = NEUTRAL
            return [_PortNode(decided, node.bound)]
        guess = node.xguess if node.xguess is not None else np.zeros(p.n)
        j = max(undecided, key=lambda i: (abs(float(guess[i])), -i))
        children = []
        roles = [LONG, SHORT, NEUTRAL]
        for role in roles:
            if role == SHORT and p.u_minus[j] == 0.0:
                continue
            if role == LONG and p.u_plus[j] == 0.0:
                continue
            decided = dict(node.decided)
            decided[j] = role
            children.append(_PortNode(decided, node.bound))
        return children

    def _heuristic(self):
        p = self.p
        if p.k == 0:
            node = _PortNode({j: NEUTRAL for j in range(p.n)}, -math.inf)
        else:
            order = sorted(range(p.n), key=lambda j: (-abs(float(p.mu[j])), j))
            decided = {}
            for j in order[: p.k]:
                if p.mu[j] < 0 and p.u_minus[j] > 0:
                    decided[j] = SHORT
                else:
                    decided[j] = LONG
            for j in order[p.k :]:
                decided[j] = NEUTRAL
            node = _PortNode(decided, -math.inf)
        leaf = self._solve_leaf(node)
        if leaf is None:
            return None
        val, x, _ = leaf
        return Solution.from_x(x, val, core.FEASIBLE)

    def incumbent_check(self, node):
        if node.leaf is not None:
            val, x = node.leaf
            return Solution.from_x(x, val, core.FEASIBLE)
        if not node.decided:  # root: seed with a greedy fixing
            return self._heuristic()
        return None


def solve_portfolio(p: PortfolioInstance, config: BnbConfig | None = None) -> SolveReport:
    """Branch and bound over long/short/neutral roles; see the module notes."""
    return bnb.run(_PortfolioAdapter(p), config)


# --------------------------------------------------------------------------
# LP-file export


def _fmt(v: float) -> str:
    return "%.12g" % float(v)


def _expr(coeffs, names) -> str:
    parts = []
    for c, name in zip(coeffs, names):
        if c == 0.0:
            continue
        if not parts:
            parts.append(f"{_fmt(c)} {name}" if c > 0 else f"- {_fmt(-c)} {name}")
        elif c > 0:
            parts.append(f"+ {_fmt(c)} {name}")
        else:
            parts.append(f"- {_fmt(-c)} {name}")
    return " ".join(parts) if parts else "0"


def export_lp_file(model) -> str:
    """Render a (MI)LP model in the conventional LP text format.

    Sections Minimize / Subject To / Bounds / Binary / End; continuous
    variables are named ``x1..``, binaries ``y1..``, both in column
    order; every variable gets an explicit Bounds line; coefficients
    carry 12 significant digits.
    """
    base = getattr(model, "base", model)
    integral = set(getattr(model, "integral", []))
    names, nx, ny = [], 0, 0
    for j in range(base.n):
        if j in integral:
            ny += 1
            names.append(f"y{ny}")
        else:
            nx += 1
            names.append(f"x{nx}")

    lines = ["Minimize", f" obj: {_expr(base.c, names)}", "Subject To"]
    for i, (coeffs, rel, rhs) in enumerate(base.rows, start=1):
        lines.append(f" c{i}: {_expr(coeffs, names)} {rel} {_fmt(rhs)}")
    if base.n:
        lines.append("Bounds")
        for j, (lo, hi) in enumerate(base.bounds):
            name = names[j]
            if lo == hi:
                lines.append(f" {name} = {_fmt(lo)}")
            elif math.isinf(lo) and math.isinf(hi):
                lines.append(f" {name} free")
            elif math.isinf(hi):
                lines.append(f" {_fmt(lo)} <= {name}")
            elif math.isinf(lo):
                lines.append(f" {name} <= {_fmt(hi)}")
            else:
                lines.append(f" {_fmt(lo)} <= {name} <= {_fmt(hi)}")
    if integral:
        lines.append("Binary")
        for j in sorted(integral):
            lines.append(f" {names[j]}")
    lines.append("End")
    return "\n".join(lines)
