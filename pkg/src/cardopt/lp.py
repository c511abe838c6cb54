"""Dense primal simplex for small/medium LPs with variable bounds.

This is deliberately self-contained: every relaxation solved in this
package (covering relaxations, big-M relaxations, portfolio polytopes,
residual-norm fits) goes through :func:`solve_lp`, so behaviour is
deterministic and fully inspectable.

Formulation: minimize ``c @ x`` subject to rows ``a_i @ x <= / = / >= rhs_i``
and box bounds ``lo_j <= x_j <= hi_j`` (``+-inf`` allowed).

Implementation notes
--------------------
* two phases with explicit artificials; slacks carry the row relations,
* bounded-variable pivoting with bound flips,
* Dantzig pricing; a long non-improving streak first triggers a tiny
  generic relaxation of the finite bounds (degenerate bases then make
  strict progress), with Bland's rule as the final fallback,
* explicit basis inverse, refactorized from scratch every 50 pivots.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import core

LE, GE, EQ = "<=", ">=", "="

_AT_LO, _AT_HI, _FREE, _BASIC = 0, 1, 2, 3

PIVOT_TOL = 1e-9
DUAL_TOL = 1e-9
BREAKDOWN_TOL = 1e-12
FEAS_TOL = 1e-7
STALL_EXPAND = 1e-10


@dataclass
class LpModel:
    """``minimize c @ x`` over rows and bounds.

    rows
        list of ``(coeffs, relation, rhs)`` with relation in
        ``{"<=", "=", ">="}``.
    bounds
        list of ``(lo, hi)`` pairs, one per variable; use ``-math.inf`` /
        ``math.inf`` for one-sided or free variables.
    """

    c: np.ndarray
    rows: list = field(default_factory=list)
    bounds: list = field(default_factory=list)

    def __post_init__(self):
        self.c = np.asarray(self.c, dtype=float)
        if self.c.ndim != 1:
            raise ValueError("objective must be a vector")
        n = self.c.size
        if len(self.bounds) != n:
            raise ValueError("bounds length must match the variable count")
        for lo, hi in self.bounds:
            if lo > hi:
                raise ValueError("variable bound with lo > hi")
        checked = []
        for coeffs, rel, rhs in self.rows:
            coeffs = np.asarray(coeffs, dtype=float)
            if coeffs.shape != (n,):
                raise ValueError("row coefficient length must match variables")
            if rel not in (LE, GE, EQ):
                raise ValueError(f"unknown row relation {rel!r}")
            if not math.isfinite(rhs):
                raise ValueError("row rhs must be finite")
            checked.append((coeffs, rel, float(rhs)))
        self.rows = checked

    @property
    def n(self) -> int:
        return self.c.size

    @property
    def m(self) -> int:
        return len(self.rows)


@dataclass
class LpResult:
    status: str  # optimal | infeasible | unbounded
    x: np.ndarray | None
    objective: float
    duals: np.ndarray | None
    iterations: int


class _Tableau:
    """Mutable simplex state over the extended column set.

    Columns: ``n`` structurals, then ``m`` slacks, then ``m`` artificials.
    """

    def __init__(self, model: LpModel, x0=None):
        n, m = model.n, model.m
        self.n, self.m = n, m
        N = n + 2 * m
        self.A = np.zeros((m, N))
        self.rhs = np.zeros(m)
        self.lo = np.full(N, -math.inf)
        self.hi = np.full(N, math.inf)
        for j, (lo, hi) in enumerate(model.bounds):
            self.lo[j], self.hi[j] = lo, hi
        for i, (coeffs, rel, rhs) in enumerate(model.rows):
            self.A[i, :n] = coeffs
            self.A[i, n + i] = 1.0
            self.rhs[i] = rhs
            if rel == LE:
                self.lo[n + i], self.hi[n + i] = 0.0, math.inf
            elif rel == GE:
                self.lo[n + i], self.hi[n + i] = -math.inf, 0.0
            else:
                self.lo[n + i], self.hi[n + i] = 0.0, 0.0
        # artificials get their sign once the initial residual is known
        self.status = np.full(N, _AT_LO, dtype=np.int8)
        self.x = np.zeros(N)
        for j in range(N):
            lo, hi = self.lo[j], self.hi[j]
            if math.isinf(lo) and math.isinf(hi):
                self.status[j] = _FREE
                self.x[j] = 0.0
            elif math.isinf(hi) or (not math.isinf(lo) and abs(lo) <= abs(hi)):
                self.status[j] = _AT_LO
                self.x[j] = lo
            else:
                self.status[j] = _AT_HI
                self.x[j] = hi
        if x0 is not None:
            # starting hint: park each structural at whatever it can
            # legally hold nearest to x0 (cuts phase-1 work when x0 is
            # feasible or close to it)
            for j in range(n):
                v, lo, hi = float(x0[j]), self.lo[j], self.hi[j]
                if self.status[j] == _FREE:
                    self.x[j] = v if math.isfinite(v) else 0.0
                elif math.isinf(hi) or (
                    not math.isinf(lo) and abs(v - lo) <= abs(hi - v)
                ):
                    self.status[j] = _AT_LO
                    self.x[j] = lo
                else:
                    self.status[j] = _AT_HI
                    self.x[j] = hi
        # slacks start at value 0 (0 is always inside their bound set)
        for i in range(m):
            j = n + i
            self.status[j] = _AT_LO if self.lo[j] == 0.0 else _AT_HI
            self.x[j] = 0.0
        resid = self.rhs - self.A[:, : n + m] @ self.x[: n + m]
        for i in range(m):
            j = n + m + i
            self.A[i, j] = 1.0 if resid[i] >= 0 else -1.0
            self.lo[j], self.hi[j] = 0.0, math.inf
            self.status[j] = _BASIC
            self.x[j] = abs(resid[i])
        self.basis = np.array([n + m + i for i in range(m)], dtype=int)
        # the artificial basis is diag(+-1), which is its own inverse
        self.binv = np.diag(self.A[np.arange(m), self.basis]) if m else np.eye(0)
        self.pivots = 0

    def refactor(self):
        m = self.m
        if m == 0:
            return
        B = self.A[:, self.basis]
        self.binv = np.linalg.inv(B)
        nonbasic = np.ones(self.A.shape[1], dtype=bool)
        nonbasic[self.basis] = False
        rhs_eff = self.rhs - self.A[:, nonbasic] @ self.x[nonbasic]
        self.x[self.basis] = self.binv @ rhs_eff

    def expand_bounds(self):
        """Relax every finite bound by a tiny generic amount.

        Degenerate bases (basic variables sitting exactly on a bound) force
        zero-length pivots; after the relaxation they sit strictly inside,
        so every pivot makes strict progress.  Callers must restore the true
        bounds afterwards -- the error this leaks into the final point is
        O(STALL_EXPAND) per variable, far below FEAS_TOL.
        """
        rng = np.random.default_rng(1770)
        jig = rng.uniform(1.0, 2.0, size=(2, self.lo.size))
        mag = np.maximum(
            np.where(np.isfinite(self.lo), np.abs(self.lo), 0.0),
            np.where(np.isfinite(self.hi), np.abs(self.hi), 0.0),
        )
        eta = STALL_EXPAND * np.maximum(1.0, mag)
        self.lo = np.where(np.isfinite(self.lo), self.lo - eta * jig[0], self.lo)
        self.hi = np.where(np.isfinite(self.hi), self.hi + eta * jig[1], self.hi)

    def minimize(self, c, max_pivots):
        """Run primal simplex for cost vector ``c`` from the current basis.

        Returns ``"optimal"`` or ``"unbounded"``. Raises ``RuntimeError``
        on numerical breakdown.
        """
        self._true_bounds = None  # set once the anti-stalling expansion kicks in
        try:
            return self._minimize(c, max_pivots)
        finally:
            if self._true_bounds is not None:
                self.lo, self.hi = self._true_bounds
                self._true_bounds = None
                at_lo = self.status == _AT_LO
                at_hi = self.status == _AT_HI
                self.x[at_lo] = self.lo[at_lo]
                self.x[at_hi] = self.hi[at_hi]
                self.refactor()

    def _minimize(self, c, max_pivots):
        m = self.m
        bland = False
        nonimp = 0
        bland_trip = 3 * (m + self.A.shape[1])
        tiny_pivots = 0
        obj = float(c @ self.x)
        for _ in range(max_pivots):
            y = self.binv.T @ c[self.basis] if m else np.zeros(0)
            d = c - self.A.T @ y
            st = self.status
            elig = np.zeros(self.A.shape[1], dtype=bool)
            elig |= (st == _AT_LO) & (d < -DUAL_TOL) & (self.lo < self.hi)
            elig |= (st == _AT_HI) & (d > DUAL_TOL) & (self.lo < self.hi)
            elig |= (st == _FREE) & (np.abs(d) > DUAL_TOL)
            cand = np.flatnonzero(elig)
            if cand.size == 0:
                return "optimal"
            if bland:
                order = cand  # ascending index
            else:
                order = cand[np.argsort(-np.abs(d[cand]), kind="stable")]
            moved = False
            for e in order:
                dirn = 1.0 if (st[e] == _AT_LO or (st[e] == _FREE and d[e] < 0)) else -1.0
                alpha = self.binv @ self.A[:, e] if m else np.zeros(0)
                delta = dirn * alpha
                t_cand = np.full(m, math.inf)
                with np.errstate(divide="ignore", invalid="ignore"):
                    dn = delta > PIVOT_TOL
                    up = delta < -PIVOT_TOL
                    if dn.any():
                        t_cand[dn] = (self.x[self.basis[dn]] - self.lo[self.basis[dn]]) / delta[dn]
                    if up.any():
                        t_cand[up] = (self.x[self.basis[up]] - self.hi[self.basis[up]]) / delta[up]
                t_cand = np.where(np.isnan(t_cand), math.inf, np.maximum(t_cand, 0.0))
                t_basic = float(t_cand.min()) if m else math.inf
                t_flip = self.hi[e] - self.lo[e]
                t = min(t_basic, t_flip)
                if math.isinf(t):
                    return "unbounded"
                if t_flip <= t_basic:
                    # bound flip, no basis change
                    self.x[self.basis] -= t_flip * delta
                    self.status[e] = _AT_HI if st[e] == _AT_LO else _AT_LO
                    self.x[e] = self.hi[e] if self.status[e] == _AT_HI else self.lo[e]
                    moved = True
                    break
                ties = np.flatnonzero(t_cand <= t)
                r = ties[np.argmin(self.basis[ties])]
                if abs(alpha[r]) < BREAKDOWN_TOL:
                    tiny_pivots += 1
                    if bland and tiny_pivots > m + 1:
                        raise RuntimeError(
                            "simplex numerical breakdown: persistent pivot "
                            f"magnitude below {BREAKDOWN_TOL}"
                        )
                    continue
                tiny_pivots = 0
                leaving = self.basis[r]
                self.x[self.basis] -= t * delta
                self.x[e] = self.x[e] + dirn * t
                self.status[leaving] = _AT_LO if delta[r] > 0 else _AT_HI
                self.x[leaving] = self.lo[leaving] if delta[r] > 0 else self.hi[leaving]
                piv = alpha[r]
                row = self.binv[r] / piv
                self.binv -= np.outer(alpha, row)
                self.binv[r] = row
                self.basis[r] = e
                self.status[e] = _BASIC
                self.pivots += 1
                if self.pivots % 50 == 0:
                    self.refactor()
                moved = True
                break
            if not moved:
                raise RuntimeError(
                    "simplex numerical breakdown: no usable pivot among "
                    "eligible entering columns"
                )
            new_obj = float(c @ self.x)
            if new_obj < obj - 1e-12:
                nonimp = 0
            else:
                nonimp += 1
                if nonimp > bland_trip:
                    if self._true_bounds is None:
                        # degenerate stall: perturb the geometry before
                        # falling back to Bland, which can crawl for ages
                        self._true_bounds = (self.lo.copy(), self.hi.copy())
                        self.expand_bounds()
                    else:
                        bland = True
                    nonimp = 0
            obj = new_obj
        raise RuntimeError("simplex pivot limit exceeded")


def solve_lp(model: LpModel, x0=None) -> LpResult:
    """Minimize the model; returns status, point, objective and row duals.

    ``duals[i]`` is the multiplier of row ``i`` (sign convention: at
    optimality the reduced cost of the row's slack is ``-duals[i]``, so
    ``<=`` rows have nonpositive and ``>=`` rows nonnegative duals in a
    minimization).

    ``x0`` is an optional warm-start hint (one value per variable): the
    initial nonbasic statuses snap each variable to its bound nearest the
    hint, which skips most of phase 1 when the hint is near-feasible.  It
    never affects which optimum is certified, only the pivot path.
    """
    n, m_orig = model.n, model.m
    # reject rows that are empty yet unsatisfiable; drop satisfied ones
    keep, keep_idx = [], []
    for i, (coeffs, rel, rhs) in enumerate(model.rows):
        if np.any(coeffs != 0.0):
            keep.append((coeffs, rel, rhs))
            keep_idx.append(i)
            continue
        ok = (rel == LE and rhs >= -FEAS_TOL) or (rel == GE and rhs <= FEAS_TOL) or (
            rel == EQ and abs(rhs) <= FEAS_TOL
        )
        if not ok:
            return LpResult("infeasible", None, math.inf, None, 0)
    if len(keep) != m_orig:
        model = LpModel(model.c, keep, model.bounds)
    m = model.m

    tab = _Tableau(model, x0)
    N = n + 2 * m
    scale = max(1.0, float(np.max(np.abs(tab.rhs))) if m else 1.0)
    max_pivots = 5000 + 200 * (m + N)

    if m:
        c1 = np.zeros(N)
        c1[n + m :] = 1.0
        tab.minimize(c1, max_pivots)
        tab.refactor()
        if float(c1 @ tab.x) > FEAS_TOL * scale:
            return LpResult("infeasible", None, math.inf, None, tab.pivots)
        # pin the artificials at zero for phase 2
        tab.lo[n + m :] = 0.0
        tab.hi[n + m :] = 0.0
        tab.x[n + m :] = np.maximum(tab.x[n + m :], 0.0)

    c2 = np.zeros(N)
    c2[:n] = model.c
    verdict = tab.minimize(c2, max_pivots)
    tab.refactor()
    if verdict == "unbounded":
        return LpResult("unbounded", None, -math.inf, None, tab.pivots)
    x = tab.x[:n].copy()
    duals = np.zeros(m_orig)
    if m:
        duals[keep_idx] = tab.binv.T @ c2[tab.basis]
    return LpResult("optimal", x, float(model.c @ x), duals, tab.pivots)


def residual_fit_lp(A, b, norm_kind):
    """Build the LP ``min ||Ax - b||`` for the l1 or linf norm.

    Variables are ``x`` (free) followed by the residual auxiliaries
    (``m`` of them for l1, a single ``t`` for linf). Returns
    ``(model, n)`` where the first ``n`` variables are ``x``.
    """
    A = core.as_array(A, ndim=2)
    b = core.as_array(b, ndim=1)
    m, n = A.shape
    if norm_kind == "l1":
        c = np.concatenate([np.zeros(n), np.ones(m)])
        rows = []
        for i in range(m):
            e = np.zeros(n + m)
            e[:n] = A[i]
            e[n + i] = -1.0
            rows.append((e.copy(), LE, b[i]))  # a_i x - t_i <= b_i
            e2 = np.zeros(n + m)
            e2[:n] = -A[i]
            e2[n + i] = -1.0
            rows.append((e2, LE, -b[i]))  # -a_i x - t_i <= -b_i
        bounds = [(-math.inf, math.inf)] * n + [(0.0, math.inf)] * m
        return LpModel(c, rows, bounds), n
    if norm_kind == "linf":
        c = np.concatenate([np.zeros(n), [1.0]])
        rows = []
        for i in range(m):
            e = np.zeros(n + 1)
            e[:n] = A[i]
            e[n] = -1.0
            rows.append((e.copy(), LE, b[i]))
            e2 = np.zeros(n + 1)
            e2[:n] = -A[i]
            e2[n] = -1.0
            rows.append((e2, LE, -b[i]))
        bounds = [(-math.inf, math.inf)] * n + [(0.0, math.inf)]
        return LpModel(c, rows, bounds), n
    raise ValueError(f"residual_fit_lp supports l1/linf, got {norm_kind!r}")
