"""l1-norm surrogate solvers.

Exact basis pursuit via LP, proximal-gradient l1-regularized least
squares (with optional acceleration), the full homotopy path with index
removals, projected-gradient LASSO, ADMM basis pursuit, and the
parameter map tying the four formulations together.

Internal scaling: the regularized solvers minimize
``lam * ||x||_1 + 0.5 * ||Ax - b||_2^2`` and report the scaled objective
``||x||_1 + ||Ax - b||_2^2 / (2 * lam)`` — same argmin, consistent
bookkeeping across solvers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import core, lp
from .core import Soft, Solution


@dataclass
class SolverOptions:
    """Knobs shared by the iterative solvers.

    step_rule is ``"lipschitz"`` (1/||A^T A||_2 via power iteration),
    ``("fixed", gamma)`` or ``"backtracking"`` (halving with a 1e-4
    sufficient-decrease slack).
    """

    max_iter: int = 5000
    tol: float = 1e-8
    step_rule: object = "lipschitz"
    accelerate: bool = False

    def __post_init__(self):
        if self.max_iter < 1:
            raise ValueError("max_iter must be positive")
        if self.tol <= 0:
            raise ValueError("tol must be positive")
        if isinstance(self.step_rule, tuple):
            tag, gamma = self.step_rule
            if tag != "fixed" or gamma <= 0:
                raise ValueError("fixed step rule is ('fixed', gamma) with gamma > 0")
        elif self.step_rule not in ("lipschitz", "backtracking"):
            raise ValueError(f"unknown step rule {self.step_rule!r}")


@dataclass
class PathBreakpoint:
    """One vertex of the piecewise-linear homotopy path.

    ``x`` solves the l1-regularized least-squares problem at ``lam``;
    between consecutive breakpoints the solution is affine in lambda.
    """

    lam: float
    x: np.ndarray
    support: list = field(default_factory=list)
    signs: list = field(default_factory=list)


def bp_lp(A, b) -> Solution:
    """Exact basis pursuit ``min ||x||_1 s.t. Ax = b`` via the split LP."""
    A = core.as_array(A, ndim=2)
    b = core.as_array(b, ndim=1)
    m, n = A.shape
    if b.size != m:
        raise ValueError("b length must match the rows of A")
    c = np.ones(2 * n)
    rows = [(np.concatenate([A[i], -A[i]]), lp.EQ, float(b[i])) for i in range(m)]
    bounds = [(0.0, math.inf)] * (2 * n)
    res = lp.solve_lp(lp.LpModel(c, rows, bounds))
    if res.status != "optimal":
        return Solution(np.zeros(n), math.inf, [], 0, core.INFEASIBLE)
    x = res.x[:n] - res.x[n:]
    sol = Solution.from_x(x, core.norm(x, "l1"), core.OPTIMAL)
    return sol


def _step_length(A, opts):
    if isinstance(opts.step_rule, tuple):
        return opts.step_rule[1], False
    L = core.spectral_norm_sq(A)
    gamma = 1.0 / L if L > 0 else 1.0
    return gamma, opts.step_rule == "backtracking"


def l1ls_proxgrad(A, b, lam, opts: SolverOptions | None = None) -> Solution:
    """Proximal gradient (ISTA / FISTA) for l1-regularized least squares.

    Iterates ``x <- soft(x - gamma * A^T(Ax - b), lam * gamma)``;
    with ``opts.accelerate`` the momentum variant is used and the
    best-objective iterate is returned (monotone bookkeeping).
    """
    if lam <= 0:
        raise ValueError("lam must be positive")
    opts = opts or SolverOptions()
    A = core.as_array(A, ndim=2)
    b = core.as_array(b, ndim=1)
    n = A.shape[1]
    gamma, backtrack = _step_length(A, opts)

    def smooth(x):
        r = A @ x - b
        return 0.5 * float(r @ r)

    def objective(x):
        return lam * core.norm(x, "l1") + smooth(x)

    def kkt_violation(x, g):
        # g = A^T(Ax - b); optimality: |g| <= lam, g_i = -lam*sign(x_i) on support
        viol = max(0.0, float(np.max(np.abs(g))) - lam) if g.size else 0.0
        on = np.abs(x) > core.ZERO_TOL
        if on.any():
            viol = max(viol, float(np.max(np.abs(g[on] + lam * np.sign(x[on])))))
        return viol

    x = np.zeros(n)
    y = x
    t = 1.0
    best = x
    best_obj = objective(x)
    status = core.ITER_LIMIT
    iters = 0
    for iters in range(1, opts.max_iter + 1):
        g = A.T @ (A @ y - b)
        step = gamma
        while True:
            x_new = core.threshold(y - step * g, Soft(lam * step))
            if not backtrack:
                break
            d = x_new - y
            lhs = smooth(x_new)
            rhs = smooth(y) + float(g @ d) + (1 + 1e-4) * float(d @ d) / (2 * step)
            if lhs <= rhs or step < 1e-14:
                break
            step *= 0.5
        if opts.accelerate:
            t_new = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * t * t))
            y = x_new + ((t - 1.0) / t_new) * (x_new - x)
            t = t_new
        else:
            y = x_new
        x = x_new
        obj = objective(x)
        if obj < best_obj:
            best, best_obj = x, obj
        gx = A.T @ (A @ x - b)
        if kkt_violation(x, gx) <= opts.tol:
            best, best_obj = x, obj
            status = core.OPTIMAL
            break
    x = best
    scaled = core.norm(x, "l1") + smooth(x) / lam
    sol = Solution.from_x(x, scaled, status)
    return sol


def homotopy_path(A, b, lambda_min=0.0) -> list:
    """Trace the full l1-LS regularization path from ``||A^T b||_inf`` down.

    Returns breakpoints in strictly decreasing lambda; each records the
    active support/signs *after* the event at that lambda. Handles index
    removals. Terminates at ``lambda_min`` or when the residual reaches
    zero (the basis-pursuit solution).
    """
    A = core.as_array(A, ndim=2)
    b = core.as_array(b, ndim=1)
    m, n = A.shape
    if lambda_min < 0:
        raise ValueError("lambda_min must be nonnegative")
    corr = A.T @ b
    lam_max = float(np.max(np.abs(corr))) if n else 0.0
    if lam_max <= 1e-14:
        return [PathBreakpoint(0.0, np.zeros(n), [], [])]

    x = np.zeros(n)
    lam = lam_max
    j0 = int(np.argmax(np.abs(corr)))
    active = [j0]
    signs = {j0: 1.0 if corr[j0] > 0 else -1.0}
    path = [PathBreakpoint(lam, x.copy(), sorted(active), [signs[i] for i in sorted(active)])]
    if lam <= lambda_min + 1e-12:
        return path

    b_scale = max(1.0, float(np.linalg.norm(b)))
    for _ in range(8 * n * (n + 2)):  # generous event budget
        act = sorted(active)
        sig = np.array([signs[i] for i in act])
        As = A[:, act]
        G = As.T @ As
        try:
            d_act = np.linalg.solve(G, sig)
        except np.linalg.LinAlgError as exc:
            raise RuntimeError("homotopy: singular active Gram matrix") from exc
        if act and not np.all(np.isfinite(d_act)):
            raise RuntimeError("homotopy: singular active Gram matrix")
        # x_act(t) = x_act + (lam - t) * d_act  for t <= lam (decreasing)
        w = As @ d_act if act else np.zeros(m)
        resid = b - A @ x
        g = A.T @ resid  # g_i = lam * sign on the active set
        h = A.T @ w

        best_t = -math.inf
        best_event = None  # (priority, index, kind) kind: 0 removal, 1 insertion
        for pos, i in enumerate(act):
            di = d_act[pos]
            if abs(di) > 1e-13:
                t_i = lam + x[i] / di
                if lambda_min - 1e-12 <= t_i < lam - 1e-10:
                    cand = (t_i, 0, i)
                    if t_i > best_t + 1e-10 or (
                        abs(t_i - best_t) <= 1e-10
                        and (best_event is None or cand[1:] < best_event)
                    ):
                        best_t, best_event = t_i, cand[1:]
        for j in range(n):
            if j in signs and j in active:
                continue
            denom_p = 1.0 - h[j]
            denom_m = 1.0 + h[j]
            inter_p = g[j] - lam * h[j]
            # g_j(t) = inter_p + t*h[j]; events g_j = +-t
            for denom, val in ((denom_p, inter_p), (denom_m, -inter_p)):
                if abs(denom) < 1e-13:
                    continue
                t_j = val / denom
                if lambda_min - 1e-12 <= t_j < lam - 1e-10:
                    cand = (t_j, 1, j)
                    if t_j > best_t + 1e-10 or (
                        abs(t_j - best_t) <= 1e-10
                        and (best_event is None or cand[1:] < best_event)
                    ):
                        best_t, best_event = t_j, cand[1:]

        if best_event is None or best_t <= lambda_min + 1e-12:
            t_end = max(lambda_min, 0.0)
            for pos, i in enumerate(act):
                x[i] += (lam - t_end) * d_act[pos]
            path.append(
                PathBreakpoint(t_end, x.copy(), sorted(active), [signs[i] for i in sorted(active)])
            )
            return path

        t_ev = best_t
        for pos, i in enumerate(act):
            x[i] += (lam - t_ev) * d_act[pos]
        lam = t_ev
        kind, idx = best_event
        if kind == 0:
            active.remove(idx)
            signs.pop(idx)
            x[idx] = 0.0
        else:
            active.append(idx)
            gj = float(A[:, idx] @ (b - A @ x))
            signs[idx] = 1.0 if gj > 0 else -1.0
        path.append(
            PathBreakpoint(lam, x.copy(), sorted(active), [signs[i] for i in sorted(active)])
        )
        if float(np.linalg.norm(b - A @ x)) <= 1e-12 * b_scale:
            return path
        if lam <= lambda_min + 1e-12:
            return path
    raise RuntimeError("homotopy: event budget exceeded (degenerate path)")


def homotopy_solution_at(path, lam: float) -> np.ndarray:
    """Interpolate the piecewise-linear path at ``lam``."""
    if not path:
        raise ValueError("empty path")
    if lam >= path[0].lam:
        return np.zeros_like(path[0].x)
    for left, right in zip(path, path[1:]):
        if right.lam <= lam <= left.lam:
            span = left.lam - right.lam
            if span <= 1e-15:
                return right.x.copy()
            w = (left.lam - lam) / span
            return (1 - w) * left.x + w * right.x
    return path[-1].x.copy()


def lasso_spg(A, b, tau, opts: SolverOptions | None = None) -> Solution:
    """Spectral projected gradient for ``min 0.5||Ax-b||^2, ||x||_1 <= tau``.

    Barzilai-Borwein steps with a 10-iterate nonmonotone line search;
    stationarity measured by the unit-step projected-gradient residual.
    """
    if tau < 0:
        raise ValueError("tau must be nonnegative")
    opts = opts or SolverOptions()
    A = core.as_array(A, ndim=2)
    b = core.as_array(b, ndim=1)
    n = A.shape[1]
    if tau == 0:
        r = -b
        return Solution.from_x(np.zeros(n), 0.5 * float(r @ r), core.OPTIMAL)

    def f(x):
        r = A @ x - b
        return 0.5 * float(r @ r)

    x = core.project_l1_ball(np.zeros(n), tau)
    g = A.T @ (A @ x - b)
    L = core.spectral_norm_sq(A)
    step = 1.0 / L if L > 0 else 1.0
    hist = [f(x)]
    status = core.ITER_LIMIT
    for _ in range(opts.max_iter):
        if float(np.max(np.abs(x - core.project_l1_ball(x - g, tau)))) <= opts.tol:
            status = core.OPTIMAL
            break
        alpha = step
        fmax = max(hist[-10:])
        while True:
            x_new = core.project_l1_ball(x - alpha * g, tau)
            d = x_new - x
            if f(x_new) <= fmax + 1e-4 * float(g @ d) or alpha < 1e-15:
                break
            alpha *= 0.5
        g_new = A.T @ (A @ x_new - b)
        s = x_new - x
        yv = g_new - g
        sy = float(s @ yv)
        if sy > 1e-14:
            step = min(max(float(s @ s) / sy, 1e-12), 1e12)
        x, g = x_new, g_new
        hist.append(f(x))
    return Solution.from_x(x, f(x), status)


def bp_admm(A, b, rho=1.0, opts: SolverOptions | None = None) -> Solution:
    """ADMM for basis pursuit: exact affine projection + soft threshold.

    x-update projects onto ``{x : Ax = b}`` through a factorization of
    ``A A^T`` (so the returned ``x`` always satisfies the measurements);
    the penalty is rebalanced by the usual x2 / /2 residual rule every
    10 iterations.
    """
    if rho <= 0:
        raise ValueError("rho must be positive")
    opts = opts or SolverOptions()
    A = core.as_array(A, ndim=2)
    b = core.as_array(b, ndim=1)
    m, n = A.shape
    if core.rank_by_elimination(A) < m:
        raise ValueError("bp_admm requires full row rank")
    AAt = A @ A.T
    chol = np.linalg.cholesky(AAt)

    def project(v):
        rhs = A @ v - b
        w = np.linalg.solve(chol.T, np.linalg.solve(chol, rhs))
        return v - A.T @ w

    x = project(np.zeros(n))
    z = x.copy()
    u = np.zeros(n)
    status = core.ITER_LIMIT
    for it in range(1, opts.max_iter + 1):
        x = project(z - u)
        z_old = z
        z = core.threshold(x + u, Soft(1.0 / rho))
        u = u + x - z
        if float(np.max(np.abs(x - z))) <= opts.tol:
            status = core.OPTIMAL
            break
        if it % 10 == 0:
            r_norm = float(np.linalg.norm(x - z))
            s_norm = float(rho * np.linalg.norm(z - z_old))
            if r_norm > 10 * s_norm:
                rho *= 2.0
                u *= 0.5
            elif s_norm > 10 * r_norm:
                rho *= 0.5
                u *= 2.0
    return Solution.from_x(x, core.norm(x, "l1"), status)


def param_equivalence(A, b, lam):
    """Map the l1-LS(lam) solution to its LASSO/BPDN parameters.

    Returns ``(tau, delta, x)`` where ``x`` solves l1-LS at ``lam``
    (computed exactly on the homotopy path), ``tau = ||x||_1`` and
    ``delta = ||Ax - b||_2``. LASSO(tau) and the delta-ball variant of
    basis pursuit then admit the same ``x`` as an optimum.
    """
    if lam <= 0:
        raise ValueError("lam must be positive")
    A = core.as_array(A, ndim=2)
    b = core.as_array(b, ndim=1)
    path = homotopy_path(A, b, lambda_min=lam)
    x = homotopy_solution_at(path, lam)
    tau = core.norm(x, "l1")
    delta = float(np.linalg.norm(A @ x - b))
    return tau, delta, x
