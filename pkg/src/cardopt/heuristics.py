"""Greedy and nonconvex cardinality heuristics.

OMP, CoSaMP, iterative hard thresholding (regularized and k-sparse
variants), alternating projections, and smoothed-l0. All of these trade
certificates for speed; objectives reported here are least-squares
residual values (``||Ax - b||_2^2``) unless documented otherwise, so
they can be compared against the exact solvers' certified optima.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import core
from .core import Solution, TopK
from .surrogate import SolverOptions


@dataclass(frozen=True)
class Reg:
    """Regularized IHT mode: objective ``(lam/2)||x||_0 + 0.5||Ax-b||^2``.

    The scaling makes the unit-step operator the hard threshold at
    ``sqrt(lam)`` with dead zone ``(0, sqrt(lam))``.
    """

    lam: float


@dataclass(frozen=True)
class Cons:
    """k-sparse IHT mode: keep the k largest magnitudes each step."""

    k: int


@dataclass
class GreedyTrace:
    """Per-iteration diagnostics: support, l2 residual, objective."""

    supports: list = field(default_factory=list)
    residuals: list = field(default_factory=list)
    objectives: list = field(default_factory=list)

    def record(self, support, residual, objective):
        self.supports.append(sorted(int(i) for i in support))
        self.residuals.append(float(residual))
        self.objectives.append(float(objective))


def _ridge_lstsq(A, cols, b, ridge=1e-12):
    """Least squares on the given columns via ridge-regularized normal
    equations (deterministic, safe for rank-deficient subsets)."""
    As = A[:, cols]
    G = As.T @ As + ridge * np.eye(len(cols))
    return np.linalg.solve(G, As.T @ b)


def omp(A, b, k=None, delta=None, residual_norm="l2"):
    """Orthogonal matching pursuit.

    Adds the column of highest normalized correlation with the residual,
    re-solves least squares on the support, and stops at ``k`` atoms or
    residual (in ``residual_norm``) at most ``delta`` — whichever is
    given (at least one must be). Selecting an already-chosen column
    (a stall) terminates with Feasible status.

    Returns ``(Solution, GreedyTrace)``.
    """
    A = core.as_array(A, ndim=2)
    b = core.as_array(b, ndim=1)
    m, n = A.shape
    if k is None and delta is None:
        raise ValueError("omp needs a cardinality cap or a residual target")
    if k is not None and not 0 <= k <= n:
        raise ValueError("omp cardinality cap out of range")
    col_norms = np.linalg.norm(A, axis=0)
    if np.any(col_norms <= 0):
        raise ValueError("omp requires nonzero columns")

    max_atoms = min(m, n) if k is None else min(k, m, n)
    support: list = []
    x = np.zeros(n)
    r = b.copy()
    trace = GreedyTrace()
    trace.record(support, np.linalg.norm(r), float(r @ r))
    status = core.ITER_LIMIT

    def target_met():
        return delta is not None and core.norm(r, residual_norm) <= delta + 1e-12

    if target_met() or max_atoms == 0:
        status = core.FEASIBLE if target_met() or k is not None else core.ITER_LIMIT
        return Solution.from_x(x, float(r @ r), status), trace

    while len(support) < max_atoms:
        j = int(np.argmax(np.abs(A.T @ r) / col_norms))
        if j in support:
            status = core.FEASIBLE  # stall: no further residual reduction
            break
        support.append(j)
        coef = _ridge_lstsq(A, support, b)
        x = np.zeros(n)
        x[support] = coef
        r = b - A @ x
        trace.record(support, np.linalg.norm(r), float(r @ r))
        if target_met():
            status = core.FEASIBLE
            break
        if float(np.linalg.norm(r)) <= 1e-13 * max(1.0, float(np.linalg.norm(b))):
            status = core.FEASIBLE
            break
    else:
        # Atom budget exhausted. With an explicit cardinality cap that is
        # the contract (Feasible); chasing only a residual target that was
        # never reached is an iteration limit.
        status = core.FEASIBLE if k is not None else core.ITER_LIMIT
    return Solution.from_x(x, float(r @ r), status), trace


def cosamp(A, b, k, opts: SolverOptions | None = None):
    """Compressive sampling matching pursuit.

    Proxy support = top-2k of ``|A^T r|`` merged with the current
    support; least squares on the merge; prune to the top k. Halts on
    relative residual stagnation below 1e-10 or ``opts.max_iter``.
    """
    opts = opts or SolverOptions(max_iter=200)
    A = core.as_array(A, ndim=2)
    b = core.as_array(b, ndim=1)
    n = A.shape[1]
    if not 0 <= k <= n:
        raise ValueError("k out of range")
    trace = GreedyTrace()
    if k == 0:
        trace.record([], np.linalg.norm(b), float(b @ b))
        return Solution.from_x(np.zeros(n), float(b @ b), core.FEASIBLE), trace

    x = np.zeros(n)
    r = b.copy()
    prev = float(np.linalg.norm(r))
    trace.record([], prev, float(r @ r))
    status = core.ITER_LIMIT
    for _ in range(opts.max_iter):
        proxy = A.T @ r
        top = np.argsort(-np.abs(proxy), kind="stable")[: 2 * k]
        merged = np.union1d(np.flatnonzero(np.abs(x) > core.ZERO_TOL), top)
        coef = _ridge_lstsq(A, list(merged), b)
        w = np.zeros(n)
        w[merged] = coef
        x = core.threshold(w, TopK(k))
        r = b - A @ x
        cur = float(np.linalg.norm(r))
        trace.record(np.flatnonzero(np.abs(x) > core.ZERO_TOL), cur, float(r @ r))
        if abs(prev - cur) < 1e-10 * max(1.0, prev):
            status = core.FEASIBLE
            break
        prev = cur
    return Solution.from_x(x, float(r @ r), status), trace


def iht(A, b, mode, opts: SolverOptions | None = None):
    """Iterative hard thresholding.

    ``Reg(lam)``: gradient step then hard threshold at
    ``sqrt(lam * gamma)``; ``Cons(k)``: gradient step then keep-k.
    Default step is 0.99 / ||A^T A||_2 (power iteration), which makes
    the k-sparse residual monotone. A fixed point is declared when the
    iterate moves by at most ``opts.tol`` in sup-norm.

    Returns ``(Solution, GreedyTrace)``.
    """
    opts = opts or SolverOptions(max_iter=2000)
    A = core.as_array(A, ndim=2)
    b = core.as_array(b, ndim=1)
    n = A.shape[1]
    if isinstance(mode, Reg):
        if mode.lam <= 0:
            raise ValueError("Reg mode requires lam > 0")
    elif isinstance(mode, Cons):
        if not 0 <= mode.k <= n:
            raise ValueError("Cons mode requires 0 <= k <= n")
    else:
        raise ValueError("mode must be Reg(lam) or Cons(k)")
    if isinstance(opts.step_rule, tuple):
        gamma = opts.step_rule[1]
    else:
        L = core.spectral_norm_sq(A)
        gamma = 0.99 / L if L > 0 else 1.0

    def phi(v, rv):
        base = 0.5 * float(rv @ rv)
        if isinstance(mode, Reg):
            base += 0.5 * mode.lam * core.norm(v, "l0")
        return base

    x = np.zeros(n)
    r = b - A @ x
    start = phi(x, r)
    guard = 10.0 * max(start, 1e-12)
    trace = GreedyTrace()
    trace.record([], np.linalg.norm(r), float(r @ r))
    status = core.ITER_LIMIT
    for _ in range(opts.max_iter):
        u = x + gamma * (A.T @ r)
        if isinstance(mode, Reg):
            level = math.sqrt(mode.lam * gamma)
            x_new = np.where(np.abs(u) >= level, u, 0.0)
        else:
            x_new = core.threshold(u, TopK(mode.k))
        r = b - A @ x_new
        trace.record(np.flatnonzero(np.abs(x_new) > core.ZERO_TOL), np.linalg.norm(r), float(r @ r))
        if phi(x_new, r) > guard:
            raise RuntimeError(
                "iht diverged: objective grew past 10x its initial value "
                "(step too large for this operator)"
            )
        if float(np.max(np.abs(x_new - x))) <= opts.tol:
            x = x_new
            status = core.OPTIMAL
            break
        x = x_new
    return Solution.from_x(x, float(r @ r), status), trace


def _affine_projector(A, b):
    """Return the exact projector onto ``{x : Ax = b}`` (full row rank)."""
    m = A.shape[0]
    if core.rank_by_elimination(A) < m:
        raise ValueError("full row rank required")
    chol = np.linalg.cholesky(A @ A.T)

    def project(v):
        rhs = A @ v - b
        w = np.linalg.solve(chol.T, np.linalg.solve(chol, rhs))
        return v - A.T @ w

    return project


def altproj(A, b, k, opts: SolverOptions | None = None) -> Solution:
    """Alternating projections between ``{Ax = b}`` and the k-sparse set.

    The last step is always the sparse projection, so the output is
    k-sparse; status is Feasible when the residual meets ``opts.tol``,
    IterLimit otherwise (with the residual reported as objective).
    """
    opts = opts or SolverOptions(max_iter=2000)
    A = core.as_array(A, ndim=2)
    b = core.as_array(b, ndim=1)
    n = A.shape[1]
    if not 0 <= k <= n:
        raise ValueError("k out of range")
    project = _affine_projector(A, b)
    x = core.threshold(project(np.zeros(n)), TopK(k))
    status = core.ITER_LIMIT
    for _ in range(opts.max_iter):
        r = A @ x - b
        if float(np.linalg.norm(r)) <= opts.tol:
            status = core.FEASIBLE
            break
        x_new = core.threshold(project(x), TopK(k))
        if float(np.max(np.abs(x_new - x))) <= 1e-14:
            x = x_new
            r = A @ x - b
            if float(np.linalg.norm(r)) <= opts.tol:
                status = core.FEASIBLE
            break
        x = x_new
    r = A @ x - b
    return Solution.from_x(x, float(r @ r), status)


def sl0(A, b, sigma_schedule=None, inner_iters=3) -> Solution:
    """Smoothed-l0: maximize ``F_sigma(x) = sum exp(-x_i^2 / (2 sigma^2))``
    over ``Ax = b`` for a decreasing sigma schedule.

    Defaults: geometric schedule with ratio 0.7 from ``2 ||x_ls||_inf``
    down to 1e-4, three gradient-projection steps per sigma, step
    multiplier 2. The output is exactly projected onto the measurements;
    the reported objective is the final surrogate value
    ``n - F_sigma(x)``.
    """
    A = core.as_array(A, ndim=2)
    b = core.as_array(b, ndim=1)
    n = A.shape[1]
    if inner_iters < 1:
        raise ValueError("inner_iters must be positive")
    project = _affine_projector(A, b)
    x = project(np.zeros(n))
    if sigma_schedule is None:
        top = 2.0 * float(np.max(np.abs(x))) if np.any(x) else 0.0
        if top <= 1e-4:
            sigma_schedule = [1e-4]
        else:
            sigma_schedule = []
            s = top
            while s > 1e-4:
                sigma_schedule.append(s)
                s *= 0.7
            sigma_schedule.append(1e-4)
    else:
        sigma_schedule = [float(s) for s in sigma_schedule]
        if any(s <= 0 for s in sigma_schedule):
            raise ValueError("sigma schedule must be positive")
        if any(a <= bnext for a, bnext in zip(sigma_schedule, sigma_schedule[1:])):
            raise ValueError("sigma schedule must be strictly decreasing")

    mu = 2.0
    for sigma in sigma_schedule:
        for _ in range(inner_iters):
            delta = x * np.exp(-(x**2) / (2.0 * sigma**2))
            x = project(x - mu * delta)
    x = project(x)
    f_final = float(np.sum(np.exp(-(x**2) / (2.0 * sigma_schedule[-1] ** 2))))
    return Solution.from_x(x, n - f_final, core.FEASIBLE)
