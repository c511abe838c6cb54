"""Shared vocabulary types and small numeric kernels.

Everything downstream (LP engine, branch-and-bound, models, heuristics)
builds on the types and helpers here. Conventions used throughout the
package:

* vectors are 1-D ``numpy`` arrays of ``float``; matrices are 2-D,
* indices are 0-based,
* an entry counts as nonzero when ``|x_i| > zero_tol`` (strict),
* statuses are plain lower-case strings (see the ``*_STATUS`` constants).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

# default tolerance below which an entry is treated as zero
ZERO_TOL = 1e-9

# solution statuses
OPTIMAL = "optimal"
FEASIBLE = "feasible"
INFEASIBLE = "infeasible"
ITER_LIMIT = "iter_limit"
# search statuses (branch and bound reports)
GAP_LIMIT = "gap_limit"
NODE_LIMIT = "node_limit"
TIME_LIMIT = "time_limit"
# LP statuses share OPTIMAL / INFEASIBLE
UNBOUNDED = "unbounded"

CARDMIN = "cardmin"
CARDCONS = "cardcons"
CARDREG = "cardreg"

_NORMS = ("l1", "l2", "linf")


def as_array(a, ndim=None):
    """Coerce ``a`` (array-like or :class:`Matrix`) to a float ndarray."""
    if isinstance(a, Matrix):
        arr = a.array
    else:
        arr = np.asarray(a, dtype=float)
    if ndim is not None and arr.ndim != ndim:
        raise ValueError(f"expected a {ndim}-D array, got shape {arr.shape}")
    if arr.size and not np.all(np.isfinite(arr)):
        raise ValueError("array contains non-finite entries")
    return arr


@dataclass
class Matrix:
    """Dense real matrix stored row-major.

    A deliberately thin value type: it pins down the wire format
    (``rows``, ``cols`` and a flat row-major ``entries`` list) used in
    instance files; numerical code works on the ``array`` view.
    """

    rows: int
    cols: int
    entries: list

    def __post_init__(self):
        if self.rows < 0 or self.cols < 0:
            raise ValueError("matrix dimensions must be nonnegative")
        if len(self.entries) != self.rows * self.cols:
            raise ValueError(
                f"entry count {len(self.entries)} does not match "
                f"{self.rows}x{self.cols}"
            )
        if any(not math.isfinite(v) for v in self.entries):
            raise ValueError("matrix entries must be finite")

    @classmethod
    def from_array(cls, a) -> "Matrix":
        a = np.asarray(a, dtype=float)
        if a.ndim != 2:
            raise ValueError("from_array expects a 2-D array")
        return cls(a.shape[0], a.shape[1], [float(v) for v in a.ravel()])

    @property
    def array(self) -> np.ndarray:
        return np.asarray(self.entries, dtype=float).reshape(self.rows, self.cols)


# --------------------------------------------------------------------------
# threshold modes


@dataclass(frozen=True)
class Soft:
    """Soft threshold: shrink magnitudes by ``alpha``, sweeping through 0."""

    alpha: float


@dataclass(frozen=True)
class Hard:
    """Hard threshold: zero out entries with ``|x_i| <= eps``."""

    eps: float


@dataclass(frozen=True)
class TopK:
    """Keep the ``k`` largest magnitudes (ties to the lowest index)."""

    k: int


def support_of(x, zero_tol=ZERO_TOL):
    """Return ``(indices, count)`` of entries with ``|x_i| > zero_tol``.

    Indices are 0-based and ascending.
    """
    x = as_array(x, ndim=1)
    idx = np.flatnonzero(np.abs(x) > zero_tol)
    return [int(i) for i in idx], int(idx.size)


def norm(x, which="l2", tol=ZERO_TOL, k=None, p=2):
    """Vector norms and norm-like gauges used across the package.

    Parameters
    ----------
    which : str
        One of ``"l0"`` (count of entries above ``tol``), ``"l1"``,
        ``"l2"``, ``"linf"`` or ``"largest"`` (the p-norm of the ``k``
        entries of largest magnitude).
    tol : float
        Zero tolerance for ``"l0"``.
    k, p :
        Parameters of the ``"largest"`` gauge; ``k`` is clipped to
        ``[0, len(x)]``.
    """
    x = as_array(x, ndim=1)
    if which == "l0":
        return float(np.count_nonzero(np.abs(x) > tol))
    if which == "l1":
        return float(np.sum(np.abs(x)))
    if which == "l2":
        return float(np.linalg.norm(x))
    if which == "linf":
        return float(np.max(np.abs(x))) if x.size else 0.0
    if which == "largest":
        if k is None:
            raise ValueError("norm('largest', ...) requires k")
        kk = max(0, min(int(k), x.size))
        if kk == 0:
            return 0.0
        mags = np.sort(np.abs(x))[::-1][:kk]
        if p == 1:
            return float(np.sum(mags))
        if p == 2:
            return float(np.linalg.norm(mags))
        if p in (np.inf, "inf"):
            return float(mags[0])
        return float(np.sum(mags**p) ** (1.0 / p))
    raise ValueError(f"unknown norm {which!r}")


def threshold(x, mode):
    """Apply a :class:`Soft`, :class:`Hard` or :class:`TopK` threshold."""
    x = as_array(x, ndim=1)
    if isinstance(mode, Soft):
        if mode.alpha < 0:
            raise ValueError("soft threshold level must be nonnegative")
        return np.sign(x) * np.maximum(np.abs(x) - mode.alpha, 0.0)
    if isinstance(mode, Hard):
        if mode.eps < 0:
            raise ValueError("hard threshold level must be nonnegative")
        out = x.copy()
        out[np.abs(out) <= mode.eps] = 0.0
        return out
    if isinstance(mode, TopK):
        k = int(mode.k)
        if k < 0:
            raise ValueError("top-k threshold requires k >= 0")
        out = np.zeros_like(x)
        if k == 0:
            return out
        if k >= x.size:
            return x.copy()
        # stable selection: ties keep the lowest index
        order = np.argsort(-np.abs(x), kind="stable")[:k]
        out[order] = x[order]
        return out
    raise ValueError(f"unknown threshold mode {mode!r}")


def project_l1_ball(x, tau):
    """Euclidean projection of ``x`` onto ``{z : ||z||_1 <= tau}``.

    Sort-based exact algorithm; O(n log n).
    """
    x = as_array(x, ndim=1)
    if tau < 0:
        raise ValueError("l1-ball radius must be nonnegative")
    if tau == 0:
        return np.zeros_like(x)
    mags = np.abs(x)
    if mags.sum() <= tau:
        return x.copy()
    u = np.sort(mags)[::-1]
    css = np.cumsum(u)
    j = np.arange(1, u.size + 1)
    hit = u * j > (css - tau)
    hit[0] = True  # u1 > u1 - tau holds whenever tau > 0; guards rounding
    rho = np.nonzero(hit)[0][-1]
    theta = (css[rho] - tau) / (rho + 1.0)
    return np.sign(x) * np.maximum(mags - theta, 0.0)


def eigh_sym(Q, sym_tol=1e-10):
    """Eigendecomposition of a symmetric matrix, eigenvalues descending.

    Returns ``(w, V)`` with ``Q @ V[:, i] == w[i] * V[:, i]`` and ``V``
    orthonormal. Raises ``ValueError`` when ``Q`` is not symmetric within
    ``sym_tol``.
    """
    Q = as_array(Q, ndim=2)
    if Q.shape[0] != Q.shape[1]:
        raise ValueError("eigh_sym requires a square matrix")
    if Q.size and np.max(np.abs(Q - Q.T)) > sym_tol:
        raise ValueError("matrix is not symmetric within tolerance")
    w, V = np.linalg.eigh(0.5 * (Q + Q.T))
    return w[::-1].copy(), V[:, ::-1].copy()


def rank_by_elimination(A, tol=ZERO_TOL):
    """Numerical rank via Gaussian elimination with partial pivoting.

    The tolerance is relative to the largest remaining pivot candidate of
    the original scale (``tol * max(1, ||A||_inf)``).
    """
    A = as_array(A, ndim=2).copy()
    m, n = A.shape
    if m == 0 or n == 0:
        return 0
    scale = max(1.0, float(np.max(np.abs(A))))
    r = 0
    for j in range(n):
        if r == m:
            break
        p = r + int(np.argmax(np.abs(A[r:, j])))
        if abs(A[p, j]) <= tol * scale:
            continue
        if p != r:
            A[[r, p]] = A[[p, r]]
        A[r + 1 :, j:] -= np.outer(A[r + 1 :, j] / A[r, j], A[r, j:])
        r += 1
    return r


def spectral_norm_sq(A, iters=50):
    """Estimate ``||A^T A||_2`` by power iteration (deterministic start)."""
    A = as_array(A, ndim=2)
    n = A.shape[1]
    if n == 0 or A.shape[0] == 0:
        return 0.0
    v = np.linspace(1.0, 2.0, n)
    v /= np.linalg.norm(v)
    lam = 0.0
    for _ in range(iters):
        w = A.T @ (A @ v)
        nw = np.linalg.norm(w)
        if nw <= 1e-300:
            return 0.0
        v = w / nw
        lam = nw
    return float(lam)


# --------------------------------------------------------------------------
# problem instances and solutions


@dataclass
class ProblemInstance:
    """One instance of the three cardinality problem shapes.

    kind
        ``"cardmin"``: minimize ``||x||_0`` subject to
        ``||Ax - b||_residual_norm <= delta``;
        ``"cardcons"``: minimize ``||Ax - b||_2^2`` subject to
        ``||x||_0 <= k``;
        ``"cardreg"``: minimize ``||x||_0 + ||Ax - b||_2^2 / lam``.
    var_bounds
        Optional per-variable boxes ``(lb, ub)`` with ``lb <= 0 <= ub``.
    """

    A: Matrix
    b: np.ndarray
    kind: str
    delta: float = 0.0
    k: int | None = None
    lam: float | None = None
    residual_norm: str = "l2"
    var_bounds: tuple | None = None

    def __post_init__(self):
        if not isinstance(self.A, Matrix):
            self.A = Matrix.from_array(self.A)
        self.b = as_array(self.b, ndim=1)
        if self.b.size != self.A.rows:
            raise ValueError("b length must equal the number of rows of A")
        if self.kind not in (CARDMIN, CARDCONS, CARDREG):
            raise ValueError(f"unknown problem kind {self.kind!r}")
        if self.residual_norm not in _NORMS:
            raise ValueError(f"unknown residual norm {self.residual_norm!r}")
        if self.kind == CARDMIN:
            if self.delta < 0:
                raise ValueError("delta must be nonnegative")
            if self.delta > 0 and self.delta >= norm(self.b, self.residual_norm):
                # x = 0 would already be feasible: the instance is trivial
                raise ValueError("delta must be smaller than the norm of b")
        elif self.kind == CARDCONS:
            if self.k is None or not 0 <= int(self.k) <= self.n:
                raise ValueError("cardcons requires 0 <= k <= n")
            self.k = int(self.k)
        else:
            if self.lam is None or self.lam <= 0:
                raise ValueError("cardreg requires lam > 0")
        if self.var_bounds is not None:
            lb = as_array(self.var_bounds[0], ndim=1)
            ub = as_array(self.var_bounds[1], ndim=1)
            if lb.size != self.n or ub.size != self.n:
                raise ValueError("var_bounds must have length n")
            if np.any(lb > 0) or np.any(ub < 0):
                raise ValueError("var_bounds must satisfy lb <= 0 <= ub")
            self.var_bounds = (lb, ub)

    @property
    def m(self) -> int:
        return self.A.rows

    @property
    def n(self) -> int:
        return self.A.cols

    def objective(self, x, zero_tol=ZERO_TOL) -> float:
        """Evaluate this instance's objective at ``x``."""
        x = as_array(x, ndim=1)
        r = self.A.array @ x - self.b
        if self.kind == CARDMIN:
            return norm(x, "l0", tol=zero_tol)
        if self.kind == CARDCONS:
            return float(r @ r)
        return norm(x, "l0", tol=zero_tol) + float(r @ r) / self.lam

    def residual_value(self, x) -> float:
        x = as_array(x, ndim=1)
        return norm(self.A.array @ x - self.b, self.residual_norm)

    def to_json(self) -> str:
        doc = {
            "m": self.m,
            "n": self.n,
            "A": [[float(v) for v in row] for row in self.A.array],
            "b": [float(v) for v in self.b],
            "kind": self.kind,
            "delta": self.delta,
            "k": self.k,
            "lambda": self.lam,
            "residual_norm": self.residual_norm,
            "lb": None if self.var_bounds is None else [float(v) for v in self.var_bounds[0]],
            "ub": None if self.var_bounds is None else [float(v) for v in self.var_bounds[1]],
        }
        return json.dumps(doc, indent=1)

    @classmethod
    def from_json(cls, text: str) -> "ProblemInstance":
        doc = json.loads(text)
        bounds = None
        if doc.get("lb") is not None and doc.get("ub") is not None:
            bounds = (doc["lb"], doc["ub"])
        raw = doc["A"]
        if raw and isinstance(raw[0], list):  # row-major nested form
            raw = [v for row in raw for v in row]
        return cls(
            A=Matrix(doc["m"], doc["n"], [float(v) for v in raw]),
            b=doc["b"],
            kind=doc["kind"],
            delta=float(doc.get("delta") or 0.0),
            k=doc.get("k"),
            lam=doc.get("lambda"),
            residual_norm=doc.get("residual_norm") or "l2",
            var_bounds=bounds,
        )


@dataclass
class Solution:
    """A point plus its certified role (optimal / feasible / ...)."""

    x: np.ndarray
    objective: float
    support: list = field(default_factory=list)
    cardinality: int = 0
    status: str = FEASIBLE

    @classmethod
    def from_x(cls, x, objective, status=FEASIBLE, zero_tol=ZERO_TOL):
        x = as_array(x, ndim=1)
        supp, card = support_of(x, zero_tol)
        return cls(x=x, objective=float(objective), support=supp, cardinality=card, status=status)
