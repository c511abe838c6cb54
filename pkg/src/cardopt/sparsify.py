"""Nullspace bases and greedy row-transform matrix sparsification.

Given a full-row-rank ``A``, find an invertible ``V`` minimizing the
nonzeros of ``VA``. Rows of ``V`` are picked greedily: each step
enumerates candidate zero patterns by decreasing size and keeps the
first pattern whose nullspace contains a vector independent of the rows
chosen so far, so every step is an exhaustively solved subproblem. The
first step has no independence restriction and therefore computes the
sparsest nonzero vector of the row space of ``A`` -- the same quantity
as ``analysis.cospark`` of ``A^T``, which the tests cross-check.

Desk scale only (m <= 5, n <= 12): the zero-pattern enumeration is
exponential in ``n``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from . import core

NNZ_TOL = 1e-9


def _nnz(M) -> int:
    return int(np.sum(np.abs(M) > NNZ_TOL))


@dataclass
class SparsifyResult:
    """An invertible row transform and its nonzero bookkeeping."""

    V: np.ndarray
    nnz_before: int
    nnz_after: int
    per_row_supports: list

    def __post_init__(self):
        self.V = core.as_array(self.V, ndim=2)
        if abs(np.linalg.det(self.V)) <= 1e-10:
            raise ValueError("V must be nonsingular")
        if self.nnz_after > self.nnz_before:
            raise ValueError("sparsification must not add nonzeros")


def nullspace_basis(A) -> np.ndarray:
    """Orthonormal basis of the nullspace of a full-row-rank wide matrix.

    Returns ``B`` of shape ``n x (n - m)`` with ``A @ B = 0``. Square
    (or tall) input is rejected -- there is no basis to return.
    """
    A = core.as_array(A, ndim=2)
    m, n = A.shape
    if m >= n:
        raise ValueError("nullspace_basis needs a strictly wide matrix (m < n)")
    s, vt = np.linalg.svd(A)[1:]
    if int(np.sum(s > 1e-9 * max(1.0, float(s[0])))) < m:
        raise ValueError("nullspace_basis requires full row rank")
    return vt[m:].T.copy()


def _pattern_nullspace(A, zero_cols):
    """Basis of the row vectors ``v`` with ``v @ A[:, zero_cols] = 0``."""
    m = A.shape[0]
    if not zero_cols:
        return np.eye(m)
    block = A[:, list(zero_cols)].T
    u, s, vt = np.linalg.svd(block, full_matrices=True)
    r = int(np.sum(s > 1e-9 * max(1.0, float(s[0]) if s.size else 1.0)))
    return vt[r:].T


def _sparsest_new_row(A, picked):
    """The sparsest ``v^T A`` over ``v`` independent of the picked rows.

    Zero patterns are scanned by decreasing size with lexicographic
    tie-break, so the first hit is the deterministic minimizer. A
    pattern admits a new row iff one of its nullspace basis vectors is
    independent of the picked rows (if all of them were dependent, the
    whole pattern nullspace would be contained in their span).
    """
    m, n = A.shape
    V = np.vstack(picked) if picked else np.zeros((0, m))
    base = core.rank_by_elimination(V)
    for size in range(n - 1, -1, -1):
        for zero_cols in itertools.combinations(range(n), size):
            W = _pattern_nullspace(A, zero_cols)
            for i in range(W.shape[1]):
                cand = W[:, i]
                if core.rank_by_elimination(np.vstack([V, cand])) > base:
                    return cand
    raise AssertionError("the empty pattern always admits a new row")


def greedy_sparsify(A) -> SparsifyResult:
    """Row-by-row greedy minimization of ``||VA||_0`` over invertible V.

    Each row solves its subproblem exhaustively, so at this scale the
    greedy matches the brute-force optimum (a tested claim, not an
    assumption). The first row's nonzero count equals the cospark of
    ``A^T``.
    """
    A = core.as_array(A, ndim=2)
    m, n = A.shape
    if m > 5 or n > 12:
        raise ValueError("greedy_sparsify is limited to m <= 5, n <= 12")
    if core.rank_by_elimination(A) < m:
        raise ValueError("greedy_sparsify requires full row rank")
    picked = []
    for _ in range(m):
        picked.append(_sparsest_new_row(A, picked))
    V = np.vstack(picked)
    product = V @ A
    supports = [core.support_of(row, NNZ_TOL)[0] for row in product]
    return SparsifyResult(
        V=V,
        nnz_before=_nnz(A),
        nnz_after=_nnz(product),
        per_row_supports=supports,
    )
