"""Symmetric eigensolvers and helpers for working on the complement of 1.

Two routes are provided.  :func:`jacobi_eigh` is a cyclic Jacobi rotation
solver written out in full; it is the reference implementation behind
:func:`sym_eigen`.  The optimizers call LAPACK (``numpy.linalg.eigh``) in
their inner loops because they evaluate thousands of spectra; the test suite
checks both routes against each other.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import MatchaError, NonSymmetric

SYMMETRY_TOL = 1e-12
JACOBI_TOL = 1e-12
JACOBI_MAX_SWEEPS = 100


@dataclass(frozen=True)
class SymEigenResult:
    eigenvalues: np.ndarray  # ascending
    eigenvectors: np.ndarray  # columns, orthonormal


def check_symmetric(matrix, tol: float = SYMMETRY_TOL) -> np.ndarray:
    a = np.asarray(matrix, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise NonSymmetric(f"expected a square matrix, got shape {a.shape}")
    if a.size and np.max(np.abs(a - a.T)) > tol * max(1.0, np.max(np.abs(a))):
        raise NonSymmetric("matrix is not symmetric within tolerance")
    return a


def jacobi_eigh(matrix, tol: float = JACOBI_TOL, max_sweeps: int = JACOBI_MAX_SWEEPS):
    """Cyclic-by-row Jacobi eigendecomposition of a symmetric matrix.

    Sweeps over every (p, q) pair with p < q, annihilating ``a[p, q]`` with a
    plane rotation, until the off-diagonal Frobenius norm drops below
    ``tol * max(1, ||A||_F)``.  Returns unsorted ``(eigenvalues, vectors)``.
    """
    a = np.array(matrix, dtype=float)
    n = a.shape[0]
    v = np.eye(n)
    threshold = tol * max(1.0, float(np.linalg.norm(a)))
    for _ in range(max_sweeps):
        off = float(np.linalg.norm(a - np.diag(np.diag(a))))
        if off <= threshold:
            return np.diag(a).copy(), v
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                h = a[q, q] - a[p, p]
                if abs(apq) < 1e-18 * abs(h):
                    t = apq / h  # theta**2 would overflow; t ~ 1 / (2 theta)
                else:
                    theta = h / (2.0 * apq)
                    t = (1.0 if theta >= 0 else -1.0) / (abs(theta) + np.hypot(theta, 1.0))
                c = 1.0 / np.hypot(t, 1.0)
                s = t * c
                col_p = a[:, p].copy()
                col_q = a[:, q]
                a[:, p] = c * col_p - s * col_q
                a[:, q] = s * col_p + c * col_q
                row_p = a[p, :].copy()
                row_q = a[q, :]
                a[p, :] = c * row_p - s * row_q
                a[q, :] = s * row_p + c * row_q
                a[p, q] = a[q, p] = 0.0
                vp = v[:, p].copy()
                vq = v[:, q]
                v[:, p] = c * vp - s * vq
                v[:, q] = s * vp + c * vq
    raise MatchaError(f"Jacobi did not converge in {max_sweeps} sweeps")


def sym_eigen(matrix, method: str = "jacobi") -> SymEigenResult:
    """Full spectral decomposition with eigenvalues in ascending order.

    ``method`` is ``"jacobi"`` (default, the in-house solver) or ``"lapack"``.
    """
    a = check_symmetric(matrix)
    if a.shape[0] == 0:
        return SymEigenResult(np.zeros(0), np.zeros((0, 0)))
    if method == "jacobi":
        w, v = jacobi_eigh((a + a.T) / 2.0)
        order = np.argsort(w, kind="stable")
        w, v = w[order], v[:, order]
    elif method == "lapack":
        w, v = np.linalg.eigh((a + a.T) / 2.0)
    else:
        raise ValueError(f"unknown eigensolver {method!r}")
    return SymEigenResult(w, v)


@lru_cache(maxsize=None)
def _helmert_basis(m: int) -> np.ndarray:
    basis = np.zeros((m, m - 1))
    for k in range(1, m):
        basis[:k, k - 1] = 1.0
        basis[k, k - 1] = -float(k)
        basis[:, k - 1] /= np.sqrt(k * (k + 1.0))
    basis.setflags(write=False)
    return basis


def ones_complement_basis(m: int) -> np.ndarray:
    """Orthonormal basis (as columns) of the subspace orthogonal to all-ones."""
    return _helmert_basis(m)


def restrict_to_ones_complement(matrix) -> np.ndarray:
    """Compress a symmetric m x m matrix onto 1-perp; returns (m-1) x (m-1)."""
    a = np.asarray(matrix, dtype=float)
    q = ones_complement_basis(a.shape[0])
    r = q.T @ a @ q
    return (r + r.T) / 2.0


def deflated_eigh(matrix):
    """Eigenpairs of a symmetric matrix restricted to 1-perp (LAPACK route).

    Eigenvectors are returned in the original m-dimensional coordinates.
    """
    a = np.asarray(matrix, dtype=float)
    m = a.shape[0]
    if m < 2:
        return np.zeros(0), np.zeros((m, 0))
    w, v = np.linalg.eigh(restrict_to_ones_complement(a))
    return w, ones_complement_basis(m) @ v


def averaging_matrix(m: int) -> np.ndarray:
    """J = 11^T / m."""
    return np.full((m, m), 1.0 / m)
