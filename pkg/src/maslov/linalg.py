"""Small dense real symmetric linear algebra.

Everything here is self-contained and sized for n <= 32: a cyclic Jacobi
eigensolver (unconditionally orthogonal eigenvectors, which the branch
tracker depends on), a spectral matrix square root, an adjugate/determinant
pair that stays exact on singular input, and a Gram-Schmidt frame
orthonormalizer. All functions are pure; arrays are never modified in place.
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np

from .errors import DegenerateFrameError, InvalidInputError, NotPositiveDefiniteError

_JACOBI_SWEEP_LIMIT = 60


class EigDecomp(NamedTuple):
    """Eigenvalues ascending; ``vectors[:, j]`` belongs to ``values[j]``."""

    values: np.ndarray
    vectors: np.ndarray


def check_symmetric(a: np.ndarray, rel_tol: float = 1e-12) -> np.ndarray:
    """Validate symmetry of ``a`` and return it as a float array.

    The asymmetry tolerance is relative to the largest entry magnitude
    (floored at 1), matching what accumulated roundoff can produce.
    """
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise InvalidInputError(f"expected a square matrix, got shape {a.shape}")
    scale = max(1.0, float(np.max(np.abs(a))) if a.size else 0.0)
    asym = float(np.max(np.abs(a - a.T))) if a.size else 0.0
    if asym > rel_tol * scale:
        raise InvalidInputError(f"matrix is not symmetric (asymmetry {asym:.3e}, scale {scale:.3e})")
    return a


def sym_eig(a: np.ndarray) -> EigDecomp:
    """Eigendecomposition of a real symmetric matrix by cyclic Jacobi.

    Sweeps Givens rotations over the strict upper triangle until the
    off-diagonal Frobenius norm drops below 1e-14 * ||a||_F. Repeated
    eigenvalues yield an arbitrary orthonormal basis of the eigenspace;
    continuity across a parameter is the caller's concern.
    """
    a = check_symmetric(a)
    n = a.shape[0]
    w = 0.5 * (a + a.T)
    v = np.eye(n)
    if n == 1:
        return EigDecomp(np.array([w[0, 0]]), v)

    norm = float(np.linalg.norm(w))
    if norm == 0.0:
        return EigDecomp(np.zeros(n), v)
    tol = 1e-14 * norm

    for _ in range(_JACOBI_SWEEP_LIMIT):
        # summing off-diagonal squares directly; ||W||^2 - ||diag||^2 cannot
        # resolve off-norms below sqrt(eps) * ||A||
        off2 = 0.0
        for p in range(n - 1):
            for q in range(p + 1, n):
                off2 += w[p, q] * w[p, q] + w[q, p] * w[q, p]
        if np.sqrt(off2) < tol:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = w[p, q]
                if abs(apq) < 1e-300 or abs(apq) < 1e-18 * norm:
                    continue
                theta = 0.5 * (w[q, q] - w[p, p]) / apq
                if abs(theta) > 1e100:
                    t = 0.5 / theta
                else:
                    t = np.sign(theta) / (abs(theta) + np.hypot(theta, 1.0))
                    if t == 0.0:
                        t = 1.0 / (theta + np.hypot(theta, 1.0))
                c = 1.0 / np.hypot(t, 1.0)
                s = t * c
                rot_p = c * w[:, p] - s * w[:, q]
                rot_q = s * w[:, p] + c * w[:, q]
                w[:, p], w[:, q] = rot_p, rot_q
                rot_p = c * w[p, :] - s * w[q, :]
                rot_q = s * w[p, :] + c * w[q, :]
                w[p, :], w[q, :] = rot_p, rot_q
                w[p, q] = w[q, p] = 0.0
                rot_p = c * v[:, p] - s * v[:, q]
                rot_q = s * v[:, p] + c * v[:, q]
                v[:, p], v[:, q] = rot_p, rot_q

    vals = np.diag(w).copy()
    order = np.argsort(vals, kind="stable")
    return EigDecomp(vals[order], v[:, order])


def sqrt_spd(a: np.ndarray) -> np.ndarray:
    """Symmetric positive-definite square root via the spectral map."""
    vals, vecs = sym_eig(a)
    if np.any(vals <= 0.0):
        raise NotPositiveDefiniteError(f"matrix has a non-positive eigenvalue ({vals.min():.6e})")
    return (vecs * np.sqrt(vals)) @ vecs.T


def _det_direct(a: np.ndarray) -> float:
    n = a.shape[0]
    if n == 1:
        return float(a[0, 0])
    if n == 2:
        return float(a[0, 0] * a[1, 1] - a[0, 1] * a[1, 0])
    if n == 3:
        return float(
            a[0, 0] * (a[1, 1] * a[2, 2] - a[1, 2] * a[2, 1])
            - a[0, 1] * (a[1, 0] * a[2, 2] - a[1, 2] * a[2, 0])
            + a[0, 2] * (a[1, 0] * a[2, 1] - a[1, 1] * a[2, 0])
        )
    return _det_lu(a)


def _det_lu(a: np.ndarray) -> float:
    """Determinant by LU with partial pivoting; returns exact 0 on breakdown."""
    m = np.array(a, dtype=float)
    n = m.shape[0]
    det = 1.0
    for k in range(n):
        piv = k + int(np.argmax(np.abs(m[k:, k])))
        if m[piv, k] == 0.0:
            return 0.0
        if piv != k:
            m[[k, piv]] = m[[piv, k]]
            det = -det
        det *= m[k, k]
        m[k + 1 :, k + 1 :] -= np.outer(m[k + 1 :, k] / m[k, k], m[k, k + 1 :])
    return float(det)


def det(a: np.ndarray) -> float:
    """Determinant of a small square matrix."""
    a = np.asarray(a, dtype=float)
    return _det_direct(a) if a.shape[0] <= 4 else _det_lu(a)


def adjugate_det(a: np.ndarray) -> tuple[np.ndarray, float]:
    """Adjugate matrix and determinant, valid on singular input.

    Satisfies adj(a) @ a = det(a) * I identically; for n = 1 the adjugate is
    [[1]]. Cofactors come from direct minor determinants for n <= 4 and from
    pivoted LU on each minor above that, so no inversion is ever performed.
    """
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise InvalidInputError(f"expected a square matrix, got shape {a.shape}")
    n = a.shape[0]
    if n == 1:
        return np.array([[1.0]]), float(a[0, 0])
    if n == 2:
        adj = np.array([[a[1, 1], -a[0, 1]], [-a[1, 0], a[0, 0]]])
        return adj, float(a[0, 0] * a[1, 1] - a[0, 1] * a[1, 0])

    minor_det = _det_direct if n <= 4 else _det_lu
    rows = np.arange(n)
    adj = np.empty((n, n))
    for i in range(n):
        ri = rows != i
        for j in range(n):
            sub = a[np.ix_(ri, rows != j)]
            adj[j, i] = ((-1.0) ** (i + j)) * minor_det(sub)
    return adj, det(a)


def orthonormalize(m: np.ndarray, pivot_rel_tol: float = 1e-13) -> np.ndarray:
    """Orthonormalize the columns of ``m`` without changing their span.

    Modified Gram-Schmidt with a second pass; equivalent to right-multiplying
    by an inverse upper-triangular factor with positive diagonal, so
    orientation-sensitive quantities (the sign of det X along a frame path)
    are preserved. A pivot below ``pivot_rel_tol * ||m||_F`` means the
    columns are numerically dependent.
    """
    q = np.array(m, dtype=float)
    if q.ndim != 2:
        raise InvalidInputError(f"expected a matrix, got shape {q.shape}")
    scale = float(np.linalg.norm(q))
    if scale == 0.0:
        raise DegenerateFrameError("zero frame cannot be orthonormalized")
    for j in range(q.shape[1]):
        for _ in range(2):
            for i in range(j):
                q[:, j] -= np.dot(q[:, i], q[:, j]) * q[:, i]
        nrm = float(np.linalg.norm(q[:, j]))
        if nrm <= pivot_rel_tol * scale:
            raise DegenerateFrameError(f"rank-deficient frame (pivot {nrm:.3e} at column {j})")
        q[:, j] /= nrm
    return q
