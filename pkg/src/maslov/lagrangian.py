"""Lagrangian frames and the Riccati map S = YX^-1.

A frame is a full-rank 2n x n matrix (X; Y) whose column span is a Lagrangian
plane. Where X is invertible the plane is the graph of the symmetric matrix
S = YX^-1; where X degenerates, the surrogate Y * adj(X) = (det X) * S stays
analytic and carries the eigenvector branches through the singularity. The
crossing form lives here too, evaluated against the vertical reference plane.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import linalg
from .errors import InvalidInputError, InvalidKernelError, NearSingularError, NonRegularCrossingError

#: |det X| below this fraction of its natural scale counts as singular.
DET_GUARD_REL = 1e-9

#: Relative eigenvalue size below which a crossing form counts as degenerate.
CROSSING_DEGENERACY_REL = 1e-6


@dataclass(frozen=True)
class Frame:
    """Stacked frame (X; Y) of n x n blocks spanning an n-plane in 2n-space."""

    x_block: np.ndarray
    y_block: np.ndarray

    @property
    def n(self) -> int:
        return self.x_block.shape[0]

    def stacked(self) -> np.ndarray:
        return np.vstack([self.x_block, self.y_block])

    def column_scale(self) -> float:
        """Largest column norm of the stacked frame (one for renormalized frames)."""
        s = self.stacked()
        return float(np.max(np.sqrt(np.sum(s * s, axis=0))))

    def lagrangian_residual(self) -> float:
        """Max-norm of X^T Y - Y^T X relative to the frame scale."""
        x, y = self.x_block, self.y_block
        raw = float(np.max(np.abs(x.T @ y - y.T @ x)))
        scale = max(self.column_scale() ** 2, 1e-300)
        return raw / scale

    def projector(self) -> np.ndarray:
        """Orthogonal projector onto the column span (frame-representation free)."""
        s = self.stacked()
        return s @ np.linalg.solve(s.T @ s, s.T)


def frame(x_block, y_block) -> Frame:
    x = np.atleast_2d(np.asarray(x_block, dtype=float))
    y = np.atleast_2d(np.asarray(y_block, dtype=float))
    if x.shape != y.shape or x.shape[0] != x.shape[1]:
        raise InvalidInputError(f"frame blocks must be square and matching, got {x.shape}, {y.shape}")
    return Frame(x, y)


@dataclass(frozen=True)
class CoefficientBlocks:
    """Blocks (A B; C D) of the linear frame equation.

    The reaction-diffusion specialization has a = d = 0 and b = I, which is
    what :func:`reaction_diffusion_blocks` builds; the general form is kept so
    other second-order systems can drive the same machinery.
    """

    a: np.ndarray
    b: np.ndarray
    c: np.ndarray
    d: np.ndarray


def reaction_diffusion_blocks(c: np.ndarray) -> CoefficientBlocks:
    n = c.shape[0]
    z = np.zeros((n, n))
    return CoefficientBlocks(z, np.eye(n), np.asarray(c, dtype=float), z.copy())


def frame_rhs(blocks: CoefficientBlocks, f: Frame) -> Frame:
    """Derivative (X', Y') = (AX + BY, CX + DY) of the frame flow."""
    x, y = f.x_block, f.y_block
    return Frame(blocks.a @ x + blocks.b @ y, blocks.c @ x + blocks.d @ y)


def riccati_s(f: Frame, det_guard_rel: float = DET_GUARD_REL) -> tuple[np.ndarray, float]:
    """Riccati matrix S = Y X^-1, symmetrized.

    Returns ``(s, asymmetry)`` where ``asymmetry`` is the max-norm of what the
    averaging discarded -- it measures drift of the frame off the Lagrangian
    submanifold and should stay near roundoff. Raises
    :class:`NearSingularError` when |det X| is under the guard; the caller
    must switch to :func:`continuous_s` there.
    """
    x, y = f.x_block, f.y_block
    d = linalg.det(x)
    if abs(d) <= det_guard_rel * det_scale(f.column_scale(), f.n):
        raise NearSingularError(f"det X = {d:.3e} is below the singularity guard")
    s = np.linalg.solve(x.T, y.T).T
    asym = float(np.max(np.abs(s - s.T)))
    return 0.5 * (s + s.T), asym


def det_scale(column_scale: float, n: int) -> float:
    """Natural magnitude of det X inside a frame of the given column scale.

    Scaling by ||X|| itself would be self-referential: at a crossing the X
    block is exactly what collapses (entirely so for n = 1).
    """
    return max(column_scale**n, 1e-300)


def continuous_s(f: Frame) -> tuple[np.ndarray, float]:
    """The analytic surrogate m = Y adj(X) = (det X) S, with det X.

    Valid at singularities of S; eigenvalues nu_j relate to the Riccati
    branches by mu_j = nu_j / det X with identical eigenvectors.
    """
    adj, d = linalg.adjugate_det(f.x_block)
    m = f.y_block @ adj
    return 0.5 * (m + m.T), d


def riccati_rhs(blocks: CoefficientBlocks, s: np.ndarray) -> np.ndarray:
    """Right-hand side C + DS - SA - SBS of the matrix Riccati equation.

    For a = d = 0, b = I this is C - S^2, the flow of the logarithmic
    derivative of solutions of X'' = CX.
    """
    s = np.asarray(s, dtype=float)
    return blocks.c + blocks.d @ s - s @ blocks.a - s @ blocks.b @ s


def crossing_form(
    f: Frame,
    df: Frame,
    kernel_basis: list[np.ndarray] | np.ndarray,
    kernel_tol: float = 1e-6,
    degeneracy_rel: float = CROSSING_DEGENERACY_REL,
) -> np.ndarray:
    """Crossing form against the vertical plane on a kernel basis of X.

    Gamma_ij = -<Y u_i, X' u_j>, symmetrized; its signature is the local
    contribution to the Maslov index. Basis vectors must genuinely lie in
    ker X. A near-zero eigenvalue of Gamma means the crossing is not regular
    and no sign can be assigned, which is a hard error by policy.
    """
    if isinstance(kernel_basis, np.ndarray) and kernel_basis.ndim == 2:
        basis = kernel_basis.astype(float)
    else:
        basis = np.column_stack([np.asarray(u, dtype=float) for u in kernel_basis])
    if basis.shape[0] != f.n or basis.shape[1] < 1:
        raise InvalidKernelError(f"kernel basis shape {basis.shape} does not fit n = {f.n}")
    x, y = f.x_block, f.y_block
    # scale against the whole frame: at a crossing the X block itself collapses
    xscale = max(f.column_scale(), 1e-300)
    for j in range(basis.shape[1]):
        u = basis[:, j]
        if np.linalg.norm(x @ u) > kernel_tol * np.linalg.norm(u) * xscale:
            raise InvalidKernelError(f"basis vector {j} is not in ker X within tolerance")
    g = -(y @ basis).T @ (df.x_block @ basis)
    g = 0.5 * (g + g.T)
    vals, _ = linalg.sym_eig(g)
    gscale = max(float(np.max(np.abs(vals))), 1e-300)
    if np.min(np.abs(vals)) < degeneracy_rel * gscale:
        raise NonRegularCrossingError(f"crossing form eigenvalues {vals} are degenerate")
    return g


def form_signature(g: np.ndarray) -> int:
    """Number of positive minus number of negative eigenvalues."""
    vals, _ = linalg.sym_eig(g)
    scale = max(float(np.max(np.abs(vals))), 1e-300)
    return int(np.sum(vals > degeneracy_cut(scale))) - int(np.sum(vals < -degeneracy_cut(scale)))


def degeneracy_cut(scale: float) -> float:
    return CROSSING_DEGENERACY_REL * scale
