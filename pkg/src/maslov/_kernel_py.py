"""Pure-numpy sweep kernel.

Reference implementation of the hot loop: fixed-step RK4 on the frame
equation X' = Y, Y' = C(x) X with periodic orthonormalization, observing
det X, the eigenpairs of the analytic surrogate Y adj(X), and the matched
branch values after every step. The compiled kernel in ``_kernel.pyx``
mirrors this loop operation for operation; keep the two in sync.
"""

from __future__ import annotations

import numpy as np

from . import errors, linalg
from .lagrangian import det_scale

BACKEND_NAME = "python"

STATUS_OK = 0
STATUS_NONFINITE = 1
STATUS_AMBIGUOUS = 2
STATUS_DEGENERATE = 3

MIN_OVERLAP = 1.0 / np.sqrt(2.0)


def greedy_match(prev_w: np.ndarray, vecs: np.ndarray) -> tuple[np.ndarray, np.ndarray, float]:
    """Assign new eigenvectors to branches by largest remaining overlap.

    Returns (perm, signs, worst) where column ``perm[i]`` of ``vecs`` (times
    ``signs[i]``) continues branch i and ``worst`` is the smallest winning
    overlap. Overlap below 1/sqrt(2) means the assignment is not trustworthy.
    """
    n = prev_w.shape[0]
    overlap = prev_w.T @ vecs
    mag = np.abs(overlap)
    perm = np.full(n, -1, dtype=np.int64)
    signs = np.ones(n)
    free_rows = np.ones(n, dtype=bool)
    free_cols = np.ones(n, dtype=bool)
    worst = 1.0
    for _ in range(n):
        sub = np.where(np.outer(free_rows, free_cols), mag, -1.0)
        i, j = np.unravel_index(np.argmax(sub), sub.shape)
        perm[i] = j
        signs[i] = 1.0 if overlap[i, j] >= 0.0 else -1.0
        worst = min(worst, float(mag[i, j]))
        free_rows[i] = False
        free_cols[j] = False
    return perm, signs, worst


def observe_frame(
    x_block: np.ndarray,
    y_block: np.ndarray,
    prev_w: np.ndarray | None,
    det_guard_rel: float,
) -> dict:
    """Per-step observables: det X, branch-ordered (nu, w, mu), diagnostics."""
    n = x_block.shape[0]
    adj, d = linalg.adjugate_det(x_block)
    m = y_block @ adj
    col2 = np.sum(x_block * x_block, axis=0) + np.sum(y_block * y_block, axis=0)
    colscale = float(np.sqrt(np.max(col2)))
    mscale = max(float(np.max(np.abs(m))), 1e-300)
    asym = float(np.max(np.abs(m - m.T))) / mscale
    vals, vecs = linalg.sym_eig(0.5 * (m + m.T))

    ambiguous = False
    if prev_w is None:
        nu, w = vals, vecs
    else:
        perm, signs, worst = greedy_match(prev_w, vecs)
        nu = vals[perm]
        w = vecs[:, perm] * signs
        ambiguous = worst < MIN_OVERLAP

    gram_vals, _ = linalg.sym_eig(x_block.T @ x_block)
    smin = float(np.sqrt(max(gram_vals[0], 0.0))) / max(colscale, 1e-300)

    if abs(d) > det_guard_rel * det_scale(colscale, n):
        mu = nu / d
    else:
        mu = np.full(n, np.nan)

    resid = float(np.max(np.abs(x_block.T @ y_block - y_block.T @ x_block)))
    resid /= max(colscale**2, 1e-300)
    return {
        "det": d,
        "nu": nu,
        "w": w,
        "mu": mu,
        "smin": smin,
        "resid": resid,
        "asym": asym,
        "ambiguous": ambiguous,
    }


def rk4_frame_step(x, y, c0, c1, c2, h):
    """One classical RK4 step of X' = Y, Y' = C(x) X on precomputed C slices."""
    k1x = y
    k1y = c0 @ x
    k2x = y + (0.5 * h) * k1y
    k2y = c1 @ (x + (0.5 * h) * k1x)
    k3x = y + (0.5 * h) * k2y
    k3y = c1 @ (x + (0.5 * h) * k2x)
    k4x = y + h * k3y
    k4y = c2 @ (x + h * k3x)
    xn = x + (h / 6.0) * (k1x + 2.0 * k2x + 2.0 * k3x + k4x)
    yn = y + (h / 6.0) * (k1y + 2.0 * k2y + 2.0 * k3y + k4y)
    return xn, yn


def run_sweep_chunk(
    c_half: np.ndarray,
    h: float,
    step_offset: int,
    renorm_every: int,
    x_block: np.ndarray,
    y_block: np.ndarray,
    prev_w: np.ndarray,
    det_guard_rel: float,
) -> dict:
    """Advance (len(c_half) - 1) // 2 steps, observing after each.

    Frames are renormalized whenever the global accepted-step counter hits a
    multiple of ``renorm_every``; recorded checkpoints are post-renorm.
    Returns partial results with a nonzero status on blowup or ambiguous
    branch matching, leaving valid data for steps [0, status_step).
    """
    n = x_block.shape[0]
    m = (c_half.shape[0] - 1) // 2
    out = {
        "x_blocks": np.empty((m, n, n)),
        "y_blocks": np.empty((m, n, n)),
        "det": np.empty(m),
        "nu": np.empty((m, n)),
        "w": np.empty((m, n, n)),
        "mu": np.empty((m, n)),
        "smin": np.empty(m),
        "resid_max": 0.0,
        "asym_max": 0.0,
        "status": STATUS_OK,
        "status_step": m,
    }
    x = np.array(x_block, dtype=float)
    y = np.array(y_block, dtype=float)
    w = np.array(prev_w, dtype=float)

    for i in range(m):
        x, y = rk4_frame_step(x, y, c_half[2 * i], c_half[2 * i + 1], c_half[2 * i + 2], h)
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
            out["status"] = STATUS_NONFINITE
            out["status_step"] = i
            break
        if (step_offset + i + 1) % renorm_every == 0:
            try:
                q = linalg.orthonormalize(np.vstack([x, y]))
            except errors.DegenerateFrameError:
                out["status"] = STATUS_DEGENERATE
                out["status_step"] = i
                break
            x, y = q[:n].copy(), q[n:].copy()
        obs = observe_frame(x, y, w, det_guard_rel)
        if obs["ambiguous"]:
            out["status"] = STATUS_AMBIGUOUS
            out["status_step"] = i
            break
        w = obs["w"]
        out["x_blocks"][i] = x
        out["y_blocks"][i] = y
        out["det"][i] = obs["det"]
        out["nu"][i] = obs["nu"]
        out["w"][i] = w
        out["mu"][i] = obs["mu"]
        out["smin"][i] = obs["smin"]
        out["resid_max"] = max(out["resid_max"], obs["resid"])
        out["asym_max"] = max(out["asym_max"], obs["asym"])
    return out
