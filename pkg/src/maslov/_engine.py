"""Fixed-step sweep driver shared by the tracker and the trace writer.

Splits the domain into chunks, precomputes the coefficient C(x, lambda) on
each chunk's half-step grid (so neither kernel calls back into Python per
stage), and assembles the full per-step record. Chunking bounds the memory
of the precomputed coefficient array for larger system dimensions.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _backend, _kernel_py
from .errors import AmbiguousMatchError, BlowupError
from .lagrangian import Frame
from .problem import Problem

#: target number of doubles per precomputed coefficient chunk
_CHUNK_BUDGET = 1 << 22


@dataclass
class SweepRecord:
    """Everything observed along one integration, one entry per accepted step."""

    xs: np.ndarray
    x_blocks: np.ndarray
    y_blocks: np.ndarray
    det: np.ndarray
    nu: np.ndarray
    w: np.ndarray
    mu: np.ndarray
    smin: np.ndarray
    resid_max: float
    asym_max: float
    backend: str

    @property
    def n_steps(self) -> int:
        return len(self.xs) - 1

    def frame(self, i: int) -> Frame:
        return Frame(self.x_blocks[i].copy(), self.y_blocks[i].copy())


def fixed_grid(half_width: float, h: float) -> tuple[int, float]:
    """Number of steps and effective step landing exactly on +L."""
    if half_width == 0.0:
        return 0, h
    n = max(1, int(round(2.0 * half_width / h)))
    return n, 2.0 * half_width / n


def run_recorded_sweep(
    p: Problem,
    lam: float,
    init: Frame,
    half_width: float,
    h: float,
    renorm_every: int,
    det_guard_rel: float,
    backend=None,
) -> SweepRecord:
    impl = backend if backend is not None else _backend
    n = p.n
    n_steps, h_eff = fixed_grid(half_width, h)
    xs = -half_width + h_eff * np.arange(n_steps + 1)

    rec = SweepRecord(
        xs=xs,
        x_blocks=np.empty((n_steps + 1, n, n)),
        y_blocks=np.empty((n_steps + 1, n, n)),
        det=np.empty(n_steps + 1),
        nu=np.empty((n_steps + 1, n)),
        w=np.empty((n_steps + 1, n, n)),
        mu=np.empty((n_steps + 1, n)),
        smin=np.empty(n_steps + 1),
        resid_max=0.0,
        asym_max=0.0,
        backend=getattr(impl, "BACKEND_NAME", "python"),
    )

    obs = _kernel_py.observe_frame(init.x_block, init.y_block, None, det_guard_rel)
    rec.x_blocks[0] = init.x_block
    rec.y_blocks[0] = init.y_block
    rec.det[0] = obs["det"]
    rec.nu[0] = obs["nu"]
    rec.w[0] = obs["w"]
    rec.mu[0] = obs["mu"]
    rec.smin[0] = obs["smin"]
    rec.resid_max = obs["resid"]
    rec.asym_max = obs["asym"]
    if n_steps == 0:
        return rec

    chunk = max(64, min(n_steps, _CHUNK_BUDGET // (2 * n * n + 1)))
    # one global half-step grid, sliced per chunk: chunk boundaries must not
    # perturb the evaluation points, so results are bitwise chunk-invariant
    xs_half = xs[0] + 0.5 * h_eff * np.arange(2 * n_steps + 1)
    x_cur = np.array(init.x_block, dtype=float)
    y_cur = np.array(init.y_block, dtype=float)
    w_cur = np.array(rec.w[0], dtype=float)
    done = 0
    while done < n_steps:
        m = min(chunk, n_steps - done)
        c_half = np.ascontiguousarray(p.coefficient_grid(xs_half[2 * done : 2 * (done + m) + 1], lam))
        out = impl.run_sweep_chunk(
            c_half, h_eff, done, renorm_every, x_cur, y_cur, w_cur, det_guard_rel
        )
        got = out["status_step"] if out["status"] != _kernel_py.STATUS_OK else m
        sl = slice(done + 1, done + 1 + got)
        rec.x_blocks[sl] = out["x_blocks"][:got]
        rec.y_blocks[sl] = out["y_blocks"][:got]
        rec.det[sl] = out["det"][:got]
        rec.nu[sl] = out["nu"][:got]
        rec.w[sl] = out["w"][:got]
        rec.mu[sl] = out["mu"][:got]
        rec.smin[sl] = out["smin"][:got]
        rec.resid_max = max(rec.resid_max, float(out["resid_max"]))
        rec.asym_max = max(rec.asym_max, float(out["asym_max"]))

        x_fail = xs[min(done + got + 1, len(xs) - 1)]
        if out["status"] in (_kernel_py.STATUS_NONFINITE, _kernel_py.STATUS_DEGENERATE):
            raise BlowupError(
                f"frame became non-finite or rank-deficient near x = {x_fail:.6g}; "
                "shorten the renormalization interval or the step"
            )
        if out["status"] == _kernel_py.STATUS_AMBIGUOUS:
            raise AmbiguousMatchError(
                f"branch overlap fell below 1/sqrt(2) near x = {x_fail:.6g}; halve the step"
            )
        done += m
        x_cur = rec.x_blocks[done].copy()
        y_cur = rec.y_blocks[done].copy()
        w_cur = rec.w[done].copy()
    return rec
