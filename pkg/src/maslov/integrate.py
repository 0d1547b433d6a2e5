"""Time stepping of the linear frame equation on a truncated domain.

The frame flow is linear and never singular, so crossings of the plane path
show up as zeros of det X rather than as ODE blowups; exponential growth is
discarded by periodic orthonormalization, which changes the frame but never
the plane it spans. Fixed-step classical RK4 is the default; an embedded
Dormand-Prince 4(5) pair provides adaptive stepping.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable

import numpy as np

from . import _engine, _kernel_py
from .errors import BlowupError, InvalidInputError
from .lagrangian import CoefficientBlocks, Frame, frame_rhs, reaction_diffusion_blocks
from .linalg import orthonormalize
from .problem import Problem, unstable_frame_at_minus_infinity

METHOD_FIXED = "fixed"
METHOD_ADAPTIVE = "adaptive"


@dataclass(frozen=True)
class IntegratorConfig:
    """Stepper parameters; the defaults reproduce the reference results."""

    method: str = METHOD_FIXED
    h: float = 1e-3
    tol: float = 1e-10
    renorm_every: int = 20
    half_width: float = 20.0

    def __post_init__(self):
        if self.method not in (METHOD_FIXED, METHOD_ADAPTIVE):
            raise InvalidInputError(f"unknown method '{self.method}'")
        if self.h <= 0 or self.tol <= 0 or self.half_width < 0 or self.renorm_every < 1:
            raise InvalidInputError("need h > 0, tol > 0, half_width >= 0, renorm_every >= 1")

    def with_overrides(self, **kwargs) -> "IntegratorConfig":
        return replace(self, **{k: v for k, v in kwargs.items() if v is not None})


BlocksAt = Callable[[float], CoefficientBlocks]


def problem_blocks(p: Problem, lam: float) -> BlocksAt:
    return lambda x: reaction_diffusion_blocks(p.coefficient(x, lam))


def _check_finite(f: Frame) -> Frame:
    if not (np.all(np.isfinite(f.x_block)) and np.all(np.isfinite(f.y_block))):
        raise BlowupError("non-finite frame; renormalization interval too long")
    return f


def step(blocks_at: BlocksAt, f: Frame, x: float, h: float) -> Frame:
    """One classical RK4 step of the frame equation at position x."""
    if h <= 0:
        raise InvalidInputError("step size must be positive")
    k1 = frame_rhs(blocks_at(x), f)
    f2 = Frame(f.x_block + 0.5 * h * k1.x_block, f.y_block + 0.5 * h * k1.y_block)
    k2 = frame_rhs(blocks_at(x + 0.5 * h), f2)
    f3 = Frame(f.x_block + 0.5 * h * k2.x_block, f.y_block + 0.5 * h * k2.y_block)
    k3 = frame_rhs(blocks_at(x + 0.5 * h), f3)
    f4 = Frame(f.x_block + h * k3.x_block, f.y_block + h * k3.y_block)
    k4 = frame_rhs(blocks_at(x + h), f4)
    xn = f.x_block + (h / 6.0) * (k1.x_block + 2 * k2.x_block + 2 * k3.x_block + k4.x_block)
    yn = f.y_block + (h / 6.0) * (k1.y_block + 2 * k2.y_block + 2 * k3.y_block + k4.y_block)
    return _check_finite(Frame(xn, yn))


# Dormand-Prince 4(5) tableau; row 7 is the fifth-order solution, E the
# difference between the fifth- and fourth-order weights.
_DP_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_DP_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_DP_E = np.array(
    [71 / 57600, 0.0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40]
)


def step_rk45(blocks_at: BlocksAt, f: Frame, x: float, h: float) -> tuple[Frame, float]:
    """One embedded 4(5) step; returns the fifth-order frame and the error estimate."""
    ks = []
    for i in range(7):
        xi = f.x_block.copy()
        yi = f.y_block.copy()
        for a, k in zip(_DP_A[i], ks):
            if a != 0.0:
                xi += (h * a) * k.x_block
                yi += (h * a) * k.y_block
        ks.append(frame_rhs(blocks_at(x + _DP_C[i] * h), Frame(xi, yi)))
    x5 = f.x_block.copy()
    y5 = f.y_block.copy()
    for a, k in zip(_DP_A[6], ks):
        if a != 0.0:
            x5 += (h * a) * k.x_block
            y5 += (h * a) * k.y_block
    ex = sum(e * k.x_block for e, k in zip(_DP_E, ks))
    ey = sum(e * k.y_block for e, k in zip(_DP_E, ks))
    scale = max(1.0, float(np.max(np.abs(x5))), float(np.max(np.abs(y5))))
    err = h * max(float(np.max(np.abs(ex))), float(np.max(np.abs(ey)))) / scale
    return _check_finite(Frame(x5, y5)), err


def _renormalize(f: Frame) -> Frame:
    n = f.n
    q = orthonormalize(f.stacked())
    return Frame(q[:n].copy(), q[n:].copy())


def evolve(
    p: Problem,
    lam: float,
    cfg: IntegratorConfig,
    observer: Callable[[float, Frame], None] | None = None,
) -> Frame:
    """Integrate the unstable frame from -L to +L.

    The observer, when given, fires at the initial point and after every
    accepted step (so accepted steps + 1 invocations), receiving the
    post-renormalization frame. L = 0 returns the initial frame untouched.
    """
    f = unstable_frame_at_minus_infinity(p, lam)
    blocks_at = problem_blocks(p, lam)
    big_l = cfg.half_width
    if observer is not None:
        observer(-big_l, f)
    if big_l == 0.0:
        return f

    if cfg.method == METHOD_FIXED:
        n_steps, h_eff = _engine.fixed_grid(big_l, cfg.h)
        x = -big_l
        for i in range(n_steps):
            f = step(blocks_at, f, x, h_eff)
            x = -big_l + (i + 1) * h_eff
            if (i + 1) % cfg.renorm_every == 0:
                f = _renormalize(f)
            if observer is not None:
                observer(x, f)
        return f

    x = -big_l
    h = min(cfg.h * 100.0, big_l)
    accepted = 0
    while x < big_l - 1e-14 * big_l:
        h = min(h, big_l - x)
        f_try, err = step_rk45(blocks_at, f, x, h)
        if err <= cfg.tol:
            x += h
            accepted += 1
            f = f_try
            if accepted % cfg.renorm_every == 0:
                f = _renormalize(f)
            if observer is not None:
                observer(x, f)
        grow = 0.9 * (cfg.tol / max(err, 1e-300)) ** 0.2
        h *= min(5.0, max(0.2, grow))
        if h < 1e-12:
            raise BlowupError(f"adaptive step underflow at x = {x:.6g}")
    return f


def run_recorded(p: Problem, lam: float, cfg: IntegratorConfig, det_guard_rel: float) -> _engine.SweepRecord:
    """Recorded sweep with per-step branch observables.

    The fixed method runs through the selected kernel backend; the adaptive
    method steps in Python and shares the same observation code.
    """
    init = unstable_frame_at_minus_infinity(p, lam)
    if cfg.method == METHOD_FIXED:
        return _engine.run_recorded_sweep(
            p, lam, init, cfg.half_width, cfg.h, cfg.renorm_every, det_guard_rel
        )
    return _run_recorded_adaptive(p, lam, init, cfg, det_guard_rel)


def _run_recorded_adaptive(p, lam, init, cfg, det_guard_rel) -> _engine.SweepRecord:
    rows: list[dict] = []
    state = {"w": None}

    def observer(x: float, f: Frame):
        obs = _kernel_py.observe_frame(f.x_block, f.y_block, state["w"], det_guard_rel)
        state["w"] = obs["w"]
        rows.append({"x": x, "f": f, **obs})

    evolve(p, lam, cfg, observer)
    n = p.n
    rec = _engine.SweepRecord(
        xs=np.array([r["x"] for r in rows]),
        x_blocks=np.stack([r["f"].x_block for r in rows]),
        y_blocks=np.stack([r["f"].y_block for r in rows]),
        det=np.array([r["det"] for r in rows]),
        nu=np.stack([r["nu"] for r in rows]),
        w=np.stack([r["w"] for r in rows]),
        mu=np.stack([r["mu"] for r in rows]),
        smin=np.array([r["smin"] for r in rows]),
        resid_max=max(r["resid"] for r in rows),
        asym_max=max(r["asym"] for r in rows),
        backend="python-adaptive",
    )
    if any(r["ambiguous"] for r in rows):
        from .errors import AmbiguousMatchError

        x_bad = next(r["x"] for r in rows if r["ambiguous"])
        raise AmbiguousMatchError(f"branch overlap below 1/sqrt(2) near x = {x_bad:.6g}")
    assert rec.nu.shape == (len(rows), n)
    return rec
