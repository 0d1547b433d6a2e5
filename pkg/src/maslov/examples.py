"""Built-in problems with closed-form solutions, used as oracles.

Both examples linearize a reaction-diffusion equation about an explicit
sech^2 pulse, and both reduce to the same solvable operator

    w_ss + 12 sech^2(s) w = g^2 w,

whose decaying-at-minus-infinity solution is e^{g s} h(s) with

    h(s) = a0 + a1 tanh(s) + a2 tanh^2(s) + tanh^3(s),
    a0 = g (4 - g^2) / 15,  a1 = (2 g^2 - 3) / 5,  a2 = -g.

Example 1 is the scalar problem V(x) = -1 + 3 sech^2(x/2) (s = x/2,
g = 2 sqrt(lambda + 1)); example 2 is the 2-channel problem in decoupled
coordinates, V(x) = diag(12 sech^2 x - 4, 12 sech^2 x - 4 - 2c), whose two
channels use g = sqrt(lambda + 4) and g = sqrt(lambda + 4 + 2c). Poles of the
logarithmic derivatives of these solutions are the crossings the numeric
pipeline must find; their one-sided signs give the index contributions.
"""

from __future__ import annotations

import numpy as np
from scipy.optimize import brentq

from .errors import EssentialSpectrumError, InvalidInputError
from .problem import Problem

#: threshold on |h| below which the closed-form branch reports a pole
POLE_EPS = 1e-300

#: dense pre-scan step for bracketing zeros of the closed-form numerators
PRESCAN_STEP = 1e-3


def _family_coeffs(g: float) -> tuple[float, float, float]:
    return g * (4.0 - g * g) / 15.0, (2.0 * g * g - 3.0) / 5.0, -g


def _family_h(g: float, s):
    """h and dh/ds for the tanh-polynomial factor of the decaying solution."""
    a0, a1, a2 = _family_coeffs(g)
    t = np.tanh(s)
    h = a0 + a1 * t + a2 * t * t + t**3
    hs = (a1 + 2.0 * a2 * t + 3.0 * t * t) * (1.0 - t * t)
    return h, hs


def _log_derivative(g: float, scale: float, s):
    """d/dx log of e^{g s} h(s) with x = s / scale; poles where h = 0."""
    h, hs = _family_h(g, s)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = scale * (g + hs / h)
    if np.isscalar(s) or np.ndim(s) == 0:
        return float(out) if abs(h) >= POLE_EPS else float("inf")
    out = np.asarray(out)
    out[np.abs(h) < POLE_EPS] = np.inf
    return out


# ---------------------------------------------------------------- example 1


def example1_gamma(lam: float) -> float:
    if lam + 1.0 <= 0.0:
        raise EssentialSpectrumError(f"lambda = {lam} needs lambda + 1 > 0")
    return 2.0 * np.sqrt(lam + 1.0)


def example1_problem() -> Problem:
    """Scalar pulse problem: V(x) = -1 + 3 sech^2(x/2), limits -1."""

    def v(x: float) -> np.ndarray:
        return np.array([[-1.0 + 3.0 / np.cosh(x / 2.0) ** 2]])

    def v_grid(xs: np.ndarray) -> np.ndarray:
        return (-1.0 + 3.0 / np.cosh(xs / 2.0) ** 2)[:, None, None]

    return Problem(
        n=1,
        potential=v,
        v_minus=np.array([[-1.0]]),
        v_plus=np.array([[-1.0]]),
        decay_note="sech^2(x/2) pulse, potential approaches its limits like 12 e^{-|x|}",
        potential_grid=v_grid,
    )


def example1_analytic_s(lam: float, x):
    """Closed-form Riccati solution S(x); +inf marks a pole."""
    g = example1_gamma(lam)
    return _log_derivative(g, 0.5, np.asarray(x, dtype=float) / 2.0)


def example1_pole_positions(lam: float, half_width: float) -> list[float]:
    g = example1_gamma(lam)
    return _bracketed_zeros(lambda x: _family_h(g, x / 2.0)[0], half_width)


# ---------------------------------------------------------------- example 2


def _example2_gammas(lam: float, c: float) -> tuple[float, float]:
    if lam + 4.0 <= 0.0 or lam + 4.0 + 2.0 * c <= 0.0:
        raise EssentialSpectrumError(
            f"lambda = {lam}, c = {c} needs lambda + 4 > 0 and lambda + 4 + 2c > 0"
        )
    return np.sqrt(lam + 4.0), np.sqrt(lam + 4.0 + 2.0 * c)


def example2_problem(c: float) -> Problem:
    """Coupled pulse system in decoupled coordinates.

    V(x) = diag(12 sech^2 x - 4, 12 sech^2 x - 4 - 2c); requires c > -2 so
    both channels keep essential spectrum below zero.
    """
    if c <= -2.0:
        raise InvalidInputError(f"coupling c = {c} must exceed -2")

    def v(x: float) -> np.ndarray:
        base = 12.0 / np.cosh(x) ** 2
        return np.array([[base - 4.0, 0.0], [0.0, base - 4.0 - 2.0 * c]])

    def v_grid(xs: np.ndarray) -> np.ndarray:
        base = 12.0 / np.cosh(xs) ** 2
        out = np.zeros((len(xs), 2, 2))
        out[:, 0, 0] = base - 4.0
        out[:, 1, 1] = base - 4.0 - 2.0 * c
        return out

    return Problem(
        n=2,
        potential=v,
        v_minus=np.diag([-4.0, -4.0 - 2.0 * c]),
        v_plus=np.diag([-4.0, -4.0 - 2.0 * c]),
        decay_note="sech^2(x) pulse in both channels, limits approached like 48 e^{-2|x|}",
        potential_grid=v_grid,
    )


def example2_analytic_branches(lam: float, c: float, x):
    """The two Riccati eigenvalue branches (mu_1, mu_2); +inf marks poles."""
    gu, gv = _example2_gammas(lam, c)
    xs = np.asarray(x, dtype=float)
    return _log_derivative(gu, 1.0, xs), _log_derivative(gv, 1.0, xs)


def example2_pole_positions(lam: float, c: float, half_width: float) -> tuple[list[float], list[float]]:
    gu, gv = _example2_gammas(lam, c)
    return (
        _bracketed_zeros(lambda x: _family_h(gu, x)[0], half_width),
        _bracketed_zeros(lambda x: _family_h(gv, x)[0], half_width),
    )


# ------------------------------------------------------------------- oracle


def _bracketed_zeros(fn, half_width: float, step: float = PRESCAN_STEP) -> list[float]:
    """Zeros of fn on (-L, L): dense sign scan, then brentq on each bracket."""
    xs = np.arange(-half_width, half_width + step, step)
    vals = np.asarray([fn(x) for x in xs])
    zeros = []
    sign = np.sign(vals)
    for i in np.flatnonzero(sign[:-1] * sign[1:] < 0):
        zeros.append(float(brentq(fn, xs[i], xs[i + 1], xtol=1e-13, rtol=1e-15)))
    for i in np.flatnonzero(sign == 0):
        zeros.append(float(xs[i]))
    return sorted(zeros)


def _pole_sign(branch_at, x0: float, delta: float = 1e-7) -> int:
    """Index contribution of one pole from its one-sided limits.

    Left limit +inf with right limit -inf contributes +1; the reverse
    contributes -1. Anything else is not an order-one pole.
    """
    left, right = branch_at(x0 - delta), branch_at(x0 + delta)
    if left > 0 > right:
        return +1
    if left < 0 < right:
        return -1
    raise InvalidInputError(f"pole at {x0} has one-sided signs ({left:.2e}, {right:.2e})")


def analytic_maslov(example: str, lam: float, c: float | None = None, half_width: float = 20.0) -> int:
    """Closed-form Maslov index: signed pole count of the analytic branches."""
    if example == "example1":
        poles = example1_pole_positions(lam, half_width)
        return sum(_pole_sign(lambda x: example1_analytic_s(lam, x), x0) for x0 in poles)
    if example == "example2":
        if c is None:
            raise InvalidInputError("example2 requires the coupling parameter c")
        pu, pv = example2_pole_positions(lam, c, half_width)
        total = 0
        for x0 in pu:
            total += _pole_sign(lambda x: example2_analytic_branches(lam, c, x)[0], x0)
        for x0 in pv:
            total += _pole_sign(lambda x: example2_analytic_branches(lam, c, x)[1], x0)
        return total
    raise InvalidInputError(f"unknown example '{example}'")
