"""Eigenvalue problems u_xx + V(x) u = lambda u and their asymptotic data.

A :class:`Problem` bundles the symmetric potential V, its limits at both
infinities, and provides the first-order coefficient C(x, lambda) =
lambda I - V(x) together with the closed-form stable/unstable planes of the
constant-coefficient systems at the ends. Tabulated potentials are ingested
from CSV and interpolated with cubic Hermite splines.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import linalg
from .errors import EssentialSpectrumError, InvalidInputError, NotPositiveDefiniteError, PotentialParseError
from .lagrangian import Frame


@dataclass
class Problem:
    """Immutable description of one eigenvalue problem.

    ``potential`` maps x to the symmetric n x n matrix V(x); ``v_minus`` and
    ``v_plus`` are its limits, given explicitly rather than extrapolated
    (example problems know them in closed form, tables clamp to their end
    samples). The spectral parameter is per call, not stored, so one Problem
    serves a whole sweep.
    """

    n: int
    potential: Callable[[float], np.ndarray]
    v_minus: np.ndarray
    v_plus: np.ndarray
    decay_note: str = ""
    analyticity_warning: str | None = None
    # optional vectorized evaluation, (m,) -> (m, n, n); used to precompute
    # coefficient grids without a Python call per sample
    potential_grid: Callable[[np.ndarray], np.ndarray] | None = None

    def __post_init__(self):
        self.v_minus = linalg.check_symmetric(self.v_minus)
        self.v_plus = linalg.check_symmetric(self.v_plus)
        if self.v_minus.shape != (self.n, self.n) or self.v_plus.shape != (self.n, self.n):
            raise InvalidInputError("asymptotic limits must be n x n")

    def coefficient(self, x: float, lam: float) -> np.ndarray:
        """First-order block C(x, lambda) = lambda I - V(x)."""
        return lam * np.eye(self.n) - self.potential(x)

    def coefficient_grid(self, xs: np.ndarray, lam: float) -> np.ndarray:
        """C(x, lambda) on a batch of points, shape (len(xs), n, n)."""
        xs = np.asarray(xs, dtype=float)
        if self.potential_grid is not None:
            v = self.potential_grid(xs)
        else:
            v = np.stack([self.potential(float(x)) for x in xs])
        return lam * np.eye(self.n)[None, :, :] - v

    def tail_mismatch(self, half_width: float) -> tuple[float, float]:
        """||V(-L) - V_-|| and ||V(+L) - V_+||, a truncation diagnostic."""
        return (
            float(np.max(np.abs(self.potential(-half_width) - self.v_minus))),
            float(np.max(np.abs(self.potential(half_width) - self.v_plus))),
        )


def _asymptotic_frame(v_limit: np.ndarray, lam: float, sign: float) -> Frame:
    c = lam * np.eye(v_limit.shape[0]) - v_limit
    try:
        root = linalg.sqrt_spd(c)
    except NotPositiveDefiniteError as exc:
        raise EssentialSpectrumError(
            f"lambda = {lam} does not lie above the essential spectrum: {exc}"
        ) from exc
    n = v_limit.shape[0]
    q = linalg.orthonormalize(np.vstack([np.eye(n), sign * root]))
    return Frame(q[:n], q[n:])


def unstable_frame_at_minus_infinity(p: Problem, lam: float) -> Frame:
    """Orthonormal frame spanning (I; sqrt(lambda I - V_-)).

    This is the span of the positive-eigenvalue eigenvectors of the
    constant-coefficient system at -infinity, i.e. the limit of the unstable
    plane. Fails when lambda I - V_- is not positive definite, the signal
    that lambda sits in or below the essential spectrum.
    """
    return _asymptotic_frame(p.v_minus, lam, +1.0)


def stable_frame_at_plus_infinity(p: Problem, lam: float) -> Frame:
    """Orthonormal frame spanning (I; -sqrt(lambda I - V_+))."""
    return _asymptotic_frame(p.v_plus, lam, -1.0)


@dataclass
class TabulatedPotential:
    """Sampled symmetric potential with cubic Hermite interpolation.

    Slopes use a fourth-order central stencil in the interior (second-order
    one-sided at the edges); second-order slopes alone lose about three
    digits on smooth tables. Evaluation clamps to the end samples outside
    the grid, consistent with asymptotic constancy.
    """

    grid: np.ndarray
    values: np.ndarray  # (m, n, n), symmetric by construction
    slopes: np.ndarray = field(init=False)

    def __post_init__(self):
        if len(self.grid) < 4:
            raise PotentialParseError(f"need at least 4 samples, got {len(self.grid)}")
        if np.any(np.diff(self.grid) <= 0):
            raise PotentialParseError("grid is not strictly increasing")
        self.slopes = _hermite_slopes(self.grid, self.values)

    @property
    def n(self) -> int:
        return self.values.shape[1]

    def __call__(self, x: float) -> np.ndarray:
        return self.batch(np.array([x]))[0]

    def batch(self, xs: np.ndarray) -> np.ndarray:
        xs = np.clip(np.asarray(xs, dtype=float), self.grid[0], self.grid[-1])
        i = np.clip(np.searchsorted(self.grid, xs, side="right") - 1, 0, len(self.grid) - 2)
        dx = (self.grid[i + 1] - self.grid[i])[:, None, None]
        t = ((xs - self.grid[i])[:, None, None]) / dx
        h00 = 2 * t**3 - 3 * t**2 + 1
        h10 = t**3 - 2 * t**2 + t
        h01 = -2 * t**3 + 3 * t**2
        h11 = t**3 - t**2
        return (
            h00 * self.values[i]
            + h10 * dx * self.slopes[i]
            + h01 * self.values[i + 1]
            + h11 * dx * self.slopes[i + 1]
        )

    def as_problem(self) -> Problem:
        return Problem(
            n=self.n,
            potential=self.__call__,
            v_minus=self.values[0],
            v_plus=self.values[-1],
            decay_note="tabulated potential; limits taken from the end samples",
            analyticity_warning=(
                "potential supplied as a table: analyticity of the coefficients "
                "cannot be certified, branch continuations are best-effort"
            ),
            potential_grid=self.batch,
        )


def _hermite_slopes(xg: np.ndarray, yg: np.ndarray) -> np.ndarray:
    d = np.empty_like(yg)
    h = np.diff(xg)[:, None, None]
    d[1:-1] = (yg[2:] - yg[:-2]) / (h[1:] + h[:-1])
    d[0] = (yg[1] - yg[0]) / h[0, 0, 0]
    d[-1] = (yg[-1] - yg[-2]) / h[-1, 0, 0]
    if len(xg) >= 5 and np.allclose(np.diff(xg), xg[1] - xg[0], rtol=1e-8):
        hh = xg[1] - xg[0]
        d[2:-2] = (yg[:-4] - 8 * yg[1:-3] + 8 * yg[3:-1] - yg[4:]) / (12 * hh)
        d[0] = (-3 * yg[0] + 4 * yg[1] - yg[2]) / (2 * hh)
        d[-1] = (3 * yg[-1] - 4 * yg[-2] + yg[-3]) / (2 * hh)
    return d


def load_tabulated(source) -> TabulatedPotential:
    """Parse a tabulated-potential CSV.

    Header ``x,v11,v12,...,v1n,v22,...,vnn`` (upper triangle, row-major), one
    sample per line, '.' decimal separator. Accepts a path or a text stream.
    Parse failures carry 1-based line numbers.
    """
    if hasattr(source, "read"):
        text = source.read()
    else:
        with open(source, encoding="utf-8") as fh:
            text = fh.read()
    if isinstance(text, bytes):
        text = text.decode("utf-8")
    lines = [ln.strip() for ln in io.StringIO(text)]
    rows = [(i + 1, ln) for i, ln in enumerate(lines) if ln]
    if not rows:
        raise PotentialParseError("empty potential file")

    header = [c.strip().lower() for c in rows[0][1].split(",")]
    if not header or header[0] != "x":
        raise PotentialParseError("header must start with 'x'", line=rows[0][0])
    n_entries = len(header) - 1
    n = int(round((np.sqrt(8 * n_entries + 1) - 1) / 2))
    if n < 1 or n * (n + 1) // 2 != n_entries:
        raise PotentialParseError(
            f"{n_entries} value columns do not form an upper triangle", line=rows[0][0]
        )

    iu = np.triu_indices(n)
    grid, mats = [], []
    for lineno, ln in rows[1:]:
        parts = [c.strip() for c in ln.split(",")]
        if len(parts) != n_entries + 1:
            raise PotentialParseError(
                f"expected {n_entries + 1} fields, got {len(parts)}", line=lineno
            )
        try:
            vals = [float(c) for c in parts]
        except ValueError as exc:
            raise PotentialParseError(f"non-numeric field: {exc}", line=lineno) from None
        grid.append(vals[0])
        m = np.zeros((n, n))
        m[iu] = vals[1:]
        m.T[iu] = vals[1:]
        mats.append(m)

    if len(grid) < 4:
        raise PotentialParseError(f"need at least 4 samples, got {len(grid)}")
    grid_arr = np.asarray(grid)
    if np.any(np.diff(grid_arr) <= 0):
        k = int(np.argmax(np.diff(grid_arr) <= 0))
        raise PotentialParseError("grid is not strictly increasing", line=rows[1 + k + 1][0])
    return TabulatedPotential(grid_arr, np.stack(mats))


def constant_problem(v: np.ndarray) -> Problem:
    """Problem with V(x) identically equal to a constant symmetric matrix."""
    v = linalg.check_symmetric(v)
    n = v.shape[0]
    return Problem(
        n=n,
        potential=lambda x: v,
        v_minus=v,
        v_plus=v,
        decay_note="constant potential",
        potential_grid=lambda xs: np.broadcast_to(v, (len(xs), n, n)).copy(),
    )


def free_problem(n: int = 1) -> Problem:
    """V identically zero; the frame flow has constant coefficients."""
    return constant_problem(np.zeros((n, n)))
