"""Branch tracking, crossing detection and classification, index assembly.

The recorded sweep provides det X and the matched eigenpairs of the analytic
surrogate Y adj(X) at every accepted step. Crossings are bracketed by sign
changes of det X (with a curvature-free fallback for even-order zeros),
located by bisection with a Newton polish on Jacobi's determinant-derivative
formula, and classified from the one-sided limits of the singular branches:
a branch running to +infinity on the left and -infinity on the right
contributes +1, the reverse contributes -1. Every classification is
cross-checked against the crossing form; a mismatch is a hard error.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from . import _kernel_py, linalg
from ._engine import SweepRecord, fixed_grid
from .errors import (
    AmbiguousMatchError,
    BoundaryCrossingError,
    InvalidInputError,
    MaslovError,
    PoleOrderError,
    SignConsistencyError,
    SpuriousDetectionError,
)
from .integrate import IntegratorConfig, problem_blocks, run_recorded, step
from .lagrangian import DET_GUARD_REL, Frame, crossing_form, det_scale, form_signature, frame_rhs
from .linalg import EigDecomp
from .problem import Problem, stable_frame_at_plus_infinity

log = logging.getLogger("maslov.tracker")

#: |mu| above this marks a branch as singular at a candidate crossing
BLOWUP_THRESHOLD = 1e6

#: sigma_min(X) below this fraction of the frame scale counts as kernel
KERNEL_REL_TOL = 1e-8

#: half-width for one-sided limits, auto-shrunk per crossing
DELTA_DEFAULT = 1e-4

#: bracket width at which bisection/golden-section stops
BISECT_TOL = 1e-9

#: relative sigma_min(X) below which an even-order zero is suspected
SUSPECT_SMIN = 1e-3


@dataclass
class BranchState:
    """Matched eigenvalue branches of S at one position."""

    x: float
    mu: np.ndarray
    w: np.ndarray
    nu: np.ndarray
    det_x: float


@dataclass(frozen=True)
class CrossingRecord:
    """One crossing: location, intersection dimension, and per-branch signs."""

    x0: float
    k: int
    branch_signs: tuple[int, ...]
    signature: int
    left_limits: tuple[int, ...]
    right_limits: tuple[int, ...]
    branch_indices: tuple[int, ...]
    pole_constants: tuple[float, ...]
    pole_mismatch: float
    form_signature: int
    delta_used: float
    nu_rule_sign: int | None = None

    def __post_init__(self):
        assert abs(self.signature) <= self.k
        assert (self.signature - self.k) % 2 == 0
        for s, left, right in zip(self.branch_signs, self.left_limits, self.right_limits):
            assert (s, left, right) in ((+1, +1, -1), (-1, -1, +1))


@dataclass(frozen=True)
class Diagnostics:
    lagrangian_residual_max: float
    surrogate_asymmetry_max: float
    endpoint_mismatch: float
    endpoint_det_rel: tuple[float, float]
    stable_transversality: tuple[float, float]
    transverse_to_vertical: bool
    transverse_to_stable: bool
    hormander_zero_verified: bool
    tail_mismatch: tuple[float, float]
    backend: str
    accepted_steps: int
    warnings: tuple[str, ...] = ()


@dataclass(frozen=True)
class MaslovResult:
    index: int
    crossings: tuple[CrossingRecord, ...]
    diagnostics: Diagnostics

    def __post_init__(self):
        assert self.index == sum(c.signature for c in self.crossings)


def match_branches(prev: BranchState | np.ndarray, eig: EigDecomp) -> np.ndarray:
    """Permutation continuing the branches of ``prev`` into ``eig``.

    Greedy best-remaining assignment on the eigenvector overlap matrix; the
    smallest winning overlap must stay above 1/sqrt(2), otherwise the step
    was too large to track and the caller should halve it.
    """
    prev_w = prev.w if isinstance(prev, BranchState) else np.asarray(prev, dtype=float)
    perm, _, worst = _kernel_py.greedy_match(prev_w, eig.vectors)
    if worst < _kernel_py.MIN_OVERLAP:
        raise AmbiguousMatchError(f"best branch overlap {worst:.4f} is below 1/sqrt(2)")
    return perm


class Evolution:
    """A recorded sweep plus re-integration from its per-step checkpoints."""

    def __init__(
        self,
        p: Problem,
        lam: float,
        cfg: IntegratorConfig,
        record: SweepRecord,
        det_guard_rel: float = DET_GUARD_REL,
    ):
        self.problem = p
        self.lam = lam
        self.cfg = cfg
        self.record = record
        self.det_guard_rel = det_guard_rel
        self.blocks_at = problem_blocks(p, lam)
        self._h_sub = min(cfg.h, fixed_grid(cfg.half_width, cfg.h)[1]) if cfg.half_width else cfg.h

    @classmethod
    def run(cls, p: Problem, lam: float, cfg: IntegratorConfig, det_guard_rel: float = DET_GUARD_REL):
        return cls(p, lam, cfg, run_recorded(p, lam, cfg, det_guard_rel), det_guard_rel)

    # -- re-integration ----------------------------------------------------

    def _left_index(self, x: float) -> int:
        xs = self.record.xs
        i = int(np.searchsorted(xs, x, side="right") - 1)
        return min(max(i, 0), len(xs) - 1)

    def frame_at(self, x: float) -> Frame:
        xs = self.record.xs
        x = float(min(max(x, xs[0]), xs[-1]))
        i = self._left_index(x)
        gap = x - xs[i]
        f = self.record.frame(i)
        if gap <= 0.0:
            return f
        n_sub = max(1, int(math.ceil(gap / self._h_sub - 1e-12)))
        h_sub = gap / n_sub
        xx = xs[i]
        for _ in range(n_sub):
            f = step(self.blocks_at, f, xx, h_sub)
            xx += h_sub
        return f

    def det_at(self, x: float) -> float:
        return linalg.det(self.frame_at(x).x_block)

    def det_and_slope_at(self, x: float) -> tuple[float, float]:
        """det X and its x-derivative trace(adj(X) X') at a point."""
        f = self.frame_at(x)
        adj, d = linalg.adjugate_det(f.x_block)
        df = frame_rhs(self.blocks_at(x), f)
        return d, float(np.trace(adj @ df.x_block))

    def branch_state_at(self, x: float) -> BranchState:
        f = self.frame_at(x)
        obs = _kernel_py.observe_frame(
            f.x_block, f.y_block, self.record.w[self._left_index(x)], self.det_guard_rel
        )
        if obs["ambiguous"]:
            raise AmbiguousMatchError(f"cannot continue branches to x = {x:.9g}")
        mu = obs["mu"]
        if not np.all(np.isfinite(mu)):
            mu = _mu_via_solve(f, obs["w"], fallback=mu)
        return BranchState(x=x, mu=mu, w=obs["w"], nu=obs["nu"], det_x=obs["det"])


def _mu_via_solve(f: Frame, w: np.ndarray, fallback: np.ndarray) -> np.ndarray:
    """Branch values from a direct solve of S = YX^-1 when nu/det is guarded.

    Near a pole the nu/det quotient loses its determinant accuracy like
    det^(-1) but a direct solve keeps the diverging eigenvalues relatively
    accurate, so one-sided probes stay usable far closer to the crossing
    (essential for multi-branch crossings, where det ~ delta^k). Values are
    paired to the surrogate branch order through the shared eigenvectors.
    """
    try:
        s = np.linalg.solve(f.x_block.T, f.y_block.T).T
    except np.linalg.LinAlgError:
        return fallback
    if not np.all(np.isfinite(s)):
        return fallback
    vals, vecs = linalg.sym_eig(0.5 * (s + s.T))
    perm, _, worst = _kernel_py.greedy_match(w, vecs)
    if worst < _kernel_py.MIN_OVERLAP:
        return fallback
    return vals[perm]


# -- crossing location -----------------------------------------------------


def _bisect(fn, a, b, fa, fb, tol):
    for _ in range(200):
        if b - a <= tol:
            break
        m = 0.5 * (a + b)
        fm = fn(m)
        if fm == 0.0:
            return m, m
        if (fa < 0.0) != (fm < 0.0):
            b, fb = m, fm
        else:
            a, fa = m, fm
    return a, b


_INVPHI = (np.sqrt(5.0) - 1.0) / 2.0


def _golden_min(fn, a, b, tol):
    c = b - _INVPHI * (b - a)
    d = a + _INVPHI * (b - a)
    fc, fd = fn(c), fn(d)
    while b - a > tol:
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - _INVPHI * (b - a)
            fc = fn(c)
        else:
            a, c, fc = c, d, fd
            d = a + _INVPHI * (b - a)
            fd = fn(d)
    return 0.5 * (a + b)


def locate_crossing(evo, bracket: tuple[float, float], tol: float = BISECT_TOL) -> float:
    """Locate det X = 0 inside a bracket.

    Sign changes bisect and finish with a bracketed Newton polish on Jacobi's
    formula (det X)' = trace(adj(X) X'); even-order zeros fall back to
    golden-section minimization of |det X|, accepted only when the minimum is
    orders of magnitude below the bracket endpoints.
    """
    a, b = float(bracket[0]), float(bracket[1])
    if not b > a:
        raise InvalidInputError(f"empty bracket {bracket}")
    fa, fb = evo.det_at(a), evo.det_at(b)

    if fa == 0.0 or fb == 0.0 or (fa < 0.0) != (fb < 0.0):
        lo, hi = _bisect(evo.det_at, a, b, fa, fb, tol)
        x0 = 0.5 * (lo + hi)
        for _ in range(3):
            d, slope = evo.det_and_slope_at(x0)
            if slope == 0.0:
                break
            x_new = x0 - d / slope
            if not (a <= x_new <= b):
                break
            if x_new == x0:
                break
            x0 = x_new
        return x0

    xm = _golden_min(lambda x: abs(evo.det_at(x)), a, b, tol)
    fm = abs(evo.det_at(xm))
    if fm > 1e-8 * max(abs(fa), abs(fb), 1e-300):
        raise SpuriousDetectionError(
            f"|det X| only reaches {fm:.3e} on [{a:.6g}, {b:.6g}]; no zero found"
        )
    return xm


# -- classification ----------------------------------------------------------


def _kernel_of_x(f: Frame, kernel_rel_tol: float) -> tuple[int, np.ndarray, float]:
    gram_vals, gram_vecs = linalg.sym_eig(f.x_block.T @ f.x_block)
    sigma = np.sqrt(np.maximum(gram_vals, 0.0))
    # the stacked-frame column scale is the robust reference: at a crossing
    # the X block itself degenerates (completely, when n = 1)
    scale = max(f.column_scale(), 1e-300)
    thr = kernel_rel_tol * scale
    k = int(np.sum(sigma < thr))
    return k, gram_vecs[:, :k], thr


def classify_crossing(
    evo: Evolution,
    x0: float,
    delta: float = DELTA_DEFAULT,
    blowup_threshold: float = BLOWUP_THRESHOLD,
    kernel_rel_tol: float = KERNEL_REL_TOL,
    other_crossings: tuple[float, ...] = (),
) -> CrossingRecord:
    """Classify one crossing from one-sided limits, checked against the form.

    ``delta`` shrinks geometrically until no other crossing sits within
    2 delta and every singular branch exceeds the blowup threshold on both
    sides. Branch identity through the crossing comes from the eigenvectors
    of the analytic surrogate, which the sweep record already matched.
    """
    f0 = evo.frame_at(x0)
    k, kernel_basis, _ = _kernel_of_x(f0, kernel_rel_tol)
    if k < 1:
        raise SpuriousDetectionError(f"X({x0:.9g}) has no kernel within tolerance")

    n = f0.n
    for xc in other_crossings:
        while abs(xc - x0) > 0.0 and abs(xc - x0) < 2.0 * delta:
            delta *= 0.5
    delta_signs = delta
    singular: tuple[int, ...] | None = None
    sl = sr = None
    while True:
        sl = evo.branch_state_at(x0 - delta_signs)
        sr = evo.branch_state_at(x0 + delta_signs)
        with np.errstate(invalid="ignore"):
            big_l = {j for j in range(n) if np.isfinite(sl.mu[j]) and abs(sl.mu[j]) > blowup_threshold}
            big_r = {j for j in range(n) if np.isfinite(sr.mu[j]) and abs(sr.mu[j]) > blowup_threshold}
        if big_l == big_r and len(big_l) == k:
            singular = tuple(sorted(big_l))
            break
        if delta_signs < 1e-11:
            raise PoleOrderError(
                f"crossing at {x0:.9g}: {len(big_l)} branches blow up on the left, "
                f"{len(big_r)} on the right, kernel dimension is {k}"
            )
        delta_signs *= 0.5

    for j in singular:
        if float(np.abs(sl.w[:, j] @ sr.w[:, j])) < _kernel_py.MIN_OVERLAP:
            raise AmbiguousMatchError(
                f"branch {j} eigenvector rotated too much across the crossing at {x0:.9g}"
            )

    branch_signs = []
    left_limits = []
    right_limits = []
    for j in singular:
        s_left = +1 if sl.mu[j] > 0 else -1
        s_right = +1 if sr.mu[j] > 0 else -1
        left_limits.append(s_left)
        right_limits.append(s_right)
        if (s_left, s_right) == (+1, -1):
            branch_signs.append(+1)
        elif (s_left, s_right) == (-1, +1):
            branch_signs.append(-1)
        else:
            raise PoleOrderError(
                f"branch {j} at {x0:.9g} has equal one-sided signs ({s_left}, {s_right}); "
                "not an order-one pole"
            )
    signature = int(sum(branch_signs))

    # order-one pole check: (x - x0) mu(x) must approach the same nonzero
    # constant from both sides; Richardson in delta kills the O(delta) term
    d_pole = min(delta, DELTA_DEFAULT)
    consts = []
    mismatch = 0.0
    states = {
        +d_pole: evo.branch_state_at(x0 + d_pole),
        -d_pole: evo.branch_state_at(x0 - d_pole),
        +0.5 * d_pole: evo.branch_state_at(x0 + 0.5 * d_pole),
        -0.5 * d_pole: evo.branch_state_at(x0 - 0.5 * d_pole),
    }
    for j in singular:
        sides = []
        for sgn in (-1.0, +1.0):
            c_full = sgn * d_pole * states[sgn * d_pole].mu[j]
            c_half = sgn * 0.5 * d_pole * states[sgn * 0.5 * d_pole].mu[j]
            sides.append(2.0 * c_half - c_full)
        c_left, c_right = sides
        scale = max(abs(c_left), abs(c_right))
        if scale == 0.0 or not np.isfinite(scale):
            raise PoleOrderError(f"branch {j} at {x0:.9g} has a vanishing pole constant")
        mismatch = max(mismatch, abs(c_left - c_right) / scale)
        consts.append(0.5 * (c_left + c_right))
    if mismatch > 1e-3:
        raise PoleOrderError(
            f"one-sided pole constants differ by {mismatch:.3e} (rel) at {x0:.9g}"
        )

    df0 = frame_rhs(evo.blocks_at(x0), f0)
    gamma = crossing_form(f0, df0, kernel_basis)
    sig_form = form_signature(gamma)
    if sig_form != signature:
        raise SignConsistencyError(
            f"crossing form signature {sig_form} contradicts one-sided limits {signature} at {x0:.9g}"
        )

    nu_rule = None
    if k == 1:
        j = singular[0]
        nu0 = evo.branch_state_at(x0).nu[j]
        _, slope = evo.det_and_slope_at(x0)
        if nu0 != 0.0 and slope != 0.0:
            nu_rule = -int(np.sign(nu0) * np.sign(slope))
            if nu_rule != branch_signs[0]:
                raise SignConsistencyError(
                    f"nu-based sign {nu_rule} contradicts one-sided limits {branch_signs[0]} at {x0:.9g}"
                )

    return CrossingRecord(
        x0=x0,
        k=k,
        branch_signs=tuple(branch_signs),
        signature=signature,
        left_limits=tuple(left_limits),
        right_limits=tuple(right_limits),
        branch_indices=singular,
        pole_constants=tuple(consts),
        pole_mismatch=mismatch,
        form_signature=sig_form,
        delta_used=delta_signs,
        nu_rule_sign=nu_rule,
    )


# -- detection and assembly --------------------------------------------------


def _candidate_brackets(rec: SweepRecord, suspect_smin: float) -> list[tuple[float, float, bool]]:
    """(a, b, speculative) brackets; speculative ones may be discarded."""
    xs, det, smin = rec.xs, rec.det, rec.smin
    n_pts = len(xs)
    out = []
    covered = np.zeros(n_pts, dtype=bool)
    for i in range(n_pts - 1):
        if det[i] == 0.0 or det[i] * det[i + 1] < 0.0:
            a = max(i - 1, 0) if det[i] == 0.0 else i
            out.append((float(xs[a]), float(xs[i + 1]), False))
            covered[max(i - 1, 0) : i + 2] = True
    for i in range(1, n_pts - 1):
        if (
            not covered[i]
            and smin[i] < suspect_smin
            and smin[i] <= smin[i - 1]
            and smin[i] <= smin[i + 1]
        ):
            out.append((float(xs[i - 1]), float(xs[i + 1]), True))
    return sorted(out)


def maslov_index(
    p: Problem,
    lam: float,
    cfg: IntegratorConfig | None = None,
    *,
    blowup_threshold: float = BLOWUP_THRESHOLD,
    kernel_rel_tol: float = KERNEL_REL_TOL,
    delta: float = DELTA_DEFAULT,
    det_guard_rel: float = DET_GUARD_REL,
    suspect_smin: float = SUSPECT_SMIN,
    ambiguous_retries: int = 2,
) -> MaslovResult:
    """Maslov index of the unstable-plane path over [-L, L].

    Integrates the frame, detects and classifies every crossing with the
    vertical plane, and sums the signed contributions. Endpoint diagnostics
    confirm the configuration in which the reference-plane correction term
    vanishes: det X is nonzero at both ends and both end frames are
    transverse to the stable plane at +infinity.
    """
    cfg = cfg or IntegratorConfig()
    try:
        return _maslov_index_once(
            p, lam, cfg, blowup_threshold, kernel_rel_tol, delta, det_guard_rel, suspect_smin
        )
    except AmbiguousMatchError:
        if ambiguous_retries <= 0:
            raise
        log.info("ambiguous branch matching at h = %.3g; retrying with h / 2", cfg.h)
        return maslov_index(
            p,
            lam,
            cfg.with_overrides(h=cfg.h / 2.0),
            blowup_threshold=blowup_threshold,
            kernel_rel_tol=kernel_rel_tol,
            delta=delta,
            det_guard_rel=det_guard_rel,
            suspect_smin=suspect_smin,
            ambiguous_retries=ambiguous_retries - 1,
        )


def _maslov_index_once(
    p, lam, cfg, blowup_threshold, kernel_rel_tol, delta, det_guard_rel, suspect_smin
) -> MaslovResult:
    evo = Evolution.run(p, lam, cfg, det_guard_rel)
    rec = evo.record

    located: list[float] = []
    for a, b, speculative in _candidate_brackets(rec, suspect_smin):
        try:
            x0 = locate_crossing(evo, (a, b))
        except SpuriousDetectionError:
            if speculative:
                log.debug("discarded speculative bracket [%.6g, %.6g]", a, b)
                continue
            raise
        if any(abs(x0 - seen) <= 10.0 * BISECT_TOL for seen in located):
            continue
        located.append(x0)
    located.sort()

    big_l = cfg.half_width
    _, h_eff = fixed_grid(big_l, cfg.h)
    margin = max(4.0 * h_eff, 2.0 * delta)
    for x0 in located:
        if big_l - abs(x0) < margin:
            raise BoundaryCrossingError(
                f"crossing at {x0:.6g} is within {margin:.3g} of the boundary; enlarge the domain"
            )

    crossings = []
    for x0 in located:
        others = tuple(xc for xc in located if xc != x0)
        crossings.append(
            classify_crossing(
                evo,
                x0,
                delta=delta,
                blowup_threshold=blowup_threshold,
                kernel_rel_tol=kernel_rel_tol,
                other_crossings=others,
            )
        )

    index = int(sum(c.signature for c in crossings))
    diag = _diagnostics(p, lam, cfg, evo)
    result = MaslovResult(index=index, crossings=tuple(crossings), diagnostics=diag)
    log.info(
        "lambda = %g: index %d with %d crossing(s), residual %.2e",
        lam,
        index,
        len(crossings),
        diag.lagrangian_residual_max,
    )
    return result


def _transversality(f: Frame, g: Frame) -> float:
    m = np.hstack([f.stacked(), g.stacked()])
    scale = max(f.column_scale() * g.column_scale(), 1e-300)
    return abs(linalg.det(m)) / scale**f.n


def _unstable_frame_at_plus_infinity(p: Problem, lam: float) -> Frame:
    from .problem import _asymptotic_frame

    return _asymptotic_frame(p.v_plus, lam, +1.0)


def _diagnostics(p, lam, cfg, evo: Evolution) -> Diagnostics:
    rec = evo.record
    f_start = rec.frame(0)
    f_end = rec.frame(rec.n_steps)
    target_plus = _unstable_frame_at_plus_infinity(p, lam)
    endpoint_mismatch = float(np.max(np.abs(f_end.projector() - target_plus.projector())))

    stable_plus = stable_frame_at_plus_infinity(p, lam)
    det_rel = tuple(
        abs(linalg.det(f.x_block)) / det_scale(f.column_scale(), f.n) for f in (f_start, f_end)
    )
    stable_tv = tuple(_transversality(f, stable_plus) for f in (f_start, f_end))
    transverse_vertical = all(d > 1e-6 for d in det_rel)
    transverse_stable = all(t > 1e-6 for t in stable_tv)
    warnings = ()
    if p.analyticity_warning:
        warnings = (p.analyticity_warning,)
    return Diagnostics(
        lagrangian_residual_max=rec.resid_max,
        surrogate_asymmetry_max=rec.asym_max,
        endpoint_mismatch=endpoint_mismatch,
        endpoint_det_rel=det_rel,
        stable_transversality=stable_tv,
        transverse_to_vertical=transverse_vertical,
        transverse_to_stable=transverse_stable,
        hormander_zero_verified=bool(
            transverse_vertical and transverse_stable and endpoint_mismatch <= 1e-4
        ),
        tail_mismatch=p.tail_mismatch(cfg.half_width),
        backend=rec.backend,
        accepted_steps=rec.n_steps,
        warnings=warnings,
    )


@dataclass(frozen=True)
class SweepEntry:
    lam: float
    result: MaslovResult | None = None
    error: str | None = None
    message: str = ""

    @property
    def ok(self) -> bool:
        return self.result is not None


def sweep(p: Problem, lambdas, cfg: IntegratorConfig | None = None, **kwargs) -> list[SweepEntry]:
    """Independent index computations over a grid of spectral parameters.

    Failures are recorded per entry (error code plus message) and never
    abort the remaining points.
    """
    out = []
    for lam in lambdas:
        try:
            out.append(SweepEntry(lam=float(lam), result=maslov_index(p, float(lam), cfg, **kwargs)))
        except MaslovError as exc:
            log.warning("lambda = %g failed: %s", lam, exc)
            out.append(SweepEntry(lam=float(lam), error=exc.code, message=str(exc)))
    return out
