import numpy as np
import pytest

from maslov.errors import (
    AmbiguousMatchError,
    BoundaryCrossingError,
    EssentialSpectrumError,
    SpuriousDetectionError,
)
from maslov.examples import (
    analytic_maslov,
    example1_pole_positions,
    example1_problem,
    example2_pole_positions,
    example2_problem,
)
from maslov.integrate import IntegratorConfig
from maslov.linalg import EigDecomp
from maslov.problem import Problem, free_problem
from maslov.tracker import (
    BranchState,
    Evolution,
    classify_crossing,
    locate_crossing,
    maslov_index,
    match_branches,
    sweep,
)
from maslov.verification import synthetic_k2_evolution

CFG_FAST = IntegratorConfig(half_width=20.0, h=2e-3)


@pytest.fixture(scope="module")
def ex1_result():
    return maslov_index(example1_problem(), 1.0)


@pytest.fixture(scope="module")
def ex2_result():
    return maslov_index(example2_problem(-1.0), 1.0)


def state_with_vectors(w):
    n = w.shape[0]
    return BranchState(x=0.0, mu=np.zeros(n), w=w, nu=np.zeros(n), det_x=1.0)


def test_match_branches_identity():
    w = np.eye(3)
    perm = match_branches(state_with_vectors(w), EigDecomp(np.arange(3.0), w.copy()))
    assert list(perm) == [0, 1, 2]


def test_match_branches_transposition():
    w = np.eye(2)
    swapped = w[:, [1, 0]].copy()
    perm = match_branches(state_with_vectors(w), EigDecomp(np.arange(2.0), swapped))
    assert list(perm) == [1, 0]


def test_match_branches_rejects_ambiguous():
    w = np.eye(2)
    rot = np.array([[1.0, -1.0], [1.0, 1.0]]) / np.sqrt(2.0)  # exactly 45 degrees
    with pytest.raises(AmbiguousMatchError):
        match_branches(state_with_vectors(w), EigDecomp(np.arange(2.0), rot * (1.0 - 1e-9)))


def test_example2_branches_keep_identity_permutation():
    # decoupled channels never mix: each matched branch keeps its coordinate
    # eigenvector along the entire sweep (the step-to-step permutation is the
    # identity; which coordinate comes first is set by the nu order at -L)
    evo = Evolution.run(example2_problem(-1.0), 1.0, CFG_FAST)
    w = np.abs(evo.record.w)
    assert np.max(np.abs(w - w[0][None, :, :])) <= 1e-12
    assert np.allclose(np.sort(w[0].ravel()), [0, 0, 1, 1], atol=1e-14)


class _CountingEvolution:
    """det X given in closed form, with an evaluation counter."""

    def __init__(self, det_fn):
        self._det_fn = det_fn
        self.calls = 0

    def det_at(self, x):
        self.calls += 1
        return self._det_fn(x)

    def det_and_slope_at(self, x):
        eps = 1e-7
        return self._det_fn(x), (self._det_fn(x + eps) - self._det_fn(x - eps)) / (2 * eps)


def test_locate_crossing_bisection_contract():
    evo = _CountingEvolution(lambda x: x - 0.31e-3)
    x0 = locate_crossing(evo, (0.0, 1e-3))
    assert abs(x0 - 0.31e-3) <= 1e-9
    assert evo.calls <= 40 + 8  # bisections plus the Newton polish


def test_locate_crossing_golden_section_even_zero():
    evo = _CountingEvolution(lambda x: (x - 0.4e-3) ** 2)
    x0 = locate_crossing(evo, (0.0, 1e-3))
    assert abs(x0 - 0.4e-3) <= 1e-6  # quadratic floor limits |det| resolution


def test_locate_crossing_spurious_bracket():
    evo = _CountingEvolution(lambda x: (x - 0.5e-3) ** 2 + 0.25)
    with pytest.raises(SpuriousDetectionError):
        locate_crossing(evo, (0.0, 1e-3))


def test_locate_crossing_example1(ex1_result):
    assert len(ex1_result.crossings) == 1
    assert abs(ex1_result.crossings[0].x0 - 1.34981) <= 1e-3
    x_exact = example1_pole_positions(1.0, 20.0)[0]
    assert abs(ex1_result.crossings[0].x0 - x_exact) <= 1e-9


def test_maslov_example1(ex1_result):
    r = ex1_result
    assert r.index == -1
    assert r.crossings[0].k == 1
    assert r.crossings[0].signature == -1
    assert r.crossings[0].left_limits == (-1,)
    assert r.crossings[0].right_limits == (+1,)
    assert r.diagnostics.hormander_zero_verified


def test_maslov_example2(ex2_result):
    r = ex2_result
    assert r.index == -3
    assert len(r.crossings) == 3
    assert all(c.k == 1 and c.signature == -1 for c in r.crossings)
    pu, pv = example2_pole_positions(1.0, -1.0, 20.0)
    for c, x_exact in zip(r.crossings, sorted(pu + pv)):
        assert abs(c.x0 - x_exact) <= 1e-6


def test_maslov_free_problem_has_no_crossings():
    r = maslov_index(free_problem(), 1.0, CFG_FAST)
    assert r.index == 0
    assert r.crossings == ()


def test_maslov_rejects_lambda_below_essential_spectrum():
    with pytest.raises(EssentialSpectrumError):
        maslov_index(example1_problem(), -2.0, CFG_FAST)


def test_pole_order_constants(ex1_result, ex2_result):
    # (x - x0) mu -> 1 from both sides for these problems
    for r in (ex1_result, ex2_result):
        for c in r.crossings:
            assert c.pole_mismatch <= 1e-3
            for v in c.pole_constants:
                assert np.isclose(v, 1.0, atol=1e-6)


def test_nu_sign_rule_consistency(ex1_result, ex2_result):
    for r in (ex1_result, ex2_result):
        for c in r.crossings:
            assert c.nu_rule_sign == c.signature


def test_crossing_form_agrees_with_limits(ex1_result, ex2_result):
    for r in (ex1_result, ex2_result):
        for c in r.crossings:
            assert c.form_signature == c.signature


def test_step_halving_stability():
    base = maslov_index(example1_problem(), 1.0, CFG_FAST)
    halved = maslov_index(example1_problem(), 1.0, CFG_FAST.with_overrides(h=CFG_FAST.h / 2))
    assert base.index == halved.index
    assert len(base.crossings) == len(halved.crossings)
    assert abs(base.crossings[0].x0 - halved.crossings[0].x0) <= 1e-6


def test_index_via_adaptive_integrator():
    cfg = IntegratorConfig(method="adaptive", half_width=20.0, tol=1e-10)
    r = maslov_index(example1_problem(), 1.0, cfg)
    assert r.index == -1
    x_exact = example1_pole_positions(1.0, 20.0)[0]
    assert abs(r.crossings[0].x0 - x_exact) <= 1e-6


def test_adaptive_and_fixed_traces_agree():
    p = example1_problem()
    fixed = Evolution.run(p, 1.0, IntegratorConfig(half_width=12.0))
    adaptive = Evolution.run(p, 1.0, IntegratorConfig(method="adaptive", half_width=12.0))
    x0 = example1_pole_positions(1.0, 12.0)[0]
    probes = [x for x in np.linspace(-10.0, 10.0, 41) if abs(x - x0) > 0.25]
    worst = 0.0
    for x in probes:
        sf = fixed.branch_state_at(float(x)).mu[0]
        sa = adaptive.branch_state_at(float(x)).mu[0]
        worst = max(worst, abs(sf - sa))
    assert worst <= 1e-6


def test_classify_synthetic_k2_crossing():
    evo = synthetic_k2_evolution()
    x0 = locate_crossing(evo, (-1e-3, 1.3e-3))
    rec = classify_crossing(evo, x0)
    assert rec.k == 2
    assert sorted(rec.branch_signs) == [-1, 1]
    assert rec.signature == 0
    assert rec.form_signature == 0


def test_branch_state_pairing_invariant():
    evo = Evolution.run(example2_problem(-1.0), 1.0, CFG_FAST)
    rec = evo.record
    finite = np.all(np.isfinite(rec.mu), axis=1)
    scale = np.maximum(1.0, np.abs(rec.nu[finite]))
    err = np.abs(rec.mu[finite] * rec.det[finite, None] - rec.nu[finite]) / scale
    assert np.max(err) <= 1e-7


def test_boundary_crossing_error():
    # pulse shifted so its crossing sits within the boundary margin of +L
    shift = 20.0 - 1.34981 - 0.002

    def v(x):
        return np.array([[-1.0 + 3.0 / np.cosh((x - shift) / 2.0) ** 2]])

    p = Problem(
        n=1,
        potential=v,
        v_minus=np.array([[-1.0]]),
        v_plus=np.array([[-1.0]]),
        potential_grid=lambda xs: (-1.0 + 3.0 / np.cosh((xs - shift) / 2.0) ** 2)[:, None, None],
    )
    with pytest.raises(BoundaryCrossingError):
        maslov_index(p, 1.0)


def test_sweep_example1_values():
    entries = sweep(example1_problem(), [0.5, 1.0, 2.0], CFG_FAST)
    assert [e.result.index for e in entries] == [-1, -1, 0]
    assert [e.lam for e in entries] == [0.5, 1.0, 2.0]
    assert all(e.ok for e in entries)


def test_sweep_records_failures_without_aborting():
    entries = sweep(example1_problem(), [-3.0, 1.0], CFG_FAST)
    assert entries[0].error == "lambda-in-essential-spectrum"
    assert not entries[0].ok
    assert entries[1].result.index == -1


def test_sweep_empty_grid():
    assert sweep(example1_problem(), [], CFG_FAST) == []


def test_eigenvalue_count_conjecture_example2():
    # the decoupled channels are 12 sech^2 operators (bound states at
    # kappa^2 in {1, 4, 9}) shifted by -4 and -4 - 2c, so at c = -1 the
    # spectra are {-3, 0, 5} and {-1, 2, 7}: positive set {2, 5, 7}; verified
    # independently against a finite-difference discretization of both
    # channels before freezing
    eigenvalues = [2.0, 5.0, 7.0]
    p = example2_problem(-1.0)
    for lam in [1.0, 2.5, 4.0, 6.0]:
        expected = -sum(1 for e in eigenvalues if e > lam)
        r = maslov_index(p, lam, CFG_FAST)
        assert r.index == expected
        assert r.index == analytic_maslov("example2", lam, c=-1.0)
