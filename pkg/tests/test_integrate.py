import numpy as np
import pytest

from maslov.errors import InvalidInputError
from maslov.examples import example1_problem
from maslov.integrate import IntegratorConfig, evolve, problem_blocks, step, step_rk45
from maslov.lagrangian import CoefficientBlocks, Frame
from maslov.linalg import orthonormalize
from maslov.problem import free_problem


def constant_blocks(c):
    n = c.shape[0]
    z = np.zeros((n, n))
    blocks = CoefficientBlocks(z, np.eye(n), c, z)
    return lambda x: blocks


def integrate_fixed(blocks_at, f, x0, x1, n_steps):
    h = (x1 - x0) / n_steps
    for i in range(n_steps):
        f = step(blocks_at, f, x0 + i * h, h)
    return f


def test_rk4_global_order_vs_cosh():
    # V = 0, lambda = 1: X'' = X with X(0) = 1, Y(0) = 0 is cosh/sinh
    blocks_at = constant_blocks(np.array([[1.0]]))
    errs = []
    for n_steps in [40, 80]:
        f = integrate_fixed(blocks_at, Frame(np.array([[1.0]]), np.array([[0.0]])), 0.0, 1.0, n_steps)
        errs.append(abs(f.x_block[0, 0] - np.cosh(1.0)) + abs(f.y_block[0, 0] - np.sinh(1.0)))
    ratio = errs[0] / errs[1]
    assert 12.0 <= ratio <= 20.0


def test_step_zero_blocks_is_identity():
    n = 2
    z = np.zeros((n, n))
    blocks = CoefficientBlocks(z, z, z, z)
    f = Frame(np.eye(2), np.array([[0.3, 0.1], [0.1, -0.2]]))
    g = step(lambda x: blocks, f, 0.0, 0.125)
    assert np.allclose(g.x_block, f.x_block)
    assert np.allclose(g.y_block, f.y_block)


def test_step_rejects_nonpositive_h():
    blocks_at = constant_blocks(np.array([[1.0]]))
    with pytest.raises(InvalidInputError):
        step(blocks_at, Frame(np.array([[1.0]]), np.array([[0.0]])), 0.0, 0.0)


def test_step_then_orthonormalize_preserves_span():
    rng = np.random.default_rng(2)
    c = rng.normal(size=(3, 3))
    c = c + c.T
    blocks_at = constant_blocks(c)
    a = rng.normal(size=(3, 3))
    f = Frame(np.eye(3), a + a.T)
    g = step(blocks_at, f, 0.0, 0.05)
    q = orthonormalize(g.stacked())
    renorm = Frame(q[:3], q[3:])
    assert np.max(np.abs(g.projector() - renorm.projector())) <= 1e-9


def test_evolve_example1_endpoint_direction():
    p = example1_problem()
    final = evolve(p, 1.0, IntegratorConfig(half_width=20.0, h=1e-3))
    direction = final.stacked()[:, 0]
    direction = direction / np.linalg.norm(direction)
    target = np.array([1.0, np.sqrt(2.0)]) / np.sqrt(3.0)
    assert np.linalg.norm(direction - target * np.sign(direction[0] * target[0])) <= 1e-4


def test_evolve_zero_half_width_returns_initial_frame():
    p = free_problem()
    calls = []
    f = evolve(p, 1.0, IntegratorConfig(half_width=0.0), observer=lambda x, fr: calls.append(x))
    assert calls == [0.0]
    assert np.allclose(f.stacked().ravel() / np.linalg.norm(f.stacked()), [1, 1] / np.sqrt(2.0))


def test_evolve_observer_count_contract():
    p = free_problem()
    cfg = IntegratorConfig(half_width=1.0, h=0.01)
    seen = []
    evolve(p, 1.0, cfg, observer=lambda x, fr: seen.append(x))
    assert len(seen) == 200 + 1
    assert np.isclose(seen[0], -1.0) and np.isclose(seen[-1], 1.0)


def test_evolve_renorm_frequency_does_not_move_the_plane():
    p = example1_problem()
    cfg1 = IntegratorConfig(half_width=5.0, h=1e-3, renorm_every=1)
    cfg10 = IntegratorConfig(half_width=5.0, h=1e-3, renorm_every=10)
    projs = {}
    for key, cfg in [("r1", cfg1), ("r10", cfg10)]:
        snap = {}

        def obs(x, fr, snap=snap):
            snap[round(x, 9)] = fr.projector()

        evolve(p, 1.0, cfg, observer=obs)
        projs[key] = snap
    common = sorted(set(projs["r1"]) & set(projs["r10"]))
    assert len(common) > 5000
    worst = max(np.max(np.abs(projs["r1"][x] - projs["r10"][x])) for x in common)
    assert worst <= 1e-7


def test_evolve_lagrangian_residual_after_renorm():
    p = example1_problem()
    worst = [0.0]

    def obs(x, fr):
        worst[0] = max(worst[0], fr.lagrangian_residual())

    evolve(p, 1.0, IntegratorConfig(half_width=10.0, h=1e-3, renorm_every=1), observer=obs)
    assert worst[0] <= 1e-10


def test_adaptive_matches_fixed_at_endpoint():
    p = example1_problem()
    fixed = evolve(p, 1.0, IntegratorConfig(half_width=10.0, h=1e-3))
    adaptive = evolve(p, 1.0, IntegratorConfig(method="adaptive", half_width=10.0, tol=1e-10))
    assert np.max(np.abs(fixed.projector() - adaptive.projector())) <= 1e-7


def test_rk45_error_estimate_scales():
    blocks_at = constant_blocks(np.array([[1.0]]))
    f = Frame(np.array([[1.0]]), np.array([[0.0]]))
    _, e1 = step_rk45(blocks_at, f, 0.0, 0.1)
    _, e2 = step_rk45(blocks_at, f, 0.0, 0.05)
    assert e1 > e2 > 0.0
    assert 20.0 <= e1 / e2 <= 45.0  # fifth-order local error halves ~32x


def test_config_validation():
    with pytest.raises(InvalidInputError):
        IntegratorConfig(method="rk2")
    with pytest.raises(InvalidInputError):
        IntegratorConfig(h=-1.0)
    with pytest.raises(InvalidInputError):
        IntegratorConfig(renorm_every=0)
