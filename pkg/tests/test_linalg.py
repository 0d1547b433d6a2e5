import numpy as np
import pytest

from maslov.errors import DegenerateFrameError, InvalidInputError, NotPositiveDefiniteError
from maslov.linalg import adjugate_det, det, orthonormalize, sqrt_spd, sym_eig


def test_sym_eig_identity():
    vals, vecs = sym_eig(np.eye(3))
    assert np.allclose(vals, [1.0, 1.0, 1.0])
    assert np.allclose(vecs.T @ vecs, np.eye(3), atol=1e-10)


def test_sym_eig_diagonal_sorted():
    vals, vecs = sym_eig(np.diag([2.0, -1.0]))
    assert np.allclose(vals, [-1.0, 2.0])
    # eigenvectors are the coordinate axes, up to sign and permutation
    assert np.allclose(np.abs(vecs), [[0.0, 1.0], [1.0, 0.0]], atol=1e-12)


def test_sym_eig_2x2_hand_values():
    # characteristic polynomial of [[2,1],[1,2]] is (mu-2)^2 - 1, roots 1 and 3
    vals, vecs = sym_eig(np.array([[2.0, 1.0], [1.0, 2.0]]))
    assert np.allclose(vals, [1.0, 3.0], atol=1e-12)
    v1 = vecs[:, 0] * np.sign(vecs[0, 0])
    v2 = vecs[:, 1] * np.sign(vecs[0, 1])
    assert np.allclose(v1, [1 / np.sqrt(2), -1 / np.sqrt(2)], atol=1e-12)
    assert np.allclose(v2, [1 / np.sqrt(2), 1 / np.sqrt(2)], atol=1e-12)


def test_sym_eig_rejects_asymmetric():
    with pytest.raises(InvalidInputError):
        sym_eig(np.array([[1.0, 2.0], [0.5, 1.0]]))


def test_sym_eig_random_residuals():
    rng = np.random.default_rng(7)
    for _ in range(1000):
        n = int(rng.integers(1, 9))
        a = rng.normal(size=(n, n))
        a = a + a.T
        vals, vecs = sym_eig(a)
        scale = max(1.0, float(np.max(np.abs(vals))))
        assert np.max(np.abs(vecs.T @ vecs - np.eye(n))) <= 1e-10
        resid = a @ vecs - vecs * vals
        assert np.max(np.abs(resid)) <= 1e-10 * scale
        assert np.all(np.diff(vals) >= -1e-12 * scale)


def test_sym_eig_trace_det_identities():
    rng = np.random.default_rng(11)
    for _ in range(200):
        n = int(rng.integers(1, 9))
        a = rng.normal(size=(n, n))
        a = a + a.T
        vals, _ = sym_eig(a)
        assert np.isclose(np.trace(a), vals.sum(), rtol=1e-8, atol=1e-10)
        assert np.isclose(det(a), np.prod(vals), rtol=1e-8, atol=1e-8)


def test_sqrt_spd_trivial_cases():
    assert np.allclose(sqrt_spd(np.eye(3)), np.eye(3), atol=1e-12)
    assert np.allclose(sqrt_spd(np.diag([4.0, 9.0])), np.diag([2.0, 3.0]), atol=1e-12)


def test_sqrt_spd_squares_back():
    a = np.array([[2.0, 1.0], [1.0, 2.0]])
    r = sqrt_spd(a)
    assert np.allclose(r, r.T, atol=1e-12)
    assert np.max(np.abs(r @ r - a)) <= 1e-10


def test_sqrt_spd_rejects_indefinite():
    with pytest.raises(NotPositiveDefiniteError):
        sqrt_spd(np.diag([1.0, -2.0]))
    with pytest.raises(NotPositiveDefiniteError):
        sqrt_spd(np.zeros((2, 2)))


def test_adjugate_1x1():
    adj, d = adjugate_det(np.array([[5.0]]))
    assert np.allclose(adj, [[1.0]])
    assert d == 5.0


def test_adjugate_2x2_closed_form():
    a = np.array([[3.0, -2.0], [7.0, 5.0]])
    adj, d = adjugate_det(a)
    assert np.allclose(adj, [[5.0, 2.0], [-7.0, 3.0]])
    assert np.isclose(d, 29.0)


def test_adjugate_singular_rank1():
    a = np.array([[1.0, 2.0], [2.0, 4.0]])
    adj, d = adjugate_det(a)
    assert d == 0.0
    assert np.allclose(adj, [[4.0, -2.0], [-2.0, 1.0]])
    assert np.max(np.abs(adj @ a)) <= 1e-12


def test_adjugate_random_and_singular():
    rng = np.random.default_rng(3)
    for _ in range(300):
        n = int(rng.integers(1, 7))
        a = rng.normal(size=(n, n))
        if rng.random() < 0.4 and n >= 2:
            a[:, -1] = a[:, 0] * rng.normal()  # force singularity
        adj, d = adjugate_det(a)
        scale = max(1.0, abs(d), float(np.linalg.norm(a)) ** n)
        assert np.max(np.abs(adj @ a - d * np.eye(n))) <= 1e-9 * scale
        assert np.max(np.abs(a @ adj - d * np.eye(n))) <= 1e-9 * scale


def test_orthonormalize_fixes_scaling_keeps_orthonormal_input():
    rng = np.random.default_rng(5)
    q0 = orthonormalize(rng.normal(size=(6, 3)))
    assert np.max(np.abs(orthonormalize(q0) - q0)) <= 1e-14
    scaled = 10.0 * q0
    q1 = orthonormalize(scaled)
    assert np.allclose(np.linalg.norm(q1, axis=0), 1.0, atol=1e-13)


def test_orthonormalize_preserves_span_projector():
    rng = np.random.default_rng(13)
    for _ in range(100):
        n = int(rng.integers(1, 6))
        a = rng.normal(size=(n, n))
        a = a + a.T  # (I; A) with A symmetric is a Lagrangian frame
        m = np.vstack([np.eye(n), a])
        q = orthonormalize(m)
        x, y = q[:n], q[n:]
        assert np.max(np.abs(x.T @ y - y.T @ x)) <= 1e-12
        p_before = m @ np.linalg.solve(m.T @ m, m.T)
        p_after = q @ q.T
        assert np.max(np.abs(p_before - p_after)) <= 1e-9


def test_orthonormalize_rejects_rank_deficient():
    m = np.ones((4, 2))
    with pytest.raises(DegenerateFrameError):
        orthonormalize(m)
