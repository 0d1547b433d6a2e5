import numpy as np
import pytest

from maslov.errors import EssentialSpectrumError, InvalidInputError
from maslov.examples import (
    analytic_maslov,
    example1_analytic_s,
    example1_pole_positions,
    example1_problem,
    example2_analytic_branches,
    example2_pole_positions,
    example2_problem,
)

# value of S(0) at lambda = 1: (a1 + gamma a0) / (2 a0) with gamma = 2 sqrt 2,
# a0 = -8 sqrt2 / 15, a1 = 13/5, simplified by hand to -7 sqrt2 / 32
S0_LAMBDA_1 = -7.0 * np.sqrt(2.0) / 32.0

# root of h at lambda = 1, from the cubic in tanh(x/2) solved to 40 digits
X0_LAMBDA_1 = 1.3498120029509594


def test_example1_potential_values():
    p = example1_problem()
    assert np.allclose(p.potential(0.0), [[2.0]])
    assert np.allclose(p.potential(80.0), [[-1.0]], atol=1e-12)
    assert np.allclose(p.v_minus, [[-1.0]])


def test_example1_analytic_s_at_zero():
    assert np.isclose(example1_analytic_s(1.0, 0.0), S0_LAMBDA_1, atol=1e-13)


def test_example1_pole_location():
    poles = example1_pole_positions(1.0, 20.0)
    assert len(poles) == 1
    assert abs(poles[0] - X0_LAMBDA_1) <= 1e-9


def test_example1_s_limit_at_plus_infinity():
    for lam in [0.5, 1.0, 2.0]:
        assert np.isclose(example1_analytic_s(lam, 25.0), np.sqrt(lam + 1.0), atol=1e-9)


def test_example1_pole_is_marked_not_raised():
    poles = example1_pole_positions(1.0, 20.0)
    val = example1_analytic_s(1.0, poles[0])
    assert not np.isfinite(val) or abs(val) > 1e9


def test_example1_rejects_bad_lambda():
    with pytest.raises(EssentialSpectrumError):
        example1_analytic_s(-1.5, 0.0)


def test_example2_potential_values():
    p = example2_problem(-1.0)
    assert np.allclose(p.potential(0.0), np.diag([8.0, 10.0]))
    assert np.allclose(p.v_plus, np.diag([-4.0, -2.0]))


def test_example2_identical_channels_at_c_zero():
    xs = np.linspace(-5.0, 5.0, 101)
    mu1, mu2 = example2_analytic_branches(1.0, 0.0, xs)
    finite = np.isfinite(mu1) & np.isfinite(mu2)
    assert np.allclose(mu1[finite], mu2[finite], atol=1e-12)


def test_example2_pole_counts():
    pu, pv = example2_pole_positions(1.0, -1.0, 20.0)
    assert len(pu) == 1
    assert len(pv) == 2


def test_example2_branch_limits():
    mu1, mu2 = example2_analytic_branches(1.0, -1.0, 30.0)
    assert np.isclose(mu1, np.sqrt(5.0), atol=1e-9)
    assert np.isclose(mu2, np.sqrt(3.0), atol=1e-9)


def test_example2_guards():
    with pytest.raises(EssentialSpectrumError):
        example2_analytic_branches(-5.0, 0.0, 0.0)
    with pytest.raises(EssentialSpectrumError):
        example2_analytic_branches(1.0, -2.6, 0.0)
    with pytest.raises(InvalidInputError):
        example2_problem(-2.5)


def test_analytic_maslov_values():
    assert analytic_maslov("example1", 1.0) == -1
    assert analytic_maslov("example2", 1.0, c=-1.0) == -3
    # no eigenvalue of {-3/4, 0, 5/4} exceeds 2
    assert analytic_maslov("example1", 2.0) == 0


def test_analytic_maslov_eigenvalue_count():
    # index equals minus the number of operator eigenvalues above lambda;
    # the scalar problem has eigenvalues {-3/4, 0, 5/4}
    eigenvalues = [-0.75, 0.0, 1.25]
    for lam in [0.5, 1.0, 2.0]:
        expected = -sum(1 for e in eigenvalues if e > lam)
        assert analytic_maslov("example1", lam) == expected


def test_analytic_maslov_unknown_example():
    with pytest.raises(InvalidInputError):
        analytic_maslov("example9", 1.0)
