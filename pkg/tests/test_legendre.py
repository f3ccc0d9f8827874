import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pha_sk.legendre import DualEntropy, LambdaDomainError, inf_convolution_check, terminal_entropy

# ((1 - y) log(1 - y) + (1 + y) log(1 + y)) / 2 - log 2 at y = 0.5, mpmath
LAMBDA_1_HALF = -0.5623351446188084


@pytest.fixture(scope="module")
def de1_0(sol1):
    return DualEntropy(sol1, 0.0)


def test_terminal_values(de1_0):
    v = de1_0.eval_lambda(1.0, 0.0)
    assert abs(v.value + math.log(2)) < 1e-12 and abs(v.d1) < 1e-10
    assert abs(de1_0.eval_lambda(1.0, 0.5).value - LAMBDA_1_HALF) < 1e-8
    assert abs(terminal_entropy(0.5) - LAMBDA_1_HALF) < 1e-15
    y = np.array([-0.999, -0.3, 0.999])
    assert np.max(np.abs(de1_0.eval_lambda(1.0, y).value - terminal_entropy(y))) < 1e-6


def test_terminal_v(de1_0):
    # limited by the O(dx^2) second difference of the default grid
    y = np.linspace(-0.95, 0.95, 39)
    assert np.max(np.abs(de1_0.eval_v(1.0, y) - (1 - y * y))) < 2e-4


def test_domain_error(de1_0):
    with pytest.raises(LambdaDomainError):
        de1_0.eval_lambda(0.5, np.array([0.2, 1.0]))
    with pytest.raises(ValueError):
        DualEntropy(de1_0.sol, -1.0)


@settings(max_examples=40, deadline=None)
@given(st.floats(0.0, 1.0), st.floats(-0.99, 0.99), st.sampled_from([0.0, 1e-3, 1e-2]))
def test_symmetry_and_round_trip(sol1, t, y, gamma):
    de = DualEntropy(sol1, gamma)
    a = de.eval_lambda(t, np.array([y, -y]))
    assert abs(a.value[0] - a.value[1]) < 1e-9
    assert abs(a.d1[0] + a.d1[1]) < 1e-9
    x = a.d1[0]
    assert abs(sol1.dx_phi(t, np.array([x]))[0] + gamma * x - y) < 1e-10
    assert abs(de.eval_v(t, y) * a.d2[0] - 1.0) < 1e-12


@settings(max_examples=40, deadline=None)
@given(st.floats(0.0, 1.0), st.floats(-1.5, 1.5), st.sampled_from([1e-3, 1e-2]))
def test_second_third_derivative_bounds(sol2, t, y, gamma):
    v = DualEntropy(sol2, gamma).eval_lambda(t, y)
    assert 1 / (1 + gamma) - 1e-9 <= v.d2 <= 1 / gamma + 1e-9
    assert abs(v.d3) <= 2 / gamma**2 + 1e-9


def test_first_derivative_bound(sol2):
    de = DualEntropy(sol2, 0.0)
    for t in (0.0, 0.4, 0.9):
        y = np.linspace(-0.999, 0.999, 101)
        d1 = de.eval_lambda(t, y).d1
        assert np.all(np.abs(d1) <= 0.5 * np.log(2 / (1 - np.abs(y))) + 16 * (1 - t) + 1e-6)


def test_lipschitz_of_v(de2):
    y = np.linspace(-1.2, 1.2, 241)
    h = 1e-4
    for t in (0.0, 0.3, 0.6, 0.95):
        dvy = (de2.eval_v(t, y + h) - de2.eval_v(t, y - h)) / (2 * h)
        assert np.max(np.abs(dvy)) <= 2.0 * 1.1
        dvt = (de2.eval_v(t + 1e-3, y) - de2.eval_v(t, y)) / 1e-3
        assert np.max(np.abs(dvt)) <= 14 * 4.0 * 1.1


def test_inf_convolution(sol1):
    de = DualEntropy(sol1, 0.01)
    ic = inf_convolution_check(de, 0.5, 0.3)
    lv = de.eval_lambda(0.5, 0.3)
    assert abs(ic.value - lv.value) <= 1e-4
    assert abs(ic.argmin - (0.3 - 0.01 * lv.d1)) <= 1e-6
    base = DualEntropy(sol1, 0.0)
    y = np.linspace(-0.99, 0.99, 51)
    assert np.all(de.eval_lambda(0.5, y).value <= base.eval_lambda(0.5, y).value + 1e-12)
    with pytest.raises(ValueError):
        inf_convolution_check(base, 0.5, 0.3)


def test_uniform_gamma_convergence(sol2):
    beta, base = 2.0, DualEntropy(sol2, 0.0)
    y = np.linspace(-0.99, 0.99, 101)
    for gamma in (1e-2, 1e-3):
        reg = DualEntropy(sol2, gamma)
        bound = (1 + 4 * beta**2) * (2 * beta**2 * gamma) ** (4 * beta**2 / (1 + 4 * beta**2))
        for t in (0.0, 0.5, 1.0):
            gap = base.eval_lambda(t, y).value - reg.eval_lambda(t, y).value
            assert gap.min() >= -1e-10 and gap.max() <= bound + 1e-8


def test_primal_pde_residual(sol2, mu2):
    # inside a measure cell: d_t Lambda_g = beta^2 (1/d2 - g + F (y - g d1)^2)
    gamma, beta = 1e-3, 2.0
    de = DualEntropy(sol2, gamma)
    y = np.linspace(-0.9, 0.9, 37)
    for t in (0.205, 0.555, 0.905):
        h = 1e-4
        dt = (de.eval_lambda(t + h, y).value - de.eval_lambda(t - h, y).value) / (2 * h)
        v = de.eval_lambda(t, y)
        rhs = beta**2 * (1 / v.d2 - gamma + mu2.F(t) * (y - gamma * v.d1) ** 2)
        assert np.max(np.abs(dt - rhs)) < 5e-3


def test_warm_start_consistency(de2):
    y = np.linspace(-0.8, 0.8, 500)
    cold = DualEntropy(de2.sol, de2.gamma).eval_lambda(0.4, y)
    de2.eval_lambda(0.4, y + 0.01)
    warm = de2.eval_lambda(0.4, y)
    assert np.max(np.abs(cold.d1 - warm.d1)) < 1e-10
