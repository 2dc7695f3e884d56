import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.special import zeta

from hamstab.errors import DegenerateBaseProblem
from hamstab.hill import hill_ratio, transversality
from hamstab.propagator import CoefficientPath, fundamental_solution, iterated_integrals
from hamstab.systems import angle_boundary, builtin_system, dirichlet_boundary
from hamstab.trace import (anticommuting_part, commuting_part, conditional_traces, constant_coefficient_trace,
                           frame_traces, g_matrices, trace_power, trace_powers)

from conftest import random_symmetric, smooth_path


def _gs(B, D, pair, order=2, tol=1e-11):
    g0 = fundamental_solution(B, tol)
    return g_matrices(transversality(pair, g0), iterated_integrals(g0, D, order, tol))


def test_g_matrices_zero_perturbation(dirichlet1):
    Z = CoefficientPath.zero(1, 1.0)
    G1, G2 = _gs(Z, Z, dirichlet1)
    assert np.allclose(G1, 0) and np.allclose(G2, 0)


@pytest.mark.parametrize("T", [1.0, 1.7])
def test_g_matrices_unit_weight(T):
    G1, G2 = _gs(CoefficientPath.zero(1, T), CoefficientPath.constant(np.eye(2), T), dirichlet_boundary(1))
    assert np.allclose(G1, [[0.0, 0.0], [T, 0.0]], atol=1e-12)
    assert np.allclose(G2, -(T * T / 2) * np.diag([1.0, 0.0]), atol=1e-12)
    rep = trace_powers(G1, G2)
    assert rep.tr1 == pytest.approx(0.0, abs=1e-12)
    assert rep.tr2 == pytest.approx(T * T, abs=1e-10)


def test_counterexample_traces(counterexample):
    rep = conditional_traces(*counterexample, alphas=(0.0, 1.0))
    assert rep.tr1 == pytest.approx(1.0, abs=1e-10)
    assert rep.tr2 == pytest.approx(0.0, abs=1e-10)
    assert rep.f_samples[1][1] == pytest.approx(math.exp(-1), abs=1e-10)


def test_zero_perturbation_traces(dirichlet1):
    Z = CoefficientPath.zero(1, 1.0)
    rep = conditional_traces(Z, Z, dirichlet1)
    assert rep.tr1 == 0.0 and rep.tr2 == 0.0


def test_closed_form_examples():
    I2 = CoefficientPath.constant(np.eye(2), 2.0)
    assert constant_coefficient_trace(0.0, I2, dirichlet_boundary(1)) == pytest.approx(0.0, abs=1e-12)
    assert constant_coefficient_trace(0.0, I2, angle_boundary([math.pi / 4])) == pytest.approx(2.0, abs=1e-10)
    off = CoefficientPath.constant(np.array([[0.0, 1.0], [1.0, 0.0]]), 1.0)
    assert constant_coefficient_trace(0.0, off, dirichlet_boundary(1)) == pytest.approx(1.0, abs=1e-10)


def test_closed_form_resonance():
    with pytest.raises(DegenerateBaseProblem):
        constant_coefficient_trace(math.pi / 2, CoefficientPath.constant(np.eye(2), 1.0), dirichlet_boundary(1))


@settings(max_examples=20, deadline=None)
@given(st.integers(1, 2), st.floats(-1.2, 1.2), st.integers(0, 2 ** 31 - 1))
def test_closed_form_matches_g_route(n, nu, seed):
    rng = np.random.default_rng(seed)
    pair = angle_boundary(np.sort(rng.uniform(-1.4, 1.5, n)))
    B = CoefficientPath.constant(nu * np.eye(2 * n), 1.0)
    D = smooth_path(rng, n, 1.0, 0.5)
    try:
        closed = constant_coefficient_trace(nu, D, pair)
        tr1 = conditional_traces(B, D, pair).tr1
    except DegenerateBaseProblem:
        return
    assert tr1 == pytest.approx(closed, rel=1e-8, abs=1e-8)


def test_tr1_is_minus_log_derivative(rng):
    B, D = smooth_path(rng, 2), smooth_path(rng, 2)
    pair = angle_boundary([0.3, 1.2])
    tr1 = conditional_traces(B, D, pair, 1e-12).tr1
    errs = []
    for h in (1e-3, 1e-4):
        fd = (hill_ratio(B, D, pair, h, 1e-12) - hill_ratio(B, D, pair, -h, 1e-12)) / (2 * h)
        errs.append(abs(tr1 + fd))
    assert errs[1] <= 1e-6
    assert errs[1] < errs[0]


def test_log_expansion_remainder_is_cubic(rng):
    B, D = smooth_path(rng, 1), smooth_path(rng, 1)
    pair = angle_boundary([0.9])
    rep = conditional_traces(B, D, pair, 1e-12)

    def rem(a):
        return math.log(hill_ratio(B, D, pair, a, 1e-12)) + rep.tr1 * a + rep.tr2 * a * a / 2

    ratio = rem(2e-2) / rem(1e-2)
    assert ratio == pytest.approx(8.0, rel=0.05)


def test_splitting_identity(rng):
    D = smooth_path(rng, 2, 1.0, 0.7)
    pair = angle_boundary([-0.5, 1.0])
    nu = 0.4
    whole = constant_coefficient_trace(nu, D, pair)
    parts = constant_coefficient_trace(nu, commuting_part(D), pair) + \
        constant_coefficient_trace(nu, anticommuting_part(D), pair)
    assert whole == pytest.approx(parts, abs=1e-8)


@pytest.mark.parametrize("nu", [0.3, -0.9])
@pytest.mark.parametrize("m", [2, 3, 4])
def test_general_power_against_zeta(nu, m):
    # B = nu I, D = I, theta = pi/2: eigenvalues (k + 1/2) pi - nu, k in Z
    sysm = builtin_system("constant-nu", nu=nu)
    gs = _gs(sysm.B, sysm.D, sysm.boundary, order=m, tol=1e-12)
    a = nu / math.pi
    exact = math.pi ** (-m) * (zeta(m, 0.5 - a) + (-1) ** m * zeta(m, 0.5 + a))
    assert trace_power(gs, m) == pytest.approx(exact, rel=1e-8)


def test_general_power_low_orders_match_closed_forms(rng):
    B, D = smooth_path(rng, 1), smooth_path(rng, 1)
    gs = _gs(B, D, angle_boundary([0.7]))
    rep = trace_powers(*gs)
    assert trace_power(gs, 1) == pytest.approx(rep.tr1, rel=1e-12, abs=1e-12)
    assert trace_power(gs, 2) == pytest.approx(rep.tr2, rel=1e-12, abs=1e-12)


@pytest.mark.parametrize("name,params", [("counterexample33", {}), ("dirichlet-free", {"T": 2.0}),
                                         ("constant-nu", {"nu": -0.4}),
                                         ("lagrange", {"beta": 0.4, "half": "plus"}),
                                         ("euler", {"delta": 0.7, "e": 0.3, "half": "minus"})])
def test_frame_route_agrees_with_g_route(name, params):
    s = builtin_system(name, **params)
    rep = conditional_traces(s.B, s.D, s.boundary, 1e-11)
    tr1, tr2 = frame_traces(s.B, s.D, s.boundary, 1e-11)
    assert tr1 == pytest.approx(rep.tr1, rel=1e-8, abs=1e-9)
    assert tr2 == pytest.approx(rep.tr2, rel=1e-8, abs=1e-9)
