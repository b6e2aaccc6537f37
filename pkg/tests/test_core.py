import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from implicit_stc.core import (
    ControllerState,
    ErrorState,
    Gains,
    brogliato_stc_step,
    conditioned_stc_step,
    error_dynamics_step,
    explicit_euler_stc_step,
    get_controller,
    implicit_fosm_step,
    implicit_stc_step,
    resolvent,
    sat,
    sign,
    spow,
)
from implicit_stc.errors import DomainError, ParameterError
from implicit_stc.verify import printed_implicit_u

from oracles import bisect_generalized

gain = st.floats(0.1, 50.0)
period = st.floats(1e-4, 1.0)
state = st.floats(-10.0, 10.0)


def gains_strategy(u_max=False):
    if u_max:
        return st.builds(Gains, gain, gain, period, st.floats(0.1, 10.0))
    return st.builds(Gains, gain, gain, period)


# Gains

def test_gains_caches_lambda():
    g = Gains(27.0, 10.0, 0.01)
    assert g.lam == -172.25
    assert g.deadbeat_radius == pytest.approx(1e-3)


@pytest.mark.parametrize("kwargs", [
    dict(k1=0.0, k2=1.0, T=1.0),
    dict(k1=1.0, k2=-1.0, T=1.0),
    dict(k1=1.0, k2=1.0, T=0.0),
    dict(k1=1.0, k2=1.0, T=float("nan")),
    dict(k1=1.0, k2=1.0, T=1.0, u_max=0.0),
])
def test_gains_rejects_invalid(kwargs):
    with pytest.raises(ParameterError):
        Gains(**kwargs)


def test_helpers():
    assert sign(0.0) == 0.0 and sign(-3.0) == -1.0
    assert spow(-4.0, 0.5) == -2.0
    assert spow(0.0, 0.5) == 0.0
    assert sat(3.0, 1.0) == 1.0 and sat(-3.0, 1.0) == -1.0 and sat(0.2, 1.0) == 0.2


# resolvent

def test_resolvent_example_integer():
    # 1 = 5 - 2*sqrt(1) - 2*sign(1)
    g = Gains(2.0, 2.0, 1.0)
    assert resolvent(5.0, g) == pytest.approx(1.0, rel=1e-15)
    assert resolvent(5.0, g) == pytest.approx(bisect_generalized(5.0, 2.0, 2.0, 1.0), rel=1e-12)


def test_resolvent_outer_branch_keeps_sign():
    g = Gains(3.0, 10.0, 0.01)
    z = resolvent(0.3, g)
    assert sign(z) == 1.0
    # frozen from a 40-digit root solve
    assert z == pytest.approx(0.28303956124900982, rel=1e-14)
    assert resolvent(-0.3, g) == -z


def test_resolvent_deadbeat_branch():
    g = Gains(3.0, 10.0, 0.01)
    assert resolvent(0.0005, g) == 0.0
    assert resolvent(0.001, g) == 0.0  # boundary belongs to the dead-beat branch


def test_resolvent_errors():
    with pytest.raises(DomainError):
        resolvent(float("inf"), Gains(1.0, 1.0, 1.0))


@settings(max_examples=500, deadline=None)
@given(st.floats(-10.0, 10.0), gains_strategy())
def test_resolvent_matches_bisection(offset, g):
    z = resolvent(offset, g)
    ref = bisect_generalized(offset, g.k1, g.k2, g.T)
    assert abs(z - ref) <= 1e-10 * max(abs(offset), 1e-300)
    if z == 0.0:
        assert abs(offset) <= g.T ** 2 * g.k2
    else:
        resid = z + g.T * g.k1 * spow(z, 0.5) + g.T ** 2 * g.k2 * sign(z) - offset
        assert abs(resid) <= 1e-10 * max(1.0, abs(offset))


# unsaturated implicit law

def test_implicit_zero_state_keeps_integrator():
    out = implicit_stc_step(0.0, 0.7, Gains(27.0, 10.0, 0.01))
    assert (out.u, out.v_next, out.u_hat) == (0.7, 0.7, None)


def test_implicit_outer_branch_example():
    g = Gains(27.0, 10.0, 0.01)
    out = implicit_stc_step(1.0, ControllerState(0.0), g)
    # u = -(2 lam T + 27 sqrt(1 - lam T^2)), lam = -172.25, frozen from a 40-digit evaluation
    assert out.u == pytest.approx(-23.786544667903068, rel=1e-14)
    assert out.v_next == pytest.approx(-0.1, rel=1e-15)
    # cross-check: u = -k1 sqrt(z') + 2 v' - v with z' from the resolvent
    z = resolvent(1.0, g)
    assert out.u == pytest.approx(-27.0 * math.sqrt(z) + 2 * out.v_next, rel=1e-14)
    assert out.u == pytest.approx(printed_implicit_u(1.0, 0.0, g), rel=1e-14)


def test_implicit_boundary_both_formulas_agree():
    g = Gains(27.0, 10.0, 0.01)
    xb = g.deadbeat_radius
    out = implicit_stc_step(xb, 0.0, g)
    assert out.u == pytest.approx(-2 * xb / g.T, abs=1e-15)
    assert out.v_next == pytest.approx(-xb / g.T, abs=1e-15)
    outer = -(2 * g.lam * g.T + g.k1 * math.sqrt(xb - g.lam * g.T ** 2))
    assert outer == pytest.approx(out.u, abs=1e-12)


def test_implicit_rejects_saturated_gains():
    with pytest.raises(ParameterError):
        implicit_stc_step(1.0, 0.0, Gains(1.0, 1.0, 0.1, 2.0))


@settings(max_examples=300, deadline=None)
@given(st.floats(-10.0, 10.0), state, gains_strategy())
def test_implicit_solves_generalized_equations(x, v, g):
    """u = -k1 |z'|^(1/2) sign z' + 2v' - v, v' in v - T k2 Sign z', z' = x + T(u - v')."""
    out = implicit_stc_step(x, v, g)
    z = resolvent(x, g)
    scale = max(1.0, abs(v), abs(out.u))
    assert abs(out.u - (-g.k1 * spow(z, 0.5) + 2 * out.v_next - v)) <= 1e-10 * scale
    if z != 0.0:
        assert out.v_next == v - g.T * g.k2 * sign(z)
    else:
        assert abs(out.v_next - v) <= g.T * g.k2 * (1 + 1e-12)
        assert abs(x + g.T * (out.u - out.v_next)) <= 1e-12 * max(1.0, abs(x))
    # printed form agrees
    assert abs(out.u - printed_implicit_u(x, v, g)) <= 1e-9 * scale


@settings(max_examples=300, deadline=None)
@given(st.floats(-10.0, 10.0), state, gains_strategy())
def test_unsaturated_laws_are_odd(x, v, g):
    for step in (implicit_stc_step, brogliato_stc_step, explicit_euler_stc_step):
        a = step(x, v, g)
        b = step(-x, -v, g)
        assert b.u == -a.u and b.v_next == -a.v_next


def test_branch_continuity_sides():
    g = Gains(5.0, 3.0, 0.05)
    for xb in (g.deadbeat_radius, -g.deadbeat_radius):
        lo = implicit_stc_step(xb * (1 - 1e-12), 0.4, g)
        hi = implicit_stc_step(xb * (1 + 1e-12), 0.4, g)
        assert abs(lo.u - hi.u) < 1e-10
        assert abs(lo.v_next - hi.v_next) < 1e-10


# conditioned law

def test_conditioned_averaging_branch():
    g = Gains(16.0, 10.0, 0.01, 1.5)
    # x = 0 gives u_hat = v; pick v so that u = 0 via saturation is not involved:
    out = conditioned_stc_step(0.0, 0.1, g)
    assert out.u == 0.1 and out.v_next == 0.1
    # direct check of the integrator rule with u = 0: |v - u| = 0.1 <= 0.2
    x = -0.1 * g.T * 0.5  # dead-beat: u_hat = v - 2x/T = 0.1 + 0.1 = 0.2
    out = conditioned_stc_step(x, 0.1, g)
    assert out.u == pytest.approx(0.2)
    assert out.v_next == pytest.approx(0.15)


def test_conditioned_integrator_rule_examples():
    # v = 0.1, u = 0 -> (v + u)/2 = 0.05; v = 1, u = 0 -> v - k2 T = 0.9
    g = Gains(16.0, 10.0, 0.01, 1.5)
    # u = 0 requires u_hat = 0: dead-beat branch with x = v T / 2
    out = conditioned_stc_step(0.1 * g.T / 2, 0.1, g)
    assert out.u == pytest.approx(0.0, abs=1e-15)
    assert out.v_next == pytest.approx(0.05, abs=1e-15)
    # for v = 1 pick x in the outer branch with u_hat = 0 by solving for x numerically
    from scipy.optimize import brentq
    x = brentq(lambda s: conditioned_stc_step(s, 1.0, g).u_hat, g.deadbeat_radius * 1.0001, 10.0, xtol=1e-15)
    out = conditioned_stc_step(x, 1.0, g)
    assert abs(out.u) < 1e-9
    assert out.v_next == pytest.approx(0.9, abs=1e-15)


def test_conditioned_saturates():
    g = Gains(16.0, 10.0, 0.01, 1.5)
    out = conditioned_stc_step(1.0, 0.0, g)
    assert out.u == -1.5 and out.u_hat < -1.5
    # integrator moves toward u by k2 T per step
    assert out.v_next == pytest.approx(-0.1)


def test_conditioned_requires_bound():
    with pytest.raises(ParameterError):
        conditioned_stc_step(0.0, 0.0, Gains(1.0, 1.0, 1.0))


@settings(max_examples=300, deadline=None)
@given(st.floats(-10.0, 10.0), state, gains_strategy())
def test_conditioned_with_infinite_bound_is_unsaturated_law(x, v, g):
    a = conditioned_stc_step(x, v, g.with_u_max(math.inf))
    b = implicit_stc_step(x, v, g)
    scale = max(1.0, abs(v), abs(b.u))
    assert a.u == b.u
    assert abs(a.v_next - b.v_next) <= 1e-12 * scale


@settings(max_examples=500, deadline=None)
@given(st.floats(-10.0, 10.0), state, gains_strategy(u_max=True))
def test_conditioned_bound_and_footnote_identity(x, v, g):
    out = conditioned_stc_step(x, v, g)
    assert abs(out.u) <= g.u_max
    assert out.u == sat(out.u_hat, g.u_max)
    expected = v - sat((v - out.u) / 2, g.k2 * g.T)
    assert abs(out.v_next - expected) <= 1e-12 * max(1.0, abs(v))


# Brogliato law

def test_brogliato_origin():
    out = brogliato_stc_step(0.0, 0.0, Gains(27.0, 10.0, 0.01))
    assert (out.u, out.v_next) == (0.0, 0.0)


def test_brogliato_deadbeat_example():
    out = brogliato_stc_step(0.0005, 0.0, Gains(27.0, 10.0, 0.01))
    assert out.u == pytest.approx(-0.05, rel=1e-15)
    assert out.v_next == pytest.approx(-0.05, rel=1e-15)
    assert abs(out.v_next - 0.0) <= 10.0 * 0.01


@settings(max_examples=300, deadline=None)
@given(st.floats(-10.0, 10.0), state, gains_strategy())
def test_brogliato_solves_its_generalized_equations(x, v, g):
    out = brogliato_stc_step(x, v, g)
    s = x + g.T * out.u
    ref = bisect_generalized(x + g.T * v, g.k1, g.k2, g.T)
    scale = max(1.0, abs(x), abs(v))
    assert abs(s - ref) <= 1e-10 * scale
    if ref == 0.0:
        assert abs(out.u - out.v_next) == 0.0
        assert abs(out.v_next - v) <= g.k2 * g.T * (1 + 1e-12)
    else:
        assert abs(out.u + g.k1 * spow(ref, 0.5) - out.v_next) <= 1e-8 * max(scale, abs(out.u)) / g.T
        assert out.v_next == v - g.k2 * g.T * sign(ref)


# explicit Euler, FOSM

def test_explicit_euler_examples():
    g = Gains(3.0, 2.0, 0.1)
    assert explicit_euler_stc_step(0.0, 0.3, g) == explicit_euler_stc_step(0.0, 0.3, g)
    out = explicit_euler_stc_step(0.0, 0.3, g)
    assert (out.u, out.v_next) == (0.3, 0.3)
    out = explicit_euler_stc_step(-4.0, 1.0, g)
    assert out.u == pytest.approx(7.0) and out.v_next == pytest.approx(1.2)


def test_critical_gain_coincidence_example():
    g = Gains(2.0 * math.sqrt(10.0), 10.0, 0.01)
    a = implicit_stc_step(1.0, 0.0, g)
    b = explicit_euler_stc_step(1.0, 0.0, g)
    assert a.u == pytest.approx(b.u, rel=1e-13)
    assert a.v_next == b.v_next


@pytest.mark.parametrize("x, expected", [(0.0, 0.0), (10.0, -1.0), (0.005, -0.5), (-0.005, 0.5)])
def test_fosm(x, expected):
    assert implicit_fosm_step(x, 1.0, 0.01) == pytest.approx(expected)


def test_fosm_errors():
    with pytest.raises(ParameterError):
        implicit_fosm_step(0.0, 0.0, 0.01)


def test_controller_registry():
    g = Gains(16.0, 10.0, 0.01, 1.5)
    fosm = get_controller("fosm", 1.0)
    assert fosm(10.0, 0.2, g).u == -1.0 and fosm(10.0, 0.2, g).v_next == 0.2
    assert get_controller("fosm")(10.0, 0.0, g).u == -1.5
    with pytest.raises(ParameterError):
        get_controller("pid")


# error dynamics

def test_error_dynamics_origin():
    assert error_dynamics_step(ErrorState(0.0, 0.0), 0.0, Gains(2.0, 2.0, 1.0)) == ErrorState(0.0, 0.0)


def test_error_dynamics_deadbeat_example():
    e = error_dynamics_step(ErrorState(1.0, 0.0), 0.0, Gains(2.0, 2.0, 1.0))
    assert e == ErrorState(0.0, -1.0)


@settings(max_examples=300, deadline=None)
@given(st.floats(-1.0, 1.0), st.floats(-5.0, 5.0), st.floats(-1.0, 1.0), gains_strategy())
def test_error_dynamics_satisfies_inclusions(z, q, delta, g):
    e = error_dynamics_step(ErrorState(z, q), delta, g)
    T = g.T
    scale = max(1.0, abs(z), T * abs(q))
    assert abs(e.z - (z - T * g.k1 * spow(e.z, 0.5) + T * e.q)) <= 1e-10 * scale
    if e.z != 0.0:
        assert abs(e.q - (q - T * g.k2 * sign(e.z) + T * delta)) <= 1e-12 * max(1.0, abs(q))
    else:
        assert abs(e.q - q - T * delta) <= T * g.k2 * (1 + 1e-9) + 1e-12 * max(1.0, abs(q))


def test_error_dynamics_matches_physical_loop():
    """z, q computed from a controller step agree with the error map."""
    g = Gains(27.0, 10.0, 0.01)
    rng = np.random.default_rng(3)
    for _ in range(200):
        w = rng.uniform(-0.3, 0.3, 4)  # w_{k-2}, w_{k-1}, w_k
        x, v = rng.uniform(-0.5, 0.5), rng.uniform(-1, 1)
        out = implicit_stc_step(x, v, g)
        x_next = x + g.T * (out.u + w[2])
        z, q = x - g.T * (w[1] + v), v + w[0]
        z1, q1 = x_next - g.T * (w[2] + out.v_next), out.v_next + w[1]
        e = error_dynamics_step(ErrorState(z, q), (w[1] - w[0]) / g.T, g)
        assert e.z == pytest.approx(z1, abs=1e-12)
        assert e.q == pytest.approx(q1, abs=1e-10)
