import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hilsim.controllers import (
    DegreeTooHigh,
    PassThrough,
    PidController,
    PidGains,
    RstController,
    RstDesign,
    SingularSylvester,
    ZeroStaticGain,
    design_rst,
    diophantine_residual,
    pid_step,
    rst_step,
    solve_diophantine,
)
from hilsim.poly_lti import DiscreteLti, Polynomial, shift

A1 = Polynomial([1, -0.9])
B1 = Polynomial([0, 0.5])
P1 = Polynomial([1, -0.6])


# ----------------------------------------------------------------- Diophantine


def test_worked_example():
    s, r = solve_diophantine(A1, B1, 0, P1)
    assert s.allclose([1.0], atol=1e-12)
    assert r.allclose([0.6], atol=1e-12)
    assert diophantine_residual(A1, B1, 0, P1, s, r) <= 1e-9


def test_p_equals_a():
    a = Polynomial([1, -1.2, 0.35])
    b = Polynomial([0, 0.3, 0.1])
    s, r = solve_diophantine(a, b, 1, a)
    assert s.allclose([1.0], atol=1e-12)
    assert r.is_zero() or r.allclose([0.0], atol=1e-12)


def test_common_factor_is_singular():
    a = Polynomial([1, -1])
    b = Polynomial([0, 1, -1])  # q^-1 (1 - q^-1)
    with pytest.raises(SingularSylvester):
        solve_diophantine(a, b, 0, Polynomial([1, -0.5]))


def test_degree_too_high():
    with pytest.raises(DegreeTooHigh, match="deg"):
        solve_diophantine(A1, B1, 0, Polynomial([1, -0.5, 0.06]))


def test_preconditions():
    with pytest.raises(ValueError):
        solve_diophantine(Polynomial([2, -0.9]), B1, 0, P1)
    with pytest.raises(ValueError):
        solve_diophantine(A1, Polynomial([0.5]), 0, P1)  # feedthrough
    with pytest.raises(ValueError):
        solve_diophantine(A1, B1, -1, P1)


def random_instance(rng):
    n_a = int(rng.integers(1, 4))
    n_b = int(rng.integers(1, 4))
    d = int(rng.integers(0, 3))
    a = Polynomial(np.concatenate([[1.0], rng.uniform(-1, 1, n_a)]))
    b = Polynomial(np.concatenate([[0.0], rng.uniform(-1, 1, n_b)]))
    n_s = n_b + d - 1
    s0 = Polynomial(np.concatenate([[1.0], rng.uniform(-1, 1, n_s)]))
    r0 = Polynomial(rng.uniform(-1, 1, n_a))
    p = a * s0 + shift(b, d) * r0
    return a, b, d, p, s0, r0


def test_random_recovery():
    rng = np.random.default_rng(2024)
    for _ in range(100):
        a, b, d, p, s0, r0 = random_instance(rng)
        s, r = solve_diophantine(a, b, d, p)
        assert s.allclose(s0, atol=1e-9), (a, b, d)
        assert r.allclose(r0, atol=1e-9), (a, b, d)
        assert diophantine_residual(a, b, d, p, s, r) <= 1e-9
        assert s.coeffs[0] == 1.0


# ----------------------------------------------------------------- design_rst


def test_t_modes():
    dsg = design_rst(A1, B1, 0, P1)
    assert dsg.t.allclose([2.0, -1.2], atol=1e-12)
    assert dsg.closed_loop_dc_gain() == pytest.approx(1.0, abs=1e-12)
    lit = design_rst(A1, B1, 0, P1, "paper_literal")
    assert lit.t.allclose([2.0, -3.0, 1.08], atol=1e-12)
    assert lit.closed_loop_dc_gain() == pytest.approx(0.1, abs=1e-12)  # A(1), not 1


def test_zero_static_gain():
    with pytest.raises(ZeroStaticGain):
        design_rst(A1, Polynomial([0, 1, -1]), 0, P1)
    with pytest.raises(ValueError):
        design_rst(A1, B1, 0, P1, "bogus")


def test_design_is_frozen():
    dsg = design_rst(A1, B1, 0, P1)
    assert isinstance(dsg, RstDesign)
    with pytest.raises(AttributeError):
        dsg.d = 3
    assert dsg.residual <= 1e-9


# ----------------------------------------------------------------- RST closed loop


def closed_loop(design, r_seq, v_seq=None):
    """RST against its own model; v is an input disturbance added at the plant.

    B has b0 = 0, so the plant is stepped with u(t-1) to produce y(t) before
    the controller sees it.
    """
    plant = DiscreteLti(design.b.coeffs[1:], design.a, design.d)
    c = RstController(design)
    u_prev, out = 0.0, []
    for k, r in enumerate(r_seq):
        v_prev = 0.0 if v_seq is None or k == 0 else v_seq[k - 1]
        y = plant.step(u_prev + v_prev)
        u_prev = rst_step(c, r, y)
        out.append(y)
    return np.array(out)


def test_rst_zero_and_passthrough():
    c = RstController(design_rst(A1, B1, 0, P1))
    assert rst_step(c, 0.0, 0.0) == 0.0
    ident = RstDesign(
        Polynomial([1]), Polynomial([0, 1]), 0, Polynomial([1]),
        r=Polynomial([0]), s=Polynomial([1]), t=Polynomial([1]),
    )
    c = RstController(ident)
    rng = np.random.default_rng(0)
    for r in rng.normal(size=20):
        assert c.step(r, rng.normal()) == r
    assert PassThrough().step(0.3, 9.0) == 0.3


def test_rst_law_holds_each_sample():
    dsg = design_rst([1, -1.5, 0.56], [0, 0.1, 0.08], 2, [1, -1.2, 0.4, -0.05])
    c = RstController(dsg)
    rng = np.random.default_rng(1)
    rs, ys, us = [], [], []
    for _ in range(40):
        r, y = rng.normal(), rng.normal()
        us.append(c.step(r, y))
        rs.append(r)
        ys.append(y)
    # S u = T r - R y, checked by direct convolution
    su = np.convolve(dsg.s.coeffs, us)[:40]
    tr = np.convolve(dsg.t.coeffs, rs)[:40]
    ry = np.convolve(dsg.r.coeffs, ys)[:40]
    np.testing.assert_allclose(su, tr - ry, atol=1e-10)


def test_regulation_pole_recovered_from_ratio():
    dsg = design_rst(A1, B1, 0, P1)
    v = np.zeros(30)
    v[0] = 1.0  # input impulse, r = 0: y = q^-1 B S / P v
    y = closed_loop(dsg, np.zeros(30), v)
    ratios = y[3:20] / y[2:19]
    np.testing.assert_allclose(ratios, 0.6, atol=1e-9)


def fit_closed_loop_denominator(design, n_p, n=400, seed=0):
    """Least-squares ARX fit of P from a loop excited by r and an input disturbance."""
    rng = np.random.default_rng(seed)
    r = rng.normal(size=n)
    v = rng.normal(size=n)
    y = closed_loop(design, r, v)
    bt = shift(design.b * design.t, design.d).coeffs
    bs = shift(design.b * design.s, design.d).coeffs
    lag = max(n_p, len(bt), len(bs))
    rows, rhs = [], []
    for k in range(lag, n):
        row = [-y[k - i] for i in range(1, n_p + 1)]
        row += [r[k - i] for i in range(len(bt))]
        row += [v[k - i] for i in range(len(bs))]
        rows.append(row)
        rhs.append(y[k])
    theta, *_ = np.linalg.lstsq(np.array(rows), np.array(rhs), rcond=None)
    return np.concatenate([[1.0], theta[:n_p]])


@pytest.mark.parametrize(
    "a,b,d,p",
    [
        ([1, -0.9], [0, 0.5], 0, [1, -0.6]),
        ([1, -1.5, 0.56], [0, 0.1, 0.08], 2, [1, -1.2, 0.4, -0.05]),
        ([1.0, -1.511368077748593, 0.5488116360940265], [0.0, 0.020585892383208515, 0.0168576659622246], 1,
         [1, -1.4, 0.49]),
        ([1, -1.2, 0.2], [0, 1.0, -0.5], 1, [1, -0.6, 0.08]),  # integrating plant
    ],
)
def test_closed_loop_realizes_p(a, b, d, p):
    dsg = design_rst(a, b, d, p)
    fitted = fit_closed_loop_denominator(dsg, len(dsg.p.coeffs) - 1)
    np.testing.assert_allclose(fitted, dsg.p.coeffs, atol=1e-6)


def test_unit_step_tracking():
    dsg = design_rst(A1, B1, 0, P1)
    y = closed_loop(dsg, np.ones(60))
    assert np.all(np.abs(y[50:] - 1.0) < 1e-4)


@settings(max_examples=30, deadline=None)
@given(st.floats(0.1, 0.8), st.floats(0.1, 0.95), st.floats(0.1, 2.0))
def test_unit_step_tracking_first_order_family(p_root, a_root, gain):
    dsg = design_rst([1, -a_root], [0, gain], 0, [1, -p_root])
    y = closed_loop(dsg, np.ones(80))
    assert abs(y[-1] - 1.0) < 1e-4


# ----------------------------------------------------------------- PID


def test_pid_examples():
    c = PidController(PidGains(1.0, out_min_V=-10, out_max_V=10), 0.1)
    assert pid_step(c, 0.5, 0.0) == 0.5
    c = PidController(PidGains(1.2, 0.3, 0.4), 0.1)
    assert all(pid_step(c, 0.0, 0.0) == 0.0 for _ in range(10))


def test_pid_matches_hand_formula():
    g = PidGains(1.2, 0.5, 0.05, -100, 100)
    c = PidController(g, 0.1)
    integ, prev = 0.0, 0.0
    rng = np.random.default_rng(4)
    for r, y in rng.normal(size=(30, 2)):
        e = r - y
        integ += e * 0.1
        expect = g.kp * e + g.ki * integ + g.kd * (e - prev) / 0.1
        prev = e
        assert c.step(r, y) == pytest.approx(expect, abs=1e-12)


def test_pid_ramp_time_and_frozen_integrator():
    # pure integral on e = 1: u_k = ki * I_k with I_k the float running sum of T,
    # so the first saturated step is the first k with ki * I_k >= out_max
    g = PidGains(0.0, ki=2.0, kd=0.0, out_min_V=0.0, out_max_V=4.5)
    T = 0.045
    integ, k_sat = 0.0, 0
    while g.ki * integ < g.out_max_V:
        integ += T
        k_sat += 1
    assert abs(k_sat - 4.5 / (2.0 * T)) <= 1  # closed-form ramp time
    c = PidController(g, T)
    outs = [c.step(1.0, 0.0) for _ in range(k_sat + 50)]
    first = next(i + 1 for i, u in enumerate(outs) if u >= 4.5)
    assert first == k_sat
    assert all(u == 4.5 for u in outs[first - 1:])
    assert c.integral_state <= (4.5 + 2.0 * T) / 2.0 + 1e-12
    frozen = c.integral_state
    c.step(1.0, 0.0)
    assert c.integral_state == frozen
    # without anti-windup the integrator keeps climbing
    w = PidController(g, T, anti_windup=False)
    for _ in range(k_sat + 50):
        w.step(1.0, 0.0)
    assert w.integral_state > frozen + 1.0


def test_anti_windup_recovers_faster():
    g = PidGains(0.5, 1.0, 0.0, 0.0, 1.0)

    def drive(aw):
        c = PidController(g, 0.1, anti_windup=aw)
        for _ in range(200):
            c.step(5.0, 0.0)
        n = 0
        while c.step(0.0, 0.5) >= 1.0:  # error reverses
            n += 1
        return n

    assert drive(True) < drive(False)


@given(
    st.lists(st.tuples(st.floats(-50, 50), st.floats(-50, 50)), min_size=1, max_size=60),
    st.floats(0, 5), st.floats(0, 5), st.floats(0, 2), st.booleans(),
)
def test_pid_output_bounded(seq, kp, ki, kd, aw):
    c = PidController(PidGains(kp, ki, kd, 0.0, 4.5), 0.045, anti_windup=aw)
    for r, y in seq:
        u = c.step(r, y)
        assert 0.0 <= u <= 4.5


def test_pid_integral_action_first_order_loop():
    plant = DiscreteLti([0, 1 - math.exp(-0.01)], [1, -math.exp(-0.01)])
    c = PidController(PidGains(2.0, 0.5, 0.0, -100, 100), 0.1)
    y = 0.0
    for _ in range(3000):
        y = plant.step(c.step(1.0, y))
    assert abs(y - 1.0) < 1e-3


def test_pid_validation():
    with pytest.raises(ValueError):
        PidGains(1.0, out_min_V=1.0, out_max_V=1.0)
    with pytest.raises(ValueError):
        PidController(PidGains(1.0), 0.0)
