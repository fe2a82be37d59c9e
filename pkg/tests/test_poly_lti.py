import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import solve_ivp

from hilsim.poly_lti import (
    ContinuousTf,
    DiscreteLti,
    Polynomial,
    c2d_zoh,
    lti_step,
    poly_add,
    poly_mul,
    shift,
)

coeff = st.floats(-2.0, 2.0, allow_nan=False)
polys = st.lists(coeff, min_size=1, max_size=6).map(Polynomial)


def naive_convolve(p, q):
    out = [0.0] * (len(p) + len(q) - 1)
    for i, a in enumerate(p):
        for j, b in enumerate(q):
            out[i + j] += a * b
    return out


def test_poly_mul_example():
    got = poly_mul(Polynomial([1, -0.5]), Polynomial([1, 0.2]))
    assert got.allclose(naive_convolve([1, -0.5], [1, 0.2]), atol=1e-15)
    assert got.allclose([1, -0.3, -0.1], atol=1e-15)


def test_poly_mul_identity_and_annihilator():
    p = Polynomial([0.3, -1.2, 4.0])
    assert poly_mul(p, Polynomial([1])) == p
    assert poly_mul(p, Polynomial([0])).is_zero()


def test_poly_add_examples():
    assert poly_add(Polynomial([1, -0.9]), Polynomial([0, 0.3])).allclose([1, -0.6], atol=1e-15)
    p = Polynomial([2, 0, 5])
    assert poly_add(p, Polynomial([0])) == p
    assert poly_add(p, -1 * p).is_zero()


def test_shift_examples():
    assert shift(Polynomial([0.5]), 1) == Polynomial([0, 0.5])
    p = Polynomial([1, -0.3])
    assert shift(p, 0) == p
    assert shift(p, 2) == Polynomial([0, 0, 1, -0.3])
    with pytest.raises(ValueError):
        shift(p, -1)


def test_trailing_zeros_invisible():
    assert Polynomial([1, 2, 0, 0]) == Polynomial([1, 2])
    assert Polynomial([0, 0]).degree() == 0
    assert Polynomial([0, 0]).coeffs.tolist() == [0.0]
    assert Polynomial([1, 2, 0]).degree() == 1


@settings(max_examples=200)
@given(polys, polys, polys)
def test_ring_laws(p, q, r):
    assert (p * q).allclose(q * p, atol=1e-12)
    assert ((p * q) * r).allclose(p * (q * r), atol=1e-12)
    assert (p + q).allclose(q + p, atol=1e-12)
    assert (p * (q + r)).allclose(p * q + p * r, atol=1e-12)


@given(polys, polys)
def test_mul_matches_naive_convolution(p, q):
    assert (p * q).allclose(naive_convolve(p.coeffs, q.coeffs), atol=1e-12)


# ----------------------------------------------------------------- c2d


def continuous_step_response(num, den, times):
    """Integrate a controllable-canonical realization for a unit step input."""
    num = np.asarray(num, float)
    den = np.asarray(den, float)
    n = len(den) - 1
    den_desc = den[::-1] / den[-1]
    num_desc = np.zeros(n + 1)
    num_desc[n + 1 - len(num):] = num[::-1] / den[-1]
    dfeed = num_desc[0]
    c = num_desc[1:] - dfeed * den_desc[1:]
    A = np.zeros((n, n))
    A[0, :] = -den_desc[1:]
    A[1:, :-1] = np.eye(n - 1)

    def f(_, x):
        dx = A @ x
        dx[0] += 1.0
        return dx

    sol = solve_ivp(f, (0, times[-1]), np.zeros(n), t_eval=times, rtol=1e-11, atol=1e-13, method="DOP853")
    return c @ sol.y + dfeed


def test_c2d_first_order_closed_form():
    sys = c2d_zoh(ContinuousTf([1.0], [1.0, 10.0]), 1.0)
    assert sys.b.allclose([0.0, 1 - math.exp(-0.1)], atol=1e-12)
    assert sys.a.allclose([1.0, -math.exp(-0.1)], atol=1e-12)
    assert sys.b.coeffs[1] == pytest.approx(0.0951626, abs=1e-7)
    assert sys.a.coeffs[1] == pytest.approx(-0.9048374, abs=1e-7)


@pytest.mark.parametrize(
    "num,den,period",
    [
        ([1.0], [1.0, 10.0], 1.0),
        ([2.0], [1.0, 3.0], 0.25),
        ([1.0], [1.0, 12.0, 20.0], 1.0),  # (10s+1)(2s+1)
        ([1.0], [1.0, 12.0, 20.0], 0.045),
        ([1.0, 0.5], [1.0, 3.0, 2.0], 0.2),
    ],
)
def test_c2d_matches_integrated_step_response(num, den, period):
    sys = c2d_zoh(ContinuousTf(num, den), period)
    n = 60
    y_d = sys.simulate(np.ones(n))
    times = np.arange(n) * period
    y_c = continuous_step_response(num, den, times[1:])
    assert y_d[0] == pytest.approx(0.0, abs=1e-12)
    np.testing.assert_allclose(y_d[1:], y_c, atol=1e-8)


def test_c2d_static_gain():
    sys = c2d_zoh(ContinuousTf([3.5], [1.0]), 0.1)
    assert sys.b == Polynomial([3.5])
    assert sys.a == Polynomial([1.0])


def test_c2d_dead_time_rounding():
    assert c2d_zoh(ContinuousTf([1], [1, 5], dead_time_s=0.3), 0.1).delay_d == 3
    assert c2d_zoh(ContinuousTf([1], [1, 5], dead_time_s=0.135), 0.045).delay_d == 3
    assert c2d_zoh(ContinuousTf([1], [1, 5], dead_time_s=1.0), 0.045).delay_d == 22


def test_c2d_rejects_bad_input():
    with pytest.raises(ValueError):
        ContinuousTf([1, 2, 3], [1, 1])
    with pytest.raises(ValueError):
        c2d_zoh(ContinuousTf([1], [1, 1]), 0.0)
    with pytest.raises(ValueError):
        c2d_zoh(ContinuousTf([1], [1, 1]), -1.0)


@given(
    st.floats(0.1, 10.0),
    st.floats(0.1, 50.0),
    st.floats(0.001, 5.0),
)
def test_first_order_dc_gain_preserved(k, tau, period):
    g = ContinuousTf([k], [1.0, tau])
    sys = c2d_zoh(g, period)
    assert sys.dc_gain() == pytest.approx(g.dc_gain(), abs=1e-9)


# ----------------------------------------------------------------- stepping


def test_lti_step_hand_unrolled():
    sys = DiscreteLti([0, 0.5], [1, -0.5])
    assert [lti_step(sys, 1.0), lti_step(sys, 1.0), lti_step(sys, 1.0)] == [0.0, 0.5, 0.75]


def test_lti_static_and_zero():
    assert lti_step(DiscreteLti([2.5], [1]), 2.0) == 5.0
    sys = DiscreteLti([0.1, 0.3, -0.2], [1, -0.4, 0.1], delay_d=2)
    assert all(lti_step(sys, 0.0) == 0.0 for _ in range(10))


def test_history_bounded():
    sys = DiscreteLti([0.1, 0.3, -0.2], [1, -0.4, 0.1], delay_d=4)
    bound = sys.a.degree() + sys.b.degree() + sys.delay_d
    for _ in range(100):
        sys.step(1.0)
        assert sys.history_len() <= bound


def test_a_normalized_monic():
    sys = DiscreteLti([0, 1.0], [2.0, -1.0])
    assert sys.a.coeffs[0] == 1.0
    assert sys.b.allclose([0, 0.5])


@given(st.floats(0.5, 20.0), st.floats(0.05, 2.0), st.floats(0.2, 5.0))
def test_unit_step_converges_to_dc_gain(tau, period, k):
    sys = c2d_zoh(ContinuousTf([k], [1.0, tau]), period)
    n = math.ceil(20 * tau / period) + 1
    y = sys.simulate(np.ones(n))
    assert y[-1] == pytest.approx(sys.dc_gain(), abs=1e-6 * max(1.0, k))


@settings(max_examples=50)
@given(
    st.lists(coeff, min_size=2, max_size=4),
    st.integers(0, 5),
    st.lists(st.floats(-1, 1), min_size=30, max_size=30),
)
def test_shift_equals_input_delay(bc, d, u):
    a = Polynomial([1.0, -0.5, 0.06])
    b = Polynomial(bc)
    via_shift = DiscreteLti(shift(b, d), a).simulate(u)
    via_delay = DiscreteLti(b, a, delay_d=d).simulate(u)
    delayed_input = DiscreteLti(b, a).simulate([0.0] * d + list(u))[:len(u)]
    np.testing.assert_array_equal(via_shift, via_delay)
    np.testing.assert_allclose(via_delay, delayed_input, atol=1e-12)
