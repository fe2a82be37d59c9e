"""PID and RST control laws, and RST synthesis by pole placement.

RST law:  S(q^-1) u(t) = T(q^-1) r(t) - R(q^-1) y(t)
Design:   A S + q^-d B R = P   fixes the closed-loop poles at the roots of P.

``B`` carries its own leading delay (``b0 = 0`` for a sampled strictly
proper plant), so ``d`` counts only the extra whole-sample dead time.
"""
from __future__ import annotations

import warnings
from collections import deque
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .poly_lti import Polynomial, shift

PIVOT_TOL = 1e-10
RESIDUAL_TOL = 1e-9
T_MODES = ("unit_dc_gain", "paper_literal")


class SingularSylvester(ValueError):
    """A and q^-d B share a common factor; the Sylvester matrix is singular."""


class DegreeTooHigh(ValueError):
    """deg(P) exceeds deg(A) + deg(B) + d - 1."""


class ZeroStaticGain(ValueError):
    """B(1) == 0, so no feedforward T can give the requested static gain."""


# --------------------------------------------------------------------- PID


@dataclass(frozen=True)
class PidGains:
    kp: float
    ki: float = 0.0
    kd: float = 0.0
    out_min_V: float = 0.0
    out_max_V: float = 4.5

    def __post_init__(self):
        if not self.out_min_V < self.out_max_V:
            raise ValueError("need out_min_V < out_max_V")


@dataclass
class PidController:
    """Discrete PID with output clamping and conditional-integration anti-windup.

    The derivative acts on the error and is unfiltered.
    """

    gains: PidGains
    period_s: float
    anti_windup: bool = True
    integral_state: float = 0.0
    prev_error: float = 0.0
    saturated: bool = False

    def __post_init__(self):
        if not self.period_s > 0:
            raise ValueError("period_s must be > 0")

    def reset(self):
        self.integral_state = 0.0
        self.prev_error = 0.0
        self.saturated = False

    def step(self, r_V: float, y_V: float) -> float:
        g = self.gains
        e = r_V - y_V
        deriv = g.kd * (e - self.prev_error) / self.period_s
        integral = self.integral_state + e * self.period_s
        if self.anti_windup:
            # freeze the integrator while the output is already saturated
            # and the error would push it further
            u_held = g.kp * e + g.ki * self.integral_state + deriv
            pushing_up = u_held >= g.out_max_V and g.ki * e > 0
            pushing_down = u_held <= g.out_min_V and g.ki * e < 0
            if pushing_up or pushing_down:
                integral = self.integral_state
        u = g.kp * e + g.ki * integral + deriv
        self.integral_state = integral
        self.prev_error = e
        self.saturated = not g.out_min_V <= u <= g.out_max_V
        return min(max(u, g.out_min_V), g.out_max_V)


def pid_step(c: PidController, r_V: float, y_V: float) -> float:
    return c.step(r_V, y_V)


# ----------------------------------------------------------------- RST design


def sylvester_matrix(a: Polynomial, bd: Polynomial, n_s: int, n_r: int) -> np.ndarray:
    """Columns map [s0..s_ns, r0..r_nr] to the coefficients of A S + Bd R."""
    rows = n_s + 1 + n_r + 1
    m = np.zeros((rows, rows))
    ac, bc = a.coeffs, bd.coeffs
    for j in range(n_s + 1):
        m[j : j + len(ac), j] = ac
    for j in range(n_r + 1):
        m[j : j + len(bc), n_s + 1 + j] = bc
    return m


def solve_diophantine(a: Polynomial, b: Polynomial, d: int, p: Polynomial):
    """Minimal-degree solution (S, R) of ``A S + q^-d B R = P`` with monic S.

    deg S = deg B + d - 1 and deg R = deg A - 1. Raises
    :class:`SingularSylvester` or :class:`DegreeTooHigh`; ``ValueError`` when
    A or P is not monic or q^-d B has a direct feedthrough term.
    """
    a, b, p = Polynomial(a), Polynomial(b), Polynomial(p)
    if d < 0:
        raise ValueError("d must be >= 0")
    if a.coeffs[0] != 1.0:
        raise ValueError(f"A must be monic (a0 = 1), got a0 = {a.coeffs[0]}")
    if b.is_zero():
        raise SingularSylvester("B is the zero polynomial")
    bd = shift(b, d)
    n_a, n_bd = a.degree(), bd.degree()
    n_s, n_r = n_bd - 1, n_a - 1
    if p.degree() > n_a + n_bd - 1:
        raise DegreeTooHigh(
            f"deg(P) = {p.degree()} exceeds deg(A) + deg(B) + d - 1 = {n_a} + {b.degree()} + {d} - 1"
        )
    if n_s < 0:
        raise ValueError("q^-d B has a direct feedthrough term (b0 != 0 with d = 0); loop is not causal")

    m = sylvester_matrix(a, bd, n_s, n_r)
    with warnings.catch_warnings():
        # singularity is detected from the pivots below
        warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
        lu, piv = scipy.linalg.lu_factor(m, check_finite=True)
    min_pivot = float(np.min(np.abs(np.diag(lu))))
    if min_pivot < PIVOT_TOL:
        raise SingularSylvester(
            f"A (deg {n_a}) and q^-d B (deg {n_bd}) share a common factor; min pivot {min_pivot:.3g}"
        )
    rhs = np.zeros(m.shape[0])
    rhs[: len(p.coeffs)] = p.coeffs
    x = scipy.linalg.lu_solve((lu, piv), rhs)
    s = Polynomial(x[: n_s + 1])
    r = Polynomial(x[n_s + 1 :]) if n_r >= 0 else Polynomial([0.0])
    if abs(s.coeffs[0] - 1.0) > RESIDUAL_TOL:
        raise ValueError(f"P must be monic (p0 = 1) for a monic S, got p0 = {p.coeffs[0]}")
    # pin s0 exactly
    sc = s.coeffs.copy()
    sc[0] = 1.0
    return Polynomial(sc), r


def diophantine_residual(a, b, d, p, s, r) -> float:
    res = Polynomial(a) * s + shift(Polynomial(b), d) * r - Polynomial(p)
    return float(np.max(np.abs(res.coeffs)))


@dataclass(frozen=True)
class RstDesign:
    a: Polynomial
    b: Polynomial
    d: int
    p: Polynomial
    r: Polynomial
    s: Polynomial
    t: Polynomial
    t_mode: str = "unit_dc_gain"

    @property
    def residual(self) -> float:
        return diophantine_residual(self.a, self.b, self.d, self.p, self.s, self.r)

    def closed_loop_dc_gain(self) -> float:
        return float(self.t(1.0) * self.b(1.0) / self.p(1.0))

    def as_dict(self) -> dict:
        return {
            "a": self.a.tolist(),
            "b": self.b.tolist(),
            "d": self.d,
            "p": self.p.tolist(),
            "r": self.r.tolist(),
            "s": self.s.tolist(),
            "t": self.t.tolist(),
            "t_mode": self.t_mode,
            "residual": self.residual,
        }


def design_rst(a, b, d: int, p, t_mode: str = "unit_dc_gain") -> RstDesign:
    """Solve for R and S, then form T.

    ``unit_dc_gain``: T = P / B(1), unity closed-loop static gain.
    ``paper_literal``: T = A P / B(1), kept for comparison; its static gain
    is A(1), not 1.
    """
    if t_mode not in T_MODES:
        raise ValueError(f"t_mode must be one of {T_MODES}, got {t_mode!r}")
    a, b, p = Polynomial(a), Polynomial(b), Polynomial(p)
    b1 = float(b(1.0))
    if abs(b1) < PIVOT_TOL:
        raise ZeroStaticGain(f"B(1) = {b1:.3g}")
    s, r = solve_diophantine(a, b, d, p)
    t = p / b1 if t_mode == "unit_dc_gain" else (a * p) / b1
    return RstDesign(a, b, int(d), p, r, s, t, t_mode)


class RstController:
    """Runs ``u(t) = T r(t) - R y(t) - (S - 1) u(t)`` over stored histories."""

    def __init__(self, design: RstDesign, period_s: float = 1.0):
        if not period_s > 0:
            raise ValueError("period_s must be > 0")
        self.design = design
        self.period_s = float(period_s)
        self.reset()

    def reset(self):
        d = self.design
        self._r = deque([0.0] * (d.t.degree() + 1), maxlen=d.t.degree() + 1)
        self._y = deque([0.0] * (d.r.degree() + 1), maxlen=d.r.degree() + 1)
        n_u = d.s.degree()
        self._u = deque([0.0] * n_u, maxlen=n_u)

    def step(self, r_V: float, y_V: float) -> float:
        d = self.design
        self._r.appendleft(r_V)
        self._y.appendleft(y_V)
        u = float(np.dot(d.t.coeffs, self._r)) - float(np.dot(d.r.coeffs, self._y))
        if self._u.maxlen:
            u -= float(np.dot(d.s.coeffs[1:], self._u))
            self._u.appendleft(u)
        return u


def rst_step(c: RstController, r_V: float, y_V: float) -> float:
    return c.step(r_V, y_V)


# -------------------------------------------------------- other control laws


@dataclass
class PassThrough:
    """u = r; a wire from the reference to the actuator."""

    period_s: float = 1.0

    def reset(self):
        pass

    def step(self, r_V: float, y_V: float) -> float:
        return r_V


@dataclass
class Echo:
    """u = y; the in-process twin of the echo HiL peer."""

    period_s: float = 1.0

    def reset(self):
        pass

    def step(self, r_V: float, y_V: float) -> float:
        return y_V
