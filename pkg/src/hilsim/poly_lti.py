"""Polynomials in the delay operator q^-1 and linear time-invariant models.

Coefficients are stored in ascending powers: ``[c0, c1, ..., cn]`` is
``c0 + c1 q^-1 + ... + cn q^-n``. The same container is reused for
continuous transfer functions, where the variable is ``s`` (also ascending).
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np
from scipy.linalg import expm

COEFF_TOL = 1e-12


class Polynomial:
    """Immutable real polynomial in ascending powers.

    Coefficients with magnitude <= 1e-12 are treated as exact zeros and
    trailing zeros are stripped, so equality ignores padding.
    """

    __slots__ = ("_c",)

    def __init__(self, coeffs=(0.0,)):
        if isinstance(coeffs, Polynomial):
            coeffs = coeffs.coeffs
        c = np.atleast_1d(np.asarray(coeffs, dtype=float)).copy()
        if c.ndim != 1:
            raise ValueError("coefficients must be a 1-D sequence")
        if not np.all(np.isfinite(c)):
            raise ValueError("coefficients must be finite")
        c[np.abs(c) <= COEFF_TOL] = 0.0
        nz = np.flatnonzero(c)
        c = c[: nz[-1] + 1] if nz.size else np.zeros(1)
        c.setflags(write=False)
        self._c = c

    @property
    def coeffs(self) -> np.ndarray:
        return self._c

    def degree(self) -> int:
        return len(self._c) - 1

    def is_zero(self) -> bool:
        return len(self._c) == 1 and self._c[0] == 0.0

    def __call__(self, x):
        """Evaluate at ``x`` (the value substituted for q^-1, or s)."""
        return np.polynomial.polynomial.polyval(x, self._c)

    def __add__(self, other):
        return poly_add(self, _as_poly(other))

    __radd__ = __add__

    def __neg__(self):
        return Polynomial(-self._c)

    def __sub__(self, other):
        return poly_add(self, -_as_poly(other))

    def __rsub__(self, other):
        return poly_add(_as_poly(other), -self)

    def __mul__(self, other):
        return poly_mul(self, _as_poly(other))

    __rmul__ = __mul__

    def __truediv__(self, k: float):
        return Polynomial(self._c / float(k))

    def __eq__(self, other):
        if not isinstance(other, Polynomial):
            try:
                other = _as_poly(other)
            except (TypeError, ValueError):
                return NotImplemented
        return np.array_equal(self._c, other._c)

    def __hash__(self):
        return hash(tuple(self._c))

    def allclose(self, other, atol: float = 1e-9) -> bool:
        other = _as_poly(other)
        n = max(len(self._c), len(other._c))
        return bool(np.allclose(_pad(self._c, n), _pad(other._c, n), rtol=0.0, atol=atol))

    def tolist(self) -> list[float]:
        return [float(v) for v in self._c]

    def __repr__(self):
        return f"Polynomial({self.tolist()})"


def _as_poly(p) -> Polynomial:
    if isinstance(p, Polynomial):
        return p
    return Polynomial(p)


def _pad(c: np.ndarray, n: int) -> np.ndarray:
    out = np.zeros(n)
    out[: len(c)] = c
    return out


def poly_mul(p: Polynomial, q: Polynomial) -> Polynomial:
    return Polynomial(np.convolve(p.coeffs, q.coeffs))


def poly_add(p: Polynomial, q: Polynomial) -> Polynomial:
    n = max(len(p.coeffs), len(q.coeffs))
    return Polynomial(_pad(p.coeffs, n) + _pad(q.coeffs, n))


def shift(p: Polynomial, d: int) -> Polynomial:
    """Multiply by q^-d."""
    if d < 0:
        raise ValueError(f"shift must be non-negative, got {d}")
    if p.is_zero():
        return p
    return Polynomial(np.concatenate([np.zeros(d), p.coeffs]))


@dataclass(frozen=True)
class ContinuousTf:
    """Proper continuous transfer function num(s)/den(s) with optional dead time."""

    num: Polynomial
    den: Polynomial
    dead_time_s: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "num", _as_poly(self.num))
        object.__setattr__(self, "den", _as_poly(self.den))
        if self.den.is_zero():
            raise ValueError("denominator is the zero polynomial")
        if self.num.degree() > self.den.degree() and not self.num.is_zero():
            raise ValueError(
                f"improper transfer function: deg(num)={self.num.degree()} > deg(den)={self.den.degree()}"
            )
        if self.dead_time_s < 0:
            raise ValueError("dead time must be >= 0")

    def dc_gain(self) -> float:
        return float(self.num(0.0) / self.den(0.0))

    def poles(self) -> np.ndarray:
        return np.polynomial.polynomial.polyroots(self.den.coeffs) if self.den.degree() else np.array([])


class DiscreteLti:
    """SISO difference equation ``A(q^-1) y = q^-d B(q^-1) u``.

    ``step`` consumes one input sample and returns the output at the same
    instant. ``A`` is normalized so that ``a0 == 1``.
    """

    def __init__(self, b, a, delay_d: int = 0, period_s: float = 1.0):
        b = _as_poly(b)
        a = _as_poly(a)
        if a.coeffs[0] == 0.0:
            raise ValueError("a0 must be nonzero")
        if delay_d < 0:
            raise ValueError("delay must be >= 0")
        if not period_s > 0:
            raise ValueError("period must be > 0")
        a0 = a.coeffs[0]
        self.b = b / a0
        self.a = a / a0
        self.delay_d = int(delay_d)
        self.period_s = float(period_s)
        self._nu = self.b.degree() + self.delay_d
        self._ny = self.a.degree()
        self.reset()

    def reset(self, y0: float = 0.0):
        """Clear history; a nonzero ``y0`` starts the model at that equilibrium."""
        u0 = 0.0
        if y0 != 0.0:
            g = self.dc_gain()
            if not np.isfinite(g) or g == 0.0:
                raise ValueError("cannot initialize at a nonzero equilibrium without finite dc gain")
            u0 = y0 / g
        # most recent first
        self._u = deque([u0] * self._nu, maxlen=self._nu)
        self._y = deque([y0] * self._ny, maxlen=self._ny)

    def history_len(self) -> int:
        return len(self._u) + len(self._y)

    def dc_gain(self) -> float:
        return float(self.b(1.0) / self.a(1.0))

    def step(self, u: float) -> float:
        bc, ac, d = self.b.coeffs, self.a.coeffs, self.delay_d
        # u(t-k) for k = 0..nu
        past_u = [u, *self._u]
        y = 0.0
        for j, bj in enumerate(bc):
            y += bj * past_u[d + j]
        for i in range(1, len(ac)):
            y -= ac[i] * self._y[i - 1]
        if self._nu:
            self._u.appendleft(u)
        if self._ny:
            self._y.appendleft(y)
        return y

    def simulate(self, u) -> np.ndarray:
        return np.array([self.step(float(v)) for v in u])

    def __repr__(self):
        return (
            f"DiscreteLti(b={self.b.tolist()}, a={self.a.tolist()}, "
            f"delay_d={self.delay_d}, period_s={self.period_s})"
        )


def lti_step(sys: DiscreteLti, u: float) -> float:
    return sys.step(u)


def round_half_away(x):
    """Round to nearest integer, ties away from zero."""
    return np.copysign(np.floor(np.abs(x) + 0.5), x)


def c2d_zoh(g: ContinuousTf, period_s: float) -> DiscreteLti:
    """Zero-order-hold discretization of ``g`` at ``period_s``.

    Exact for any proper rational part: a controllable-canonical realization
    is discretized with the block matrix exponential, then converted back to
    q^-1 coefficients. Dead time is rounded to whole samples.
    """
    if not period_s > 0:
        raise ValueError(f"period must be > 0, got {period_s}")
    num, den = g.num.coeffs, g.den.coeffs
    n = g.den.degree()
    delay_d = int(round_half_away(g.dead_time_s / period_s))
    lead = den[-1]
    if n == 0:
        return DiscreteLti([num[0] / lead], [1.0], delay_d, period_s)

    # monic descending form: s^n + a1 s^(n-1) + ... + an
    den_desc = den[::-1] / lead
    num_desc = np.zeros(n + 1)
    num_desc[n + 1 - len(num):] = num[::-1] / lead
    dfeed = num_desc[0]
    resid = num_desc[1:] - dfeed * den_desc[1:]  # strictly proper part, length n

    A = np.zeros((n, n))
    A[0, :] = -den_desc[1:]
    if n > 1:
        A[1:, :-1] = np.eye(n - 1)
    B = np.zeros((n, 1))
    B[0, 0] = 1.0
    C = resid.reshape(1, n)

    M = np.zeros((n + 1, n + 1))
    M[:n, :n] = A * period_s
    M[:n, n:] = B * period_s
    E = expm(M)
    Phi, Gam = E[:n, :n], E[:n, n:]

    # char poly of Phi in z (descending) == coefficients in q^-1 (ascending)
    a = np.poly(Phi)
    b = np.poly(Phi - Gam @ C) - a + dfeed * a
    return DiscreteLti(np.real(b), np.real(a), delay_d, period_s)
