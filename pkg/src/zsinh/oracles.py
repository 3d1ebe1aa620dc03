"""Slow, independent reference values used to pin down the fast engines.

Nothing in this module shares quadrature machinery with the production
paths: the European oracle uses adaptive Gauss quadrature on the flat
damped line, the barrier oracle uses density convolution on a uniform grid
with Richardson control, and the Hardy-norm oracle integrates |1 - r w|^-1
directly.  Keep it that way; the point of an oracle is that its failure
modes are different.
"""

from __future__ import annotations

import math
from typing import Tuple

import mpmath as mp
import numpy as np
from scipy.integrate import quad
from scipy.signal import fftconvolve

from .levy import LevyModel, phi_eval, psi_eval
from .payoffs import PayoffTransform, ghat_eval, payoff_value

__all__ = [
    "oracle_european_direct",
    "oracle_barrier_induction",
    "oracle_hardy_numeric",
    "oracle_zinv_series",
    "oracle_zinv_series_log",
]


def oracle_european_direct(model: LevyModel, payoff: PayoffTransform, n: int,
                           q0: float, x: float, tol: float = 1e-10) -> float:
    """E[q0^n G(x + X_n)] by direct quadrature on the damped line.

    V_n = q0^n (2 pi)^-1 int e^{i x xi} Phi(xi)^n Ghat(xi) d xi over
    Im xi = -beta.  The integrand is conjugate-symmetric in the real part
    of xi (real-valued payoff, real process), so only t >= 0 is integrated.
    """
    if n < 0:
        raise ValueError("n must be nonnegative")
    if n == 0:
        return payoff_value(payoff, x)
    beta = payoff.beta
    lo, hi = model.strip
    if not lo < -beta < hi:
        raise ValueError("payoff damping line leaves the model strip")

    ref = psi_eval(model, -1j * beta).real

    def g(t: float) -> float:
        xi = t - 1j * beta
        val = np.exp(1j * x * xi) * phi_eval(model, xi) ** n * ghat_eval(payoff, xi)
        return float(val.real)

    # scale of the first piece: where n * (Re psi - Re psi(-i beta)) reaches 1,
    # so the Phi^n spike at large n is never stepped over
    t1 = 1e-8
    while n * (psi_eval(model, t1 - 1j * beta).real - ref) < 1.0 and t1 < 1e6:
        t1 *= 2.0
    t1 *= 3.0

    total = 0.0
    t0, width = 0.0, t1
    for _ in range(40):
        piece, _ = quad(g, t0, t0 + width, limit=300, epsabs=1e-15, epsrel=1e-12)
        total += piece
        t0 += width
        width *= 2.0
        if abs(piece) < 0.01 * tol * max(abs(total), 1e-12) and t0 > 10.0 * t1:
            break
    else:
        raise ArithmeticError("damped-line tail did not settle by t=%g" % t0)
    return q0 ** n * total / math.pi


def _cumulants(model: LevyModel) -> Tuple[float, float]:
    """(mean, variance) of one step from central differences of psi at 0."""
    e = 1e-4
    pp = psi_eval(model, e)
    pm = psi_eval(model, -e)
    mean = float((1j * (pp - pm) / (2.0 * e)).real)
    var = float(((pp + pm) / (e * e)).real)  # psi(0) = 0
    return mean, var


def _transition_density(model: LevyModel, z: np.ndarray) -> np.ndarray:
    """p(z) = (1/pi) Re int_0^T Phi(t) exp(-i z t) dt on the given grid."""
    t_hi = 2.0
    while psi_eval(model, t_hi).real < 40.0 and t_hi < 1e7:
        t_hi *= 1.5
    z_max = float(np.max(np.abs(z)))
    step = math.pi / (1.2 * max(z_max, 1.0))
    nt = int(math.ceil(t_hi / step)) + 1
    t = np.linspace(0.0, t_hi, nt)
    phi_t = phi_eval(model, t + 0j)
    w = np.full(nt, t[1] - t[0])
    w[0] *= 0.5
    w[-1] *= 0.5
    ker = np.exp(-1j * np.outer(z, t))
    p = (ker @ (w * phi_t)).real / math.pi
    p = np.clip(p, 0.0, None)
    mass = float(np.sum(p)) * (z[1] - z[0])
    if abs(mass - 1.0) > 0.05:
        raise ArithmeticError("density mass %.4f far from one; grid too coarse" % mass)
    return p / mass


def _barrier_on_grid(model, payoff, n, h, L, dx) -> Tuple[np.ndarray, np.ndarray]:
    # the barrier sits exactly on a cell edge: cells [h-(j+1)dx, h-j
    # dx) are fully alive or fully dead, keeping the position error O(dx^2)
    nx = int(round(L / dx))
    x = h - dx * (nx - np.arange(nx) - 0.5)
    nz = nx  # density support matches the state span
    z = dx * (np.arange(-nz, nz + 1))
    p = _transition_density(model, z)

    v = np.array([payoff_value(payoff, xi) for xi in x])
    for _ in range(n):
        full = fftconvolve(v, p[::-1], mode="full") * dx
        v = full[nz: nz + nx]
    return x, v


def oracle_barrier_induction(model: LevyModel, payoff: PayoffTransform, n: int,
                             q0: float, x_eval, h: float,
                             tol: float = 1e-5, dx: float | None = None):
    """Up-and-out value by density convolution with Richardson control.

    Monitoring at dates 1..n, terminal date included: the payoff G(x_n)
    counts only if every monitored state, x_n among them, stays below h.
    Returns (values at x_eval, error estimate).  The state grid is aligned
    to the barrier and truncated L below it; L covers the payoff level,
    the diffusion width and the exponential tails.
    """
    if n < 0:
        raise ValueError("n must be nonnegative")
    if n > 32:
        raise ValueError("induction oracle limited to n <= 32")
    x_eval = np.atleast_1d(np.asarray(x_eval, dtype=float))
    if np.any(x_eval >= h):
        raise ValueError("evaluation points must sit below the barrier")
    if n == 0:
        vals = np.array([payoff_value(payoff, xi) if xi < h else 0.0 for xi in x_eval])
        return vals, 0.0

    mean, var = _cumulants(model)
    lam = min(abs(model.strip[0]), abs(model.strip[1]), 10.0)
    L = abs(h - payoff.a) + 12.0 * math.sqrt(n * var + 0.25) + 45.0 / max(lam, 1.0) + 2.0 + abs(mean) * n
    if dx is None:
        dx = L / 2400.0

    out = []
    for step in (dx, 0.5 * dx):
        xg, vg = _barrier_on_grid(model, payoff, n, h, L, step)
        out.append(np.interp(x_eval, xg, vg))
    coarse, fine = out
    err = float(np.max(np.abs(fine - coarse))) / 3.0 * q0 ** n
    vals = fine + (fine - coarse) / 3.0
    if err > tol:
        raise ArithmeticError("induction grid error %.3e above tol %.3e" % (err, tol))
    return q0 ** n * vals, err


def oracle_hardy_numeric(r: float) -> float:
    """int_{-pi}^{pi} |1 - r e^{i phi}|^{-1} d phi by adaptive quadrature."""
    if not 0.0 <= r < 1.0:
        raise ValueError("need 0 <= r < 1")

    def f(t: float) -> float:
        return 1.0 / abs(1.0 - r * complex(math.cos(t), math.sin(t)))

    val, _ = quad(f, -math.pi, math.pi, points=[0.0], limit=500,
                  epsabs=1e-13, epsrel=1e-12)
    return val


_SERIES = ("geometric", "exp", "pole_one", "two_pole")


def oracle_zinv_series(rule: str, n: int, ratio: float = 0.5) -> float:
    """Closed-form coefficients of the standard test transforms.

    geometric: Vt = 1/(1 - ratio q), V_n = ratio^n.
    exp:       Vt = e^q,             V_n = 1/n!.
    pole_one:  Vt = 1/(1-q),         V_n = 1.
    two_pole:  Vt = 1/((1-q)(1-q/3)), V_n = (3 - 3^-n)/2.
    """
    if rule == "geometric":
        return ratio ** n
    if rule == "exp":
        return float(mp.mpf(1) / mp.factorial(n))
    if rule == "pole_one":
        return 1.0
    if rule == "two_pole":
        return float((mp.mpf(3) - mp.mpf(3) ** (-n)) / 2)
    raise ValueError("unknown rule %r; have %s" % (rule, ", ".join(_SERIES)))


def oracle_zinv_series_log(rule: str, n: int, ratio: float = 0.5) -> float:
    """log of the same coefficients, usable far below the floating range."""
    if rule == "geometric":
        if ratio <= 0:
            raise ValueError("log form needs a positive ratio")
        return n * math.log(ratio)
    if rule == "exp":
        return -float(mp.loggamma(n + 1))
    if rule == "pole_one":
        return 0.0
    if rule == "two_pole":
        return float(mp.log((mp.mpf(3) - mp.mpf(3) ** (-n)) / 2))
    raise ValueError("unknown rule %r; have %s" % (rule, ", ".join(_SERIES)))
