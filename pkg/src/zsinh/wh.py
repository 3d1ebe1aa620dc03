"""Wiener-Hopf factorization of 1 - q*Phi(xi) on separated contours.

With w(xi) = (1 - q) / (1 - q*Phi(xi)) the factors are normalized so that

    phi_plus(q, xi) * phi_minus(q, xi) = w(xi),   phi_plus(q, 0) = phi_minus(q, 0) = 1,

phi_plus analytic and zero-free above the lower contour, phi_minus below
the upper one.  Both come from the Cauchy-type integral

    J_C(xi) = (1/2 pi i) int_C ln w(eta) * xi / (eta (xi - eta)) d eta,

with phi_plus = exp(-J_{C-}) for xi above C- and phi_minus = exp(+J_{C+})
for xi below C+.  ln w is branch-tracked along each contour, anchored at
the wings where Phi vanishes; the constant wing value integrates in closed
form through endpoint logarithms, so the numerical quadrature only sees
the decaying part.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from typing import Dict, Tuple, Union

import numpy as np

from .contours import SinhXiContour, chi_xi_eval, chi_xi_deriv
from .levelcurves import ExtendedCurve
from .levy import LevyModel, psi_eval

__all__ = [
    "FactorizationError",
    "WHContext",
    "wh_plus",
    "wh_minus",
    "wh_continue",
    "wh_vp_line",
    "factor_identity_residual",
]

Contour = Union[SinhXiContour, ExtendedCurve]

_TARGET_CHUNK = 256


class FactorizationError(ArithmeticError):
    """The factorization integrals cannot be trusted for this (q, contours)."""


def _contour_eval(contour: Contour, t: np.ndarray):
    if isinstance(contour, SinhXiContour):
        return chi_xi_eval(contour, t), chi_xi_deriv(contour, t)
    return contour.quad_points(t)


def _param_halfrange(model: LevyModel, q: complex, contour: Contour, eps: float) -> float:
    """Truncation T with the symbol suppressed at both wings."""
    if isinstance(contour, ExtendedCurve):
        return contour.x_max
    target = math.log1p(abs(q)) + math.log(1.0 / eps) + 5.0
    y = 3.0
    while y < 40.0:
        z_lo = chi_xi_eval(contour, -y)
        z_hi = chi_xi_eval(contour, y)
        if (psi_eval(model, z_lo).real >= target
                and psi_eval(model, z_hi).real >= target):
            return y
        y += 0.5
    return 40.0


@dataclass
class WHContext:
    """Per-q factorization state over a fixed pair of contours.

    ``grid_cache`` may be shared between contexts with different q (the
    contour nodes and Phi values on them do not depend on q); the per-q
    logarithm data lives in the context itself.
    """

    model: LevyModel
    q: complex
    contour_minus: Contour
    contour_plus: Contour
    eps: float = 1e-12
    base_intervals: int = 128
    max_level: int = 7
    grid_cache: Dict = field(default_factory=dict)
    _ldata: Dict = field(default_factory=dict, repr=False)
    _jcache: Dict = field(default_factory=dict, repr=False)

    def contour(self, side: str) -> Contour:
        return self.contour_minus if side == "-" else self.contour_plus

    def grid(self, side: str, level: int):
        key = (side, level)
        got = self.grid_cache.get(key)
        if got is not None:
            return got
        contour = self.contour(side)
        half = self.grid_cache.setdefault(
            ("range", side), _param_halfrange(self.model, self.q, contour, self.eps))
        n = self.base_intervals * (1 << level)
        t = np.linspace(-half, half, n + 1)
        eta, deta = _contour_eval(contour, t)
        w = np.full(n + 1, t[1] - t[0])
        w[0] *= 0.5
        w[-1] *= 0.5
        weights = w * deta
        phi = np.exp(-psi_eval(self.model, eta))
        got = (eta, weights, phi)
        self.grid_cache[key] = got
        return got

    def line_data(self, side: str, level: int):
        """(eta, weights, dL, C, jumpy) for one side/level."""
        key = (side, level)
        got = self._ldata.get(key)
        if got is not None:
            return got
        eta, weights, phi = self.grid(side, level)
        denom = 1.0 - self.q * phi
        floor = 1e-10 * (1.0 + abs(self.q))
        if np.min(np.abs(denom)) < floor:
            raise FactorizationError(
                "1 - q*Phi vanishes on the %s contour (pinch); move the contours" % side)
        C = cmath.log(1.0 - self.q)
        logw = np.log((1.0 - self.q) / denom)
        im = np.unwrap(logw.imag)
        L = logw.real + 1j * im
        dL = L - C
        wing = max(abs(dL[0]), abs(dL[-1]))
        if wing > 1e-5:
            if abs(abs(dL[-1].imag) - 2.0 * math.pi) < 1.0:
                raise FactorizationError("nonzero winding of 1 - q*Phi along the contour")
            raise FactorizationError(
                "symbol not suppressed at the contour wings (|ln w| = %.3g)" % wing)
        jumpy = bool(np.max(np.abs(np.diff(im))) > 0.5 * math.pi)
        got = (eta, weights, dL, C, jumpy)
        self._ldata[key] = got
        return got

    def start_level(self, side: str) -> int:
        for lv in range(self.max_level):
            try:
                jumpy = self.line_data(side, lv)[4]
            except FactorizationError:
                raise
            if not jumpy:
                return lv
        return self.max_level


def _side_sign(contour: Contour, p: complex) -> float:
    """+1 when the contour passes above p, -1 below."""
    if isinstance(contour, SinhXiContour):
        yc = contour.omega1
    else:
        yc = complex(contour.point(p.real)).imag
    d = yc - p.imag
    if d == 0.0:
        raise FactorizationError("evaluation point lies on the contour")
    return 1.0 if d > 0.0 else -1.0


def _cauchy_sum(eta, weights, dL, C, s0, s_xi, targets):
    """(1/2 pi i) sum_j W_j dL_j K(eta_j, xi) + C (s_xi - s0) / 2.

    The wing-constant part of ln w integrates over the whole contour in
    closed form: the kernel's antiderivative ln eta - ln(eta - xi) changes
    by -i pi per sign of passage, so truncating it with endpoint logarithms
    would leave an O(xi/T) tail; the sign form is exact.
    """
    out = np.empty(targets.shape, dtype=complex)
    wdl = weights * dL
    for lo in range(0, targets.size, _TARGET_CHUNK):
        xi = targets[lo:lo + _TARGET_CHUNK]
        diff = eta[:, None] - xi[None, :]
        mind = np.min(np.abs(diff), axis=0)
        if np.min(mind) == 0.0:
            raise FactorizationError("evaluation point collides with a quadrature node")
        kern = xi[None, :] / (eta[:, None] * (-diff))
        quad = wdl @ kern
        out[lo:lo + _TARGET_CHUNK] = quad / (2j * math.pi)
    return out + C * (s_xi - s0) / 2.0


def _factor(ctx: WHContext, integ_side: str, sign: float, targets) -> np.ndarray:
    targets = np.atleast_1d(np.asarray(targets, dtype=complex))
    contour = ctx.contour(integ_side)
    s0 = _side_sign(contour, 0.0 + 0.0j)
    s_xi = np.array([_side_sign(contour, complex(p)) for p in targets])
    lv = ctx.start_level(integ_side)
    prev = None
    tol = 0.5 * ctx.eps
    while lv <= ctx.max_level:
        cached = ctx._jcache.get((integ_side, lv))
        if cached is not None and cached[0].shape == targets.shape and np.array_equal(cached[0], targets):
            cur = cached[1]
        else:
            eta, weights, dL, C, _ = ctx.line_data(integ_side, lv)
            cur = _cauchy_sum(eta, weights, dL, C, s0, s_xi, targets)
            ctx._jcache[(integ_side, lv)] = (targets, cur)
        if prev is not None and np.max(np.abs(cur - prev)) <= tol:
            return np.exp(sign * cur)
        prev = cur
        lv += 1
    raise FactorizationError(
        "factor integral did not settle to %.1e within %d refinements" % (tol, ctx.max_level))


def wh_plus(ctx: WHContext, xi) -> np.ndarray:
    """phi_plus(q, xi) for xi strictly above the lower contour."""
    return _factor(ctx, "-", -1.0, xi)


def wh_minus(ctx: WHContext, xi) -> np.ndarray:
    """phi_minus(q, xi) for xi strictly below the upper contour."""
    return _factor(ctx, "+", +1.0, xi)


def wh_continue(ctx: WHContext, side: str, xi) -> np.ndarray:
    """Continue a factor across its defining contour through the identity.

    phi_minus continues upward (and phi_plus downward) wherever 1 - q*Phi
    does not vanish, as the ratio of w = (1-q)/(1-q*Phi) to the other
    factor, which stays given by its convergent integral there.
    """
    xi = np.atleast_1d(np.asarray(xi, dtype=complex))
    denom = 1.0 - ctx.q * np.exp(-psi_eval(ctx.model, xi))
    if np.min(np.abs(denom)) < 1e-10 * (1.0 + abs(ctx.q)):
        raise FactorizationError("1 - q*Phi vanishes at a continuation point")
    w = (1.0 - ctx.q) / denom
    if side == "-":
        return w / wh_plus(ctx, xi)
    if side == "+":
        return w / wh_minus(ctx, xi)
    raise ValueError("side must be '+' or '-'")


def factor_identity_residual(ctx: WHContext, xi) -> float:
    """max |phi_plus * phi_minus * (1 - q*Phi)/(1 - q) - 1| over the points."""
    xi = np.atleast_1d(np.asarray(xi, dtype=complex))
    prod = wh_plus(ctx, xi) * wh_minus(ctx, xi)
    w = (1.0 - ctx.q) / (1.0 - ctx.q * np.exp(-psi_eval(ctx.model, xi)))
    return float(np.max(np.abs(prod / w - 1.0)))


def wh_vp_line(model: LevyModel, q: complex, contour: SinhXiContour,
               intervals: int = 2048, eps: float = 1e-12):
    """Both factors on a single line through principal-value integrals.

    The singular kernel is tamed by subtracting ln w at the target node
    (the remaining integrand is analytic through the node, with the
    diagonal replaced by its limit -d(ln w)/d eta) and by integrating the
    subtracted constant in closed form, principal value included.  Returns
    (eta, phi_plus, phi_minus) on the interior nodes.
    """
    if abs(contour.omega) > 1e-12:
        raise ValueError("principal-value route requires a flat line (omega = 0)")
    half = _param_halfrange(model, q, contour, eps)
    t = np.linspace(-half, half, intervals + 1)
    eta, deta = _contour_eval(contour, t)
    w = np.full(t.size, t[1] - t[0])
    w[0] *= 0.5
    w[-1] *= 0.5
    weights = w * deta

    phi = np.exp(-psi_eval(model, eta))
    denom = 1.0 - q * phi
    if np.min(np.abs(denom)) < 1e-10 * (1.0 + abs(q)):
        raise FactorizationError("1 - q*Phi vanishes on the line")
    C = cmath.log(1.0 - q)
    logw = np.log((1.0 - q) / denom)
    L = logw.real + 1j * np.unwrap(logw.imag)
    dL = L - C
    if max(abs(dL[0]), abs(dL[-1])) > 1e-5:
        raise FactorizationError("symbol not suppressed at the line ends")

    # centered slope of dL in eta for the removable diagonal
    slope = np.zeros_like(dL)
    slope[1:-1] = (dL[2:] - dL[:-2]) / (eta[2:] - eta[:-2])

    # constant part of ln w integrates over the whole line in closed form
    # ((1/2 pi i) vp int kern = -s0/2); the subtracted dL(xi) piece only
    # spans the truncated segment, so it takes the endpoint-log form
    s0 = 1.0 if contour.omega1 > 0.0 else -1.0
    arg_eta = np.unwrap(np.angle(eta))
    log_a = math.log(abs(eta[0])) + 1j * arg_eta[0]
    log_b = math.log(abs(eta[-1])) + 1j * arg_eta[-1]

    trim = 3
    idx = np.arange(trim, eta.size - trim)
    jvals = np.empty(idx.size, dtype=complex)
    for out_k, k in enumerate(idx):
        xi = eta[k]
        diffk = eta - xi
        kern = np.empty_like(eta)
        mask = np.arange(eta.size) != k
        kern[mask] = xi / (eta[mask] * (-diffk[mask]))
        integ = (dL - dL[k])
        integ[mask] *= kern[mask]
        integ[k] = -slope[k]
        quad = np.sum(weights * integ)
        pv_seg = (log_b - log_a) - (math.log(abs(eta[-1] - xi)) - math.log(abs(eta[0] - xi)))
        jvals[out_k] = (quad + dL[k] * pv_seg) / (2j * math.pi) - s0 * 0.5 * C

    half_L = 0.5 * L[idx]
    phip = np.exp(half_L - jvals)
    phim = np.exp(half_L + jvals)
    return eta[idx], phip, phim
