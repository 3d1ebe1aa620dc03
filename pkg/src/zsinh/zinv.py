"""Inverse Z-transform of the coefficients V_n from their generating function.

Two quadratures of the Cauchy integral V_n = (2*pi*i)^-1 oint q^(-n-1) Vt(q) dq
are provided:

* the plain trapezoid rule on a circle |q| = r = exp(-M/n), whose node count
  scales like n/M, and
* a sinh-deformed contour on which the same accuracy needs a factor
  ~ (n/M)/log(n/M) fewer nodes.

Both paths report their plans, and the sinh path returns a scaled result
(mantissa plus log offset) so coefficients far below the floating range,
such as 2^-n at n = 3780, are still recovered with full relative accuracy.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, replace
from typing import Callable, Optional

import mpmath as mp
import numpy as np
from scipy.special import ellipk

from .contours import SinhZContour, build_z_contour, chi_z_eval, validate_z_contour

__all__ = [
    "NumericalFailure",
    "TransformEvaluator",
    "TrapPlan",
    "SinhPlan",
    "ZInvResult",
    "invert_trapezoid",
    "trapezoid_error_bound",
    "choose_trap_params",
    "choose_sinh_params",
    "invert_sinh",
    "invert_sinh_full",
    "gain_factor",
    "resolvent_bound",
    "predicted_step",
    "predicted_terms",
    "hardy_pole_norm",
    "sinh_invert_mp",
    "trap_invert_mp",
    "trap_nodes_certified",
    "trap_nodes_empirical",
    "sinh_nodes_empirical",
]

_TWO_PI = 2.0 * math.pi
AUTO_M = 8.0  # default aggressiveness of the float-safe automatic planner
MIN_SINH_N = 8  # below this the plain trapezoid is at least as cheap


class NumericalFailure(RuntimeError):
    """A quadrature plan could not be built or failed its runtime checks."""


@dataclass
class TransformEvaluator:
    """User-facing description of the transform Vt.

    ``eval`` maps complex q to Vt(q).  ``a_v``/``c_v`` bound the growth
    |Vt(q)| <= c_v * |q|^a_v away from the singular set, ``gamma`` is the
    half-angle of the sector containing the singularities outside the unit
    disc (0 means "none known"), ``bound_kind`` selects the norm model used
    by error bounds.  ``disc_radius`` widens the known disc of analyticity;
    ``entire`` marks transforms analytic on all of C (the automatic planner
    then rescales to the saddle radius and requires ``log_eval``).

    ``sector_profile``, when given, refines the constant-gamma wedge: it
    maps log-radius above the pole-free disc edge (vectorized, t >= 0) to
    the wedge half-width there, nondecreasing with sup equal to ``gamma``.
    Singular sets that recede from the real axis with radius leave far more
    room for the contour strip than the constant wedge admits.
    """

    eval: Callable[[complex], complex]
    a_v: float = 0.0
    c_v: float = 1.0
    gamma: float = 0.0
    bound_kind: str = "generic"
    real_coefficients: bool = True
    disc_radius: float = 1.0
    entire: bool = False
    log_eval: Optional[Callable[[complex], complex]] = None
    sector_profile: Optional[Callable[[np.ndarray], np.ndarray]] = None


@dataclass(frozen=True)
class TrapPlan:
    r: float
    N: int
    M: float
    rho: float
    m1: float = 0.0
    n_approx: int = 0


@dataclass(frozen=True)
class SinhPlan:
    contour: SinhZContour
    hardy_log: float
    predicted_terms: int
    eps: float
    M: float
    branch: str = "bend_left"

    @property
    def hardy_estimate(self) -> float:
        return math.exp(min(700.0, self.hardy_log))


@dataclass
class ZInvResult:
    """Scaled inversion result.

    The recovered coefficient is
        value = exp(log_offset + scale_power * scale_log_unit) * mantissa.
    ``scale_log_unit`` is the log of the contour rescale factor; the factor
    is exp(scale_log_unit) by definition, so the split is exact.  ``mantissa``
    is an O(1) complex number carrying the full relative accuracy.
    """

    mantissa: complex
    log_offset: float
    scale_log_unit: float
    scale_power: int
    nodes_used: int
    plan: object

    def log_value(self) -> complex:
        """log(V_n) as a complex number (principal imaginary part)."""
        if self.mantissa == 0:
            raise ZeroDivisionError("mantissa is zero; log undefined")
        return (self.log_offset + self.scale_power * self.scale_log_unit
                + cmath.log(self.mantissa))

    def value(self) -> complex:
        expo = self.log_offset + self.scale_power * self.scale_log_unit
        if expo < -745.0:
            return 0.0j
        if expo > 709.0:
            raise OverflowError("value exceeds the floating range; use log_value()")
        return math.exp(expo) * self.mantissa


# ---------------------------------------------------------------------------
# evaluation helpers


def _eval_vec(f, z):
    """Evaluate a user callable on an array, falling back to a loop."""
    z = np.asarray(z, dtype=complex)
    try:
        out = np.asarray(f(z), dtype=complex)
        if out.shape == z.shape:
            return out
    except Exception:
        pass
    return np.array([f(zi) for zi in z.ravel()], dtype=complex).reshape(z.shape)


# ---------------------------------------------------------------------------
# trapezoid path


def invert_trapezoid(V: TransformEvaluator, n: int, plan: TrapPlan) -> complex:
    """Trapezoid sum (1/N) sum_k (r w_k)^(-n) Vt(r w_k), w_k the N-th roots of unity."""
    if n < 0:
        raise ValueError("n must be nonnegative")
    if plan.M > 690.0:
        raise NumericalFailure("r^-n overflows the floating range; rescale first")
    N = plan.N
    k = np.arange(N)
    theta = _TWO_PI * k / N
    q = plan.r * np.exp(1j * theta)
    vals = _eval_vec(V.eval, q)
    # q^-n phase done in exact integer arithmetic to avoid huge-angle loss
    phase = np.exp(-2j * math.pi * ((n % N) * k % N) / N)
    scale = math.exp(plan.M)  # r^-n
    total = scale * np.sum(phase * vals) / N
    if V.real_coefficients:
        return complex(total.real, 0.0)
    return complex(total)


def hardy_pole_norm(r: float) -> float:
    """Closed form of int_0^{2pi} |1 - r e^{i phi}|^{-1} d phi.

    Equals 4 K(k) / (1 + r) with modulus k = 2 sqrt(r)/(1+r); K is the
    complete elliptic integral (scipy's ellipk takes m = k^2).
    """
    if not 0.0 <= r < 1.0:
        raise ValueError("need 0 <= r < 1")
    m = 4.0 * r / (1.0 + r) ** 2
    return 4.0 * float(ellipk(m)) / (1.0 + r)


def trapezoid_error_bound(V: TransformEvaluator, n: int, plan: TrapPlan,
                          quad_nodes: int = 512) -> float:
    """Aliasing bound rho^-N/(1-rho^-N) * ||h|| with a numeric Hardy norm.

    h(z) = (r z)^-n Vt(r z); the norm is the mean of |h| over the circles
    |z| = rho and |z| = 1/rho.
    """
    rho = plan.rho
    if not rho > 1.0:
        raise ValueError("rho must exceed 1")
    norm = 0.0
    for rad in (rho, 1.0 / rho):
        rr = plan.r * rad
        if rr >= 1.0 and V.bound_kind == "pole_at_one":
            raise NumericalFailure("outer Hardy circle crosses the pole at 1")
        theta = _TWO_PI * (np.arange(quad_nodes) + 0.5) / quad_nodes
        vals = _eval_vec(V.eval, rr * np.exp(1j * theta))
        norm += math.exp(-n * math.log(rr)) * float(np.mean(np.abs(vals)))
    t = -plan.N * math.log(rho)
    if t < -700.0:
        alias = 0.0
    else:
        alias = math.exp(t) / (1.0 - math.exp(t))
    return alias * norm


def _pole_log_factor(r: float) -> float:
    """log of the one-circle Hardy factor for a simple pole at 1.

    The planner formula uses the asymptotic -log(1-r), valid for r near 1;
    for small radii (small n) that asymptotic turns negative and useless,
    so the exact elliptic value takes over.  The exact value is larger, so
    the small-n node count stays conservative.
    """
    if r >= 0.6:
        return math.log(-math.log1p(-r))
    return math.log(0.5 * hardy_pole_norm(r))


def choose_trap_params(eps: float, n: int, M: float = 23.0) -> TrapPlan:
    """Radius and node count for the plain trapezoid at accuracy eps.

    r = exp(-M/n), rho = exp(M1/n) with M1 = 0.9 M; N solves the aliasing
    bound for a pole-at-one transform exactly, and the closed approximation
    N ~ (n/M)(E + 2M), E = log(1/eps), is reported alongside as n_approx.
    """
    if not 0.0 < eps < 1.0:
        raise ValueError("eps must lie in (0,1)")
    if n < 1:
        raise ValueError("n must be positive")
    if M <= 0.0 or M > 690.0:
        raise ValueError("M out of range")
    E = -math.log(eps)
    m1 = 0.9 * M
    r = math.exp(-M / n)
    rho = math.exp(m1 / n)
    r_lo = r / rho   # radius whose power dominates: exp(-(M+M1)/n)
    r_hi = r * rho
    ln_arg = _logsumexp(
        math.log(2.0) + (M + m1) + _pole_log_factor(r_lo),
        math.log(2.0) + (M - m1) + _pole_log_factor(r_hi),
    )
    N = int(math.ceil((E + ln_arg) / math.log(rho)))
    n_approx = int(round((n / M) * (E + 2.0 * M)))
    return TrapPlan(r=r, N=N, M=M, rho=rho, m1=m1, n_approx=n_approx)


def _logsumexp(a: float, b: float) -> float:
    hi, lo = (a, b) if a >= b else (b, a)
    return hi + math.log1p(math.exp(lo - hi))


# ---------------------------------------------------------------------------
# sinh path: planning


def predicted_step(gamma: float, eps: float, n: int, M: float, k_d: float = 0.85) -> float:
    """Leading-order step size k_d*pi*(pi/4 - gamma/2)/(E + log n + 2M)."""
    E = -math.log(eps)
    return k_d * math.pi * (0.25 * math.pi - 0.5 * gamma) / (E + math.log(n) + 2.0 * M)


def predicted_terms(gamma: float, eps: float, n: int, M: float, k_d: float = 0.85) -> int:
    """Leading-order node count (E + 2M) log(n/M) / (k_d pi^2/4)."""
    E = -math.log(eps)
    val = (E + 2.0 * M) * math.log(n / M) / (k_d * math.pi * math.pi / 4.0)
    return int(math.ceil(val))


def gain_factor(eps: float, n: int, M: float) -> float:
    """Leading-order node-count ratio trapezoid/sinh, (n/M)/log(n/M).

    The eps dependence cancels at leading order; the argument is kept so
    call sites state the accuracy they priced the gain at.
    """
    x = n / M
    if x <= math.e:
        raise ValueError("gain formula needs n/M > e")
    return x / math.log(x)


def _truncation_point(c: SinhZContour, n: int, a_v: float, c_v: float, eps: float,
                      log_mag=None) -> float:
    """Smallest y where the wing envelope of the integrand drops below eps/10.

    envelope(y) = (b/2pi) |cosh(i w + y)| c_v |chi(y)|^(a_v - n - 1),
    evaluated in logs so large n cannot overflow.  When log_mag is given
    (exact log-magnitude of the transform) it replaces the power-law
    factor c_v |chi|^a_v; entire transforms need this because no such
    power law majorizes them along the wings.
    """
    target = math.log(eps) - math.log(10.0)
    pw = a_v - (n + 1.0)

    def logenv(y: float) -> float:
        ch = abs(cmath.cosh(1j * c.omega_l + y))
        q = c.sigma_l + 1j * c.b_l * cmath.sinh(1j * c.omega_l + y)
        base = math.log(c.b_l / _TWO_PI) + math.log(ch)
        if log_mag is not None:
            return base + float(log_mag(q)) - (n + 1.0) * math.log(abs(q))
        return base + max(0.0, math.log(c_v)) + pw * math.log(abs(q))

    hi = 1.0
    for _ in range(80):
        if logenv(hi) < target:
            break
        hi *= 1.5
    else:
        raise NumericalFailure("wing envelope never decays; check a_v")
    lo = 0.0
    for _ in range(64):
        mid = 0.5 * (lo + hi)
        if logenv(mid) < target:
            hi = mid
        else:
            lo = mid
    return hi


def choose_sinh_params(V: TransformEvaluator, eps: float, n: int, M: float = 23.0) -> SinhPlan:
    """Sinh contour, step and truncation for accuracy eps at index n.

    The default geometry bends the contour left over the unit disc:
    omega = gamma/4 + pi/8 and d = 0.85 (pi/8 - gamma/4), with the strip
    edges through exp(-(M +/- M1)/n), M1 = 0.9 M.  If the dense membership
    check fails, omega is pushed up and d shrunk for up to eight rounds.
    The step follows zeta = 2 pi d / (E + log H) with
    log H = 2M + log n + max(0, log c_v), and the truncation point comes
    from the wing-envelope bisection.
    """
    if not 0.0 < eps < 1.0:
        raise ValueError("eps must lie in (0,1)")
    if n <= V.a_v:
        raise ValueError("need n > a_v for the integral to converge")
    gamma_eff = max(V.gamma, 1e-3)
    E = -math.log(eps)
    m1 = 0.9 * M
    r_minus = math.exp(-(M + m1) / n)
    r_plus = math.exp(-(M - m1) / n)

    omega = 0.25 * gamma_eff + 0.125 * math.pi
    d = 0.85 * (0.125 * math.pi - 0.25 * gamma_eff)
    # validate against the declared sector, not the inflated working angle:
    # the inflation is a sizing aid and would veto legitimately thin strips
    gamma_val = max(V.gamma, 1e-9)
    cont = None
    for _ in range(8):
        try:
            cand = build_z_contour(r_minus, r_plus, omega, d)
        except ValueError:
            d *= 0.85
            continue
        rep = validate_z_contour(cand, gamma_val, samples=2001, span=10.0,
                                 profile=V.sector_profile)
        if rep.membership_ok and rep.angles_ok:
            cont = cand
            break
        omega += 0.1 * (0.25 * math.pi - (omega + d))
        d *= 0.85
    if cont is None:
        raise NumericalFailure("no admissible left-bending contour for gamma=%g" % gamma_eff)

    hardy_log = 2.0 * M + math.log(max(n, 2)) + max(0.0, math.log(V.c_v))
    zeta = _TWO_PI * d / (E + hardy_log)
    log_mag = None
    if V.log_eval is not None:
        base_log = V.log_eval
        log_mag = lambda q: complex(base_log(q)).real
    lam = _truncation_point(cont, n, V.a_v, V.c_v, eps, log_mag=log_mag)
    N = int(math.ceil(lam / zeta))
    cont = replace(cont, zeta_l=zeta, N_l=N)
    return SinhPlan(contour=cont, hardy_log=hardy_log, predicted_terms=N,
                    eps=eps, M=M, branch="bend_left")


def _plan_right_branch(V: TransformEvaluator, eps: float, n: int, M: float) -> SinhPlan:
    """Right-opening contour: float-safe because min |chi| over the whole
    strip equals the inner through-radius, so the largest term is exp(M)-ish.

    omega < 0 is sized against two limits: the wings must clear the sector
    (|omega| + d < pi/2 - gamma - margin) and the inner strip edge may bend
    left at most to the angle where its closest approach still equals
    r_minus.  Balancing both gives |omega| = (A - theta_max)/2.
    """
    gamma_eff = max(V.gamma, 1e-3)
    E = -math.log(eps)
    m1 = 0.9 * M
    r_minus = math.exp(-(M + m1) / n)
    r_plus = math.exp(-(M - m1) / n)
    margin = 0.05
    A = 0.5 * math.pi - gamma_eff - margin
    if A <= 0.1:
        raise NumericalFailure("sector too wide for a right-bending contour")

    omega = -0.4 * A
    d = 0.45 * A
    cont = None
    for _ in range(6):
        cand = build_z_contour(r_minus, r_plus, omega, d)
        hyp = math.sqrt(max(cand.sigma_l ** 2 - cand.b_l ** 2, r_minus ** 2))
        theta_max = math.acos(min(1.0, r_minus / hyp))
        w = 0.5 * (A - theta_max)
        omega_new = -max(w, 0.05)
        d_new = 0.92 * min(A - abs(omega_new), abs(omega_new) + theta_max)
        if abs(omega_new - omega) < 1e-10 and abs(d_new - d) < 1e-10:
            cont = cand
            break
        omega, d = omega_new, d_new
        cont = cand

    # same declared-sector validation as the left branch; shrinking d fattens
    # the strip edges (b ~ 1/sin d) and lifts the circle-exit angle, so keep
    # shrinking until the edges clear the sector or the step would collapse
    gamma_val = max(V.gamma, 1e-9)
    for _ in range(30):
        cand = build_z_contour(r_minus, r_plus, omega, d)
        rep = validate_z_contour(cand, gamma_val, samples=2001, span=10.0,
                                 profile=V.sector_profile)
        if rep.membership_ok and rep.angles_ok:
            cont = cand
            break
        d *= 0.85
        if d < 1e-4:
            break
    else:
        raise NumericalFailure("right-bending contour failed validation")
    if cont is None or d < 1e-4:
        raise NumericalFailure("right-bending contour failed validation")

    hardy_log = 2.0 * M + math.log(max(n, 2)) + max(0.0, math.log(V.c_v))
    zeta = _TWO_PI * d / (E + hardy_log)
    log_mag = None
    if V.log_eval is not None:
        base_log = V.log_eval
        log_mag = lambda q: complex(base_log(q)).real
    lam = _truncation_point(cont, n, V.a_v, V.c_v, eps, log_mag=log_mag)
    N = int(math.ceil(lam / zeta))
    cont = replace(cont, zeta_l=zeta, N_l=N)
    return SinhPlan(contour=cont, hardy_log=hardy_log, predicted_terms=N,
                    eps=eps, M=M, branch="bend_right")


# ---------------------------------------------------------------------------
# sinh path: engine


# wide long double (x86 80-bit) gives ~3 extra digits in the half-sum;
# on platforms where long double aliases double this stays False and the
# core runs in plain complex arithmetic
_EXTENDED = bool(np.finfo(np.longdouble).eps < 1e-17)


def _sinh_core(V: TransformEvaluator, n: int, plan: SinhPlan,
               tail_eps: float) -> ZInvResult:
    """Streamed, log-scaled half-sum over the sinh contour.

    Terms are accumulated relative to a running reference exponent so the
    sum never leaves the floating range; the loop stops early once the
    scaled terms fall below the tail budget.  At tight tolerances the node
    arithmetic runs in extended precision where the platform long double
    is wider than double: the phases q^-(n+1) cancel several digits at
    large n and plain doubles surface that as an accuracy floor near 1e-11.
    """
    c = plan.contour
    zeta, N = c.zeta_l, c.N_l
    if zeta <= 0.0 or N <= 0:
        raise ValueError("plan carries no step/truncation")
    ext = _EXTENDED and tail_eps < 1e-11
    rdt = np.longdouble if ext else np.float64
    cdt = np.clongdouble if ext else np.complex128
    sigma, b, omega = rdt(c.sigma_l), rdt(c.b_l), rdt(c.omega_l)
    iw = cdt(1j)
    zt = rdt(zeta)
    np1 = rdt(n) + rdt(1.0)

    log_eval = V.log_eval
    if log_eval is None:
        ev = V.eval

        def log_eval(q):
            w = ev(q)
            if w == 0:
                return -math.inf
            return np.log(cdt(w))

    def node_L(y):
        w = iw * omega + y
        chi = sigma + iw * b * np.sinh(w)
        try:
            lv = log_eval(chi)
        except Exception:
            lv = log_eval(complex(chi))
        return w, -np1 * np.log(chi) + lv

    pref = np.log(b) - np.log(rdt(_TWO_PI))
    ref = -math.inf
    S = cdt(0.0)
    max_term = 0.0
    nodes = 0
    j = 0
    while j <= N:
        w, L = node_L(j * zt)
        if L.real == -math.inf:
            nodes += 1
            j += 1
            continue
        coef = np.cosh(w)
        if j == 0 and V.real_coefficients:
            coef *= rdt(0.5)
        lr = L.real
        if ref == -math.inf:
            ref = lr
        elif lr > ref:
            S *= np.exp(rdt(ref) - lr)
            max_term *= float(np.exp(rdt(ref) - lr))
            ref = lr
        term = coef * np.exp(L - rdt(ref))
        S += term
        at = float(abs(term))
        max_term = max(max_term, at)
        nodes += 1
        j += 1
        if j > 8 and at < tail_eps * max(float(abs(S)), max_term * 1e-6, 1e-300):
            break

    # the reference exponent is reported as a double; fold its rounding
    # residual into the mantissa so no accuracy is lost at the seam
    off = float(ref)
    resid = np.exp(rdt(ref) - rdt(off)) if ref != -math.inf else rdt(1.0)
    if V.real_coefficients:
        mant = complex(float(2.0 * zt * np.exp(pref) * S.real * resid), 0.0)
    else:
        # other half of the contour: conjugate steps are not usable, walk it
        Sm = cdt(0.0)
        j = 1
        while j <= N:
            w, L = node_L(-j * zt)
            term = np.cosh(w) * np.exp(L - rdt(ref))
            Sm += term
            nodes += 1
            j += 1
            if j > 8 and float(abs(term)) < tail_eps * max(float(abs(S + Sm)), max_term * 1e-6, 1e-300):
                break
        mant = complex(zt * np.exp(pref) * (S + Sm) * resid)
    return ZInvResult(mantissa=mant, log_offset=off, scale_log_unit=0.0,
                      scale_power=0, nodes_used=nodes, plan=plan)


def _saddle_log_radius(V: TransformEvaluator, n: int) -> float:
    """log of the radius minimizing -(n+1) log r + Re log Vt(r) (entire case)."""
    if V.log_eval is None:
        raise ValueError("entire transforms need log_eval for automatic rescaling")

    def g(t: float) -> float:
        return -(n + 1.0) * t + V.log_eval(math.exp(t)).real

    lo, hi = math.log(1e-2), math.log(8.0 * (n + 2.0))
    for _ in range(200):
        m1 = lo + (hi - lo) / 3.0
        m2 = hi - (hi - lo) / 3.0
        if g(m1) < g(m2):
            hi = m2
        else:
            lo = m1
    return 0.5 * (lo + hi)


def _scaled_view(V: TransformEvaluator, scale_log: float) -> TransformEvaluator:
    if scale_log == 0.0:
        return V
    s = math.exp(scale_log)
    base_eval = V.eval
    base_log = V.log_eval
    return TransformEvaluator(
        eval=lambda w: base_eval(s * w),
        a_v=V.a_v, c_v=V.c_v, gamma=V.gamma, bound_kind=V.bound_kind,
        real_coefficients=V.real_coefficients, disc_radius=1.0, entire=False,
        log_eval=(None if base_log is None else (lambda w: base_log(s * w))),
        # the profile argument is already log-radius relative to the disc
        # edge, so the rescale leaves it untouched
        sector_profile=V.sector_profile,
    )


def invert_sinh_full(V: TransformEvaluator, n: int,
                     plan: Optional[SinhPlan] = None,
                     eps: float = 1e-13,
                     M: Optional[float] = None) -> ZInvResult:
    """Invert at index n, returning the scaled result.

    With an explicit plan the contour is used exactly as given.  Without
    one, an automatic float-safe plan is built: the transform is rescaled
    to its natural radius (saddle radius for entire transforms, declared
    disc radius otherwise), small n falls back to the plain trapezoid and
    larger n uses the right-opening contour with a moderate M.
    """
    if n < 0:
        raise ValueError("n must be nonnegative")
    if plan is not None:
        return _sinh_core(V, n, plan, tail_eps=plan.eps * 1e-2)

    scale_log = 0.0
    if V.entire:
        scale_log = _saddle_log_radius(V, n)
    elif V.disc_radius != 1.0:
        if V.disc_radius <= 0.0:
            raise ValueError("disc_radius must be positive")
        scale_log = math.log(V.disc_radius)
    W = _scaled_view(V, scale_log)

    m_eff = AUTO_M if M is None else M
    if n < MIN_SINH_N:
        n_eff = max(n, 1)
        tp = choose_trap_params(eps, n_eff, min(m_eff, 3.0 * n_eff))
        res = _trap_scaled(W, n, tp)
    else:
        try:
            if V.entire:
                # after the saddle rescale the integrand decays only where
                # Re q falls, so the wings must open left; the right branch
                # diverges against superpolynomial growth
                sp = choose_sinh_params(W, min(eps, 1e-14), n, m_eff)
            else:
                sp = _plan_right_branch(W, min(eps, 1e-14), n, m_eff)
        except NumericalFailure:
            # no admissible branch geometry at this sector/index; the
            # log-scaled trapezoid has no sector constraint at any n
            tp = choose_trap_params(eps, n, m_eff)
            res = _trap_scaled(W, n, tp)
        else:
            res = _sinh_core(W, n, sp, tail_eps=eps * 1e-2)
    res.scale_log_unit = scale_log
    res.scale_power = -n if scale_log != 0.0 else 0
    return res


def _trap_scaled(V: TransformEvaluator, n: int, plan: TrapPlan) -> ZInvResult:
    """Trapezoid sum in mantissa/offset form (offset = M = -n log r)."""
    N = plan.N
    k = np.arange(N)
    q = plan.r * np.exp(2j * math.pi * k / N)
    vals = _eval_vec(V.eval, q)
    phase = np.exp(-2j * math.pi * ((n % N) * k % N) / N)
    total = np.sum(phase * vals) / N
    if V.real_coefficients:
        total = complex(total.real, 0.0)
    off = -n * math.log(plan.r)
    return ZInvResult(mantissa=complex(total), log_offset=off, scale_log_unit=0.0,
                      scale_power=0, nodes_used=N, plan=plan)


def invert_sinh(V: TransformEvaluator, n: int,
                plan: Optional[SinhPlan] = None,
                eps: float = 1e-13,
                M: Optional[float] = None) -> complex:
    """Convenience wrapper returning the plain complex value."""
    return invert_sinh_full(V, n, plan=plan, eps=eps, M=M).value()


# ---------------------------------------------------------------------------
# resolvent norm bounds


def resolvent_bound(q: complex, norm_p: float, gamma: float,
                    kind: str = "self_adjoint",
                    gamma_prime: Optional[float] = None) -> float:
    """Upper bound for ||(I - q P)^-1|| under the stated spectral picture.

    self_adjoint: spectrum of qP real, bound 4/|1 - q*norm_p| off the ray
    q in [1/norm_p, inf).  normal_sector: spectrum inside the sector of
    half-angle gamma; for q in the complementary sector of half-angle
    pi - gamma' the bound is 1/sin(gamma' - gamma).
    """
    if norm_p <= 0.0:
        raise ValueError("norm_p must be positive")
    q = complex(q)
    if kind == "self_adjoint":
        if q.imag == 0.0 and q.real >= 1.0 / norm_p:
            raise ValueError("q on the spectral ray [1/norm_p, inf)")
        return 4.0 / abs(1.0 - q * norm_p)
    if kind == "normal_sector":
        gp = gamma_prime
        if gp is None:
            gp = min(abs(cmath.phase(q)), gamma + 0.5 * math.pi)
        if not gamma < gp:
            raise ValueError("need gamma' > gamma")
        if abs(cmath.phase(q)) < gp:
            raise ValueError("q must lie in the sector |arg q| >= gamma'")
        return 1.0 / math.sin(min(gp - gamma, 0.5 * math.pi))
    raise ValueError("unknown kind %r" % (kind,))


# ---------------------------------------------------------------------------
# high-precision references and node-count measurement (benchmark support)


def trap_invert_mp(V_mp, n: int, r, N: int):
    """Plain trapezoid sum in mpmath; V_mp maps mpc -> mpc."""
    r = mp.mpf(r)
    total = mp.mpc(0)
    for k in range(N):
        w = mp.expjpi(mp.mpf(2 * k) / N)
        q = r * w
        total += q ** (-n) * V_mp(q)
    return total / N


def sinh_invert_mp(V_mp, n: int, contour: SinhZContour, N: Optional[int] = None):
    """Half-sum sinh quadrature in mpmath (real-coefficient transforms)."""
    if N is None:
        N = contour.N_l
    zeta = mp.mpf(contour.zeta_l)
    sig, b, om = mp.mpf(contour.sigma_l), mp.mpf(contour.b_l), mp.mpf(contour.omega_l)
    total = mp.mpc(0)
    for j in range(N + 1):
        w = 1j * om + j * zeta
        chi = sig + 1j * b * mp.sinh(w)
        f = (b / (2 * mp.pi)) * chi ** (-(n + 1)) * mp.cosh(w) * V_mp(chi)
        total += f if j else f / 2
    return 2 * zeta * mp.re(total)


def _bisect_min_nodes(err_fn, n_lo: int, n_hi: int, eps: float) -> int:
    """Smallest N in [n_lo, n_hi] with err_fn(N) <= eps (err monotone in N)."""
    if err_fn(n_hi) > eps:
        raise NumericalFailure("accuracy not reached at N=%d" % n_hi)
    lo, hi = n_lo, n_hi
    while lo < hi:
        mid = (lo + hi) // 2
        if err_fn(mid) <= eps:
            hi = mid
        else:
            lo = mid + 1
    return lo


def trap_nodes_certified(V: TransformEvaluator, eps: float, n: int, M: float = 23.0) -> int:
    """Smallest N whose aliasing *bound* certifies accuracy eps."""
    plan = choose_trap_params(eps, n, M)

    def err(N):
        return trapezoid_error_bound(V, n, replace(plan, N=N))

    return _bisect_min_nodes(err, 8, max(4 * plan.N, 64), eps)


def trap_nodes_empirical(V_mp, exact, eps: float, n: int, M: float = 23.0,
                         dps: int = 40) -> int:
    """Smallest N whose measured error against a reference is below eps."""
    plan = choose_trap_params(eps, n, M)
    with mp.workdps(dps):
        exact = mp.mpc(exact)
        scale = max(mp.fabs(exact), mp.mpf(1))

        def err(N):
            return float(mp.fabs(trap_invert_mp(V_mp, n, plan.r, N) - exact) / scale)

        return _bisect_min_nodes(err, 8, max(4 * plan.N, 64), eps)


def sinh_nodes_empirical(V_mp, exact, plan: SinhPlan, n: int, eps: float,
                         dps: int = 40) -> int:
    """Smallest half-sum truncation meeting eps on the plan's step."""
    c = plan.contour
    with mp.workdps(dps):
        exact = mp.mpc(exact)
        scale = max(mp.fabs(exact), mp.mpf(1))

        def err(N):
            return float(mp.fabs(sinh_invert_mp(V_mp, n, c, N) - exact) / scale)

        return _bisect_min_nodes(err, 4, max(4 * c.N_l, 64), eps)
