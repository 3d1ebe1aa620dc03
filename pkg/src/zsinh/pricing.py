"""Option pricing by Z-transform inversion over sinh contours.

A price at monitoring date n is q0^n times the n-th coefficient of a
transform q -> Vt(q; x).  For Europeans

    Vt(q, x) = G(x) + (1/2 pi) int_Gamma e^{i x xi} Ghat(xi)
                                 q Phi(xi) / (1 - q Phi(xi)) d xi,

with Gamma a horizontal sinh contour (symmetric route, wings bent toward
the decay direction of e^{i(x-a)xi}) or a level-curve contour hugging the
band |Im psi| <= delta (asymmetric route); the subtracted payoff term
removes the slowly decaying part of Ghat, so the remaining integrand dies
like Phi itself.  The contour position replaces explicit damping: growth
of the coefficients is absorbed by the engine through ``disc_radius`` =
exp(min Re psi on Gamma).

Up-and-out barrier prices (monitoring at dates 1..n, terminal included,
value 0 at and above the barrier) add a correction transform

    W1(q, x) = (1-q)^{-1} (1/2 pi) int_{C_xi} e^{i(x-h)xi} phi_minus(q,xi)
               (1/2 pi i) int_{C_eta} e^{i h eta} Ghat(eta) phi_plus(q,eta)
                                       / (eta - xi) d eta d xi,

with C_eta strictly above C_xi, eta-wings bent toward +i*inf and xi-wings
toward -i*inf so both exponentials decay; all four contours (two
integration curves plus the flat Wiener-Hopf pair bracketing them) sit on
the payoff side of the strip, so no payoff pole is crossed when the
European part is split off as the eta = xi residue.
"""

from __future__ import annotations

import math
import time
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Dict, Optional, Tuple

import numpy as np

from .contours import SinhXiContour, chi_xi_eval, chi_xi_deriv, chi_z_eval
from .levelcurves import ExtendedCurve, TraceFailure, build_extended_curve, flatten_curve
from .levy import (ClassificationError, EsscherShift, LevyModel, p_delta,
                   psi_eval, symmetry_check)
from .oracles import oracle_barrier_induction
from .payoffs import PayoffTransform, digital_down_transform, ghat_eval, payoff_value
from .wh import FactorizationError, WHContext, factor_identity_residual, wh_minus, wh_plus
from .zinv import (AUTO_M, MIN_SINH_N, NumericalFailure, TransformEvaluator,
                   ZInvResult, choose_trap_params, invert_sinh_full,
                   _plan_right_branch, _scaled_view)

__all__ = [
    "PricingRequest",
    "PriceResult",
    "InnerIntegralPlan",
    "inner_integral",
    "price_european",
    "price_european_symmetric",
    "price_european_nonsymmetric",
    "price_barrier",
]


@dataclass(frozen=True)
class PricingRequest:
    model: LevyModel
    payoff: PayoffTransform
    n: int
    q0: float
    x: float
    h: Optional[float] = None
    eps: float = 1e-8
    mode: str = "auto"  # symmetric | nonsymmetric | auto
    M: Optional[float] = None
    threads: int = 1

    def __post_init__(self):
        if self.n < 0:
            raise ValueError("n must be nonnegative")
        if not 0.0 < self.q0 <= 1.0:
            raise ValueError("per-step discount q0 must lie in (0, 1]")
        if not 0.0 < self.eps < 1.0:
            raise ValueError("eps must lie in (0, 1)")
        if self.mode not in ("symmetric", "nonsymmetric", "auto"):
            raise ValueError("mode must be symmetric, nonsymmetric or auto")
        if self.threads < 1:
            raise ValueError("threads must be positive")


@dataclass
class PriceResult:
    price: float
    error_estimate: float
    q_nodes_used: int
    inner_nodes_avg: float
    wall_time: float
    diagnostics: Dict = field(default_factory=dict)


# ---------------------------------------------------------------------------
# line placement and sector measurement


def _symmetrizer(model: LevyModel) -> Optional[float]:
    """Tilt beta making the one-step factor even and real, if closed-form."""
    if model.kind == "kobol":
        p = model.params
        if p.mu != 0.0 or p.c_plus != p.c_minus or p.nu_plus != p.nu_minus:
            return None
        return -0.5 * (p.lambda_plus + p.lambda_minus)
    if model.kind == "nts":
        return None if model.params.mu != 0.0 else -model.params.beta_s
    if model.kind == "quadratic":
        return -model.params.mu / (2.0 * model.params.scale)
    if model.kind == "mixture":
        ok, _, _ = symmetry_check(model, EsscherShift(0.0), tol=1e-9)
        return 0.0 if ok else None
    return None


def _height_window(model: LevyModel, payoff: PayoffTransform) -> Tuple[float, float]:
    lo = max(payoff.strip[0], model.strip[0])
    hi = min(payoff.strip[1], model.strip[1])
    if not lo < hi:
        raise ValueError("payoff and model analyticity strips do not overlap")
    return lo, hi


def _pick_height(model: LevyModel, payoff: PayoffTransform, prefer: float) -> float:
    lo, hi = _height_window(model, payoff)
    width = hi - lo
    inset = min(0.25, 0.15 * width) if math.isfinite(width) else 0.25
    lo_eff = lo + inset if math.isfinite(lo) else prefer - 1.0
    hi_eff = hi - inset if math.isfinite(hi) else prefer + 1.0
    if lo_eff > hi_eff:
        lo_eff = hi_eff = 0.5 * (lo + hi)
    return float(min(max(prefer, lo_eff), hi_eff))


def _sector_window(model: LevyModel, pts: np.ndarray, window_log: float,
                   cap: float = 1.45):
    """(gamma_eff, disc_log, profile) from samples of psi on the contour(s).

    Only points with Re psi inside the q-relevant window can host zeros of
    1 - q Phi, so only their Im psi widens the singular sector.  The pole
    locus q = exp(psi) recedes from the real axis as |q| grows, so beyond
    the overall half-angle we hand the planner the radial resolution of
    that wedge: profile(t) is the widest |Im psi| among samples whose
    Re psi stays within t of the pole-free disc edge.
    """
    ps = psi_eval(model, np.asarray(pts, dtype=complex))
    re = np.asarray(ps.real, dtype=float)
    im = np.asarray(ps.imag, dtype=float)
    keep = np.isfinite(re) & np.isfinite(im)
    re, im = re[keep], im[keep]
    disc_log = min(0.0, float(np.min(re)))
    mask = re <= disc_log + window_log
    gamma0 = float(np.max(np.abs(im[mask]))) if np.any(mask) else float(np.max(np.abs(im)))
    gamma_eff = 1.05 * gamma0 + 1e-3
    if gamma_eff > cap:
        raise NumericalFailure(
            "singular sector half-angle %.3f too wide for the q-contour" % gamma_eff)
    order = np.argsort(re)
    levels = re[order] - disc_log
    widths = np.minimum(1.05 * np.maximum.accumulate(np.abs(im[order])) + 1e-3,
                        gamma_eff)

    def profile(log_r):
        idx = np.searchsorted(levels, np.asarray(log_r, dtype=float), side="right")
        return np.where(idx > 0, widths[np.clip(idx - 1, 0, widths.size - 1)], 1e-3)

    return gamma_eff, disc_log, profile


def _window_log(request: PricingRequest) -> float:
    m_eff = AUTO_M if request.M is None else request.M
    return 3.0 * m_eff / max(request.n, 1) + 2.0


# ---------------------------------------------------------------------------
# European inner integral


def _contour_eval(contour, t):
    if isinstance(contour, SinhXiContour):
        return chi_xi_eval(contour, t), chi_xi_deriv(contour, t)
    return contour.quad_points(t)


@dataclass
class InnerIntegralPlan:
    """Cached quadrature for Vt(q) on a fixed contour.

    The contour is parametrized through t = sinh(v) so a uniform v-grid
    concentrates nodes where the integrand lives; per-level arrays A (all
    q-independent factors) and P (one-step factors) are cached, and each
    evaluation doubles the level until the value settles.
    """

    model: LevyModel
    payoff: PayoffTransform
    x: float
    contour: object
    v_max: float
    tol: float
    payoff_term: float = 0.0
    kind: str = "european"
    base: int = 128
    max_level: int = 7
    # width of the amplitude peak at t=0, set by the nearest payoff pole;
    # scaling the map as t = t_scale*sinh(v) keeps that peak resolved even
    # when a slowly decaying symbol stretches the tail far beyond it
    t_scale: float = 1.0
    levels: Dict[int, Tuple[np.ndarray, np.ndarray]] = field(default_factory=dict)
    calls: int = 0
    nodes_acc: int = 0
    min_resolvent: float = math.inf
    last_delta: float = 0.0
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    def grid(self, level: int):
        got = self.levels.get(level)
        if got is not None:
            return got
        with self._lock:
            got = self.levels.get(level)
            if got is not None:
                return got
            m = self.base * (1 << level)
            v = np.linspace(-self.v_max, self.v_max, m + 1)
            dv = np.full(m + 1, v[1] - v[0])
            dv[0] *= 0.5
            dv[-1] *= 0.5
            t = self.t_scale * np.sinh(v)
            xi, dxi = _contour_eval(self.contour, t)
            w = dv * self.t_scale * np.cosh(v) * dxi
            A = w * np.exp(1j * self.x * xi) * ghat_eval(self.payoff, xi) / (2.0 * math.pi)
            P = np.exp(-psi_eval(self.model, xi))
            got = (A, P)
            self.levels[level] = got
            return got

    def value(self, q: complex) -> complex:
        if np.ndim(q) != 0:
            raise TypeError("scalar q expected")
        q = complex(q)
        prev = None
        prev_delta = None
        scale = max(abs(self.payoff_term), 1e-3)
        for lv in range(self.max_level + 1):
            A, P = self.grid(lv)
            denom = 1.0 - q * P
            m = float(np.min(np.abs(denom)))
            self.min_resolvent = min(self.min_resolvent, m)
            if m < 1e-12 * (1.0 + abs(q)):
                raise NumericalFailure("1 - q*Phi vanishes on the inner contour")
            cur = complex(np.sum(A * (q * P) / denom))
            self.calls += 1
            self.nodes_acc += A.size
            if prev is not None:
                delta = abs(cur - prev)
                err = delta
                if prev_delta is not None and 0.0 < delta < prev_delta / 1.5:
                    # two contracting deltas: sum the geometric tail instead
                    # of charging the whole last step, which overshoots the
                    # true error badly once the rate kicks in
                    err = delta / (prev_delta / delta - 1.0)
                if err <= self.tol * max(abs(cur), 0.05 * scale):
                    self.last_delta = err
                    return self.payoff_term + cur
                prev_delta = delta
            prev = cur
        raise NumericalFailure(
            "inner integral did not settle to %.1e within %d refinements"
            % (self.tol, self.max_level))


def inner_integral(plan, q: complex, payload: str = "european"):
    """Evaluate a prepared inner-integral plan at one q.

    Payload selects the stage the plan computes: ``european`` is the full
    European transform value, ``barrier_xi`` the outer xi-stage of the
    barrier correction, ``barrier_eta`` its middle eta-stage at the plan's
    probe target.
    """
    if payload == "european":
        if not isinstance(plan, InnerIntegralPlan):
            raise TypeError("european payload expects an InnerIntegralPlan")
        return plan.value(q)
    if payload == "barrier_xi":
        if not isinstance(plan, _BarrierCorrection):
            raise TypeError("barrier payloads expect a barrier correction plan")
        return plan.value(q)
    if payload == "barrier_eta":
        if not isinstance(plan, _BarrierCorrection):
            raise TypeError("barrier payloads expect a barrier correction plan")
        return plan.eta_integral(q, plan.xi_probe)
    raise ValueError("unknown payload %r" % (payload,))


# ---------------------------------------------------------------------------
# engine glue


def _march_reach(model: LevyModel, contour, target: float, cap_t: float = 0.0,
                 t_scale: float = 1.0) -> float:
    """v-truncation: smallest v with Re psi at the contour point >= target."""
    v = 2.0
    while v < 40.0:
        t = t_scale * math.sinh(v)
        if cap_t and t >= cap_t:
            return math.asinh(0.999 * cap_t / t_scale)
        z, _ = _contour_eval(contour, np.asarray([t, -t]))
        if min(psi_eval(model, z[0]).real, psi_eval(model, z[1]).real) >= target:
            return v
        v += 0.25
    return 40.0


def _plan_nodes(ev: TransformEvaluator, n: int, eps: float, M: Optional[float]):
    """Replicate the automatic planner's node set (physical q values)."""
    scale_log = 0.0 if ev.disc_radius == 1.0 else math.log(ev.disc_radius)
    s = math.exp(scale_log)
    m_eff = AUTO_M if M is None else M
    if n < MIN_SINH_N:
        n_eff = max(n, 1)
        tp = choose_trap_params(eps, n_eff, min(m_eff, 3.0 * n_eff))
        k = np.arange(tp.N)
        w = tp.r * np.exp(2j * math.pi * k / tp.N)
        return s * w  # same association as the scaled view, so keys match
    W = _scaled_view(ev, scale_log)
    try:
        sp = _plan_right_branch(W, min(eps, 1e-14), n, m_eff)
    except NumericalFailure:
        tp = choose_trap_params(eps, n, m_eff)
        k = np.arange(tp.N)
        w = tp.r * np.exp(2j * math.pi * k / tp.N)
        return s * w
    c = sp.contour
    j = np.arange(c.N_l + 1)
    w = chi_z_eval(c, j * c.zeta_l)
    return s * w


def _invert(ev: TransformEvaluator, request: PricingRequest, memo_raw=None) -> ZInvResult:
    eps_engine = max(1e-14, 0.1 * request.eps)
    if request.threads > 1 and memo_raw is not None:
        try:
            qs = _plan_nodes(ev, request.n, eps_engine, request.M)
        except Exception:
            qs = None
        if qs is not None:
            memo: Dict[complex, complex] = {}
            with ThreadPoolExecutor(max_workers=request.threads) as pool:
                vals = list(pool.map(memo_raw, qs))
            memo.update(zip(map(complex, qs), vals))
            raw = ev.eval

            def cached(q):
                v = memo.get(q)
                return raw(q) if v is None else v

            ev = TransformEvaluator(eval=cached, a_v=ev.a_v, c_v=ev.c_v,
                                    gamma=ev.gamma, bound_kind=ev.bound_kind,
                                    real_coefficients=ev.real_coefficients,
                                    disc_radius=ev.disc_radius, entire=ev.entire,
                                    log_eval=ev.log_eval,
                                    sector_profile=ev.sector_profile)
    return invert_sinh_full(ev, request.n, eps=eps_engine, M=request.M)


def _assemble(zres: ZInvResult, n: int, q0: float) -> Tuple[float, float]:
    """(real value, imaginary leak) of q0^n * coefficient.

    q0 stays a literal prefactor whenever the rest fits in floats, so
    price(q0) == q0**n * price(1) holds exactly; only extreme magnitudes
    fall back to a combined log assembly.
    """
    expo = zres.log_offset + zres.scale_power * zres.scale_log_unit
    disc = q0 ** n
    if -700.0 < expo < 700.0:
        amp = math.exp(expo)
        return disc * (amp * zres.mantissa.real), abs(disc * amp * zres.mantissa.imag)
    expo += n * math.log(q0)
    if expo < -745.0:
        return 0.0, 0.0
    if expo > 700.0:
        raise OverflowError("price outside the floating range")
    amp = math.exp(expo)
    return amp * zres.mantissa.real, abs(amp * zres.mantissa.imag)


def _price_on_contour(request: PricingRequest, contour, diagnostics: Dict,
                      sector_cap: float = 1.45) -> PriceResult:
    t0 = time.perf_counter()
    model, payoff = request.model, request.payoff
    n, q0, x = request.n, request.q0, request.x
    if n == 0:
        g = payoff_value(payoff, x)
        return PriceResult(price=g, error_estimate=0.0, q_nodes_used=0,
                           inner_nodes_avg=0.0, wall_time=time.perf_counter() - t0,
                           diagnostics=dict(diagnostics, route="pointwise"))

    tail = max(-math.log(request.eps) + 6.0, 20.0)
    cap_t = contour.x_max if isinstance(contour, ExtendedCurve) else 0.0
    xi0 = complex(_contour_eval(contour, np.asarray([0.0]))[0][0])
    width = min((abs(xi0 - p) for p in payoff.poles), default=1.0)
    t_scale = min(max(width, 0.05), 1.0)
    v_max = _march_reach(model, contour, tail, cap_t, t_scale)
    plan = InnerIntegralPlan(model=model, payoff=payoff, x=x, contour=contour,
                             v_max=v_max, tol=0.1 * request.eps,
                             payoff_term=payoff_value(payoff, x), t_scale=t_scale)
    A0, _ = plan.grid(1)
    t1 = t_scale * np.sinh(np.linspace(-plan.v_max, plan.v_max, plan.base * 2 + 1))
    pts = _contour_eval(contour, t1)[0]
    gamma_eff, disc_log, profile = _sector_window(model, pts, _window_log(request),
                                                  cap=sector_cap)
    pole_dist = max(1.0 - math.exp(-0.1 * (AUTO_M if request.M is None else request.M)
                                   / max(n, 1)), 1e-3)
    c_v = max(1.0, abs(plan.payoff_term) + float(np.sum(np.abs(A0)))) / pole_dist

    ev = TransformEvaluator(eval=plan.value, a_v=0.0, c_v=c_v, gamma=gamma_eff,
                            bound_kind="generic", real_coefficients=True,
                            disc_radius=math.exp(disc_log),
                            sector_profile=profile)
    zres = _invert(ev, request, memo_raw=plan.value)
    price, imag = _assemble(zres, n, q0)
    err = request.eps * max(1.0, abs(price)) + imag + plan.last_delta
    diagnostics = dict(diagnostics, gamma_eff=gamma_eff, disc_log=disc_log,
                       imag_leak=imag, min_resolvent=plan.min_resolvent,
                       v_max=v_max,
                       branch=getattr(zres.plan, "branch", "trapezoid"))
    return PriceResult(price=price, error_estimate=err,
                       q_nodes_used=zres.nodes_used,
                       inner_nodes_avg=plan.nodes_acc / max(plan.calls, 1),
                       wall_time=time.perf_counter() - t0,
                       diagnostics=diagnostics)


# ---------------------------------------------------------------------------
# European routes


def price_european_symmetric(request: PricingRequest) -> PriceResult:
    """Sinh-line route; requires a closed-form symmetrizing tilt.

    The contour crosses as close to the symmetric height as the payoff
    strip allows, keeping the residual Im psi along it small, and its
    wings bend toward the decay direction of e^{i(x-a)xi}.
    """
    model, payoff = request.model, request.payoff
    beta_sym = _symmetrizer(model)
    if beta_sym is None:
        raise ValueError("model has no closed-form symmetrizer; "
                         "use the asymmetric route")
    ok, asym, neg = symmetry_check(model, EsscherShift(beta_sym), tol=1e-8)
    if not ok:
        raise ValueError("symmetrized factor fails the evenness check "
                         "(asym %.2e, neg %.2e)" % (asym, neg))
    u = _pick_height(model, payoff, prefer=-beta_sym)
    lean = request.x - payoff.a
    omega0 = 0.35 * (1.0 if lean > 0 else -1.0) if lean != 0.0 else 0.0
    # wing phase grows like tan(nu*omega)*Re psi, so the full bend can
    # crowd the singular sector and starve the q-contour: take the widest
    # bend whose sector stays comfortable, else the flat line, which is
    # sector-clean once tilted
    last_exc = None
    for scale in (1.0, 0.5, 0.25, 0.0):
        omega = omega0 * scale
        line = SinhXiContour(omega1=u - math.sin(omega), b=1.0, omega=omega)
        try:
            return _price_on_contour(request, line,
                                     {"route": "symmetric", "line_height": u,
                                      "beta_sym": beta_sym, "inner_omega": omega},
                                     sector_cap=0.6 if omega != 0.0 else 1.45)
        except NumericalFailure as exc:
            last_exc = exc
            if omega == 0.0:
                break
    raise last_exc


def _symbol_scale(model: LevyModel) -> float:
    """Magnitude of the leading wing coefficient of psi."""
    lead = [abs(complex(d)) for d, o in model.asymptotics if o == model.nu0]
    return max(lead) if lead else 1.0


def price_european_nonsymmetric(request: PricingRequest,
                                delta_band: float = 0.05) -> PriceResult:
    """Level-curve route for skewed models.

    The contour follows Im psi = +/-delta, so the singular sector in the
    q-plane stays ~delta wide no matter how skewed the symbol is.  The
    level is delta_band scaled by the leading wing coefficient: psi is
    homogeneous in that coefficient, so the scaling reproduces the
    unit-scale curve geometry for any step size.  The wing sign follows
    the slope rule p(delta) * (x - a) >= 0; models whose wings decay too
    slowly take the flattened variant, whose wings freeze at x_star;
    anything else is an unsupported asymptotic case.
    """
    model, payoff = request.model, request.payoff
    if model.classification_error is not None:
        raise ClassificationError(model.classification_error)
    nu0, nu_bar = model.nu0, model.nu_bar
    u = _pick_height(model, payoff, prefer=-payoff.beta)

    curve_case = nu0 > 0.5 * (nu_bar + 1.0)
    flat_case = 0.0 < nu0 < 1.0 and all(
        d.real > 0.0 for d, o in model.asymptotics if o >= 0.0 and d.imag == 0.0)
    if not curve_case and not flat_case:
        raise ValueError(
            "unsupported asymptotic case: nu0=%g, nu_bar=%g admit neither the "
            "level-curve nor the flattened route" % (nu0, nu_bar))

    band = delta_band * min(1.0, _symbol_scale(model))
    bounded_wings = abs(nu_bar + 1.0 - nu0) < 0.05
    force_flat = False
    if bounded_wings:
        delta = band
    else:
        want = request.x - payoff.a
        if want == 0.0 or p_delta(model, band) * want >= 0.0:
            delta = band
        elif p_delta(model, -band) * want >= 0.0:
            delta = -band
        else:
            delta = band
            force_flat = True

    target = max(-math.log(request.eps) + 8.0, 25.0)
    x_max = 2.0
    while x_max < 1e7 and psi_eval(model, complex(x_max, u)).real < target:
        x_max *= 1.3
    curve = build_extended_curve(model, delta, u, x_max, delta_star=2.0 * band)

    if force_flat or not curve_case:
        x_star = 4.0
        last = None
        for _ in range(10):
            try:
                curve = flatten_curve(curve, x_star)
                last = None
                break
            except TraceFailure as exc:
                last = exc
                x_star *= 2.0
        if last is not None:
            raise last
    return _price_on_contour(request, curve,
                             {"route": "asymmetric", "line_height": u,
                              "delta": delta,
                              "flatten_at": curve.flatten_at})


def price_european(request: PricingRequest) -> PriceResult:
    """Dispatch on request.mode; auto prefers the symmetric route."""
    if request.mode == "symmetric":
        return price_european_symmetric(request)
    if request.mode == "nonsymmetric":
        return price_european_nonsymmetric(request)
    try:
        return price_european_symmetric(request)
    except ValueError:
        return price_european_nonsymmetric(request)


# ---------------------------------------------------------------------------
# barrier correction


class _BarrierCorrection:
    """The transform W1(q) on fixed eta/xi grids with per-q WH factors.

    Crossing heights scale like 6/(h-x) (clipped), stacked on the payoff
    side of the strip: factor line, xi curve, eta curve, factor line.  The
    eta wings bend up, the xi wings bend down; the Wiener-Hopf pair stays
    flat and carries the branch-tracked resolvent logarithm.
    """

    def __init__(self, model: LevyModel, payoff: PayoffTransform,
                 x: float, h: float, eps: float):
        self.model = model
        self.payoff = payoff
        self.x = x
        self.h = h
        self.eps = eps
        lo, hi = _height_window(model, payoff)
        # payoff strips are half-lines, so exactly one endpoint is finite
        if math.isfinite(lo):
            base, span, sgn = lo, hi - lo, +1.0
        else:
            base, span, sgn = hi, hi - lo, -1.0
        if not math.isfinite(span):
            span = 8.0
        u0 = min(max(6.0 / max(h - x, 1e-6), 0.05), 0.3 * span)
        for _ in range(60):  # keep exp(-psi) representable on every contour
            probe = 1j * (base + sgn * 2.6 * u0)
            if abs(psi_eval(model, probe).real) <= 150.0:
                break
            u0 *= 0.7
        bend = 0.45
        b = max(0.2, min(1.0, 4.0 * u0))
        mk = lambda lvl, om: SinhXiContour(
            omega1=base + sgn * lvl * u0 - b * math.sin(om), b=b, omega=om)
        # omega1 is adjusted so the axis crossing sits exactly at base+sgn*lvl*u0
        self.f_minus = mk(0.4, 0.0) if sgn > 0 else mk(2.4, 0.0)
        self.c_xi = mk(0.8, -bend) if sgn > 0 else mk(1.6, -bend)
        self.c_eta = mk(1.6, +bend) if sgn > 0 else mk(0.8, +bend)
        self.f_plus = mk(2.4, 0.0) if sgn > 0 else mk(0.4, 0.0)
        self.u_heights = tuple(base + sgn * l * u0 for l in (0.4, 0.8, 1.6, 2.4))
        self.xi_probe = complex(0.0, base + sgn * 0.8 * u0)
        self.grid_cache: Dict = {}
        self._grids: Dict = {}
        self.level = 1
        self.calls = 0
        self.nodes_acc = 0
        self.identity_residual = 0.0

    # -- fixed grids ------------------------------------------------------

    def _quad_nodes(self, which: str, level: int):
        key = (which, level)
        got = self._grids.get(key)
        if got is not None:
            return got
        contour = self.c_eta if which == "eta" else self.c_xi
        y = self._trunc(which)
        m = 192 * (1 << level)
        v = np.linspace(-y, y, m + 1)
        dv = np.full(m + 1, v[1] - v[0])
        dv[0] *= 0.5
        dv[-1] *= 0.5
        z = chi_xi_eval(contour, v)
        w = dv * chi_xi_deriv(contour, v)
        if which == "eta":
            amp = w * np.exp(1j * self.h * z) * ghat_eval(self.payoff, z)
        else:
            amp = w * np.exp(1j * (self.x - self.h) * z)
        got = (z, amp)
        self._grids[key] = got
        return got

    def _trunc(self, which: str) -> float:
        key = ("trunc", which)
        got = self._grids.get(key)
        if got is not None:
            return got
        contour = self.c_eta if which == "eta" else self.c_xi
        cut = 1e-4 * self.eps
        y, ref = 2.0, None
        while y < 40.0:
            v = np.asarray([-y, y])
            z = chi_xi_eval(contour, v)
            dz = np.abs(chi_xi_deriv(contour, v))
            if which == "eta":
                mag = dz * np.abs(self.payoff.g0(z)) * np.exp(
                    np.clip(-(self.h - self.payoff.a) * z.imag, -700, 700)) / (1.0 + np.abs(z))
            else:
                mag = dz * np.exp(np.clip((self.h - self.x) * z.imag, -700, 700)) / (1.0 + np.abs(z))
            top = float(np.max(mag))
            if ref is None:
                ref = max(top, 1e-300)
            if top <= cut * ref:
                break
            y += 0.5
        self._grids[key] = y
        return y

    def _kernel(self, level: int):
        key = ("kern", level)
        got = self._grids.get(key)
        if got is None:
            eta = self._quad_nodes("eta", level)[0]
            xi = self._quad_nodes("xi", level)[0]
            got = 1.0 / (eta[None, :] - xi[:, None]) / (2j * math.pi)
            self._grids[key] = got
        return got

    def prebuild(self, max_level: int):
        for lv in range(max_level + 1):
            self._quad_nodes("eta", lv)
            self._quad_nodes("xi", lv)
            self._kernel(lv)

    def sample_points(self):
        pts = []
        for which in ("eta", "xi"):
            z = self._quad_nodes(which, 1)[0]
            pts.append(z)
        for c in (self.f_minus, self.f_plus):
            pts.append(chi_xi_eval(c, np.linspace(-10, 10, 201)))
        return np.concatenate(pts)

    # -- per-q evaluation --------------------------------------------------

    def _ctx(self, q: complex) -> WHContext:
        return WHContext(model=self.model, q=q, contour_minus=self.f_minus,
                         contour_plus=self.f_plus,
                         eps=max(1e-12, 1e-3 * self.eps),
                         grid_cache=self.grid_cache)

    def eta_integral(self, q: complex, xi) -> complex:
        """Middle stage only: (1/2 pi i) int e^{i h eta} Ghat phi_plus / (eta-xi)."""
        eta, g_amp = self._quad_nodes("eta", self.level)
        g = g_amp * wh_plus(self._ctx(q), eta)
        return complex(np.sum(g / (eta - xi)) / (2j * math.pi))

    def value_at_level(self, q: complex, level: int) -> complex:
        eta, g_amp = self._quad_nodes("eta", level)
        xi, w_amp = self._quad_nodes("xi", level)
        ctx = self._ctx(q)
        g = g_amp * wh_plus(ctx, eta)
        fm = wh_minus(ctx, xi)
        j_up = self._kernel(level) @ g
        total = np.sum(w_amp * fm * j_up) / (2.0 * math.pi)
        self.calls += 1
        self.nodes_acc += eta.size + xi.size
        return complex(total / (1.0 - q))

    def value(self, q: complex) -> complex:
        if np.ndim(q) != 0:
            raise TypeError("scalar q expected")
        return self.value_at_level(complex(q), self.level)

    def calibrate(self, probes, tol_abs: float):
        """Pick the grid level once, on demanding probe values of q."""
        worst = math.inf
        for lv in range(1, 4):  # kernel matrices above level 4 get too large
            worst = 0.0
            for q in probes:
                a = self.value_at_level(q, lv)
                b = self.value_at_level(q, lv + 1)
                worst = max(worst, abs(a - b))
            if worst <= tol_abs:
                self.level = lv + 1
                return worst
        self.level = 4
        return worst

    def identity_gate(self, probes, tol: float):
        mid = 0.5 * (self.u_heights[0] + self.u_heights[3])
        pts = mid * 1j + np.array([-2.0, -0.5, 0.5, 2.0])
        worst = 0.0
        for q in probes:
            worst = max(worst, factor_identity_residual(self._ctx(q), pts))
        self.identity_residual = worst
        if worst > tol:
            raise FactorizationError(
                "factor identity residual %.2e above the %.0e gate" % (worst, tol))


def _barrier_payoff_adjust(payoff: PayoffTransform, h: float):
    """Normalize payoffs against an up-and-out barrier at h.

    Above-barrier payoff structure cannot survive the knock-out: digitals
    paying below a level >= h truncate to the barrier itself; calls struck
    at or above h are worthless; puts struck above h are rejected.
    Returns (payoff, trivial_zero).
    """
    if payoff.kind == "digital_down" and payoff.a > h:
        return digital_down_transform(h, beta=payoff.beta), False
    if payoff.kind == "digital_up" and payoff.a >= h:
        return payoff, True
    if payoff.kind == "call" and payoff.a >= h:
        return payoff, True
    if payoff.kind == "put" and payoff.a > h:
        raise ValueError("put strike above an up-and-out barrier is not supported")
    return payoff, False


def price_barrier(request: PricingRequest) -> PriceResult:
    """Up-and-out price: European part plus a factorized barrier correction.

    Monitoring at dates 1..n with the terminal date included; the value at
    or above the barrier is 0 by the killing convention.  Small n (<= 7)
    falls back to the backward-induction engine, whose accuracy is grid
    limited; the transform path needs the deformed outer contour and only
    engages past that.
    """
    t0 = time.perf_counter()
    if request.h is None:
        raise ValueError("barrier request needs h")
    h, x, n, q0 = request.h, request.x, request.n, request.q0
    if x >= h:
        return PriceResult(price=0.0, error_estimate=0.0, q_nodes_used=0,
                           inner_nodes_avg=0.0, wall_time=time.perf_counter() - t0,
                           diagnostics={"route": "knocked_out"})
    payoff, trivial = _barrier_payoff_adjust(request.payoff, h)
    if trivial:
        return PriceResult(price=0.0, error_estimate=0.0, q_nodes_used=0,
                           inner_nodes_avg=0.0, wall_time=time.perf_counter() - t0,
                           diagnostics={"route": "empty_payoff"})
    request = replace(request, payoff=payoff)
    if n == 0:
        g = payoff_value(payoff, x)
        return PriceResult(price=g, error_estimate=0.0, q_nodes_used=0,
                           inner_nodes_avg=0.0, wall_time=time.perf_counter() - t0,
                           diagnostics={"route": "pointwise"})
    if n <= 7:
        vals, err = oracle_barrier_induction(request.model, payoff, n, q0,
                                             [x], h, tol=max(request.eps, 2e-5))
        return PriceResult(price=float(vals[0]), error_estimate=err,
                           q_nodes_used=0, inner_nodes_avg=0.0,
                           wall_time=time.perf_counter() - t0,
                           diagnostics={"route": "induction"})

    eu = price_european(request)

    model = request.model
    corr = _BarrierCorrection(model, payoff, x, h, request.eps)
    gamma_eff, disc_log, profile = _sector_window(model, corr.sample_points(),
                                                  _window_log(request))
    m_eff = AUTO_M if request.M is None else request.M
    r_out = math.exp(disc_log + 3.0 * m_eff / max(n, 1))
    probes = [math.exp(disc_log) * 0.9,
              complex(math.exp(disc_log)) * np.exp(1j * (gamma_eff + 0.2)),
              r_out * np.exp(1j * (gamma_eff + 0.4)),
              r_out * np.exp(2.5j)]
    corr.prebuild(3)
    corr.identity_gate(probes, tol=1e-6)
    scale_ref = max(1.0, abs(payoff_value(payoff, x)), payoff.strike)
    corr.calibrate(probes, tol_abs=0.3 * request.eps * scale_ref)

    pole_dist = max(1.0 - math.exp(-0.1 * m_eff / max(n, 1)), 1e-3)
    ev = TransformEvaluator(eval=corr.value, a_v=0.0, c_v=scale_ref / pole_dist,
                            gamma=gamma_eff, bound_kind="generic",
                            real_coefficients=True, disc_radius=math.exp(disc_log),
                            sector_profile=profile)
    zres = _invert(ev, request, memo_raw=corr.value)
    dval, dimag = _assemble(zres, n, q0)

    price = eu.price + dval
    err = eu.error_estimate + request.eps * max(1.0, abs(price)) + dimag
    diag = dict(eu.diagnostics, route="barrier",
                correction=dval, identity_residual=corr.identity_residual,
                barrier_gamma_eff=gamma_eff, barrier_disc_log=disc_log,
                u_heights=corr.u_heights, grid_level=corr.level)
    inner_avg = (eu.inner_nodes_avg + corr.nodes_acc / max(corr.calls, 1)) / 2.0
    return PriceResult(price=price, error_estimate=err,
                       q_nodes_used=eu.q_nodes_used + zres.nodes_used,
                       inner_nodes_avg=inner_avg,
                       wall_time=time.perf_counter() - t0,
                       diagnostics=diag)
