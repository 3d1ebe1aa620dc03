"""Characteristic exponents of the supported process families.

A model is described by its exponent psi with E[exp(i*xi*X_1)] = exp(-psi(xi)).
psi is analytic on the complex plane cut along i*(-inf, mu_minus] and
i*[mu_plus, +inf), and admits a power expansion

    psi(xi) + i*mu*xi = sum_j d_j * xi**nu_j + smaller order

in any closed sector |arg xi| <= gamma < pi/2, with 0 < nu_0 <= 2 and
d_0 real positive.  The expansion drives the level-curve asymptotics: the
classification indices (j0, nu_bar) and the wing slope p(delta) are all
derived from the ordered coefficient list.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
from scipy.special import gamma as _gamma_fn
from scipy.special import binom as _binom

__all__ = [
    "KoBoLParams",
    "NTSParams",
    "QuadraticParams",
    "MixtureParams",
    "EsscherShift",
    "LevyModel",
    "make_kobol",
    "make_nts",
    "make_quadratic",
    "make_mixture",
    "psi_eval",
    "phi_eval",
    "asymptotic_params",
    "esscher",
    "symmetry_check",
    "p_delta",
]

_IM_CHOP = 1e-12  # relative imaginary chop for coefficients that are real analytically


class ClassificationError(ValueError):
    """Raised when the expansion does not fit the supported classification."""


@dataclass(frozen=True)
class KoBoLParams:
    c_plus: float
    c_minus: float
    nu_plus: float
    nu_minus: float
    lambda_minus: float
    lambda_plus: float
    mu: float = 0.0

    def __post_init__(self):
        if self.c_plus < 0 or self.c_minus < 0 or self.c_plus + self.c_minus <= 0:
            raise ValueError("intensities must be nonnegative and not both zero")
        for nu in (self.nu_plus, self.nu_minus):
            if not 0.0 < nu < 2.0 or abs(nu - 1.0) < 1e-12:
                raise ValueError("order must lie in (0,2) and differ from 1")
        if not (self.lambda_minus < 0.0 < self.lambda_plus):
            raise ValueError("need lambda_minus < 0 < lambda_plus")


@dataclass(frozen=True)
class NTSParams:
    delta_s: float
    alpha_s: float
    beta_s: float
    nu_s: float
    mu: float = 0.0

    def __post_init__(self):
        if self.delta_s <= 0.0:
            raise ValueError("delta_s must be positive")
        if not 0.0 < self.nu_s < 2.0:
            raise ValueError("nu_s must lie in (0,2)")
        if not abs(self.beta_s) < self.alpha_s:
            raise ValueError("need |beta_s| < alpha_s")


@dataclass(frozen=True)
class QuadraticParams:
    """Brownian-type exponent psi = -i*mu*xi + scale*xi**2 (test model)."""
    scale: float
    mu: float = 0.0

    def __post_init__(self):
        if self.scale <= 0.0:
            raise ValueError("scale must be positive")


@dataclass(frozen=True)
class MixtureParams:
    a0: float
    a1: float
    comp0: "LevyModel"
    comp1: "LevyModel"

    def __post_init__(self):
        if self.a0 <= 0 or self.a1 <= 0 or abs(self.a0 + self.a1 - 1.0) > 1e-12:
            raise ValueError("weights must be positive and sum to one")


@dataclass(frozen=True)
class EsscherShift:
    beta: float


@dataclass(frozen=True)
class LevyModel:
    """A process family member plus its derived analytic data.

    ``strip`` is the maximal horizontal strip of analyticity
    (mu_minus, mu_plus) in Im xi.  ``asymptotics`` is the ordered list of
    (d_j, nu_j) pairs, largest order first; orders below nu0 - 2.5 are
    dropped.  ``nu_bar`` and ``j0`` follow the classification table; when
    the expansion does not fit the table they are None and the dependent
    operations raise.
    """

    kind: str
    params: object
    strip: Tuple[float, float]
    mu: float
    asymptotics: Tuple[Tuple[complex, float], ...] = ()
    nu0: float = 0.0
    j0: Optional[int] = None
    nu_bar: Optional[float] = None
    classification_error: Optional[str] = None

    @property
    def d0(self) -> float:
        return self.asymptotics[0][0].real


# ---------------------------------------------------------------------------
# expansion helpers


def _chop(z: complex) -> complex:
    """Drop imaginary (or real) parts that are pure rounding noise."""
    mag = abs(z)
    if mag == 0.0:
        return 0.0 + 0.0j
    re = z.real if abs(z.real) > _IM_CHOP * mag else 0.0
    im = z.imag if abs(z.imag) > _IM_CHOP * mag else 0.0
    return complex(re, im)


def _merge_terms(terms, nu0):
    """Combine equal orders, chop noise, sort descending, truncate low orders."""
    acc = {}
    for d, order in terms:
        key = round(order, 12)
        acc[key] = acc.get(key, 0.0 + 0.0j) + complex(d)
    out = []
    for key in sorted(acc, reverse=True):
        d = _chop(acc[key])
        if d == 0.0:
            continue
        if key < nu0 - 2.5:
            continue
        out.append((d, float(key)))
    return tuple(out)


def _kobol_terms(p: KoBoLParams, n_terms: int = 4):
    """Sector expansion of psi + i*mu*xi for the two-sided stable-like family.

    (-lam_m - i*xi)^nu = sum_k binom(nu,k) (-lam_m)^k (-i)^(nu-k) xi^(nu-k)
    and similarly for (lam_p + i*xi)^nu, with (-i)^s = exp(-i*pi*s/2),
    (+i)^s = exp(+i*pi*s/2) on the principal branch for xi in the right
    half-plane.
    """
    terms = []
    for c, nu, lam, sgn in ((p.c_plus, p.nu_plus, -p.lambda_minus, -1.0),
                            (p.c_minus, p.nu_minus, p.lambda_plus, +1.0)):
        if c == 0.0:
            continue
        g = c * _gamma_fn(-nu)
        # constant part  c*Gamma(-nu)*lam^nu  (real)
        terms.append((g * lam ** nu, 0.0))
        for k in range(n_terms):
            phase = cmath.exp(sgn * 1j * 0.5 * math.pi * (nu - k))
            terms.append((-g * _binom(nu, k) * lam ** k * phase, nu - k))
    return terms


def _nts_terms(p: NTSParams, n_terms: int = 4):
    """Sector expansion of the tempered-normal family.

    alpha^2 - (beta + i*xi)^2 = xi^2 (1 + u),
    u = -2i*beta/xi + (alpha^2-beta^2)/xi^2, so the nu/2 power expands by a
    double binomial; the coefficient of xi^(nu - m) is
    sum_j binom(nu/2, m-j) binom(m-j, j) (-2i*beta)^(m-2j) (alpha^2-beta^2)^j.
    """
    terms = []
    a2b2 = p.alpha_s ** 2 - p.beta_s ** 2
    for m in range(n_terms):
        cm = 0.0 + 0.0j
        for j in range(m // 2 + 1):
            cm += (_binom(p.nu_s / 2.0, m - j) * _binom(m - j, j)
                   * (-2j * p.beta_s) ** (m - 2 * j) * a2b2 ** j)
        terms.append((p.delta_s * cm, p.nu_s - m))
    terms.append((-p.delta_s * a2b2 ** (p.nu_s / 2.0), 0.0))
    return terms


def _classify(asym, mu):
    """(j0, nu_bar) from the ordered expansion.

    j0 is the first index past 0 whose coefficient has a nonzero imaginary
    part; real coefficients in between must be positive when their order is
    positive (real constants and negative orders cannot move Im psi on the
    wings and are exempt).  If no imaginary coefficient exists j0 = N and
    nu_{j0} is treated as -inf.
    """
    if not asym:
        raise ClassificationError("empty expansion")
    d0, nu0 = asym[0]
    if d0.imag != 0.0 or d0.real <= 0.0:
        raise ClassificationError("leading coefficient must be real positive, got %r" % (d0,))
    if not 0.0 < nu0 <= 2.0:
        raise ClassificationError("leading order must lie in (0,2], got %r" % (nu0,))

    j0 = len(asym)
    blocked = False
    for j in range(1, len(asym)):
        d, order = asym[j]
        if d.imag != 0.0:
            if blocked and order >= 0.0:
                raise ClassificationError(
                    "skew term at order %g shielded by a nonpositive real coefficient" % order)
            j0 = j
            break
        if order > 0.0 and d.real <= 0.0:
            # real constants and negative orders cannot move Im psi on the
            # wings; a negative real coefficient at positive order only
            # matters if a skew term of nonnegative order follows it
            blocked = True
    nu_j0 = asym[j0][1] if j0 < len(asym) else -math.inf

    if abs(nu_j0 - 1.0) < 1e-12:
        raise ClassificationError("order of the first skew term equals 1; unsupported")
    if mu == 0.0 and nu_j0 <= 0.0:
        nu_bar = 0.0
    elif mu != 0.0 and nu_j0 < 1.0:
        nu_bar = 1.0
    elif nu_j0 > 1.0 or (0.0 < nu_j0 < 1.0 and mu == 0.0):
        nu_bar = nu_j0
    else:
        raise ClassificationError("expansion does not fit the classification table")
    return j0, nu_bar


def _finalize(kind, params, strip, mu, terms):
    orders = [o for _, o in terms if o > 0]
    if not orders:
        raise ClassificationError("no positive-order term in the expansion")
    nu0 = max(orders)
    asym = _merge_terms(terms, nu0)
    if asym[0][1] != nu0:
        raise ClassificationError("leading order lost in merge")
    if nu0 < 1.0 and mu != 0.0:
        raise ValueError("nonzero drift requires leading order >= 1 (got nu0=%g)" % nu0)
    err = None
    try:
        j0, nu_bar = _classify(asym, mu)
    except ClassificationError as e:
        j0, nu_bar, err = None, None, str(e)
    return LevyModel(kind=kind, params=params, strip=strip, mu=mu,
                     asymptotics=asym, nu0=nu0, j0=j0, nu_bar=nu_bar,
                     classification_error=err)


# ---------------------------------------------------------------------------
# constructors


def make_kobol(c_plus, c_minus, nu_plus, nu_minus, lambda_minus, lambda_plus, mu=0.0) -> LevyModel:
    p = KoBoLParams(c_plus, c_minus, nu_plus, nu_minus, lambda_minus, lambda_plus, mu)
    strip = (p.lambda_minus, p.lambda_plus)
    return _finalize("kobol", p, strip, mu, _kobol_terms(p))


def make_nts(delta_s, alpha_s, beta_s, nu_s, mu=0.0) -> LevyModel:
    p = NTSParams(delta_s, alpha_s, beta_s, nu_s, mu)
    strip = (beta_s - alpha_s, beta_s + alpha_s)
    return _finalize("nts", p, strip, mu, _nts_terms(p))


def make_quadratic(scale, mu=0.0) -> LevyModel:
    p = QuadraticParams(scale, mu)
    return _finalize("quadratic", p, (-math.inf, math.inf), mu, [(complex(scale), 2.0)])


def make_mixture(comp0: LevyModel, comp1: LevyModel, a0: float) -> LevyModel:
    p = MixtureParams(a0, 1.0 - a0, comp0, comp1)
    strip = (max(comp0.strip[0], comp1.strip[0]), min(comp0.strip[1], comp1.strip[1]))
    if not strip[0] < 0.0 < strip[1]:
        raise ValueError("component strips do not overlap around zero")
    # tail behaviour is set by the slower-decaying component
    if (comp0.nu0, comp0.d0) <= (comp1.nu0, comp1.d0):
        dom, w = comp0, p.a0
    else:
        dom, w = comp1, p.a1
    terms = list(dom.asymptotics) + [(-math.log(w), 0.0)]
    return _finalize("mixture", p, strip, dom.mu, terms)


# ---------------------------------------------------------------------------
# evaluation


def _on_cut(m: LevyModel, xi) -> bool:
    xi = complex(xi)
    if xi.real != 0.0:
        return False
    lo, hi = m.strip
    return xi.imag >= hi or xi.imag <= lo


def psi_eval(m: LevyModel, xi):
    """Characteristic exponent; accepts scalars or arrays.

    Errors out on the cuts i*(-inf, mu_minus] u i*[mu_plus, inf).
    """
    scalar = np.isscalar(xi) or np.asarray(xi).ndim == 0
    z = np.asarray(xi, dtype=complex)
    if scalar and _on_cut(m, complex(z)):
        raise ValueError("xi lies on a spectral cut")

    if m.kind == "kobol":
        p = m.params
        val = np.zeros_like(z)
        if p.c_plus:
            g = p.c_plus * _gamma_fn(-p.nu_plus)
            val = val + g * ((-p.lambda_minus) ** p.nu_plus
                             - np.power(-p.lambda_minus - 1j * z, p.nu_plus))
        if p.c_minus:
            g = p.c_minus * _gamma_fn(-p.nu_minus)
            val = val + g * (p.lambda_plus ** p.nu_minus
                             - np.power(p.lambda_plus + 1j * z, p.nu_minus))
        val = val - 1j * p.mu * z
    elif m.kind == "nts":
        p = m.params
        base = p.alpha_s ** 2 - p.beta_s ** 2
        val = p.delta_s * (np.power(p.alpha_s ** 2 - (p.beta_s + 1j * z) ** 2, p.nu_s / 2.0)
                           - base ** (p.nu_s / 2.0)) - 1j * p.mu * z
    elif m.kind == "quadratic":
        p = m.params
        val = p.scale * z * z - 1j * p.mu * z
    elif m.kind == "mixture":
        val = _psi_mixture(m, z)
    else:
        raise ValueError("unknown model kind %r" % (m.kind,))
    return complex(val) if scalar else val


def _psi_mixture(m: LevyModel, z):
    """-log(a0 Phi0 + a1 Phi1) with the branch tracked from xi = 0."""
    p = m.params

    def w_at(t):
        return (p.a0 * np.exp(-psi_eval(p.comp0, t))
                + p.a1 * np.exp(-psi_eval(p.comp1, t)))

    flat = np.atleast_1d(z).ravel()
    out = np.empty(flat.shape, dtype=complex)
    for i, zi in enumerate(flat):
        steps = max(8, int(4 * abs(zi)))
        for _ in range(6):
            path = zi * np.linspace(0.0, 1.0, steps + 1)
            w = w_at(path)
            ratios = w[1:] / w[:-1]
            jumps = np.angle(ratios)
            if np.all(np.abs(jumps) < 0.5 * math.pi):
                out[i] = -(np.sum(np.log(np.abs(ratios))) + 1j * np.sum(jumps))
                break
            steps *= 2
        else:
            raise ArithmeticError("mixture branch tracking failed at xi=%r" % (zi,))
    return out.reshape(np.asarray(z).shape)


def phi_eval(m: LevyModel, xi):
    """Characteristic function exp(-psi(xi))."""
    return np.exp(-psi_eval(m, xi))


def _psi_deriv(m: LevyModel, xi):
    """Closed-form derivative of psi (internal; used by curve tracing)."""
    scalar = np.isscalar(xi) or np.asarray(xi).ndim == 0
    z = np.asarray(xi, dtype=complex)
    if m.kind == "kobol":
        p = m.params
        val = np.zeros_like(z)
        if p.c_plus:
            g = p.c_plus * _gamma_fn(-p.nu_plus)
            val = val + g * 1j * p.nu_plus * np.power(-p.lambda_minus - 1j * z, p.nu_plus - 1.0)
        if p.c_minus:
            g = p.c_minus * _gamma_fn(-p.nu_minus)
            val = val - g * 1j * p.nu_minus * np.power(p.lambda_plus + 1j * z, p.nu_minus - 1.0)
        val = val - 1j * p.mu
    elif m.kind == "nts":
        p = m.params
        val = (-1j * p.delta_s * p.nu_s * (p.beta_s + 1j * z)
               * np.power(p.alpha_s ** 2 - (p.beta_s + 1j * z) ** 2, p.nu_s / 2.0 - 1.0)
               - 1j * p.mu)
    elif m.kind == "quadratic":
        p = m.params
        val = 2.0 * p.scale * z - 1j * p.mu
    elif m.kind == "mixture":
        p = m.params
        f0 = np.exp(-psi_eval(p.comp0, z))
        f1 = np.exp(-psi_eval(p.comp1, z))
        num = p.a0 * f0 * _psi_deriv(p.comp0, z) + p.a1 * f1 * _psi_deriv(p.comp1, z)
        val = num / (p.a0 * f0 + p.a1 * f1)
    else:
        raise ValueError("unknown model kind %r" % (m.kind,))
    return complex(val) if scalar else val


# ---------------------------------------------------------------------------
# derived quantities


def asymptotic_params(m: LevyModel):
    """Return (asymptotics, nu0, j0, nu_bar); raises if unclassifiable."""
    if m.classification_error is not None:
        raise ClassificationError(m.classification_error)
    return m.asymptotics, m.nu0, m.j0, m.nu_bar


def p_delta(m: LevyModel, delta: float) -> float:
    """Wing slope of the level curve Im psi = delta.

    On the wings y ~ p * x**(nu_bar + 1 - nu0); the prefactor follows the
    case table below with nu_{j0} = -inf when no skew term exists.
    """
    if delta == 0.0:
        raise ValueError("delta must be nonzero")
    asym, nu0, j0, _ = asymptotic_params(m)
    d0 = asym[0][0].real
    nu_j0 = asym[j0][1] if j0 < len(asym) else -math.inf
    im_dj0 = asym[j0][0].imag if j0 < len(asym) else 0.0
    mu = m.mu

    if mu == 0.0 and nu_j0 < 0.0:
        return delta / (d0 * nu0)
    if mu == 0.0 and nu_j0 == 0.0:
        return (delta - im_dj0) / (d0 * nu0)
    if (mu == 0.0 and 0.0 < nu_j0 < 1.0) or (1.0 < nu_j0 < 2.0):
        return -im_dj0 / (d0 * nu0)
    if mu != 0.0 and nu_j0 < 1.0:
        return mu / (d0 * nu0)
    raise ClassificationError("wing slope undefined for this expansion")


def esscher(m: LevyModel, s: EsscherShift) -> LevyModel:
    """Exponential tilt: psi_beta(xi) = psi(xi - i*beta) - psi(-i*beta).

    Every supported family is closed under the tilt, so the result is a
    plain model of the same kind with shifted parameters.
    """
    beta = s.beta
    lo, hi = m.strip
    if not lo < -beta < hi:
        raise ValueError("-beta must lie inside the analyticity strip")

    if m.kind == "kobol":
        p = m.params
        return make_kobol(p.c_plus, p.c_minus, p.nu_plus, p.nu_minus,
                          p.lambda_minus + beta, p.lambda_plus + beta, p.mu)
    if m.kind == "nts":
        p = m.params
        return make_nts(p.delta_s, p.alpha_s, p.beta_s + beta, p.nu_s, p.mu)
    if m.kind == "quadratic":
        p = m.params
        return make_quadratic(p.scale, p.mu + 2.0 * p.scale * beta)
    if m.kind == "mixture":
        p = m.params
        w0 = p.a0 * math.exp(-psi_eval(p.comp0, -1j * beta).real)
        w1 = p.a1 * math.exp(-psi_eval(p.comp1, -1j * beta).real)
        return make_mixture(esscher(p.comp0, s), esscher(p.comp1, s), w0 / (w0 + w1))
    raise ValueError("unknown model kind %r" % (m.kind,))


def symmetry_check(m: LevyModel, s: EsscherShift, tol: float = 1e-10):
    """Measure how far Phi(xi - i*beta) is from an even real function.

    Returns (max_asym, max_negative); the model is symmetrizable by beta
    when both are below tol.
    """
    beta = s.beta
    t = np.linspace(0.0, 30.0, 601)[1:]
    right = phi_eval(m, t - 1j * beta)
    left = phi_eval(m, -t - 1j * beta)
    asym = float(np.max(np.abs(right - left)))
    neg = float(max(np.max(-right.real), np.max(np.abs(right.imag)), 0.0))
    return asym <= tol and neg <= tol, asym, neg
