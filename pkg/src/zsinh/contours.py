"""Conformal sinh contours in the q-plane and xi-plane.

Two families of curves are used throughout the package:

* ``chi(y) = sigma + i*b*sinh(i*omega + y)``  -- deformation of the circle
  in the Z-inversion plane.  The image of a horizontal strip of half-width
  ``d`` is a bundle of hyperbola-like curves; each boundary offset ``v``
  produces the curve with angle parameter ``omega + v``.
* ``chi(y) = i*omega1 + b*sinh(i*omega + y)`` -- deformation of a horizontal
  line in the Fourier-dual plane.

Everything here is pure geometry: evaluation, construction from two
through-radii, and diagnostic validation of sector/disc membership.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "SinhZContour",
    "SinhXiContour",
    "AnnulusSpec",
    "ContourReport",
    "chi_z_eval",
    "chi_z_deriv",
    "chi_xi_eval",
    "chi_xi_deriv",
    "build_z_contour",
    "validate_z_contour",
    "edge_min_distance",
]

_HALF_PI = 0.5 * math.pi


@dataclass(frozen=True)
class SinhZContour:
    """Deformed Z-inversion contour sigma + i*b*sinh(i*omega + y).

    ``d_l`` is the half-width of the strip of analyticity in y,
    ``zeta_l`` the trapezoid step and ``N_l`` the truncation index;
    ``Lambda`` (the truncation point in y) is ``N_l * zeta_l``.
    """

    sigma_l: float
    b_l: float
    omega_l: float
    d_l: float
    zeta_l: float = 0.0
    N_l: int = 0

    def __post_init__(self):
        if not self.b_l > 0.0:
            raise ValueError("b_l must be positive")
        if not -_HALF_PI < self.omega_l < _HALF_PI:
            raise ValueError("omega_l must lie in (-pi/2, pi/2)")
        if not self.d_l > 0.0:
            raise ValueError("d_l must be positive")
        for edge in (self.omega_l - self.d_l, self.omega_l + self.d_l):
            if not -_HALF_PI < edge < _HALF_PI:
                raise ValueError("omega_l +/- d_l must stay inside (-pi/2, pi/2)")
        if not self.sigma_l - self.b_l * math.sin(self.omega_l) > 0.0:
            raise ValueError("chi(0) = sigma_l - b_l*sin(omega_l) must be positive")
        if self.zeta_l < 0.0 or self.N_l < 0:
            raise ValueError("zeta_l and N_l must be nonnegative")

    @property
    def Lambda(self) -> float:
        return self.N_l * self.zeta_l

    @property
    def apex(self) -> float:
        """Crossing radius of the central curve, chi(0)."""
        return self.sigma_l - self.b_l * math.sin(self.omega_l)


@dataclass(frozen=True)
class SinhXiContour:
    """Deformed Fourier line i*omega1 + b*sinh(i*omega + y).

    The map is injective on the real line for any omega in (-pi/2, pi/2)
    since Re chi is b*cos(omega)*sinh(y), strictly monotone.
    """

    omega1: float
    b: float
    omega: float
    zeta: float = 0.0
    N: int = 0
    d: float = 0.0  # strip half-width; 0 disables the domain check

    def __post_init__(self):
        if not self.b > 0.0:
            raise ValueError("b must be positive")
        if not -_HALF_PI < self.omega < _HALF_PI:
            raise ValueError("omega must lie in (-pi/2, pi/2)")


@dataclass(frozen=True)
class AnnulusSpec:
    r_minus: float
    r_plus: float

    def __post_init__(self):
        if not 0.0 < self.r_minus < self.r_plus < 1.0:
            raise ValueError("need 0 < r_minus < r_plus < 1")

    @property
    def rho(self) -> float:
        return math.sqrt(self.r_plus / self.r_minus)


def _check_strip(y, half_width: float):
    if half_width > 0.0:
        if np.max(np.abs(np.imag(np.asarray(y, dtype=complex)))) >= half_width:
            raise ValueError("evaluation point outside the strip |Im y| < d")


def chi_z_eval(c: SinhZContour, y):
    """Evaluate sigma_l + i*b_l*sinh(i*omega_l + y); y scalar or array."""
    _check_strip(y, c.d_l)
    w = 1j * c.omega_l + np.asarray(y, dtype=complex)
    out = c.sigma_l + 1j * c.b_l * np.sinh(w)
    return complex(out) if np.isscalar(y) or np.asarray(y).ndim == 0 else out


def chi_z_deriv(c: SinhZContour, y):
    """d(chi)/dy = i*b_l*cosh(i*omega_l + y)."""
    _check_strip(y, c.d_l)
    w = 1j * c.omega_l + np.asarray(y, dtype=complex)
    out = 1j * c.b_l * np.cosh(w)
    return complex(out) if np.isscalar(y) or np.asarray(y).ndim == 0 else out


def chi_xi_eval(c: SinhXiContour, y):
    """Evaluate i*omega1 + b*sinh(i*omega + y); y scalar or array."""
    _check_strip(y, c.d)
    w = 1j * c.omega + np.asarray(y, dtype=complex)
    out = 1j * c.omega1 + c.b * np.sinh(w)
    return complex(out) if np.isscalar(y) or np.asarray(y).ndim == 0 else out


def chi_xi_deriv(c: SinhXiContour, y):
    _check_strip(y, c.d)
    w = 1j * c.omega + np.asarray(y, dtype=complex)
    out = c.b * np.cosh(w)
    return complex(out) if np.isscalar(y) or np.asarray(y).ndim == 0 else out


def build_z_contour(r_minus: float, r_plus: float, omega_l: float, d_l: float) -> SinhZContour:
    """Solve for (sigma_l, b_l) so the strip edges pass through r_plus and r_minus.

    The defining equations are sigma_l - b_l*sin(omega_l - d_l) = r_plus and
    sigma_l - b_l*sin(omega_l + d_l) = r_minus, with the closed-form solution

        b_l     = (r_plus - r_minus) / (2 cos(omega_l) sin(d_l)),
        sigma_l = [(r_plus - r_minus) sin(omega_l) cos(d_l)
                   + (r_plus + r_minus) cos(omega_l) sin(d_l)]
                  / (2 cos(omega_l) sin(d_l)).
    """
    if not 0.0 < r_minus < r_plus < 1.0:
        raise ValueError("need 0 < r_minus < r_plus < 1")
    if d_l <= 0.0:
        raise ValueError("d_l must be positive")
    for edge in (omega_l - d_l, omega_l + d_l):
        if not -_HALF_PI < edge < _HALF_PI:
            raise ValueError("omega_l +/- d_l outside (-pi/2, pi/2)")

    denom = 2.0 * math.cos(omega_l) * math.sin(d_l)
    b_l = (r_plus - r_minus) / denom
    sigma_l = ((r_plus - r_minus) * math.sin(omega_l) * math.cos(d_l)
               + (r_plus + r_minus) * math.cos(omega_l) * math.sin(d_l)) / denom

    # through-point identities must hold to rounding accuracy
    tp = sigma_l - b_l * math.sin(omega_l - d_l)
    tm = sigma_l - b_l * math.sin(omega_l + d_l)
    if abs(tp - r_plus) > 1e-12 * max(1.0, r_plus) or abs(tm - r_minus) > 1e-12 * max(1.0, r_minus):
        raise ArithmeticError("through-point identities failed; inputs ill-conditioned")

    return SinhZContour(sigma_l=sigma_l, b_l=b_l, omega_l=omega_l, d_l=d_l)


def edge_min_distance(sigma: float, b: float, theta: float) -> float:
    """Minimum of |sigma + i*b*sinh(i*theta + y)| over real y.

    The edge curve is the hyperbola branch
        X(y) = sigma - b*sin(theta)*cosh(y),  Y(y) = b*cos(theta)*sinh(y).
    Setting the derivative of X^2+Y^2 to zero gives the critical equation
    sinh(y) * (b*cosh(y) - sigma*sin(theta)) = 0, hence either the apex y=0
    or, when sigma*sin(theta) >= b, an interior minimum with value
    cos(theta)*sqrt(sigma^2 - b^2).
    """
    apex = abs(sigma - b * math.sin(theta))
    if sigma > b and sigma * math.sin(theta) >= b:
        return math.cos(theta) * math.sqrt(sigma * sigma - b * b)
    return apex


@dataclass(frozen=True)
class ContourReport:
    passed: bool
    membership_ok: bool
    angles_ok: bool
    through_ok: bool
    min_left_distance: float
    implied_r_minus: float
    implied_r_plus: float
    left_distance_matches_r_minus: bool
    notes: tuple = field(default_factory=tuple)


def validate_z_contour(c: SinhZContour, gamma: float,
                       samples: int = 2001, span: float | None = None,
                       profile=None) -> ContourReport:
    """Diagnostic checks of a Z contour against the sector condition.

    Membership: both strip-boundary curves must lie inside the union of the
    unit disc and the complement of the sector {|arg q| <= gamma}; checked by
    dense sampling.  ``profile``, when given, replaces the constant wedge
    width with profile(log|q|), a nondecreasing vectorized map capped by
    gamma: singular sets receding from the real axis block far less of the
    near-disc region.  The angle window depends on the branch: a left-opening
    contour (omega_l >= 0) needs gamma/2 < omega_l - d_l and
    omega_l + d_l < pi/4, a right-opening one (omega_l < 0) needs
    |omega_l| + d_l < pi/2 - gamma/2.  The minimum distance of the inner
    boundary from the origin is reported along with whether it coincides
    with the implied r_minus; that coincidence holds in the apex regime and
    genuinely fails for thin annuli, so it is reported, not enforced.
    """
    notes = []
    if span is None:
        span = c.Lambda + 2.0 if c.Lambda > 0.0 else 10.0
    y = np.linspace(-span, span, samples)

    membership_ok = True
    for v in (+c.d_l, -c.d_l):
        w = 1j * (c.omega_l + v) + y.astype(complex)
        pts = c.sigma_l + 1j * c.b_l * np.sinh(w)
        inside_disc = np.abs(pts) <= 1.0 + 1e-12
        if profile is None:
            width = gamma
        else:
            width = profile(np.log(np.maximum(np.abs(pts), 1e-300)))
        outside_sector = np.abs(np.angle(pts)) >= width - 1e-12
        ok = bool(np.all(inside_disc | outside_sector))
        membership_ok = membership_ok and ok
        if not ok:
            bad = np.argmin(inside_disc | outside_sector)
            notes.append("edge v=%+.4f leaves the admissible region near y=%.3f" % (v, y[bad]))

    if c.omega_l >= 0.0:
        angles_ok = (c.omega_l - c.d_l > 0.5 * gamma) and (c.omega_l + c.d_l < 0.25 * math.pi)
        if not angles_ok:
            notes.append("left-branch angle window violated: need gamma/2 < omega-d and omega+d < pi/4")
    else:
        angles_ok = abs(c.omega_l) + c.d_l < _HALF_PI - 0.5 * gamma
        if not angles_ok:
            notes.append("right-branch angle window violated: need |omega|+d < pi/2 - gamma/2")

    implied_r_plus = c.sigma_l - c.b_l * math.sin(c.omega_l - c.d_l)
    implied_r_minus = c.sigma_l - c.b_l * math.sin(c.omega_l + c.d_l)
    through_ok = 0.0 < implied_r_minus < implied_r_plus
    if not (implied_r_plus < 1.0):
        notes.append("outer through-point at or beyond the unit circle")
        through_ok = False

    dist = edge_min_distance(c.sigma_l, c.b_l, c.omega_l + c.d_l)
    matches = through_ok and abs(dist - implied_r_minus) <= 1e-10 * max(1.0, implied_r_minus)
    if through_ok and not matches:
        notes.append("inner boundary dips to %.6f below its through-radius %.6f" % (dist, implied_r_minus))

    return ContourReport(
        passed=bool(membership_ok and angles_ok and through_ok),
        membership_ok=bool(membership_ok),
        angles_ok=bool(angles_ok),
        through_ok=bool(through_ok),
        min_left_distance=float(dist),
        implied_r_minus=float(implied_r_minus),
        implied_r_plus=float(implied_r_plus),
        left_distance_matches_r_minus=bool(matches),
        notes=tuple(notes),
    )
