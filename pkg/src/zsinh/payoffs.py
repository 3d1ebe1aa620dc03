"""Fourier transforms of the terminal payoffs, Ghat(xi) = int e^{-i x xi} G(x) dx.

Each payoff records its transform in factored form Ghat(xi) =
exp(-i a xi) * g0(xi) with a the log-strike or log-level, the horizontal
strip of Im xi where the defining integral converges, the default damping
parameter beta (the evaluation line is Im xi = -beta), and the pole list of
the meromorphic continuation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Tuple

import numpy as np

__all__ = [
    "PayoffTransform",
    "put_transform",
    "call_transform",
    "digital_up_transform",
    "digital_down_transform",
    "custom_transform",
    "ghat_eval",
    "regularity_strip",
    "payoff_value",
    "decay_constant",
]

_POLE_TOL = 1e-12


@dataclass(frozen=True)
class PayoffTransform:
    kind: str
    a: float                       # log-strike / log-level
    beta: float                    # damping; evaluation line Im xi = -beta
    strip: Tuple[float, float]     # convergence strip in Im xi
    poles: Tuple[complex, ...]
    g0: Callable[[complex], complex] = field(repr=False)
    value_fn: Optional[Callable[[float], float]] = field(default=None, repr=False)
    strike: float = 0.0

    def __post_init__(self):
        lo, hi = self.strip
        if not lo < -self.beta < hi:
            raise ValueError("beta puts the evaluation line outside the strip "
                             "(need %g < %g < %g)" % (lo, -self.beta, hi))


def _ratio_g0(K: float):
    def g0(xi):
        return -K / (xi * (xi + 1j))
    return g0


def put_transform(strike: float, beta: float = -0.25) -> PayoffTransform:
    """(K - e^x)_+ ; Ghat = -K e^{-i a xi} / (xi (xi + i)), a = log K.

    The integral converges for Im xi in (0, inf); the continuation has
    simple poles at 0 and -i.  beta < 0 keeps the line inside the strip.
    """
    if strike <= 0.0:
        raise ValueError("strike must be positive")
    a = math.log(strike)
    return PayoffTransform(kind="put", a=a, beta=beta, strip=(0.0, math.inf),
                           poles=(0.0 + 0.0j, -1.0j), g0=_ratio_g0(strike),
                           value_fn=lambda x: max(strike - math.exp(x), 0.0),
                           strike=strike)


def call_transform(strike: float, beta: float = 1.5) -> PayoffTransform:
    """(e^x - K)_+ ; same rational factor as the put, strip (-inf, -1)."""
    if strike <= 0.0:
        raise ValueError("strike must be positive")
    a = math.log(strike)
    return PayoffTransform(kind="call", a=a, beta=beta, strip=(-math.inf, -1.0),
                           poles=(0.0 + 0.0j, -1.0j), g0=_ratio_g0(strike),
                           value_fn=lambda x: max(math.exp(x) - strike, 0.0),
                           strike=strike)


def digital_up_transform(a: float, beta: float = 0.25) -> PayoffTransform:
    """Indicator of [a, inf); Ghat = e^{-i a xi}/(i xi), strip (-inf, 0)."""
    return PayoffTransform(kind="digital_up", a=a, beta=beta, strip=(-math.inf, 0.0),
                           poles=(0.0 + 0.0j,), g0=lambda xi: 1.0 / (1j * xi),
                           value_fn=lambda x: 1.0 if x >= a else 0.0)


def digital_down_transform(a: float, beta: float = -0.25) -> PayoffTransform:
    """Indicator of (-inf, a]; Ghat = -e^{-i a xi}/(i xi), strip (0, inf)."""
    return PayoffTransform(kind="digital_down", a=a, beta=beta, strip=(0.0, math.inf),
                           poles=(0.0 + 0.0j,), g0=lambda xi: -1.0 / (1j * xi),
                           value_fn=lambda x: 1.0 if x <= a else 0.0)


def custom_transform(a: float, beta: float, strip: Tuple[float, float],
                     g0: Callable[[complex], complex],
                     poles: Sequence[complex] = (),
                     value_fn: Optional[Callable[[float], float]] = None) -> PayoffTransform:
    """User payoff given directly by its factored transform.

    Only finitely many poles are supported; payoff classes whose
    continuation has an infinite pole set cannot be priced by the contour
    deformations used here and are rejected.
    """
    poles = tuple(complex(p) for p in poles)
    if len(poles) > 64:
        raise ValueError("pole list too long; only finitely many isolated poles are supported")
    return PayoffTransform(kind="custom", a=a, beta=beta, strip=tuple(strip),
                           poles=poles, g0=g0, value_fn=value_fn)


def ghat_eval(p: PayoffTransform, xi):
    """Evaluate the (continued) transform; errors near a pole."""
    scalar = np.isscalar(xi) or np.asarray(xi).ndim == 0
    z = np.asarray(xi, dtype=complex)
    for pole in p.poles:
        close = np.abs(z - pole) < _POLE_TOL
        if np.any(close):
            raise ZeroDivisionError("xi within %g of the pole at %r" % (_POLE_TOL, pole))
    out = np.exp(-1j * p.a * z) * p.g0(z)
    return complex(out) if scalar else out


def regularity_strip(p: PayoffTransform) -> Tuple[float, float]:
    return p.strip


def payoff_value(p: PayoffTransform, x: float) -> float:
    """Pointwise terminal payoff G(x)."""
    if p.value_fn is None:
        raise ValueError("payoff %r has no pointwise form" % (p.kind,))
    return float(p.value_fn(float(x)))


def decay_constant(p: PayoffTransform, gamma: float = 0.4) -> float:
    """sup of |xi * Ghat0(xi)| sampled on the rays arg xi = +/- gamma and the real line.

    This is the constant in the algebraic decay bound |Ghat0| <= C/|xi| used
    when budgeting truncation points.
    """
    ts = np.geomspace(0.25, 1e4, 160)
    best = 0.0
    for ang in (-gamma, 0.0, gamma):
        z = ts * np.exp(1j * ang)
        vals = np.abs(z * p.g0(z))
        best = max(best, float(np.max(vals[np.isfinite(vals)])))
    return best
