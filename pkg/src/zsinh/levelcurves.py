"""Level curves of Im psi and the integration contours built from them.

A trajectory is a branch of {Im psi(xi) = delta} traced in the right
half-plane; an extended curve glues the trajectory to the imaginary axis
through a connector that crosses the axis orthogonally at i*u and joins
the level set with matching curvature, then mirrors: the whole contour is
parametrized by t with x(t) = t and y(-t) = y(t).  Flattening freezes y
at +/- x_star, which keeps Im psi inside a band (-delta_star, delta_star)
rather than on the exact level.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.interpolate import CubicHermiteSpline, PchipInterpolator
from scipy.optimize import brentq

from .levy import LevyModel, psi_eval, _psi_deriv

__all__ = [
    "TraceFailure",
    "ExtendedCurve",
    "CurvePair",
    "trace_trajectory",
    "build_extended_curve",
    "flatten_curve",
    "strip_width_estimate",
]


class TraceFailure(RuntimeError):
    def __init__(self, msg, xs=None, ys=None):
        super().__init__(msg)
        self.xs = np.asarray(xs) if xs is not None else None
        self.ys = np.asarray(ys) if ys is not None else None


@dataclass
class ExtendedCurve:
    """Symmetric integration contour t -> t + i*y(|t|).

    ``x_nodes``/``y_nodes`` sample y on [0, x_max]; evaluation interpolates
    with a monotone piecewise cubic.  ``flatten_at`` clamps the argument of
    y, producing the flat wings of the truncated variant.
    """

    model: LevyModel
    delta: float
    u: float
    x_nodes: np.ndarray
    y_nodes: np.ndarray
    delta_star: float = 0.1
    flatten_at: Optional[float] = None
    d_curve: float = 0.0
    dy_nodes: Optional[np.ndarray] = None
    connector_end: float = math.inf  # exact level set holds for |t| >= this
    connector_coef: Optional[tuple] = None  # quintic blend below connector_end

    def __post_init__(self):
        self.x_nodes = np.asarray(self.x_nodes, dtype=float)
        self.y_nodes = np.asarray(self.y_nodes, dtype=float)
        if self.dy_nodes is not None:
            # exact slopes known at the nodes: local C^1 cubic, O(h^4)
            self.dy_nodes = np.asarray(self.dy_nodes, dtype=float)
            self._interp = CubicHermiteSpline(self.x_nodes, self.y_nodes,
                                              self.dy_nodes, extrapolate=False)
        else:
            self._interp = PchipInterpolator(self.x_nodes, self.y_nodes,
                                             extrapolate=False)
        self._dinterp = self._interp.derivative()

    @property
    def x_max(self) -> float:
        return float(self.x_nodes[-1])

    def _clamp(self, s):
        cap = self.x_max if self.flatten_at is None else min(self.flatten_at, self.x_max)
        return np.minimum(s, cap)

    def point(self, t):
        """Contour point(s) at parameter t (x = t, y even)."""
        t = np.asarray(t, dtype=float)
        s = self._clamp(np.abs(t))
        if np.any(np.abs(t) > self.x_max + 1e-12) and self.flatten_at is None:
            raise ValueError("parameter beyond the traced range; flatten or retrace")
        y = self._interp(s)
        out = t + 1j * y
        return complex(out) if t.ndim == 0 else out

    def deriv(self, t):
        """dz/dt along the contour."""
        t = np.asarray(t, dtype=float)
        s = self._clamp(np.abs(t))
        slope = self._dinterp(s)
        if self.flatten_at is not None:
            slope = np.where(np.abs(t) >= self.flatten_at, 0.0, slope)
        out = 1.0 + 1j * slope * np.sign(t)
        return complex(out) if t.ndim == 0 else out

    def quad_points(self, t):
        """(points, derivatives) with wing points polished onto the level set.

        The spline keeps positions to ~1e-9 but its derivative kinks at
        every node, which caps a trapezoid rule at algebraic accuracy.
        High-order quadrature needs an analytic path, so wherever the exact
        level set is available the spline value is corrected by Newton on
        Im psi = delta and the slope taken from psi' there; the connector
        cubic and any flat wings are closed forms already and pass through
        unchanged.
        """
        t = np.asarray(t, dtype=float)
        if np.any(np.abs(t) > self.x_max + 1e-12) and self.flatten_at is None:
            raise ValueError("parameter beyond the traced range; flatten or retrace")
        s = self._clamp(np.abs(t))
        y = np.atleast_1d(np.asarray(self._interp(s), dtype=float))
        dy = np.atleast_1d(np.asarray(self._dinterp(s), dtype=float))
        s1 = np.atleast_1d(s)
        sel = s1 >= self.connector_end
        if self.flatten_at is not None:
            sel &= s1 < self.flatten_at
        if np.any(sel):
            xs, ys = s1[sel], y[sel]
            for _ in range(3):
                res = psi_eval(self.model, xs + 1j * ys).imag - self.delta
                dp = _psi_deriv(self.model, xs + 1j * ys)
                step = res / np.where(np.abs(dp.real) < 1e-12, np.inf, dp.real)
                ys = ys - np.clip(step, -0.1, 0.1)
            dp = _psi_deriv(self.model, xs + 1j * ys)
            y[sel] = ys
            dy[sel] = -dp.imag / dp.real
        if self.connector_coef is not None:
            con = s1 < self.connector_end
            if np.any(con):
                y[con] = _connector_val(self.u, self.connector_end,
                                        self.connector_coef, s1[con])
                dy[con] = _connector_slope(self.u, self.connector_end,
                                           self.connector_coef, s1[con])
        if self.flatten_at is not None:
            dy = np.where(np.abs(np.atleast_1d(t)) >= self.flatten_at, 0.0, dy)
        xi = np.atleast_1d(t) + 1j * y
        dxi = 1.0 + 1j * dy * np.sign(np.atleast_1d(t))
        if t.ndim == 0:
            return complex(xi[0]), complex(dxi[0])
        return xi, dxi


@dataclass(frozen=True)
class CurvePair:
    lower: ExtendedCurve
    upper: ExtendedCurve

    def __post_init__(self):
        if not self.lower.u < self.upper.u:
            raise ValueError("lower curve must cross the axis below the upper one")
        if not (self.lower.delta < 0.0 < self.upper.delta):
            raise ValueError("need delta_minus < 0 < delta_plus")


def _corrector(model, x, y, delta, tol, max_iter=14):
    """Newton in y for Im psi(x + i y) = delta; returns (y, ok)."""
    for _ in range(max_iter):
        z = complex(x, y)
        res = psi_eval(model, z).imag - delta
        if abs(res) <= 0.3 * tol:
            return y, True
        dp = _psi_deriv(model, z)
        denom = dp.real  # d(Im psi)/dy
        if abs(denom) < 1e-12 * (1.0 + abs(dp.imag)):
            return y, False
        step = res / denom
        if abs(step) > 1.0 + 0.2 * abs(y):
            return y, False
        y -= step
    return y, abs(psi_eval(model, complex(x, y)).imag - delta) <= tol


def trace_trajectory(model: LevyModel, start: complex, delta: float,
                     x_max: float, tol: float = 1e-10):
    """March the level set Im psi = delta from ``start`` to Re xi = x_max.

    Predictor: dy/dx = -Im psi' / Re psi'.  Corrector: safeguarded Newton
    in y.  The step grows from 0.05 up to max(0.25, 0.02 x) between
    accepted points and halves on corrector failure; persistent failure
    (a fold or a cut) raises TraceFailure carrying the partial samples.
    """
    start = complex(start)
    if abs(psi_eval(model, start).imag - delta) > max(10.0 * tol, 1e-8) * (1.0 + abs(delta)):
        raise ValueError("start point is not on the level set")
    xs = [start.real]
    ys = [start.imag]
    dx = 0.05
    x, y = start.real, start.imag
    while x < x_max:
        dx = min(dx, x_max - x)
        dp = _psi_deriv(model, complex(x, y))
        if abs(dp.real) < 1e-12 * (1.0 + abs(dp.imag)):
            raise TraceFailure("fold point at x=%.6g" % x, xs, ys)
        slope = -dp.imag / dp.real
        ok = False
        while dx >= 1e-6 * max(1.0, x):
            y_try, ok = _corrector(model, x + dx, y + slope * dx, delta, tol)
            if ok:
                break
            dx *= 0.5
        if not ok:
            raise TraceFailure("corrector stalled at x=%.6g" % x, xs, ys)
        x += dx
        y = y_try
        xs.append(x)
        ys.append(y)
        dx = min(1.4 * dx, max(0.25, 0.02 * x))
    return np.asarray(xs), np.asarray(ys)


def _connector_fit(u, x1, y1, s1, c1):
    """Quintic blend coefficients joining i*u to the level curve C^2.

    In the scaled variable xi = x/x1 the blend is
        y = u + b2*xi^2 + b4*xi^4 + b5*xi^5,
    so y'(0) = y'''(0) = 0 (the even mirror through the axis stays smooth)
    and position, slope and curvature all match at x1.  Anything less than
    curvature matching leaves a C^1 junction whose Euler-Maclaurin defect
    floors a trapezoid rule near 1e-8.
    """
    rhs = np.array([y1 - u, s1 * x1, c1 * x1 * x1])
    mat = np.array([[1.0, 1.0, 1.0], [2.0, 4.0, 5.0], [2.0, 12.0, 20.0]])
    return tuple(np.linalg.solve(mat, rhs))


def _connector_val(u, x1, coef, xs):
    b2, b4, b5 = coef
    xi = np.asarray(xs) / x1
    return u + xi * xi * (b2 + xi * xi * (b4 + b5 * xi))


def _connector_slope(u, x1, coef, xs):
    b2, b4, b5 = coef
    xi = np.asarray(xs) / x1
    return xi * (2.0 * b2 + xi * xi * (4.0 * b4 + 5.0 * b5 * xi)) / x1


def _curve_slope(model, x, y):
    """dy/dx of the level set Im psi = const through x + iy."""
    dp = _psi_deriv(model, complex(x, y))
    return -dp.imag / dp.real


def _curve_second(model, x, y, slope):
    """d2y/dx2 of the level set, from psi'' along the curve direction."""
    d1 = _psi_deriv(model, complex(x, y))
    w = _psi_second(model, complex(x, y)) * complex(1.0, slope)
    return -(w.imag * d1.real - d1.imag * w.real) / (d1.real * d1.real)


def build_extended_curve(model: LevyModel, delta: float, u: float,
                         x_max: float, delta_star: float = 0.1,
                         tol: float = 1e-10) -> ExtendedCurve:
    """Trajectory for x >= x0 plus an orthogonal axis connector on [0, x0].

    The connector is the quintic with y(0) = u, y'(0) = y'''(0) = 0 matching
    the traced value, slope and curvature at x0, so the glued curve is C^2,
    crosses the imaginary axis at a right angle and mirrors smoothly.  The
    mirrored half is implied by the even parametrization.
    """
    lo, hi = model.strip
    if not lo < u < hi:
        raise ValueError("u must lie inside the analyticity strip")
    if delta == 0.0:
        raise ValueError("delta must be nonzero")
    if abs(delta) >= delta_star:
        raise ValueError("|delta| must stay below delta_star")

    # near the axis the level set escapes toward the cuts (Im psi -> 0 on iR),
    # so the trace must start at a moderate x0: take the first abscissa whose
    # level-set root admits a connector staying inside the (-d*, d*) band
    half = min(u - lo, hi - u)
    width = 0.45 * half if math.isfinite(half) else 2.0 + abs(u)
    candidates = []
    best_exc = math.inf
    for x_try in np.geomspace(0.05, max(0.2, min(2.0, 0.25 * x_max)), 10):
        root = None
        for w in (0.25 * width, width, 2.0 * width):
            grid = u + np.linspace(-w, w, 81)
            grid = grid[(grid > lo + 1e-9) & (grid < hi - 1e-9)]
            vals = np.array([psi_eval(model, complex(x_try, yy)).imag - delta for yy in grid])
            sign_flip = np.nonzero(np.diff(np.sign(vals)) != 0)[0]
            if sign_flip.size:
                k = sign_flip[np.argmin(np.abs(grid[sign_flip] - u))]
                root = brentq(lambda yy: psi_eval(model, complex(x_try, yy)).imag - delta,
                              grid[k], grid[k + 1], xtol=1e-14)
                break
        if root is None:
            continue
        dp = _psi_deriv(model, complex(x_try, root))
        slope = -dp.imag / dp.real
        coef = _connector_fit(u, x_try, root, slope,
                              _curve_second(model, x_try, root, slope))
        tx = np.linspace(0.0, x_try, 33)[1:]
        ty = _connector_val(u, x_try, coef, tx)
        exc = max(abs(psi_eval(model, complex(a, b)).imag) for a, b in zip(tx, ty))
        best_exc = min(best_exc, exc)
        if exc < delta_star:
            candidates.append((abs(slope), float(x_try), root, coef))
    if not candidates:
        if math.isinf(best_exc):
            raise TraceFailure("no level-set start found near i*%g" % u)
        raise TraceFailure("connector excursion %.3g exceeds the band %.3g" % (best_exc, delta_star))
    # gentlest junction wins: a steep wing start defeats cubic interpolation
    _, x0, y_start, coef = min(candidates)

    xs, ys = trace_trajectory(model, complex(x0, y_start), delta, x_max, tol)

    cx = np.linspace(0.0, x0, 17)[:-1]
    cy = _connector_val(u, x0, coef, cx)
    cdy = _connector_slope(u, x0, coef, cx)

    x_nodes = np.concatenate([cx, xs])
    y_nodes = np.concatenate([cy, ys])
    dy_nodes = np.concatenate([cdy, [_curve_slope(model, a, b) for a, b in zip(xs, ys)]])

    # slopes at the nodes are analytic, so the Hermite cubic interpolation
    # error is local (h^4, maximal at midpoint): bisect intervals until the
    # midpoint reproduces the curve to 1e-9; connector midpoints compare
    # against the blend polynomial itself
    for _ in range(12):
        interp = CubicHermiteSpline(x_nodes, y_nodes, dy_nodes)
        mids = 0.5 * (x_nodes[:-1] + x_nodes[1:])
        bad = []
        for xm in mids:
            if xm > x0:
                ym, ok = _corrector(model, xm, float(interp(xm)), delta, tol)
                if ok and abs(ym - float(interp(xm))) > 1e-9 * (1.0 + abs(ym)):
                    bad.append((xm, ym, _curve_slope(model, xm, ym)))
            else:
                ym = float(_connector_val(u, x0, coef, xm))
                if abs(ym - float(interp(xm))) > 1e-9 * (1.0 + abs(ym)):
                    bad.append((xm, ym, float(_connector_slope(u, x0, coef, xm))))
        if not bad:
            break
        x_nodes = np.concatenate([x_nodes, [b[0] for b in bad]])
        y_nodes = np.concatenate([y_nodes, [b[1] for b in bad]])
        dy_nodes = np.concatenate([dy_nodes, [b[2] for b in bad]])
        order = np.argsort(x_nodes)
        x_nodes, y_nodes, dy_nodes = x_nodes[order], y_nodes[order], dy_nodes[order]

    curve = ExtendedCurve(model=model, delta=delta, u=u,
                          x_nodes=x_nodes, y_nodes=y_nodes,
                          delta_star=delta_star, dy_nodes=dy_nodes,
                          connector_end=float(x0), connector_coef=coef)
    curve.d_curve = strip_width_estimate(curve)
    return curve


def flatten_curve(curve: ExtendedCurve, x_star: float) -> ExtendedCurve:
    """Freeze y beyond |t| = x_star; verify Im psi stays inside the band.

    On the flat wings Im psi drifts off the exact level; the construction
    is only admissible while it remains in (-delta_star, delta_star), which
    is checked by sampling and reported in the error if violated.
    """
    if x_star >= curve.x_max:
        return curve
    if x_star <= 0.0:
        raise ValueError("x_star must be positive")
    y_star = float(curve._interp(x_star))
    ts = np.geomspace(x_star, max(curve.x_max, 10.0 * x_star), 120)
    vals = np.array([psi_eval(curve.model, complex(t, y_star)).imag for t in ts])
    worst = float(np.max(np.abs(vals)))
    if worst >= curve.delta_star:
        raise TraceFailure(
            "flattened wing leaves the band: max |Im psi| = %.4g >= %.4g"
            % (worst, curve.delta_star))
    out = ExtendedCurve(model=curve.model, delta=curve.delta, u=curve.u,
                        x_nodes=curve.x_nodes.copy(), y_nodes=curve.y_nodes.copy(),
                        delta_star=curve.delta_star, flatten_at=float(x_star),
                        dy_nodes=None if curve.dy_nodes is None else curve.dy_nodes.copy(),
                        connector_end=curve.connector_end,
                        connector_coef=curve.connector_coef)
    out.d_curve = min(curve.d_curve, strip_width_estimate(out)) if curve.d_curve else strip_width_estimate(out)
    return out


def _psi_second(model, z, e=1e-5):
    return (_psi_deriv(model, z + e) - _psi_deriv(model, z - e)) / (2.0 * e)


def _critical_points(model: LevyModel):
    """Zeros of psi' found by Newton from a few stock seeds."""
    lo, hi = model.strip
    seeds = [0.0 + 0.0j]
    if math.isfinite(hi):
        seeds += [0.5j * hi, 0.25j * hi]
    if math.isfinite(lo):
        seeds += [0.5j * lo, 0.25j * lo]
    found = []
    for z in seeds:
        zz = complex(z)
        for _ in range(40):
            try:
                f = _psi_deriv(model, zz)
            except (ValueError, ZeroDivisionError):
                break
            if abs(f) < 1e-11:
                if all(abs(zz - w) > 1e-8 for w in found):
                    found.append(zz)
                break
            d2 = _psi_second(model, zz)
            if d2 == 0:
                break
            step = f / d2
            if abs(step) > 2.0:
                break
            zz -= step
    return found


def strip_width_estimate(curve: ExtendedCurve) -> float:
    """Conservative half-width of an analyticity tube around the curve.

    Takes 0.8 times the smallest distance from the sampled curve to the
    spectral cuts and to the detected zeros of psi' (where the level set
    folds and the corrector degenerates).
    """
    m = curve.model
    lo, hi = m.strip
    ts = np.concatenate([-curve.x_nodes[::-1], curve.x_nodes[1:]])
    pts = curve.point(ts)
    x, y = pts.real, pts.imag

    best = math.inf
    if math.isfinite(hi):
        d = np.where(y >= hi, np.abs(x), np.hypot(x, y - hi))
        best = min(best, float(np.min(d)))
    if math.isfinite(lo):
        d = np.where(y <= lo, np.abs(x), np.hypot(x, y - lo))
        best = min(best, float(np.min(d)))
    for z0 in _critical_points(m):
        d = np.hypot(x - z0.real, y - z0.imag)
        best = min(best, float(np.min(d)))
    if not math.isfinite(best):
        best = 1.0
    return 0.8 * best
