"""Command-line front end: price, benchmark, trace, verify.

Configs are YAML with sections model/payoff/request/engine.  Price output
is a JSON record, benchmark and trace emit CSV.  Exit codes: 0 ok,
2 config/validation error, 3 numerical failure.  All floats are printed
with 17 significant digits.
"""

from __future__ import annotations

import json
import math
import os
import sys

import click
import numpy as np
import yaml
from mpmath import mp

from .contours import SinhXiContour
from .levelcurves import build_extended_curve
from .levy import (make_kobol, make_mixture, make_nts, make_quadratic,
                   psi_eval)
from .oracles import oracle_hardy_numeric, oracle_zinv_series
from .payoffs import (call_transform, digital_down_transform,
                      digital_up_transform, put_transform)
from .pricing import PricingRequest, price_barrier, price_european
from .wh import WHContext, factor_identity_residual
from .zinv import (TransformEvaluator, choose_sinh_params, choose_trap_params,
                   gain_factor, invert_sinh, sinh_invert_mp,
                   sinh_nodes_empirical, trap_invert_mp, trap_nodes_empirical)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3

_CONFIG_ERRORS = (ValueError, TypeError, KeyError, FileNotFoundError,
                  IsADirectoryError, yaml.YAMLError)
_NUMERICAL_ERRORS = (ArithmeticError, RuntimeError)


def _fmt(v: float) -> str:
    return format(float(v), ".17g")


def _fail(kind: str, exc: BaseException, code: int):
    sys.stderr.write(json.dumps({"error": kind, "detail": str(exc) or repr(exc)}) + "\n")
    sys.exit(code)


def _load_config(path: str) -> dict:
    with open(path, "r") as fh:
        cfg = yaml.safe_load(fh)
    if not isinstance(cfg, dict):
        raise ValueError("config root must be a mapping")
    return cfg


def _build_model(cfg: dict):
    kind = cfg["kind"]
    if kind == "kobol":
        return make_kobol(float(cfg["c_plus"]), float(cfg["c_minus"]),
                          float(cfg["nu_plus"]), float(cfg["nu_minus"]),
                          float(cfg["lambda_minus"]), float(cfg["lambda_plus"]),
                          mu=float(cfg.get("mu", 0.0)))
    if kind == "nts":
        return make_nts(float(cfg["delta_s"]), float(cfg["alpha_s"]),
                        float(cfg["beta_s"]), float(cfg["nu_s"]),
                        mu=float(cfg.get("mu", 0.0)))
    if kind == "quadratic":
        return make_quadratic(float(cfg["scale"]), mu=float(cfg.get("mu", 0.0)))
    if kind == "mixture":
        return make_mixture(_build_model(cfg["comp0"]), _build_model(cfg["comp1"]),
                            float(cfg["a0"]))
    raise ValueError("unsupported model kind %r" % (kind,))


def _build_payoff(cfg: dict):
    kind = cfg["kind"]
    if kind == "put":
        extra = {"beta": float(cfg["beta"])} if "beta" in cfg else {}
        return put_transform(float(cfg["strike"]), **extra)
    if kind == "call":
        extra = {"beta": float(cfg["beta"])} if "beta" in cfg else {}
        return call_transform(float(cfg["strike"]), **extra)
    if kind == "digital_up":
        extra = {"beta": float(cfg["beta"])} if "beta" in cfg else {}
        return digital_up_transform(float(cfg["a"]), **extra)
    if kind == "digital_down":
        extra = {"beta": float(cfg["beta"])} if "beta" in cfg else {}
        return digital_down_transform(float(cfg["a"]), **extra)
    raise ValueError("unsupported payoff kind %r" % (kind,))


def _write_out(text: str, out: str | None):
    if out:
        with open(out, "w") as fh:
            fh.write(text)
    else:
        click.echo(text, nl=False)


@click.group()
def main():
    """Sinh-accelerated Z-inversion pricer."""


@main.command("price")
@click.option("--config", "config_path", required=True, type=str)
@click.option("--out", "out_path", default=None, type=str)
@click.option("--threads", default=None, type=int)
@click.option("--eps", default=None, type=float)
def cmd_price(config_path, out_path, threads, eps):
    """Price one contract from a config; JSON record out."""
    try:
        cfg = _load_config(config_path)
        model = _build_model(cfg["model"])
        payoff = _build_payoff(cfg["payoff"])
        rcfg = cfg["request"]
        ecfg = cfg.get("engine", {}) or {}
        request = PricingRequest(
            model=model, payoff=payoff,
            n=int(rcfg["n"]), q0=float(rcfg["q0"]), x=float(rcfg["x"]),
            h=(float(rcfg["h"]) if "h" in rcfg and rcfg["h"] is not None else None),
            eps=(eps if eps is not None else float(rcfg.get("eps", 1e-8))),
            mode=rcfg.get("mode", "auto"),
            M=(float(ecfg["M"]) if "M" in ecfg and ecfg["M"] is not None else None),
            threads=(threads if threads is not None
                     else int(ecfg.get("threads", os.cpu_count() or 1))))
    except _CONFIG_ERRORS as exc:
        _fail("config", exc, EXIT_CONFIG)
    try:
        res = price_barrier(request) if request.h is not None else price_european(request)
    except _CONFIG_ERRORS as exc:
        _fail("validation", exc, EXIT_CONFIG)
    except _NUMERICAL_ERRORS as exc:
        _fail("numerical", exc, EXIT_NUMERICAL)
    record = ('{"price": %s, "achieved_error_estimate": %s, "q_nodes_used": %d, '
              '"inner_nodes_avg": %s, "wall_time": %s}\n'
              % (_fmt(res.price), _fmt(res.error_estimate), res.q_nodes_used,
                 _fmt(res.inner_nodes_avg), _fmt(res.wall_time)))
    _write_out(record, out_path)
    sys.exit(EXIT_OK)


# ---------------------------------------------------------------------------
# benchmark


def _transform_suite():
    """Reference transforms with closed-form coefficients."""
    return {
        "pole_one": (
            lambda q: 1.0 / (1.0 - q),
            lambda q: 1 / (1 - q),
            lambda n: mp.mpf(1),
        ),
        "two_pole": (
            lambda q: 1.0 / ((1.0 - q) * (1.0 - q / 3.0)),
            lambda q: 1 / ((1 - q) * (1 - q / 3)),
            lambda n: (3 - mp.mpf(3) ** (-n)) / 2,
        ),
        "geometric": (
            lambda q: 1.0 / (1.0 - 0.5 * q),
            lambda q: 1 / (1 - q / 2),
            lambda n: mp.mpf(2) ** (-n),
        ),
    }


_BENCH_HEADER = ("n,M,eps,N_trap_predicted,N_trap_measured,N_sinh_predicted,"
                 "N_sinh_measured,K_predicted,K_measured,err_trap,err_sinh")


@main.command("benchmark")
@click.option("--config", "config_path", required=True, type=str)
@click.option("--out", "out_path", default=None, type=str)
@click.option("--eps", default=1e-15, type=float)
def cmd_benchmark(config_path, out_path, eps):
    """Trapezoid-vs-sinh node counts over an (n, M, eps) grid; CSV out."""
    try:
        cfg = _load_config(config_path)
        bcfg = cfg["benchmark"]
        name = bcfg.get("transform", "pole_one")
        suite = _transform_suite()
        if name not in suite:
            raise ValueError("unknown transform %r (have: %s)"
                             % (name, ", ".join(sorted(suite))))
        rows = bcfg["rows"]
        if not isinstance(rows, list) or not rows:
            raise ValueError("benchmark.rows must be a non-empty list")
    except _CONFIG_ERRORS as exc:
        _fail("config", exc, EXIT_CONFIG)
    v_fl, v_mp, exact_fn = suite[name]
    lines = [_BENCH_HEADER]
    try:
        for row in rows:
            n = int(row["n"])
            m_val = float(row.get("M", 23.0))
            row_eps = float(row.get("eps", eps))
            tp = choose_trap_params(row_eps, n, m_val)
            ev = TransformEvaluator(eval=v_fl, gamma=0.0)
            sp = choose_sinh_params(ev, row_eps, n, m_val)
            with mp.workdps(40):
                exact = exact_fn(n)
                n_trap = trap_nodes_empirical(v_mp, exact, row_eps, n, m_val)
                n_sinh = sinh_nodes_empirical(v_mp, exact, sp, n, row_eps)
                scale = max(mp.fabs(exact), mp.mpf(1))
                err_trap = float(mp.fabs(trap_invert_mp(v_mp, n, tp.r, n_trap)
                                         - exact) / scale)
                err_sinh = float(mp.fabs(sinh_invert_mp(v_mp, n, sp.contour, n_sinh)
                                         - exact) / scale)
            lines.append(",".join([
                str(n), _fmt(m_val), _fmt(row_eps),
                str(tp.N), str(n_trap),
                str(sp.predicted_terms), str(n_sinh),
                _fmt(gain_factor(row_eps, n, m_val)),
                _fmt(n_trap / n_sinh),
                _fmt(err_trap), _fmt(err_sinh)]))
    except _NUMERICAL_ERRORS as exc:
        _fail("numerical", exc, EXIT_NUMERICAL)
    _write_out("\n".join(lines) + "\n", out_path)
    sys.exit(EXIT_OK)


# ---------------------------------------------------------------------------
# trace


@main.command("trace")
@click.option("--config", "config_path", required=True, type=str)
@click.option("--out", "out_path", default=None, type=str)
def cmd_trace(config_path, out_path):
    """Dump a traced level curve as CSV (t, re, im, im_psi_residual)."""
    try:
        cfg = _load_config(config_path)
        model = _build_model(cfg["model"])
        tcfg = cfg["trace"]
        delta = float(tcfg["delta"])
        u = float(tcfg["u"])
        x_max = float(tcfg["x_max"])
        delta_star = float(tcfg.get("delta_star", 0.1))
        tol = float(tcfg.get("tol", 1e-10))
    except _CONFIG_ERRORS as exc:
        _fail("config", exc, EXIT_CONFIG)
    try:
        curve = build_extended_curve(model, delta, u, x_max,
                                     delta_star=delta_star, tol=tol)
    except _NUMERICAL_ERRORS as exc:
        _fail("numerical", exc, EXIT_NUMERICAL)
    lines = ["t,re,im,im_psi_residual"]
    for xv, yv in zip(curve.x_nodes, curve.y_nodes):
        resid = float(psi_eval(model, complex(xv, yv)).imag) - delta
        lines.append(",".join([_fmt(xv), _fmt(xv), _fmt(yv), _fmt(resid)]))
    _write_out("\n".join(lines) + "\n", out_path)
    sys.exit(EXIT_OK)


# ---------------------------------------------------------------------------
# verify


def _suite_wh_identity():
    models = [
        ("kobol", make_kobol(1.0, 1.0, 0.5, 0.5, -8.0, 8.0)),
        ("nts", make_nts(1.0, 2.0, 0.5, 1.0)),
    ]
    qs = [0.3, 0.7, 0.95, 0.6 * np.exp(0.4j)]
    xi = np.linspace(-8.0, 8.0, 41) + 0.6j
    lower = SinhXiContour(omega1=0.2, b=1.0, omega=0.0)
    upper = SinhXiContour(omega1=1.0, b=1.0, omega=0.0)
    lines, ok = [], True
    for label, model in models:
        worst = 0.0
        for q in qs:
            ctx = WHContext(model=model, q=complex(q), contour_minus=lower,
                            contour_plus=upper)
            worst = max(worst, factor_identity_residual(ctx, xi))
        good = worst <= 1e-9
        ok = ok and good
        lines.append("%s  %s: max residual %s over %d q x %d xi"
                     % ("PASS" if good else "FAIL", label, _fmt(worst),
                        len(qs), xi.size))
    return ok, lines


def _suite_hardy():
    r = 1.0 - 1e-6
    val = oracle_hardy_numeric(r)
    ratio = val / (-2.0 * math.log(1e-6))
    good = 0.95 <= ratio <= 1.05
    lines = ["%s  hardy: H(%s) = %s, ratio to -2 ln(1-r) = %s (window [0.95, 1.05])"
             % ("PASS" if good else "FAIL", _fmt(r), _fmt(val), _fmt(ratio))]
    if not good:
        lines.append("      note: H(r) + 2 ln(1-r) tends to the constant 2 ln 8"
                     " = %s, so the ratio approaches 1 + 2 ln 8 / (-2 ln(1-r))"
                     " = %s at this r; the windowed form above ignores the"
                     " additive constant" % (_fmt(2 * math.log(8.0)),
                                             _fmt(1 + 2 * math.log(8.0)
                                                  / (-2 * math.log(1e-6)))))
    return good, lines


def _series_value(name: str, n: int) -> float:
    v_fl = _transform_suite()[name][0]
    ev = TransformEvaluator(eval=v_fl, gamma=0.0)
    return invert_sinh(ev, n).real


def _suite_zinv_series():
    checks = [
        ("geometric n=3", _series_value("geometric", 3),
         oracle_zinv_series("geometric", 3)),
        ("two_pole n=50", _series_value("two_pole", 50),
         oracle_zinv_series("two_pole", 50)),
    ]
    lines, ok = [], True
    for label, got, want in checks:
        rel = abs(got - want) / max(abs(want), 1e-300)
        good = rel <= 1e-12
        ok = ok and good
        lines.append("%s  %s: rel err %s" % ("PASS" if good else "FAIL",
                                             label, _fmt(rel)))
    return ok, lines


_SUITES = {
    "wh-identity": _suite_wh_identity,
    "hardy": _suite_hardy,
    "zinv-series": _suite_zinv_series,
}


@main.command("verify")
@click.argument("suite")
def cmd_verify(suite):
    """Run a named oracle-vs-engine suite and report pass/fail."""
    fn = _SUITES.get(suite)
    if fn is None:
        _fail("config", ValueError("unknown suite %r (have: %s)"
                                   % (suite, ", ".join(sorted(_SUITES)))),
              EXIT_CONFIG)
    try:
        ok, lines = fn()
    except _NUMERICAL_ERRORS as exc:
        _fail("numerical", exc, EXIT_NUMERICAL)
    for line in lines:
        click.echo(line)
    sys.exit(EXIT_OK if ok else EXIT_NUMERICAL)


if __name__ == "__main__":
    main()
