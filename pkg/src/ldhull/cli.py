"""Command-line front end.

Each subcommand reads a plain-text config (``key = value`` per line,
lists comma-separated) merged with command-line flags, runs one pipeline
and writes CSV or JSON. Exit codes: 0 success, 2 configuration error,
3 numerical failure.
"""
from __future__ import annotations

import argparse
import io
import json
import math
import sys
import time

import numpy as np

from . import __version__, dist, geom, lft, mc, radial
from .errors import ConfigError, NumericalError

SCHEMA_VERSION = "1"
COMMANDS = ("profile", "rate", "ld-perimeter", "ld-area", "shape", "geom-check", "examples",
            "spitzer-widom")
DIST_KEYS = ("kind", "mu", "sigma", "atoms", "probs", "radial_law", "radius", "shift",
             "linear_map", "direction", "components")
SCENARIOS = ("example-1.6", "example-2.4", "gaussian-hyperbola", "spitzer-widom-gaussian",
             "perimeter-ld-gaussian", "area-ld-gaussian", "one-dimensional")

CSV_COLUMNS = {
    "profile": ("r", "ibar", "conv_ibar", "n_directions", "dir_angles"),
    "rate": ("vx", "vy", "rate", "ux", "uy", "converged", "iterations"),
    "ld": ("n", "p_hat", "std_err", "log_p_over_n"),
    "shape": ("n", "quantile", "deviation"),
    "geom-check": ("check", "passed", "total"),
    "spitzer-widom": ("n", "trials", "mean_perimeter", "mean_rhs", "perimeter_se", "rhs_se",
                      "analytic"),
    "examples": ("key", "value"),
}

DEFAULTS = {
    "format": "csv",
    "seed": "1",
    "trials": "10000",
    "r_grid": "0:3:0.05",
    "n_grid": "100,150,200,300,400",
    "side": "below-mean",
    "method": "tilted",
    "quantiles": "0.25,0.5,0.75",
    "corpus": "10000",
    "n": "100",
}

# keys each command reads besides the distribution and output keys
COMMAND_KEYS = {
    "profile": ("r_grid",),
    "rate": ("v",),
    "ld-perimeter": ("x", "side", "method", "n_grid", "trials", "seed"),
    "ld-area": ("a", "method", "n_grid", "trials", "seed"),
    "shape": ("event", "x", "a", "side", "n_grid", "trials", "seed", "quantiles"),
    "geom-check": ("corpus", "seed"),
    "examples": ("name", "trials", "seed"),
    "spitzer-widom": ("n", "trials", "seed"),
}
NEEDS_DIST = {"profile", "rate", "ld-perimeter", "ld-area", "shape", "spitzer-widom"}


# -- config ----------------------------------------------------------------

def read_config_file(path):
    cfg = {}
    try:
        with open(path, encoding="utf-8") as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise ConfigError("config", f"cannot read {path}: {exc.strerror}") from None
    for num, raw in enumerate(lines, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError("config", f"line {num}: expected key = value")
        key, value = line.split("=", 1)
        cfg[key.strip().replace("-", "_")] = value.strip()
    if "dist" in cfg:
        cfg.setdefault("kind", cfg.pop("dist"))
    return cfg


def write_config_text(cfg):
    return "".join(f"{k} = {v}\n" for k, v in cfg.items())


def parse_grid(key, text, integer=False):
    """``start:stop:step`` (inclusive) or a comma-separated list."""
    text = str(text).strip()
    try:
        if ":" in text:
            parts = [float(p) for p in text.split(":")]
            if len(parts) != 3 or parts[2] <= 0:
                raise ValueError
            start, stop, step = parts
            count = int(math.floor((stop - start) / step + 1e-9)) + 1
            vals = start + step * np.arange(max(count, 0))
            vals = np.round(vals, 12)
        else:
            vals = np.array([float(p) for p in text.split(",") if p.strip()])
    except ValueError:
        raise ConfigError(key, f"cannot parse grid {text!r}") from None
    if vals.size == 0:
        raise ConfigError(key, "grid is empty")
    if np.any(np.diff(vals) <= 0):
        raise ConfigError(key, "grid must be increasing")
    if integer:
        if np.any(vals != np.round(vals)) or np.any(vals < 1):
            raise ConfigError(key, "grid entries must be positive integers")
        return vals.astype(int)
    return vals


def _float(cfg, key):
    if key not in cfg:
        raise ConfigError(key, "required")
    try:
        return float(cfg[key])
    except ValueError:
        raise ConfigError(key, f"expected a number, got {cfg[key]!r}") from None


def _int(cfg, key, low=1):
    try:
        v = int(cfg[key])
    except (KeyError, ValueError):
        raise ConfigError(key, f"expected an integer, got {cfg.get(key)!r}") from None
    if v < low:
        raise ConfigError(key, f"must be at least {low}")
    return v


def resolve_config(command, file_cfg, flag_cfg):
    """Merge defaults, file and flags (flags win) into a string dict."""
    if command not in COMMANDS:
        raise ConfigError("command", f"unknown command {command!r}")
    cfg = {}
    wanted = set(COMMAND_KEYS[command]) | {"format", "out"}
    if command in NEEDS_DIST:
        wanted |= set(DIST_KEYS)
    for k in ("format",) + COMMAND_KEYS[command]:
        if k in DEFAULTS:
            cfg[k] = DEFAULTS[k]
    for src in (file_cfg, flag_cfg):
        for k, v in src.items():
            if v is None:
                continue
            if k not in wanted:
                raise ConfigError(k, f"not a recognised key for {command}")
            cfg[k] = str(v).strip()
    if cfg.get("format") not in ("csv", "json"):
        raise ConfigError("format", "must be csv or json")
    if command in NEEDS_DIST and "kind" not in cfg:
        raise ConfigError("kind", "a distribution is required (--dist)")
    return {k: cfg[k] for k in sorted(cfg)}


def _model(cfg):
    return dist.parse_distribution({k: cfg[k] for k in DIST_KEYS if k in cfg})


# -- formatting ------------------------------------------------------------

def fmt(x):
    """Nine significant digits, locale independent; inf/nan spelled out."""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    x = float(x) + 0.0  # no "-0"
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return format(x, ".9g")


def fmt_from_log(log_value):
    """Format ``exp(log_value)`` without underflow, e.g. ``1.2345e-400``."""
    if not np.isfinite(log_value):
        return "0" if log_value < 0 else "inf"
    if log_value > -700:
        return fmt(math.exp(log_value))
    l10 = log_value / math.log(10)
    exp10 = math.floor(l10)
    mant = 10 ** (l10 - exp10)
    if float(format(mant, ".9g")) >= 10:
        mant, exp10 = mant / 10, exp10 + 1
    return f"{format(mant, '.9g')}e{exp10:+03d}"


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if not math.isfinite(x):
            return fmt(x)
        return float(format(x, ".9g"))
    return obj


def emit_results(results, fmt_name, path=None, stream=None):
    """Write ``results`` (``{"columns", "rows", "json"}``) as CSV or JSON."""
    buf = io.StringIO()
    if fmt_name == "json":
        json.dump(_jsonable(results["json"]), buf, indent=2, sort_keys=True)
        buf.write("\n")
    else:
        buf.write(",".join(results["columns"]) + "\n")
        for row in results["rows"]:
            buf.write(",".join(v if isinstance(v, str) else fmt(v) for v in row) + "\n")
    text = buf.getvalue()
    if path:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    else:
        (stream or sys.stdout).write(text)
    return text


# -- commands --------------------------------------------------------------

def _angles_text(profile, i):
    if profile.full_circle[i]:
        return "circle"
    return ";".join(fmt(a) for a in profile.directions[i])


def cmd_profile(cfg):
    model = _model(cfg)
    grid = parse_grid("r_grid", cfg["r_grid"])
    if np.any(grid < 0):
        raise ConfigError("r_grid", "radii must be nonnegative")
    prof = radial.radial_min_profile(model, grid)
    conv = radial.conv_radial_min_many(model, grid, prof.values)
    report = radial.detect_jumps_and_convexity(prof)
    rows = [(r, prof.values[i], conv[i], prof.n_directions(i), _angles_text(prof, i))
            for i, r in enumerate(grid)]
    payload = {
        "rows": [dict(zip(CSV_COLUMNS["profile"], row)) for row in rows],
        "convexity": report.to_dict(),
        "mean_radius": prof.mean_radius, "r_min": prof.r_min, "r_max": prof.r_max,
    }
    return CSV_COLUMNS["profile"], rows, payload


def _points(key, text):
    pts = []
    for chunk in str(text).split(";"):
        if chunk.strip():
            try:
                xy = [float(t) for t in chunk.split(",")]
            except ValueError:
                raise ConfigError(key, f"bad point {chunk!r}") from None
            if len(xy) != 2:
                raise ConfigError(key, f"bad point {chunk!r}")
            pts.append(xy)
    if not pts:
        raise ConfigError(key, "no points given")
    return np.array(pts)


def cmd_rate(cfg):
    model = _model(cfg)
    if "v" not in cfg:
        raise ConfigError("v", "required (x,y;x,y;...)")
    pts = _points("v", cfg["v"])
    rows, recs = [], []
    for v in pts:
        res = lft.rate(model, v)
        u = res.maximizer if res.finite else (np.nan, np.nan)
        rows.append((v[0], v[1], res.value, u[0], u[1], res.converged, res.iterations))
        recs.append({"v": v, **res.to_dict()})
    return CSV_COLUMNS["rate"], rows, {"results": recs}


def _ld_rows(est):
    rows = []
    for i, n in enumerate(est.n_grid):
        lp, lse = est.log_p[i], est.log_se[i]
        se_text = fmt_from_log(lp + math.log(lse)) if np.isfinite(lp) and lse > 0 else (
            "0" if np.isfinite(lp) else "nan")
        rows.append((int(n), fmt_from_log(lp), se_text, lp / n))
    return rows


def _ld_payload(est, bracket, plans):
    try:
        fit = est.fit().to_dict()
    except Exception as exc:  # InsufficientCells is reported, not fatal
        fit = {"error": str(exc)}
    return {
        "event": est.event.describe(), "level": est.level, "method": est.method,
        "cells": [dict(zip(CSV_COLUMNS["ld"], r)) | {"log_p": float(est.log_p[i]),
                                                       "hits": int(est.hits[i]),
                                                       "zero_hit": bool(est.zero_hit[i])}
                  for i, r in enumerate(_ld_rows(est))],
        "fit": fit, "theoretical_slope_bracket": bracket,
        "plans": [p.to_dict() for p in plans],
    }


def _perimeter_bracket(model, x, side):
    ibar = float(radial.radial_min_profile(model, [x]).values[0])
    if side == "below-mean":
        return [-ibar, -ibar]
    try:
        conv = radial.conv_radial_min(model, x)
    except Exception:
        conv = np.inf
    return [-ibar, -conv]


def cmd_ld_perimeter(cfg):
    model = _model(cfg)
    x = _float(cfg, "x")
    side = cfg["side"]
    if side not in ("below-mean", "above-mean"):
        raise ConfigError("side", "must be below-mean or above-mean")
    event = mc.Event("perimeter-below" if side == "below-mean" else "perimeter-above", x)
    n_grid = parse_grid("n_grid", cfg["n_grid"], integer=True)
    trials, seed = _int(cfg, "trials"), _int(cfg, "seed", 0)
    plans = []
    if cfg["method"] == "crude":
        est = mc.crude_ld_estimate(model, event, n_grid, trials, seed)
    elif cfg["method"] == "tilted":
        try:
            plans = mc.tilt_plan_segment(model, x, side)
        except ValueError as exc:
            raise ConfigError("x", str(exc)) from None
        est = mc.tilted_ld_curve(model, event, plans, n_grid, trials, seed)
    else:
        raise ConfigError("method", "must be tilted or crude")
    payload = _ld_payload(est, _perimeter_bracket(model, x, side), plans)
    return CSV_COLUMNS["ld"], _ld_rows(est), payload


def cmd_ld_area(cfg):
    model = _model(cfg)
    a = _float(cfg, "a")
    if not a > 0:
        raise ConfigError("a", "must be positive")
    event = mc.Event("area-above", a)
    n_grid = parse_grid("n_grid", cfg["n_grid"], integer=True)
    trials, seed = _int(cfg, "trials"), _int(cfg, "seed", 0)
    plans = []
    if cfg["method"] == "crude":
        est = mc.crude_ld_estimate(model, event, n_grid, trials, seed)
    elif cfg["method"] == "tilted":
        try:
            plans = [mc.tilt_plan_arc(model, a)]
        except ValueError as exc:
            raise ConfigError("kind", str(exc)) from None
        est = mc.tilted_ld_curve(model, event, plans[0], n_grid, trials, seed)
    else:
        raise ConfigError("method", "must be tilted or crude")
    rate = float(radial.radial_min_profile(model, [math.sqrt(2 * math.pi * a)]).values[0])
    payload = _ld_payload(est, [-rate, -rate], plans)
    return CSV_COLUMNS["ld"], _ld_rows(est), payload


def cmd_shape(cfg):
    model = _model(cfg)
    kind = cfg.get("event", "perimeter")
    n_grid = parse_grid("n_grid", cfg["n_grid"], integer=True)
    trials, seed = _int(cfg, "trials"), _int(cfg, "seed", 0)
    qs = parse_grid("quantiles", cfg["quantiles"])
    if np.any((qs <= 0) | (qs >= 1)):
        raise ConfigError("quantiles", "must lie in (0, 1)")
    if kind == "perimeter":
        x, side = _float(cfg, "x"), cfg["side"]
        if side not in ("below-mean", "above-mean"):
            raise ConfigError("side", "must be below-mean or above-mean")
        try:
            plans = mc.tilt_plan_segment(model, x, side)
        except ValueError as exc:
            raise ConfigError("x", str(exc)) from None
        prof = radial.radial_min_profile(model, [x])
        shape = ("segment", x, prof.directions[0], bool(prof.full_circle[0]))
        event = mc.Event("perimeter-below" if side == "below-mean" else "perimeter-above", x)
    elif kind == "area":
        a = _float(cfg, "a")
        try:
            plans = [mc.tilt_plan_arc(model, a)]
        except ValueError as exc:
            raise ConfigError("kind", str(exc)) from None
        shape, event = ("arc", a), mc.Event("area-above", a)
    else:
        raise ConfigError("event", "must be perimeter or area")
    est = mc.tilted_ld_curve(model, event, plans, n_grid, trials, seed, shape=shape)
    table = est.shape_quantiles(qs)
    rows = [(n, q, dev) for n in sorted(table) for q, dev in zip(qs, table[n])]
    payload = {"event": event.describe(), "level": event.level,
               "rows": [dict(zip(CSV_COLUMNS["shape"], r)) for r in rows]}
    return CSV_COLUMNS["shape"], rows, payload


def geom_check(corpus, seed):
    """Length-versus-hull inequalities over random polylines, plus Cauchy-formula fixtures."""
    rng = np.random.default_rng(seed)
    n_ineq1 = n_ineq2 = n_eq_ok = 0
    for _ in range(corpus):
        m = int(rng.integers(2, 201))
        pts = rng.uniform(-10, 10, size=(m, 2))
        if rng.random() < 0.05:  # collinear members exercise the equality case
            t = np.sort(rng.uniform(-10, 10, m)) if rng.random() < 0.5 else rng.uniform(-10, 10, m)
            pts = np.outer(t, rng.normal(size=2))
        length = geom.polyline_length(pts)
        hull = geom.convex_hull(pts)
        per, diam = geom.perimeter(hull), geom.diameter(hull)
        n_ineq1 += length >= per - diam - 1e-9
        n_ineq2 += length >= 0.5 * per - 1e-9
        tight = abs(length - 0.5 * per) <= 1e-9
        n_eq_ok += (not tight) or hull.degeneracy != "full"
    th = np.linspace(0, 2 * np.pi, 360, endpoint=False)
    fixtures = {
        "unit-circle-360gon": (np.c_[np.cos(th), np.sin(th)], 2 * np.pi),
        "unit-square": (np.array([[0, 0], [1, 0], [1, 1], [0, 1.0]]), 4.0),
        "segment-length-2": (np.array([[0, 0], [2, 0.0]]), 4.0),
        "hexagon": (np.c_[np.cos(th[::60]), np.sin(th[::60])], 6.0),
        "triangle-3-4-5": (np.array([[0, 0], [4, 0], [0, 3.0]]), 12.0),
    }
    cauchy_ok = 0
    for pts, exact in fixtures.values():
        cp = geom.cauchy_perimeter(geom.convex_hull(pts), 10_000)
        cauchy_ok += abs(cp - exact) <= 1e-3 * exact
    return [
        ("length>=per-diam", n_ineq1, corpus),
        ("length>=per/2", n_ineq2, corpus),
        ("equality-only-collinear", n_eq_ok, corpus),
        ("cauchy-perimeter-0.1pct", cauchy_ok, len(fixtures)),
    ]


def cmd_geom_check(cfg):
    rows = geom_check(_int(cfg, "corpus"), _int(cfg, "seed", 0))
    payload = {"checks": [dict(zip(CSV_COLUMNS["geom-check"], r)) for r in rows],
               "all_passed": all(p == t for _, p, t in rows)}
    return CSV_COLUMNS["geom-check"], rows, payload


def cmd_spitzer_widom(cfg):
    model = _model(cfg)
    n, trials, seed = _int(cfg, "n"), _int(cfg, "trials"), _int(cfg, "seed", 0)
    sw = mc.spitzer_widom_check(model, n, trials, seed)
    analytic = np.nan if sw.analytic is None else sw.analytic
    row = (n, trials, sw.lhs, sw.rhs, sw.lhs_se, sw.rhs_se, analytic)
    payload = dict(zip(CSV_COLUMNS["spitzer-widom"], row)) | {"difference_se": sw.diff_se}
    return CSV_COLUMNS["spitzer-widom"], [row], payload


# -- named scenarios -------------------------------------------------------

def _one_d_conjugate(model_1d, x):
    """Grid oracle for the conjugate of a scalar cumulant at x."""
    from scipy import optimize
    k = lambda t: float(model_1d.cumulant(np.array([t, 0.0])))  # noqa: E731
    res = optimize.minimize_scalar(lambda t: -(t * x - k(t)), bounds=(-50, 50), method="bounded",
                                   options={"xatol": 1e-12})
    return -res.fun


def scenario(name, trials, seed):
    if name == "example-1.6":
        model = dist.two_atom_line()
        prof = radial.radial_min_profile(model, np.round(np.arange(0, 2.5001, 0.05), 12))
        rep = radial.detect_jumps_and_convexity(prof)
        return {
            "jumps": rep.to_dict()["jumps"], "convexity": rep.to_dict(),
            "rate_at_atoms": {"(1,0)": lft.rate_at_extremal_atom(model, [1, 0]),
                              "(-2,0)": lft.rate_at_extremal_atom(model, [-2, 0])},
            "right_limit_oracle": _one_d_conjugate(model, -1.0),
        }
    if name == "example-2.4":
        model = dist.skewed_three_atom_line()
        prof = radial.radial_min_profile(model, np.round(np.arange(0, 3.0001, 0.05), 12))
        rep = radial.detect_jumps_and_convexity(prof)
        kinks = radial.find_barK_kinks(model, np.linspace(0.05, 5, 100))
        x = 2.3
        return {
            "convexity": rep.to_dict(),
            "kinks": [{"p": k.p, "left": k.left, "right": k.right} for k in kinks],
            "gap_point": {"x": x, "ibar": float(prof.evaluate(np.array([x]))[0][0]),
                          "conv_ibar": radial.conv_radial_min(model, x)},
        }
    if name == "gaussian-hyperbola":
        mean, cov = np.array([-1.0, -1.0]), np.diag([2.0, 1.0])
        model = dist.Gaussian(mean, cov)
        a, b, x0, y0 = radial.hyperbola_params(mean, cov)
        out = []
        for p in (0.5, 1.0, 2.0):
            val, angles, _ = radial.radial_max(model, p)
            pts = p * np.c_[np.cos(angles), np.sin(angles)]
            out.append({"p": p, "kbar": val, "angles": angles,
                        "residuals": radial.gaussian_hyperbola_residual(a, b, x0, y0, pts)})
        return {"params": {"a": a, "b": b, "x0": x0, "y0": y0}, "points": out}
    if name == "spitzer-widom-gaussian":
        sw = mc.spitzer_widom_check(dist.Gaussian([0, 0], np.eye(2)), 100, trials, seed)
        return {"n": 100, "trials": trials, "mean_perimeter": sw.lhs, "mean_rhs": sw.rhs,
                "perimeter_se": sw.lhs_se, "analytic": sw.analytic}
    if name == "perimeter-ld-gaussian":
        model = dist.Gaussian([1, 0], np.eye(2))
        plans = mc.tilt_plan_segment(model, 0.5, "below-mean")
        est = mc.tilted_ld_curve(model, mc.Event("perimeter-below", 0.5), plans,
                                 mc.DEFAULT_N_GRID, trials, seed)
        return _ld_payload(est, [-0.125, -0.125], plans)
    if name == "area-ld-gaussian":
        model = dist.Gaussian([0, 0], np.eye(2))
        plan = mc.tilt_plan_arc(model, 0.05)
        est = mc.tilted_ld_curve(model, mc.Event("area-above", 0.05), plan, (100, 200, 300),
                                 trials, seed)
        return _ld_payload(est, [-math.pi * 0.05] * 2, [plan])
    if name == "one-dimensional":
        model = dist.skewed_three_atom_line()
        xs = np.round(np.arange(0.1, 2.01, 0.1), 12)
        prof = radial.radial_min_profile(model, xs)
        direct = np.minimum(lft.rate_batch(model, np.c_[xs, 0 * xs])[0],
                            lft.rate_batch(model, np.c_[-xs, 0 * xs])[0])
        return {"x": xs, "ibar": prof.values, "min_of_axis_rates": direct,
                "max_abs_difference": float(np.max(np.abs(prof.values - direct)))}
    raise ConfigError("name", f"unknown scenario; choose from {', '.join(SCENARIOS)}")


def _flatten(prefix, obj, out):
    if isinstance(obj, dict):
        for k in sorted(obj):
            _flatten(f"{prefix}.{k}" if prefix else str(k), obj[k], out)
    elif isinstance(obj, (list, tuple, np.ndarray)):
        for i, v in enumerate(obj):
            _flatten(f"{prefix}[{i}]", v, out)
    else:
        out.append((prefix, obj if isinstance(obj, str) or obj is None else obj))
    return out


def cmd_examples(cfg):
    if "name" not in cfg:
        raise ConfigError("name", f"required; one of {', '.join(SCENARIOS)}")
    payload = scenario(cfg["name"], _int(cfg, "trials"), _int(cfg, "seed", 0))
    rows = [(k, "null" if v is None else v) for k, v in _flatten("", _jsonable(payload), [])]
    return CSV_COLUMNS["examples"], rows, payload


HANDLERS = {
    "profile": cmd_profile,
    "rate": cmd_rate,
    "ld-perimeter": cmd_ld_perimeter,
    "ld-area": cmd_ld_area,
    "shape": cmd_shape,
    "geom-check": cmd_geom_check,
    "examples": cmd_examples,
    "spitzer-widom": cmd_spitzer_widom,
}


# -- argument parsing ------------------------------------------------------

def build_parser():
    parser = argparse.ArgumentParser(prog="ldhull", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"ldhull {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="key = value file; flags override it")
        p.add_argument("--format", choices=("csv", "json"))
        p.add_argument("--out", help="output path (default stdout)")
        if name in NEEDS_DIST:
            p.add_argument("--dist", dest="kind", help="gaussian, atoms, rotinv, mixture or line")
            for key in DIST_KEYS[1:]:
                p.add_argument("--" + key.replace("_", "-"), dest=key)
        for key in COMMAND_KEYS[name]:
            p.add_argument("--" + key.replace("_", "-"), dest=key)
    return parser


def run(argv=None, stdout=None, stderr=None):
    """Entry point returning the exit code."""
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    flags = {k: v for k, v in vars(args).items() if k not in ("command", "config")}
    command = args.command
    try:
        file_cfg = read_config_file(args.config) if args.config else {}
        cfg = resolve_config(command, file_cfg, flags)
        started = time.perf_counter()
        columns, rows, payload = HANDLERS[command](cfg)
        results = {
            "columns": columns,
            "rows": rows,
            "json": {"schema_version": SCHEMA_VERSION, "command": command, "config": cfg,
                     "results": payload},
        }
        emit_results(results, cfg["format"], cfg.get("out"), stdout)
    except ConfigError as exc:
        print(f"ldhull: config error: {exc}", file=stderr)
        return 2
    except NumericalError as exc:
        print(f"ldhull {command}: numerical failure ({type(exc).__name__}): {exc}", file=stderr)
        return 3
    except OSError as exc:
        print(f"ldhull: cannot write output: {exc}", file=stderr)
        return 2
    print(f"ldhull {command}: done in {time.perf_counter() - started:.2f}s", file=stderr)
    return 0


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
