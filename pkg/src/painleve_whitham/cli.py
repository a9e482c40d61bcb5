"""Command-line front end.

Every subcommand prints a one-line JSON summary
``{mode, params, seed, status, stop_reason?, metrics}`` on stdout and, with
``--out``, writes its data as CSV or JSON. Exit codes: 0 success, 1 numerical
stop or failed check, 2 invalid configuration (one-line JSON on stderr).
Values from ``--config`` (a JSON object keyed by option name) are overridden
by flags given on the command line.
"""

import argparse
import json
import logging
import math
import os
import sys

import numpy as np

from . import __version__
from .asymptotics import degeneracy_report, theorem2_verify
from .errors import PainleveWhithamError
from .laxpair import (auxiliary_residuals, build_auxiliary, curve_f6, curve_residual, curve_terms,
                      extract_F6, f6_closed_form, f6_coefficient, lax_at, zero_curvature_residual_pvi)
from .ode import OdeState, ThetaParams, integrate, pi_first_integral
from .whitham import (ModulationState, branch_point_residuals, branch_points, build_curve,
                      cycle_averages, pi_whitham_vs_direct, solve_pi_whitham, solve_pvi_whitham)

log = logging.getLogger("painleve_whitham")

EXIT_OK, EXIT_STOP, EXIT_CONFIG = 0, 1, 2

THETA_FIELDS = ("theta0", "theta1", "thetax", "thetainf")
REQUIRED = object()


class ConfigError(Exception):
    pass


# mode -> {option: default}; REQUIRED marks options without a default
MODE_FIELDS = {
    "pi-integrate": {"x0": REQUIRED, "y0": REQUIRED, "dy0": REQUIRED, "x_end": REQUIRED, "bigX": None},
    "pi-whitham": {"X0": REQUIRED, "F0": REQUIRED, "X_end": REQUIRED, "direct": False},
    "pvi-integrate": {"x0": REQUIRED, "y0": REQUIRED, "dy0": REQUIRED, "x_end": REQUIRED},
    "pvi-lax-verify": {"x0": REQUIRED, "y0": REQUIRED, "dy0": REQUIRED, "x_end": REQUIRED,
                       "n_x": 3, "n_z": 4, "z_radius": 3.0, "threshold": 1e-8},
    "pvi-curve": {"X": REQUIRED, "F6": None, "y0": None, "dy0": None, "near_y": None},
    "pvi-modulate": {"X0": REQUIRED, "F0": REQUIRED, "X_end": REQUIRED, "near_y": None, "printed": False},
    "pvi-theorem2": {"x0": 10.0, "offsets": [0.1, 0.5, 1.0], "x_lo": 1e2, "x_hi": 1e4, "dy0": 1.0,
                     "c_max": 10.0},
    "degeneracy": {"X_list": [1e2, 1e3, 1e4, 1e5], "control": False},
}
PVI_MODES = {"pvi-integrate", "pvi-lax-verify", "pvi-curve", "pvi-modulate", "pvi-theorem2", "degeneracy"}
COMMON_DEFAULTS = {"rtol": 1e-10, "atol": 1e-12, "seed": 0, "format": "csv", "out": None}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def _floats(text):
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from exc


def build_parser():
    parser = _Parser(prog="painleve-whitham", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="mode", parser_class=_Parser)
    for mode, fields in MODE_FIELDS.items():
        p = sub.add_parser(mode)
        p.add_argument("--config", default=None)
        p.add_argument("--out", default=None)
        p.add_argument("--format", choices=("csv", "json"), default=None)
        p.add_argument("--rtol", type=float, default=None)
        p.add_argument("--atol", type=float, default=None)
        p.add_argument("--seed", type=int, default=None)
        if mode in PVI_MODES:
            for name in THETA_FIELDS + ("k1", "k2"):
                p.add_argument(f"--{name}", type=float, default=None)
        for name, default in fields.items():
            flag = "--" + name.replace("_", "-")
            if isinstance(default, bool):
                p.add_argument(flag, dest=name, action="store_const", const=True, default=None)
            elif isinstance(default, list):
                p.add_argument(flag, dest=name, type=_floats, default=None)
            elif name == "n_x" or name == "n_z":
                p.add_argument(flag, dest=name, type=int, default=None)
            else:
                p.add_argument(flag, dest=name, type=float, default=None)
    return parser


def _load_config(path):
    if path is None:
        return {}
    try:
        with open(path) as fh:
            data = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path!r}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError("config file must hold a JSON object")
    return data


def parse_config(argv):
    """Parse flags and the optional config file into a flat config dict."""
    args = build_parser().parse_args(argv)
    if args.mode is None:
        raise ConfigError("missing subcommand")
    flags = {k: v for k, v in vars(args).items() if v is not None}
    file_cfg = _load_config(flags.pop("config", None))
    mode = flags.pop("mode")
    if "mode" in file_cfg and file_cfg["mode"] != mode:
        raise ConfigError(f"config mode {file_cfg['mode']!r} contradicts subcommand {mode!r}")
    fields = dict(COMMON_DEFAULTS)
    fields.update(MODE_FIELDS[mode])
    if mode in PVI_MODES:
        fields.update({name: None for name in THETA_FIELDS + ("k1", "k2")})
    unknown = sorted(set(file_cfg) - set(fields) - {"mode"})
    if unknown:
        raise ConfigError(f"unknown config keys for {mode}: {unknown}")
    cfg = {"mode": mode}
    for name, default in fields.items():
        value = flags.get(name, file_cfg.get(name, default))
        if value is REQUIRED:
            raise ConfigError(f"{mode}: missing required option --{name.replace('_', '-')}")
        cfg[name] = value
    for tol in ("rtol", "atol"):
        if not (isinstance(cfg[tol], (int, float)) and cfg[tol] > 0):
            raise ConfigError(f"{tol} must be positive, got {cfg[tol]!r}")
    if cfg["format"] not in ("csv", "json"):
        raise ConfigError(f"format must be csv or json, got {cfg['format']!r}")
    if mode in PVI_MODES:
        cfg["params"] = _theta_params(cfg)
    _check_ranges(cfg)
    return cfg


def _theta_params(cfg):
    th = [cfg[name] for name in THETA_FIELDS]
    k1, k2 = cfg["k1"], cfg["k2"]
    if any(v is None for v in th[:3]):
        raise ConfigError("missing theta0, theta1 or thetax")
    try:
        if th[3] is None:
            if k1 is None or k2 is None:
                raise ConfigError("give thetainf or both k1 and k2")
            return ThetaParams.from_k(th[0], th[1], th[2], k1, k2)
        params = ThetaParams(*th)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    for name, given in (("k1", k1), ("k2", k2)):
        derived = getattr(params, name)
        if given is not None and abs(given - derived) > 1e-12 * max(1.0, abs(derived)):
            raise ConfigError(f"{name}={given!r} contradicts the thetas ({name}={derived!r})")
    return params


def _check_ranges(cfg):
    mode = cfg["mode"]
    if "x0" in cfg and "x_end" in cfg and cfg["x0"] == cfg["x_end"]:
        raise ConfigError("x_end must differ from x0")
    if "X0" in cfg and "X_end" in cfg and cfg["X0"] == cfg["X_end"]:
        raise ConfigError("X_end must differ from X0")
    if mode == "pvi-theorem2" and not (cfg["x0"] < cfg["x_lo"] < cfg["x_hi"]):
        raise ConfigError("need x0 < x_lo < x_hi")
    if mode == "degeneracy" and len(cfg["X_list"]) < 2:
        raise ConfigError("X_list needs at least two values")
    if mode == "pvi-curve" and cfg["F6"] is None and (cfg["y0"] is None or cfg["dy0"] is None):
        raise ConfigError("pvi-curve needs --F6 or both --y0 and --dy0")
    if mode == "pvi-lax-verify" and (cfg["n_x"] < 1 or cfg["n_z"] < 1):
        raise ConfigError("n_x and n_z must be positive")


# --- output helpers --------------------------------------------------------------

def _clean(obj):
    """JSON-safe copy: numpy scalars to Python, non-finite floats to null."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_clean(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def _dumps(obj):
    return json.dumps(_clean(obj), sort_keys=False, allow_nan=False)


def _write(cfg, csv_text, json_obj):
    if cfg["out"] is None:
        return
    with open(cfg["out"], "w", newline="") as fh:
        if cfg["format"] == "csv" and csv_text is not None:
            fh.write(csv_text)
        else:
            fh.write(_dumps(json_obj) + "\n")


def _rows_csv(header, rows):
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join("" if v is None else repr(float(v)) if isinstance(v, (float, np.floating))
                              else str(v) for v in row))
    return "\n".join(lines) + "\n"


def _traj_json(traj):
    return {"x": traj.x, "y": traj.y, "dy": traj.dy, "stop_reason": traj.stop_reason}


def _mod_json(mod):
    return {"X": mod.bigX, "F": mod.F, "ybar": mod.ybar, "y2bar": mod.y2bar, "period": mod.period,
            "stop_reason": mod.stop_reason}


# --- runners -----------------------------------------------------------------------

def _run_pi_integrate(cfg):
    init = OdeState(cfg["x0"], cfg["y0"], cfg["dy0"])
    traj = integrate("pi", init, cfg["x_end"], bigX=cfg["bigX"], rtol=cfg["rtol"], atol=cfg["atol"])
    frozen = cfg["bigX"]
    F_start = pi_first_integral(init, frozen if frozen is not None else init.x)
    end = traj.final
    F_end = pi_first_integral(end, frozen if frozen is not None else end.x)
    metrics = {"x_reached": end.x, "n_steps": len(traj.x) - 1, "F1_start": F_start, "F1_end": F_end,
               "F1_drift": F_end - F_start, "frozen_X": frozen}
    _write(cfg, traj.to_csv(), _traj_json(traj))
    return traj.stop_reason, metrics, traj.completed


def _run_pi_whitham(cfg):
    mod = solve_pi_whitham(ModulationState(cfg["X0"], cfg["F0"]), cfg["X_end"], rtol=cfg["rtol"], atol=cfg["atol"])
    metrics = {"X_reached": mod.bigX[-1], "F_end": mod.F[-1], "n_steps": len(mod.bigX) - 1}
    ok = mod.stop_reason == "completed"
    if cfg["direct"]:
        cmp = pi_whitham_vs_direct(cfg["X0"], cfg["X_end"], cfg["F0"], rtol=min(cfg["rtol"], 1e-10),
                                   atol=cfg["atol"])
        metrics["direct"] = cmp
        ok = ok and cmp.get("status") == "completed"
    _write(cfg, mod.to_csv(), _mod_json(mod))
    return mod.stop_reason, metrics, ok


def _run_pvi_integrate(cfg):
    params = cfg["params"]
    init = OdeState(cfg["x0"], cfg["y0"], cfg["dy0"])
    traj = integrate("pvi", init, cfg["x_end"], params, rtol=cfg["rtol"], atol=cfg["atol"])
    end = traj.final
    metrics = {"x_reached": end.x, "y_end": end.y, "dy_end": end.dy, "n_steps": len(traj.x) - 1}
    _write(cfg, traj.to_csv(), _traj_json(traj))
    return traj.stop_reason, metrics, traj.completed


def _run_pvi_lax_verify(cfg):
    params = cfg["params"]
    rng = np.random.default_rng(cfg["seed"])
    init = OdeState(cfg["x0"], cfg["y0"], cfg["dy0"])
    traj = integrate("pvi", init, cfg["x_end"], params, rtol=min(cfg["rtol"], 1e-12), atol=min(cfg["atol"], 1e-14))
    if not traj.completed:
        return traj.stop_reason, {"message": traj.message, "x_reached": traj.final.x}, False
    lo, hi = sorted((init.x, traj.final.x))
    margin = 0.05 * (hi - lo)
    xs = np.sort(rng.uniform(lo + margin, hi - margin, cfg["n_x"]))
    zs = cfg["z_radius"] * np.exp(2j * np.pi * rng.uniform(0.0, 1.0, cfg["n_z"]))
    zc = zero_curvature_residual_pvi(traj, params, xs, zs)

    aux = build_auxiliary(init, params, check=False)
    aux_res = auxiliary_residuals(aux, init.x, params)
    mats = lax_at(init, params)[1]
    fit = extract_F6(mats, params)
    true_coef = f6_coefficient(aux, params, init.x)
    printed = f6_closed_form(aux, params, init.x)
    F6 = curve_f6(true_coef, init.x, params)
    scale = float(np.sum(np.abs(curve_terms(init, params, F6))))
    curve_rel = abs(curve_residual(init, params, F6)) / scale
    metrics = {
        "zero_curvature_max": zc.max_residual,
        "auxiliary_max_abs": max(abs(v) for v in aux_res.values()),
        "f6_fit_vs_coefficient_rel": abs(fit - true_coef) / max(1.0, abs(true_coef)),
        "f6_fit_vs_closed_form_rel": abs(fit - printed) / max(1.0, abs(printed)),
        "curve_residual_rel": curve_rel,
        "threshold": cfg["threshold"],
        "x_samples": xs,
        "z_samples": [[z.real, z.imag] for z in zs],
    }
    checked = ("zero_curvature_max", "auxiliary_max_abs", "f6_fit_vs_coefficient_rel", "curve_residual_rel")
    exceeded = [k for k in checked if not metrics[k] <= cfg["threshold"]]
    metrics["exceeded"] = exceeded
    csv_text = _rows_csv(["x", "z_re", "z_im", "residual_norm"],
                         [(r["x"], r["z_re"], r["z_im"], r["residual_norm"]) for r in zc.records])
    _write(cfg, csv_text, {"metrics": metrics, "records": zc.records})
    return ("residual_exceeds_threshold" if exceeded else "completed"), metrics, not exceeded


def _run_pvi_curve(cfg):
    params = cfg["params"]
    X = cfg["X"]
    F6 = cfg["F6"]
    if F6 is None:
        aux = build_auxiliary(OdeState(X, cfg["y0"], cfg["dy0"]), params, check=False)
        F6 = curve_f6(f6_coefficient(aux, params, X), X, params)
    curve = build_curve(X, F6, params)
    bp = branch_points(curve)
    rows = []
    for lo, hi, s in bp.intervals:
        avg = cycle_averages(curve, interval=(lo, hi))
        rows.append({"lo": lo, "hi": hi, "sign": s, "ybar": avg.ybar, "y2bar": avg.y2bar, "period": avg.period})
    selected = cycle_averages(curve, near_y=cfg["near_y"])
    metrics = {"F6": F6, "branch_points": bp.roots,
               "branch_point_residuals": branch_point_residuals(curve, bp.roots),
               "selected": {"lo": selected.lo, "hi": selected.hi, "sign": selected.sign, "ybar": selected.ybar,
                            "y2bar": selected.y2bar, "period": selected.period}}
    csv_text = _rows_csv(["lo", "hi", "sign", "ybar", "y2bar", "period"],
                         [tuple(r.values()) for r in rows])
    _write(cfg, csv_text, {"metrics": metrics, "intervals": rows})
    return "completed", metrics, True


def _run_pvi_modulate(cfg):
    mod = solve_pvi_whitham(ModulationState(cfg["X0"], cfg["F0"]), cfg["params"], cfg["X_end"],
                            near_y=cfg["near_y"], rtol=cfg["rtol"], atol=cfg["atol"], printed=cfg["printed"])
    metrics = {"X_reached": mod.bigX[-1], "F_end": mod.F[-1], "ybar_end": mod.ybar[-1],
               "n_steps": len(mod.bigX) - 1, "message": mod.message}
    _write(cfg, mod.to_csv(), _mod_json(mod))
    return mod.stop_reason, metrics, mod.stop_reason == "completed"


def _run_pvi_theorem2(cfg):
    rep = theorem2_verify(cfg["params"], x0=cfg["x0"], offsets=tuple(cfg["offsets"]),
                          x_range=(cfg["x_lo"], cfg["x_hi"]), dy0=cfg["dy0"], rtol=cfg["rtol"],
                          atol=cfg["atol"], c_max=cfg["c_max"])
    report = rep.as_dict()
    rows = [(m.offset, m.status, m.stop_reason, m.x_reached, m.ratio_end, m.fitted_C) for m in rep.members]
    csv_text = _rows_csv(["offset", "status", "stop_reason", "x_reached", "ratio_end", "fitted_C"], rows)
    _write(cfg, csv_text, report)
    metrics = {"pass": rep.passed, "theorem_applies": rep.theorem_applies,
               "members": [{"offset": m.offset, "status": m.status, "ratio_end": m.ratio_end,
                            "fitted_C": m.fitted_C} for m in rep.members]}
    return ("completed" if rep.passed else "no_member_passed"), metrics, rep.passed


def _run_degeneracy(cfg):
    rep = degeneracy_report(cfg["X_list"], cfg["params"], control=cfg["control"])
    report = rep.as_dict()
    rows = [(e.bigX, e.deviation) for e in rep.entries]
    _write(cfg, _rows_csv(["X", "deviation"], rows), report)
    metrics = {"slope": rep.slope, "violation": rep.violation, "fully_degenerate": rep.fully_degenerate,
               "deviations": rep.deviations}
    ok = not rep.violation or cfg["control"]
    return ("completed" if not rep.violation else "degeneracy_violation"), metrics, ok


RUNNERS = {
    "pi-integrate": _run_pi_integrate,
    "pi-whitham": _run_pi_whitham,
    "pvi-integrate": _run_pvi_integrate,
    "pvi-lax-verify": _run_pvi_lax_verify,
    "pvi-curve": _run_pvi_curve,
    "pvi-modulate": _run_pvi_modulate,
    "pvi-theorem2": _run_pvi_theorem2,
    "degeneracy": _run_degeneracy,
}


def _params_echo(cfg):
    if "params" in cfg:
        return cfg["params"].as_dict()
    return {k: cfg[k] for k in MODE_FIELDS[cfg["mode"]]}


def run(cfg, stdout=None):
    """Execute a parsed config; returns the exit code."""
    stdout = stdout or sys.stdout
    summary = {"mode": cfg["mode"], "params": _params_echo(cfg), "seed": cfg["seed"]}
    try:
        stop_reason, metrics, ok = RUNNERS[cfg["mode"]](cfg)
    except PainleveWhithamError as exc:
        log.info("numerical stop: %s", exc)
        stop_reason, metrics, ok = type(exc).__name__, {"message": str(exc)}, False
    summary["status"] = "ok" if ok else "numerical_stop"
    summary["stop_reason"] = stop_reason
    summary["metrics"] = metrics
    stdout.write(_dumps(summary) + "\n")
    return EXIT_OK if ok else EXIT_STOP


def _configure_logging():
    level = os.environ.get("PW_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")


def main(argv=None):
    _configure_logging()
    try:
        cfg = parse_config(sys.argv[1:] if argv is None else argv)
    except ConfigError as exc:
        sys.stderr.write(json.dumps({"error": "config", "message": str(exc)}) + "\n")
        return EXIT_CONFIG
    log.debug("config: %s", cfg)
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
