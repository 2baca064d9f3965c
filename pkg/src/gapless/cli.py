"""Command-line front end: ``gapless {landscape,gap,coherence}``.

Settings come from built-in defaults, then an optional ``key = value`` config
file (``--config``), then command-line flags; later sources win. Output goes
to ``--out``, else ``$GAPLESS_OUTPUT_DIR``, else ``./gapless-out``.

Exit codes: 0 success, 2 configuration error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import subprocess
import sys
import tempfile
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from . import __version__, bogoliubov, cnumber, dynamics

OUTPUT_ENV = "GAPLESS_OUTPUT_DIR"
EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3
MODELS = ("dirichlet3", "dirichlet_full", "periodic3", "toy", "external")


class ConfigError(ValueError):
    pass


class NumericFailure(RuntimeError):
    def __init__(self, msg, N=None, lam=None):
        where = ", ".join(f"{k}={v!r}" for k, v in (("N", N), ("lambda", lam)) if v is not None)
        super().__init__(f"{msg} ({where})" if where else msg)


# --------------------------------------------------------------------------
# configuration

DEFAULTS: dict[str, dict[str, Any]] = {
    "landscape": {"model": "dirichlet3", "lambdas": "1.0:5.0:0.5", "n_marginal": 400, "seed": 0},
    "gap": {"model": "dirichlet3", "lambdas": "1.75:3.00:0.05", "k_max": 3, "include_critical": True,
            "seed": 0},
    "coherence": {"model": "dirichlet3", "lambdas": "1.90:2.30:0.01", "N": "60", "f1": 1.0 / 3000.0,
                  "n_max": 12000, "method": "penalty", "mu": 100.0, "windows": "0.4,0.375,0.225",
                  "fit": False, "fix_lambda_lm": None, "traces": False, "seed": 0},
}

ALLOWED_MODELS = {"landscape": ("dirichlet3",), "gap": ("dirichlet3", "periodic3"),
                  "coherence": ("dirichlet3",)}


def read_config(path: str | Path) -> dict[str, str]:
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    out = {}
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    for no, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{no}: expected key = value")
        k, v = (s.strip() for s in line.split("=", 1))
        out[k.replace("-", "_")] = v
    return out


def parse_grid(spec: str | float, integer: bool = False) -> list:
    """``start:stop:step`` (inclusive stop) or a comma list; must be strictly increasing."""
    s = str(spec).strip()
    try:
        if ":" in s:
            a, b, h = (float(v) for v in s.split(":"))
            if h <= 0:
                raise ConfigError(f"grid step must be positive: {s}")
            n = int(math.floor((b - a) / h + 1e-9)) + 1
            vals = [round(a + i * h, 12) for i in range(n)]
        else:
            vals = [float(v) for v in s.split(",") if v.strip()]
    except ValueError as exc:
        raise ConfigError(f"bad grid {s!r}") from exc
    if not vals:
        raise ConfigError(f"empty grid {s!r}")
    if any(b <= a for a, b in zip(vals, vals[1:])):
        raise ConfigError(f"grid must be strictly increasing: {s!r}")
    if integer:
        if any(v != int(v) or v < 1 for v in vals):
            raise ConfigError(f"N grid must hold positive integers: {s!r}")
        return [int(v) for v in vals]
    return vals


def _as_bool(v) -> bool:
    if isinstance(v, bool):
        return v
    s = str(v).strip().lower()
    if s in ("1", "true", "yes", "on"):
        return True
    if s in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"not a boolean: {v!r}")


def resolve(command: str, file_cfg: dict[str, str], flags: dict[str, Any]) -> dict[str, Any]:
    """Merge defaults, config file and flags, then validate and convert."""
    cfg = dict(DEFAULTS[command])
    unknown = set(file_cfg) - set(cfg) - {"output"}
    if unknown:
        raise ConfigError(f"unknown config keys for {command}: {sorted(unknown)}")
    cfg.update(file_cfg)
    cfg.update({k: v for k, v in flags.items() if v is not None})
    if cfg["model"] not in MODELS:
        raise ConfigError(f"unknown model {cfg['model']!r}; choose from {MODELS}")
    if cfg["model"] not in ALLOWED_MODELS[command]:
        raise ConfigError(f"{command} supports models {ALLOWED_MODELS[command]}, not {cfg['model']!r}")
    try:
        cfg["seed"] = int(cfg["seed"])
        cfg["lambdas"] = parse_grid(cfg["lambdas"])
        if command == "landscape":
            cfg["n_marginal"] = int(cfg["n_marginal"])
            if cfg["n_marginal"] < 2:
                raise ConfigError("n_marginal must be >= 2")
        elif command == "gap":
            cfg["k_max"] = int(cfg["k_max"])
            cfg["include_critical"] = _as_bool(cfg["include_critical"])
        else:
            cfg["N"] = parse_grid(cfg["N"], integer=True)
            cfg["f1"] = float(cfg["f1"])
            cfg["n_max"] = int(cfg["n_max"])
            cfg["mu"] = float(cfg["mu"])
            cfg["windows"] = [float(v) for v in str(cfg["windows"]).split(",")]
            cfg["fit"] = _as_bool(cfg["fit"])
            cfg["traces"] = _as_bool(cfg["traces"])
            if cfg["fix_lambda_lm"] not in (None, "", "none"):
                cfg["fix_lambda_lm"] = float(cfg["fix_lambda_lm"])
            else:
                cfg["fix_lambda_lm"] = None
            if cfg["method"] not in ("penalty", "shifted", "lagrange", "window"):
                raise ConfigError(f"unknown state method {cfg['method']!r}")
            if len(cfg["windows"]) != 3 or min(cfg["windows"]) <= 0:
                raise ConfigError("windows needs three positive values")
            if cfg["f1"] <= 0 or cfg["n_max"] < 1:
                raise ConfigError("f1 and n_max must be positive")
            if cfg["fit"] and len(cfg["N"]) < 3:
                raise ConfigError("fit needs at least three N values")
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from exc
    return cfg


# --------------------------------------------------------------------------
# output helpers


def atomic_write(path: Path, text: str) -> None:
    """Write to a temporary file in the same directory, then rename over ``path``."""
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _cell(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def csv_text(header: Sequence[str], rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_cell(v) for v in r])
    return buf.getvalue()


def _jsonable(v):
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, (np.floating, float)):
        v = float(v)
        return v if math.isfinite(v) else None
    if isinstance(v, np.integer):
        return int(v)
    if isinstance(v, np.ndarray):
        return _jsonable(v.tolist())
    return v


def json_text(doc: dict) -> str:
    # json emits floats with repr, which round-trips
    return json.dumps(_jsonable(doc), indent=2, sort_keys=True) + "\n"


def version_string() -> str:
    """``git describe``-style version, falling back to the package version."""
    here = Path(__file__).resolve().parent
    try:
        out = subprocess.run(["git", "describe", "--tags", "--always", "--dirty"], cwd=here,
                             capture_output=True, text=True, timeout=5)
        if out.returncode == 0 and out.stdout.strip():
            return f"{__version__}-g{out.stdout.strip()}"
    except (OSError, subprocess.SubprocessError):
        pass
    return __version__


def output_dir(flag: str | None, cfg_value: str | None = None) -> Path:
    return Path(flag or os.environ.get(OUTPUT_ENV) or cfg_value or "gapless-out")


def _label(v: float) -> str:
    return repr(float(v)).replace(".", "p").replace("-", "m")


# --------------------------------------------------------------------------
# commands


def cmd_landscape(cfg: dict, out: Path) -> dict:
    """Marginal curves, minima, inflection points and both critical couplings."""
    results = cnumber.ground_state_scan(cfg["lambdas"], n_marginal=cfg["n_marginal"])
    rows, mrows = [], []
    for r in results:
        gx, ge = r.global_minimum[0].x, r.global_minimum[1]
        for p, e in r.minima:
            rows.append([r.lam, p.x, p.theta, p.delta2, p.delta3, e, int(p.x == gx and e == ge)])
        for x, e in r.marginal_curve:
            mrows.append([r.lam, x, e])
    atomic_write(out / "minima.csv", csv_text(["lambda", "x", "theta", "delta2", "delta3", "energy", "global"], rows))
    atomic_write(out / "marginal.csv", csv_text(["lambda", "x", "energy"], mrows))
    irows = [[r.lam, r.inflection[0].x, r.inflection[0].theta, r.inflection[0].delta3, r.inflection[1]]
             for r in results if r.inflection is not None]
    atomic_write(out / "inflection.csv", csv_text(["lambda", "x", "theta", "delta3", "detM"], irows))
    lam_lm, p_lm = cnumber.find_lambda_lm_dirichlet()
    lam_gs = cnumber.find_lambda_gs()
    return {"lambda_gs": lam_gs, "lambda_lm": lam_lm, "inflection_at_lambda_lm": p_lm.to_dict(),
            "n_lambda": len(results), "files": ["minima.csv", "marginal.csv", "inflection.csv"]}


def cmd_gap(cfg: dict, out: Path) -> dict:
    """Smallest Bogoliubov energy and ``det M`` per coupling."""
    lams = list(cfg["lambdas"])
    if cfg["model"] == "periodic3":
        crit = cnumber.find_lambda_lm_periodic()
        if cfg["include_critical"] and crit not in lams and lams[0] <= crit <= lams[-1]:
            lams = sorted(lams + [crit])
        pts = []
        for lam in lams:
            q = bogoliubov.periodic_quadratic(lam, cfg["k_max"])
            try:
                res = bogoliubov.symplectic_diagonalize(q)
                pts.append(bogoliubov.GapPoint(lam, res.gap, q.det_m(), True))
            except bogoliubov.UnstableExpansion:
                pts.append(bogoliubov.GapPoint(lam, math.nan, q.det_m(), False))
    else:
        crit, p_lm = cnumber.find_lambda_lm_dirichlet()
        pts = bogoliubov.dirichlet_gap_curve(lams)
        if cfg["include_critical"] and lams[0] <= crit <= lams[-1]:
            pts.append(bogoliubov.dirichlet_gap_at(p_lm, crit))
            pts.sort(key=lambda g: g.lam)
    rows = [[g.lam, g.gap, g.det_m, g.stable] for g in pts]
    atomic_write(out / "gap.csv", csv_text(["lambda", "gap", "detM", "stable"], rows))
    stable = [g for g in pts if g.stable]
    return {"lambda_critical": crit, "n_points": len(pts), "n_stable": len(stable),
            "min_gap": min((g.gap for g in stable), default=None), "files": ["gap.csv"]}


def _coherence_job(args):
    N, lam, cfg = args
    try:
        pt, tr = dynamics.coherence_point(lam, N, f1=cfg["f1"], n_max=cfg["n_max"], method=cfg["method"],
                                          mu=cfg["mu"], windows=tuple(cfg["windows"]), return_trace=True)
    except (dynamics.ConstraintError, cnumber.NoStationaryPoint, ValueError) as exc:
        return (N, lam, None, str(exc))
    trace = tr.n2_rel if cfg["traces"] else None
    return (N, lam, (pt.x_inf, pt.f_mean, pt.t_coh, tr.times[1] - tr.times[0], trace), None)


def cmd_coherence(cfg: dict, out: Path, threads: int = 1) -> dict:
    """``t_coh(lambda)`` scans per N, the refined argmax and an optional scaling fit."""
    jobs = [(N, lam, cfg) for N in cfg["N"] for lam in cfg["lambdas"]]
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as ex:
            results = list(ex.map(_coherence_job, jobs))
    else:
        results = [_coherence_job(j) for j in jobs]
    results.sort(key=lambda r: (r[0], r[1]))
    for N, lam, res, err in results:
        if res is None:
            raise NumericFailure(f"slow-state construction failed: {err}", N=N, lam=lam)
    files, peaks = [], []
    for N in cfg["N"]:
        mine = [r for r in results if r[0] == N]
        lams = [r[1] for r in mine]
        tc = [r[2][2] for r in mine]
        name = f"tcoh_N{N}.csv"
        atomic_write(out / name, csv_text(["lambda", "x_inf", "f_mean", "t_coh"],
                                          [[r[1], r[2][0], r[2][1], r[2][2]] for r in mine]))
        files.append(name)
        lam_n = dynamics.lambda_at_max(lams, tc)
        peaks.append({"N": N, "lambda_N": lam_n, "t_coh_max": max(tc),
                      "peak_to_median": max(tc) / float(np.median(tc))})
        if cfg["traces"]:
            for r in mine:
                dt, tr = r[2][3], r[2][4]
                tname = f"trace_N{N}_lam{_label(r[1])}.csv"
                atomic_write(out / tname, csv_text(["t", "n2_rel"], ((i * dt, v) for i, v in enumerate(tr))))
                files.append(tname)
    atomic_write(out / "lambda_N.csv", csv_text(["N", "lambda_N"], [[p["N"], p["lambda_N"]] for p in peaks]))
    files.append("lambda_N.csv")
    summary: dict[str, Any] = {"peaks": peaks, "files": files}
    if cfg["fit"]:
        try:
            fit = dynamics.fit_lambda_scaling([(p["N"], p["lambda_N"]) for p in peaks],
                                              lambda_lm=cfg["fix_lambda_lm"])
        except dynamics.FitError as exc:
            raise NumericFailure(str(exc)) from exc
        atomic_write(out / "fit.json", json_text(fit.to_dict()))
        files.append("fit.json")
        summary["fit"] = fit.to_dict()
    return summary


COMMANDS = {"landscape": cmd_landscape, "gap": cmd_gap, "coherence": cmd_coherence}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="gapless", description=__doc__.split("\n\n")[0])
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key = value settings file")
    common.add_argument("--out", help=f"output directory (default ${OUTPUT_ENV} or ./gapless-out)")
    common.add_argument("--seed", type=int, help="recorded for reproducibility; all pipelines are deterministic")
    common.add_argument("--threads", type=int, default=1, help="worker processes for independent jobs")
    common.add_argument("--model", help="model name")
    common.add_argument("--lambdas", help="coupling grid, start:stop:step or comma list")
    sub = ap.add_subparsers(dest="command", required=True)
    p = sub.add_parser("landscape", parents=[common], help="c-number landscape minima and critical couplings")
    p.add_argument("--n-marginal", dest="n_marginal", type=int)
    p = sub.add_parser("gap", parents=[common], help="Bogoliubov gap and det M against the coupling")
    p.add_argument("--k-max", dest="k_max", type=int, help="ring modes |k| <= k_max (periodic3)")
    p.add_argument("--no-critical", dest="include_critical", action="store_const", const=False,
                   help="do not insert the critical coupling into the grid")
    p = sub.add_parser("coherence", parents=[common], help="coherence-time scans and the scaling fit")
    p.add_argument("--N", dest="N", help="particle numbers, comma list or start:stop:step")
    p.add_argument("--f1", type=float)
    p.add_argument("--n-max", dest="n_max", type=int)
    p.add_argument("--method", help="slow-state construction: penalty, shifted, lagrange or window")
    p.add_argument("--mu", type=float, help="penalty weight (starting value for penalty)")
    p.add_argument("--windows", help="relative window half-widths dn1,dn2,dn3")
    p.add_argument("--fit", action="store_const", const=True)
    p.add_argument("--fix-lambda-lm", dest="fix_lambda_lm", type=float)
    p.add_argument("--traces", action="store_const", const=True, help="write one n2(t) CSV per (N, lambda)")
    return ap


def main(argv: Sequence[str] | None = None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    started = time.time()
    flags = {k: v for k, v in vars(args).items()
             if k not in ("command", "config", "out", "threads")}
    try:
        file_cfg = read_config(args.config) if args.config else {}
        out_cfg = file_cfg.pop("output", None)
        cfg = resolve(args.command, file_cfg, flags)
        if args.threads < 1:
            raise ConfigError("--threads must be >= 1")
        out = output_dir(args.out, out_cfg)
    except ConfigError as exc:
        print(f"gapless: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        if args.command == "coherence":
            result = cmd_coherence(cfg, out, threads=args.threads)
        else:
            result = COMMANDS[args.command](cfg, out)
    except NumericFailure as exc:
        print(f"gapless: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (cnumber.NoStationaryPoint, bogoliubov.UnstableExpansion, dynamics.FitError,
            dynamics.ConstraintError, ArithmeticError) as exc:
        print(f"gapless: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    summary = {"command": args.command, "config": cfg, "version": version_string(),
               "result": result, "started": started, "wall_seconds": time.time() - started}
    atomic_write(out / "summary.json", json_text(summary))
    print(f"gapless {args.command}: wrote {out / 'summary.json'}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
