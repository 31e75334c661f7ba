"""Command-line front end: config resolution, dispatch, reproducible outputs.

Commands: spectrum | sweep | rabi | semiclassics | escape | distribution.
Configuration comes from an optional JSON file plus flags (flags win); the
resolved config, its hash and the certified basis size go into a '#'-prefixed
metadata header of every CSV so any output can be traced back to its inputs.
Reruns with an identical config produce byte-identical data files; gnuplot
scripts are emitted next to the CSVs on request and reference them by
relative path.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import sys

import numpy as np

from . import __version__
from .errors import ConfigError, NumericError, QuasidriveError
from .fockspace import build_g_parametric, build_g_resonant, eigensolve, truncation_check
from .kinetics import (_lowering, _well_chain, boltzmann_residual, escape_report,
                       stationary)
from .scaling import ResonanceSpec, resonant_sweep_map
from .semiclassics import (action, find_extrema, fourier_components, orbit,
                           orbit_average_q, period, tunneling_exponent)
from .spectroscopy import min_gap, sweep_detuning, write_sweep_csv

COMMANDS = ("spectrum", "sweep", "rabi", "semiclassics", "escape", "distribution")

_DEFAULTS = {
    "kind": "resonant",
    "N": 5,
    "r": 0.5,
    "d": 3.0,
    "d_range": [2.0, 4.0],
    "grid": 201,
    "r_range": [0.1, 0.3],
    "r_points": 5,
    "beta": 1.0 / 27.0,
    "mu": -0.1,
    "lam": 0.025,
    "lambda_list": [0.05, 1.0 / 30.0, 0.025],
    "nbar": 0.0,
    "dim": 0,              # 0 = certify automatically
    "tol": 1e-11,
    "g_points": 10,
    "kmax": 5,
    "out": "out",
    "plot": False,
    "timestamp": False,
}

_FLOAT_FMT = "%.17g"


class RunConfig:
    """Resolved run configuration with per-field provenance."""

    def __init__(self, command, values, provenance):
        if command not in COMMANDS:
            raise ConfigError(f"unknown command {command!r}")
        self.command = command
        self.values = values
        self.provenance = provenance

    def __getattr__(self, name):
        try:
            return self.values[name]
        except KeyError:
            raise AttributeError(name)

    def canonical(self) -> str:
        body = {"command": self.command}
        body.update({k: self.values[k] for k in sorted(self.values)})
        return json.dumps(body, sort_keys=True, separators=(",", ":"))

    def hash(self) -> str:
        return hashlib.sha256(self.canonical().encode()).hexdigest()


def _coerce(key, raw):
    ref = _DEFAULTS[key]
    try:
        if isinstance(ref, bool):
            if isinstance(raw, bool):
                return raw
            if str(raw).lower() in ("1", "true", "yes", "on"):
                return True
            if str(raw).lower() in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        if isinstance(ref, int) and not isinstance(ref, bool):
            return int(raw)
        if isinstance(ref, float):
            return float(raw)
        if isinstance(ref, list):
            if isinstance(raw, str):
                sep = ":" if ":" in raw else ","
                raw = [x for x in raw.split(sep) if x]
            return [float(x) for x in raw]
        return str(raw)
    except (TypeError, ValueError):
        raise ConfigError(f"malformed value for key {key!r}: {raw!r}")


def parse_config(argv=None) -> RunConfig:
    """Resolve command, config file and flags into a RunConfig.

    Precedence: defaults < file values < flags; unknown file keys are
    rejected.  The provenance of every field is recorded.
    """
    parser = argparse.ArgumentParser(
        prog="quasidrive",
        description="quasienergy spectroscopy and escape kinetics of driven "
                    "nonlinear oscillators")
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", metavar="PATH")
    parser.add_argument("--out", metavar="DIR")
    parser.add_argument("--kind", choices=("resonant", "parametric"))
    parser.add_argument("--N", type=int)
    parser.add_argument("--r", type=float)
    parser.add_argument("--d", type=float)
    parser.add_argument("--d-range", dest="d_range", metavar="LO:HI")
    parser.add_argument("--r-range", dest="r_range", metavar="LO:HI")
    parser.add_argument("--grid", type=int)
    parser.add_argument("--beta", type=float)
    parser.add_argument("--mu", type=float)
    parser.add_argument("--lambda", dest="lam", type=float)
    parser.add_argument("--lambda-list", dest="lambda_list", metavar="L1,L2,...")
    parser.add_argument("--nbar", type=float)
    parser.add_argument("--dim", type=int)
    parser.add_argument("--plot", action="store_const", const=True, default=None)
    parser.add_argument("--timestamp", action="store_const", const=True, default=None)
    args = parser.parse_args(argv)

    values = dict(_DEFAULTS)
    provenance = {k: "default" for k in values}

    if args.config is not None:
        try:
            with open(args.config) as fh:
                file_values = json.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config file: {exc}")
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file is not valid JSON: {exc}")
        if not isinstance(file_values, dict):
            raise ConfigError("config file must hold a JSON object")
        for key, raw in file_values.items():
            if key == "command":
                if raw != args.command:
                    raise ConfigError(
                        f"config file names command {raw!r} but {args.command!r} "
                        "was requested")
                continue
            if key not in values:
                raise ConfigError(f"unknown config key {key!r}")
            values[key] = _coerce(key, raw)
            provenance[key] = "file"

    for key in values:
        flag = getattr(args, key, None)
        if flag is not None:
            values[key] = _coerce(key, flag)
            provenance[key] = "flag"

    _validate(args.command, values)
    return RunConfig(args.command, values, provenance)


def _validate(command, v):
    if v["kind"] not in ("resonant", "parametric"):
        raise ConfigError(f"unknown kind {v['kind']!r}")
    if v["N"] < 1:
        raise ConfigError("N must be >= 1")
    if v["r"] < 0:
        raise ConfigError("r must be >= 0")
    if not (0 < v["d_range"][0] < v["d_range"][1]):
        raise ConfigError("d_range must satisfy 0 < lo < hi")
    if v["grid"] < 3:
        raise ConfigError("grid must be >= 3")
    if v["nbar"] < 0:
        raise ConfigError("nbar must be >= 0")
    if v["lam"] <= 0:
        raise ConfigError("lambda must be positive")
    if any(l <= 0 for l in v["lambda_list"]):
        raise ConfigError("lambda_list entries must be positive")
    if v["dim"] < 0:
        raise ConfigError("dim must be >= 0")


def threads_cap() -> int:
    raw = os.environ.get("QUASIDRIVE_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


# ---------------------------------------------------------------------------
# output plumbing
# ---------------------------------------------------------------------------

def _header_lines(config, extra=None):
    lines = [f"# quasidrive {__version__}",
             f"# config_hash = {config.hash()}",
             f"# config = {config.canonical()}"]
    for key, val in (extra or {}).items():
        lines.append(f"# {key} = {val}")
    if config.values.get("timestamp"):
        import datetime
        lines.append(f"# written = {datetime.datetime.now().isoformat()}")
    return lines


def _write_csv(path, config, columns, rows, extra=None):
    with open(path, "w") as fh:
        for line in _header_lines(config, extra):
            fh.write(line + "\n")
        fh.write(",".join(columns) + "\n")
        for row in rows:
            cells = []
            for cell in row:
                if isinstance(cell, str):
                    cells.append(cell)
                elif isinstance(cell, (int, np.integer)):
                    cells.append(str(int(cell)))
                else:
                    cells.append(_FLOAT_FMT % cell)
            fh.write(",".join(cells) + "\n")


def emit_plotscript(csv_path: str, kind: str) -> str:
    """Write a gnuplot script rendering one result CSV; returns its path.

    The script references the CSV by relative path and never embeds data.
    """
    if not os.path.exists(csv_path):
        raise ConfigError(f"result file {csv_path} does not exist")
    base = os.path.basename(csv_path)
    script = csv_path[:-4] + ".gnuplot" if csv_path.endswith(".csv") \
        else csv_path + ".gnuplot"
    common = [
        "set datafile separator ','",
        "set datafile commentschars '#'",
        "set key outside",
    ]
    if kind == "sweep":
        body = [
            "set multiplot layout 2,1",
            "set xlabel 'detuning d'",
            "set ylabel 'quasienergy g'",
            f"plot for [n=0:9] '{base}' using ($2==n?$1:NaN):3 with lines title sprintf('level %d', n)",
            "set ylabel 'susceptibility chi'",
            f"plot for [n=0:9] '{base}' using ($2==n?$1:NaN):4 with lines title sprintf('chi %d', n)",
            "unset multiplot",
        ]
    elif kind == "rabi":
        body = [
            "set logscale xy",
            "set xlabel 'drive ratio r'",
            "set ylabel 'minimal gap (units of V)'",
            f"plot '{base}' using 1:4 with linespoints title 'gap', "
            f"'{base}' using 1:5 with lines title 'weak-drive formula'",
        ]
    elif kind == "semiclassics":
        body = [
            "set multiplot layout 3,1",
            "set xlabel 'g'",
            "set ylabel 'action S'",
            f"plot '{base}' using 1:3 with linespoints title 'S'",
            "set ylabel 'period tau'",
            f"plot '{base}' using 1:4 with linespoints title 'tau'",
            "set ylabel 'orbit average Q'",
            f"plot '{base}' using 1:5 with linespoints title 'Qbar'",
            "unset multiplot",
        ]
    elif kind == "distribution":
        body = [
            "set xlabel 'quasienergy g'",
            "set ylabel 'ln rho'",
            f"plot '{base}' using 2:(log($3)) with points title 'ln rho'",
        ]
    else:  # spectrum
        body = [
            "set xlabel 'state index'",
            "set ylabel 'quasienergy g'",
            f"plot '{base}' using 1:2 with points title 'g_n'",
        ]
    with open(script, "w") as fh:
        fh.write("\n".join(common + body) + "\n")
    return script


# ---------------------------------------------------------------------------
# command implementations
# ---------------------------------------------------------------------------

def _model_matrix(config, dim):
    if config.kind == "resonant":
        return build_g_resonant(config.lam, config.beta, dim)
    return build_g_parametric(config.lam, config.mu, dim)


def _certified_dim(config, k):
    if config.dim:
        return config.dim
    if config.kind == "resonant":
        return truncation_check(build_g_resonant, (config.lam, config.beta),
                                k, config.tol, start=max(2 * k, 16))
    return truncation_check(build_g_parametric, (config.lam, config.mu),
                            k, config.tol, start=max(2 * k, 16))


def _run_spectrum(config, outdir):
    k = 16
    dim = _certified_dim(config, k)
    spec = eigensolve(_model_matrix(config, dim), k)
    rows = [(n, spec.eigenvalues[n], spec.q_mean[n], spec.r2_mean[n],
             int(spec.parity[n])) for n in range(spec.size)]
    path = os.path.join(outdir, "spectrum.csv")
    _write_csv(path, config, ["n", "g_n", "q_mean", "r2_mean", "parity"], rows,
               extra={"dim": dim})
    return [path], "spectrum"


def _run_sweep(config, outdir):
    sweep = sweep_detuning(config.N, config.r, config.d_range, config.grid,
                           dim=config.dim or None)
    path = os.path.join(outdir, "sweep.csv")
    with open(path, "w") as fh:
        for line in _header_lines(config, {"dim": sweep.dim,
                                           "refined_points": sweep.refined_points}):
            fh.write(line + "\n")
        write_sweep_csv(sweep, fh, _FLOAT_FMT)
    return [path], "sweep"


def _run_rabi(config, outdir):
    lo, hi = config.r_range
    rows = []
    center = 0.5 * (config.N + 1)
    for r in np.linspace(lo, hi, config.r_points):
        est = min_gap(config.N, float(r), (center - 0.35, center + 0.35),
                      dim=config.dim or None)
        rows.append((r, est.location, est.gap_g, est.gap_v, est.formula_value))
    slope = np.polyfit(np.log([row[0] for row in rows]),
                       np.log([row[3] for row in rows]), 1)[0]
    path = os.path.join(outdir, "rabi.csv")
    _write_csv(path, config, ["r", "d_min", "gap_g", "gap_v", "formula_v"], rows,
               extra={"fitted_exponent": _FLOAT_FMT % slope, "N": config.N})
    return [path], "rabi"


def _run_semiclassics(config, outdir):
    if config.kind == "resonant":
        geometry = find_extrema("resonant", beta=config.beta)
        if not geometry.bistable:
            raise NumericError("semiclassics sweep needs the bistable regime")
        lo, hi = geometry.g_saddle, geometry.dome_top.g
        sheets = ("dome", "rim")
    else:
        geometry = find_extrema("parametric", mu=config.mu)
        if not geometry.bistable:
            raise NumericError("semiclassics sweep needs |mu| < 1")
        lo, hi = -0.25 * (1.0 + config.mu) ** 2, 0.0
        sheets = ("right",)
    rows = []
    for frac in np.linspace(0.08, 0.92, config.g_points):
        g = lo + frac * (hi - lo)
        for sheet in sheets:
            orb = orbit(geometry, sheet, g)
            fls = [abs(fourier_components(orb, kk)[0])
                   for kk in range(1, config.kmax + 1)]
            try:
                s_tun = tunneling_exponent(geometry, g)
            except NumericError:
                s_tun = float("nan")
            rows.append((g, sheet, action(orb), period(orb),
                         orbit_average_q(orb), *fls, s_tun))
    cols = (["g", "sheet", "S", "tau", "q_avg"]
            + [f"absQ_{kk}" for kk in range(1, config.kmax + 1)] + ["s_tun"])
    path = os.path.join(outdir, "semiclassics.csv")
    _write_csv(path, config, cols, rows)
    return [path], "semiclassics"


def _run_escape(config, outdir):
    param = config.beta if config.kind == "resonant" else config.mu
    report = escape_report(config.kind, param, config.lambda_list,
                           nbar=config.nbar)
    payload = report.as_dict()
    path = os.path.join(outdir, "escape.json")
    with open(path, "w") as fh:
        json.dump({"tool": f"quasidrive {__version__}",
                   "config_hash": config.hash(),
                   "config": json.loads(config.canonical()),
                   "report": payload}, fh, indent=2, sort_keys=True)
        fh.write("\n")
    flat = os.path.join(outdir, "escape.txt")
    with open(flat, "w") as fh:
        for line in _header_lines(config):
            fh.write(line + "\n")
        for key in sorted(payload):
            fh.write(f"{key} = {payload[key]}\n")
    return [path, flat], "escape"


def _run_distribution(config, outdir):
    param = config.beta if config.kind == "resonant" else config.mu
    geometry, spec, labels, well, rates = _well_chain(
        config.kind, param, config.lam, config.nbar)
    dist = stationary(rates)
    rows = [(n, rates.g[n], dist.rho[n], well.label)
            for n in range(rates.size)]
    extra = {"residual": _FLOAT_FMT % dist.residual}
    try:
        extra["affine_fit_residual"] = _FLOAT_FMT % boltzmann_residual(
            rates.g, dist.rho)
    except NumericError:
        pass
    path = os.path.join(outdir, "distribution.csv")
    _write_csv(path, config, ["n", "g_n", "rho_n", "well"], rows, extra=extra)
    return [path], "distribution"


_RUNNERS = {
    "spectrum": _run_spectrum,
    "sweep": _run_sweep,
    "rabi": _run_rabi,
    "semiclassics": _run_semiclassics,
    "escape": _run_escape,
    "distribution": _run_distribution,
}


def run(config: RunConfig) -> int:
    """Execute a resolved configuration; returns the exit code."""
    outdir = config.out
    os.makedirs(outdir, exist_ok=True)
    try:
        paths, plot_kind = _RUNNERS[config.command](config, outdir)
    except NumericError as exc:
        record = {"error": "numeric", "command": config.command,
                  "message": str(exc), "config_hash": config.hash()}
        print(json.dumps(record, sort_keys=True), file=sys.stderr)
        return 2
    if config.plot:
        for path in paths:
            if path.endswith(".csv"):
                emit_plotscript(path, plot_kind)
    for path in paths:
        print(path, file=sys.stderr)
    return 0


def main(argv=None) -> int:
    try:
        config = parse_config(argv)
    except ConfigError as exc:
        print(json.dumps({"error": "config", "message": str(exc)},
                         sort_keys=True), file=sys.stderr)
        return 1
    except SystemExit as exc:
        return 1 if exc.code not in (0, None) else 0
    return run(config)


if __name__ == "__main__":
    sys.exit(main())
