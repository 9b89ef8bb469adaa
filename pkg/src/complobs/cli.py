"""Batch runner: random-state certificate sweeps, named scenarios and
parameter sweeps, written as CSV or JSON tables.

Exit codes: 0 success, 1 configuration error, 2 some row reports
``holds=false``, 3 I/O error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import os
import sys
import tempfile
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .numerics import max_dim
from .scenarios import SCENARIOS, get_scenario
from .states import haar_random_state
from .theorems import CERT_TOL, analyze

log = logging.getLogger("complobs")

COMMANDS = ("verify-thm1", "verify-thm2", "duality", "counterexample", "sweep", "scenario")
COLUMNS = (
    "trial",
    "param",
    "theorem",
    "eps_z",
    "eps_x",
    "bound",
    "distance",
    "holds",
    "margin",
    "solver_gap_z",
    "solver_gap_x",
    "p_secure_z",
    "p_secure_x",
    "decoupling_distance",
    "hashing_rate",
    "status",
    "wall_ms",
)

EXIT_OK, EXIT_CONFIG, EXIT_VIOLATION, EXIT_IO = 0, 1, 2, 3


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    command: str
    dims: tuple[int, int, int] = (2, 2, 2)
    trials: int = 1
    seed: int = 0
    tol: float = CERT_TOL
    scenario: str | None = None
    params: dict[str, str] = field(default_factory=dict)
    out: str | None = None
    format: str = "csv"
    theorem: int = 1
    plot: str | None = None
    timing: bool = False
    jobs: int = 1

    def validate(self) -> None:
        if self.command not in COMMANDS:
            raise ConfigError(f"unknown command {self.command!r}; choose from {', '.join(COMMANDS)}")
        if len(self.dims) != 3 or any(d < 2 for d in self.dims):
            raise ConfigError(f"--dims needs three dimensions, each at least 2; got {self.dims}")
        da, db, dr = self.dims
        # largest object built per trial is the recovered state on A, D, C, B, R
        if da**3 * db * dr > max_dim():
            raise ConfigError(
                f"dims {self.dims} need dimension {da**3 * db * dr} > limit {max_dim()} "
                "(raise COMPLOBS_MAX_DIM to allow)"
            )
        if self.trials < 1:
            raise ConfigError(f"--trials must be at least 1, got {self.trials}")
        if not 0 <= self.seed < 2**64:
            raise ConfigError("--seed must be a 64-bit unsigned integer")
        if not (self.tol > 0 and math.isfinite(self.tol)):
            raise ConfigError(f"--tol must be positive, got {self.tol}")
        if self.format not in ("csv", "json"):
            raise ConfigError(f"--format must be csv or json, got {self.format!r}")
        if self.theorem not in (1, 2):
            raise ConfigError(f"--theorem must be 1 or 2, got {self.theorem}")
        if self.jobs < 1:
            raise ConfigError("--jobs must be at least 1")
        if self.command in ("scenario", "sweep"):
            if not self.scenario:
                raise ConfigError(f"{self.command} needs a scenario name")
            if self.scenario not in SCENARIOS:
                raise ConfigError(f"unknown scenario {self.scenario!r}; choose from {sorted(SCENARIOS)}")
            known = SCENARIOS[self.scenario].parameters
            unknown = set(self.params) - set(known)
            if unknown:
                raise ConfigError(
                    f"scenario {self.scenario!r} has no parameters {sorted(unknown)}; known: {sorted(known)}"
                )
        if self.command == "sweep":
            swept = [k for k, v in self.params.items() if ":" in v]
            if len(swept) != 1:
                raise ConfigError("sweep needs exactly one parameter given as name=start:stop:step")
        for key, value in self.params.items():
            try:
                if ":" in value and self.command == "sweep":
                    sweep_values(value)
                else:
                    float(value)
            except ValueError as exc:
                raise ConfigError(f"bad value for parameter {key!r}: {value!r} ({exc})") from None


def sweep_values(spec: str) -> list[float]:
    """``start:stop:step`` with both ends included."""
    parts = spec.split(":")
    if len(parts) != 3:
        raise ValueError("expected start:stop:step")
    start, stop, step = map(float, parts)
    if step <= 0 or stop < start:
        raise ValueError("need step > 0 and stop >= start")
    n = int(round((stop - start) / step)) + 1
    values = [round(start + i * step, 12) for i in range(n)]
    return [min(v, stop) for v in values]


def fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, str):
        return value
    return format(float(value), ".12g")


def _row_from_analysis(trial, param, theorem, a, command) -> dict:
    cert = a.thm2 if theorem == 2 else a.thm1
    holds = cert.holds
    margin = cert.margin
    if command == "duality":
        holds = holds and a.duality.passes
        margin = a.duality.margin
    zr, xr = a.thm1.detail["guess_z"], a.thm1.detail["guess_x"]
    return {
        "trial": trial,
        "param": param,
        "theorem": theorem,
        "eps_z": cert.eps_z,
        "eps_x": cert.eps_x,
        "bound": cert.bound,
        "distance": cert.achieved_distance,
        "holds": bool(holds),
        "margin": margin,
        "solver_gap_z": max(zr.gap, 0.0),
        "solver_gap_x": max(xr.gap, 0.0),
        "p_secure_z": a.p_secure_z,
        "p_secure_x": a.p_secure_x,
        "decoupling_distance": a.decoupling,
        "hashing_rate": a.hashing,
        "status": "ok",
    }


def _failed_row(trial, param, theorem, exc) -> dict:
    log.warning("trial %s failed: %s", trial, exc)
    row = {c: None for c in COLUMNS}
    row.update(trial=trial, param=param, theorem=theorem, status="failed")
    return row


def _job(args) -> dict:
    trial, scenario_name, overrides, param, cfg = args
    theorem = 2 if cfg.command in ("verify-thm2", "duality") else cfg.theorem
    start = time.perf_counter()
    try:
        if scenario_name is None:
            psi = haar_random_state(list(zip(("A", "B", "R"), cfg.dims)), cfg.seed, trial)
        else:
            psi = get_scenario(scenario_name).state(**overrides)
        row = _row_from_analysis(trial, param, theorem, analyze(psi, tol=cfg.tol), cfg.command)
    except Exception as exc:  # a bad trial is flagged, the run continues
        row = _failed_row(trial, param, theorem, exc)
    row["wall_ms"] = (time.perf_counter() - start) * 1000 if cfg.timing else None
    return row


def build_jobs(cfg: RunConfig) -> list[tuple]:
    """``(trial, scenario name or None, overrides, swept value, cfg)`` per row."""
    if cfg.command in ("verify-thm1", "verify-thm2", "duality"):
        return [(i, None, {}, None, cfg) for i in range(cfg.trials)]
    name = "counterexample" if cfg.command == "counterexample" else cfg.scenario
    fixed = {k: float(v) for k, v in cfg.params.items() if ":" not in v}
    if cfg.command == "sweep":
        key, spec = next((k, v) for k, v in cfg.params.items() if ":" in v)
        return [(i, name, {**fixed, key: v}, v, cfg) for i, v in enumerate(sweep_values(spec))]
    return [(0, name, fixed, None, cfg)]


def run(cfg: RunConfig) -> list[dict]:
    """Compute all rows, in trial order."""
    cfg.validate()
    jobs = build_jobs(cfg)
    if cfg.jobs > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=cfg.jobs) as pool:
            return list(pool.map(_job, jobs))
    return [_job(j) for j in jobs]


def summarize(rows: list[dict]) -> dict:
    margins = [r["margin"] for r in rows if r["status"] == "ok"]
    return {
        "rows": len(rows),
        "failed": sum(r["status"] != "ok" for r in rows),
        "violations": sum(r["holds"] is False for r in rows),
        "min_margin": float(fmt(min(margins))) if margins else None,
        "max_margin": float(fmt(max(margins))) if margins else None,
    }


def render(rows: list[dict], fmt_name: str) -> str:
    if fmt_name == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(COLUMNS)
        for r in rows:
            writer.writerow([fmt(r.get(c)) for c in COLUMNS])
        return buf.getvalue()
    records = []
    for r in rows:
        rec = {}
        for c in COLUMNS:
            v = r.get(c)
            if v is None or isinstance(v, (str, bool, np.bool_)):
                rec[c] = bool(v) if isinstance(v, np.bool_) else v
            elif isinstance(v, (int, np.integer)):
                rec[c] = int(v)
            else:
                rec[c] = float(fmt(v))
        records.append(rec)
    return json.dumps(records, indent=1) + "\n"


def _atomic_write(path: str, text: str) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".complobs-", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def emit_plot_data(rows: list[dict], prefix: str) -> list[str]:
    """Two-column files ``<prefix>.bound.csv`` and ``<prefix>.distance.csv``.

    The x column is the swept parameter when present, the trial index otherwise.
    """
    ok = [r for r in rows if r.get("status") == "ok"]
    if not ok:
        log.warning("no completed rows; plot data not written")
        return []
    xname = "param" if all(r.get("param") is not None for r in ok) else "trial"
    paths = []
    for column in ("bound", "distance"):
        lines = [f"{xname},{column}"] + [f"{fmt(r[xname])},{fmt(r[column])}" for r in ok]
        path = f"{prefix}.{column}.csv"
        _atomic_write(path, "\n".join(lines) + "\n")
        paths.append(path)
    return paths


def _parse_params(items: list[str]) -> dict[str, str]:
    out = {}
    for item in items or []:
        if "=" not in item:
            raise ConfigError(f"parameter {item!r} must look like name=value")
        key, value = item.split("=", 1)
        out[key.strip()] = value.strip()
    return out


def _parse_dims(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(x) for x in text.split(","))
    except ValueError:
        raise ConfigError(f"--dims must be comma-separated integers, got {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="complobs", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--tol", type=float, default=CERT_TOL, help="certificate tolerance")
        p.add_argument("--out", help="output file (stdout if omitted)")
        p.add_argument("--format", choices=("csv", "json"), default=None)
        p.add_argument("--plot", metavar="PREFIX", help="also write two-column plot files")
        p.add_argument("--timing", action="store_true", help="fill wall_ms (breaks byte-for-byte determinism)")
        p.add_argument("--jobs", type=int, default=1)
        p.add_argument("-v", "--verbose", action="store_true")

    for name in ("verify-thm1", "verify-thm2", "duality"):
        p = sub.add_parser(name, help=f"{name} on Haar-random states")
        p.add_argument("--dims", default="2,2,2", help="dA,dB,dR")
        p.add_argument("--trials", type=int, default=1)
        p.add_argument("--seed", type=int, default=0)
        common(p)
    p = sub.add_parser("counterexample", help="the y-basis GHZ state")
    p.add_argument("--theorem", type=int, default=1)
    common(p)
    p = sub.add_parser("scenario", help="one named scenario")
    p.add_argument("--name", required=True, choices=sorted(SCENARIOS))
    p.add_argument("--param", action="append", default=[], metavar="NAME=VALUE")
    p.add_argument("--theorem", type=int, default=1)
    common(p)
    p = sub.add_parser("sweep", help="one scenario over a parameter range")
    p.add_argument("--scenario", required=True)
    p.add_argument("--param", action="append", default=[], metavar="NAME=START:STOP:STEP")
    p.add_argument("--theorem", type=int, default=1)
    common(p)
    return parser


def config_from_args(ns: argparse.Namespace) -> RunConfig:
    fmt_name = ns.format
    if fmt_name is None:
        fmt_name = "json" if ns.out and ns.out.endswith(".json") else "csv"
    return RunConfig(
        command=ns.command,
        dims=_parse_dims(getattr(ns, "dims", "2,2,2")),
        trials=getattr(ns, "trials", 1),
        seed=getattr(ns, "seed", 0),
        tol=ns.tol,
        scenario=getattr(ns, "name", None) or getattr(ns, "scenario", None),
        params=_parse_params(getattr(ns, "param", [])),
        out=ns.out,
        format=fmt_name,
        theorem=getattr(ns, "theorem", 1),
        plot=ns.plot,
        timing=ns.timing,
        jobs=ns.jobs,
    )


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    logging.basicConfig(level=logging.INFO if ns.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    try:
        cfg = config_from_args(ns)
        cfg.validate()
    except (ConfigError, ValueError) as exc:
        print(f"complobs: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    rows = run(cfg)
    text = render(rows, cfg.format)
    try:
        if cfg.out:
            _atomic_write(cfg.out, text)
        else:
            sys.stdout.write(text)
        if cfg.plot:
            emit_plot_data(rows, cfg.plot)
    except OSError as exc:
        print(f"complobs: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    summary = summarize(rows)
    print(json.dumps(summary), file=sys.stderr)
    return EXIT_VIOLATION if summary["violations"] else EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
