"""Command line: one subcommand per experiment, JSON config with flag overrides.

Exit codes: 0 success, 2 invalid input or failed validation, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import math
import os
import sys
import time
from pathlib import Path
from typing import Any, Sequence

from . import experiments as ex
from .diophantine import ApproximationFunction, CombinatorialBudget, NoAdmissibleRotation
from .duffing import EmptyBand, IntegrationError, OriginInput
from .fourier import DomainEscape, FrequencyMismatch, NonMonotone
from .kam import KamError

EXIT_OK, EXIT_INVALID, EXIT_NUMERICAL = 0, 2, 3
NUMERICAL_ERRORS = (KamError, IntegrationError, DomainEscape, NoAdmissibleRotation, CombinatorialBudget,
                    NonMonotone, FrequencyMismatch, EmptyBand, OriginInput, FloatingPointError)


class ConfigError(ValueError):
    pass


# config

def _coerce(key: str, value: Any, default: Any) -> Any:
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise ConfigError(f"{key}: expected a boolean")
        return value
    if isinstance(default, int):
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{key}: expected an integer")
        return value
    if isinstance(default, float) or default is None:
        if value is None and default is None:
            return None
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{key}: expected a number")
        return float(value)
    if isinstance(default, list):
        if not isinstance(value, list) or not all(isinstance(v, (int, float)) and not isinstance(v, bool)
                                                  for v in value):
            raise ConfigError(f"{key}: expected a list of numbers")
        return [float(v) for v in value]
    raise ConfigError(f"{key}: unsupported value")


def resolve_config(kind: str, raw: dict[str, Any], overrides: dict[str, Any]) -> tuple[dict[str, Any], int | None]:
    """Merge defaults, file values and overrides; reject unknown keys and bad types."""
    defaults = ex.DEFAULTS[kind]
    raw = dict(raw)
    declared = raw.pop("experiment", kind)
    if declared != kind:
        raise ConfigError(f"config is for experiment {declared!r}, not {kind!r}")
    seed = raw.pop("seed", None)
    if seed is not None and (isinstance(seed, bool) or not isinstance(seed, int) or seed < 0):
        raise ConfigError("seed: expected a nonnegative integer")
    params = dict(defaults)
    for source in (raw, overrides):
        for key, value in source.items():
            if key not in defaults:
                raise ConfigError(f"unknown key {key!r} for experiment {kind!r}")
            params[key] = _coerce(key, value, defaults[key])
    return params, seed


def config_hash(kind: str, params: dict[str, Any]) -> str:
    canonical = json.dumps({"experiment": kind, "params": params}, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode()).hexdigest()


def resolve_seed(flag: int | None, config_seed: int | None) -> int:
    if flag is not None:
        return flag
    if config_seed is not None:
        return config_seed
    env = os.environ.get("KAMLAB_SEED")
    if env is not None:
        try:
            return int(env)
        except ValueError:
            raise ConfigError("KAMLAB_SEED must be an integer") from None
    return 0


def validate(kind: str, params: dict[str, Any]) -> dict[str, Any]:
    """Evaluate the standing inequalities of a config before any compute."""
    violations: list[str] = []
    info: dict[str, Any] = {}
    if "tau" in params:
        # normalization only rescales Delta by a constant (equivalently gamma), so the
        # shape axioms are checked on the unnormalized family
        violations += ApproximationFunction(params["tau"]).check_axioms()
    if kind == "kam" and not violations:
        v, info = ex.kam_violations(params)
        violations += v
    if kind == "measure":
        a, b = params["interval"]
        for g in params["gammas"]:
            if not 0 < g < (b - a) / 2:
                violations.append(f"gamma {g} leaves an empty admissible interval")
    return {"experiment": kind, "violations": violations, "info": info}


# output

def _cell(v: Any) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return "nan" if math.isnan(v) else repr(v)
    if v is None:
        return ""
    return str(v)


def write_csv(path: Path, table: ex.Table, chash: str, seed: int) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["config_hash", "seed"] + table.header)
        for row in table.rows:
            w.writerow([chash, str(seed)] + [_cell(v) for v in row])


def _jsonable(v: Any) -> Any:
    if isinstance(v, float) and not math.isfinite(v):
        return repr(v)
    if isinstance(v, dict):
        return {k: _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if hasattr(v, "item"):
        return v.item()
    return v


def write_json(path: Path, doc: dict, chash: str, seed: int) -> None:
    body = {"config_hash": chash, "seed": seed, **_jsonable(doc)}
    path.write_text(json.dumps(body, sort_keys=True, indent=2, ensure_ascii=False) + "\n", encoding="utf-8")


# argument parsing

def _parse_set(items: Sequence[str]) -> dict[str, Any]:
    out = {}
    for item in items:
        key, sep, value = item.partition("=")
        if not sep:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        try:
            out[key] = json.loads(value)
        except json.JSONDecodeError:
            raise ConfigError(f"--set {key}: value is not valid JSON") from None
    return out


def _gamma_override(kind: str, text: str) -> dict[str, Any]:
    try:
        values = [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise ConfigError("--gamma expects comma-separated numbers") from None
    if kind == "measure":
        return {"gammas": values}
    if len(values) != 1:
        raise ConfigError("--gamma takes a single value for this experiment")
    return {"gamma": values[0]}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="kamlab", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for kind in list(ex.RUNNERS) + ["validate"]:
        p = sub.add_parser(kind)
        p.add_argument("--config", type=Path)
        p.add_argument("--seed", type=int)
        p.add_argument("--out", type=Path, default=Path("kamlab-out"))
        p.add_argument("--threads", type=int, default=1)
        p.add_argument("--timings", action="store_true", help="add wall-clock columns (breaks byte-identity)")
        p.add_argument("--gamma", help="gamma value, or comma-separated list for measure")
        p.add_argument("--samples", type=int)
        p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                       help="override any config key (value parsed as JSON)")
        if kind == "validate":
            p.add_argument("--experiment", choices=list(ex.RUNNERS))
    return parser


def _load(args) -> tuple[str, dict[str, Any], int]:
    raw: dict[str, Any] = {}
    if args.config is not None:
        if not args.config.is_file():
            raise ConfigError(f"config file not found: {args.config}")
        try:
            raw = json.loads(args.config.read_text(encoding="utf-8"))
        except json.JSONDecodeError as e:
            raise ConfigError(f"config is not valid JSON: {e}") from None
        if not isinstance(raw, dict):
            raise ConfigError("config must be a JSON object")
    kind = args.command
    if kind == "validate":
        kind = args.experiment or raw.get("experiment")
        if kind not in ex.RUNNERS:
            raise ConfigError("validate needs an experiment kind (config key or --experiment)")
    if args.threads < 1:
        raise ConfigError("--threads must be at least 1")
    overrides = _parse_set(args.set)
    if args.gamma is not None:
        overrides.update(_gamma_override(kind, args.gamma))
    if args.samples is not None:
        overrides["samples"] = args.samples
    params, cfg_seed = resolve_config(kind, raw, overrides)
    return kind, params, resolve_seed(args.seed, cfg_seed)


def run(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        kind, params, seed = _load(args)
    except ConfigError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INVALID
    chash = config_hash(kind, params)
    try:
        report = validate(kind, params)
    except NUMERICAL_ERRORS as e:
        print(f"numerical failure ({type(e).__name__}): {e}", file=sys.stderr)
        return EXIT_NUMERICAL
    if args.command == "validate":
        print(json.dumps(_jsonable({"config_hash": chash, **report}), sort_keys=True, indent=2))
        return EXIT_OK if not report["violations"] else EXIT_INVALID
    if report["violations"]:
        for v in report["violations"]:
            print(f"violation: {v}", file=sys.stderr)
        return EXIT_INVALID

    runner = ex.RUNNERS[kind]
    kwargs: dict[str, Any] = {}
    if kind in ("measure", "duffing-bound"):
        kwargs["threads"] = args.threads
    if kind == "kam":
        kwargs["timings"] = args.timings
    t0 = time.perf_counter()
    try:
        outcome = runner(params, seed, **kwargs)
    except NUMERICAL_ERRORS as e:
        print(f"numerical failure ({type(e).__name__}): {e}", file=sys.stderr)
        return EXIT_NUMERICAL
    summary = dict(outcome.summary)
    if args.timings:
        summary["wall_s_total"] = time.perf_counter() - t0

    args.out.mkdir(parents=True, exist_ok=True)
    written = []
    for name, table in outcome.tables.items():
        path = args.out / f"{name}.csv"
        write_csv(path, table, chash, seed)
        written.append(path)
    for name, doc in outcome.documents.items():
        path = args.out / f"{name}.json"
        write_json(path, doc, chash, seed)
        written.append(path)
    path = args.out / f"{kind}-summary.json"
    write_json(path, {"experiment": kind, "params": params, "summary": summary}, chash, seed)
    written.append(path)
    for p in written:
        print(p)
    return EXIT_OK


def main() -> int:
    return run()


if __name__ == "__main__":
    sys.exit(main())
