"""Command-line entry point.

Exit codes: 0 success, 2 usage or configuration error, 3 runtime error.
All run parameters live in JSON config files; flags only select paths, seeds,
presets, verbosity and parallelism.
"""

from __future__ import annotations

import argparse
import copy
import datetime as _dt
import hashlib
import json
import logging
import os
import platform
import sys
from pathlib import Path

import numpy as np

from shotwise import __version__
from shotwise.backends import fleet_from_config, reseed_fleet
from shotwise.circuits import QasmError, ideal_distribution, parse_qasm
from shotwise.harness import ExperimentConfig, aggregate, emit, run_grid
from shotwise.orchestrator import (
    CALIBRATION_SCHEMA, PRODUCTION_SCHEMA, CalibrationConfig, CalibrationReport,
    ProductionConfig, check_coverage, run_calibration, run_production,
)
from shotwise.presets import PRESETS

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 2, 3
OUTPUT_ENV = "SHOTWISE_OUTPUT_DIR"

log = logging.getLogger("shotwise")


class ConfigError(Exception):
    pass


def _load_json(path: str) -> dict:
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"cannot read config file '{path}': no such file")
    try:
        return json.loads(p.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"malformed JSON in '{path}' at line {exc.lineno}, "
                          f"column {exc.colno}: {exc.msg}") from None
    except OSError as exc:
        raise ConfigError(f"cannot read config file '{path}': {exc.strerror}") from None


def _config(args) -> dict:
    if getattr(args, "preset", None):
        if args.preset not in PRESETS:
            raise ConfigError(f"unknown preset {args.preset!r}; choose from {sorted(PRESETS)}")
        return copy.deepcopy(PRESETS[args.preset])
    if not args.config:
        raise ConfigError("a config path or --preset is required")
    return _load_json(args.config)


def _config_hash(cfg: dict) -> str:
    return hashlib.sha256(json.dumps(cfg, sort_keys=True).encode()).hexdigest()


def _manifest(cfg: dict, seed, command: str) -> dict:
    return {
        "command": command,
        "config_sha256": _config_hash(cfg),
        "seed": seed,
        "timestamp": _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
        "versions": {"shotwise": __version__, "numpy": np.__version__,
                     "python": platform.python_version()},
    }


def _default_out(name: str) -> str:
    return str(Path(os.environ.get(OUTPUT_ENV, ".")) / name)


def _write_json(path: str | Path, data) -> None:
    Path(path).write_text(json.dumps(data, indent=1) + "\n", encoding="utf-8")


def _protocol_fleet(cfg: dict, seed_override):
    fleet = fleet_from_config(cfg.get("fleet"))
    seed = seed_override if seed_override is not None else cfg.get("seed")
    if seed is not None:
        fleet = reseed_fleet(fleet, int(seed))
    return fleet, seed


# --- subcommands --------------------------------------------------------------------

def cmd_calibrate(args) -> int:
    try:
        cfg = _config(args)
        fleet, seed = _protocol_fleet(cfg, args.seed)
        if "calibration" not in cfg:
            raise ConfigError("config has no 'calibration' section")
        cal_cfg = CalibrationConfig.from_dict(cfg["calibration"])
    except (ConfigError, ValueError, KeyError, TypeError) as exc:
        return _fail(EXIT_CONFIG, exc)
    out = args.out or _default_out("calibration.json")
    try:
        report = run_calibration(fleet, cal_cfg)
        _write_json(out, report.to_dict())
        _write_json(f"{out}.manifest.json", _manifest(cfg, seed, "calibrate"))
    except Exception as exc:
        return _fail(EXIT_RUNTIME, exc)
    print(f"wrote {out}")
    for qid in report.ranking:
        rec = next(b.record for b in report.backends if b.qpu_id == qid)
        print(f"  {qid:<16} u = {rec.u:.5f} +- {rec.std_error:.5f}")
    return EXIT_OK


def cmd_produce(args) -> int:
    try:
        cfg = _config(args)
        fleet, seed = _protocol_fleet(cfg, args.seed)
        if "production" not in cfg:
            raise ConfigError("config has no 'production' section")
        prod_cfg = ProductionConfig.from_dict(cfg["production"])
        calibration = None
        if args.calibration:
            calibration = CalibrationReport.from_dict(_load_json(args.calibration))
        check_coverage([q.id for q in fleet], calibration, prod_cfg.policy)
        if calibration is not None and calibration.qpu_ids != [q.id for q in fleet]:
            raise ConfigError("calibration backends do not match the fleet "
                              f"({calibration.qpu_ids} vs {[q.id for q in fleet]})")
    except (ConfigError, ValueError, KeyError, TypeError) as exc:
        return _fail(EXIT_CONFIG, exc)
    out = args.out or _default_out("production.json")
    try:
        report = run_production(fleet, prod_cfg, calibration)
        _write_json(out, report.to_dict())
        _write_json(f"{out}.manifest.json", _manifest(cfg, seed, "produce"))
    except Exception as exc:
        return _fail(EXIT_RUNTIME, exc)
    print(f"wrote {out}: {len(report.iterations)} iteration(s), {report.shots_used} shots, "
          f"d_H = {report.d_hellinger:.5f} ({report.stop_reason})")
    return EXIT_OK


def cmd_experiment(args) -> int:
    try:
        cfg = _config(args)
        if args.seed is not None:
            cfg["base_seed"] = args.seed
        if args.repetitions is not None:
            cfg["repetitions"] = args.repetitions
        exp = ExperimentConfig.from_dict(cfg)
    except (ConfigError, ValueError, KeyError, TypeError) as exc:
        return _fail(EXIT_CONFIG, exc)
    out_dir = Path(args.out or os.environ.get(OUTPUT_ENV, "experiment-out"))
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        rows = run_grid(exp, jobs=args.jobs)
        emit(rows, out_dir / "rows.csv")
        emit(aggregate(rows), out_dir / "aggregates.csv")
        _write_json(out_dir / "run-manifest.json",
                    _manifest(exp.to_dict(), exp.base_seed, "experiment") | {"rows": len(rows)})
    except Exception as exc:
        return _fail(EXIT_RUNTIME, exc)
    failed = sum(r.status != "ok" for r in rows)
    print(f"wrote {len(rows)} rows ({failed} failed) to {out_dir}")
    return EXIT_OK


def cmd_qasm(args) -> int:
    try:
        text = Path(args.file).read_text(encoding="utf-8")
    except OSError as exc:
        return _fail(EXIT_CONFIG, f"cannot read '{args.file}': {exc.strerror}")
    try:
        circuit = parse_qasm(text, max_qubits=args.max_qubits)
    except QasmError as exc:
        return _fail(EXIT_CONFIG, f"{args.file}: {exc}")
    ideal = ideal_distribution(circuit)
    print(f"qubits: {circuit.num_qubits}")
    print(f"ops: {len(circuit.ops)}")
    order = sorted(range(ideal.dim), key=lambda x: (-ideal.probs[x], x))[:8]
    for x in order:
        if ideal.probs[x] < 1e-12:
            break
        print(f"  {x:0{circuit.num_qubits}b}  {ideal.probs[x]:.6f}")
    return EXIT_OK


def cmd_report(args) -> int:
    try:
        data = _load_json(args.report)
    except ConfigError as exc:
        return _fail(EXIT_CONFIG, exc)
    schema = data.get("schema")
    if schema == CALIBRATION_SCHEMA:
        rep = CalibrationReport.from_dict(data)
        print(f"calibration: {len(rep.qpu_ids)} backends x {len(rep.benchmarks)} circuits, "
              f"{rep.shots} shots each")
        weights = rep.mise.weight_map() if rep.mise else {}
        for rank, qid in enumerate(rep.ranking, 1):
            print(f"  {rank}. {qid:<16} u = {rep.unreliability[qid]:.5f}  "
                  f"mise w = {weights.get(qid, 0.0):.4f}")
        if rep.mise and rep.mise.excluded:
            print(f"  excluded by MISE: {', '.join(rep.mise.excluded)}")
        for w in rep.warnings:
            print(f"  warning: {w}")
    elif schema == PRODUCTION_SCHEMA:
        pol = data["policy"]
        print(f"production: target {data['target']}, split={pol['split']} merge={pol['merge']}, "
              f"{data['shots_used']}/{data['budget']} shots, stop: {data['stop_reason']}")
        for it in data["iterations"]:
            alloc = dict(zip(data["qpu_ids"], it["allocation"]))
            print(f"  iteration {it['index']}: d_H = {it['d_hellinger']:.5f}  allocation {alloc}")
    else:
        return _fail(EXIT_CONFIG, f"'{args.report}' is not a shotwise report (schema {schema!r})")
    return EXIT_OK


def cmd_fleet(args) -> int:
    try:
        cfg = _config(args)
        fleet_cfg = cfg["fleet"] if isinstance(cfg, dict) else cfg
        fleet = fleet_from_config(fleet_cfg)
    except (ConfigError, ValueError, KeyError, TypeError) as exc:
        return _fail(EXIT_CONFIG, exc)
    print(f"{'id':<16}{'lambda':>8}{'eta':>8}  bias")
    for q in fleet:
        bias = q.noise.bias if q.noise.bias == "uniform" else f"random({q.noise.bias_seed})"
        print(f"{q.id:<16}{q.noise.depolarizing:>8.3f}{q.noise.readout_flip:>8.3f}  {bias}")
    return EXIT_OK


def _fail(code: int, exc) -> int:
    print(f"error: {exc}", file=sys.stderr)
    return code


def _seed(text: str) -> int:
    value = int(text)
    if not 0 <= value < 2 ** 64:
        raise argparse.ArgumentTypeError("seed must be a 64-bit unsigned integer")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="shotwise", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, config=True):
        if config:
            p.add_argument("config", nargs="?", help="JSON config file")
            p.add_argument("--preset", help=f"built-in config ({', '.join(sorted(PRESETS))})")
        p.add_argument("--seed", type=_seed, help="override config seeds")

    p = sub.add_parser("calibrate", help="run the calibration stage")
    common(p)
    p.add_argument("-o", "--out", help="calibration report path")
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("produce", help="run the production stage")
    common(p)
    p.add_argument("-c", "--calibration", help="calibration report from 'calibrate'")
    p.add_argument("-o", "--out", help="production report path")
    p.set_defaults(func=cmd_produce)

    p = sub.add_parser("experiment", help="run a baseline + policy grid experiment")
    common(p)
    p.add_argument("-o", "--out", help="output directory")
    p.add_argument("-j", "--jobs", type=int, default=1, help="parallel worker processes")
    p.add_argument("--repetitions", type=int, help="override the number of seeds")
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("report", help="summarize a calibration or production report")
    p.add_argument("report")
    common(p, config=False)
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("qasm", help="parse a QASM file and show its ideal distribution")
    p.add_argument("file")
    p.add_argument("--max-qubits", type=int, default=16)
    common(p, config=False)
    p.set_defaults(func=cmd_qasm)

    p = sub.add_parser("fleet", help="validate and list a fleet config")
    common(p)
    p.set_defaults(func=cmd_fleet)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code not in (0, None) else EXIT_OK
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
