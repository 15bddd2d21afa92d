"""Command-line entry point: ``echomem <subcommand> --config scenario.toml``.

Exit status is 0 on success, 2 on invalid input (with a JSON error object on
stderr) and 1 when a check ran but failed.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from pathlib import Path

import numpy as np

from echomem import runner
from echomem.config import load_toml, scenario_from_dict, sweep_from_dict
from echomem.ensemble import ensemble_csv_text, sample_ensemble, write_ensemble_csv
from echomem.errors import realize_rotations
from echomem.exceptions import ValidationError

def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def _json_safe(obj):
    if isinstance(obj, (float, np.floating)):
        return float(obj) if math.isfinite(obj) else str(float(obj))
    if isinstance(obj, dict):
        return {k: _json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_safe(v) for v in obj]
    return obj


def to_csv(rows: list, columns: list) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([_cell(row.get(c)) for c in columns])
    return buf.getvalue()


def to_json(obj) -> str:
    return json.dumps(_json_safe(obj), indent=2) + "\n"


def _emit(text: str, args, stem: str, ext: str) -> None:
    if args.out is None:
        sys.stdout.write(text)
        return
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / f"{stem}.{ext}").write_text(text, encoding="utf-8")


def _raw_config(args) -> dict:
    raw = load_toml(args.config) if args.config else {}
    if args.seed is not None:
        raw["seed"] = args.seed
    if args.engine is not None:
        raw["engine"] = args.engine
    return raw


def cmd_simulate(args) -> int:
    cfg = scenario_from_dict(_raw_config(args))
    rep = runner.run_scenario(cfg, args.threads)
    if args.format == "json":
        _emit(to_json(rep.to_dict(args.timing)), args, "report", "json")
    else:
        row = runner.sweep_row("", "", rep, args.timing)
        _emit(to_csv([row], runner.SWEEP_COLUMNS), args, "report", "csv")
    return 0


def cmd_sweep(args) -> int:
    spec = sweep_from_dict(_raw_config(args))
    res = runner.run_sweep(spec, args.threads, args.timing)
    if args.format == "json":
        _emit(to_json({"parameter": res.parameter, "rows": res.rows, "failures": res.failures}),
              args, "sweep", "json")
    else:
        _emit(to_csv(res.rows, runner.SWEEP_COLUMNS), args, "sweep", "csv")
    for f in res.failures:
        sys.stderr.write(json.dumps(_json_safe(f)) + "\n")
    return 1 if res.failures else 0


COMPARE_COLUMNS = ["a", "b", "status", "deviation", "tolerance", "reason"]


def cmd_compare(args) -> int:
    cfg = scenario_from_dict(_raw_config(args))
    engines = tuple(args.engines.split(",")) if args.engines else runner.ENGINE_LABELS
    res = runner.compare_engines(cfg, engines, args.threads)
    if args.format == "json":
        _emit(to_json(res.to_dict()), args, "compare", "json")
    else:
        _emit(to_csv(res.pairs, COMPARE_COLUMNS), args, "compare", "csv")
    return 0 if res.passed else 1


def cmd_angular(args) -> int:
    cfg = scenario_from_dict(_raw_config(args))
    res = runner.run_angular(cfg, args.threads)
    if args.format == "json":
        summary = {k: getattr(res, k) for k in
                   ("peak", "background", "mean_off_peak", "enhancement", "enhancement_sem")}
        _emit(to_json({**summary, "atom_count": cfg.ensemble.atom_count, "rows": res.rows}),
              args, "angular", "json")
    else:
        _emit(to_csv(res.rows, runner.ANGULAR_COLUMNS), args, "angular", "csv")
    return 0


def cmd_oracle_check(args) -> int:
    raw = _raw_config(args)
    cfg = scenario_from_dict({k: v for k, v in raw.items() if k != "oracle_check"})
    sec = raw.get("oracle_check", {})
    res = runner.oracle_check(cfg.wave_vectors, int(sec.get("instances", 100)),
                              int(sec.get("max_atoms", 10)), cfg.seed)
    if args.format == "json":
        _emit(to_json(res), args, "oracle_check", "json")
    else:
        cols = ["instances", "max_atoms", "seed", "tolerance", "worst_relative_deviation", "passed"]
        _emit(to_csv([res], cols), args, "oracle_check", "csv")
    return 0 if res["passed"] else 1


def cmd_export_ensemble(args) -> int:
    cfg = scenario_from_dict(_raw_config(args))
    ens = sample_ensemble(cfg.ensemble)
    if args.out is None:
        sys.stdout.write(ensemble_csv_text(ens))
        return 0
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_ensemble_csv(ens, out / "ensemble.csv")
    realize_rotations(cfg.pulse_error, ens, 0).to_csv(out / "rotations.csv")
    return 0


COMMANDS = {
    "simulate": cmd_simulate,
    "sweep": cmd_sweep,
    "compare": cmd_compare,
    "angular": cmd_angular,
    "oracle-check": cmd_oracle_check,
    "export-ensemble": cmd_export_ensemble,
}


def _u64(text: str) -> int:
    value = int(text)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return value


def _positive(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return value


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="TOML scenario file")
    common.add_argument("--seed", type=_u64, help="root seed (overrides the config)")
    common.add_argument("--engine", choices=("semiclassical", "quantum", "oracle"))
    common.add_argument("--out", help="output directory (default: stdout)")
    common.add_argument("--format", choices=("csv", "json"), default="csv")
    common.add_argument("--threads", type=_positive, default=1,
                        help="worker threads; never changes the numbers")
    common.add_argument("--timing", action="store_true",
                        help="fill wall_ms (makes reruns differ byte-wise)")
    parser = argparse.ArgumentParser(prog="echomem", description="Spin-echo ensemble memory simulator")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name, parents=[common])
        if name == "compare":
            p.add_argument("--engines", help=f"comma list from {','.join(runner.ENGINE_LABELS)}")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except ValidationError as exc:
        sys.stderr.write(json.dumps(exc.to_dict()) + "\n")
        return 2
    except ArithmeticError as exc:
        sys.stderr.write(json.dumps({"error": type(exc).__name__, "message": str(exc)}) + "\n")
        return 2


if __name__ == "__main__":
    sys.exit(main())
