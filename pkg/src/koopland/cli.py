"""Command-line entry point.

Verbs: ``collect`` demonstration trials, ``fit`` a model from logs, ``run``
a study (or one condition), ``report`` recompute summaries from logs, and
``serve`` the live cockpit bridge. Exit codes: 0 success, 2 configuration
fault, 3 model fault, 4 runtime fault.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

from . import metrics
from .harness import (CONDITIONS, ConfigError, StudyConfig,
                      collect_demonstrations, h_step_report,
                      load_study_config, run_study, write_report)
from .koopman import BasisSpec, ModelNotFittedError, fit, save_model
from .trials import all_pairs, read_records, write_records

EXIT_CONFIG = 2
EXIT_MODEL = 3
EXIT_RUNTIME = 4


def _load_config(args) -> StudyConfig:
    config = load_study_config(args.config) if args.config else StudyConfig()
    if getattr(args, "seed", None) is not None:
        config = replace(config, seed=args.seed)
    if getattr(args, "out", None):
        config = replace(config, output_dir=str(args.out))
    return config


def cmd_collect(args) -> int:
    config = _load_config(args)
    pilot = replace(config.pilot, kind=args.pilot)
    records, pairs = collect_demonstrations(pilot, args.trials, config.sim,
                                            config.seed, source=args.source)
    out = Path(args.data)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_records(records, out)
    print(f"collected {len(records)} trials ({len(pairs)} snapshot pairs) -> {out}")
    return 0


def cmd_fit(args) -> int:
    records = read_records(args.data)
    pairs = all_pairs(records)
    if not pairs:
        print("no snapshot pairs in the dataset", file=sys.stderr)
        return EXIT_MODEL
    model = fit(pairs, BasisSpec(args.basis), epsilon=args.epsilon)
    save_model(model, args.model)
    print(f"fitted {args.basis} model on {model.samples} pairs -> {args.model}")
    return 0


def cmd_run(args) -> int:
    config = _load_config(args)
    if args.condition:
        for cond in args.condition:
            if cond not in CONDITIONS:
                raise ConfigError(f"unknown condition {cond!r}")
        config = replace(config, conditions=tuple(args.condition))
    report = run_study(config)
    for cond, stats in report["conditions"].items():
        print(f"{cond}: {stats['successes']}/{stats['trials']} successful")
    print(f"bundle written to {config.output_dir}")
    return 0


def cmd_report(args) -> int:
    run_dir = Path(args.run)
    log_dir = run_dir / "logs"
    if not log_dir.is_dir():
        raise ConfigError(f"no logs directory under {run_dir}")
    records = {}
    for path in sorted(log_dir.glob("*.jsonl")):
        recs = read_records(path)
        if recs:
            records.setdefault(recs[0].condition, []).extend(recs)
    if not records:
        raise ConfigError(f"no trial records under {log_dir}")
    manifest_path = run_dir / "study.json"
    config = StudyConfig()
    if manifest_path.exists():
        from .harness import study_config_from_dict
        doc = json.loads(manifest_path.read_text())
        config = study_config_from_dict(doc.get("config", {}))
    h_step = h_step_report(config) if args.h_step else None
    dist = metrics.SpatialDistribution(bounds=(config.sim.world_w, config.sim.world_h),
                                       goal=config.sim.goal)
    write_report(records, run_dir, dist, h_step=h_step)
    print(f"report rebuilt under {run_dir / 'report'}")
    return 0


def cmd_serve(args) -> int:
    from .bridge import serve
    config = _load_config(args)
    serve(config, port=args.port, host=args.host)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="koopland",
                                     description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="verb", required=True)

    p = sub.add_parser("collect", help="run pilot-only trials and log them")
    p.add_argument("--config", help="study config JSON")
    p.add_argument("--pilot", choices=["expert", "novice"], default="expert")
    p.add_argument("--trials", type=int, default=10)
    p.add_argument("--seed", type=int)
    p.add_argument("--source", type=int, default=0,
                   help="data-source stream index")
    p.add_argument("--data", required=True, help="output JSONL log path")
    p.set_defaults(func=cmd_collect)

    p = sub.add_parser("fit", help="fit a model from logged trials")
    p.add_argument("--data", required=True, help="JSONL log with trials")
    p.add_argument("--basis", choices=["linear", "nonlinear"], default="nonlinear")
    p.add_argument("--epsilon", type=float, default=0.0)
    p.add_argument("--model", required=True, help="output model path")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("run", help="run the study conditions end to end")
    p.add_argument("--config", help="study config JSON")
    p.add_argument("--condition", action="append",
                   help="restrict to this condition (repeatable)")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", help="output directory override")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("report", help="recompute the report from raw logs")
    p.add_argument("--run", required=True, help="study output directory")
    p.add_argument("--h-step", action="store_true",
                   help="include prediction-error tables (refits models)")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("serve", help="serve the live cockpit bridge")
    p.add_argument("--config", help="study config JSON")
    p.add_argument("--port", type=int, default=8765)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", help="output directory override")
    p.set_defaults(func=cmd_serve)
    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ModelNotFittedError, FileNotFoundError) as exc:
        print(f"model error: {exc}", file=sys.stderr)
        return EXIT_MODEL
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
