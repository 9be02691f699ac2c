"""``shadowlab`` command line: run, sweep and verify."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .actions import action_from_descriptor, format_rational, parse_rational
from .errors import ShadowlabError
from .experiments import EXPERIMENTS, ExperimentConfig, emit, run, sweep
from .pseudo import max_defect, read_trajectory
from .solver import ShadowingProblem, certificate_is_infeasible, feasible_shadow

EXIT_OK = 0
EXIT_CONTRADICTED = 1
EXIT_USAGE = 2


def _formats(text: str) -> tuple[str, ...]:
    return tuple(f.strip() for f in text.split(",") if f.strip())


def _load_config(args) -> ExperimentConfig:
    if args.config:
        cfg = ExperimentConfig.load(args.config)
        if args.experiment and args.experiment.upper() != cfg.experiment:
            raise ShadowlabError(
                f"--experiment {args.experiment} disagrees with config experiment {cfg.experiment}"
            )
    elif args.experiment:
        cfg = ExperimentConfig.default(args.experiment.upper())
    else:
        raise ShadowlabError("give --experiment or --config")
    changes = {}
    if args.out:
        changes["out_dir"] = args.out
    if args.format:
        changes["formats"] = _formats(args.format)
    return cfg.with_overrides(**changes) if changes else cfg


def _print_report(report, paths) -> None:
    status = "PASS" if report.passed else "FAIL"
    print(f"{report.experiment} {status}: {report.expectation}")
    for key in sorted(report.summary):
        value = report.to_dict()["summary"][key]
        print(f"  {key}: {json.dumps(value)}")
    for p in paths:
        print(f"  wrote {p}")


def cmd_run(args) -> int:
    cfg = _load_config(args)
    report = run(cfg)
    paths = emit(report, cfg.out_dir, cfg.formats)
    _print_report(report, paths)
    return EXIT_OK if report.passed else EXIT_CONTRADICTED


def cmd_sweep(args) -> int:
    cfg = _load_config(args)
    reports = sweep(cfg, args.radius)
    code = EXIT_OK
    for report in reports:
        stem = report.experiment
        if len(reports) > 1:
            stem = f"{report.experiment}_R{report.config['radius']}"
        paths = emit(report, cfg.out_dir, cfg.formats, stem=stem)
        _print_report(report, paths)
        if not report.passed:
            code = EXIT_CONTRADICTED
    return code


def cmd_verify(args) -> int:
    traj, action = read_trajectory(args.trajectory)
    if args.action:
        with open(args.action, encoding="utf-8") as fh:
            action = action_from_descriptor(json.load(fh))
    if action is None:
        raise ShadowlabError("trajectory header carries no action; pass --action")
    eps = parse_rational(args.epsilon)
    defect = max_defect(traj, action)
    verdict = feasible_shadow(ShadowingProblem(action, traj, eps))
    out = {
        "trajectory": str(args.trajectory),
        "group": traj.ball.spec.name,
        "radius": traj.ball.radius,
        "points": len(traj.ball),
        "epsilon": format_rational(eps),
        "max_defect": format_rational(defect.value),
        "skipped_edges": defect.skipped,
        "verdict": verdict.to_dict(),
    }
    if not verdict.feasible:
        out["certificate_checked"] = certificate_is_infeasible(verdict.certificate)
    print(json.dumps(out, indent=2, sort_keys=True))
    return EXIT_OK if verdict.feasible else EXIT_CONTRADICTED


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="shadowlab",
                                     description="Finite-window shadowing experiments for group actions.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--experiment", choices=EXPERIMENTS + tuple(e.lower() for e in EXPERIMENTS))
        p.add_argument("--config", type=Path, help="JSON config with nested sections")
        p.add_argument("--out", help="output directory (default: config value or ./out)")
        p.add_argument("--format", help="comma list of json,csv")

    p_run = sub.add_parser("run", help="run one experiment")
    common(p_run)
    p_run.set_defaults(func=cmd_run)

    p_sweep = sub.add_parser("sweep", help="run an experiment over a radius range")
    common(p_sweep)
    p_sweep.add_argument("--radius", required=True, help="range like 4..14 or list 4,6,8")
    p_sweep.set_defaults(func=cmd_sweep)

    p_verify = sub.add_parser("verify", help="decide eps-shadowing for a trajectory file")
    p_verify.add_argument("--trajectory", required=True, type=Path)
    p_verify.add_argument("--epsilon", required=True, help="rational p/q")
    p_verify.add_argument("--action", type=Path, help="action descriptor JSON if the header has none")
    p_verify.set_defaults(func=cmd_verify)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ShadowlabError, ValueError, OSError) as exc:
        print(f"shadowlab: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
