"""Command-line entry point: ``dbnclass {pretrain,train,eval,report,oracle-check}``.

Failures exit nonzero and print ``{"error": <category>, "message": ...}`` on
stderr.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

from . import checks
from . import data as _data
from .classifier import error_rate
from .experiment import (
    CheckpointError,
    ConfigError,
    ExperimentConfig,
    Report,
    emit_report,
    load_checkpoint,
    load_splits,
    pretrain_for_seed,
    pretrain_model,
    run_experiment,
    save_checkpoint,
)
from .hyper import Hyper
from .strategies import MissingPrerequisiteError

EXIT_CODES = {"runtime": 1, "config": 2, "data": 3, "checkpoint": 4, "prerequisite": 5, "oracle": 6}


class OracleCheckFailed(RuntimeError):
    pass


def _hyper_flags(parser):
    for f in dataclasses.fields(Hyper):
        parser.add_argument("--" + f.name.replace("_", "-"), dest="hyper_" + f.name,
                            type=type(f.default), default=None)


def _common(parser):
    parser.add_argument("--config", required=True, help="experiment config (JSON)")
    parser.add_argument("--seeds", type=int, nargs="+")
    parser.add_argument("--strategies", nargs="+")
    parser.add_argument("--output-dir")
    parser.add_argument("--arch", type=int, nargs="+", help="layer sizes incl. input and classes")
    parser.add_argument("--subsample", type=float)
    parser.add_argument("--binarize", action="store_true", default=None)
    _hyper_flags(parser)


def build_config(args):
    path = Path(args.config)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as e:
        raise ConfigError(f"cannot read config {path}: {e}") from None
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    for key, attr in (("seeds", "seeds"), ("strategies", "strategies"), ("output_dir", "output_dir"),
                      ("architecture", "arch")):
        v = getattr(args, attr, None)
        if v is not None:
            raw[key] = v
    ds = raw.setdefault("dataset", {})
    if getattr(args, "subsample", None) is not None:
        ds["subsample"] = args.subsample
    if getattr(args, "binarize", None):
        ds["binarize"] = True
    hyper = raw.setdefault("hyper", {})
    for f in dataclasses.fields(Hyper):
        v = getattr(args, "hyper_" + f.name, None)
        if v is not None:
            hyper[f.name] = v
    return ExperimentConfig.from_dict(raw, base_dir=path.parent)


def cmd_pretrain(args):
    cfg = build_config(args)
    splits = load_splits(cfg)
    out = Path(cfg.resolve(cfg.output_dir)) / "checkpoints"
    for seed in cfg.seeds:
        dbn, hist = pretrain_for_seed(cfg, splits, seed)
        path = out / f"pretrain_seed{seed}.ckpt"
        save_checkpoint(pretrain_model(dbn, hist, cfg), path)
        print(path)


def cmd_train(args):
    cfg = build_config(args)
    report = run_experiment(cfg, log=lambda m: print(m, file=sys.stderr))
    print(emit_report(report, Path(cfg.resolve(cfg.output_dir)) / "report.tsv"), end="")


def cmd_eval(args):
    cfg = build_config(args)
    splits = load_splits(cfg)
    model = load_checkpoint(args.checkpoint)
    net = model.net if args.final or model.best is None else model.best
    part = getattr(splits, args.split)
    print(json.dumps({"split": args.split, "error": error_rate(net, part), "n": len(part)}))


def cmd_report(args):
    cfg = build_config(args)
    out = Path(cfg.resolve(cfg.output_dir))
    try:
        report = Report.from_dict(json.loads((out / "results.json").read_text(encoding="utf-8")))
    except OSError as e:
        raise ConfigError(f"no results to report in {out}: {e}") from None
    if args.ddof is not None:
        report.ddof = args.ddof
    print(emit_report(report, args.out or out / "report.tsv"), end="")


def cmd_oracle_check(args):
    results = checks.run_checks(args.seed)
    for name, err, tol, ok in results:
        print(f"{'PASS' if ok else 'FAIL'}  {name:<22} error={err:.3e}  tol={tol:.0e}")
    if not all(r[3] for r in results):
        raise OracleCheckFailed("at least one oracle check failed")


def make_parser():
    parser = argparse.ArgumentParser(prog="dbnclass", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("pretrain", help="greedy layer-wise pretraining, one checkpoint per seed")
    _common(p)
    p.set_defaults(func=cmd_pretrain)

    p = sub.add_parser("train", help="train every (strategy, seed) cell and write the report")
    _common(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="error rate of a checkpoint on one split")
    _common(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--split", choices=("train", "valid", "test"), default="test")
    p.add_argument("--final", action="store_true", help="use final rather than best-validation weights")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("report", help="re-emit the error table from results.json")
    _common(p)
    p.add_argument("--out")
    p.add_argument("--ddof", type=int, choices=(0, 1))
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("oracle-check", help="compare analytic derivatives with brute-force oracles")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_oracle_check)
    return parser


def _category(exc):
    if isinstance(exc, OracleCheckFailed):
        return "oracle"
    if isinstance(exc, ConfigError):
        return "config"
    if isinstance(exc, (_data.DataFormatError, FileNotFoundError)):
        return "data"
    if isinstance(exc, CheckpointError):
        return "checkpoint"
    if isinstance(exc, MissingPrerequisiteError):
        return "prerequisite"
    return "runtime"


def main(argv=None):
    args = make_parser().parse_args(argv)
    try:
        args.func(args)
    except Exception as exc:  # noqa: BLE001 - mapped to an exit code
        cat = _category(exc)
        print(json.dumps({"error": cat, "message": str(exc)}), file=sys.stderr)
        return EXIT_CODES[cat]
    return 0


if __name__ == "__main__":
    sys.exit(main())
