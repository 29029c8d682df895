"""Command line entry point.

Exit codes: 0 success, 1 usage or configuration error, 2 data error,
3 numeric or training failure.
"""

import argparse
import json
import logging
import os
import sys
import time

from . import __version__
from .config import RunConfig, load_config
from .dataset import (
    SplitSpec, dataset_from_extraction, extract_features, format_feature_csv, parse_feature_csv,
    read_fiducials, read_signal, split, synth_generate, table1_counts,
)
from .errors import ConfigError, DataError, MifusionError, NumericError, StageError
from .report import (
    EvaluationReport, TrainedModels, evaluate_saved, load_dataset, render_tables, run_pipeline,
    run_stage, train_models,
)

log = logging.getLogger("mifusion")

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3


def _seed(text):
    value = int(text)
    if not 0 <= value < 2 ** 64:
        raise argparse.ArgumentTypeError(f"seed must lie in [0, 2**64), got {value}")
    return value


def _exit_code(exc):
    if isinstance(exc, StageError):
        exc = exc.cause
    if isinstance(exc, ConfigError):
        return EXIT_CONFIG
    if isinstance(exc, DataError):
        return EXIT_DATA
    if isinstance(exc, (NumericError, ArithmeticError)):
        return EXIT_NUMERIC
    if isinstance(exc, (OSError, ValueError)):
        return EXIT_DATA
    return EXIT_NUMERIC


def _write(path, text):
    if path is None:
        sys.stdout.write(text)
        return
    parent = os.path.dirname(path)
    if parent:
        os.makedirs(parent, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def _config(args):
    cfg = load_config(args.config) if args.config else RunConfig()
    if getattr(args, "seed", None) is not None:
        cfg = cfg.with_seed(args.seed)
    return cfg


def cmd_synth(args):
    cfg = _config(args)
    total = args.total if args.total is not None else cfg.data.synth_total
    sep = args.separation if args.separation is not None else cfg.data.synth_separation
    ds = synth_generate(table1_counts(total, include_other=args.include_other), cfg.seed_for("data"), sep)
    _write(args.out, format_feature_csv(ds))


def cmd_extract(args):
    samples, fs = read_signal(args.signal)
    anns = read_fiducials(args.annotations)
    beats, excluded = extract_features(samples, anns, fs)
    for beat_index, reason in excluded:
        log.warning("excluded beat %d: %s", beat_index, reason)
    print(f"{len(beats)} beats extracted, {len(excluded)} excluded", file=sys.stderr)
    _write(args.out, format_feature_csv(dataset_from_extraction(args.record_id, beats)))


def cmd_train(args):
    cfg = _config(args).validate()
    ds = run_stage("data", load_dataset, cfg)
    spec = SplitSpec(cfg.split.train_fraction, cfg.split.calibration_fraction,
                     cfg.seed_for("split"), cfg.split.stratified)
    train, cal, test = run_stage("split", split, ds, spec)
    models, info = train_models(cfg, train, cal)
    out = args.out or "."
    models.save(out)
    meta = {"config": cfg.to_text(), "config_digest": cfg.digest(), "training": info,
            "split": {"train": len(train), "calibration": len(cal), "test": len(test)}}
    _write(os.path.join(out, "train_info.json"), json.dumps(meta, indent=2, sort_keys=True) + "\n")


def cmd_evaluate(args):
    models = TrainedModels.load(args.models)
    ds = parse_feature_csv(args.data)
    report = evaluate_saved(models, ds, source=os.path.basename(args.data))
    if args.out:
        _write(os.path.join(args.out, "report.json"), report.to_json())
    _write(os.path.join(args.out, f"report.{_ext(args.format)}") if args.out else None,
           render_tables(report, args.format))


def _ext(fmt):
    return "md" if fmt == "markdown" else "csv"


def cmd_run(args):
    cfg = _config(args)
    started = time.time()
    result = run_pipeline(cfg)
    rendered = render_tables(result.report, args.format)
    if args.out:
        result.models.save(os.path.join(args.out, "models"))
        _write(os.path.join(args.out, "report.json"), result.report.to_json())
        _write(os.path.join(args.out, f"report.{_ext(args.format)}"), rendered)
        # wall-clock data lives outside the reproducible report
        _write(os.path.join(args.out, "run_info.json"), json.dumps({
            "started_unix": started, "finished_unix": time.time(), "version": __version__,
        }, indent=2) + "\n")
    else:
        sys.stdout.write(rendered)


def cmd_report(args):
    with open(args.report, encoding="utf-8") as fh:
        report = EvaluationReport.from_json(fh.read())
    _write(args.out, render_tables(report, args.format))


def build_parser():
    p = argparse.ArgumentParser(prog="mifusion", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, seed=True, fmt=False):
        sp.add_argument("--config", metavar="PATH")
        if seed:
            sp.add_argument("--seed", type=_seed, metavar="U64")
        if fmt:
            sp.add_argument("--format", choices=("markdown", "csv"), default="markdown")

    sp = sub.add_parser("synth", help="write a synthetic feature CSV")
    common(sp)
    sp.add_argument("--total", type=int)
    sp.add_argument("--separation", type=float)
    sp.add_argument("--include-other", action="store_true")
    sp.add_argument("--out", metavar="PATH", help="output CSV (default stdout)")
    sp.set_defaults(func=cmd_synth)

    sp = sub.add_parser("extract", help="signal + fiducials -> feature CSV")
    sp.add_argument("--signal", required=True, metavar="PATH")
    sp.add_argument("--annotations", required=True, metavar="PATH")
    sp.add_argument("--record-id", required=True)
    sp.add_argument("--out", metavar="PATH", help="output CSV (default stdout)")
    sp.set_defaults(func=cmd_extract)

    sp = sub.add_parser("train", help="fit classifiers and fusion, save models")
    common(sp)
    sp.add_argument("--out", metavar="DIR")
    sp.set_defaults(func=cmd_train)

    sp = sub.add_parser("evaluate", help="score a feature CSV with saved models")
    sp.add_argument("--models", required=True, metavar="DIR")
    sp.add_argument("--data", required=True, metavar="CSV")
    sp.add_argument("--format", choices=("markdown", "csv"), default="markdown")
    sp.add_argument("--out", metavar="DIR")
    sp.set_defaults(func=cmd_evaluate)

    sp = sub.add_parser("run", help="split, train, calibrate and evaluate end to end")
    common(sp, fmt=True)
    sp.add_argument("--out", metavar="DIR")
    sp.set_defaults(func=cmd_run)

    sp = sub.add_parser("report", help="re-render a stored report.json")
    sp.add_argument("--report", required=True, metavar="PATH")
    sp.add_argument("--format", choices=("markdown", "csv"), default="markdown")
    sp.add_argument("--out", metavar="PATH")
    sp.set_defaults(func=cmd_report)
    return p


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except (MifusionError, OSError, ValueError, ArithmeticError) as exc:
        print(f"mifusion: error: {exc}", file=sys.stderr)
        return _exit_code(exc)
    return EXIT_OK
