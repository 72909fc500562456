"""Command-line front end: ``sideband-tomo {simulate,reconstruct,analyze,pipeline}``."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import io, pipeline
from .reconstruction import DEFAULT_BOOTSTRAP, ESTIMATORS


def _seed(text):
    v = int(text)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="sideband-tomo", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, scenario=False, out=True):
        if scenario:
            sp.add_argument("--scenario", required=True,
                            help="scenario document, or one of: " + ", ".join(pipeline.presets()))
        if out:
            sp.add_argument("--out", type=Path, help="output directory")
        sp.add_argument("--seed", type=_seed, help="override the scenario seed")
        sp.add_argument("--format", choices=("text", "machine"), default="text")

    sp = sub.add_parser("simulate", help="write synthetic traces, PDH record and ground truth")
    common(sp, scenario=True)

    sp = sub.add_parser("reconstruct", help="reconstruct the state from a trace directory")
    sp.add_argument("trace_dir", type=Path)
    common(sp)
    sp.add_argument("--estimator", choices=ESTIMATORS, default="harmonic")
    sp.add_argument("--bootstrap", type=int, default=DEFAULT_BOOTSTRAP,
                    help="bootstrap resamples (0 for linearised errors)")

    sp = sub.add_parser("analyze", help="metrics of a serialized two-mode state")
    sp.add_argument("state_file", type=Path)
    common(sp)

    sp = sub.add_parser("pipeline", help="repeated simulate + reconstruct with aggregate report")
    common(sp, scenario=True)
    sp.add_argument("--reps", type=int, help="override the number of repetitions")
    sp.add_argument("--estimator", choices=ESTIMATORS)
    sp.add_argument("--workers", type=int, default=1)
    return p


def _emit(args, text, machine, filename=None):
    out = machine if args.format == "machine" else text
    if getattr(args, "out", None) is not None and filename:
        args.out.mkdir(parents=True, exist_ok=True)
        (args.out / filename).write_text(out)
    sys.stdout.write(out)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "simulate":
            if args.out is None:
                raise SystemExit("simulate: --out is required")
            sc = pipeline.load_scenario(args.scenario)
            out = pipeline.cmd_simulate(sc, args.out, seed=args.seed)
            print(f"wrote traces for {sc.name!r} to {out}")
            return 0
        if args.command == "reconstruct":
            rep = pipeline.cmd_reconstruct(args.trace_dir, args.estimator, args.bootstrap,
                                           seed=args.seed or 0, out_dir=args.out)
            _emit(args, pipeline.format_report(rep), io.dumps_json(rep))
            if not rep["physical"]:
                print("warning: reconstructed covariance matrix is not physical "
                      f"(margin {rep['metrics']['physicality_margin']:.3e})", file=sys.stderr)
                return 2
            return 0
        if args.command == "analyze":
            metrics = pipeline.cmd_analyze(args.state_file)
            _emit(args, pipeline.format_metrics(metrics), io.dumps_json(metrics),
                  "analysis.json" if args.format == "machine" else "analysis.txt")
            return 0
        if args.command == "pipeline":
            sc = pipeline.load_scenario(args.scenario)
            if args.estimator:
                from dataclasses import replace
                sc = replace(sc, pipeline=replace(sc.pipeline, estimator=args.estimator))
            summary = pipeline.cmd_pipeline(sc, n_reps=args.reps, seed=args.seed,
                                            out_dir=args.out, workers=args.workers)
            _emit(args, pipeline.format_summary(summary), io.dumps_json(summary),
                  "summary.json" if args.format == "machine" else "summary.txt")
            return 0
    except (io.FormatError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 1


if __name__ == "__main__":
    sys.exit(main())
