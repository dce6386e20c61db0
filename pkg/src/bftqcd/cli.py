"""Command-line entry point: ``bftqcd run|sweep|ratio CONFIG``.

Exit codes: 0 success, 1 configuration error, 2 I/O error,
3 censoring above the 1% limit (outputs are still written).
"""

from __future__ import annotations

import argparse
import sys

from .cusum import ConfigurationError
from .experiment import (CSV_HEADER, SweepRow, bound_delay, delay_ratio_report, emit_outputs,
                         load_config, run_point, run_sweep)

EXIT_OK, EXIT_CONFIG, EXIT_IO, EXIT_CENSORED = 0, 1, 2, 3


def build_parser():
    p = argparse.ArgumentParser(prog="bftqcd",
                                description="Byzantine-tolerant distributed CUSUM experiments")
    sub = p.add_subparsers(dest="command", required=True)
    helps = {
        "run": "ARL and delay at the first threshold (or --threshold)",
        "sweep": "delay-vs-ARL curve over every configured threshold",
        "ratio": "sweep plus delay ratio against the N-1 honest centralized baseline",
    }
    for name, text in helps.items():
        sp = sub.add_parser(name, help=text)
        sp.add_argument("config", help="flat TOML experiment file")
        sp.add_argument("--seed", type=int, help="master seed (overrides the file)")
        sp.add_argument("--trials", type=int, help="trials per point (overrides the file)")
        sp.add_argument("--out", help="output directory (overrides the file)")
        sp.add_argument("--workers", type=int, help="worker processes; never changes results")
        if name == "run":
            sp.add_argument("--threshold", type=float, help="threshold to evaluate")
    return p


def _print_rows(rows, stream):
    stream.write(CSV_HEADER + "\n")
    for r in rows:
        stream.write(f"{r.scheme},{r.model},{r.N},{r.threshold:g},{r.arl_mean:.6g},"
                     f"{r.arl_se:.3g},{r.delay_mean:.6g},{r.delay_se:.3g},{r.bound_delay:.6g},"
                     f"{r.censored_arl},{r.censored_delay},{r.trials},{r.seed}\n")
        if r.error:
            stream.write(f"  warning: {r.error}\n")


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config, seed=args.seed, trials=args.trials, output=args.out,
                          workers=args.workers)
        if args.command == "run" and args.threshold is not None:
            cfg = cfg.replace(thresholds=(args.threshold,))
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ConfigurationError, ValueError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    try:
        ratios = None
        if args.command == "run":
            h = cfg.thresholds[0]
            arl, delay = run_point(cfg, h)
            flags = [f"{m.metric} censored in {m.censored_count}/{m.trials} trials"
                     for m in (arl, delay) if m.flagged]
            rows = [SweepRow(cfg.scheme_name, cfg.model, cfg.N, h, arl.mean, arl.std_error,
                             delay.mean, delay.std_error, bound_delay(cfg, h, arl.mean),
                             arl.censored_count, delay.censored_count, cfg.trials, cfg.seed,
                             "; ".join(flags))]
        else:
            rows = run_sweep(cfg)
            if args.command == "ratio":
                ratios = [delay_ratio_report(cfg, sweep=rows)]
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    _print_rows(rows, sys.stdout)
    if ratios:
        for r in ratios[0]:
            print(f"ratio h={r.threshold:g}: {r.ratio:.4g} (ceiling {r.ratio_bound:.4g}, "
                  f"baseline threshold {r.baseline_threshold:.4g})")
    try:
        paths = emit_outputs([rows], cfg.output, cfg, ratios)
    except OSError as exc:
        print(f"I/O error: cannot write outputs to {cfg.output}: {exc}", file=sys.stderr)
        return EXIT_IO
    for p in paths:
        print(f"wrote {p}")
    if any(r.error for r in rows):
        print("censoring above 1% of trials; estimates are biased", file=sys.stderr)
        return EXIT_CENSORED
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
