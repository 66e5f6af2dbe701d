"""``forecast`` command-line entry point."""

from __future__ import annotations

import argparse
import json
import logging
import sys

from .adf import adf_test
from .data import SyntheticKind, generate_synthetic, ingest_csv, write_series_csv
from .errors import ForecastError
from .experiment import ExperimentConfig, run_experiment, stats_only


def _cmd_run(args) -> int:
    config = ExperimentConfig.load(args.config)
    report = run_experiment(config, workers=args.workers)
    failed = [p for p in report["results"] if p["status"] != "ok"]
    for p in failed:
        print(f"{p['station']}/{p['variant']}: {p['error']}", file=sys.stderr)
    print(f"wrote {config.output_dir}/report.json "
          f"({len(report['results']) - len(failed)} of {len(report['results'])} pairs ok)")
    return 1 if report["all_failed"] else 0


def _cmd_stats(args) -> int:
    results = stats_only(args.metrics, args.reference, args.alpha)
    if args.json:
        print(json.dumps({m: r.as_dict() for m, r in results.items()}, indent=2))
        return 0
    for metric, res in results.items():
        f = res.friedman
        print(f"{metric}: chi2_F={f.chi2:.3f} F_F={f.ff:.3f} p={f.p_value:.3f}")
        for c in res.comparisons:
            mark = "reject" if c.reject else "keep"
            print(f"  {c.model:<16} z={c.z:7.3f} p={c.p_value:.3f} thr={c.threshold:.4f} {mark}")
    return 0


def _cmd_synth(args) -> int:
    series = generate_synthetic(args.kind, args.length, args.seed, args.start)
    write_series_csv(series, args.out)
    return 0


def _cmd_adf(args) -> int:
    res = adf_test(ingest_csv(args.input), args.max_lag)
    print(f"statistic={res.statistic:.4f} p_value={res.p_value:.4f}" + (" (table edge)" if res.clamped else ""))
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="forecast", description=__doc__)
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run a study from a JSON config")
    r.add_argument("--config", required=True)
    r.add_argument("--workers", type=int, default=None,
                   help="overrides FORECAST_WORKERS and the config")
    r.set_defaults(func=_cmd_run)

    s = sub.add_parser("stats", help="two-step model comparison from a metrics CSV")
    s.add_argument("--metrics", required=True)
    s.add_argument("--reference", default="PROP")
    s.add_argument("--alpha", type=float, default=0.10)
    s.add_argument("--json", action="store_true")
    s.set_defaults(func=_cmd_stats)

    g = sub.add_parser("synth", help="write a synthetic monthly series")
    g.add_argument("--kind", choices=[k.value for k in SyntheticKind], default="seasonal-ar")
    g.add_argument("--length", type=int, default=480)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--start", default="1980-01")
    g.add_argument("--out", required=True)
    g.set_defaults(func=_cmd_synth)

    a = sub.add_parser("adf", help="augmented Dickey-Fuller test on a series CSV")
    a.add_argument("--input", required=True)
    a.add_argument("--max-lag", type=int, default=None)
    a.set_defaults(func=_cmd_adf)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ForecastError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
