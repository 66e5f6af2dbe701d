"""Multi-station, multi-variant study runner and report writer.

Outputs in the configured directory:

- ``report.json``: provenance, per-pair metrics and parameters, selected
  lags, ADF checks and the two-step comparison per metric.
- ``metrics.csv``: long format ``station,model,metric,value``; this is also
  the input format of :func:`stats_only`.
- ``forecasts/<station>_<variant>.csv``: ``month,actual,forecast``.
- ``bo_trace/<station>.csv``: every BO evaluation of every LSTM variant.
- ``timings.json``: wall-clock seconds per pair.

Everything except ``timings.json`` is free of wall-clock data, so runs with
the same config and seed produce identical bytes regardless of the worker
count.
"""

from __future__ import annotations

import csv
import hashlib
import json
import logging
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
from threadpoolctl import threadpool_limits

from . import __version__
from .adf import adf_test
from .bayesopt import default_space
from .data import ingest_csv
from .errors import ForecastError, InsufficientData, ParseError
from .metrics import arank, metric_set
from .pipeline import PipelineConfig, Variant, run_variant
from .series import Series, SplitSpec
from .stats import ComparisonTable, TwoStepResult, two_step

log = logging.getLogger(__name__)

METRICS = ("rmse", "mae", "smape", "arank")
STUDY_KEYS = ("variants", "validation_len", "test_len", "n_initial", "n_iterations",
              "epochs", "patience", "deseasonalize", "seed", "reference", "alpha")


@dataclass
class ExperimentConfig:
    stations: dict  # name -> csv path
    variants: list = field(default_factory=lambda: [v.value for v in Variant])
    validation_len: int = 60
    test_len: int = 60
    n_initial: int = 10
    n_iterations: int = 40
    epochs: int = 150
    patience: int = 20
    deseasonalize: bool = True
    seed: int = 0
    reference: str = "PROP"
    alpha: float = 0.10
    output_dir: str = "out"
    workers: int = 1

    def __post_init__(self):
        if not self.stations:
            raise ValueError("at least one station is required")
        if not self.variants:
            raise ValueError("variant list must not be empty")
        self.variants = [Variant(v).value for v in self.variants]
        self.stations = {str(k): str(v) for k, v in self.stations.items()}
        for name, path in self.stations.items():
            if not Path(path).is_file():
                raise FileNotFoundError(f"station {name}: {path} does not exist")

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        """Read a JSON config; relative paths resolve against the file's directory."""
        path = Path(path)
        raw = json.loads(path.read_text(encoding="utf-8"))
        base = path.parent
        raw["stations"] = {k: str(base / v) for k, v in raw["stations"].items()}
        if "output_dir" in raw:
            raw["output_dir"] = str(base / raw["output_dir"])
        return cls(**raw)

    def study(self) -> dict:
        """Settings that determine results (paths and worker count excluded)."""
        out = {k: getattr(self, k) for k in STUDY_KEYS}
        out["stations"] = sorted(self.stations)
        return out

    def config_hash(self) -> str:
        blob = json.dumps(self.study(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()

    def pipeline_config(self, variant) -> PipelineConfig:
        return PipelineConfig(
            split=SplitSpec(self.validation_len, self.test_len),
            space=default_space(),
            n_initial=self.n_initial,
            n_iterations=self.n_iterations,
            epochs=self.epochs,
            patience=self.patience,
            seed=self.seed,
            variant=Variant(variant),
            deseasonalize=self.deseasonalize,
        )


def resolve_workers(config: ExperimentConfig, workers: Optional[int] = None) -> int:
    """Explicit argument, then FORECAST_WORKERS, then the config value."""
    if workers is None:
        env = os.environ.get("FORECAST_WORKERS")
        workers = int(env) if env else config.workers
    return max(1, int(workers))


def _run_pair(task):
    station, variant, values, start, pconf = task
    series = Series(values, 12, start)
    start_time = time.perf_counter()
    # single-threaded BLAS keeps results independent of the pool layout
    with threadpool_limits(limits=1):
        try:
            res = run_variant(series, pconf, station)
        except ForecastError as exc:
            log.warning("%s/%s failed: %s", station, variant, exc)
            return {"station": station, "variant": variant, "status": "error",
                    "error": f"{type(exc).__name__}: {exc}",
                    "seconds": time.perf_counter() - start_time}
    trace = None
    if res.trace is not None:
        trace = [
            {"iteration": r.iteration, **r.params, "value": r.value,
             "best_so_far": r.best_so_far, "cached": r.cached}
            for r in res.trace.records
        ]
    return {
        "station": station, "variant": variant, "status": "ok",
        "forecasts": [float(v) for v in res.forecasts],
        "actual": [float(v) for v in res.actual],
        "params": None if res.params is None else res.params.as_dict(),
        "validation_objective": res.validation_objective,
        "trace": trace,
        "seconds": time.perf_counter() - start_time,
    }


def _json_float(x):
    if x is None or (isinstance(x, float) and not math.isfinite(x)):
        return None
    return x


def _tests(values: dict, stations: list, variants: list, reference: str, alpha: float) -> dict:
    """Two-step comparison per metric over stations where every variant succeeded."""
    out = {}
    if len(variants) < 2:
        for metric in METRICS:
            out[metric] = {"skipped": "only one model (k = 1)"}
        log.info("two-step testing skipped: only one model")
        return out
    if reference not in variants:
        for metric in METRICS:
            out[metric] = {"skipped": f"reference {reference} not among the variants"}
        return out
    for metric in METRICS:
        rows = [s for s in stations if all((s, v) in values.get(metric, {}) for v in variants)]
        if len(rows) < 2:
            out[metric] = {"skipped": f"needs at least 2 complete stations, have {len(rows)}"}
            log.info("two-step testing for %s skipped: %d complete stations", metric, len(rows))
            continue
        table = ComparisonTable(variants, rows,
                                [[values[metric][(s, v)] for v in variants] for s in rows])
        res = two_step(table, reference, alpha, metric)
        d = res.as_dict()
        d["omnibus_rejected"] = bool(res.friedman.p_value < alpha)
        out[metric] = d
    return out


def _write_csv(path: Path, header, rows):
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def run_experiment(config: ExperimentConfig, workers: Optional[int] = None) -> dict:
    """Run every (station, variant) pair, then write and return the report."""
    out_dir = Path(config.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    stations = sorted(config.stations)
    series = {name: ingest_csv(config.stations[name]) for name in stations}

    adf = {}
    for name in stations:
        try:
            r = adf_test(series[name])
            adf[name] = {"statistic": r.statistic, "p_value": r.p_value, "clamped": r.clamped}
            log.info("ADF %s: statistic %.4f, p %.3f", name, r.statistic, r.p_value)
        except ForecastError as exc:
            adf[name] = {"error": str(exc)}
            log.warning("ADF %s failed: %s", name, exc)

    tasks = [(name, v, series[name].values, series[name].start_label, config.pipeline_config(v))
             for name in stations for v in config.variants]
    n_workers = resolve_workers(config, workers)
    log.info("running %d pairs on %d worker(s)", len(tasks), n_workers)
    if n_workers == 1:
        results = [_run_pair(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=n_workers) as pool:
            results = list(pool.map(_run_pair, tasks))

    by_pair = {(r["station"], r["variant"]): r for r in results}
    values: dict = {m: {} for m in METRICS}
    pairs = []
    for name in stations:
        ok = [v for v in config.variants if by_pair[(name, v)]["status"] == "ok"]
        ranks = {}
        if len(ok) >= 2:
            r0 = by_pair[(name, ok[0])]
            ar = arank(r0["actual"], [by_pair[(name, v)]["forecasts"] for v in ok])
            ranks = dict(zip(ok, (float(a) for a in ar)))
        for v in config.variants:
            r = by_pair[(name, v)]
            entry = {"station": name, "variant": v, "status": r["status"]}
            if r["status"] == "ok":
                ms = metric_set(r["actual"], r["forecasts"], ranks.get(v))
                entry["metrics"] = ms.as_dict()
                entry["params"] = r["params"]
                entry["validation_objective"] = _json_float(r["validation_objective"])
                for metric, value in ms.as_dict().items():
                    values[metric][(name, v)] = value
            else:
                entry["error"] = r["error"]
            pairs.append(entry)

    lags = {name: {v: by_pair[(name, v)]["params"]["m"]
                   for v in config.variants
                   if by_pair[(name, v)]["status"] == "ok" and by_pair[(name, v)]["params"]}
            for name in stations}

    report = {
        "provenance": {"config_hash": config.config_hash(), "seed": config.seed,
                       "version": __version__, "config": config.study()},
        "adf": adf,
        "results": pairs,
        "selected_lags": lags,
        "tests": _tests(values, stations, list(config.variants), config.reference, config.alpha),
        "all_failed": all(p["status"] != "ok" for p in pairs),
    }
    (out_dir / "report.json").write_text(json.dumps(report, indent=2) + "\n", encoding="utf-8")

    _write_csv(out_dir / "metrics.csv", ["station", "model", "metric", "value"],
               [[s, v, m, repr(values[m][(s, v)])]
                for s in stations for v in config.variants for m in METRICS
                if (s, v) in values[m]])
    for r in results:
        if r["status"] != "ok":
            continue
        labels = series[r["station"]].labels()[-len(r["actual"]):]
        _write_csv(out_dir / "forecasts" / f"{r['station']}_{r['variant']}.csv",
                   ["month", "actual", "forecast"],
                   [[lab, repr(a), repr(f)] for lab, a, f in zip(labels, r["actual"], r["forecasts"])])
    timings = {f"{r['station']}/{r['variant']}": r["seconds"] for r in results}
    (out_dir / "timings.json").write_text(json.dumps(timings, indent=2) + "\n", encoding="utf-8")
    names = [d.name for d in default_space().dims]
    for name in stations:
        rows = []
        for v in config.variants:
            r = by_pair[(name, v)]
            if r["status"] != "ok" or not r["trace"]:
                continue
            pinned = r["params"]["m"]
            for rec in r["trace"]:
                rows.append([v, rec["iteration"], *[repr(rec.get(n, pinned)) for n in names],
                             repr(rec["value"]), repr(rec["best_so_far"]), int(rec["cached"])])
        if rows:
            _write_csv(out_dir / "bo_trace" / f"{name}.csv",
                       ["variant", "iteration", *names, "value", "best_so_far", "cached"], rows)
    return report


def read_metrics_csv(path) -> dict:
    """Parse a long-format metrics CSV into {metric: {(station, model): value}}."""
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows or [c.strip() for c in rows[0]] != ["station", "model", "metric", "value"]:
        raise ParseError("header must be 'station,model,metric,value'", 1)
    out: dict = {}
    for row_no, row in enumerate(rows[1:], start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != 4:
            raise ParseError(f"expected 4 fields, got {len(row)}", row_no)
        station, model, metric = (c.strip() for c in row[:3])
        try:
            value = float(row[3])
        except ValueError:
            raise ParseError(f"value {row[3]!r} is not a number", row_no) from None
        cell = out.setdefault(metric, {})
        if (station, model) in cell:
            raise ParseError(f"duplicate entry for {station}/{model}/{metric}", row_no)
        cell[(station, model)] = value
    return out


def _ordered_unique(items):
    seen = {}
    for x in items:
        seen.setdefault(x, None)
    return list(seen)


def stats_only(metrics_csv, reference: str = "PROP", alpha: float = 0.10) -> dict:
    """Two-step comparison for every metric in a metrics CSV, without forecasting.

    Models and stations keep their first-appearance order.
    """
    data = read_metrics_csv(metrics_csv)
    out = {}
    for metric, cells in data.items():
        stations = _ordered_unique(s for s, _ in cells)
        models = _ordered_unique(m for _, m in cells)
        missing = [(s, m) for s in stations for m in models if (s, m) not in cells]
        if missing:
            raise ParseError(f"{metric}: no value for {missing[0][0]}/{missing[0][1]}")
        if len(stations) < 2:
            raise InsufficientData(f"{metric}: needs at least 2 datasets, got {len(stations)}")
        table = ComparisonTable(models, stations, [[cells[(s, m)] for m in models] for s in stations])
        out[metric] = two_step(table, reference, alpha, metric)
    return out
