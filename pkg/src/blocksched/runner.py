"""Experiment orchestration: single runs, sweeps, tables, and tuning.

A sweep runs every (scheduler, scenario, trace, seed) combination,
persists one summary record per run, and aggregates mean metrics per
(scheduler, scenario, trace group) into a comparison table. Records are
the source of truth: a table regenerated from the record files equals
the one produced by the sweep, and an interrupted sweep resumes by
skipping combinations whose record file already exists.

Baseline rows carry qoe_gain_vs_baseline_pct = 100 * (qoe_proposed -
qoe_baseline) / qoe_baseline for the same scenario and trace group; the
proposed row carries its gain over the strongest baseline, so a
positive value there means it beat every competitor.
"""
from __future__ import annotations

import json
import math
import os
import re
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

from .errors import ConfigurationError
from .linksim import SimulationResult, Simulation, decision_dicts, event_dicts
from .metrics import DEFAULT_ALPHA, QoEReport, build_report
from .model import ScenarioConfig, load_scenario
from .predictor import Thresholds
from .schedulers import make_scheduler
from .traces import LinkTrace, filter_corpus, load_trace
from .units import PACKET_PAYLOAD_BYTES

DEFAULT_RTT_MS = 80.0
DEFAULT_LOSS_RATE = 0.005
DEFAULT_THRESHOLD_LOW_MBPS = 0.8
DEFAULT_THRESHOLD_HIGH_MBPS = 2.3


@dataclass(frozen=True)
class RunParams:
    """Everything about a run except the trace, scenario, and policy."""

    duration_s: float
    seed: int = 0
    rtt_s: float = DEFAULT_RTT_MS / 1000.0
    loss_rate: float = DEFAULT_LOSS_RATE
    alpha: float = DEFAULT_ALPHA
    thresholds: Thresholds = field(
        default_factory=lambda: Thresholds.from_mbps(DEFAULT_THRESHOLD_LOW_MBPS,
                                                     DEFAULT_THRESHOLD_HIGH_MBPS))
    literal_mid_branch: bool = False
    payload_bytes: int = PACKET_PAYLOAD_BYTES


def execute_run(trace: LinkTrace, scenario: ScenarioConfig, scheduler_name: str,
                params: RunParams, forced_loss_sends=()) -> tuple[SimulationResult, QoEReport]:
    scheduler = make_scheduler(scheduler_name, scenario, params.literal_mid_branch)
    sim = Simulation(trace, scenario, scheduler,
                     duration_s=params.duration_s, seed=params.seed, rtt_s=params.rtt_s,
                     loss_rate=params.loss_rate, thresholds=params.thresholds,
                     payload_bytes=params.payload_bytes, forced_loss_sends=forced_loss_sends)
    result = sim.run()
    return result, build_report(result, trace, params.alpha)


@dataclass
class RunConfig:
    """File-facing configuration for the run subcommand."""

    scenario_path: str
    trace_path: str
    scheduler: str
    duration_s: float
    seed: int = 0
    rtt_ms: float = DEFAULT_RTT_MS
    loss_rate: float = DEFAULT_LOSS_RATE
    alpha: float = DEFAULT_ALPHA
    threshold_low_mbps: float = DEFAULT_THRESHOLD_LOW_MBPS
    threshold_high_mbps: float = DEFAULT_THRESHOLD_HIGH_MBPS
    trace_format: str | None = None
    literal_mid_branch: bool = False

    def params(self) -> RunParams:
        if self.duration_s <= 0:
            raise ConfigurationError("duration_s must be positive, got %r" % self.duration_s)
        return RunParams(
            duration_s=self.duration_s,
            seed=self.seed,
            rtt_s=self.rtt_ms / 1000.0,
            loss_rate=self.loss_rate,
            alpha=self.alpha,
            thresholds=Thresholds.from_mbps(self.threshold_low_mbps, self.threshold_high_mbps),
            literal_mid_branch=self.literal_mid_branch,
        )


def run_single(config: RunConfig) -> tuple[SimulationResult, QoEReport]:
    scenario = load_scenario(config.scenario_path)
    trace = load_trace(config.trace_path, config.trace_format)
    return execute_run(trace, scenario, config.scheduler, config.params())


def write_event_log(result: SimulationResult, path: str) -> None:
    with open(path, "w") as fh:
        for record in event_dicts(result):
            fh.write(json.dumps(record, sort_keys=True))
            fh.write("\n")
        for record in decision_dicts(result):
            fh.write(json.dumps({"kind": "decision", **record}, sort_keys=True))
            fh.write("\n")


# -- sweep records -----------------------------------------------------

def _slug(text: str) -> str:
    base = os.path.splitext(os.path.basename(text))[0]
    return re.sub(r"[^A-Za-z0-9_.-]", "-", base)


def record_key(scheduler: str, scenario_name: str, trace_tag: str, seed: int) -> str:
    return "%s__%s__%s__s%d" % (_slug(scheduler), _slug(scenario_name), _slug(trace_tag), seed)


def summary_record(report: QoEReport) -> dict:
    record = report.to_dict()
    del record["blocks"]  # keep per-run files small; block detail lives in event logs
    return record


def _sweep_worker(args) -> dict:
    trace, scenario, scheduler_name, params = args
    _, report = execute_run(trace, scenario, scheduler_name, params)
    return summary_record(report)


def run_sweep(traces, scenarios, scheduler_names, seeds, params: RunParams,
              records_dir: str | None = None, trace_group: str = "corpus",
              jobs: int = 1, log=None) -> "ComparisonTable":
    """Run the full grid and aggregate. traces/scenarios are parsed objects;
    seeds is the list of per-run seeds. params.seed is ignored."""
    traces = list(traces)
    scenarios = list(scenarios)
    if not traces:
        raise ConfigurationError("sweep has no traces to run")
    if not scenarios or not scheduler_names or not seeds:
        raise ConfigurationError("sweep needs at least one scenario, scheduler, and seed")
    if records_dir:
        os.makedirs(records_dir, exist_ok=True)
    combos = []
    for scenario in scenarios:
        for scheduler_name in scheduler_names:
            for trace in traces:
                for seed in seeds:
                    combos.append((trace, scenario, scheduler_name, seed))
    records: list[dict] = []
    pending = []
    for trace, scenario, scheduler_name, seed in combos:
        path = None
        if records_dir:
            path = os.path.join(records_dir, record_key(scheduler_name, scenario.name,
                                                        trace.source_tag, seed) + ".json")
            if os.path.exists(path):
                with open(path) as fh:
                    records.append(json.load(fh))
                continue
        pending.append((path, (trace, scenario, scheduler_name, replace(params, seed=seed))))
    total = len(combos)
    done = total - len(pending)
    if jobs > 1 and len(pending) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            fresh = list(pool.map(_sweep_worker, [args for _, args in pending], chunksize=1))
    else:
        fresh = []
        for _, args in pending:
            fresh.append(_sweep_worker(args))
            done += 1
            if log:
                log("run %d/%d %s/%s/%s seed=%d" % (done, total, args[2], args[1].name,
                                                    args[0].source_tag, args[3].seed))
    for (path, _), record in zip(pending, fresh):
        if path:
            with open(path, "w") as fh:
                json.dump(record, fh, sort_keys=True)
                fh.write("\n")
        records.append(record)
    return build_table(records, trace_group)


@dataclass(frozen=True)
class ComparisonRow:
    scheduler: str
    scenario: str
    trace_group: str
    runs: int
    delivery_ratio: float
    utilization: float
    effective_utilization: float
    qoe: float
    qoe_gain_vs_baseline_pct: float | None

    def to_dict(self) -> dict:
        return {
            "scheduler": self.scheduler,
            "scenario": self.scenario,
            "trace_group": self.trace_group,
            "runs": self.runs,
            "delivery_ratio": self.delivery_ratio,
            "utilization": self.utilization,
            "effective_utilization": self.effective_utilization,
            "qoe": self.qoe,
            "qoe_gain_vs_baseline_pct": self.qoe_gain_vs_baseline_pct,
        }


@dataclass(frozen=True)
class ComparisonTable:
    rows: tuple

    def row(self, scheduler: str, scenario: str) -> ComparisonRow | None:
        for r in self.rows:
            if r.scheduler == scheduler and r.scenario == scenario:
                return r
        return None

    def to_json_lines(self) -> str:
        return "".join(json.dumps(r.to_dict(), sort_keys=True) + "\n" for r in self.rows)

    def to_text(self) -> str:
        headers = ["scheduler", "scenario", "trace_group", "runs", "delivery_ratio",
                   "utilization", "effective_util", "qoe", "qoe_gain_vs_baseline_%"]
        body = []
        for r in self.rows:
            gain = "-" if r.qoe_gain_vs_baseline_pct is None else "%+.2f" % r.qoe_gain_vs_baseline_pct
            body.append([r.scheduler, r.scenario, r.trace_group, str(r.runs),
                         "%.4f" % r.delivery_ratio, "%.4f" % r.utilization,
                         "%.4f" % r.effective_utilization, "%.4f" % r.qoe, gain])
        widths = [max(len(h), *(len(row[i]) for row in body)) if body else len(h)
                  for i, h in enumerate(headers)]
        lines = ["  ".join(h.ljust(w) for h, w in zip(headers, widths)).rstrip()]
        lines.append("  ".join("-" * w for w in widths))
        for row in body:
            lines.append("  ".join(c.ljust(w) for c, w in zip(row, widths)).rstrip())
        return "\n".join(lines) + "\n"


def _mean(values) -> float:
    values = list(values)
    return math.fsum(values) / len(values)


def build_table(records, trace_group: str = "corpus") -> ComparisonTable:
    """Aggregate per-run summary records into mean-metric rows."""
    records = sorted(records, key=lambda r: (r["scheduler"], r["scenario"], r["trace"], r["seed"]))
    if not records:
        raise ConfigurationError("no run records to aggregate")
    groups: dict[tuple, list[dict]] = {}
    for rec in records:
        groups.setdefault((rec["scheduler"], rec["scenario"]), []).append(rec)
    means = {
        key: {
            "runs": len(rs),
            "delivery_ratio": _mean(r["delivery_ratio"] for r in rs),
            "utilization": _mean(r["utilization"] for r in rs),
            "effective_utilization": _mean(r["effective_utilization"] for r in rs),
            "qoe": _mean(r["qoe"] for r in rs),
        }
        for key, rs in groups.items()
    }
    scenarios = sorted({s for _, s in means})
    rows = []
    for scenario in scenarios:
        by_sched = {sched: m for (sched, s), m in means.items() if s == scenario}
        proposed_qoe = by_sched.get("proposed", {}).get("qoe")
        baseline_qoes = {s: m["qoe"] for s, m in by_sched.items() if s != "proposed"}
        order = sorted(by_sched, key=lambda s: (s != "proposed", s))
        for sched in order:
            m = by_sched[sched]
            gain = None
            if sched == "proposed":
                if baseline_qoes:
                    best = max(baseline_qoes.values())
                    if best > 0:
                        gain = 100.0 * (proposed_qoe - best) / best
            elif proposed_qoe is not None and m["qoe"] > 0:
                gain = 100.0 * (proposed_qoe - m["qoe"]) / m["qoe"]
            rows.append(ComparisonRow(
                scheduler=sched, scenario=scenario, trace_group=trace_group,
                runs=m["runs"], delivery_ratio=m["delivery_ratio"],
                utilization=m["utilization"],
                effective_utilization=m["effective_utilization"], qoe=m["qoe"],
                qoe_gain_vs_baseline_pct=gain))
    return ComparisonTable(rows=tuple(rows))


def load_records(records_dir: str) -> list[dict]:
    try:
        names = sorted(os.listdir(records_dir))
    except OSError as exc:
        raise ConfigurationError("cannot list records dir %s: %s" % (records_dir, exc)) from exc
    records = []
    for name in names:
        if name.endswith(".json"):
            with open(os.path.join(records_dir, name)) as fh:
                records.append(json.load(fh))
    if not records:
        raise ConfigurationError("no .json run records under %s" % records_dir)
    return records


# -- threshold tuning ---------------------------------------------------

@dataclass(frozen=True)
class TuneResult:
    best_low_mbps: float
    best_high_mbps: float
    cells: tuple  # dicts with low_mbps, high_mbps, mean_qoe, runs


def tune_thresholds(grid_low_mbps, grid_high_mbps, traces, scenario: ScenarioConfig,
                    params: RunParams, seeds=(0,), cells_path: str | None = None,
                    log=None) -> TuneResult:
    """Grid-search (L, H) by mean proposed-scheduler QoE over the given
    traces; ties prefer the smallest (L, H). Every cell is persisted when
    cells_path is given."""
    pairs = [(lo, hi) for lo in grid_low_mbps for hi in grid_high_mbps]
    if not pairs:
        raise ConfigurationError("empty threshold grid")
    for lo, hi in pairs:
        if not 0 < lo < hi:
            raise ConfigurationError("grid pair (%r, %r) violates 0 < L < H" % (lo, hi))
    traces = list(traces)
    if not traces:
        raise ConfigurationError("threshold tuning has no traces to run")
    cells = []
    for lo, hi in sorted(pairs):
        qoes = []
        for trace in traces:
            for seed in seeds:
                cell_params = replace(params, seed=seed, thresholds=Thresholds.from_mbps(lo, hi))
                _, report = execute_run(trace, scenario, "proposed", cell_params)
                qoes.append(report.qoe)
        cells.append({"low_mbps": lo, "high_mbps": hi, "mean_qoe": _mean(qoes), "runs": len(qoes)})
        if log:
            log("tune cell L=%.3g H=%.3g mean_qoe=%.4f" % (lo, hi, cells[-1]["mean_qoe"]))
    best = max(cells, key=lambda c: (c["mean_qoe"], -c["low_mbps"], -c["high_mbps"]))
    if cells_path:
        with open(cells_path, "w") as fh:
            for cell in cells:
                fh.write(json.dumps(cell, sort_keys=True))
                fh.write("\n")
    return TuneResult(best_low_mbps=best["low_mbps"], best_high_mbps=best["high_mbps"],
                      cells=tuple(cells))


def load_filtered_corpus(corpus_dir: str, fmt: str | None = None) -> list[LinkTrace]:
    """Load every trace file in a directory and apply the corpus filter."""
    try:
        names = sorted(os.listdir(corpus_dir))
    except OSError as exc:
        raise ConfigurationError("cannot list corpus dir %s: %s" % (corpus_dir, exc)) from exc
    traces = []
    for name in names:
        path = os.path.join(corpus_dir, name)
        if os.path.isfile(path) and not name.startswith("."):
            traces.append(load_trace(path, fmt))
    if not traces:
        raise ConfigurationError("no trace files under %s" % corpus_dir)
    kept = filter_corpus(traces)
    if not kept:
        raise ConfigurationError(
            "corpus %s is empty after filtering (keep: mean < 3 Mbps and min > 0.2 Mbps)"
            % corpus_dir)
    return kept
