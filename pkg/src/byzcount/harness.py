"""Run configuration, experiments, sweeps, evaluation and report output.

A run config is one YAML (or JSON) mapping::

    topology:   {model: hnd, n: 256, d: 8, seed: 0}      # or {model: file, path: graph.txt}
    protocol:   {id: congest, params: {gamma: "0.72", delta: "0.5", eta: "0.05", c1: "8", c: 1}}
    placement:  {kind: random-k, budget: 2}               # none | random-k | surround | explicit
    strategy:   {kind: beacon-spam, params: {length: 1}}
    seed: 0
    stop:       {kind: all-terminated, max_rounds: 20000} # all-decided | all-terminated | max-rounds
    evaluation: {c_lo: 0.5, c_hi: 1.5, eval_set: goodtl, gamma: 0.72}
    output:     {dir: out, formats: [json, csv, plotdata]}

``topology.seed`` defaults to the run seed.  A copy-stitch strategy takes
``{hub, copies}`` and the topology section then describes the base graph.
"""
from __future__ import annotations

import csv
import io
import json
import math
import os
import statistics
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from typing import Optional

import numpy as np
import yaml

from .adversary import PlacementSpec, StrategySpec, make_strategy, place_byzantine, stitch_copies
from .engine import ConfigError, RunReport, Simulation, StopCondition, make_protocol
from .graph import (EXHAUSTIVE_CAP, ParameterError, Topology, generate_hnd, good_set,
                    good_set_distance_only, load_topology, tree_like_vertices, vertex_expansion_exact)

SECTIONS = ("topology", "protocol", "placement", "strategy", "seed", "stop", "evaluation", "output")


@dataclass
class RunConfig:
    topology: dict = field(default_factory=lambda: {"model": "hnd", "n": 64, "d": 8})
    protocol: dict = field(default_factory=lambda: {"id": "congest", "params": {}})
    placement: dict = field(default_factory=lambda: {"kind": "none"})
    strategy: dict = field(default_factory=lambda: {"kind": "silent"})
    seed: int = 0
    stop: dict = field(default_factory=lambda: {"kind": "all-terminated", "max_rounds": 20000})
    evaluation: Optional[dict] = None
    output: dict = field(default_factory=dict)

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        if not isinstance(d, dict):
            raise ConfigError("config must be a mapping")
        unknown = set(d) - set(SECTIONS)
        if unknown:
            raise ConfigError(f"unknown config sections: {sorted(unknown)}")
        cfg = cls(**{k: v for k, v in d.items() if v is not None or k == "evaluation"})
        cfg.validate()
        return cfg

    def validate(self) -> None:
        model = self.topology.get("model", "hnd")
        if model not in ("hnd", "file"):
            raise ConfigError(f"unknown topology model {model!r}")
        if model == "file" and "path" not in self.topology:
            raise ConfigError("file topology needs a path")
        if "id" not in self.protocol:
            raise ConfigError("protocol section needs an id")
        StopCondition(self.stop.get("kind", "all-terminated"), int(self.stop.get("max_rounds", 20000)))
        PlacementSpec.from_dict(self.placement)
        self.seed = int(self.seed)

    def to_dict(self) -> dict:
        return json.loads(json.dumps(asdict(self), default=str))

    def with_seed(self, seed: int) -> "RunConfig":
        d = self.to_dict()
        d["seed"] = int(seed)
        return RunConfig.from_dict(d)


def load_config(path) -> RunConfig:
    with open(path) as fh:
        data = yaml.safe_load(fh)
    return RunConfig.from_dict(data or {})


# ---------------------------------------------------------------------------
# running
# ---------------------------------------------------------------------------

def build_topology(cfg: RunConfig) -> Topology:
    top = cfg.topology
    if top.get("model", "hnd") == "file":
        return load_topology(top["path"])
    seed = int(top.get("seed", cfg.seed))
    return generate_hnd(int(top["n"]), int(top.get("d", 8)), seed)


def build_simulation(cfg: RunConfig, **kw) -> Simulation:
    base = build_topology(cfg)
    spec = StrategySpec.from_dict(cfg.strategy)
    protocol = make_protocol(cfg.protocol["id"], cfg.protocol.get("params") or {})
    if spec.kind == "copy-stitch":
        params = dict(spec.params)
        st = stitch_copies(base, int(params.pop("hub", 0)), int(params.pop("copies", 2)), cfg.seed)
        strategy = make_strategy("copy-stitch", dict(params, stitched=st))
        return Simulation(st.topo, protocol, byz=[st.hub], adversary=strategy, seed=cfg.seed, **kw)
    byz = place_byzantine(base, PlacementSpec.from_dict(cfg.placement), cfg.seed)
    strategy = make_strategy(spec.kind, spec.params)
    return Simulation(base, protocol, byz=byz, adversary=strategy, seed=cfg.seed, **kw)


def run_experiment(config, seed: Optional[int] = None) -> RunReport:
    cfg = config if isinstance(config, RunConfig) else RunConfig.from_dict(config)
    if seed is not None:
        cfg = cfg.with_seed(seed)
    sim = build_simulation(cfg)
    watch = cfg.stop.get("watch")
    stop = StopCondition(cfg.stop.get("kind", "all-terminated"), int(cfg.stop.get("max_rounds", 20000)),
                         frozenset(int(v) for v in watch) if watch is not None else None)
    report = sim.run_until(stop, cfg.to_dict())
    if cfg.evaluation:
        ev = dict(cfg.evaluation)
        eval_set, flags = evaluation_set(sim.topo, sim.byz, ev.get("eval_set", "goodtl"),
                                         ev.get("gamma", cfg.protocol.get("params", {}).get("gamma", "0.72")))
        metrics = score_estimates(report, sim.topo.n, float(ev.get("c_lo", 0.5)),
                                       float(ev.get("c_hi", 1.5)), eval_set, float(ev.get("scale", 1.0)))
        metrics.update(flags)
        report.aggregates["evaluation"] = metrics
    return report


# ---------------------------------------------------------------------------
# evaluation
# ---------------------------------------------------------------------------

def evaluation_set(t: Topology, byz, kind: str = "goodtl", gamma=0.72, prune_c=Fraction(1, 2)):
    """Vertices to score and flags describing how they were chosen."""
    honest = frozenset(range(t.n)) - frozenset(byz)
    if kind == "honest":
        return honest, {"eval_set": "honest"}
    if kind != "goodtl":
        raise ConfigError(f"unknown eval_set {kind!r}")
    gamma = Fraction(str(gamma))
    if t.n <= EXHAUSTIVE_CAP:
        phi = vertex_expansion_exact(t).value
        good = good_set(t, byz, gamma, prune_c, phi)
        exact = True
    else:
        good = good_set_distance_only(t, byz, gamma)
        exact = False
    d = t.is_regular() or t.d_max
    tl = frozenset(np.flatnonzero(tree_like_vertices(t, d=d)).tolist())
    return (good & tl) - frozenset(byz), {"eval_set": "goodtl", "prune_exact": exact}


def score_estimates(report, true_n: int, c_lo: float, c_hi: float, eval_set=None, scale: float = 1.0) -> dict:
    """Score decisions against ``[c_lo ln n, c_hi ln n]``.

    ``scale`` converts a protocol's estimate to the natural-log scale (for
    instance ``ln 2`` for an estimate of ``log2 n``).
    """
    if true_n <= 1:
        raise ParameterError("true_n must exceed 1")
    records = report.per_vertex if isinstance(report, RunReport) else report["per_vertex"]
    if eval_set is None:
        chosen = [r for r in records if not r["byzantine"]]
    else:
        eval_set = set(int(v) for v in eval_set)
        chosen = [r for r in records if r["vertex"] in eval_set]
    ln_n = math.log(true_n)
    lo, hi = c_lo * ln_n, c_hi * ln_n
    values = [r["decision"] * scale for r in chosen if r["decision"] is not None]
    total = len(chosen)
    inside = sum(1 for x in values if lo <= x <= hi)
    ceil_ln = math.ceil(ln_n)
    return {
        "evaluated": total,
        "decided": len(values),
        "fraction_in_range": inside / total if total else 0.0,
        "range": [lo, hi],
        "min_estimate": min(values) if values else None,
        "max_estimate": max(values) if values else None,
        "fraction_at_most_ceil_ln_n": sum(1 for x in values if x <= ceil_ln) / total if total else 0.0,
        "none_decided": not values,
    }


# ---------------------------------------------------------------------------
# output
# ---------------------------------------------------------------------------

CSV_FIELDS = ("vertex", "id", "byzantine", "decision", "decision_round", "terminated",
              "messages_sent", "max_payload_ids", "max_payload_bits")


def report_csv(report: RunReport) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_FIELDS)
    for r in report.per_vertex:
        w.writerow(["" if r[k] is None else r[k] for k in CSV_FIELDS])
    return buf.getvalue()


def plotdata(report: RunReport) -> dict:
    """Decision histogram with explicit undecided and Byzantine bins (bins sum to n)."""
    counts: dict = {}
    for r in report.per_vertex:
        if r["byzantine"]:
            key = "byzantine"
        elif r["decision"] is None:
            key = "undecided"
        else:
            key = r["decision"]
        counts[key] = counts.get(key, 0) + 1
    phases = sorted(k for k in counts if isinstance(k, int))
    bins = [{"value": k, "count": counts[k]} for k in phases]
    bins += [{"value": k, "count": counts[k]} for k in ("undecided", "byzantine") if k in counts]
    return {"seed": report.seed, "n": len(report.per_vertex), "bins": bins,
            "blacklist_sizes": report.aggregates.get("blacklist_sizes", {})}


def render(report: RunReport, fmt: str) -> str:
    if fmt == "json":
        return report.dumps()
    if fmt == "csv":
        return report_csv(report)
    if fmt == "plotdata":
        return json.dumps(plotdata(report), sort_keys=True, indent=1)
    raise ConfigError(f"unknown output format {fmt!r}")


def emit(report: RunReport, fmt: str, path) -> str:
    """Write ``report`` in ``fmt`` to ``path``; returns the path."""
    text = render(report, fmt)
    try:
        with open(path, "w") as fh:
            fh.write(text)
    except OSError as exc:
        raise ConfigError(f"cannot write {path}: {exc}") from None
    return str(path)


SUFFIX = {"json": "json", "csv": "csv", "plotdata": "plot.json"}


def write_outputs(report: RunReport, out_dir, formats=("json",), stem: Optional[str] = None) -> list:
    os.makedirs(out_dir, exist_ok=True)
    stem = stem or f"run-seed{report.seed}"
    return [emit(report, f, os.path.join(out_dir, f"{stem}.{SUFFIX[f]}")) for f in formats]


# ---------------------------------------------------------------------------
# sweeps
# ---------------------------------------------------------------------------

def sweep(config, seeds: int, workers: Optional[int] = None) -> list:
    """Run ``seeds`` consecutive seeds starting at the config seed; reports in seed order."""
    cfg = config if isinstance(config, RunConfig) else RunConfig.from_dict(config)
    todo = [cfg.seed + k for k in range(int(seeds))]
    workers = workers or min(len(todo), os.cpu_count() or 1) or 1
    with ThreadPoolExecutor(max_workers=workers) as pool:
        reports = list(pool.map(lambda s: run_experiment(cfg, s), todo))
    return sorted(reports, key=lambda r: r.seed)


SUMMARY_KEYS = ("rounds", "fraction_decided", "min_decision", "max_decision", "honest_messages")


def sweep_summary(reports) -> dict:
    out = {"seeds": [r.seed for r in reports]}
    for key in SUMMARY_KEYS:
        vals = [r.aggregates[key] for r in reports if r.aggregates.get(key) is not None]
        out[key] = {
            "mean": statistics.fmean(vals) if vals else None,
            "stddev": statistics.pstdev(vals) if len(vals) > 1 else 0.0 if vals else None,
        }
    return out
