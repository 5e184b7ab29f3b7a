"""Command line entry point: ``byzcount gen|analyze|run|sweep``."""
from __future__ import annotations

import argparse
import json
import os
import sys
from fractions import Fraction

from .engine import ConfigError
from .graph import (CapacityError, ParameterError, TopologyFormatError, diameter, generate_hnd,
                    load_topology, prune, save_topology, tree_like_fraction, vertex_expansion_exact)
from .harness import load_config, run_experiment, sweep, sweep_summary, write_outputs


def _cmd_gen(args) -> int:
    if args.model != "hnd":
        raise ConfigError(f"unknown model {args.model!r}")
    t = generate_hnd(args.n, args.d, args.seed)
    save_topology(t, args.out)
    print(json.dumps({"out": args.out, "n": t.n, "d": args.d, "edges": len(t.edges)}))
    return 0


def _cmd_analyze(args) -> int:
    t = load_topology(args.input)
    out: dict = {"n": t.n, "d_max": t.d_max, "edges": len(t.edges), "regular": t.is_regular()}
    phi = None
    if args.expansion or args.prune is not None:
        rep = vertex_expansion_exact(t)
        phi = rep.value
        out["expansion"] = str(rep.value)
        out["expansion_witness"] = sorted(rep.witness)
    if args.tree_like:
        out["tree_like_fraction"] = float(tree_like_fraction(t, args.radius))
    if args.diameter:
        out["diameter"] = diameter(t)
    if args.prune is not None:
        faulty = [int(x) for x in args.faulty.split(",")] if args.faulty else []
        kept = prune(t, faulty, Fraction(args.prune), phi)
        out["prune"] = {"c": args.prune, "faulty": faulty, "kept": sorted(kept)}
    print(json.dumps(out, indent=1))
    return 0


def _cmd_run(args) -> int:
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg = cfg.with_seed(args.seed)
    report = run_experiment(cfg)
    out_dir = args.out or cfg.output.get("dir")
    if out_dir:
        paths = write_outputs(report, out_dir, cfg.output.get("formats", ["json"]))
        print(json.dumps({"written": paths, "rounds": report.rounds,
                          "fraction_decided": report.aggregates["fraction_decided"]}))
    else:
        print(report.dumps())
    return 0


def _cmd_sweep(args) -> int:
    cfg = load_config(args.config)
    reports = sweep(cfg, args.seeds, args.workers)
    out_dir = args.out or cfg.output.get("dir")
    summary = sweep_summary(reports)
    if out_dir:
        for r in reports:
            write_outputs(r, out_dir, cfg.output.get("formats", ["json"]))
        with open(os.path.join(out_dir, "sweep-summary.json"), "w") as fh:
            json.dump(summary, fh, indent=1, sort_keys=True)
    print(json.dumps(summary, indent=1, sort_keys=True))
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="byzcount", description="Byzantine-resilient network size estimation simulator")
    sub = ap.add_subparsers(dest="cmd", required=True)

    g = sub.add_parser("gen", help="generate a random regular topology")
    g.add_argument("--model", default="hnd")
    g.add_argument("--n", type=int, required=True)
    g.add_argument("--d", type=int, required=True)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True)
    g.set_defaults(fn=_cmd_gen)

    a = sub.add_parser("analyze", help="graph statistics for an edge-list file")
    a.add_argument("--in", dest="input", required=True)
    a.add_argument("--expansion", action="store_true")
    a.add_argument("--tree-like", action="store_true")
    a.add_argument("--radius", type=int, default=None)
    a.add_argument("--diameter", action="store_true")
    a.add_argument("--prune", default=None, help="prune constant c, e.g. 1/2")
    a.add_argument("--faulty", default="", help="comma-separated vertices removed before pruning")
    a.set_defaults(fn=_cmd_analyze)

    r = sub.add_parser("run", help="run one experiment from a config file")
    r.add_argument("--config", required=True)
    r.add_argument("--seed", type=int, default=None)
    r.add_argument("--out", default=None)
    r.set_defaults(fn=_cmd_run)

    s = sub.add_parser("sweep", help="run consecutive seeds of one config")
    s.add_argument("--config", required=True)
    s.add_argument("--seeds", type=int, required=True)
    s.add_argument("--workers", type=int, default=None)
    s.add_argument("--out", default=None)
    s.set_defaults(fn=_cmd_sweep)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except (ConfigError, ParameterError, CapacityError, TopologyFormatError, OSError) as exc:
        print(f"byzcount: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
