"""Command-line interface.

Subcommands: gen-graph (write an ER edge list), simulate (one diffusion
instance to a snapshot file), localize (run one algorithm on a snapshot
file), bench (run a config-file experiment to CSV), theory (print the
asymptotic condition ratios), fig (run a named experiment preset).
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from . import harness
from .diffusion import DiffusionParams, sample_snapshot, simulate_sir
from .graph import generate_er, load_edge_list
from .harness import (ExperimentConfig, compute_theory_bounds, derive_seed,
                      dump_snapshot, format_summary, parse_snapshot,
                      preset_configs, run_experiment, run_presets, write_csv)
from .localization import ajc, cc, dc, ojc
from .metrics import detection_rate, error_distance


def _load_graph(args):
    if args.edge_list:
        with open(args.edge_list, "r", encoding="utf-8") as f:
            return load_edge_list(f)
    rng = np.random.default_rng(derive_seed(args.seed, harness._TAG_GRAPH))
    return generate_er(args.n, args.p, rng)


def _add_graph_args(p, required=True):
    p.add_argument("--edge-list", help="graph edge-list file")
    p.add_argument("--n", type=int, default=5000, help="ER node count")
    p.add_argument("--p", type=float, default=0.002, help="ER wiring probability")


def _cmd_gen_graph(args) -> int:
    rng = np.random.default_rng(args.seed)
    g = generate_er(args.n, args.p, rng)
    with open(args.out, "w", encoding="utf-8") as f:
        f.write(f"# ER graph n={args.n} p={args.p} seed={args.seed}\n")
        for u, v in g.edges:
            f.write(f"{u} {v}\n")
    print(f"wrote {g.edge_count} edges over {g.n} nodes to {args.out}")
    return 0


def _cmd_simulate(args) -> int:
    g = _load_graph(args)
    params = DiffusionParams(infect=args.q, recover=args.r, report=args.theta)
    rng = np.random.default_rng(args.seed)
    if args.sources:
        sources = [int(s) for s in args.sources.split(",")]
    else:
        sources = sorted(int(v) for v in rng.choice(g.n, size=args.m, replace=False))
    outcome = simulate_sir(g, params, sources, args.t, rng)
    snapshot = sample_snapshot(outcome, params, rng)
    dump_snapshot(args.out, args.t, outcome.sources, snapshot.observed)
    print(f"simulated t={args.t} from sources {list(outcome.sources)}: "
          f"{outcome.infected_count} infected, {snapshot.size} observed -> {args.out}")
    return 0


def _cmd_localize(args) -> int:
    g = _load_graph(args)
    with open(args.snapshot, "r", encoding="utf-8") as f:
        t, sources, observed = parse_snapshot(f.read())
    from .diffusion import Snapshot
    snap = Snapshot(np.asarray(observed, dtype=np.int64))
    rng = np.random.default_rng(args.seed)
    name = args.algorithm.upper()
    if name == "OJC":
        result = ojc(g, snap, args.Y, args.m, rng=rng)
    elif name == "AJC":
        result = ajc(g, snap, args.Y, args.m, args.restarts, args.max_iters, rng)
    elif name == "DC":
        result = dc(g, snap, args.Y, args.m, args.restarts, args.max_iters, rng)
    elif name == "CC":
        result = cc(g, snap, args.Y, args.m, args.restarts, args.max_iters, rng)
    else:
        print(f"unknown algorithm {args.algorithm!r}", file=sys.stderr)
        return 2
    print(f"{name} estimate: {list(result.sources_hat)}  {result.score}")
    print(f"candidates={result.candidate_count} subgraph_nodes={result.subgraph_nodes} "
          f"wall={result.wall_time * 1e3:.1f}ms")
    if sources:
        err = error_distance(g, sources, result.sources_hat)
        det = detection_rate(sources, result.sources_hat)
        err_s = "unreachable" if err is None else f"{err:g}"
        print(f"true sources {sources}: detection_rate={det:g} error_distance={err_s}")
    return 0


def _cmd_bench(args) -> int:
    overrides = {"trials": args.trials, "seed": args.seed, "workers": args.workers}
    try:
        config = ExperimentConfig.from_yaml(args.config, overrides)
    except FileNotFoundError:
        print(f"config file not found: {args.config}", file=sys.stderr)
        return 2
    result = run_experiment(config)
    write_csv(result.records, result.config_echo, args.out)
    print(format_summary(result))
    print(f"wrote {len(result.records)} rows to {args.out}")
    return 1 if result.invariant_violations else 0


def _cmd_theory(args) -> int:
    bounds = compute_theory_bounds(args.n, args.p, args.q, args.theta, args.Y)
    print(f"mu = {bounds.mu:g}")
    print(f"t_u = {bounds.t_u if bounds.t_u is not None else 'not applicable'}")
    print(f"c1_value (mu*q*theta / ln n) = {bounds.c1_value:.4f}")
    print(f"Y / (mu*q*theta) = {bounds.y_over_muqtheta:.4f}")
    print(f"t upper bound (2/3 ln n / ln mu) = {bounds.t_upper_c3:.4f}")
    return 0


def _cmd_fig(args) -> int:
    algorithms = args.algorithms.split(",") if args.algorithms else None
    try:
        configs = preset_configs(args.preset, trials=args.trials, seed=args.seed,
                                 edge_list=args.edge_list, y0_trials=args.y0_trials,
                                 algorithms=algorithms, workers=args.workers)
    except ValueError as e:
        print(str(e), file=sys.stderr)
        return 2
    records, results = run_presets(configs)
    echo = dict(results[0].config_echo)
    echo["preset"] = args.preset
    write_csv(records, echo, args.out)
    for res in results:
        print(format_summary(res))
        cfg = res.config_echo
        er = cfg.get("graph_er")
        if er:
            bounds = compute_theory_bounds(er[0], er[1], cfg["q"], cfg["theta"],
                                           max(cfg["y_values"]))
            print(f"  theory: mu={bounds.mu:g} t_u={bounds.t_u} t_used={res.t_used} "
                  f"c1={bounds.c1_value:.3f} Y/(mu q theta)={bounds.y_over_muqtheta:.3f} "
                  f"c3_t_upper={bounds.t_upper_c3:.3f}")
    print(f"wrote {len(records)} rows to {args.out}")
    return 1 if any(r.invariant_violations for r in results) else 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="jordancover",
                                 description=__doc__.strip().splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-graph", help="generate an ER graph edge list")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--p", type=float, required=True)
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_gen_graph)

    p = sub.add_parser("simulate", help="simulate one diffusion instance")
    _add_graph_args(p)
    p.add_argument("--q", type=float, default=0.8)
    p.add_argument("--r", type=float, default=0.0)
    p.add_argument("--theta", type=float, default=1.0)
    p.add_argument("--m", type=int, default=2)
    p.add_argument("--t", type=int, required=True)
    p.add_argument("--sources", help="comma-separated ids (default: uniform draw)")
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--out", required=True, help="snapshot file to write")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("localize", help="run one algorithm on a snapshot file")
    _add_graph_args(p)
    p.add_argument("--snapshot", required=True)
    p.add_argument("--algorithm", required=True, choices=["OJC", "AJC", "DC", "CC"])
    p.add_argument("--Y", type=int, default=1)
    p.add_argument("--m", type=int, default=2)
    p.add_argument("--restarts", type=int, default=100)
    p.add_argument("--max-iters", type=int, default=32, dest="max_iters")
    p.add_argument("--seed", type=int, default=1)
    p.set_defaults(func=_cmd_localize)

    p = sub.add_parser("bench", help="run an experiment from a config file")
    p.add_argument("--config", required=True)
    p.add_argument("--out", default="bench.csv")
    p.add_argument("--trials", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--workers", type=int)
    p.set_defaults(func=_cmd_bench)

    p = sub.add_parser("theory", help="print asymptotic condition ratios")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--p", type=float, required=True)
    p.add_argument("--q", type=float, required=True)
    p.add_argument("--theta", type=float, default=1.0)
    p.add_argument("--Y", type=int, default=1)
    p.set_defaults(func=_cmd_theory)

    p = sub.add_parser("fig", help="run a named experiment preset")
    p.add_argument("preset", choices=["fig2", "fig3-m2", "fig3-m3", "fig3-m4",
                                      "power-grid"])
    p.add_argument("--trials", type=int)
    p.add_argument("--y0-trials", type=int, dest="y0_trials",
                   help="fig2 only: trials for the slow Y=0 cell (default 10)")
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--edge-list", help="power-grid preset: graph file")
    p.add_argument("--algorithms", help="comma-separated override")
    p.add_argument("--workers", type=int)
    p.add_argument("--out", default="fig.csv")
    p.set_defaults(func=_cmd_fig)

    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
