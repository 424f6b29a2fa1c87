"""Command-line entry point.

Subcommands: topo-gen, simulate, evolve, optimize, sweep, robustness,
aggregate.  Every command is deterministic given its arguments; when --seed
is omitted a fresh entropy seed is drawn and printed to stderr so the run
stays reproducible after the fact.  Human-readable summaries go to stdout,
data goes to files.
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from . import dhc, experiments, optimizers, simcore, topology
from .topology import ExhaustedAttempts, TopologySpec


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ExhaustedAttempts, experiments.InsufficientNodes,
            simcore.DimensionMismatch, optimizers.DegenerateTopology,
            FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def _build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="tdmaevo",
        description="TDMA schedule simulator and optimizers "
                    "(defaults: M=5 packets, 10000-evaluation budget, 28 repetitions)",
    )
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("topo-gen", help="generate a topology file")
    kind = g.add_mutually_exclusive_group(required=True)
    kind.add_argument("--grid", type=int, metavar="SIDE", help="square grid side")
    kind.add_argument("--random", type=int, metavar="N", help="random geometric node count")
    g.add_argument("--cd", type=float, help="connection distance (random)")
    g.add_argument("--cp", type=float, help="connection probability (random)")
    g.add_argument("--max-attempts", type=int, default=1000)
    g.add_argument("--seed", type=int)
    g.add_argument("--out", required=True)
    g.set_defaults(func=_cmd_topo_gen)

    s = sub.add_parser("simulate", help="evaluate fixed frames on a topology")
    s.add_argument("--topo", required=True)
    s.add_argument("--frames", required=True, help="text file, one frame per node (chars T, L, .)")
    s.add_argument("--packets", type=int, default=5)
    s.add_argument("--steps", type=int, help="default packets * slots")
    s.add_argument("--trace", help="write a per-node per-step CSV trace here")
    s.set_defaults(func=_cmd_simulate)

    e = sub.add_parser("evolve", help="one distributed hill-climbing run")
    e.add_argument("--topo", required=True)
    e.add_argument("--rule", type=int, default=1, choices=range(1, 8))
    e.add_argument("--mr", type=float, default=0.04)
    e.add_argument("--budget", type=int, default=10000)
    e.add_argument("--packets", type=int, default=5)
    e.add_argument("--steps", type=int)
    e.add_argument("--seed", type=int)
    e.add_argument("--frames-out", help="write the final frames here")
    e.add_argument("--generations-csv", help="append per-generation statistics here")
    e.add_argument("--results-csv", help="append a results-schema row here")
    e.set_defaults(func=_cmd_evolve)

    o = sub.add_parser("optimize", help="one centralized optimizer run")
    o.add_argument("--topo", required=True)
    o.add_argument("--algorithm", required=True,
                   choices=["chc", "csa", "chc2o", "csa2o", "ga2o", "nsga2"])
    o.add_argument("--mr", type=float, default=0.04)
    o.add_argument("--budget", type=int, default=10000)
    o.add_argument("--packets", type=int, default=5)
    o.add_argument("--steps", type=int)
    o.add_argument("--pop-size", type=int, default=50)
    o.add_argument("--elites", type=int, default=10)
    o.add_argument("--seed", type=int)
    o.add_argument("--frames-out")
    o.add_argument("--results-csv", help="append a results-schema row here")
    o.set_defaults(func=_cmd_optimize)

    w = sub.add_parser("sweep", help="run a config file's full sweep")
    w.add_argument("--config", required=True)
    w.add_argument("--out-dir", default=experiments.env_default("TDMAEVO_OUTDIR", "results"))
    w.add_argument("--jobs", type=int, default=experiments.env_default("TDMAEVO_JOBS", 1))
    w.add_argument("--log-generations", action="store_true")
    w.add_argument("--no-resume", action="store_true")
    w.set_defaults(func=_cmd_sweep)

    r = sub.add_parser("robustness", help="solve, perturb, re-adapt")
    r.add_argument("--config", required=True)
    r.add_argument("--out-dir", default=experiments.env_default("TDMAEVO_OUTDIR", "results"))
    r.add_argument("--jobs", type=int, default=experiments.env_default("TDMAEVO_JOBS", 1))
    r.add_argument("--no-resume", action="store_true")
    r.set_defaults(func=_cmd_robustness)

    a = sub.add_parser("aggregate", help="summarize a results.csv")
    a.add_argument("results")
    a.add_argument("--out", help="also write the summary as CSV")
    a.set_defaults(func=_cmd_aggregate)
    return p


def _resolve_seed(seed: int | None) -> int:
    if seed is None:
        seed = int(np.random.SeedSequence().entropy % (2**31))
        print(f"seed: {seed} (drawn from entropy; pass --seed to reproduce)",
              file=sys.stderr)
    return seed


def _cmd_topo_gen(args) -> int:
    if args.grid is not None:
        topo = topology.build_grid(args.grid)
    else:
        if args.cd is None or args.cp is None:
            raise ValueError("--random needs --cd and --cp")
        spec = TopologySpec(kind="random", n=args.random, cd=args.cd, cp=args.cp)
        topo = topology.retry_connected(spec, _resolve_seed(args.seed), args.max_attempts)
    topo.save(args.out)
    hops = topology.hops_to_target(topo)
    print(f"{topo.kind} topology: {topo.n} nodes, {len(topo.edges)} edges, "
          f"seed-to-target hops {hops.hops[topo.seed_node]}, written to {args.out}")
    return 0


def _cmd_simulate(args) -> int:
    topo = topology.Topology.load(args.topo)
    with open(args.frames) as fh:
        frames = simcore.frames_from_text(fh.read())
    steps = args.steps or args.packets * frames.shape[1]
    trace = open(args.trace, "w") if args.trace else None
    try:
        res = simcore.evaluate_network(topo, frames, args.packets, steps, trace=trace)
    finally:
        if trace:
            trace.close()
    hops = topology.hops_to_target(topo)
    print(f"delivery_rate: {simcore.delivery_rate(res, args.packets)}")
    print(f"used_slot_ratio: {simcore.used_slot_ratio(frames)}")
    print(f"f1: {optimizers.f1(res, hops)}")
    for pkt in sorted(res.delivered_steps):
        print(f"packet {pkt}: delivered at step {res.delivered_steps[pkt]}")
    return 0


def _cmd_evolve(args) -> int:
    topo = topology.Topology.load(args.topo)
    seed = _resolve_seed(args.seed)
    steps = args.steps or args.packets * topo.n
    cfg = dhc.DhcConfig(
        rule=dhc.rule_table(args.rule), mr=args.mr, max_evals=args.budget,
        log_generations=args.generations_csv is not None,
    )
    res = dhc.run_dhc(topo, cfg, args.packets, steps, np.random.default_rng(seed))
    print(f"solved: {res.solved}  evals_used: {res.evals_used}  "
          f"used_slot_ratio: {res.used_slot_ratio_at_solve:.4f}")
    if args.results_csv:
        _append_result_row(
            args, "dhc", args.rule, seed, res.solved, res.evals_used,
            res.used_slot_ratio_at_solve,
        )
    if args.frames_out:
        with open(args.frames_out, "w") as fh:
            fh.write(simcore.frames_to_text(res.final_frames))
    if args.generations_csv:
        rows = [
            {
                "generation": str(g.generation),
                "delivery_rate": repr(g.delivery_rate),
                "fit_min": repr(g.fit_min),
                "fit_median": repr(g.fit_median),
                "fit_max": repr(g.fit_max),
                "used_slots": repr(g.used_slot_ratio),
            }
            for g in res.generations
        ]
        experiments.append_rows(
            args.generations_csv,
            ("generation", "delivery_rate", "fit_min", "fit_median", "fit_max", "used_slots"),
            rows,
        )
    return 0


def _cmd_optimize(args) -> int:
    topo = topology.Topology.load(args.topo)
    seed = _resolve_seed(args.seed)
    rng = np.random.default_rng(seed)
    kw = dict(packets=args.packets, steps=args.steps)
    if args.algorithm == "chc":
        res = optimizers.run_chc(topo, args.budget, args.mr, rng, **kw)
    elif args.algorithm == "csa":
        res = optimizers.run_csa(topo, args.budget, args.mr, rng, **kw)
    elif args.algorithm == "chc2o":
        res = optimizers.run_chc2o(topo, args.budget, args.mr, rng, **kw)
    elif args.algorithm == "csa2o":
        res = optimizers.run_csa2o(topo, args.budget, args.mr, rng, **kw)
    elif args.algorithm == "ga2o":
        res = optimizers.run_ga2o(topo, args.budget, args.mr, rng,
                                  pop_size=args.pop_size, elites=args.elites, **kw)
    else:
        pareto = optimizers.run_nsga2(topo, args.budget, args.mr, rng,
                                      pop_size=args.pop_size, **kw)
        print(f"solved: {pareto.solved}  evals_used: {pareto.evals_used}  "
              f"f1: {pareto.f1}  used_slot_ratio: {pareto.f2}")
        print("front:", " ".join(f"({a:.3f},{b:.3f})" for a, b in sorted(pareto.front)))
        if args.frames_out and pareto.selected is not None:
            _write_genome(args.frames_out, pareto.selected, topo.n)
        if args.results_csv:
            slots = pareto.f2 if pareto.f2 is not None else min(p[1] for p in pareto.front)
            _append_result_row(args, "nsga2", 0, seed, pareto.solved,
                               pareto.evals_used, slots)
        return 0
    print(f"solved: {res.solved}  evals_used: {res.evals_used}  "
          f"f1: {res.f1}  used_slot_ratio: {res.f2:.4f}")
    if args.frames_out:
        _write_genome(args.frames_out, res.genome, topo.n)
    if args.results_csv:
        _append_result_row(args, args.algorithm, 0, seed, res.solved,
                           res.evals_used, res.f2)
    return 0


def _append_result_row(args, algorithm, rule, seed, solved, evals_used, used_slots):
    from pathlib import Path

    used_resources = evals_used / args.budget if solved else 1.0
    experiments.append_rows(args.results_csv, experiments.RESULT_COLUMNS, [{
        "experiment": "cli",
        "topology_id": Path(args.topo).stem,
        "algorithm": algorithm,
        "rule": str(rule) if rule else "",
        "mr": repr(float(args.mr)),
        "seed": str(seed),
        "solved": "true" if solved else "false",
        "used_resources": repr(float(used_resources)),
        "used_slots": repr(float(used_slots)),
        "phase": "initial",
        "perturbation": "",
    }])


def _write_genome(path, genome, n_nodes) -> None:
    frames = optimizers.genome_to_frames(genome, n_nodes)
    with open(path, "w") as fh:
        fh.write(simcore.frames_to_text(frames))


def _cmd_sweep(args) -> int:
    cfg = experiments.load_config(args.config)
    path = experiments.run_sweep(
        cfg, args.out_dir, jobs=args.jobs,
        log_generations=args.log_generations, resume=not args.no_resume,
    )
    print(f"results written to {path}")
    return 0


def _cmd_robustness(args) -> int:
    cfg = experiments.load_config(args.config)
    path = experiments.run_robustness(
        cfg, args.out_dir, jobs=args.jobs, resume=not args.no_resume
    )
    print(f"results written to {path}")
    return 0


def _cmd_aggregate(args) -> int:
    rows = experiments.read_rows(args.results)
    summaries = experiments.aggregate(rows)
    sys.stdout.write(experiments.format_summary(summaries))
    if args.out:
        with open(args.out, "w", newline="") as fh:
            import csv

            w = csv.DictWriter(fh, fieldnames=list(experiments.SUMMARY_COLUMNS),
                               lineterminator="\n")
            w.writeheader()
            for s in summaries:
                w.writerow(s)
    return 0


if __name__ == "__main__":
    sys.exit(main())
