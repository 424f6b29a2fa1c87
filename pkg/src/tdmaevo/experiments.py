"""Batch experiment runner: seeded sweeps, robustness perturbations, CSV
persistence and aggregation.

Reproducibility contract: every run's generator seed derives only from the
config's base seed and the run's indices, never from execution order, so a
sweep writes the same bytes whether it runs fresh, resumes after a crash, or
fans out over worker processes.  Random topologies are generated once per
repetition and shared across algorithms and mutation rates, mirroring the
"28 networks, one run each" protocol.
"""

from __future__ import annotations

import csv
import logging
import math
import os
import statistics
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
import yaml

from . import dhc, optimizers
from .topology import Topology, TopologySpec, retry_connected

MR_GRID = (0.01, 0.02, 0.04, 0.08, 0.16, 0.32, 0.64)
ALL_RULES = (1, 2, 3, 4, 5, 6, 7)
ALGORITHMS = ("dhc", "chc", "csa", "chc2o", "csa2o", "ga2o", "nsga2")
PERTURBATION_KINDS = ("add", "remove", "relocate", "reinitialize")
PERTURBATION_COUNTS = {"add": 10, "remove": 6, "relocate": 18, "reinitialize": 18}

log = logging.getLogger(__name__)

RESULT_COLUMNS = (
    "experiment", "topology_id", "algorithm", "rule", "mr", "seed",
    "solved", "used_resources", "used_slots", "phase", "perturbation",
)
GENERATION_COLUMNS = (
    "experiment", "topology_id", "algorithm", "rule", "mr", "seed",
    "generation", "delivery_rate", "fit_min", "fit_median", "fit_max",
    "used_slots",
)
FRONT_COLUMNS = (
    "experiment", "topology_id", "algorithm", "rule", "mr", "seed", "f1", "f2",
)

# seed-derivation tags: SeedSequence([base, tag, ...indices])
_TAG_TOPOLOGY, _TAG_RUN, _TAG_PERTURB, _TAG_RESUME = 1, 2, 3, 4


class InsufficientNodes(ValueError):
    """A perturbation asked for more non-seed/target nodes than exist."""


@dataclass(frozen=True)
class AlgorithmSpec:
    name: str
    rules: tuple[int, ...] = ()          # dhc only
    mr: tuple[float, ...] | None = None  # overrides the config-wide grid
    pop_size: int = 50
    elites: int = 10
    crossover_p: float = 0.9

    def __post_init__(self):
        if self.name not in ALGORITHMS:
            raise ValueError(f"unknown algorithm {self.name!r}")
        if self.name == "dhc" and not self.rules:
            object.__setattr__(self, "rules", ALL_RULES)


@dataclass(frozen=True)
class RobustnessSpec:
    kinds: tuple[str, ...] = PERTURBATION_KINDS
    rule: int = 1
    mr: float = 0.04

    def __post_init__(self):
        for k in self.kinds:
            if k not in PERTURBATION_KINDS:
                raise ValueError(f"unknown perturbation kind {k!r}")


@dataclass(frozen=True)
class ExperimentConfig:
    name: str
    topology: TopologySpec
    algorithms: tuple[AlgorithmSpec, ...] = ()
    packets: int = 5
    slots: int | None = None             # defaults to the node count (S = N)
    steps: int | None = None             # defaults to packets * slots (K = M*S)
    budget: int = 10000
    repetitions: int = 28
    seed: int = 1
    mr_grid: tuple[float, ...] = MR_GRID
    robustness: RobustnessSpec | None = None
    max_attempts: int = 1000

    @property
    def slot_count(self) -> int:
        return self.slots if self.slots is not None else self.topology.node_count

    @property
    def step_count(self) -> int:
        return self.steps if self.steps is not None else self.packets * self.slot_count


def load_config(path) -> ExperimentConfig:
    with open(path) as fh:
        raw = yaml.safe_load(fh)
    if not isinstance(raw, dict):
        raise ValueError("config must be a mapping")
    topo = TopologySpec(**raw["topology"])
    algos = tuple(
        AlgorithmSpec(
            name=a["name"],
            rules=tuple(a.get("rules", ())),
            mr=tuple(a["mr"]) if "mr" in a else None,
            pop_size=a.get("pop_size", 50),
            elites=a.get("elites", 10),
            crossover_p=a.get("crossover_p", 0.9),
        )
        for a in raw.get("algorithms", [])
    )
    rb = raw.get("robustness")
    robustness = (
        RobustnessSpec(
            kinds=tuple(rb.get("kinds", PERTURBATION_KINDS)),
            rule=rb.get("rule", 1),
            mr=rb.get("mr", 0.04),
        )
        if rb
        else None
    )
    return ExperimentConfig(
        name=raw["name"],
        topology=topo,
        algorithms=algos,
        packets=raw.get("packets", 5),
        slots=raw.get("slots"),
        steps=raw.get("steps"),
        budget=raw.get("budget", 10000),
        repetitions=raw.get("repetitions", 28),
        seed=raw.get("seed", 1),
        mr_grid=tuple(raw.get("mr", MR_GRID)),
        robustness=robustness,
        max_attempts=raw.get("max_attempts", 1000),
    )


def run_seed(cfg: ExperimentConfig, *indices: int) -> np.random.SeedSequence:
    return np.random.SeedSequence([int(cfg.seed), *[int(i) for i in indices]])


def seed_label(ss: np.random.SeedSequence) -> int:
    return int(ss.generate_state(1)[0])


def make_topology(cfg: ExperimentConfig, rep: int) -> Topology:
    if cfg.topology.kind == "grid":
        return retry_connected(cfg.topology, max_attempts=1)
    rng = np.random.default_rng(run_seed(cfg, _TAG_TOPOLOGY, rep))
    return retry_connected(cfg.topology, rng, cfg.max_attempts)


def topology_id(cfg: ExperimentConfig, rep: int) -> str:
    if cfg.topology.kind == "grid":
        return cfg.topology.label()
    return f"{cfg.topology.label()}-r{rep:02d}"


@dataclass(frozen=True)
class RunTask:
    index: int
    algo: AlgorithmSpec
    algo_idx: int
    rule: int          # 0 for non-dhc algorithms
    mr: float
    mr_idx: int
    rep: int


def enumerate_tasks(cfg: ExperimentConfig) -> list[RunTask]:
    tasks = []
    for algo_idx, algo in enumerate(cfg.algorithms):
        mrs = algo.mr if algo.mr is not None else cfg.mr_grid
        rules = algo.rules if algo.name == "dhc" else (0,)
        for rule in rules:
            for mr_idx, mr in enumerate(mrs):
                for rep in range(cfg.repetitions):
                    tasks.append(
                        RunTask(len(tasks), algo, algo_idx, rule, mr, mr_idx, rep)
                    )
    return tasks


def _fmt(x: float) -> str:
    return repr(float(x))


def _result_row(cfg, *, algorithm, rule, mr, seed, topo_id, solved,
                evals_used, used_slots, phase="initial", perturbation="") -> dict:
    used_resources = evals_used / cfg.budget if solved else 1.0
    return {
        "experiment": cfg.name,
        "topology_id": topo_id,
        "algorithm": algorithm,
        "rule": str(rule) if rule else "",
        "mr": _fmt(mr),
        "seed": str(seed),
        "solved": "true" if solved else "false",
        "used_resources": _fmt(used_resources),
        "used_slots": _fmt(used_slots),
        "phase": phase,
        "perturbation": perturbation,
    }


def run_tasks(
    cfg: ExperimentConfig,
    tasks: list[RunTask],
    log_generations: bool = False,
) -> tuple[list[dict], list[dict]]:
    """Execute tasks; returns (result rows, generation rows) in task order."""
    topos: dict[int, Topology] = {}

    def topo_for(rep: int) -> Topology:
        if rep not in topos:
            topos[rep] = make_topology(cfg, rep)
        return topos[rep]

    rows: dict[int, dict] = {}
    gen_rows: list[tuple[int, list[dict]]] = []
    front_rows: list[tuple[int, list[dict]]] = []

    dhc_tasks = [t for t in tasks if t.algo.name == "dhc"]
    anneal_tasks = [t for t in tasks if t.algo.name in ("chc", "csa", "chc2o", "csa2o")]
    pop_tasks = [t for t in tasks if t.algo.name in ("ga2o", "nsga2")]

    if dhc_tasks:
        cfgs = [
            dhc.DhcConfig(
                rule=dhc.rule_table(t.rule), mr=t.mr, max_evals=cfg.budget,
                log_generations=log_generations,
            )
            for t in dhc_tasks
        ]
        seeds = [run_seed(cfg, _TAG_RUN, t.algo_idx, t.rule, t.mr_idx, t.rep) for t in dhc_tasks]
        rngs = [np.random.default_rng(s) for s in seeds]
        results = dhc.run_dhc_batch(
            [topo_for(t.rep) for t in dhc_tasks], cfgs, cfg.packets,
            cfg.step_count, rngs,
        )
        for t, s, r in zip(dhc_tasks, seeds, results):
            rows[t.index] = _result_row(
                cfg, algorithm="dhc", rule=t.rule, mr=t.mr,
                seed=seed_label(s), topo_id=topology_id(cfg, t.rep),
                solved=r.solved, evals_used=r.evals_used,
                used_slots=r.used_slot_ratio_at_solve,
            )
            if log_generations:
                gen_rows.append((t.index, _generation_rows(cfg, t, seed_label(s), r)))

    by_variant: dict[str, list[RunTask]] = {}
    for t in anneal_tasks:
        by_variant.setdefault(t.algo.name, []).append(t)
    for name, group in by_variant.items():
        schedule = optimizers.AnnealSchedule() if name in ("csa", "csa2o") else None
        two = name.endswith("2o")
        seeds = [run_seed(cfg, _TAG_RUN, t.algo_idx, 0, t.mr_idx, t.rep) for t in group]
        results = optimizers._anneal_batch(
            [topo_for(t.rep) for t in group], cfg.budget,
            [t.mr for t in group], [np.random.default_rng(s) for s in seeds],
            schedule, two, cfg.packets, cfg.slot_count, cfg.step_count,
        )
        for t, s, r in zip(group, seeds, results):
            rows[t.index] = _result_row(
                cfg, algorithm=name, rule=0, mr=t.mr, seed=seed_label(s),
                topo_id=topology_id(cfg, t.rep), solved=r.solved,
                evals_used=r.evals_used, used_slots=r.f2,
            )

    for t in pop_tasks:
        s = run_seed(cfg, _TAG_RUN, t.algo_idx, 0, t.mr_idx, t.rep)
        rng = np.random.default_rng(s)
        common = dict(
            pop_size=t.algo.pop_size, crossover_p=t.algo.crossover_p,
            packets=cfg.packets, slots=cfg.slot_count, steps=cfg.step_count,
        )
        if t.algo.name == "ga2o":
            r = optimizers.run_ga2o(
                topo_for(t.rep), cfg.budget, t.mr, rng, elites=t.algo.elites, **common
            )
            solved, evals_used, used = r.solved, r.evals_used, r.f2
        else:
            r = optimizers.run_nsga2(topo_for(t.rep), cfg.budget, t.mr, rng, **common)
            solved, evals_used = r.solved, r.evals_used
            used = r.f2 if r.f2 is not None else min(p[1] for p in r.front)
            front_rows.append((t.index, [
                {
                    "experiment": cfg.name,
                    "topology_id": topology_id(cfg, t.rep),
                    "algorithm": "nsga2",
                    "rule": "",
                    "mr": _fmt(t.mr),
                    "seed": str(seed_label(s)),
                    "f1": _fmt(a),
                    "f2": _fmt(b),
                }
                for a, b in sorted(r.front)
            ]))
        rows[t.index] = _result_row(
            cfg, algorithm=t.algo.name, rule=0, mr=t.mr, seed=seed_label(s),
            topo_id=topology_id(cfg, t.rep), solved=solved,
            evals_used=evals_used, used_slots=used,
        )

    ordered = [rows[t.index] for t in tasks]
    gens = [g for _, group in sorted(gen_rows) for g in group]
    fronts = [f for _, group in sorted(front_rows) for f in group]
    return ordered, gens, fronts


def _generation_rows(cfg, task, seed, result) -> list[dict]:
    base = {
        "experiment": cfg.name,
        "topology_id": topology_id(cfg, task.rep),
        "algorithm": "dhc",
        "rule": str(task.rule),
        "mr": _fmt(task.mr),
        "seed": str(seed),
    }
    return [
        {
            **base,
            "generation": str(g.generation),
            "delivery_rate": _fmt(g.delivery_rate),
            "fit_min": _fmt(g.fit_min),
            "fit_median": _fmt(g.fit_median),
            "fit_max": _fmt(g.fit_max),
            "used_slots": _fmt(g.used_slot_ratio),
        }
        for g in result.generations
    ]


def _chunk_worker(args):
    cfg, tasks, log_generations = args
    return run_tasks(cfg, tasks, log_generations)


def run_sweep(
    cfg: ExperimentConfig,
    out_dir,
    jobs: int = 1,
    log_generations: bool = False,
    resume: bool = True,
) -> Path:
    """Run every (algorithm, rule, mr, repetition) combination of the config.

    Rows append to <out_dir>/results.csv incrementally; rows already present
    are skipped on resume, keyed by (algorithm, rule, mr, repetition).
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    results_path = out_dir / "results.csv"
    gen_path = out_dir / "generations.csv"

    tasks = enumerate_tasks(cfg)
    done: set[tuple] = set()
    if resume and results_path.exists():
        for row in read_rows(results_path):
            if row["phase"] == "initial" and row["experiment"] == cfg.name:
                done.add((row["algorithm"], row["rule"], row["mr"], row["seed"]))

    def task_key(t: RunTask) -> tuple:
        s = run_seed(cfg, _TAG_RUN, t.algo_idx, t.rule, t.mr_idx, t.rep)
        return (t.algo.name, str(t.rule) if t.rule else "", _fmt(t.mr),
                str(seed_label(s)))

    pending = [t for t in tasks if task_key(t) not in done] if done else tasks

    if jobs > 1 and len(pending) > 1:
        chunks = [pending[i::jobs] for i in range(jobs)]
        chunks = [c for c in chunks if c]
        with ProcessPoolExecutor(max_workers=len(chunks)) as pool:
            parts = list(pool.map(_chunk_worker, [(cfg, c, log_generations) for c in chunks]))
        merged: dict[int, dict] = {}
        gens: list[dict] = []
        fronts: list[dict] = []
        for chunk, (rws, grs, frs) in zip(chunks, parts):
            for t, r in zip(chunk, rws):
                merged[t.index] = r
            gens.extend(grs)
            fronts.extend(frs)
        rows = [merged[t.index] for t in pending]
    else:
        rows, gens, fronts = run_tasks(cfg, pending, log_generations)

    append_rows(results_path, RESULT_COLUMNS, rows)
    if log_generations and gens:
        append_rows(gen_path, GENERATION_COLUMNS, gens)
    if fronts:
        append_rows(out_dir / "fronts.csv", FRONT_COLUMNS, fronts)
    return results_path


def append_rows(path: Path, columns, rows: list[dict]) -> None:
    new = not Path(path).exists()
    with open(path, "a", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(columns), lineterminator="\n")
        if new:
            w.writeheader()
        for r in rows:
            w.writerow(r)


def read_rows(path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


# ---------------------------------------------------------------------------
# perturbations


@dataclass
class PerturbOutcome:
    topology: Topology
    frames: np.ndarray
    affected: tuple[int, ...]    # changed/new node ids (new numbering)


def perturb(
    topo: Topology,
    frames,
    kind: str,
    rng: np.random.Generator,
    count: int | None = None,
) -> PerturbOutcome:
    """Apply one structural perturbation to a solved network.

    add: new nodes at uniform coordinates with uniformly random frames,
    wired to every already-present node by the cd/cp rule.  remove: drop
    nodes plus incident edges (never seed/target), compacting ids.
    relocate: fresh coordinates for chosen nodes, rebuilding only their
    incident edges.  reinitialize: fresh random frames, topology untouched.
    """
    if kind not in PERTURBATION_KINDS:
        raise ValueError(f"unknown perturbation kind {kind!r}")
    if topo.kind != "random":
        raise ValueError("perturbations are defined for random topologies")
    frames = np.asarray(frames, dtype=np.int8)
    n, s = frames.shape
    count = PERTURBATION_COUNTS[kind] if count is None else count
    eligible = [i for i in range(n) if i not in (topo.seed_node, topo.target_node)]

    if kind == "add":
        positions = list(map(tuple, topo.positions))
        edges = list(topo.edges)
        new_frames = []
        for k in range(count):
            i = n + k
            positions.append(tuple(rng.random(2)))
            new_frames.append(np.floor(rng.random(s) * 3).astype(np.int8))
            for j in range(i):
                if math.dist(positions[i], positions[j]) < topo.cd and rng.random() < topo.cp:
                    edges.append((j, i))
        new_topo = replace(
            topo, positions=np.asarray(positions), edges=tuple(sorted(edges))
        )
        return PerturbOutcome(
            new_topo, np.vstack([frames, new_frames]), tuple(range(n, n + count))
        )

    if count > len(eligible):
        raise InsufficientNodes(f"{kind} wants {count} of {len(eligible)} eligible nodes")
    chosen = rng.choice(np.asarray(eligible), size=count, replace=False)
    chosen_set = set(int(c) for c in chosen)
    assert not chosen_set & {topo.seed_node, topo.target_node}
    log.debug("%s selects nodes %s (seed/target excluded)", kind, sorted(chosen_set))

    if kind == "reinitialize":
        out = frames.copy()
        for c in chosen:
            out[c] = np.floor(rng.random(s) * 3).astype(np.int8)
        return PerturbOutcome(topo, out, tuple(int(c) for c in chosen))

    if kind == "remove":
        keep = [i for i in range(n) if i not in chosen_set]
        remap = {old: new for new, old in enumerate(keep)}
        edges = tuple(
            sorted(
                (remap[i], remap[j])
                for i, j in topo.edges
                if i in remap and j in remap
            )
        )
        new_topo = replace(
            topo,
            positions=topo.positions[keep],
            edges=edges,
            seed_node=remap[topo.seed_node],
            target_node=remap[topo.target_node],
        )
        return PerturbOutcome(new_topo, frames[keep], tuple(sorted(chosen_set)))

    # relocate: fresh coordinates, rebuild only incident edges
    positions = topo.positions.copy()
    for c in chosen:
        positions[c] = rng.random(2)
    edges = [e for e in topo.edges if e[0] not in chosen_set and e[1] not in chosen_set]
    for i in range(n):
        for j in range(i + 1, n):
            if i not in chosen_set and j not in chosen_set:
                continue
            if math.dist(positions[i], positions[j]) < topo.cd and rng.random() < topo.cp:
                edges.append((i, j))
    new_topo = replace(topo, positions=positions, edges=tuple(sorted(edges)))
    return PerturbOutcome(new_topo, frames, tuple(sorted(chosen_set)))


def _robustness_chunk(args):
    cfg, reps = args
    return _robustness_rows(cfg, reps)


def _robustness_rows(
    cfg: ExperimentConfig, reps: list[int]
) -> tuple[dict[int, dict], dict[tuple[int, int], dict]]:
    """Phase-1 rows per repetition and post rows per (kind index, repetition)."""
    spec = cfg.robustness
    topos = {rep: make_topology(cfg, rep) for rep in reps}
    rule = dhc.rule_table(spec.rule)

    cfgs = [dhc.DhcConfig(rule=rule, mr=spec.mr, max_evals=cfg.budget) for _ in reps]
    seeds = {rep: run_seed(cfg, _TAG_RUN, 0, spec.rule, 0, rep) for rep in reps}
    phase1 = dhc.run_dhc_batch(
        [topos[rep] for rep in reps], cfgs, cfg.packets, cfg.step_count,
        [np.random.default_rng(seeds[rep]) for rep in reps],
    )

    initial = {
        rep: _result_row(
            cfg, algorithm="dhc", rule=spec.rule, mr=spec.mr,
            seed=seed_label(seeds[rep]), topo_id=topology_id(cfg, rep),
            solved=res.solved, evals_used=res.evals_used,
            used_slots=res.used_slot_ratio_at_solve, phase="initial",
        )
        for rep, res in zip(reps, phase1)
    }

    post: dict[tuple[int, int], dict] = {}
    solved_state = {rep: r for rep, r in zip(reps, phase1) if r.solved}
    for kind_idx, kind in enumerate(spec.kinds):
        branch = []
        for rep in sorted(solved_state):
            prng = np.random.default_rng(run_seed(cfg, _TAG_PERTURB, kind_idx, rep))
            branch.append((rep, perturb(topos[rep], solved_state[rep].final_frames, kind, prng)))
        if not branch:
            continue
        rcfgs = [dhc.DhcConfig(rule=rule, mr=spec.mr, max_evals=cfg.budget) for _ in branch]
        rseeds = [run_seed(cfg, _TAG_RESUME, kind_idx, rep) for rep, _ in branch]
        resumed = dhc.run_dhc_batch(
            [o.topology for _, o in branch], rcfgs, cfg.packets, cfg.step_count,
            [np.random.default_rng(s) for s in rseeds],
            initial_frames=[o.frames for _, o in branch],
        )
        for (rep, _), s, res in zip(branch, rseeds, resumed):
            post[(kind_idx, rep)] = _result_row(
                cfg, algorithm="dhc", rule=spec.rule, mr=spec.mr,
                seed=seed_label(s), topo_id=topology_id(cfg, rep),
                solved=res.solved, evals_used=res.evals_used,
                used_slots=res.used_slot_ratio_at_solve,
                phase="post", perturbation=kind,
            )
    return initial, post


def run_robustness(
    cfg: ExperimentConfig,
    out_dir,
    jobs: int = 1,
    resume: bool = True,
) -> Path:
    """Solve each repetition, perturb the solved network, re-adapt.

    Phase 1 runs the distributed climber from all-idle frames; each
    perturbation kind then branches independently from the solved state and
    re-adapts with a fresh budget.  Repetitions whose phase 1 never solved
    skip the perturbation phases (their initial row carries solved=false).
    Row order is canonical (initial rows by repetition, then each kind in
    config order), so resumes and parallel runs write identical bytes.
    """
    if cfg.robustness is None:
        raise ValueError("config has no robustness section")
    if cfg.topology.kind != "random":
        raise ValueError("robustness experiments use random topologies")
    spec = cfg.robustness
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    results_path = out_dir / "results.csv"

    existing: set[tuple] = set()
    if resume and results_path.exists():
        for row in read_rows(results_path):
            if row["experiment"] == cfg.name:
                existing.add((row["phase"], row["perturbation"], row["topology_id"]))

    reps = list(range(cfg.repetitions))
    if jobs > 1 and len(reps) > 1:
        chunks = [reps[i::jobs] for i in range(jobs)]
        chunks = [c for c in chunks if c]
        with ProcessPoolExecutor(max_workers=len(chunks)) as pool:
            parts = list(pool.map(_robustness_chunk, [(cfg, c) for c in chunks]))
        initial: dict[int, dict] = {}
        post: dict[tuple[int, int], dict] = {}
        for ini, pst in parts:
            initial.update(ini)
            post.update(pst)
    else:
        initial, post = _robustness_rows(cfg, reps)

    rows = [
        initial[rep] for rep in reps
        if ("initial", "", topology_id(cfg, rep)) not in existing
    ]
    for kind_idx, kind in enumerate(spec.kinds):
        for rep in reps:
            row = post.get((kind_idx, rep))
            if row is not None and ("post", kind, topology_id(cfg, rep)) not in existing:
                rows.append(row)

    append_rows(results_path, RESULT_COLUMNS, rows)
    return results_path


# ---------------------------------------------------------------------------
# aggregation

SUMMARY_COLUMNS = (
    "experiment", "algorithm", "rule", "phase", "perturbation", "best_mr",
    "n_runs", "n_solved", "median_used_slots", "std_used_slots",
    "median_used_resources",
)


def aggregate(rows: list[dict]) -> list[dict]:
    """Per (experiment, algorithm, rule, phase, perturbation) group: pick the
    mutation rate with the lowest median used-slot ratio over solved runs and
    report that cell's statistics.  Groups where nothing solved get "-".
    """
    cells: dict[tuple, dict[str, list]] = {}
    for row in rows:
        group = (row["experiment"], row["algorithm"], row["rule"],
                 row["phase"], row["perturbation"])
        cell = cells.setdefault(group, {})
        per_mr = cell.setdefault(row["mr"], {"slots": [], "resources": [], "n": 0})
        per_mr["n"] += 1
        if row["solved"] == "true":
            per_mr["slots"].append(float(row["used_slots"]))
            per_mr["resources"].append(float(row["used_resources"]))

    out = []
    for group in sorted(cells):
        experiment, algorithm, rule, phase, perturbation = group
        best = None
        for mr in sorted(cells[group], key=float):
            stats = cells[group][mr]
            if not stats["slots"]:
                continue
            med = _median(stats["slots"])
            if best is None or med < best[1]:
                best = (mr, med, stats)
        if best is None:
            # counts cover the whole group when no mutation rate solved
            n_runs = sum(s["n"] for s in cells[group].values())
            out.append({
                "experiment": experiment, "algorithm": algorithm, "rule": rule,
                "phase": phase, "perturbation": perturbation, "best_mr": "",
                "n_runs": str(n_runs), "n_solved": "0",
                "median_used_slots": "-", "std_used_slots": "-",
                "median_used_resources": "-",
            })
            continue
        mr, med, stats = best
        out.append({
            "experiment": experiment, "algorithm": algorithm, "rule": rule,
            "phase": phase, "perturbation": perturbation, "best_mr": mr,
            "n_runs": str(stats["n"]), "n_solved": str(len(stats["slots"])),
            "median_used_slots": _fmt(med),
            "std_used_slots": _fmt(_pstdev(stats["slots"])),
            "median_used_resources": _fmt(_median(stats["resources"])),
        })
    return out


def _median(values: list[float]) -> float:
    return float(statistics.median(values))


def _pstdev(values: list[float]) -> float:
    if len(values) == 1:
        return 0.0
    return float(statistics.pstdev(values))


def format_summary(summaries: list[dict]) -> str:
    header = ("experiment", "algorithm", "rule", "phase", "perturbation",
              "best_mr", "solved", "med_slots", "std_slots", "med_resources")
    lines = ["  ".join(f"{h:>13}" for h in header)]
    for s in summaries:
        med = s["median_used_slots"]
        std = s["std_used_slots"]
        res = s["median_used_resources"]
        cells = (
            s["experiment"], s["algorithm"], s["rule"] or "-", s["phase"],
            s["perturbation"] or "-", s["best_mr"] or "-",
            f"{s['n_solved']}/{s['n_runs']}",
            med if med == "-" else f"{float(med):.3f}",
            std if std == "-" else f"{float(std):.3f}",
            res if res == "-" else f"{float(res):.3f}",
        )
        lines.append("  ".join(f"{c:>13}" for c in cells))
    return "\n".join(lines) + "\n"


def env_default(name: str, fallback):
    """Environment override hook for output dir and parallelism."""
    value = os.environ.get(name)
    if value is None:
        return fallback
    return type(fallback)(value) if fallback is not None else value
