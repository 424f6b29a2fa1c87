"""Distributed hill climbing over per-node time frames.

Every node runs its own climber: propose a mutated frame, score it with the
node-local reinforcement sum, keep it when it scores at least as well as
the incumbent.  Accepting equal-reward proposals lets frames drift through
reward-neutral changes, which is what lets relaxed rules accumulate idle
chatter while punishing rules stay sparse.  One shared network evaluation
per generation serves all nodes and counts as a single unit of the
evaluation budget, which keeps budgets comparable with the centralized
optimizers.

An all-idle frame scores a constant far below any reachable reinforcement
sum, so the very first accepted frame is always non-empty and the climb
"complexifies" from silence.
"""

from __future__ import annotations

import statistics
from dataclasses import dataclass, field

import numpy as np

from . import engine
from .simcore import IDLE, N_BEHAVIORS, used_slot_ratio
from .topology import Topology

#: reinforcement for: 1 transmit/empty, 2 transmit/acked, 3 transmit/no-ack,
#: 4 idle/empty, 5 idle/queued, 6 listen/empty/heard, 7 listen/queued/heard,
#: 8 listen/empty/silence, 9 listen/queued/silence
_SHARED = {1: -1.0, 2: 1.0, 3: -1.0, 5: -1.0, 6: 1.0, 7: 1.0}
_VARIANTS = {
    1: (0.0, 0.0, 0.0),
    2: (0.5, 0.0, 0.0),
    3: (1.0, 0.0, 0.0),
    4: (0.0, -0.5, -0.5),
    5: (0.0, -1.0, -1.0),
    6: (0.5, -0.5, -0.5),
    7: (1.0, -1.0, -1.0),
}


@dataclass(frozen=True)
class RuleTable:
    """Nine behavior reinforcements plus the empty-frame constant.

    When ``empty_constant`` is left unset it is derived from the run length
    as -(K+1) * max(1, max|r|), which sits strictly below every reachable
    reinforcement sum for any run the table is used with.
    """

    rewards: tuple[float, ...]
    empty_constant: float | None = None
    rule_id: int | None = None

    def __post_init__(self):
        if len(self.rewards) != N_BEHAVIORS:
            raise ValueError("a rule table needs exactly 9 reinforcement values")

    def empty_value(self, run_length: int) -> float:
        if self.empty_constant is not None:
            return self.empty_constant
        return -(run_length + 1) * max(1.0, max(abs(r) for r in self.rewards))


def rule_table(rule_id: int) -> RuleTable:
    if rule_id not in _VARIANTS:
        raise ValueError(f"rule id must be 1..7, got {rule_id}")
    r4, r8, r9 = _VARIANTS[rule_id]
    varying = {4: r4, 8: r8, 9: r9}
    rewards = tuple(
        _SHARED[k] if k in _SHARED else varying[k] for k in range(1, 10)
    )
    return RuleTable(rewards=rewards, rule_id=rule_id)


def seven_rules() -> list[RuleTable]:
    """The seven published reinforcement assignments, in rule-id order."""
    return [rule_table(i) for i in range(1, 8)]


def local_fitness(frame, counts, rule: RuleTable) -> float:
    """Reinforcement sum for one node, or the empty-frame constant.

    ``counts`` must come from an evaluation of run length K = counts.sum();
    the dot product with the rule equals the step-by-step sum of rewards.
    """
    frame = np.asarray(frame)
    counts = np.asarray(counts)
    if (frame == IDLE).all():
        return rule.empty_value(int(counts.sum()))
    return float(counts @ np.asarray(rule.rewards))


def mutate(frame, mr: float, rng: np.random.Generator) -> np.ndarray:
    """Resample each slot with probability mr to one of the two other actions.

    Consumes two uniform blocks of the frame's shape regardless of mr, so a
    run's random stream is independent of which slots actually flip.
    """
    if not 0.0 <= mr <= 1.0:
        raise ValueError("mutation rate must lie in [0, 1]")
    frame = np.asarray(frame, dtype=np.int8)
    u = rng.random(frame.shape)
    v = rng.random(frame.shape)
    offset = 1 + (v >= 0.5)
    return np.where(u < mr, (frame + offset) % 3, frame).astype(np.int8)


@dataclass
class DhcConfig:
    rule: RuleTable
    mr: float
    max_evals: int = 10000
    early_stop: bool = True
    log_generations: bool = False

    def __post_init__(self):
        if not 0.0 <= self.mr <= 1.0:
            raise ValueError("mutation rate must lie in [0, 1]")
        if self.max_evals < 1:
            raise ValueError("max_evals must be >= 1")


@dataclass
class GenerationStats:
    generation: int
    delivery_rate: float
    fit_min: float
    fit_median: float
    fit_max: float
    used_slot_ratio: float


@dataclass
class DhcRunResult:
    final_frames: np.ndarray             # (n, S); the solving configuration when solved
    evals_used: int                      # network evaluations up to solve (or budget)
    solved: bool
    used_slot_ratio_at_solve: float      # ratio of final_frames
    generations: list[GenerationStats] = field(default_factory=list)


def run_dhc(
    topo: Topology,
    cfg: DhcConfig,
    packets: int,
    steps: int,
    rng: np.random.Generator,
    initial_frames: np.ndarray | None = None,
) -> DhcRunResult:
    """One distributed hill-climbing run.

    Frames start all-idle (or from ``initial_frames`` when resuming after a
    perturbation); the initial evaluation counts against the budget.  When a
    generation's proposal set reaches 100% delivery the run stops (if
    early_stop) and that proposal set is the returned solution.  With
    early_stop=False the search continues to the budget but the first
    solving snapshot still defines the returned frames and evals_used.
    """
    return run_dhc_batch(
        [topo], [cfg], packets, steps, [rng], [initial_frames]
    )[0]


def run_dhc_batch(
    topos: list[Topology],
    cfgs: list[DhcConfig],
    packets: int,
    steps: int,
    rngs: list[np.random.Generator],
    initial_frames: list[np.ndarray | None] | None = None,
) -> list[DhcRunResult]:
    """Advance many independent runs in lockstep.

    Each run consumes only its own generator, two uniform blocks per
    generation, so results are identical whether a run executes alone or
    inside a batch.  All runs must share node count, slot count, packet
    count, step count and budget.
    """
    bsz = len(topos)
    if not (len(cfgs) == len(rngs) == bsz):
        raise ValueError("topos, cfgs and rngs must have equal length")
    if initial_frames is None:
        initial_frames = [None] * bsz
    n = topos[0].n
    budget = cfgs[0].max_evals
    if any(t.n != n for t in topos) or any(c.max_evals != budget for c in cfgs):
        raise ValueError("batched runs must share node count and budget")

    frames = []
    for init in initial_frames:
        if init is None:
            frames.append(np.zeros((n, _default_s(steps, packets)), dtype=np.int8))
        else:
            frames.append(np.asarray(init, dtype=np.int8).copy())
    lengths = {f.shape[1] for f in frames}
    if len(lengths) != 1:
        raise ValueError("batched runs must share slot count")
    s = lengths.pop()
    frames = np.stack(frames)                                   # (B, n, S)

    shared = all(t is topos[0] for t in topos)
    ctx = engine.context_for(topos[0]) if shared else [engine.context_for(t) for t in topos]

    rules = np.array([c.rule.rewards for c in cfgs])            # (B, 9)
    empty_c = np.array([c.rule.empty_value(steps) for c in cfgs])
    mrs = np.array([c.mr for c in cfgs])

    results: list[DhcRunResult | None] = [None] * bsz
    logs: list[list[GenerationStats]] = [[] for _ in range(bsz)]
    first_solve: list[tuple[int, np.ndarray, float] | None] = [None] * bsz

    def fitness(fr: np.ndarray, counts: np.ndarray, idx: np.ndarray) -> np.ndarray:
        f = np.einsum("bnk,bk->bn", counts.astype(np.float64), rules[idx])
        empty = ~(fr != IDLE).any(axis=2)
        return np.where(empty, empty_c[idx][:, None], f)

    active = np.arange(bsz)
    out = _evaluate(frames, ctx, active, packets, steps, shared)
    fit = fitness(frames, out.behavior_counts, active)          # (B, n)
    evals = np.ones(bsz, dtype=np.int64)
    _log_generation(cfgs, logs, active, 0, out, fit, frames)
    active = _retire(
        cfgs, results, logs, first_solve, active, out, frames, frames, evals, budget
    )

    while active.size:
        u = np.stack([rngs[b].random((n, s)) for b in active])
        v = np.stack([rngs[b].random((n, s)) for b in active])
        cur = frames[active]
        proposals = np.where(u < mrs[active, None, None], (cur + 1 + (v >= 0.5)) % 3, cur)
        proposals = proposals.astype(np.int8)

        out = _evaluate(proposals, ctx, active, packets, steps, shared)
        evals[active] += 1
        new_fit = fitness(proposals, out.behavior_counts, active)
        accept = new_fit >= fit[active]
        upd = np.where(accept[:, :, None], proposals, cur)
        frames[active] = upd
        fit[active] = np.where(accept, new_fit, fit[active])
        _log_generation(cfgs, logs, active, int(evals[active[0]]) - 1, out, fit[active], proposals)
        active = _retire(
            cfgs, results, logs, first_solve, active, out, proposals, frames, evals, budget
        )

    return results  # type: ignore[return-value]


def _default_s(steps: int, packets: int) -> int:
    # all-idle initial frames get S = K / M, the run's slot count
    if steps % packets:
        raise ValueError("pass explicit initial frames when K is not M*S")
    return steps // packets


def _evaluate(frames, ctx, active, packets, steps, shared):
    fr = frames if frames.shape[0] == active.size else frames[active]
    if shared:
        return engine.evaluate_batch(fr, ctx, packets, steps)
    return engine.evaluate_batch(fr, [ctx[b] for b in active], packets, steps)


def _log_generation(cfgs, logs, active, gen, out, fit, evaluated):
    rate = out.delivery_rate
    ratio = (evaluated != IDLE).mean(axis=(1, 2))
    for k, b in enumerate(active):
        if not cfgs[b].log_generations:
            continue
        row = fit[k]
        logs[b].append(
            GenerationStats(
                generation=gen,
                delivery_rate=float(rate[k]),
                fit_min=float(row.min()),
                fit_median=float(statistics.median(row.tolist())),
                fit_max=float(row.max()),
                used_slot_ratio=float(ratio[k]),
            )
        )


def _retire(cfgs, results, logs, first_solve, active, out, evaluated, frames, evals, budget):
    """Record solves and budget exhaustion; return the still-active indices."""
    rate = out.delivery_rate
    keep = []
    for k, b in enumerate(active):
        solved_now = rate[k] == 1.0 and first_solve[b] is None
        if solved_now:
            snapshot = evaluated[k].copy()
            first_solve[b] = (int(evals[b]), snapshot, used_slot_ratio(snapshot))
        done = (first_solve[b] is not None and cfgs[b].early_stop) or evals[b] >= budget
        if not done:
            keep.append(b)
            continue
        if first_solve[b] is not None:
            ev, snap, ratio = first_solve[b]
            results[b] = DhcRunResult(snap, ev, True, ratio, logs[b])
        else:
            final = frames[b].copy()
            results[b] = DhcRunResult(
                final, int(evals[b]), False, used_slot_ratio(final), logs[b]
            )
    return np.array(keep, dtype=np.int64)
