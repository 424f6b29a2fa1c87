"""Slot-synchronized network evaluation.

Every node owns a repeating length-S time frame of actions; one evaluation
runs the whole network for K steps, injecting one packet into the seed
queue at the first step of each frame repetition (steps 1, S+1, ...), up to
M packets total.  Step semantics:

* A node whose slot says Transmit emits its head-of-queue packet; with an
  empty queue it stays silent on the channel (behavior 1).
* A node whose slot says Listen hears a packet iff exactly one of its
  neighbors is emitting this step; two or more emitting neighbors collide
  and nothing is received.
* A hearer that has never seen the packet id records it, acknowledges
  instantly, and enqueues the packet -- except the target, which records the
  delivery and drops it.  A hearer that has seen the id ignores it and sends
  no acknowledgement.
* An emitter that collects at least one acknowledgement dequeues the packet
  (behavior 2); otherwise it keeps it (behavior 3).

Behavior classification (the nine buckets below) uses the queue state at
the start of the step, after injection but before any enqueue/dequeue.
"Received" for listeners means a packet was heard, whether or not it was a
duplicate.

==  ========  =========  ====================
id  action    queue      outcome
==  ========  =========  ====================
1   Transmit  empty      (silent)
2   Transmit  non-empty  ack received
3   Transmit  non-empty  ack not received
4   Idle      empty
5   Idle      non-empty
6   Listen    empty      packet received
7   Listen    non-empty  packet received
8   Listen    empty      packet not received
9   Listen    non-empty  packet not received
==  ========  =========  ====================

The simulation is a pure function of its inputs: no randomness inside.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np

from .topology import HopTable, Topology, hops_to_target

IDLE, TRANSMIT, LISTEN = 0, 1, 2
ACTION_CHARS = ".TL"
N_BEHAVIORS = 9

# best_hop placeholder for copies stranded at nodes the BFS cannot reach
# (cannot happen while packets flow inside the seed's component).
_FAR = np.int64(1 << 14)

TRACE_COLUMNS = ("step", "node", "action", "behavior", "queue_len")


class DimensionMismatch(ValueError):
    """Frame matrix shape does not agree with the topology."""


@dataclass
class EvalResult:
    """Full accounting of one K-step evaluation."""

    behavior_counts: np.ndarray        # (n, 9) int64, column b-1 = behavior b
    delivered_steps: dict[int, int]    # packet id -> first arrival step, 1-based
    best_hop: np.ndarray               # (m,) int64, min hop over all holders
    used_slots: np.ndarray             # (n,) int64, non-idle slots per frame

    @property
    def delivered_ids(self) -> set[int]:
        return set(self.delivered_steps)


def frames_array(frames, n_nodes: int | None = None) -> np.ndarray:
    a = np.asarray(frames, dtype=np.int8)
    if a.ndim != 2:
        raise DimensionMismatch("frames must be a 2-D (nodes x slots) array")
    if n_nodes is not None and a.shape[0] != n_nodes:
        raise DimensionMismatch(
            f"{a.shape[0]} frames for {n_nodes} nodes"
        )
    if not np.isin(a, (IDLE, TRANSMIT, LISTEN)).all():
        raise ValueError("frames may only contain idle/transmit/listen actions")
    return a


def evaluate_network(
    topo: Topology,
    frames,
    packets: int,
    steps: int,
    hops: HopTable | None = None,
    trace=None,
) -> EvalResult:
    """Simulate the whole network for ``steps`` steps.

    ``trace``, if given, is a writable text file receiving one CSV row per
    node per step with the TRACE_COLUMNS fields.
    """
    frames = frames_array(frames, topo.n)
    n, s = frames.shape
    if s < 1 or steps < 1 or packets < 1:
        raise ValueError("need S >= 1, K >= 1, M >= 1")
    if hops is None:
        hops = hops_to_target(topo)
    hop = hops.hops
    seed, target = topo.seed_node, topo.target_node

    queues: list[deque[int]] = [deque() for _ in range(n)]
    seen: list[set[int]] = [set() for _ in range(n)]
    counts = np.zeros((n, N_BEHAVIORS), dtype=np.int64)
    delivered_steps: dict[int, int] = {}
    seed_hop = hop[seed] if hop[seed] != -1 else _FAR
    best_hop = np.full(packets, seed_hop, dtype=np.int64)

    if trace is not None:
        trace.write(",".join(TRACE_COLUMNS) + "\n")

    for t in range(1, steps + 1):
        slot = (t - 1) % s
        if slot == 0 and (t - 1) // s < packets:
            pkt = (t - 1) // s
            queues[seed].append(pkt)
            seen[seed].add(pkt)

        acts = frames[:, slot]
        nonempty = [len(q) > 0 for q in queues]
        emitting = [i for i in range(n) if acts[i] == TRANSMIT and nonempty[i]]
        emit_set = set(emitting)

        heard = [False] * n
        arrivals: list[tuple[int, int, int]] = []   # (listener, packet, emitter)
        for i in range(n):
            if acts[i] != LISTEN:
                continue
            senders = [j for j in topo.neighbors[i] if j in emit_set]
            if len(senders) == 1:
                heard[i] = True
                e = senders[0]
                pkt = queues[e][0]
                if pkt not in seen[i]:
                    arrivals.append((i, pkt, e))

        acked = [0] * n
        for i, pkt, e in arrivals:
            seen[i].add(pkt)
            acked[e] += 1
            if i == target:
                delivered_steps.setdefault(pkt, t)
                best_hop[pkt] = 0
            else:
                queues[i].append(pkt)
                if hop[i] != -1 and hop[i] < best_hop[pkt]:
                    best_hop[pkt] = hop[i]
        for e in emitting:
            if acked[e]:
                queues[e].popleft()

        for i in range(n):
            a = acts[i]
            ne = nonempty[i]
            if a == TRANSMIT:
                b = 1 if not ne else (2 if acked[i] else 3)
            elif a == IDLE:
                b = 5 if ne else 4
            else:
                b = (7 if ne else 6) if heard[i] else (9 if ne else 8)
            counts[i, b - 1] += 1
            if trace is not None:
                trace.write(
                    f"{t},{i},{ACTION_CHARS[a]},{b},{len(queues[i])}\n"
                )

    return EvalResult(
        behavior_counts=counts,
        delivered_steps=delivered_steps,
        best_hop=best_hop,
        used_slots=(frames != IDLE).sum(axis=1),
    )


def delivery_rate(res: EvalResult, packets: int) -> float:
    return len(res.delivered_steps) / packets


def used_slot_ratio(frames) -> float:
    """Fraction of non-idle slots across all frames."""
    frames = np.asarray(frames)
    return float((frames != IDLE).mean())


def frames_to_text(frames) -> str:
    frames = frames_array(frames)
    return "\n".join("".join(ACTION_CHARS[a] for a in row) for row in frames) + "\n"


def frames_from_text(text: str) -> np.ndarray:
    rows = [line for line in text.splitlines() if line.strip()]
    lut = {c: i for i, c in enumerate(ACTION_CHARS)}
    try:
        data = [[lut[c] for c in row] for row in rows]
    except KeyError as exc:
        raise ValueError(f"unknown action character {exc}") from None
    if len({len(r) for r in data}) > 1:
        raise DimensionMismatch("frame rows have differing lengths")
    return np.asarray(data, dtype=np.int8)
