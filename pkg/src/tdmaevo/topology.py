"""Network topologies: square grids and random geometric graphs.

All topologies live on the unit square.  Node 0 is the packet source
("seed") and node n-1 the sink ("target") unless stated otherwise; random
graphs pin those two nodes to (0,0) and (1,1).  Hop distances to the target
are answered by a BFS table, with unreachable nodes marked ``UNREACHABLE``.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field

import numpy as np

log = logging.getLogger(__name__)

UNREACHABLE = -1


class ExhaustedAttempts(RuntimeError):
    """No seed-to-target connected sample found within the attempt cap."""


@dataclass(frozen=True)
class TopologySpec:
    """Parameters that define a topology family member.

    kind "grid" uses ``side``; kind "random" uses ``n``, ``cd`` (connection
    distance) and ``cp`` (connection probability).
    """

    kind: str
    side: int | None = None
    n: int | None = None
    cd: float | None = None
    cp: float | None = None

    def __post_init__(self):
        if self.kind == "grid":
            if self.side is None or self.side < 2:
                raise ValueError("grid topologies need side >= 2")
        elif self.kind == "random":
            if self.n is None or self.n < 2:
                raise ValueError("random topologies need n >= 2")
            if self.cd is None or self.cp is None or not 0.0 <= self.cp <= 1.0:
                raise ValueError("random topologies need cd and cp in [0, 1]")
        else:
            raise ValueError(f"unknown topology kind: {self.kind!r}")

    @property
    def node_count(self) -> int:
        return self.side * self.side if self.kind == "grid" else self.n

    def label(self) -> str:
        if self.kind == "grid":
            return f"grid{self.node_count}"
        return f"rand{self.n}cd{_num(self.cd)}cp{_num(self.cp)}"


def _num(x: float) -> str:
    return f"{x:g}"


@dataclass(frozen=True, eq=False)
class Topology:
    """Immutable undirected graph with node coordinates.

    ``edges`` stores each unordered pair once as (i, j) with i < j, sorted,
    so serialized topologies are byte-stable.
    """

    kind: str
    positions: np.ndarray                # (n, 2) float64 in [0, 1]^2
    edges: tuple[tuple[int, int], ...]
    seed_node: int
    target_node: int
    cd: float | None = None
    cp: float | None = None
    rng_seed: int | None = None
    neighbors: tuple[tuple[int, ...], ...] = field(init=False, repr=False)

    def __post_init__(self):
        n = len(self.positions)
        if not (0 <= self.seed_node < n and 0 <= self.target_node < n):
            raise ValueError("seed/target out of range")
        if self.seed_node == self.target_node:
            raise ValueError("seed and target must be distinct")
        lists: list[list[int]] = [[] for _ in range(n)]
        for i, j in self.edges:
            if i == j:
                raise ValueError("self-edges are not allowed")
            lists[i].append(j)
            lists[j].append(i)
        object.__setattr__(
            self, "neighbors", tuple(tuple(sorted(v)) for v in lists)
        )

    @property
    def n(self) -> int:
        return len(self.positions)

    def has_edge(self, i: int, j: int) -> bool:
        return j in self.neighbors[i]

    def adjacency_matrix(self) -> np.ndarray:
        adj = np.zeros((self.n, self.n), dtype=bool)
        for i, j in self.edges:
            adj[i, j] = adj[j, i] = True
        return adj

    def to_json_dict(self) -> dict:
        return {
            "kind": self.kind,
            "n": self.n,
            "cd": self.cd,
            "cp": self.cp,
            "rng_seed": self.rng_seed,
            "positions": [[float(x), float(y)] for x, y in self.positions],
            "edges": [list(e) for e in self.edges],
            "seed": self.seed_node,
            "target": self.target_node,
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "Topology":
        edges = tuple(sorted((min(i, j), max(i, j)) for i, j in d["edges"]))
        return cls(
            kind=d["kind"],
            positions=np.asarray(d["positions"], dtype=np.float64),
            edges=edges,
            seed_node=d["seed"],
            target_node=d["target"],
            cd=d.get("cd"),
            cp=d.get("cp"),
            rng_seed=d.get("rng_seed"),
        )

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_json_dict(), fh, indent=1)
            fh.write("\n")

    @classmethod
    def load(cls, path) -> "Topology":
        with open(path) as fh:
            return cls.from_json_dict(json.load(fh))


@dataclass(frozen=True)
class HopTable:
    """Per-node shortest hop count to the target (UNREACHABLE if cut off)."""

    hops: np.ndarray          # (n,) int64
    max_hop: int              # largest finite hop value

    def reachable(self, i: int) -> bool:
        return self.hops[i] != UNREACHABLE


def build_grid(side: int) -> Topology:
    """side x side lattice with 4-neighbor connectivity.

    Seed sits at corner (0,0), target at the opposite corner; lattice
    indices are normalized into [0,1]^2 so all topologies share one
    coordinate representation.
    """
    if side < 2:
        raise ValueError("side must be >= 2")
    n = side * side
    denom = float(side - 1)
    positions = np.empty((n, 2), dtype=np.float64)
    edges = []
    for r in range(side):
        for c in range(side):
            i = r * side + c
            positions[i] = (c / denom, r / denom)
            if c + 1 < side:
                edges.append((i, i + 1))
            if r + 1 < side:
                edges.append((i, i + side))
    return Topology(
        kind="grid",
        positions=positions,
        edges=tuple(sorted(edges)),
        seed_node=0,
        target_node=n - 1,
    )


def build_random(
    n: int,
    cd: float,
    cp: float,
    rng: np.random.Generator | int | None,
) -> Topology:
    """Random geometric sample: seed at (0,0), target at (1,1), n-2 uniform
    intermediate nodes; an edge joins (i, j) iff dist < cd and an independent
    uniform draw falls below cp.

    Draw order is fixed (positions for nodes 1..n-2, then pair draws in
    lexicographic order, one draw per pair within distance) so a given seed
    always yields the same sample.  Reachability is not guaranteed; see
    retry_connected.
    """
    if n < 2:
        raise ValueError("n must be >= 2")
    seed_int = rng if isinstance(rng, int) else None
    gen = np.random.default_rng(rng)
    positions = np.empty((n, 2), dtype=np.float64)
    positions[0] = (0.0, 0.0)
    positions[n - 1] = (1.0, 1.0)
    for i in range(1, n - 1):
        positions[i] = gen.random(2)
    edges = []
    for i in range(n):
        for j in range(i + 1, n):
            if math.dist(positions[i], positions[j]) < cd and gen.random() < cp:
                edges.append((i, j))
    return Topology(
        kind="random",
        positions=positions,
        edges=tuple(edges),
        seed_node=0,
        target_node=n - 1,
        cd=cd,
        cp=cp,
        rng_seed=seed_int,
    )


def build(spec: TopologySpec, rng=None) -> Topology:
    if spec.kind == "grid":
        return build_grid(spec.side)
    return build_random(spec.n, spec.cd, spec.cp, rng)


def retry_connected(
    spec: TopologySpec,
    rng: np.random.Generator | int | None = None,
    max_attempts: int = 1000,
) -> Topology:
    """Resample until the target is reachable from the seed.

    Grids always pass on the first attempt.  Raises ExhaustedAttempts when
    no connected sample shows up within max_attempts; the attempt count of
    successful calls is logged so per-sample reachability stays auditable.
    """
    if max_attempts < 1:
        raise ValueError("max_attempts must be >= 1")
    gen = np.random.default_rng(rng)
    seed_int = rng if isinstance(rng, int) else None
    for attempt in range(1, max_attempts + 1):
        topo = build(spec, gen)
        if seed_int is not None:
            topo = Topology(
                kind=topo.kind,
                positions=topo.positions,
                edges=topo.edges,
                seed_node=topo.seed_node,
                target_node=topo.target_node,
                cd=topo.cd,
                cp=topo.cp,
                rng_seed=seed_int,
            )
        if hops_to_target(topo).reachable(topo.seed_node):
            if attempt > 1:
                log.info("connected sample found on attempt %d", attempt)
            return topo
    raise ExhaustedAttempts(
        f"no connected sample in {max_attempts} attempts ({spec.label()})"
    )


def hops_to_target(topo: Topology) -> HopTable:
    """BFS hop counts from every node to the target."""
    hops = np.full(topo.n, UNREACHABLE, dtype=np.int64)
    hops[topo.target_node] = 0
    frontier = [topo.target_node]
    while frontier:
        nxt = []
        for i in frontier:
            for j in topo.neighbors[i]:
                if hops[j] == UNREACHABLE:
                    hops[j] = hops[i] + 1
                    nxt.append(j)
        frontier = nxt
    finite = hops[hops != UNREACHABLE]
    return HopTable(hops=hops, max_hop=int(finite.max()))
