"""The compiled engine must agree with the pure-Python simulator exactly."""

import numpy as np
import pytest

from tdmaevo import engine
from tdmaevo.simcore import evaluate_network
from tdmaevo.topology import build_grid, build_random, hops_to_target


def assert_parity(topo, frames_batch, packets, steps):
    ctx = engine.context_for(topo)
    out = engine.evaluate_batch(frames_batch, ctx, packets, steps)
    hops = hops_to_target(topo)
    for b in range(len(frames_batch)):
        ref = evaluate_network(topo, frames_batch[b], packets, steps, hops)
        assert np.array_equal(out.behavior_counts[b], ref.behavior_counts)
        assert np.array_equal(out.best_hop[b], ref.best_hop)
        steps_map = {p: int(s) for p, s in enumerate(out.delivered_step[b]) if s}
        assert steps_map == ref.delivered_steps
        assert set(np.flatnonzero(out.delivered[b])) == ref.delivered_ids


@pytest.mark.parametrize("seed", range(5))
def test_parity_grid3_random_frames(seed):
    rng = np.random.default_rng(seed)
    topo = build_grid(3)
    frames = rng.integers(0, 3, size=(40, 9, 9)).astype(np.int8)
    assert_parity(topo, frames, packets=5, steps=45)


def test_parity_edge_frames():
    topo = build_grid(3)
    frames = np.stack([
        np.zeros((9, 9), dtype=np.int8),               # all idle
        np.ones((9, 9), dtype=np.int8),                # all transmit
        np.full((9, 9), 2, dtype=np.int8),             # all listen
    ])
    assert_parity(topo, frames, packets=5, steps=45)


@pytest.mark.parametrize("packets,steps", [(1, 1), (2, 7), (5, 45), (6, 100), (3, 14)])
def test_parity_varied_m_k(packets, steps):
    rng = np.random.default_rng(packets * 100 + steps)
    topo = build_random(7, 0.8, 0.8, rng)
    frames = rng.integers(0, 3, size=(25, 7, 7)).astype(np.int8)
    assert_parity(topo, frames, packets, steps)


def test_parity_disconnected_topology():
    rng = np.random.default_rng(0)
    topo = build_random(8, 0.4, 0.3, rng)   # likely fragmented
    frames = rng.integers(0, 3, size=(20, 8, 8)).astype(np.int8)
    assert_parity(topo, frames, packets=4, steps=32)


def test_parity_grid6():
    rng = np.random.default_rng(12)
    topo = build_grid(6)
    frames = rng.integers(0, 3, size=(10, 36, 36)).astype(np.int8)
    assert_parity(topo, frames, packets=5, steps=180)


def test_stacked_contexts_match_per_run_scalar():
    rng = np.random.default_rng(21)
    topos = [build_random(9, 0.8, 0.7, np.random.default_rng(s)) for s in range(6)]
    ctxs = [engine.context_for(t) for t in topos]
    frames = rng.integers(0, 3, size=(6, 9, 9)).astype(np.int8)
    out = engine.evaluate_batch(frames, ctxs, 5, 45)
    for b, topo in enumerate(topos):
        ref = evaluate_network(topo, frames[b], 5, 45)
        assert np.array_equal(out.behavior_counts[b], ref.behavior_counts)
        assert np.array_equal(out.best_hop[b], ref.best_hop)


def test_shared_equals_stacked():
    rng = np.random.default_rng(4)
    topo = build_grid(3)
    frames = rng.integers(0, 3, size=(8, 9, 9)).astype(np.int8)
    shared = engine.evaluate_batch(frames, engine.context_for(topo), 5, 45)
    stacked = engine.evaluate_batch(
        frames, [engine.context_for(topo) for _ in range(8)], 5, 45
    )
    assert np.array_equal(shared.behavior_counts, stacked.behavior_counts)
    assert np.array_equal(shared.delivered_step, stacked.delivered_step)
    assert np.array_equal(shared.best_hop, stacked.best_hop)


def test_packet_cap_enforced():
    topo = build_grid(2)
    frames = np.zeros((1, 4, 4), dtype=np.int8)
    with pytest.raises(ValueError):
        engine.evaluate_batch(frames, engine.context_for(topo), 64, 4)


def test_context_count_mismatch():
    topo = build_grid(2)
    frames = np.zeros((2, 4, 4), dtype=np.int8)
    with pytest.raises(ValueError):
        engine.evaluate_batch(frames, [engine.context_for(topo)], 2, 4)
