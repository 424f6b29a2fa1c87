import math
import statistics

import numpy as np
import pytest

from tdmaevo import experiments as ex
from tdmaevo.simcore import IDLE
from tdmaevo.topology import TopologySpec, build_random, hops_to_target

GRID_CFG = """\
name: tinygrid
topology: {kind: grid, side: 3}
packets: 5
budget: 400
repetitions: 3
seed: 11
mr: [0.08, 0.16]
algorithms:
  - {name: dhc, rules: [1]}
  - {name: chc}
"""

RAND_CFG = """\
name: tinyrand
topology: {kind: random, n: 9, cd: 0.8, cp: 1.0}
budget: 600
repetitions: 3
seed: 12
mr: [0.16]
algorithms:
  - {name: dhc, rules: [1, 5]}
robustness: {kinds: [remove], rule: 1, mr: 0.16}
"""


@pytest.fixture
def grid_cfg(tmp_path):
    p = tmp_path / "grid.yaml"
    p.write_text(GRID_CFG)
    return ex.load_config(p)


@pytest.fixture
def rand_cfg(tmp_path):
    p = tmp_path / "rand.yaml"
    p.write_text(RAND_CFG)
    return ex.load_config(p)


def test_load_config_defaults(grid_cfg):
    assert grid_cfg.name == "tinygrid"
    assert grid_cfg.topology.kind == "grid"
    assert grid_cfg.slot_count == 9
    assert grid_cfg.step_count == 45
    assert grid_cfg.mr_grid == (0.08, 0.16)
    assert grid_cfg.algorithms[0].rules == (1,)
    assert grid_cfg.algorithms[1].name == "chc"


def test_default_rule_list_is_all_seven(tmp_path):
    p = tmp_path / "c.yaml"
    p.write_text("name: x\ntopology: {kind: grid, side: 3}\nalgorithms: [{name: dhc}]\n")
    cfg = ex.load_config(p)
    assert cfg.algorithms[0].rules == ex.ALL_RULES
    assert cfg.mr_grid == ex.MR_GRID
    assert cfg.budget == 10000 and cfg.repetitions == 28 and cfg.packets == 5


def test_enumerate_tasks_count(grid_cfg):
    tasks = ex.enumerate_tasks(grid_cfg)
    # dhc: 1 rule x 2 mr x 3 reps; chc: 2 mr x 3 reps
    assert len(tasks) == 6 + 6
    assert [t.index for t in tasks] == list(range(12))


def test_run_sweep_rows_and_ranges(grid_cfg, tmp_path):
    out = tmp_path / "out"
    path = ex.run_sweep(grid_cfg, out)
    rows = ex.read_rows(path)
    assert len(rows) == 12
    assert list(rows[0].keys()) == list(ex.RESULT_COLUMNS)
    for row in rows:
        assert row["experiment"] == "tinygrid"
        assert row["topology_id"] == "grid9"
        assert 0.0 <= float(row["used_resources"]) <= 1.0
        assert 0.0 <= float(row["used_slots"]) <= 1.0
        assert row["phase"] == "initial"
        assert row["perturbation"] == ""


def test_sweep_deterministic_bytes(grid_cfg, tmp_path):
    p1 = ex.run_sweep(grid_cfg, tmp_path / "a")
    p2 = ex.run_sweep(grid_cfg, tmp_path / "b")
    assert p1.read_bytes() == p2.read_bytes()


def test_sweep_resume_skips_done_rows(grid_cfg, tmp_path):
    p1 = ex.run_sweep(grid_cfg, tmp_path / "a")
    full = p1.read_bytes()
    lines = p1.read_text().splitlines(keepends=True)
    # drop the last three rows and resume: only those re-run, appended in order
    (tmp_path / "a" / "results.csv").write_text("".join(lines[:-3]))
    p2 = ex.run_sweep(grid_cfg, tmp_path / "a")
    assert p2.read_bytes() == full


def test_sweep_parallel_matches_serial(grid_cfg, tmp_path):
    p1 = ex.run_sweep(grid_cfg, tmp_path / "serial", jobs=1)
    p2 = ex.run_sweep(grid_cfg, tmp_path / "par", jobs=3)
    assert p1.read_bytes() == p2.read_bytes()


def test_random_topology_ids_distinct_per_rep(rand_cfg, tmp_path):
    path = ex.run_sweep(rand_cfg, tmp_path / "o")
    rows = ex.read_rows(path)
    dhc_r1 = [r for r in rows if r["rule"] == "1"]
    assert sorted({r["topology_id"] for r in dhc_r1}) == [
        "rand9cd0.8cp1-r00", "rand9cd0.8cp1-r01", "rand9cd0.8cp1-r02",
    ]
    # rules share the per-repetition topologies
    dhc_r5 = [r for r in rows if r["rule"] == "5"]
    assert {r["topology_id"] for r in dhc_r5} == {r["topology_id"] for r in dhc_r1}


def test_generation_log(grid_cfg, tmp_path):
    out = tmp_path / "glog"
    ex.run_sweep(grid_cfg, out, log_generations=True)
    rows = ex.read_rows(out / "generations.csv")
    assert rows, "generation log should not be empty"
    assert list(rows[0].keys()) == list(ex.GENERATION_COLUMNS)
    dhc_rows = [r for r in rows if r["algorithm"] == "dhc"]
    assert dhc_rows and all(r["rule"] == "1" for r in dhc_rows)
    assert dhc_rows[0]["generation"] == "0"


# ---------------------------------------------------------------------------
# perturbations


@pytest.fixture
def solved_state():
    rng = np.random.default_rng(100)
    topo = build_random(36, 0.5, 1.0, rng)
    frames = np.random.default_rng(4).integers(0, 3, size=(36, 36)).astype(np.int8)
    return topo, frames


def test_perturb_remove(solved_state):
    topo, frames = solved_state
    out = ex.perturb(topo, frames, "remove", np.random.default_rng(1))
    assert out.topology.n == 30
    assert out.frames.shape == (30, 36)
    assert len(out.affected) == 6
    assert out.topology.seed_node == 0
    assert out.topology.target_node == 29
    for i, j in out.topology.edges:
        assert 0 <= i < 30 and 0 <= j < 30
    assert 0 not in out.affected and topo.target_node not in out.affected


def test_perturb_add(solved_state):
    topo, frames = solved_state
    out = ex.perturb(topo, frames, "add", np.random.default_rng(2))
    assert out.topology.n == 46
    assert out.frames.shape == (46, 36)
    assert out.affected == tuple(range(36, 46))
    # distance recheck oracle over every new edge
    old = set(topo.edges)
    for i, j in out.topology.edges:
        if (i, j) not in old:
            assert j >= 36 or i >= 36
            assert math.dist(out.topology.positions[i], out.topology.positions[j]) < 0.5
    # old edges survive untouched
    assert old <= set(out.topology.edges)


def test_perturb_relocate(solved_state):
    topo, frames = solved_state
    out = ex.perturb(topo, frames, "relocate", np.random.default_rng(3))
    assert out.topology.n == 36
    assert np.array_equal(out.frames, frames)
    moved = set(out.affected)
    assert len(moved) == 18
    assert topo.seed_node not in moved and topo.target_node not in moved
    for i in range(36):
        same = np.array_equal(out.topology.positions[i], topo.positions[i])
        assert same == (i not in moved)
    untouched_old = {e for e in topo.edges if not (set(e) & moved)}
    untouched_new = {e for e in out.topology.edges if not (set(e) & moved)}
    assert untouched_old == untouched_new
    for i, j in out.topology.edges:
        assert math.dist(out.topology.positions[i], out.topology.positions[j]) < 0.5


def test_perturb_reinitialize(solved_state):
    topo, frames = solved_state
    out = ex.perturb(topo, frames, "reinitialize", np.random.default_rng(4))
    assert out.topology is topo
    assert len(out.affected) == 18
    for i in range(36):
        if i not in out.affected:
            assert np.array_equal(out.frames[i], frames[i])


def test_perturb_insufficient_nodes():
    topo = build_random(9, 0.8, 1.0, np.random.default_rng(5))
    frames = np.zeros((9, 9), dtype=np.int8)
    with pytest.raises(ex.InsufficientNodes):
        ex.perturb(topo, frames, "relocate", np.random.default_rng(0))


def test_perturb_rejects_grid():
    from tdmaevo.topology import build_grid

    with pytest.raises(ValueError):
        ex.perturb(build_grid(3), np.zeros((9, 9), dtype=np.int8), "remove",
                   np.random.default_rng(0))


def test_run_robustness(rand_cfg, tmp_path):
    path = ex.run_robustness(rand_cfg, tmp_path / "rob")
    rows = ex.read_rows(path)
    initial = [r for r in rows if r["phase"] == "initial"]
    post = [r for r in rows if r["phase"] == "post"]
    assert len(initial) == 3
    solved_initial = [r for r in initial if r["solved"] == "true"]
    assert len(post) == len(solved_initial)
    assert all(r["perturbation"] == "remove" for r in post)
    # determinism
    path2 = ex.run_robustness(rand_cfg, tmp_path / "rob2")
    assert path.read_bytes() == path2.read_bytes()


# ---------------------------------------------------------------------------
# aggregation


def _row(mr, solved, slots, resources, rule="1", algo="dhc"):
    return {
        "experiment": "e", "topology_id": "t", "algorithm": algo, "rule": rule,
        "mr": repr(mr), "seed": "1", "solved": "true" if solved else "false",
        "used_resources": repr(resources), "used_slots": repr(slots),
        "phase": "initial", "perturbation": "",
    }


def test_aggregate_single_solved_run():
    out = ex.aggregate([_row(0.04, True, 0.5, 0.2)])
    assert len(out) == 1
    assert out[0]["median_used_slots"] == repr(0.5)
    assert out[0]["std_used_slots"] == repr(0.0)
    assert out[0]["n_solved"] == "1"


def test_aggregate_all_unsolved_gives_dash():
    out = ex.aggregate([_row(0.04, False, 0.5, 1.0), _row(0.04, False, 0.6, 1.0)])
    assert out[0]["median_used_slots"] == "-"
    assert out[0]["best_mr"] == ""


def test_aggregate_best_of_mr_picks_lowest_median():
    rows = [_row(0.04, True, s, 0.1) for s in (0.5, 0.6, 0.7)]
    rows += [_row(0.08, True, s, 0.2) for s in (0.3, 0.4, 0.9)]
    rows += [_row(0.16, False, 0.1, 1.0)]
    out = ex.aggregate(rows)
    assert len(out) == 1
    assert out[0]["best_mr"] == repr(0.08)
    assert out[0]["median_used_slots"] == repr(0.4)
    assert out[0]["n_runs"] == "3"


def test_aggregate_matches_reference_statistics():
    rng = np.random.default_rng(0)
    values = rng.random(28).tolist()
    rows = [_row(0.04, True, v, v / 2) for v in values]
    out = ex.aggregate(rows)
    assert float(out[0]["median_used_slots"]) == statistics.median(values)
    assert abs(float(out[0]["std_used_slots"]) - statistics.pstdev(values)) < 1e-15
    assert float(out[0]["median_used_resources"]) == statistics.median(
        [v / 2 for v in values]
    )


def test_aggregate_groups_by_rule_and_perturbation():
    rows = [
        _row(0.04, True, 0.5, 0.1, rule="1"),
        _row(0.04, True, 0.3, 0.1, rule="5"),
        dict(_row(0.04, True, 0.9, 0.4), phase="post", perturbation="add"),
    ]
    out = ex.aggregate(rows)
    assert len(out) == 3
    keys = {(o["rule"], o["phase"], o["perturbation"]) for o in out}
    assert keys == {("1", "initial", ""), ("5", "initial", ""), ("1", "post", "add")}


def test_unsolved_excluded_from_slot_median():
    rows = [_row(0.04, True, 0.5, 0.1), _row(0.04, False, 0.99, 1.0)]
    out = ex.aggregate(rows)
    assert out[0]["median_used_slots"] == repr(0.5)
    assert out[0]["n_solved"] == "1" and out[0]["n_runs"] == "2"
    # both counts refer to the winning mutation-rate cell


def test_format_summary_renders_dash():
    out = ex.aggregate([_row(0.04, False, 0.5, 1.0)])
    text = ex.format_summary(out)
    assert "-" in text and "tinygrid" not in text


def test_nsga2_sweep_dumps_front(tmp_path):
    cfg_text = (
        "name: fronts\n"
        "topology: {kind: grid, side: 3}\n"
        "budget: 150\nrepetitions: 1\nseed: 3\nmr: [0.08]\n"
        "algorithms: [{name: nsga2, pop_size: 10}]\n"
    )
    p = tmp_path / "cfg.yaml"
    p.write_text(cfg_text)
    cfg = ex.load_config(p)
    ex.run_sweep(cfg, tmp_path / "out")
    fronts = ex.read_rows(tmp_path / "out" / "fronts.csv")
    assert fronts, "front dump missing"
    assert list(fronts[0].keys()) == list(ex.FRONT_COLUMNS)
    pts = [(float(r["f1"]), float(r["f2"])) for r in fronts]
    assert pts == sorted(pts)
    for a, b in pts:
        assert 0.0 <= a and 0.0 <= b <= 1.0


def test_robustness_jobs_parallel_matches_serial(rand_cfg, tmp_path):
    p1 = ex.run_robustness(rand_cfg, tmp_path / "s", jobs=1)
    p2 = ex.run_robustness(rand_cfg, tmp_path / "p", jobs=2)
    assert p1.read_bytes() == p2.read_bytes()
