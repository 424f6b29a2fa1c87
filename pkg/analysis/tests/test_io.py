import pytest

from tdmaevo_analysis.io import MissingColumns, read_results

from conftest import make_row


def test_read_results_parses_types(results_file):
    path = results_file([make_row(mr="0.08", used_slots="0.25", solved="false")])
    rows = read_results(path)
    assert len(rows) == 1
    r = rows[0]
    assert r.mr == 0.08 and r.used_slots == 0.25 and r.solved is False
    assert r.column == "R1"


def test_column_labels(results_file):
    path = results_file([
        make_row(algorithm="nsga2", rule=""),
        make_row(algorithm="ga2o", rule=""),
        make_row(algorithm="chc", rule=""),
        make_row(algorithm="dhc", rule="7"),
    ])
    cols = [r.column for r in read_results(path)]
    assert cols == ["NSGA-II", "GA2O", "CHC", "R7"]


def test_unknown_columns_rejected(tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("experiment,extra\na,b\n")
    with pytest.raises(MissingColumns):
        read_results(bad)


def test_reordered_columns_rejected(tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text(
        "topology_id,experiment,algorithm,rule,mr,seed,solved,"
        "used_resources,used_slots,phase,perturbation\n"
    )
    with pytest.raises(MissingColumns):
        read_results(bad)
