import csv

import pytest

COLUMNS = (
    "experiment", "topology_id", "algorithm", "rule", "mr", "seed",
    "solved", "used_resources", "used_slots", "phase", "perturbation",
)


def make_row(**kw):
    row = {
        "experiment": "demo", "topology_id": "grid9", "algorithm": "dhc",
        "rule": "1", "mr": "0.04", "seed": "1", "solved": "true",
        "used_resources": "0.1", "used_slots": "0.5",
        "phase": "initial", "perturbation": "",
    }
    row.update({k: str(v) for k, v in kw.items()})
    return row


def write_results(path, rows):
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(COLUMNS), lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow(r)
    return path


@pytest.fixture
def results_file(tmp_path):
    def build(rows, name="results.csv"):
        return write_results(tmp_path / name, rows)

    return build
