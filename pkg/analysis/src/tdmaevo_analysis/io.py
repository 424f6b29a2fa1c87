"""Reading and validating results files.

The results schema is the contract with the simulation package: eleven
columns in fixed order.  Files with unknown or missing columns are
rejected outright rather than guessed at.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

RESULT_COLUMNS = (
    "experiment", "topology_id", "algorithm", "rule", "mr", "seed",
    "solved", "used_resources", "used_slots", "phase", "perturbation",
)

#: display label per algorithm column; dhc expands to R<rule>
ALGORITHM_LABELS = {
    "nsga2": "NSGA-II",
    "ga2o": "GA2O",
    "chc2o": "CHC2O",
    "csa2o": "CSA2O",
    "chc": "CHC",
    "csa": "CSA",
}
COLUMN_ORDER = ("NSGA-II", "GA2O", "CHC2O", "CSA2O", "CHC", "CSA",
                "R1", "R2", "R3", "R4", "R5", "R6", "R7")


class MissingColumns(ValueError):
    """Results file header does not match the documented schema."""


@dataclass
class ResultRow:
    experiment: str
    topology_id: str
    algorithm: str
    rule: str
    mr: float
    seed: str
    solved: bool
    used_resources: float
    used_slots: float
    phase: str
    perturbation: str

    @property
    def column(self) -> str:
        """Table column this run belongs to (R1..R7 for the distributed runs)."""
        if self.algorithm == "dhc":
            return f"R{self.rule}"
        return ALGORITHM_LABELS.get(self.algorithm, self.algorithm.upper())


def read_results(path) -> list[ResultRow]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != RESULT_COLUMNS:
            raise MissingColumns(
                f"expected columns {RESULT_COLUMNS}, found {tuple(reader.fieldnames or ())}"
            )
        rows = []
        for raw in reader:
            rows.append(
                ResultRow(
                    experiment=raw["experiment"],
                    topology_id=raw["topology_id"],
                    algorithm=raw["algorithm"],
                    rule=raw["rule"],
                    mr=float(raw["mr"]),
                    seed=raw["seed"],
                    solved=raw["solved"] == "true",
                    used_resources=float(raw["used_resources"]),
                    used_slots=float(raw["used_slots"]),
                    phase=raw["phase"],
                    perturbation=raw["perturbation"],
                )
            )
    return rows


def initial_rows(rows: list[ResultRow]) -> list[ResultRow]:
    return [r for r in rows if r.phase == "initial"]


def cells(rows: list[ResultRow]) -> dict[tuple[str, str], dict[float, list[ResultRow]]]:
    """(experiment, column) -> mr -> runs."""
    out: dict[tuple[str, str], dict[float, list[ResultRow]]] = {}
    for r in rows:
        out.setdefault((r.experiment, r.column), {}).setdefault(r.mr, []).append(r)
    return out


def write_csv(path, columns, rows: list[dict]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(columns), lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow(r)
