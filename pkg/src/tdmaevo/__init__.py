"""Deterministic TDMA MAC simulation and schedule optimization."""

from .dhc import DhcConfig, DhcRunResult, RuleTable, local_fitness, mutate, rule_table, run_dhc, seven_rules
from .optimizers import (
    AnnealSchedule,
    ParetoResult,
    SearchResult,
    crowding_distance,
    f1,
    f2,
    fast_non_dominated_sort,
    run_chc,
    run_chc2o,
    run_csa,
    run_csa2o,
    run_ga2o,
    run_nsga2,
)
from .simcore import EvalResult, delivery_rate, evaluate_network, used_slot_ratio
from .topology import (
    HopTable,
    Topology,
    TopologySpec,
    build_grid,
    build_random,
    hops_to_target,
    retry_connected,
)

__version__ = "0.1.0"
