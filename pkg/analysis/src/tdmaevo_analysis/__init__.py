"""Post-hoc analysis over tdmaevo results files."""

from .io import MissingColumns, ResultRow, read_results
from .stats import rank_sum_p, wilcoxon_pairwise
from .tables import best_of_mr, format_table3, table3

__version__ = "0.1.0"
