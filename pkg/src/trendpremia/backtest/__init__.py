"""Walk-forward backtesting, costs, metrics, ablation and clustering."""
from .ablation import AblationResult, ablation_zscores, load_metric_tables
from .cluster import ClusterTree, Merge, horizon_cluster
from .costs import apply_costs, daily_cost
from .metrics import (
    MetricsRow,
    cobb_douglas_utility,
    compute_metrics,
    conditional_sharpe,
    max_drawdown,
    sharpe,
    to_monthly,
)
from .suite import metric_tables, results_table, run_ablation, run_variants, write_results_csv
from .walkforward import (
    BacktestConfig,
    BacktestReport,
    StrategyVariant,
    VariantKind,
    ablation_variants,
    prepare,
    run_walk_forward,
    trend_benchmark,
)

__all__ = [
    "AblationResult", "ablation_zscores", "load_metric_tables",
    "ClusterTree", "Merge", "horizon_cluster",
    "apply_costs", "daily_cost",
    "MetricsRow", "cobb_douglas_utility", "compute_metrics", "conditional_sharpe",
    "max_drawdown", "sharpe", "to_monthly",
    "metric_tables", "results_table", "run_ablation", "run_variants", "write_results_csv",
    "BacktestConfig", "BacktestReport", "StrategyVariant", "VariantKind",
    "ablation_variants", "prepare", "run_walk_forward", "trend_benchmark",
]
