"""Multi-variant runs: ablation suites and report tables."""
from __future__ import annotations

from pathlib import Path
from typing import Sequence

import pandas as pd

from ..dynamic_weights import RollingConfig
from ..market_data import Universe
from .ablation import METRICS, AblationResult, ablation_zscores
from .walkforward import (
    BacktestConfig,
    BacktestReport,
    StrategyVariant,
    ablation_variants,
    prepare,
    run_walk_forward,
    trend_benchmark,
)

_FIELD = {"sharpe": "sharpe", "ret_over_maxdd": "ret_over_maxdd", "corr": "benchmark_corr"}


def run_variants(
    universe: Universe,
    variants: Sequence[StrategyVariant | str],
    rolling: RollingConfig = RollingConfig(),
    benchmark=None,
    config: BacktestConfig = BacktestConfig(),
    equity_benchmark=None,
) -> list[BacktestReport]:
    """Run several variants on one shared score/sleeve preparation."""
    prep = prepare(universe, rolling, config)
    if benchmark is None:
        benchmark = trend_benchmark(universe, config)
    return [
        run_walk_forward(universe, v, rolling, benchmark, config, equity_benchmark, prepared=prep)
        for v in variants
    ]


def metric_tables(reports: Sequence[BacktestReport], labels: Sequence[str] | None = None) -> dict[str, pd.DataFrame]:
    """Per-period metric frames (rows periods, columns variants), full sample excluded."""
    labels = list(labels) if labels is not None else [r.variant for r in reports]
    periods = [lab for lab, _, _ in reports[0].periods]
    out = {}
    for m in METRICS:
        out[m] = pd.DataFrame(
            [[getattr(r.period_metrics[p], _FIELD[m]) for r in reports] for p in periods],
            index=periods, columns=labels, dtype=float,
        )
    return out


def run_ablation(
    universe: Universe,
    rolling: RollingConfig = RollingConfig(),
    benchmark=None,
    config: BacktestConfig = BacktestConfig(),
) -> tuple[list[BacktestReport], AblationResult]:
    """All-horizon variant plus one leave-one-out variant per horizon, ranked by Z-score."""
    variants = ablation_variants(config.horizons)
    reports = run_variants(universe, variants, rolling, benchmark, config)
    tables = metric_tables(reports, [v.label for v in variants])
    return reports, ablation_zscores(tables)


def results_table(reports: Sequence[BacktestReport]) -> pd.DataFrame:
    """Long table ``period,variant,sharpe,ret_over_maxdd,corr,utility`` including the full sample."""
    rows = []
    for r in reports:
        items = list(r.period_metrics.items()) + [("full", r.full)]
        for lab, m in items:
            rows.append({"period": lab, "variant": r.variant, "sharpe": m.sharpe,
                         "ret_over_maxdd": m.ret_over_maxdd, "corr": m.benchmark_corr,
                         "utility": r.utility.get(lab)})
    return pd.DataFrame(rows, columns=["period", "variant", "sharpe", "ret_over_maxdd", "corr", "utility"])


def write_results_csv(reports: Sequence[BacktestReport], path: str | Path) -> None:
    results_table(reports).to_csv(path, index=False, float_format="%.10g")
