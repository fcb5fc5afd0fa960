"""Cross-strategy Z-score ranking of leave-one-out horizon variants."""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np
import pandas as pd

from ..errors import DataError, InsufficientData, MalformedRow, MissingFile

METRICS = ("sharpe", "ret_over_maxdd", "corr")


@dataclass(frozen=True)
class AblationResult:
    """``table`` is indexed by strategy, sorted by ``overall`` descending.

    ``cell_z`` holds the standardized value for every (metric, period,
    strategy); ``degenerate`` lists (metric, period) cells whose
    cross-strategy spread was zero (or had a missing value) and contributed 0.
    """

    table: pd.DataFrame
    cell_z: pd.DataFrame
    degenerate: tuple[tuple[str, str], ...]

    @property
    def ranking(self) -> list[str]:
        return list(self.table.index)

    def to_csv(self, path: str | Path) -> None:
        self.table.to_csv(path, index_label="variant", float_format="%.6f")


def _standardize(row: pd.Series, ddof: int) -> pd.Series | None:
    if row.isna().any():
        return None
    sd = float(row.std(ddof=ddof))
    if not sd > 1e-15 * max(1.0, float(row.abs().max())):
        return None
    return (row - row.mean()) / sd


def ablation_zscores(
    tables: Mapping[str, pd.DataFrame],
    periods: Sequence[str] | None = None,
    ddof: int = 0,
    metrics: Sequence[str] = METRICS,
) -> AblationResult:
    """Rank strategies by the average of per-metric average Z-scores.

    ``tables`` maps metric name to a frame indexed by period with one column
    per strategy. Each (period, metric) row is standardized across strategies
    (population std by default); per-metric scores average over periods and
    ``overall`` is the mean of the per-metric scores. Ties in ``overall`` keep
    the column order of the input.
    """
    missing = [m for m in metrics if m not in tables]
    if missing:
        raise InsufficientData(f"missing metric tables: {missing}")
    strategies = list(tables[metrics[0]].columns)
    if len(strategies) < 2:
        raise InsufficientData("need at least two strategies")
    z_rows, degenerate, per_metric = [], [], {}
    for m in metrics:
        t = tables[m]
        if list(t.columns) != strategies:
            raise DataError(f"metric table {m} has different strategies")
        rows = list(t.index) if periods is None else list(periods)
        if not rows:
            raise InsufficientData("need at least one period")
        acc = pd.Series(0.0, index=strategies)
        for p in rows:
            z = _standardize(t.loc[p].astype(float), ddof)
            if z is None:
                degenerate.append((m, str(p)))
                z = pd.Series(0.0, index=strategies)
            acc += z
            z_rows.append(pd.Series(z.values, index=strategies, name=(m, str(p))))
        per_metric[m] = acc / len(rows)
    table = pd.DataFrame(per_metric)
    table["overall"] = table[list(metrics)].mean(axis=1)
    order = sorted(range(len(strategies)), key=lambda i: (-table["overall"].iloc[i], i))
    table = table.iloc[order]
    cell_z = pd.DataFrame(z_rows)
    cell_z.index = pd.MultiIndex.from_tuples(cell_z.index, names=["metric", "period"])
    return AblationResult(table, cell_z, tuple(degenerate))


def load_metric_tables(path: str | Path) -> dict[str, pd.DataFrame]:
    """Read a long-form ``period,variant,metric,value`` file into metric tables.

    Period and variant order follow first appearance in the file.
    """
    p = Path(path)
    if not p.is_file():
        raise MissingFile(f"metric table file not found: {p}", path=str(p))
    records: dict[str, dict[str, dict[str, float]]] = {}
    periods: list[str] = []
    variants: list[str] = []
    with p.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["period", "variant", "metric", "value"]:
            raise MalformedRow("expected header period,variant,metric,value", line=1)
        for line, row in enumerate(reader, start=2):
            if len(row) != 4:
                raise MalformedRow(f"line {line}: expected 4 fields", line=line)
            period, variant, metric, value = row
            try:
                v = float(value)
            except ValueError:
                raise MalformedRow(f"line {line}: bad value {value!r}", line=line) from None
            if period not in periods:
                periods.append(period)
            if variant not in variants:
                variants.append(variant)
            records.setdefault(metric, {}).setdefault(period, {})[variant] = v
    return {
        m: pd.DataFrame([[rows.get(pr, {}).get(v, np.nan) for v in variants] for pr in periods],
                        index=periods, columns=variants)
        for m, rows in records.items()
    }
