"""Walk-forward backtest of horizon-weighting variants.

For every rolling window the variant's horizon weights are fixed from the
training range only, composite scores are turned into volatility-targeted
positions for the test range, asset exposures are decoded against the
benchmark with a causal filter, and costs are charged on the final book.
"""
from __future__ import annotations

import enum
import logging
import re
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import pandas as pd

from ..decoder import apply_exposure_controls, fit_noise_params, kalman_filter
from ..dynamic_weights import (
    RollingConfig,
    SleevePanel,
    Window,
    dynamic_horizon_weights,
    optimized_weights,
    walk_forward_windows,
)
from ..errors import InsufficientHistory, InvalidSpec, MisalignedDates, UnknownVariant
from ..market_data import TRADING_DAYS, ReturnSeries, Universe
from ..signals import (
    DEFAULT_HORIZONS,
    DEFAULT_VOL_TARGET,
    DEFAULT_VOL_WINDOW,
    ZERO_VOL,
    HorizonWeights,
    Provenance,
    TrendScorePanel,
    per_asset_sleeves,
    score_panel,
    sleeve_returns,
    trailing_vol,
)
from .costs import DEFAULT_MGMT_FEE_BPS, apply_costs
from .metrics import MIN_OBS, MetricsRow, compute_metrics, cobb_douglas_utility, to_monthly

logger = logging.getLogger(__name__)


class VariantKind(str, enum.Enum):
    PURE = "PureTrend"
    OPTIMIZED = "OptimizedTrend"
    DYNAMIC = "DynamicTrend"
    LEAVE_ONE_OUT = "LeaveOneOut"
    SINGLE = "SingleHorizon"


_ALIASES = {"all": "PureTrend", "allhorizons": "PureTrend", "pure": "PureTrend",
            "optimized": "OptimizedTrend", "dynamic": "DynamicTrend"}


@dataclass(frozen=True)
class StrategyVariant:
    kind: VariantKind
    horizon: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "kind", VariantKind(self.kind))
        needs = self.kind in (VariantKind.LEAVE_ONE_OUT, VariantKind.SINGLE)
        if needs != (self.horizon is not None):
            raise UnknownVariant(f"{self.kind.value} {'needs' if needs else 'takes no'} horizon")

    @property
    def name(self) -> str:
        return self.kind.value if self.horizon is None else f"{self.kind.value}({self.horizon})"

    @property
    def label(self) -> str:
        """Short column label used in ablation tables."""
        if self.kind is VariantKind.PURE:
            return "All"
        if self.kind is VariantKind.LEAVE_ONE_OUT:
            return f"No{self.horizon}"
        return self.name

    @classmethod
    def parse(cls, text: str) -> "StrategyVariant":
        """Accepts ``PureTrend``, ``LeaveOneOut(125)``, ``No125``, ``SingleHorizon(20)`` and aliases."""
        s = text.strip()
        m = re.fullmatch(r"(LeaveOneOut|SingleHorizon)\((\d+)\)", s)
        if m:
            return cls(VariantKind(m.group(1)), int(m.group(2)))
        m = re.fullmatch(r"No\s*(\d+)", s, flags=re.IGNORECASE)
        if m:
            return cls(VariantKind.LEAVE_ONE_OUT, int(m.group(1)))
        key = _ALIASES.get(s.lower().replace(" ", "").replace("_", ""), s)
        try:
            return cls(VariantKind(key))
        except ValueError:
            raise UnknownVariant(f"unknown strategy variant {text!r}", variant=text) from None

    def check(self, horizons: Sequence[int]) -> None:
        if self.horizon is not None and self.horizon not in horizons:
            raise UnknownVariant(f"{self.name}: horizon {self.horizon} not in {tuple(horizons)}")
        if self.kind is VariantKind.LEAVE_ONE_OUT and len(horizons) < 2:
            raise UnknownVariant("leave-one-out needs at least two horizons")


def ablation_variants(horizons: Sequence[int] = DEFAULT_HORIZONS) -> list[StrategyVariant]:
    return [StrategyVariant(VariantKind.PURE)] + [
        StrategyVariant(VariantKind.LEAVE_ONE_OUT, h) for h in horizons
    ]


@dataclass(frozen=True)
class BacktestConfig:
    horizons: tuple[int, ...] = DEFAULT_HORIZONS
    vol_window: int = DEFAULT_VOL_WINDOW
    vol_target: float = DEFAULT_VOL_TARGET
    decode: bool = True
    snr_ratio: float = 2500.0
    sparsity_eps: float = 0.0
    max_turnover_per_step: float = float("inf")
    costs: bool = True
    mgmt_fee_bps_pa: float = DEFAULT_MGMT_FEE_BPS
    period_years: int = 5
    alpha: float = 0.8
    ddof: int = 1

    def __post_init__(self):
        object.__setattr__(self, "horizons", tuple(int(h) for h in self.horizons))
        if self.vol_target <= 0 or self.vol_window < 2:
            raise InvalidSpec("vol_target must be > 0 and vol_window >= 2")
        if self.period_years < 1:
            raise InvalidSpec("period_years must be >= 1")

    def to_dict(self) -> dict:
        d = {k: getattr(self, k) for k in self.__dataclass_fields__}
        d["horizons"] = list(self.horizons)
        if not np.isfinite(d["max_turnover_per_step"]):
            d["max_turnover_per_step"] = None
        return d


@dataclass
class BacktestReport:
    variant: str
    dates: np.ndarray
    gross: np.ndarray
    net: np.ndarray
    turnover: np.ndarray
    benchmark: np.ndarray
    periods: list[tuple[str, int, int]]
    period_metrics: dict[str, MetricsRow]
    full: MetricsRow
    utility: dict[str, float | None]
    window_weights: list[tuple[str, dict[str, tuple[float, ...]]]] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "variant": self.variant,
            "start": str(self.dates[0]),
            "end": str(self.dates[-1]),
            "n_obs": int(len(self.net)),
            "periods": [
                {"label": lab, "start": str(self.dates[a]), "end": str(self.dates[b - 1])}
                for lab, a, b in self.periods
            ],
            "metrics": {lab: row.to_dict() for lab, row in self.period_metrics.items()},
            "full": self.full.to_dict(),
            "utility": self.utility,
            "mean_daily_turnover": float(np.mean(self.turnover)),
            "window_weights": [{"test_start": s, "weights": {a: list(w) for a, w in ws.items()}}
                               for s, ws in self.window_weights],
        }


# -- inputs ---------------------------------------------------------------------


def _benchmark_array(benchmark, dates: np.ndarray) -> np.ndarray:
    if isinstance(benchmark, ReturnSeries):
        benchmark = benchmark.to_series()
    if isinstance(benchmark, pd.Series):
        idx = pd.DatetimeIndex(benchmark.index)
        want = pd.DatetimeIndex(dates)
        if not idx.equals(want):
            if not want.isin(idx).all():
                raise MisalignedDates("benchmark does not cover every return date")
            benchmark = pd.Series(benchmark.to_numpy(), index=idx).reindex(want)
        return benchmark.to_numpy(dtype=float)
    b = np.asarray(benchmark, dtype=float).ravel()
    if b.shape[0] != len(dates):
        raise MisalignedDates(f"benchmark has {b.shape[0]} rows, universe has {len(dates)} return dates")
    return b


def trend_benchmark(universe: Universe, config: BacktestConfig = BacktestConfig()) -> np.ndarray:
    """Gross equal-horizon-weight trend sleeve, used as a synthetic CTA benchmark."""
    panel = score_panel(universe, config.horizons, config.vol_window)
    comp = np.mean(panel.scores, axis=-1)
    return sleeve_returns(comp, universe.returns, config.vol_target, config.vol_window)


@dataclass
class _Prepared:
    universe: Universe
    panel: TrendScorePanel
    sleeves: SleevePanel
    windows: list[Window]
    sigma: np.ndarray


def prepare(universe: Universe, rolling: RollingConfig, config: BacktestConfig) -> _Prepared:
    """Scores, sleeves and window calendar shared by every variant."""
    panel = score_panel(universe, config.horizons, config.vol_window)
    r = universe.returns
    sl = SleevePanel(panel.dates, panel.assets, panel.horizons,
                     per_asset_sleeves(panel, r, config.vol_target, config.vol_window))
    windows = walk_forward_windows(panel.dates, rolling, sl.first_valid)
    return _Prepared(universe, panel, sl, windows, trailing_vol(r, config.vol_window))


def variant_weights(
    prep: _Prepared, variant: StrategyVariant, rolling: RollingConfig
) -> list[dict[str, HorizonWeights]]:
    """Horizon weights per window, each derived only from that window's training range."""
    hs, assets = prep.panel.horizons, prep.panel.assets
    variant.check(hs)
    k = variant.kind
    if k is VariantKind.DYNAMIC:
        res = dynamic_horizon_weights(prep.sleeves, rolling, prep.windows)
        return [w.weights for w in res.windows]
    out = []
    for win in prep.windows:
        if k is VariantKind.PURE:
            ws = {a: HorizonWeights.equal(a, hs) for a in assets}
        elif k is VariantKind.LEAVE_ONE_OUT:
            ws = {a: HorizonWeights.equal(a, hs, exclude=(variant.horizon,)) for a in assets}
        elif k is VariantKind.SINGLE:
            ws = {a: HorizonWeights.equal(a, hs, exclude=[h for h in hs if h != variant.horizon]) for a in assets}
        elif k is VariantKind.OPTIMIZED:
            ws = {
                a: HorizonWeights.from_vector(a, hs, optimized_weights(prep.sleeves.returns[:, i, :], win.train, rolling),
                                              Provenance.OPTIMIZED)
                for i, a in enumerate(assets)
            }
        else:  # pragma: no cover - enum is exhaustive
            raise UnknownVariant(str(k))
        out.append(ws)
    return out


def _positions(prep: _Prepared, weights: list[dict[str, HorizonWeights]], vol_target: float) -> np.ndarray:
    """Positions from the first training date to the end; rows before that are NaN.

    Position at t uses composite scores and volatility at t-1. Training rows of
    the first window use that window's weights (decoder warm-up only).
    """
    scores = prep.panel.scores
    n_t, n_a, _ = scores.shape
    comp = np.full((n_t, n_a), np.nan)
    spans = [(prep.windows[0].train_start, prep.windows[0].test_end)] + [
        (w.test_start, w.test_end) for w in prep.windows[1:]
    ]
    for (a, b), ws in zip(spans, weights):
        wm = np.vstack([ws[x].as_array() for x in prep.panel.assets])
        lo = max(a - 1, 0)
        comp[lo + 1:b] = np.einsum("tik,ik->ti", scores[lo:b - 1], wm)
    sig = np.full((n_t, n_a), np.nan)
    sig[1:] = prep.sigma[:-1]
    pos = np.full((n_t, n_a), np.nan)
    ok = np.isfinite(comp) & np.isfinite(sig)
    big = ok & (sig >= ZERO_VOL)
    pos[big] = comp[big] * vol_target / (sig[big] * np.sqrt(TRADING_DAYS))
    pos[ok & ~big] = 0.0
    return pos


def _periods(dates: np.ndarray, years: int) -> list[tuple[str, int, int]]:
    """Consecutive ``years``-long blocks from the first date; short tails are dropped."""
    idx = pd.DatetimeIndex(dates)
    out, start = [], idx[0]
    while start <= idx[-1]:
        end = start + pd.DateOffset(years=years)
        a, b = int(idx.searchsorted(start)), int(idx.searchsorted(end))
        if b - a >= MIN_OBS:
            out.append((f"{idx[a].year}-{idx[b - 1].year}", a, b))
        start = end
    return out


def run_walk_forward(
    universe: Universe,
    variant: StrategyVariant | str,
    rolling: RollingConfig = RollingConfig(),
    benchmark=None,
    config: BacktestConfig = BacktestConfig(),
    equity_benchmark=None,
    prepared: _Prepared | None = None,
) -> BacktestReport:
    """Out-of-sample net return path and metrics for one variant.

    ``benchmark`` is a return series on the universe's return dates (default:
    :func:`trend_benchmark`); ``equity_benchmark`` enables the crisis Sharpe.
    """
    if isinstance(variant, str):
        variant = StrategyVariant.parse(variant)
    variant.check(config.horizons)
    prep = prepared if prepared is not None else prepare(universe, rolling, config)
    dates = prep.panel.dates
    r = universe.returns
    bench = trend_benchmark(universe, config) if benchmark is None else _benchmark_array(benchmark, dates)

    weights = variant_weights(prep, variant, rolling)
    pos = _positions(prep, weights, config.vol_target)
    n_a = r.shape[1]
    t0, t_oos = prep.windows[0].train_start, prep.windows[0].test_start
    t_end = prep.windows[-1].test_end

    if config.decode:
        z = pos[t0:t_end] * r[t0:t_end]
        y = bench[t0:t_end]
        fit_rows = slice(0, t_oos - t0)
        params = fit_noise_params(y[fit_rows], z[fit_rows], config.snr_ratio)
        path = kalman_filter(y, z, params, dates[t0:t_end], prep.panel.assets)
        path = apply_exposure_controls(path, config.sparsity_eps, config.max_turnover_per_step)
        expo = np.full((t_end - t0, n_a), np.nan)
        expo[1:] = path.means[:-1]
        book = expo * pos[t0:t_end]
    else:
        book = pos[t0:t_end] / n_a
    book = book[t_oos - t0:]
    if not np.all(np.isfinite(book)):
        raise InsufficientHistory("undefined positions inside the out-of-sample range")
    rr = r[t_oos:t_end]
    gross = np.sum(book * rr, axis=1)
    prev = np.vstack([np.zeros((1, n_a)), book[:-1]])
    turnover = np.abs(book - prev)
    if config.costs:
        net = apply_costs(gross, turnover, book, universe.instruments, config.mgmt_fee_bps_pa)
    else:
        net = gross.copy()
    oos_dates = dates[t_oos:t_end]
    b_oos = bench[t_oos:t_end]

    eq = None if equity_benchmark is None else _benchmark_array(equity_benchmark, dates)[t_oos:t_end]

    def row(a: int, b: int) -> MetricsRow:
        crisis = None
        if eq is not None:
            crisis = (to_monthly(net[a:b], oos_dates[a:b]), to_monthly(eq[a:b], oos_dates[a:b]))
        return compute_metrics(net[a:b], b_oos[a:b], config.ddof, strict=False, crisis=crisis)

    periods = _periods(oos_dates, config.period_years)
    period_metrics = {lab: row(a, b) for lab, a, b in periods}
    full = row(0, len(net))
    utility = {}
    for lab, m in list(period_metrics.items()) + [("full", full)]:
        x, c = m.ret_over_maxdd, m.benchmark_corr
        utility[lab] = cobb_douglas_utility(x, c, config.alpha) if x and c and x > 0 and c > 0 else None
    ww = [(str(dates[w.test_start]), {a: hw.weights for a, hw in ws.items()}) for w, ws in zip(prep.windows, weights)]
    return BacktestReport(variant.name, oos_dates, gross, net, turnover.sum(axis=1), b_oos,
                          periods, period_metrics, full, utility, ww)
