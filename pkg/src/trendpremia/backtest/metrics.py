"""Performance statistics: Sharpe, drawdown, benchmark fit, crisis Sharpe, utility.

Conventions: zero risk-free rate, 252 trading days and 12 months per year,
arithmetic mean for annual return, geometric compounding for the wealth path.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np
import pandas as pd

from ..errors import (
    MisalignedDates,
    NoCrisisMonths,
    NonPositiveInput,
    AlphaOutOfRange,
    SeriesTooShort,
    TrendPremiaError,
    ZeroDrawdown,
    ZeroVariance,
    ZeroVol,
)
from ..market_data import TRADING_DAYS

MONTHS = 12
MIN_OBS = 40
CONVENTIONS = {
    "risk_free": 0.0,
    "trading_days": TRADING_DAYS,
    "months_per_year": MONTHS,
    "ann_return": "arithmetic daily mean x 252",
    "ann_vol": "daily sample std x sqrt(252)",
    "max_drawdown": "geometric wealth path",
}


@dataclass(frozen=True)
class MetricsRow:
    ann_return: float
    ann_vol: float
    sharpe: float | None
    max_drawdown: float
    ret_over_maxdd: float | None
    benchmark_corr: float | None
    conditional_sharpe: float | None = None
    n_obs: int = 0
    errors: tuple[str, ...] = ()

    def to_dict(self) -> dict:
        d = asdict(self)
        d["errors"] = list(self.errors)
        return d


def _clean(x) -> np.ndarray:
    return np.asarray(x, dtype=float).ravel()


def ann_return(r) -> float:
    return float(TRADING_DAYS * np.mean(_clean(r)))


def ann_vol(r, ddof: int = 1) -> float:
    return float(np.sqrt(TRADING_DAYS) * np.std(_clean(r), ddof=ddof))


def sharpe(r, ddof: int = 1) -> float:
    vol = ann_vol(r, ddof)
    if vol <= 1e-14 * max(1.0, float(np.max(np.abs(_clean(r))))):
        raise ZeroVol("sharpe undefined for a zero-volatility series")
    return ann_return(r) / vol


def max_drawdown(r) -> float:
    """Largest fractional decline of the compounded wealth path from its running peak.

    The path starts at wealth 1 before the first return.
    """
    wealth = np.concatenate([[1.0], np.cumprod(1.0 + _clean(r))])
    peak = np.maximum.accumulate(wealth)
    return float(np.max(1.0 - wealth / peak))


def ret_over_maxdd(r) -> float:
    dd = max_drawdown(r)
    if dd <= 0:
        raise ZeroDrawdown("return over max drawdown undefined for a path that never declines")
    return ann_return(r) / dd


def correlation(a, b) -> float:
    x, y = _clean(a), _clean(b)
    if x.shape != y.shape:
        raise MisalignedDates(f"series lengths differ: {x.shape[0]} vs {y.shape[0]}")
    xd, yd = x - x.mean(), y - y.mean()
    den = np.sqrt((xd @ xd) * (yd @ yd))
    if den <= 0:
        raise ZeroVariance("correlation undefined for a constant series")
    return float(np.clip((xd @ yd) / den, -1.0, 1.0))


def to_monthly(returns, dates) -> pd.Series:
    """Compound daily returns into calendar-month returns."""
    s = pd.Series(_clean(returns), index=pd.DatetimeIndex(dates))
    return (1.0 + s).groupby(s.index.to_period("M")).prod() - 1.0


def conditional_sharpe(strategy_monthly, equity_monthly, threshold: float = -0.03, ddof: int = 1) -> float:
    """Mean strategy return over months where the equity benchmark falls below
    ``threshold``, divided by the strategy's unconditional monthly std."""
    if isinstance(strategy_monthly, pd.Series) and isinstance(equity_monthly, pd.Series):
        if not strategy_monthly.index.equals(equity_monthly.index):
            raise MisalignedDates("monthly indices differ")
    s, e = _clean(strategy_monthly), _clean(equity_monthly)
    if s.shape != e.shape:
        raise MisalignedDates("monthly series lengths differ")
    crisis = e < threshold
    if not crisis.any():
        raise NoCrisisMonths(f"no month with benchmark return below {threshold}")
    vol = float(np.std(s, ddof=ddof))
    if vol <= 0:
        raise ZeroVol("strategy monthly volatility is zero")
    return float(np.mean(s[crisis]) / vol)


def cobb_douglas_utility(ret_over_maxdd: float, corr: float, alpha: float = 0.8) -> float:
    """U = x^alpha * c^(1 - alpha)."""
    if not 0 <= alpha <= 1:
        raise AlphaOutOfRange(f"alpha={alpha} must lie in [0, 1]")
    if not (ret_over_maxdd > 0 and corr > 0):
        raise NonPositiveInput(f"utility needs positive inputs, got ({ret_over_maxdd}, {corr})")
    return ret_over_maxdd ** alpha * corr ** (1.0 - alpha)


def _guard(fn, errors: list[str]):
    try:
        return fn()
    except TrendPremiaError as exc:
        errors.append(exc.code)
        return None


def compute_metrics(
    strategy,
    benchmark=None,
    ddof: int = 1,
    strict: bool = True,
    crisis: tuple[pd.Series, pd.Series] | None = None,
) -> MetricsRow:
    """Metrics row for one return series.

    With ``strict`` the undefined-ratio errors propagate; otherwise the field
    is left ``None`` and the error code is recorded in ``errors``.
    ``crisis`` optionally holds (strategy_monthly, equity_monthly).
    """
    r = _clean(strategy)
    if len(r) < MIN_OBS:
        raise SeriesTooShort(f"metrics need >= {MIN_OBS} observations, have {len(r)}")
    if strict:
        sr = sharpe(r, ddof)
        rmdd = ret_over_maxdd(r)
        corr = correlation(r, benchmark) if benchmark is not None else None
        cs = conditional_sharpe(*crisis, ddof=ddof) if crisis is not None else None
        errs: tuple[str, ...] = ()
    else:
        e: list[str] = []
        sr = _guard(lambda: sharpe(r, ddof), e)
        rmdd = _guard(lambda: ret_over_maxdd(r), e)
        corr = _guard(lambda: correlation(r, benchmark), e) if benchmark is not None else None
        cs = _guard(lambda: conditional_sharpe(*crisis, ddof=ddof), e) if crisis is not None else None
        errs = tuple(e)
    return MetricsRow(ann_return(r), ann_vol(r, ddof), sr, max_drawdown(r), rmdd, corr, cs, len(r), errs)
