"""Horizon trend scores, composite aggregation and sleeve strategy returns.

A trend score is the volatility-scaled h-day cumulative return, halved and
clamped to [-1, 1]. Scores are NaN (masked) until ``h + vol_window`` returns
have been observed.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np
import pandas as pd
from numpy.lib.stride_tricks import sliding_window_view

from .errors import (
    EmptyUniverse,
    HorizonMismatch,
    InvalidSpec,
    MisalignedDates,
    SeriesTooShort,
    ZeroVolatility,
)
from .market_data import TRADING_DAYS, ReturnSeries, Universe

DEFAULT_HORIZONS = (20, 60, 125, 250, 500)
DEFAULT_VOL_WINDOW = 60
DEFAULT_VOL_TARGET = 0.10
ZERO_VOL = 1e-12


@dataclass(frozen=True)
class HorizonSet:
    horizons: tuple[int, ...] = DEFAULT_HORIZONS

    def __post_init__(self):
        h = tuple(int(x) for x in self.horizons)
        if not h or any(x < 2 for x in h) or any(b <= a for a, b in zip(h, h[1:])):
            raise InvalidSpec(f"horizons must be strictly increasing and >= 2, got {h}")
        object.__setattr__(self, "horizons", h)

    def __iter__(self):
        return iter(self.horizons)

    def __len__(self):
        return len(self.horizons)

    def index(self, h: int) -> int:
        return self.horizons.index(h)


class Provenance(str, enum.Enum):
    EQUAL = "Equal"
    OPTIMIZED = "Optimized"
    DYNAMIC = "Dynamic"


@dataclass(frozen=True)
class HorizonWeights:
    asset_id: str
    horizons: tuple[int, ...]
    weights: tuple[float, ...]
    provenance: Provenance = Provenance.EQUAL

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if len(w) != len(self.horizons):
            raise HorizonMismatch("one weight per horizon required")
        if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-12:
            raise InvalidSpec(f"horizon weights for {self.asset_id} not on the simplex: {w}")
        object.__setattr__(self, "horizons", tuple(int(h) for h in self.horizons))
        object.__setattr__(self, "weights", tuple(float(x) for x in w))
        object.__setattr__(self, "provenance", Provenance(self.provenance))

    @classmethod
    def equal(cls, asset_id: str, horizons: Sequence[int], exclude: Sequence[int] = ()) -> "HorizonWeights":
        active = [h for h in horizons if h not in exclude]
        if not active:
            raise InvalidSpec("cannot exclude every horizon")
        w = [1.0 / len(active) if h in active else 0.0 for h in horizons]
        return cls(asset_id, tuple(horizons), tuple(w), Provenance.EQUAL)

    @classmethod
    def from_vector(cls, asset_id: str, horizons: Sequence[int], w, provenance=Provenance.OPTIMIZED) -> "HorizonWeights":
        """Clip round-off negatives and renormalise onto the simplex."""
        w = np.clip(np.asarray(w, dtype=float), 0.0, None)
        return cls(asset_id, tuple(horizons), tuple(w / w.sum()), provenance)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.weights)


@dataclass(frozen=True)
class TrendScorePanel:
    """Scores indexed (date, asset, horizon); dates are return dates."""

    dates: np.ndarray
    assets: tuple[str, ...]
    horizons: tuple[int, ...]
    scores: np.ndarray

    def __post_init__(self):
        if self.scores.shape != (len(self.dates), len(self.assets), len(self.horizons)):
            raise InvalidSpec("score array shape does not match panel axes")
        finite = self.scores[np.isfinite(self.scores)]
        if finite.size and np.max(np.abs(finite)) > 1.0:
            raise InvalidSpec("scores must lie in [-1, 1]")

    def horizon(self, h: int) -> np.ndarray:
        return self.scores[:, :, self.horizons.index(h)]

    def to_csv(self, path: str | Path) -> None:
        """Write ``date,asset,horizon,score``; masked scores are left empty."""
        with Path(path).open("w", encoding="utf-8") as fh:
            fh.write("date,asset,horizon,score\n")
            for t, d in enumerate(self.dates.tolist()):
                for i, a in enumerate(self.assets):
                    for k, h in enumerate(self.horizons):
                        v = self.scores[t, i, k]
                        fh.write(f"{d.isoformat()},{a},{h},{'' if np.isnan(v) else repr(float(v))}\n")


def trailing_vol(returns: np.ndarray, window: int = DEFAULT_VOL_WINDOW) -> np.ndarray:
    """Sample std (ddof=1) of the ``window`` returns ending at each date; NaN before."""
    r = np.asarray(returns, dtype=float)
    out = np.full(r.shape, np.nan)
    if r.shape[0] >= window:
        win = sliding_window_view(r, window, axis=0)
        out[window - 1:] = win.std(axis=-1, ddof=1)
    return out


def _trend_scores(r: np.ndarray, h: int, vol_window: int) -> np.ndarray:
    if r.shape[0] < h + vol_window:
        raise SeriesTooShort(f"need {h + vol_window} returns for horizon {h}, have {r.shape[0]}")
    growth = np.concatenate([np.zeros((1,) + r.shape[1:]), np.cumsum(np.log1p(r), axis=0)])
    cum = np.full(r.shape, np.nan)
    cum[h - 1:] = np.expm1(growth[h:] - growth[:-h])
    sigma = trailing_vol(r, vol_window)
    first = h + vol_window - 1
    cum[:first] = np.nan
    valid = ~np.isnan(cum)
    zero_vol = valid & (sigma < ZERO_VOL)
    if np.any(zero_vol & (np.abs(cum) > 0)):
        raise ZeroVolatility(f"zero trailing volatility with non-zero {h}-day return")
    z = np.zeros(r.shape)
    ok = valid & ~zero_vol
    z[ok] = cum[ok] / (sigma[ok] * np.sqrt(h))
    z[~valid] = np.nan
    return np.clip(z / 2.0, -1.0, 1.0)


def trend_score(r: ReturnSeries | np.ndarray, h: int, vol_window: int = DEFAULT_VOL_WINDOW) -> np.ndarray:
    """Score series aligned with the return dates of ``r``."""
    arr = r.returns if isinstance(r, ReturnSeries) else np.asarray(r, dtype=float)
    return _trend_scores(arr, int(h), int(vol_window))


def score_panel(
    universe: Universe,
    horizons: HorizonSet | Sequence[int] = DEFAULT_HORIZONS,
    vol_window: int = DEFAULT_VOL_WINDOW,
) -> TrendScorePanel:
    hs = tuple(horizons)
    r = universe.returns
    scores = np.stack([_trend_scores(r, h, vol_window) for h in hs], axis=-1)
    return TrendScorePanel(universe.return_dates, universe.ids, hs, scores)


def _weight_matrix(panel: TrendScorePanel, w) -> np.ndarray:
    n, k = len(panel.assets), len(panel.horizons)
    if isinstance(w, Mapping):
        rows = []
        for a in panel.assets:
            hw = w[a]
            if tuple(hw.horizons) != tuple(panel.horizons):
                raise HorizonMismatch(f"weights for {a} cover {hw.horizons}, panel has {panel.horizons}")
            rows.append(hw.as_array())
        return np.vstack(rows)
    arr = np.asarray(w, dtype=float)
    if arr.ndim == 1:
        arr = np.broadcast_to(arr, (n, arr.shape[0]))
    if arr.shape != (n, k):
        raise HorizonMismatch(f"weight array shape {arr.shape} does not match ({n}, {k})")
    return arr


def aggregate_scores(panel: TrendScorePanel, w) -> np.ndarray:
    """Composite score per (date, asset): x_{t,i} = sum_h w_{i,h} x_{t,i,h}.

    ``w`` is a mapping asset -> :class:`HorizonWeights`, or an array of shape
    (n_assets, n_horizons) / (n_horizons,). A composite is masked whenever any
    constituent score is masked, including zero-weight ones.
    """
    wm = _weight_matrix(panel, w)
    return np.einsum("tik,ik->ti", panel.scores, wm)


def _aligned(scores, returns) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(scores, (pd.Series, pd.DataFrame)) and isinstance(returns, (pd.Series, pd.DataFrame)):
        if not scores.index.equals(returns.index):
            raise MisalignedDates("score and return indices differ")
    s = np.asarray(scores, dtype=float)
    r = np.asarray(returns, dtype=float)
    if s.ndim == 1:
        s = s[:, None]
    if r.ndim == 1:
        r = r[:, None]
    if s.shape != r.shape:
        raise MisalignedDates(f"scores {s.shape} and returns {r.shape} are not aligned")
    if s.shape[1] == 0:
        raise EmptyUniverse("no assets")
    return s, r


def positions(
    scores,
    returns,
    vol_target: float = DEFAULT_VOL_TARGET,
    vol_window: int = DEFAULT_VOL_WINDOW,
) -> np.ndarray:
    """Volatility-targeted position held over each return date.

    position_t = score_{t-1} * vol_target / (sigma_{t-1} * sqrt(252)); the
    one-day lag means nothing dated t is used for the position earning r_t.
    """
    s, r = _aligned(scores, returns)
    sigma = trailing_vol(r, vol_window)
    lev = np.full(s.shape, np.nan)
    lev[1:] = s[:-1]
    sig = np.full(s.shape, np.nan)
    sig[1:] = sigma[:-1]
    out = np.full(s.shape, np.nan)
    ok = ~np.isnan(lev) & ~np.isnan(sig)
    pos_ok = ok & (sig >= ZERO_VOL)
    out[pos_ok] = lev[pos_ok] * vol_target / (sig[pos_ok] * np.sqrt(TRADING_DAYS))
    out[ok & (sig < ZERO_VOL)] = 0.0
    return out


def sleeve_returns(
    scores,
    returns,
    vol_target: float = DEFAULT_VOL_TARGET,
    vol_window: int = DEFAULT_VOL_WINDOW,
) -> np.ndarray:
    """Gross equal-risk-budget strategy return, (1/N) sum_i position_{t,i} r_{t,i}.

    NaN wherever any asset's position is undefined.
    """
    s, r = _aligned(scores, returns)
    pos = positions(s, r, vol_target, vol_window)
    return np.mean(pos * r, axis=1)


def per_asset_sleeves(
    panel: TrendScorePanel,
    returns: np.ndarray,
    vol_target: float = DEFAULT_VOL_TARGET,
    vol_window: int = DEFAULT_VOL_WINDOW,
) -> np.ndarray:
    """Single-asset single-horizon sleeve returns, shape (dates, assets, horizons)."""
    out = np.empty(panel.scores.shape)
    for k in range(len(panel.horizons)):
        out[:, :, k] = positions(panel.scores[:, :, k], returns, vol_target, vol_window) * returns
    return out
