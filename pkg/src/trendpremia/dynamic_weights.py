"""Rolling estimation of per-asset horizon weights with a persistence filter.

For every rolling training window the per-asset horizon sleeves are split
into disjoint calendar subwindows; each subwindow gets long-only
minimum-variance weights. Each horizon's weight path is scored on three
stability diagnostics against cross-sectional percentile thresholds. Assets
with enough stable paths receive EMA-smoothed weights for the following test
window; the rest fall back to equal weights.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
import pandas as pd

from .allocator import min_variance_simplex
from .errors import (
    AlphaOutOfRange,
    ConfigError,
    EmptySeries,
    InsufficientData,
    InsufficientHistory,
    PopulationTooSmall,
    SeriesTooShort,
)
from .signals import HorizonWeights, Provenance

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class RollingConfig:
    train_years: int = 8
    subwindow_months: int = 6
    test_months: int = 6
    roll_step_months: int = 6
    std_percentile: float = 40.0
    autocorr_percentile: float = 60.0
    step_percentile: float = 40.0
    min_criteria: int = 2
    min_stable_series: int = 2
    ema_alpha: float = 0.3
    shrinkage: float = 0.2
    min_subwindow_obs: int = 40
    # (std, autocorr, max_step); replaces the percentile thresholds when set
    fixed_thresholds: tuple[float, float, float] | None = None
    # number of trailing windows pooled into the percentile population
    population_windows: int = 1

    def __post_init__(self):
        for name in ("std_percentile", "autocorr_percentile", "step_percentile"):
            v = getattr(self, name)
            if not 0 < v < 100:
                raise ConfigError(f"{name}={v} must lie in (0, 100)")
        if not 0 < self.ema_alpha <= 1:
            raise AlphaOutOfRange(f"ema_alpha={self.ema_alpha} must lie in (0, 1]")
        if not 0 <= self.min_criteria <= 3:
            raise ConfigError("min_criteria must be between 0 and 3")
        if self.min_stable_series < 0:
            raise ConfigError("min_stable_series must be non-negative")
        if min(self.train_years, self.subwindow_months, self.test_months, self.roll_step_months) <= 0:
            raise ConfigError("window lengths must be positive")
        if (12 * self.train_years) % self.subwindow_months:
            raise ConfigError("training window must split into whole subwindows")
        if not 0 <= self.shrinkage <= 1:
            raise ConfigError("shrinkage must lie in [0, 1]")
        if self.population_windows < 1:
            raise ConfigError("population_windows must be >= 1")
        if self.fixed_thresholds is not None:
            object.__setattr__(self, "fixed_thresholds", tuple(float(x) for x in self.fixed_thresholds))

    @property
    def n_subwindows(self) -> int:
        return 12 * self.train_years // self.subwindow_months

    def validate(self, n_horizons: int) -> None:
        if self.min_stable_series > n_horizons:
            raise ConfigError(f"min_stable_series={self.min_stable_series} exceeds horizon count {n_horizons}")

    def to_dict(self) -> dict:
        d = {k: getattr(self, k) for k in self.__dataclass_fields__}
        if d["fixed_thresholds"] is not None:
            d["fixed_thresholds"] = list(d["fixed_thresholds"])
        return d


# -- calendar -------------------------------------------------------------------


@dataclass(frozen=True)
class Window:
    """Training range [train_start, test_start) and test range [test_start, test_end),
    as positions into the return-date axis, plus subwindow boundaries."""

    train_start: int
    test_start: int
    test_end: int
    subwindows: tuple[tuple[int, int], ...]
    label: str

    @property
    def train(self) -> slice:
        return slice(self.train_start, self.test_start)

    @property
    def test(self) -> slice:
        return slice(self.test_start, self.test_end)


def walk_forward_windows(dates: np.ndarray, config: RollingConfig, first_valid: int = 0) -> list[Window]:
    """Rolling train/test windows over ``dates[first_valid:]``.

    Training windows have fixed calendar length; the test start advances by
    ``roll_step_months``. A truncated final test window is kept.
    """
    idx = pd.DatetimeIndex(dates)
    if first_valid >= len(idx):
        raise InsufficientHistory("no valid observations")
    start = idx[first_valid]
    test_start = start + pd.DateOffset(years=config.train_years)
    last = idx[-1]
    windows = []
    while test_start <= last:
        train_start = test_start - pd.DateOffset(years=config.train_years)
        test_end = test_start + pd.DateOffset(months=config.test_months)
        a = int(idx.searchsorted(train_start))
        b = int(idx.searchsorted(test_start))
        c = int(idx.searchsorted(test_end))
        if c <= b:
            break
        subs = []
        for k in range(config.n_subwindows):
            s0 = train_start + pd.DateOffset(months=k * config.subwindow_months)
            s1 = train_start + pd.DateOffset(months=(k + 1) * config.subwindow_months)
            subs.append((int(idx.searchsorted(s0)), int(idx.searchsorted(s1))))
        windows.append(Window(max(a, first_valid), b, c, tuple(subs), test_start.strftime("%Y-%m-%d")))
        test_start = test_start + pd.DateOffset(months=config.roll_step_months)
    if not windows:
        raise InsufficientHistory(
            f"history from {start.date()} to {last.date()} shorter than one {config.train_years}-year training window"
        )
    return windows


# -- per-subwindow optimisation ------------------------------------------------------


def shrunk_covariance(x: np.ndarray, intensity: float = 0.2) -> np.ndarray:
    """Sample covariance shrunk toward its own diagonal."""
    c = np.cov(x, rowvar=False, ddof=1)
    c = np.atleast_2d(c)
    return (1.0 - intensity) * c + intensity * np.diag(np.diag(c))


def _optimise_block(x: np.ndarray, intensity: float) -> tuple[np.ndarray, bool]:
    """Long-only min-variance weights for one block; (weights, degenerate)."""
    h = x.shape[1]
    if not np.all(np.isfinite(x)):
        return np.full(h, 1.0 / h), True
    c = shrunk_covariance(x, intensity)
    if not np.all(np.isfinite(c)) or np.trace(c) <= 1e-300:
        return np.full(h, 1.0 / h), True
    return min_variance_simplex(c).weights, False


def subwindow_weights(
    sleeves: np.ndarray,
    subwindows: Sequence[tuple[int, int]],
    config: RollingConfig = RollingConfig(),
) -> tuple[np.ndarray, np.ndarray]:
    """Weight vector per subwindow for one asset.

    ``sleeves`` has shape (dates, horizons); ``subwindows`` are index ranges.
    Returns (weights of shape (n_sub, horizons), degenerate flags). A
    degenerate subwindow covariance yields equal weights and is flagged.
    """
    if len(subwindows) < 2:
        raise InsufficientData("need at least two subwindows")
    out, flags = [], []
    for a, b in subwindows:
        if b - a < config.min_subwindow_obs:
            raise InsufficientData(
                f"subwindow [{a}, {b}) has {b - a} observations, need {config.min_subwindow_obs}"
            )
        w, degenerate = _optimise_block(np.asarray(sleeves[a:b], dtype=float), config.shrinkage)
        if degenerate:
            logger.debug("degenerate covariance in subwindow [%d, %d); equal weights used", a, b)
        out.append(w)
        flags.append(degenerate)
    return np.vstack(out), np.asarray(flags)


def optimized_weights(sleeves: np.ndarray, train: slice, config: RollingConfig = RollingConfig()) -> np.ndarray:
    """One long-only min-variance solve over the whole training window."""
    return _optimise_block(np.asarray(sleeves[train], dtype=float), config.shrinkage)[0]


# -- diagnostics -----------------------------------------------------------------


@dataclass(frozen=True)
class StabilityDiagnostics:
    std_dev: float
    autocorr1: float
    max_step: float

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.std_dev, self.autocorr1, self.max_step)


def lag1_autocorr(x: np.ndarray) -> float:
    """Lag-1 sample autocorrelation, sum (x_t - m)(x_{t+1} - m) / sum (x_t - m)^2.

    A constant series has no defined autocorrelation; 0 is returned so it is
    judged on dispersion and step size alone.
    """
    d = np.asarray(x, dtype=float) - np.mean(x)
    den = float(d @ d)
    if den <= 1e-300:
        return 0.0
    return float(np.clip((d[:-1] @ d[1:]) / den, -1.0, 1.0))


def stability_diagnostics(path) -> StabilityDiagnostics:
    x = np.asarray(path, dtype=float)
    if x.ndim != 1 or len(x) < 3:
        raise SeriesTooShort("stability diagnostics need a weight series of length >= 3")
    return StabilityDiagnostics(
        std_dev=float(np.std(x, ddof=1)),
        autocorr1=lag1_autocorr(x),
        max_step=float(np.max(np.abs(np.diff(x)))),
    )


def _diag_array(paths: np.ndarray) -> np.ndarray:
    """Diagnostics for paths of shape (assets, n_sub, horizons) -> (assets, horizons, 3)."""
    a, _, h = paths.shape
    out = np.empty((a, h, 3))
    for i in range(a):
        for k in range(h):
            out[i, k] = stability_diagnostics(paths[i, :, k]).as_tuple()
    return out


@dataclass(frozen=True)
class StabilityFlags:
    """``criteria`` is (assets, horizons, 3): std, autocorr, max-step tests."""

    criteria: np.ndarray
    series_stable: np.ndarray
    asset_stable: np.ndarray
    thresholds: tuple[float, float, float]


def thresholds_from_population(population: np.ndarray, config: RollingConfig) -> tuple[float, float, float]:
    """Percentile thresholds (linear interpolation) over a (n, 3) diagnostics array."""
    if config.fixed_thresholds is not None:
        return config.fixed_thresholds
    pop = np.asarray(population, dtype=float).reshape(-1, 3)
    if pop.shape[0] < 5:
        raise PopulationTooSmall(f"percentile population of {pop.shape[0]} series; need >= 5")
    return (
        float(np.percentile(pop[:, 0], config.std_percentile)),
        float(np.percentile(pop[:, 1], config.autocorr_percentile)),
        float(np.percentile(pop[:, 2], config.step_percentile)),
    )


def classify_stable(
    diagnostics: np.ndarray,
    config: RollingConfig = RollingConfig(),
    population: np.ndarray | None = None,
) -> StabilityFlags:
    """Persistence rule over a cross-section of weight paths.

    ``diagnostics`` has shape (assets, horizons, 3) (or (series, 3) for a
    single group). Inequalities are strict, so tied values fail.
    """
    d = np.asarray(diagnostics, dtype=float)
    if d.ndim == 2:
        d = d[None]
    if population is None:
        population = d
    if config.fixed_thresholds is None and np.asarray(population).size // 3 < 5:
        raise PopulationTooSmall("percentile population needs at least 5 series")
    t_std, t_ac, t_step = thresholds_from_population(population, config)
    crit = np.stack([d[..., 0] < t_std, d[..., 1] > t_ac, d[..., 2] < t_step], axis=-1)
    series_stable = crit.sum(axis=-1) >= config.min_criteria
    asset_stable = series_stable.sum(axis=-1) >= config.min_stable_series
    return StabilityFlags(crit, series_stable, asset_stable, (t_std, t_ac, t_step))


def ema_smooth(series, alpha: float):
    """Terminal value of w_t = alpha x_t + (1 - alpha) w_{t-1}, w_1 = x_1.

    Works along axis 0, so a (T, k) array gives k terminal values.
    """
    if not 0 < alpha <= 1:
        raise AlphaOutOfRange(f"alpha={alpha} must lie in (0, 1]")
    x = np.asarray(series, dtype=float)
    if x.shape[0] == 0:
        raise EmptySeries("cannot smooth an empty series")
    w = x[0]
    for row in x[1:]:
        w = alpha * row + (1.0 - alpha) * w
    return float(w) if np.ndim(w) == 0 else w


# -- Algorithm driver ---------------------------------------------------------------


@dataclass(frozen=True)
class SleevePanel:
    """Per-asset single-horizon sleeve returns, shape (dates, assets, horizons)."""

    dates: np.ndarray
    assets: tuple[str, ...]
    horizons: tuple[int, ...]
    returns: np.ndarray

    @property
    def first_valid(self) -> int:
        ok = np.all(np.isfinite(self.returns), axis=(1, 2))
        if not ok.any():
            raise InsufficientHistory("no date with every sleeve defined")
        return int(np.argmax(ok))


@dataclass
class WindowWeights:
    window: Window
    weights: dict[str, HorizonWeights]
    paths: np.ndarray  # (assets, n_sub, horizons)
    degenerate: np.ndarray  # (assets, n_sub)
    diagnostics: np.ndarray  # (assets, horizons, 3)
    flags: StabilityFlags

    def matrix(self, assets: Sequence[str]) -> np.ndarray:
        return np.vstack([self.weights[a].as_array() for a in assets])


@dataclass
class DynamicWeightsResult:
    assets: tuple[str, ...]
    horizons: tuple[int, ...]
    windows: list[WindowWeights] = field(default_factory=list)

    def mean_weights(self) -> np.ndarray:
        """Average final weight per horizon over assets and windows."""
        return np.mean([w.matrix(self.assets) for w in self.windows], axis=(0, 1))

    def to_rows(self, dates: np.ndarray) -> list[tuple[str, str, int, float, bool]]:
        rows = []
        for ww in self.windows:
            start = str(np.datetime64(dates[ww.window.test_start], "D"))
            for i, a in enumerate(self.assets):
                for k, h in enumerate(self.horizons):
                    rows.append((start, a, h, ww.weights[a].weights[k], bool(ww.flags.series_stable[i, k])))
        return rows

    def to_csv(self, path: str | Path, dates: np.ndarray) -> None:
        with Path(path).open("w", encoding="utf-8") as fh:
            fh.write("window_start,asset,horizon,weight,stable\n")
            for start, a, h, w, s in self.to_rows(dates):
                fh.write(f"{start},{a},{h},{w!r},{str(s).lower()}\n")


def dynamic_horizon_weights(
    sleeves: SleevePanel,
    config: RollingConfig = RollingConfig(),
    windows: Sequence[Window] | None = None,
) -> DynamicWeightsResult:
    """Rolling persistence-filtered horizon weights, one set per test window.

    Globally stable assets get the EMA of each horizon's subwindow path,
    renormalised to the simplex; all others get equal weights.
    """
    if windows is None:
        windows = walk_forward_windows(sleeves.dates, config, sleeves.first_valid)
    n_a, n_h = len(sleeves.assets), len(sleeves.horizons)
    result = DynamicWeightsResult(sleeves.assets, sleeves.horizons)
    history: list[np.ndarray] = []
    for win in windows:
        paths = np.empty((n_a, len(win.subwindows), n_h))
        degenerate = np.empty((n_a, len(win.subwindows)), dtype=bool)
        for i in range(n_a):
            paths[i], degenerate[i] = subwindow_weights(sleeves.returns[:, i, :], win.subwindows, config)
        diags = _diag_array(paths)
        history.append(diags.reshape(-1, 3))
        population = np.concatenate(history[-config.population_windows:])
        flags = classify_stable(diags, config, population)
        weights = {}
        for i, a in enumerate(sleeves.assets):
            if flags.asset_stable[i]:
                smoothed = np.clip(ema_smooth(paths[i], config.ema_alpha), 0.0, None)
                weights[a] = HorizonWeights.from_vector(a, sleeves.horizons, smoothed, Provenance.DYNAMIC)
            else:
                weights[a] = HorizonWeights.equal(a, sleeves.horizons)
        result.windows.append(WindowWeights(win, weights, paths, degenerate, diags, flags))
    return result
