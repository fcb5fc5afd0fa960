"""Price ingestion, calendar alignment and synthetic universe generation."""
from __future__ import annotations

import csv
import enum
import json
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np
import pandas as pd
from scipy.signal import lfilter

from .errors import (
    DuplicateObservation,
    EmptyUniverse,
    InvalidSpec,
    MalformedRow,
    MissingFile,
    NegativeCost,
    NonPositivePrice,
    SeriesTooShort,
    ConfigError,
)

logger = logging.getLogger(__name__)

TRADING_DAYS = 252


class AssetClass(str, enum.Enum):
    COMMODITY = "Commodity"
    EQUITY = "Equity"
    FIXED_INCOME = "FixedIncome"
    FX = "FX"


# (tx bps per round turn, roll bps per annum)
DEFAULT_COSTS = {
    AssetClass.COMMODITY: (2.0, 15.0),
    AssetClass.EQUITY: (2.0, 15.0),
    AssetClass.FIXED_INCOME: (2.0, 10.0),
    AssetClass.FX: (2.0, 2.0),
}


@dataclass(frozen=True)
class Instrument:
    id: str
    asset_class: AssetClass
    tx_cost_bps: float
    roll_cost_bps: float
    description: str = ""

    def __post_init__(self):
        if self.tx_cost_bps < 0 or self.roll_cost_bps < 0:
            raise NegativeCost(f"negative cost for instrument {self.id}", instrument=self.id)
        object.__setattr__(self, "asset_class", AssetClass(self.asset_class))

    @classmethod
    def with_default_costs(cls, id: str, asset_class: AssetClass | str, description: str = "") -> "Instrument":
        ac = AssetClass(asset_class)
        tx, roll = DEFAULT_COSTS[ac]
        return cls(id, ac, tx, roll, description)


def _as_dates(dates) -> np.ndarray:
    return np.asarray(pd.DatetimeIndex(dates).values.astype("datetime64[D]"))


@dataclass(frozen=True)
class PriceSeries:
    instrument_id: str
    dates: np.ndarray
    prices: np.ndarray

    def __post_init__(self):
        dates = _as_dates(self.dates)
        prices = np.asarray(self.prices, dtype=float)
        if dates.shape != prices.shape or prices.ndim != 1:
            raise InvalidSpec("dates and prices must be 1-d and of equal length")
        if np.any(~(prices > 0)):
            raise NonPositivePrice(f"non-positive price in {self.instrument_id}")
        if len(dates) > 1 and np.any(np.diff(dates).astype(int) <= 0):
            raise InvalidSpec(f"dates of {self.instrument_id} not strictly increasing")
        dates.flags.writeable = False
        prices.flags.writeable = False
        object.__setattr__(self, "dates", dates)
        object.__setattr__(self, "prices", prices)

    def __len__(self):
        return len(self.prices)


@dataclass(frozen=True)
class ReturnSeries:
    """Simple daily returns; ``dates[k]`` is the date the return is realised."""

    instrument_id: str
    dates: np.ndarray
    returns: np.ndarray

    def __post_init__(self):
        dates = _as_dates(self.dates)
        returns = np.asarray(self.returns, dtype=float)
        if dates.shape != returns.shape:
            raise InvalidSpec("dates and returns must have equal length")
        if np.any(returns <= -1):
            raise InvalidSpec(f"return <= -1 in {self.instrument_id}")
        dates.flags.writeable = False
        returns.flags.writeable = False
        object.__setattr__(self, "dates", dates)
        object.__setattr__(self, "returns", returns)

    def __len__(self):
        return len(self.returns)

    def to_series(self) -> pd.Series:
        return pd.Series(self.returns, index=pd.DatetimeIndex(self.dates), name=self.instrument_id)


def to_returns(p: PriceSeries) -> ReturnSeries:
    if len(p) < 2:
        raise SeriesTooShort(f"{p.instrument_id}: need at least 2 prices", instrument=p.instrument_id)
    r = p.prices[1:] / p.prices[:-1] - 1.0
    return ReturnSeries(p.instrument_id, p.dates[1:], r)


def from_returns(r: ReturnSeries, start_price: float, start_date) -> PriceSeries:
    """Cumulative-product reconstruction, the inverse of :func:`to_returns`."""
    prices = start_price * np.concatenate([[1.0], np.cumprod(1.0 + r.returns)])
    dates = np.concatenate([[np.datetime64(start_date, "D")], r.dates])
    return PriceSeries(r.instrument_id, dates, prices)


def load_prices_csv(path: str | Path) -> dict[str, PriceSeries]:
    """Read a long-format ``date,instrument_id,price`` file.

    Line numbers in errors are physical file lines (the header is line 1).
    """
    path = Path(path)
    if not path.is_file():
        raise MissingFile(f"no such file: {path}", path=str(path))
    rows: dict[str, list[tuple[np.datetime64, float]]] = {}
    seen: set[tuple[np.datetime64, str]] = set()
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["date", "instrument_id", "price"]:
            raise MalformedRow("header must be date,instrument_id,price", line=1)
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != 3:
                raise MalformedRow(f"line {lineno}: expected 3 fields", line=lineno)
            d, iid, p = (c.strip() for c in row)
            try:
                date = np.datetime64(d, "D")
                if len(d) != 10:
                    raise ValueError(d)
                price = float(p)
            except ValueError:
                raise MalformedRow(f"line {lineno}: cannot parse {row!r}", line=lineno) from None
            if not iid:
                raise MalformedRow(f"line {lineno}: empty instrument_id", line=lineno)
            if not price > 0 or not math.isfinite(price):
                raise NonPositivePrice(f"line {lineno}: price {p}", line=lineno)
            key = (date, iid)
            if key in seen:
                raise DuplicateObservation(f"duplicate ({d}, {iid})", date=d, instrument_id=iid, line=lineno)
            seen.add(key)
            rows.setdefault(iid, []).append((date, price))
    out = {}
    for iid, obs in rows.items():
        obs.sort(key=lambda x: x[0])
        dates = np.array([o[0] for o in obs], dtype="datetime64[D]")
        prices = np.array([o[1] for o in obs])
        out[iid] = PriceSeries(iid, dates, prices)
    return out


def load_returns_csv(path: str | Path) -> pd.Series:
    """Read a ``date,return`` file into a date-indexed series (benchmarks)."""
    path = Path(path)
    if not path.is_file():
        raise MissingFile(f"no such file: {path}", path=str(path))
    dates, values = [], []
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["date", "return"]:
            raise MalformedRow("header must be date,return", line=1)
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                d, v = row
                dates.append(np.datetime64(d.strip(), "D"))
                values.append(float(v))
            except ValueError:
                raise MalformedRow(f"line {lineno}: cannot parse {row!r}", line=lineno) from None
    s = pd.Series(values, index=pd.DatetimeIndex(np.array(dates, dtype="datetime64[D]")), name="return")
    if s.index.has_duplicates:
        raise DuplicateObservation(f"duplicate dates in {path}")
    return s.sort_index()


def write_prices_csv(series: Mapping[str, PriceSeries], path: str | Path) -> None:
    """Write long-format CSV, date-major then instrument order as given."""
    items = list(series.values())
    all_dates = np.unique(np.concatenate([s.dates for s in items]))
    lookup = [dict(zip(s.dates.tolist(), s.prices.tolist())) for s in items]
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        fh.write("date,instrument_id,price\n")
        for d in all_dates.tolist():
            for s, lk in zip(items, lookup):
                if d in lk:
                    fh.write(f"{d.isoformat()},{s.instrument_id},{lk[d]!r}\n")


# -- universe ---------------------------------------------------------------


@dataclass(frozen=True)
class Universe:
    """Instruments aligned on a common calendar.

    ``prices`` has shape (n_dates, n_assets); ``returns`` drops the first date.
    """

    dates: np.ndarray
    ids: tuple[str, ...]
    prices: np.ndarray
    instruments: tuple[Instrument, ...]

    def __post_init__(self):
        if len(self.ids) == 0:
            raise EmptyUniverse("universe has no instruments")
        if self.prices.shape != (len(self.dates), len(self.ids)):
            raise InvalidSpec("price matrix shape does not match dates x ids")
        if tuple(i.id for i in self.instruments) != tuple(self.ids):
            raise InvalidSpec("instrument list must follow ids order")
        self.prices.flags.writeable = False

    @property
    def returns(self) -> np.ndarray:
        return self.prices[1:] / self.prices[:-1] - 1.0

    @property
    def return_dates(self) -> np.ndarray:
        return self.dates[1:]

    @property
    def n_assets(self) -> int:
        return len(self.ids)

    def series(self) -> dict[str, PriceSeries]:
        return {iid: PriceSeries(iid, self.dates, self.prices[:, k]) for k, iid in enumerate(self.ids)}

    def return_series(self, iid: str) -> ReturnSeries:
        k = self.ids.index(iid)
        return ReturnSeries(iid, self.return_dates, self.returns[:, k])

    def subset(self, ids: Sequence[str]) -> "Universe":
        cols = [self.ids.index(i) for i in ids]
        return Universe(self.dates, tuple(ids), self.prices[:, cols].copy(), tuple(self.instruments[c] for c in cols))


def align_universe(
    series: Mapping[str, PriceSeries],
    instruments: Mapping[str, Instrument] | None = None,
    max_missing: float = 0.05,
) -> Universe:
    """Intersect instruments on common dates.

    Instruments missing more than ``max_missing`` of the union calendar are
    dropped (never imputed). Instruments without cost metadata default to
    Commodity costs.
    """
    if not series:
        raise EmptyUniverse("no price series supplied")
    union = np.unique(np.concatenate([s.dates for s in series.values()]))
    kept = []
    for iid, s in series.items():
        missing = 1.0 - len(s.dates) / len(union)
        if missing > max_missing:
            logger.warning("rejecting %s: %.1f%% of dates missing", iid, 100 * missing)
            continue
        kept.append(iid)
    if not kept:
        raise EmptyUniverse("every instrument exceeded the missing-date limit")
    common = union
    for iid in kept:
        common = np.intersect1d(common, series[iid].dates, assume_unique=True)
    if len(common) < 2:
        raise SeriesTooShort("fewer than two common dates")
    cols = []
    for iid in kept:
        s = series[iid]
        idx = np.searchsorted(s.dates, common)
        cols.append(s.prices[idx])
    insts = []
    for iid in kept:
        if instruments and iid in instruments:
            insts.append(instruments[iid])
        else:
            insts.append(Instrument.with_default_costs(iid, AssetClass.COMMODITY))
    return Universe(common, tuple(kept), np.column_stack(cols), tuple(insts))


def load_universe_config(path: str | Path) -> dict[str, Instrument]:
    """Read the instrument list.

    Schema (JSON)::

        {"instruments": [
            {"id": "ES", "asset_class": "Equity",
             "tx_cost_bps": 2, "roll_cost_bps": 15, "description": "..."}, ...]}

    ``tx_cost_bps`` and ``roll_cost_bps`` default to the asset-class table.
    """
    path = Path(path)
    if not path.is_file():
        raise MissingFile(f"no such file: {path}", path=str(path))
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
        entries = doc["instruments"]
    except (json.JSONDecodeError, KeyError, TypeError) as exc:
        raise ConfigError(f"bad universe file {path}: {exc}") from None
    out: dict[str, Instrument] = {}
    for e in entries:
        try:
            ac = AssetClass(e["asset_class"])
            tx, roll = DEFAULT_COSTS[ac]
            inst = Instrument(
                e["id"], ac, float(e.get("tx_cost_bps", tx)), float(e.get("roll_cost_bps", roll)),
                e.get("description", ""),
            )
        except (KeyError, ValueError) as exc:
            raise ConfigError(f"bad instrument entry {e!r}: {exc}") from None
        if inst.id in out:
            raise ConfigError(f"duplicate instrument id {inst.id}")
        out[inst.id] = inst
    return out


def write_universe_config(instruments: Sequence[Instrument], path: str | Path) -> None:
    doc = {
        "instruments": [
            {
                "id": i.id,
                "asset_class": i.asset_class.value,
                "tx_cost_bps": i.tx_cost_bps,
                "roll_cost_bps": i.roll_cost_bps,
                "description": i.description,
            }
            for i in instruments
        ]
    }
    Path(path).write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")


# -- synthetic data -----------------------------------------------------------

_CLASS_CYCLE = (AssetClass.EQUITY, AssetClass.FIXED_INCOME, AssetClass.COMMODITY, AssetClass.FX)


@dataclass(frozen=True)
class SyntheticSpec:
    """Parameters of the latent-drift price generator.

    Drift and noise volatilities are annualised. With ``medium_redundancy``
    each asset's drift is the sum of a fast and a slow AR(1) component with
    half-lives ``fast_half_life`` and ``slow_half_life``; otherwise one AR(1)
    with the asset's entry of ``trend_half_lives``.
    """

    n_assets: int = 6
    n_days: int = 3000
    trend_half_lives: tuple[float, ...] = (250.0,)
    drift_vol: float = 0.15
    noise_vol: float = 0.15
    medium_redundancy: bool = False
    seed: int = 0
    drift_mean: float = 0.0
    fast_half_life: float = 10.0
    slow_half_life: float = 5000.0
    fast_share: float = 0.5
    longest_horizon: int = 500
    warmup_days: int = 500
    start_date: str = "2000-01-03"

    def half_life(self, i: int) -> float:
        hl = self.trend_half_lives
        return float(hl[i % len(hl)])

    def validate(self) -> None:
        if self.n_assets < 1:
            raise InvalidSpec("n_assets must be >= 1")
        if self.n_days < max(2, self.warmup_days + self.longest_horizon):
            raise InvalidSpec(
                f"n_days={self.n_days} shorter than warmup + longest horizon "
                f"({self.warmup_days + self.longest_horizon})"
            )
        if self.drift_vol < 0 or self.noise_vol < 0 or (self.drift_vol == 0 and self.noise_vol == 0 and self.drift_mean == 0):
            raise InvalidSpec("volatilities must be non-negative and not all zero")
        if not self.trend_half_lives or any(h <= 0 for h in self.trend_half_lives):
            raise InvalidSpec("trend half-lives must be positive")
        if self.fast_half_life <= 0 or self.slow_half_life <= 0:
            raise InvalidSpec("component half-lives must be positive")
        if not 0.0 <= self.fast_share <= 1.0:
            raise InvalidSpec("fast_share must be in [0, 1]")

    def to_dict(self) -> dict:
        d = {k: getattr(self, k) for k in self.__dataclass_fields__}
        d["trend_half_lives"] = list(self.trend_half_lives)
        return d

    @classmethod
    def from_dict(cls, d: Mapping) -> "SyntheticSpec":
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise InvalidSpec(f"unknown synthetic spec fields: {sorted(unknown)}")
        d = dict(d)
        if "trend_half_lives" in d:
            d["trend_half_lives"] = tuple(float(x) for x in d["trend_half_lives"])
        return cls(**d)


def _ar1(rng: np.random.Generator, n: int, half_life: float, vol: float) -> np.ndarray:
    """Stationary AR(1) path with the given half-life and marginal std."""
    phi = 0.5 ** (1.0 / half_life)
    start = rng.standard_normal() * vol
    shocks = rng.standard_normal(n) * vol * math.sqrt(1.0 - phi * phi)
    out, _ = lfilter([1.0], [1.0, -phi], shocks, zi=[phi * start])
    return out


def synthetic_latent_drift(spec: SyntheticSpec) -> np.ndarray:
    """Annualised latent drift, shape (n_days, n_assets); day 0 has none."""
    return _simulate(spec)[1]


def _simulate(spec: SyntheticSpec) -> tuple[np.ndarray, np.ndarray]:
    spec.validate()
    rng = np.random.default_rng(spec.seed)
    n, dt = spec.n_days, 1.0 / TRADING_DAYS
    drift = np.zeros((n, spec.n_assets))
    logret = np.zeros((n, spec.n_assets))
    for i in range(spec.n_assets):
        if spec.medium_redundancy:
            fv = spec.drift_vol * math.sqrt(spec.fast_share)
            sv = spec.drift_vol * math.sqrt(1.0 - spec.fast_share)
            mu = _ar1(rng, n - 1, spec.fast_half_life, fv) + _ar1(rng, n - 1, spec.slow_half_life, sv)
        else:
            mu = _ar1(rng, n - 1, spec.half_life(i), spec.drift_vol)
        mu = mu + spec.drift_mean
        noise = rng.standard_normal(n - 1) * spec.noise_vol * math.sqrt(dt)
        drift[1:, i] = mu
        logret[1:, i] = mu * dt + noise
    prices = 100.0 * np.exp(np.cumsum(logret, axis=0))
    return prices, drift


def synthetic_instruments(spec: SyntheticSpec) -> list[Instrument]:
    return [
        Instrument.with_default_costs(f"SYN{i:02d}", _CLASS_CYCLE[i % 4], description="synthetic")
        for i in range(spec.n_assets)
    ]


def generate_synthetic_universe(spec: SyntheticSpec) -> dict[str, PriceSeries]:
    prices, _ = _simulate(spec)
    dates = _as_dates(pd.bdate_range(spec.start_date, periods=spec.n_days))
    return {
        inst.id: PriceSeries(inst.id, dates, prices[:, k])
        for k, inst in enumerate(synthetic_instruments(spec))
    }


def synthetic_universe(spec: SyntheticSpec) -> Universe:
    series = generate_synthetic_universe(spec)
    insts = {i.id: i for i in synthetic_instruments(spec)}
    return align_universe(series, insts)
