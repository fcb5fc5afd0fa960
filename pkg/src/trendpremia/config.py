"""Run configuration: a single JSON document plus command-line overrides.

Schema (all keys optional unless stated)::

    {
      "data": {"csv": "prices.csv"} | {"synthetic": {<SyntheticSpec fields>}},
      "universe": "universe.json",
      "benchmark": "bench.csv",            # date,return
      "equity_benchmark": "spx.csv",       # date,return
      "metric_tables": "tables.csv",       # period,variant,metric,value (ablate)
      "sleeves": "sleeves.csv",            # date,<label>,... (cluster)
      "horizons": [20, 60, 125, 250, 500],
      "rolling": {<RollingConfig fields>},
      "backtest": {<BacktestConfig fields except horizons>},
      "variants": ["PureTrend", "LeaveOneOut(125)"],
      "output_dir": "out",
      "seed": 7
    }

Relative paths resolve against the config file's directory.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

import numpy as np

from .backtest.walkforward import BacktestConfig, StrategyVariant
from .dynamic_weights import RollingConfig
from .errors import ConfigError
from .market_data import SyntheticSpec
from .signals import DEFAULT_HORIZONS, HorizonSet

_TOP_KEYS = {
    "data", "universe", "benchmark", "equity_benchmark", "metric_tables", "sleeves",
    "horizons", "rolling", "backtest", "variants", "output_dir", "seed",
}


@dataclass(frozen=True)
class RunConfig:
    csv: Path | None = None
    synthetic: SyntheticSpec | None = None
    universe: Path | None = None
    benchmark: Path | None = None
    equity_benchmark: Path | None = None
    metric_tables: Path | None = None
    sleeves: Path | None = None
    horizons: tuple[int, ...] = DEFAULT_HORIZONS
    rolling: RollingConfig = field(default_factory=RollingConfig)
    backtest: BacktestConfig = field(default_factory=BacktestConfig)
    variants: tuple[str, ...] = ("PureTrend",)
    output_dir: Path = Path("out")
    seed: int | None = None

    def validate(self, need_data: bool = True) -> None:
        if need_data and (self.csv is None) == (self.synthetic is None):
            raise ConfigError("exactly one data source (csv or synthetic) is required")
        if self.synthetic is not None and self.seed is None:
            raise ConfigError("a seed is required for synthetic data")
        HorizonSet(self.horizons)
        self.rolling.validate(len(self.horizons))
        for v in self.variants:
            StrategyVariant.parse(v).check(self.horizons)

    def to_dict(self) -> dict:
        def p(x):
            return None if x is None else str(x)

        return {
            "data": {"csv": p(self.csv)} if self.csv is not None else
                    {"synthetic": self.synthetic.to_dict() if self.synthetic else None},
            "universe": p(self.universe),
            "benchmark": p(self.benchmark),
            "equity_benchmark": p(self.equity_benchmark),
            "metric_tables": p(self.metric_tables),
            "sleeves": p(self.sleeves),
            "horizons": list(self.horizons),
            "rolling": self.rolling.to_dict(),
            "backtest": {k: v for k, v in self.backtest.to_dict().items() if k != "horizons"},
            "variants": list(self.variants),
            "output_dir": p(self.output_dir),
            "seed": self.seed,
        }

    def digest(self) -> str:
        """SHA-256 of the canonical JSON form, excluding the output directory."""
        d = self.to_dict()
        d.pop("output_dir")
        blob = json.dumps(d, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


def _subconfig(cls, values: Mapping[str, Any] | None, name: str, **extra):
    values = dict(values or {})
    values.update(extra)
    unknown = set(values) - set(cls.__dataclass_fields__)
    if unknown:
        raise ConfigError(f"unknown {name} keys: {sorted(unknown)}")
    if cls is BacktestConfig and values.get("max_turnover_per_step") is None:
        values.pop("max_turnover_per_step", None)
    if cls is RollingConfig and values.get("fixed_thresholds") is not None:
        values["fixed_thresholds"] = tuple(values["fixed_thresholds"])
    try:
        return cls(**values)
    except TypeError as exc:
        raise ConfigError(f"bad {name} section: {exc}") from None


def load_run_config(path: str | Path | None = None, overrides: Mapping[str, Any] | None = None) -> RunConfig:
    """Read a config file (or start from defaults) and apply overrides.

    Recognised overrides: ``seed``, ``output_dir``, ``variants``, ``alpha``,
    ``horizons``.
    """
    raw: dict[str, Any] = {}
    base = Path.cwd()
    if path is not None:
        p = Path(path)
        if not p.is_file():
            raise ConfigError(f"config file not found: {p}", path=str(p))
        try:
            raw = json.loads(p.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from None
        if not isinstance(raw, dict):
            raise ConfigError("config root must be an object")
        base = p.parent
    unknown = set(raw) - _TOP_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    ov = {k: v for k, v in (overrides or {}).items() if v is not None}

    def path_of(key: str, src: Mapping = raw) -> Path | None:
        v = src.get(key)
        if v is None:
            return None
        q = Path(v)
        return q if q.is_absolute() else base / q

    data = raw.get("data") or {}
    if not isinstance(data, dict) or set(data) - {"csv", "synthetic"}:
        raise ConfigError("data must be an object with 'csv' or 'synthetic'")
    seed = ov.get("seed", raw.get("seed"))
    synthetic = None
    if "synthetic" in data:
        sd = dict(data["synthetic"] or {})
        if seed is None:
            seed = sd.get("seed")
        if seed is not None:
            sd["seed"] = int(seed)
        try:
            synthetic = SyntheticSpec.from_dict(sd)
            synthetic.validate()
        except TypeError as exc:
            raise ConfigError(f"bad synthetic section: {exc}") from None

    horizons = ov.get("horizons", raw.get("horizons", DEFAULT_HORIZONS))
    if isinstance(horizons, str):
        try:
            horizons = [int(x) for x in horizons.split(",") if x.strip()]
        except ValueError:
            raise ConfigError(f"bad horizon list {horizons!r}") from None
    horizons = HorizonSet(tuple(horizons)).horizons
    bt_extra: dict[str, Any] = {"horizons": horizons}
    if "alpha" in ov:
        bt_extra["alpha"] = float(ov["alpha"])
    backtest = _subconfig(BacktestConfig, raw.get("backtest"), "backtest", **bt_extra)
    rolling = _subconfig(RollingConfig, raw.get("rolling"), "rolling")
    variants = tuple(ov.get("variants") or raw.get("variants") or ("PureTrend",))
    out = ov.get("output_dir")
    output_dir = Path(out) if out is not None else (path_of("output_dir") or Path("out"))
    return RunConfig(
        csv=path_of("csv", data),
        synthetic=synthetic,
        universe=path_of("universe"),
        benchmark=path_of("benchmark"),
        equity_benchmark=path_of("equity_benchmark"),
        metric_tables=path_of("metric_tables"),
        sleeves=path_of("sleeves"),
        horizons=horizons,
        rolling=rolling,
        backtest=backtest,
        variants=variants,
        output_dir=output_dir,
        seed=None if seed is None else int(seed),
    )


def jsonable(x):
    """Recursively convert numpy scalars and non-finite floats for JSON output."""
    if isinstance(x, dict):
        return {str(k): jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [jsonable(v) for v in x]
    if isinstance(x, (np.floating, float)):
        v = float(x)
        return v if np.isfinite(v) else None
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.bool_,)):
        return bool(x)
    if isinstance(x, Path):
        return str(x)
    return x


def dump_json(obj, path: str | Path) -> None:
    text = json.dumps(jsonable(obj), sort_keys=True, indent=2, allow_nan=False)
    Path(path).write_text(text + "\n", encoding="utf-8")

