"""Command-line entry point: ``trendpremia <command> [--config ...]``.

Commands write their artifacts plus a ``manifest.json`` (config hash, seed,
library versions, output checksums) into the output directory. Failures
print a JSON error record on stderr and exit 2 (config), 3 (data) or
4 (numerical).
"""
from __future__ import annotations

import argparse
import hashlib
import json
import logging
import platform
import sys
from pathlib import Path
from typing import Sequence

import numpy as np
import pandas as pd
import scipy

from . import __version__
from .backtest import (
    ablation_zscores,
    horizon_cluster,
    load_metric_tables,
    metric_tables,
    run_variants,
    write_results_csv,
)
from .backtest.metrics import CONVENTIONS
from .backtest.walkforward import StrategyVariant, ablation_variants, prepare, trend_benchmark
from .config import RunConfig, dump_json, load_run_config
from .dynamic_weights import dynamic_horizon_weights
from .errors import ConfigError, DataError, TrendPremiaError
from .market_data import (
    align_universe,
    generate_synthetic_universe,
    load_prices_csv,
    load_returns_csv,
    load_universe_config,
    synthetic_instruments,
    synthetic_universe,
    write_prices_csv,
    write_universe_config,
    Universe,
)
from .plots import dendrogram_svg, iso_utility_svg, write_svg

logger = logging.getLogger("trendpremia")


# -- helpers ----------------------------------------------------------------------


def _out_dir(cfg: RunConfig) -> Path:
    out = Path(cfg.output_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        probe = out / ".write_probe"
        probe.write_text("")
        probe.unlink()
    except OSError as exc:
        raise ConfigError(f"output directory not writable: {out} ({exc.strerror})", path=str(out)) from None
    return out


def _universe(cfg: RunConfig) -> Universe:
    if cfg.synthetic is not None:
        return synthetic_universe(cfg.synthetic)
    series = load_prices_csv(cfg.csv)
    instruments = load_universe_config(cfg.universe) if cfg.universe is not None else None
    return align_universe(series, instruments)


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _write_manifest(cfg: RunConfig, command: str, out: Path, files: Sequence[str]) -> None:
    manifest = {
        "command": command,
        "config": cfg.to_dict(),
        "config_hash": cfg.digest(),
        "seed": cfg.seed,
        "versions": {
            "trendpremia": __version__,
            "python": platform.python_version(),
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "pandas": pd.__version__,
        },
        "outputs": {f: _sha256(out / f) for f in sorted(files)},
    }
    dump_json(manifest, out / "manifest.json")


def _horizon_sleeves(universe: Universe, cfg: RunConfig) -> pd.DataFrame:
    """Per-horizon sleeve returns averaged over assets, rows where all are defined."""
    prep = prepare(universe, cfg.rolling, cfg.backtest)
    r = np.mean(prep.sleeves.returns, axis=1)
    frame = pd.DataFrame(r, index=pd.DatetimeIndex(prep.panel.dates), columns=[str(h) for h in prep.panel.horizons])
    return frame.dropna()


# -- commands -------------------------------------------------------------------


def cmd_synth(cfg: RunConfig) -> list[str]:
    if cfg.synthetic is None:
        raise ConfigError("synth needs a data.synthetic section")
    out = _out_dir(cfg)
    write_prices_csv(generate_synthetic_universe(cfg.synthetic), out / "prices.csv")
    write_universe_config(synthetic_instruments(cfg.synthetic), out / "universe.json")
    dump_json({"synthetic": cfg.synthetic.to_dict()}, out / "synthetic.json")
    return ["prices.csv", "universe.json", "synthetic.json"]


def _benchmarks(cfg: RunConfig, universe: Universe):
    bench = load_returns_csv(cfg.benchmark) if cfg.benchmark is not None else trend_benchmark(universe, cfg.backtest)
    equity = load_returns_csv(cfg.equity_benchmark) if cfg.equity_benchmark is not None else None
    return bench, equity


def cmd_backtest(cfg: RunConfig) -> list[str]:
    out = _out_dir(cfg)
    universe = _universe(cfg)
    bench, equity = _benchmarks(cfg, universe)
    variants = [StrategyVariant.parse(v) for v in cfg.variants]
    reports = run_variants(universe, variants, cfg.rolling, bench, cfg.backtest, equity)
    doc = {
        "conventions": CONVENTIONS,
        "config_hash": cfg.digest(),
        "seed": cfg.seed,
        "horizons": list(cfg.horizons),
        "reports": [r.to_dict() for r in reports],
    }
    files = ["report.json", "results.csv", "iso_utility.svg", "dendrogram.svg", "dendrogram.txt"]
    labels = [v.label for v in variants]
    wanted = [v.label for v in ablation_variants(cfg.horizons)]
    if all(w in labels for w in wanted):
        chosen = [reports[labels.index(w)] for w in wanted]
        tables = metric_tables(chosen, wanted)
        if tables["sharpe"].empty:
            tables = {m: _full_table(chosen, wanted, m) for m in tables}
        ab = ablation_zscores(tables)
        ab.to_csv(out / "zscores.csv")
        doc["ablation"] = {"ranking": ab.ranking, "degenerate": [list(c) for c in ab.degenerate]}
        files.append("zscores.csv")
    dump_json(doc, out / "report.json")
    write_results_csv(reports, out / "results.csv")
    pts = {r.variant: (r.full.ret_over_maxdd, r.full.benchmark_corr) for r in reports}
    write_svg(iso_utility_svg(pts, cfg.backtest.alpha), out / "iso_utility.svg")
    tree = horizon_cluster(_horizon_sleeves(universe, cfg))
    write_svg(dendrogram_svg(tree), out / "dendrogram.svg")
    (out / "dendrogram.txt").write_text(tree.render_text(), encoding="utf-8")
    return files


def _full_table(reports, labels, metric) -> pd.DataFrame:
    field = {"sharpe": "sharpe", "ret_over_maxdd": "ret_over_maxdd", "corr": "benchmark_corr"}[metric]
    return pd.DataFrame([[getattr(r.full, field) for r in reports]], index=["full"], columns=labels, dtype=float)


def cmd_ablate(cfg: RunConfig) -> list[str]:
    out = _out_dir(cfg)
    if cfg.metric_tables is not None:
        ab = ablation_zscores(load_metric_tables(cfg.metric_tables))
    else:
        cfg.validate()
        universe = _universe(cfg)
        bench, _ = _benchmarks(cfg, universe)
        variants = ablation_variants(cfg.horizons)
        reports = run_variants(universe, variants, cfg.rolling, bench, cfg.backtest)
        labels = [v.label for v in variants]
        tables = metric_tables(reports, labels)
        if tables["sharpe"].empty:
            tables = {m: _full_table(reports, labels, m) for m in tables}
        ab = ablation_zscores(tables)
    ab.to_csv(out / "zscores.csv")
    dump_json({"ranking": ab.ranking, "table": ab.table.round(12).to_dict(orient="index"),
               "degenerate": [list(c) for c in ab.degenerate]}, out / "ablation.json")
    return ["zscores.csv", "ablation.json"]


def _read_sleeves(path: Path) -> pd.DataFrame:
    if not path.is_file():
        raise DataError(f"sleeve file not found: {path}", path=str(path))
    frame = pd.read_csv(path)
    if frame.columns[0] != "date" or frame.shape[1] < 3:
        raise DataError("sleeve file needs a date column and at least two series")
    return frame.set_index("date").astype(float)


def cmd_cluster(cfg: RunConfig) -> list[str]:
    out = _out_dir(cfg)
    if cfg.sleeves is not None:
        frame = _read_sleeves(cfg.sleeves)
    else:
        cfg.validate()
        frame = _horizon_sleeves(_universe(cfg), cfg)
    tree = horizon_cluster(frame)
    (out / "cluster.txt").write_text(tree.render_text(), encoding="utf-8")
    dump_json(tree.to_dict(), out / "cluster.json")
    write_svg(dendrogram_svg(tree), out / "dendrogram.svg")
    return ["cluster.txt", "cluster.json", "dendrogram.svg"]


def cmd_weights(cfg: RunConfig) -> list[str]:
    out = _out_dir(cfg)
    universe = _universe(cfg)
    prep = prepare(universe, cfg.rolling, cfg.backtest)
    res = dynamic_horizon_weights(prep.sleeves, cfg.rolling, prep.windows)
    res.to_csv(out / "weights.csv", prep.panel.dates)
    return ["weights.csv"]


COMMANDS = {
    "synth": cmd_synth,
    "backtest": cmd_backtest,
    "ablate": cmd_ablate,
    "cluster": cmd_cluster,
    "weights": cmd_weights,
}
_NEEDS_DATA = {"synth", "backtest", "weights"}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="trendpremia", description="Multi-horizon trend allocation engine")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", type=Path, help="JSON run configuration")
        p.add_argument("--out", type=Path, help="output directory (overrides config)")
        p.add_argument("--seed", type=int, help="random seed for synthetic data")
        p.add_argument("--variant", action="append", help="strategy variant, repeatable")
        p.add_argument("--alpha", type=float, help="utility exponent (default 0.8)")
        p.add_argument("--horizons", help="comma-separated horizons (default 20,60,125,250,500)")
        p.add_argument("-v", "--verbose", action="store_true")
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg = load_run_config(args.config, {
            "seed": args.seed, "output_dir": args.out, "variants": args.variant,
            "alpha": args.alpha, "horizons": args.horizons,
        })
        cfg.validate(need_data=args.command in _NEEDS_DATA)
        files = COMMANDS[args.command](cfg)
        _write_manifest(cfg, args.command, Path(cfg.output_dir), files)
    except TrendPremiaError as exc:
        rec = exc.record()
        rec["command"] = args.command
        print(json.dumps(rec, sort_keys=True), file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        rec = {"error": "IoError", "message": str(exc), "command": args.command}
        print(json.dumps(rec, sort_keys=True), file=sys.stderr)
        return DataError.exit_code
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
