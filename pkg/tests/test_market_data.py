import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from trendpremia.errors import (
    DuplicateObservation,
    InvalidSpec,
    MalformedRow,
    MissingFile,
    NegativeCost,
    NonPositivePrice,
    SeriesTooShort,
)
from trendpremia.market_data import (
    AssetClass,
    Instrument,
    PriceSeries,
    SyntheticSpec,
    align_universe,
    from_returns,
    generate_synthetic_universe,
    load_prices_csv,
    load_universe_config,
    synthetic_universe,
    to_returns,
    write_prices_csv,
    write_universe_config,
)
from trendpremia.signals import trend_score


def _ps(prices, start="2020-01-01"):
    dates = np.arange(np.datetime64(start), np.datetime64(start) + len(prices))
    return PriceSeries("A", dates, np.asarray(prices, dtype=float))


def _write(path, text):
    path.write_text(text, encoding="utf-8")
    return path


class TestLoadPrices:
    def test_three_rows(self, tmp_path):
        f = _write(tmp_path / "p.csv", "date,instrument_id,price\n2020-01-01,A,100\n2020-01-02,A,101\n2020-01-03,A,102\n")
        s = load_prices_csv(f)
        assert list(s) == ["A"]
        np.testing.assert_array_equal(s["A"].prices, [100, 101, 102])

    def test_negative_price_reports_line(self, tmp_path):
        f = _write(tmp_path / "p.csv",
                   "date,instrument_id,price\n2020-01-01,A,100\n2020-01-02,A,101\n2020-01-03,A,-5\n")
        with pytest.raises(NonPositivePrice) as exc:
            load_prices_csv(f)
        assert exc.value.context["line"] == 4

    def test_interleaved_assets_sorted(self, tmp_path):
        f = _write(tmp_path / "p.csv", "date,instrument_id,price\n"
                   "2020-01-03,A,3\n2020-01-02,B,20\n2020-01-01,A,1\n2020-01-03,B,30\n2020-01-02,A,2\n2020-01-01,B,10\n")
        s = load_prices_csv(f)
        np.testing.assert_array_equal(s["A"].prices, [1, 2, 3])
        np.testing.assert_array_equal(s["B"].prices, [10, 20, 30])
        assert np.all(np.diff(s["B"].dates.astype(int)) > 0)

    def test_duplicate(self, tmp_path):
        f = _write(tmp_path / "p.csv", "date,instrument_id,price\n2020-01-01,A,1\n2020-01-01,A,2\n")
        with pytest.raises(DuplicateObservation):
            load_prices_csv(f)

    def test_missing_and_malformed(self, tmp_path):
        with pytest.raises(MissingFile):
            load_prices_csv(tmp_path / "nope.csv")
        f = _write(tmp_path / "p.csv", "date,instrument_id,price\n2020-01-01,A\n")
        with pytest.raises(MalformedRow) as exc:
            load_prices_csv(f)
        assert exc.value.context["line"] == 2
        g = _write(tmp_path / "q.csv", "when,id,px\n")
        with pytest.raises(MalformedRow):
            load_prices_csv(g)

    def test_write_roundtrip(self, tmp_path):
        series = generate_synthetic_universe(SyntheticSpec(n_assets=2, n_days=1100, seed=3))
        write_prices_csv(series, tmp_path / "out.csv")
        back = load_prices_csv(tmp_path / "out.csv")
        for k in series:
            np.testing.assert_allclose(back[k].prices, series[k].prices, rtol=1e-15)


class TestReturns:
    def test_simple(self):
        np.testing.assert_allclose(to_returns(_ps([100, 110])).returns, [0.10])

    def test_constant(self):
        assert np.all(to_returns(_ps([5, 5, 5, 5])).returns == 0)

    def test_hand(self):
        np.testing.assert_allclose(to_returns(_ps([100, 90, 99])).returns, [-0.10, 0.10], atol=1e-15)

    def test_too_short(self):
        with pytest.raises(SeriesTooShort):
            to_returns(_ps([100]))

    @given(st.floats(0.01, 1e4), st.lists(st.floats(0.5, 2.0), min_size=1, max_size=60))
    def test_roundtrip(self, start, ratios):
        p = _ps(start * np.cumprod([1.0] + ratios))
        prices = p.prices
        back = from_returns(to_returns(p), prices[0], p.dates[0])
        np.testing.assert_allclose(back.prices, p.prices, rtol=1e-12)


class TestInstrument:
    def test_negative_cost(self):
        with pytest.raises(NegativeCost):
            Instrument("X", AssetClass.FX, -1, 0)

    def test_default_costs(self):
        assert Instrument.with_default_costs("E", "Equity").roll_cost_bps == 15
        assert Instrument.with_default_costs("B", "FixedIncome").roll_cost_bps == 10
        fx = Instrument.with_default_costs("F", "FX")
        assert (fx.tx_cost_bps, fx.roll_cost_bps) == (2, 2)

    def test_universe_config_roundtrip(self, tmp_path):
        insts = [Instrument("ES", "Equity", 2, 15, "index"), Instrument("EC", "FX", 1.5, 2)]
        write_universe_config(insts, tmp_path / "u.json")
        back = load_universe_config(tmp_path / "u.json")
        assert back["ES"] == insts[0] and back["EC"] == insts[1]

    def test_universe_config_defaults(self, tmp_path):
        (tmp_path / "u.json").write_text(json.dumps({"instruments": [{"id": "TY", "asset_class": "FixedIncome"}]}))
        assert load_universe_config(tmp_path / "u.json")["TY"].roll_cost_bps == 10


class TestAlign:
    def test_rejects_sparse_asset(self):
        d = np.arange(np.datetime64("2020-01-01"), np.datetime64("2020-01-01") + 100)
        a = PriceSeries("A", d, np.linspace(1, 2, 100))
        b = PriceSeries("B", d[::2], np.linspace(1, 2, 50))
        c = PriceSeries("C", np.delete(d, [5, 7]), np.linspace(1, 2, 98))
        u = align_universe({"A": a, "B": b, "C": c})
        assert u.ids == ("A", "C")
        assert len(u.dates) == 98


class TestSynthetic:
    def test_deterministic_drift_limit(self):
        spec = SyntheticSpec(n_assets=1, n_days=10, noise_vol=0.0, drift_vol=0.0, drift_mean=0.2,
                             warmup_days=0, longest_horizon=10)
        p = generate_synthetic_universe(spec)["SYN00"].prices
        assert np.all(np.diff(p) > 0)

    def test_same_seed_identical(self):
        spec = SyntheticSpec(n_assets=3, n_days=1200, seed=11, medium_redundancy=True)
        a, b = generate_synthetic_universe(spec), generate_synthetic_universe(spec)
        for k in a:
            assert a[k].prices.tobytes() == b[k].prices.tobytes()

    def test_different_seed_differs(self):
        a = generate_synthetic_universe(SyntheticSpec(n_assets=1, n_days=1000, seed=1))
        b = generate_synthetic_universe(SyntheticSpec(n_assets=1, n_days=1000, seed=2))
        assert not np.array_equal(a["SYN00"].prices, b["SYN00"].prices)

    def test_long_half_life_favours_long_score(self):
        u = synthetic_universe(SyntheticSpec(n_assets=4, n_days=3000, trend_half_lives=(250.0,), seed=5))
        r = u.returns
        s20 = np.nanmean(np.abs(trend_score(r, 20)))
        s250 = np.nanmean(np.abs(trend_score(r, 250)))
        assert s250 > s20

    @pytest.mark.parametrize("kw", [dict(n_days=600), dict(noise_vol=-0.1), dict(n_assets=0),
                                    dict(trend_half_lives=(0.0,)), dict(fast_share=1.5)])
    def test_invalid(self, kw):
        with pytest.raises(InvalidSpec):
            SyntheticSpec(**kw).validate()

    def test_spec_dict_roundtrip(self):
        spec = SyntheticSpec(n_assets=2, medium_redundancy=True, seed=9)
        assert SyntheticSpec.from_dict(spec.to_dict()) == spec
        with pytest.raises(InvalidSpec):
            SyntheticSpec.from_dict({"bogus": 1})

    @given(st.integers(0, 2**31 - 1), st.booleans())
    def test_generated_series_valid(self, seed, mr):
        spec = SyntheticSpec(n_assets=2, n_days=1000, seed=seed, medium_redundancy=mr)
        for s in generate_synthetic_universe(spec).values():
            assert np.all(s.prices > 0)
            assert np.all(np.diff(s.dates.astype("int64")) > 0)
            assert np.all(to_returns(s).returns > -1)
