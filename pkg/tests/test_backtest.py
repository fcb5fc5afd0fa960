import statistics

import numpy as np
import pandas as pd
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays
from scipy.cluster.hierarchy import linkage
from scipy.spatial.distance import squareform

from trendpremia.backtest import (
    ablation_zscores,
    apply_costs,
    horizon_cluster,
    load_metric_tables,
    run_walk_forward,
)
from trendpremia.backtest.cluster import correlation_distance
from trendpremia.backtest.metrics import (
    cobb_douglas_utility,
    compute_metrics,
    conditional_sharpe,
    correlation,
    max_drawdown,
    sharpe,
    ret_over_maxdd,
)
from trendpremia.backtest.walkforward import (
    BacktestConfig,
    StrategyVariant,
    VariantKind,
    ablation_variants,
    prepare,
)
from trendpremia.dynamic_weights import RollingConfig
from trendpremia.errors import (
    InsufficientOverlap,
    MisalignedDates,
    NegativeCost,
    NoCrisisMonths,
    NonPositiveInput,
    SeriesTooShort,
    UnknownVariant,
    ZeroDrawdown,
    ZeroVol,
)
from trendpremia.market_data import AssetClass, Instrument, SyntheticSpec, Universe, synthetic_universe

FEE_DAILY = 50e-4 / 252


def inst(tx=0.0, roll=0.0, iid="A"):
    return Instrument(iid, AssetClass.EQUITY, tx, roll)


class TestCosts:
    def test_fee_only_year(self):
        net = apply_costs(np.zeros(252), np.zeros((252, 1)), np.zeros((252, 1)), [inst(2, 3)])
        np.testing.assert_allclose(net, -FEE_DAILY, rtol=1e-15)
        assert 1 - np.prod(1 + net) == pytest.approx(0.005, abs=1e-4)

    def test_turnover_day(self):
        to = np.array([[0.0], [1.0]])
        pos = np.array([[0.0], [1.0]])
        net = apply_costs(np.zeros(2), to, pos, [inst(2, 3)])
        assert net[1] == pytest.approx(-(0.0002 + 3e-4 / 252 + FEE_DAILY), abs=1e-12)
        assert net[0] == pytest.approx(-FEE_DAILY, abs=1e-15)

    def test_zero_costs_identity(self):
        g = np.random.default_rng(0).normal(size=30)
        to = np.abs(np.random.default_rng(1).normal(size=(30, 2)))
        net = apply_costs(g, to, to, [inst(iid="A"), inst(iid="B")], 0.0)
        np.testing.assert_array_equal(net, g)

    def test_errors(self):
        with pytest.raises(MisalignedDates):
            apply_costs(np.zeros(3), np.zeros((2, 1)), np.zeros((2, 1)), [inst()])
        with pytest.raises(NegativeCost):
            apply_costs(np.zeros(2), np.zeros((2, 1)), np.zeros((2, 1)), [inst(-1.0)])
        with pytest.raises(NegativeCost):
            apply_costs(np.zeros(2), np.zeros((2, 1)), np.zeros((2, 1)), [inst()], -5.0)

    @given(arrays(np.float64, (10, 2), elements=st.floats(0, 5)), arrays(np.float64, (10, 2), elements=st.floats(-5, 5)),
           st.floats(0, 20), st.floats(0, 20), st.floats(0, 200))
    def test_monotone(self, to, pos, tx, roll, fee):
        g = np.linspace(-0.01, 0.01, 10)
        net = apply_costs(g, to, pos, [inst(tx, roll, "A"), inst(tx, roll, "B")], fee)
        assert np.all(net <= g)


class TestMetrics:
    def test_zero_mean_sharpe(self):
        assert sharpe(np.tile([0.01, -0.01], 50)) == 0.0

    def test_drawdown_example(self):
        assert max_drawdown([0.10, -0.20, 0.10]) == pytest.approx(0.2, abs=1e-15)

    def test_self_correlation(self):
        r = np.random.default_rng(0).normal(size=100)
        assert correlation(r, r) == pytest.approx(1.0, abs=1e-15)

    def test_errors(self):
        with pytest.raises(ZeroVol):
            sharpe(np.full(50, 0.001))
        with pytest.raises(ZeroDrawdown):
            ret_over_maxdd(np.full(50, 0.001))
        with pytest.raises(SeriesTooShort):
            compute_metrics(np.zeros(39))

    def test_non_strict_records(self):
        m = compute_metrics(np.full(50, 0.001), np.random.default_rng(0).normal(size=50), strict=False)
        assert m.sharpe is None and m.ret_over_maxdd is None
        assert set(m.errors) == {"ZeroVol", "ZeroDrawdown", "ZeroVariance"}
        assert m.benchmark_corr is None

    def test_row_fields(self):
        rng = np.random.default_rng(1)
        r, b = rng.normal(0.0005, 0.01, 500), rng.normal(0, 0.01, 500)
        m = compute_metrics(r, b)
        assert m.ann_return == pytest.approx(252 * r.mean(), rel=1e-12)
        assert m.ann_vol == pytest.approx(np.sqrt(252) * r.std(ddof=1), rel=1e-12)
        assert 0 <= m.max_drawdown <= 1 and -1 <= m.benchmark_corr <= 1
        assert m.ret_over_maxdd == pytest.approx(m.ann_return / m.max_drawdown, rel=1e-12)

    @given(arrays(np.float64, 60, elements=st.floats(-0.05, 0.05)), st.floats(0.01, 100))
    def test_sharpe_scale_invariant(self, r, k):
        if np.std(r) < 1e-6:
            return
        assert sharpe(k * r) == pytest.approx(sharpe(r), rel=1e-9, abs=1e-12)

    @given(arrays(np.float64, 30, elements=st.floats(-0.2, 0.2)), arrays(np.float64, st.integers(1, 10), elements=st.floats(0.001, 0.2)))
    def test_drawdown_leading_gains(self, r, lead):
        assert max_drawdown(np.concatenate([lead, r])) >= max_drawdown(r) - 1e-12


class TestConditionalSharpe:
    def test_example(self):
        # +1% in the crisis months, monthly std exactly 2%
        s = np.array([0.01, 0.01, 0.03, -0.01] * 3)
        e = np.array([-0.05, -0.04, 0.02, 0.01] * 3)
        vol = statistics.stdev(s.tolist())
        assert conditional_sharpe(s, e) == pytest.approx(0.01 / vol, rel=1e-12)
        s2 = 0.01 + 0.02 * np.array([1, -1] * 6) * np.sqrt(11 / 12)
        e2 = np.where(np.arange(12) % 2 == 0, -0.05, 0.01)
        s2[e2 < -0.03] = 0.01
        s2[e2 >= -0.03] = 0.01 + np.array([1, -1, 1, -1, 1, -1]) * 0.02 * np.sqrt(11 / 6)
        assert statistics.stdev(s2.tolist()) == pytest.approx(0.02, rel=1e-12)
        assert conditional_sharpe(s2, e2) == pytest.approx(0.5, rel=1e-12)

    def test_noise(self):
        rng = np.random.default_rng(0)
        assert abs(conditional_sharpe(rng.normal(0, 0.02, 10_000), rng.normal(0, 0.04, 10_000))) < 0.1

    def test_no_crisis(self):
        with pytest.raises(NoCrisisMonths):
            conditional_sharpe(np.ones(5), np.zeros(5))


class TestUtility:
    def test_alpha_one(self):
        assert cobb_douglas_utility(0.69, 0.82, 1.0) == 0.69

    def test_values(self):
        pure, dyn = cobb_douglas_utility(0.69, 0.82), cobb_douglas_utility(0.74, 0.83)
        assert pure == pytest.approx(0.714236504383622, abs=1e-12)
        assert dyn == pytest.approx(0.7571832431839937, abs=1e-12)
        assert dyn > pure

    def test_non_positive(self):
        with pytest.raises(NonPositiveInput):
            cobb_douglas_utility(0.0, 0.5)

    @given(st.floats(0.01, 5), st.floats(0.01, 1), st.floats(0.01, 1), st.floats(0.01, 0.99))
    def test_monotone(self, x, c, dx, a):
        u = cobb_douglas_utility(x, c, a)
        assert cobb_douglas_utility(x + dx, c, a) > u
        assert cobb_douglas_utility(x, c + dx, a) > u


def tables_from(sharpe_rows, rmdd_rows, corr_rows, cols):
    mk = lambda rows: pd.DataFrame(rows, index=[f"p{i}" for i in range(len(rows))], columns=cols, dtype=float)
    return {"sharpe": mk(sharpe_rows), "ret_over_maxdd": mk(rmdd_rows), "corr": mk(corr_rows)}


class TestAblation:
    def test_identical(self):
        t = tables_from([[0.5, 0.5]], [[0.3, 0.3]], [[0.8, 0.8]], ["A", "B"])
        res = ablation_zscores(t)
        assert list(res.table["overall"]) == [0.0, 0.0]
        assert len(res.degenerate) == 3

    def test_hand_built(self):
        cols = ["A", "B", "C"]
        s = [[1.0, 2.0, 3.0], [0.2, 0.2, 0.8]]
        r = [[0.5, 0.1, 0.3], [0.4, 0.6, 0.2]]
        c = [[0.9, 0.8, 0.7], [0.1, 0.3, 0.2]]
        res = ablation_zscores(tables_from(s, r, c, cols))

        def z(row):
            mu, sd = statistics.fmean(row), statistics.pstdev(row)
            return [(v - mu) / sd for v in row]

        expect = {}
        for name, rows in (("sharpe", s), ("ret_over_maxdd", r), ("corr", c)):
            zs = [z(row) for row in rows]
            expect[name] = [(a + b) / 2 for a, b in zip(*zs)]
        for k, col in enumerate(cols):
            for name in expect:
                assert res.table.loc[col, name] == pytest.approx(expect[name][k], abs=1e-12)
            overall = statistics.fmean([expect[n][k] for n in expect])
            assert res.table.loc[col, "overall"] == pytest.approx(overall, abs=1e-12)

    @given(st.floats(0.1, 10), st.floats(-5, 5), st.integers(0, 1000))
    def test_affine_invariant(self, a, b, seed):
        rng = np.random.default_rng(seed)
        cols = list("ABCD")
        base = tables_from(*(rng.normal(size=(3, 4)).tolist() for _ in range(3)), cols)
        moved = dict(base)
        moved["sharpe"] = base["sharpe"] * a + b
        r0, r1 = ablation_zscores(base), ablation_zscores(moved)
        pd.testing.assert_frame_equal(r0.table, r1.table, atol=1e-9, rtol=0)

    def test_fixture_ranking(self, data_dir):
        res = ablation_zscores(load_metric_tables(data_dir / "horizon_removal_metrics.csv"))
        assert res.ranking == ["No125", "No60", "All", "No250", "No20", "No500"]
        expect = {"No125": 0.80, "No60": 0.37, "All": 0.30, "No250": 0.03, "No20": -0.38, "No500": -1.12}
        for k, v in expect.items():
            assert abs(res.table.loc[k, "overall"] - v) <= 0.15


def planted_sleeves(seed=11, n=3000):
    rng = np.random.default_rng(seed)
    c, f, s = rng.normal(size=(3, n))
    e = rng.normal(size=(5, n))
    return pd.DataFrame({"20": c + f + 0.3 * e[0], "60": c + f + 0.3 * e[1], "125": 0.3 * (f + s) + e[2],
                         "250": c + s + 0.3 * e[3], "500": c + s + 0.3 * e[4]})


class TestCluster:
    def test_identical(self):
        x = np.random.default_rng(0).normal(size=100)
        assert horizon_cluster({"a": x, "b": x}).merges[0].distance == pytest.approx(0.0, abs=1e-15)

    def test_anticorrelated(self):
        x = np.random.default_rng(0).normal(size=100)
        assert horizon_cluster({"a": x, "b": -x}).merges[0].distance == pytest.approx(2.0, abs=1e-15)

    def test_planted_topology(self):
        t = horizon_cluster(planted_sleeves())
        assert {t.merges[0].members, t.merges[1].members} == {("20", "60"), ("250", "500")}
        assert t.merges[-1].right == ("125",) or t.merges[-1].left == ("125",)
        assert t.merges[-1].distance == max(m.distance for m in t.merges)

    @pytest.mark.parametrize("seed", range(5))
    def test_matches_scipy(self, seed):
        frame = pd.DataFrame(np.random.default_rng(seed).normal(size=(200, 6)), columns=list("abcdef"))
        d = correlation_distance(frame)
        ref = linkage(squareform(d, checks=False), method="average")
        mine = horizon_cluster(frame).linkage_matrix()
        np.testing.assert_allclose(mine[:, 2:], ref[:, 2:], atol=1e-12)
        np.testing.assert_array_equal(mine[:, :2], ref[:, :2])

    def test_monotone_distances(self):
        t = horizon_cluster(planted_sleeves(3))
        assert all(a.distance <= b.distance for a, b in zip(t.merges, t.merges[1:]))

    def test_overlap(self):
        with pytest.raises(InsufficientOverlap):
            horizon_cluster({"a": np.arange(30.0), "b": np.arange(30.0) ** 2})


class TestVariants:
    def test_parse(self):
        assert StrategyVariant.parse("No125") == StrategyVariant(VariantKind.LEAVE_ONE_OUT, 125)
        assert StrategyVariant.parse("LeaveOneOut(20)").label == "No20"
        assert StrategyVariant.parse("all").label == "All"
        assert StrategyVariant.parse("SingleHorizon(60)").name == "SingleHorizon(60)"
        assert [v.label for v in ablation_variants()] == ["All", "No20", "No60", "No125", "No250", "No500"]

    def test_unknown(self):
        with pytest.raises(UnknownVariant):
            StrategyVariant.parse("Momentum")
        with pytest.raises(UnknownVariant):
            StrategyVariant.parse("No77").check((20, 60))


@pytest.fixture(scope="module")
def universe():
    return synthetic_universe(SyntheticSpec(n_assets=3, n_days=2900, seed=4))


@pytest.fixture(scope="module")
def long_universe():
    return synthetic_universe(SyntheticSpec(n_assets=3, n_days=3700, seed=5))


class TestWalkForward:
    def test_pure_single_horizon_equal(self, universe):
        bench = np.random.default_rng(0).normal(0, 0.01, len(universe.return_dates))
        one = run_walk_forward(universe, "PureTrend", benchmark=bench, config=BacktestConfig(horizons=(60,)))
        two = run_walk_forward(universe, "SingleHorizon(60)", benchmark=bench, config=BacktestConfig(horizons=(20, 60)))
        np.testing.assert_array_equal(one.dates, two.dates)
        np.testing.assert_allclose(one.net, two.net, rtol=0, atol=1e-15)

    @pytest.mark.parametrize("decode", [False, True])
    def test_zero_scores_fee_only(self, decode):
        dates = pd.bdate_range("2000-01-03", periods=2800).values.astype("datetime64[D]")
        u = Universe(dates, ("A", "B"), np.full((2800, 2), 100.0), (inst(2, 3, "A"), inst(2, 3, "B")))
        rep = run_walk_forward(u, "PureTrend", benchmark=np.zeros(2799), config=BacktestConfig(decode=decode))
        np.testing.assert_array_equal(rep.gross, 0.0)
        np.testing.assert_allclose(rep.net, -FEE_DAILY, rtol=1e-15)

    def test_report_shape(self, universe):
        rep = run_walk_forward(universe, "DynamicTrend")
        assert len(rep.net) == len(rep.dates) == len(rep.turnover)
        spans = [(a, b) for _, a, b in rep.periods]
        assert all(b1 <= a2 for (_, b1), (a2, _) in zip(spans, spans[1:]))
        assert np.all(rep.net <= rep.gross)
        assert rep.to_dict() == run_walk_forward(universe, "DynamicTrend").to_dict()

    @pytest.mark.parametrize("variant", ["DynamicTrend", "OptimizedTrend"])
    def test_causality(self, long_universe, variant):
        universe = long_universe
        prep = prepare(universe, RollingConfig(), BacktestConfig())
        cut = prep.windows[1].test_start
        prices = universe.prices.copy()
        shock = np.random.default_rng(9).uniform(0.5, 1.5, prices[cut + 1:].shape)
        prices[cut + 1:] *= np.cumprod(shock, axis=0) ** 0.01
        bumped = Universe(universe.dates, universe.ids, prices, universe.instruments)
        assert len(prep.windows) >= 3
        a = run_walk_forward(universe, variant)
        b = run_walk_forward(bumped, variant)
        assert a.window_weights[:2] == b.window_weights[:2]
        assert a.window_weights != b.window_weights

    def test_unknown_variant(self, universe):
        with pytest.raises(UnknownVariant):
            run_walk_forward(universe, "LeaveOneOut(33)")
