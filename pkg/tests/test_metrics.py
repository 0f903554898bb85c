import math
import random
from datetime import date, timedelta

import pytest

from btagents.errors import (
    CoverageError,
    LengthMismatch,
    NonPositiveValue,
    ZeroDispersion,
)
from btagents.metrics import (
    ReturnSeries,
    accuracy,
    daily_returns,
    mean_std,
    prediction_correct,
    regime_report,
    regret,
    sharpe,
    total_return,
)
from btagents.regime import RegimeLabel, RegimeSegmentation, RegimeSpan


def dates_for(n, start=date(2024, 1, 2)):
    return [start + timedelta(days=i) for i in range(n)]


class TestDailyReturns:
    def test_ten_percent(self):
        series = daily_returns(dates_for(2), [100.0, 110.0])
        assert series.returns == (pytest.approx(0.10, abs=1e-12),)

    def test_constant_values_zero(self):
        series = daily_returns(dates_for(4), [50.0] * 4)
        assert all(r == 0.0 for r in series.returns)

    def test_matches_ratio_oracle(self):
        rng = random.Random(41)
        values = [rng.uniform(1_000.0, 50_000.0) for _ in range(80)]
        series = daily_returns(dates_for(80), values)
        for i, r in enumerate(series.returns):
            assert r == pytest.approx(values[i + 1] / values[i] - 1.0, abs=1e-12)

    def test_rejects_non_positive(self):
        with pytest.raises(NonPositiveValue):
            daily_returns(dates_for(2), [100.0, 0.0])


class TestSharpe:
    def test_table_convention_value(self):
        # two-point series with sample mean 0.08% and sample std 1.582%
        m, s = 0.0008, 0.01582
        d = s / math.sqrt(2.0)
        returns = [m + d, m - d]
        mu, sigma = mean_std(returns)
        assert mu == pytest.approx(m, abs=1e-15)
        assert sigma == pytest.approx(s, abs=1e-12)
        value = sharpe(returns)
        assert value == pytest.approx(0.0506, abs=1e-4)
        assert abs(value - 0.0504) <= 0.0005

    def test_constant_returns_raise(self):
        with pytest.raises(ZeroDispersion):
            sharpe([0.01] * 10)

    def test_hand_series(self):
        returns = [0.01, -0.02, 0.005, 0.03, -0.01]
        n = len(returns)
        mu = sum(returns) / n
        var = sum((r - mu) ** 2 for r in returns) / (n - 1)
        assert sharpe(returns) == pytest.approx(mu / math.sqrt(var), abs=1e-12)

    def test_scale_invariance(self):
        rng = random.Random(42)
        returns = [rng.uniform(-0.05, 0.05) for _ in range(50)]
        assert sharpe([3.0 * r for r in returns]) == pytest.approx(sharpe(returns), rel=1e-9)


class TestAccuracy:
    def test_all_bullish_all_up(self):
        assert accuracy(["bullish"] * 5, [0.01] * 5, 0.005) == 1.0

    def test_all_neutral_all_flat(self):
        assert accuracy(["neutral"] * 5, [0.0] * 5, 0.005) == 1.0

    def test_matches_counting_oracle(self):
        rng = random.Random(43)
        states = [rng.choice(["bullish", "bearish", "neutral"]) for _ in range(100)]
        rets = [rng.uniform(-0.03, 0.03) for _ in range(100)]
        band = 0.005
        correct = 0
        for s, r in zip(states, rets):
            if s == "bullish" and r > band:
                correct += 1
            elif s == "bearish" and r < -band:
                correct += 1
            elif s == "neutral" and abs(r) <= band:
                correct += 1
        assert accuracy(states, rets, band) == correct / 100

    def test_permutation_equivariance(self):
        rng = random.Random(44)
        states = [rng.choice(["bullish", "bearish", "neutral"]) for _ in range(60)]
        rets = [rng.uniform(-0.02, 0.02) for _ in range(60)]
        base = accuracy(states, rets, 0.005)
        order = list(range(60))
        rng.shuffle(order)
        assert accuracy([states[i] for i in order], [rets[i] for i in order], 0.005) == base

    def test_length_mismatch(self):
        with pytest.raises(LengthMismatch):
            accuracy(["bullish"], [0.01, 0.02], 0.005)

    def test_band_edges(self):
        assert prediction_correct("neutral", 0.005, 0.005) is True
        assert prediction_correct("bullish", 0.005, 0.005) is False
        assert prediction_correct("bearish", -0.005, 0.005) is False


class TestRegret:
    def test_equal_is_zero(self):
        assert regret([100.0, 105.0], [100.0, 105.0]) == 0.0

    def test_shortfall(self):
        assert regret([100.0, 105.0], [100.0, 108.0]) == pytest.approx(0.03, abs=1e-12)

    def test_outperformance_clamped(self):
        assert regret([100.0, 110.0], [100.0, 102.0]) == 0.0

    def test_always_non_negative(self):
        rng = random.Random(45)
        for _ in range(200):
            a = [100.0]
            b = [100.0]
            for _ in range(10):
                a.append(a[-1] * (1.0 + rng.uniform(-0.05, 0.05)))
                b.append(b[-1] * (1.0 + rng.uniform(-0.05, 0.05)))
            value = regret(a, b)
            assert value >= 0.0
            if a[-1] / a[0] >= b[-1] / b[0]:
                assert value == 0.0

    def test_length_mismatch(self):
        with pytest.raises(LengthMismatch):
            regret([1.0, 2.0], [1.0])


class TestTotalReturnComposition:
    def test_composes_across_split(self):
        rng = random.Random(46)
        rets = [rng.uniform(-0.04, 0.04) for _ in range(30)]
        for split in (1, 7, 15, 29):
            left = total_return(rets[:split])
            right = total_return(rets[split:])
            assert (1.0 + left) * (1.0 + right) - 1.0 == pytest.approx(
                total_return(rets), abs=1e-9
            )


def single_span_segmentation(dates):
    return RegimeSegmentation(
        spans=(RegimeSpan(dates[0], dates[-1], RegimeLabel.SIDEWAYS),)
    )


class TestRegimeReport:
    def test_single_regime_equals_all_periods(self):
        rng = random.Random(47)
        values = [10_000.0]
        for _ in range(40):
            values.append(values[-1] * (1.0 + rng.uniform(-0.02, 0.02)))
        ds = dates_for(41)
        series = daily_returns(ds, values)
        preds = [rng.choice(["bullish", "bearish", "neutral"]) for _ in range(40)]
        report = regime_report(series, single_span_segmentation(series.dates), preds)
        assert len(report.per_regime) == 1
        row = report.per_regime[0]
        assert row.total_return == report.all_periods.total_return
        assert row.sharpe == report.all_periods.sharpe
        assert row.accuracy == report.all_periods.accuracy

    def test_span_with_zero_returns_totals_zero(self):
        ds = dates_for(11)
        values = [100.0]
        for i in range(10):
            values.append(values[-1] * (1.05 if i < 5 else 1.0))
        series = daily_returns(ds, values)
        seg = RegimeSegmentation(
            spans=(
                RegimeSpan(ds[0], ds[5], RegimeLabel.BULLISH),
                RegimeSpan(ds[6], ds[10], RegimeLabel.SIDEWAYS),
            )
        )
        report = regime_report(series, seg)
        by_label = {r.label: r for r in report.per_regime}
        assert by_label["Sideways"].total_return == 0.0
        assert by_label["Bullish"].total_return == pytest.approx(1.05 ** 5 - 1.0, abs=1e-9)

    def test_cells_equal_slice_recomputation(self):
        rng = random.Random(48)
        n = 120
        values = [10_000.0]
        for _ in range(n):
            values.append(values[-1] * (1.0 + rng.uniform(-0.02, 0.02)))
        ds = dates_for(n + 1)
        series = daily_returns(ds, values)
        preds = [rng.choice(["bullish", "bearish", "neutral"]) for _ in range(n)]
        bounds = [(0, 39, RegimeLabel.BULLISH), (40, 79, RegimeLabel.SIDEWAYS), (80, n - 1, RegimeLabel.BEARISH)]
        seg = RegimeSegmentation(
            spans=tuple(RegimeSpan(series.dates[a], series.dates[b], lab) for a, b, lab in bounds)
        )
        report = regime_report(series, seg, preds)
        for (a, b, lab), row in zip(bounds, report.per_regime):
            sliced = list(series.returns[a : b + 1])
            sliced_preds = preds[a : b + 1]
            assert row.label == lab.value
            assert row.total_return == pytest.approx(total_return(sliced), abs=1e-12)
            mu, sigma = mean_std(sliced)
            assert row.mean_daily_pct == pytest.approx(100.0 * mu, abs=1e-12)
            assert row.std_daily_pct == pytest.approx(100.0 * sigma, abs=1e-12)
            assert row.sharpe == pytest.approx(mu / sigma, abs=1e-12)
            assert row.accuracy == accuracy(sliced_preds, sliced, 0.005)

    def test_same_label_spans_concatenate(self):
        ds = dates_for(9)
        values = [100.0, 101.0, 102.0, 103.0, 104.0, 105.0, 106.0, 107.0, 108.0]
        series = daily_returns(ds, values)
        seg = RegimeSegmentation(
            spans=(
                RegimeSpan(ds[1], ds[3], RegimeLabel.SIDEWAYS),
                RegimeSpan(ds[4], ds[6], RegimeLabel.BULLISH),
                RegimeSpan(ds[7], ds[8], RegimeLabel.SIDEWAYS),
            )
        )
        report = regime_report(series, seg)
        assert [r.label for r in report.per_regime] == ["Sideways", "Bullish"]
        sideways = report.per_regime[0]
        # spans 1 and 3 concatenated: returns at indices 0,1,2 and 6,7
        expected = [series.returns[i] for i in (0, 1, 2, 6, 7)]
        assert sideways.n_days == 5
        assert sideways.total_return == pytest.approx(total_return(expected), abs=1e-12)

    def test_uncovered_dates_raise(self):
        ds = dates_for(5)
        values = [100.0, 101.0, 102.0, 103.0, 104.0]
        series = daily_returns(ds, values)
        seg = RegimeSegmentation(spans=(RegimeSpan(ds[1], ds[2], RegimeLabel.BULLISH),))
        with pytest.raises(CoverageError):
            regime_report(series, seg)


class TestReturnSeriesType:
    def test_rejects_unsorted_dates(self):
        ds = dates_for(3)
        with pytest.raises(ValueError):
            ReturnSeries(dates=(ds[1], ds[0]), returns=(0.1, 0.2))

    def test_rejects_length_mismatch(self):
        ds = dates_for(2)
        with pytest.raises(LengthMismatch):
            ReturnSeries(dates=tuple(ds), returns=(0.1,))
