"""Evaluation quantities: returns, Sharpe, prediction accuracy, regret.

The Sharpe convention throughout is mean daily return over sample standard
deviation, risk-free rate zero, not annualized.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from datetime import date as Date
from typing import Sequence

from .errors import (
    CoverageError,
    LengthMismatch,
    NonPositiveValue,
    ZeroDispersion,
)
from .regime import RegimeSegmentation


@dataclass(frozen=True)
class ReturnSeries:
    dates: tuple[Date, ...]
    returns: tuple[float, ...]

    def __post_init__(self):
        if len(self.dates) != len(self.returns):
            raise LengthMismatch("dates and returns differ in length")
        if any(b <= a for a, b in zip(self.dates, self.dates[1:])):
            raise ValueError("return dates must be strictly increasing")

    def __len__(self) -> int:
        return len(self.returns)


def daily_returns(dates: Sequence[Date], values: Sequence[float]) -> ReturnSeries:
    """Simple returns r_t = V_t / V_{t-1} - 1, dated by the later value."""
    if len(dates) != len(values):
        raise LengthMismatch("dates and values differ in length")
    if len(values) < 2:
        raise ValueError("need at least two values")
    if any(v <= 0 for v in values):
        raise NonPositiveValue("values must be > 0")
    rets = tuple(cur / prev - 1.0 for prev, cur in zip(values, values[1:]))
    return ReturnSeries(dates=tuple(dates[1:]), returns=rets)


def total_return(returns: Sequence[float]) -> float:
    """Compounded return: product of (1 + r_t) minus 1."""
    acc = 1.0
    for r in returns:
        acc *= 1.0 + r
    return acc - 1.0


def mean_std(returns: Sequence[float]) -> tuple[float, float]:
    """(mean, sample standard deviation) of a return series."""
    n = len(returns)
    if n < 2:
        raise ZeroDispersion("need at least two returns for dispersion")
    mu = math.fsum(returns) / n
    var = math.fsum((r - mu) ** 2 for r in returns) / (n - 1)
    return mu, math.sqrt(var)


def sharpe(returns: Sequence[float]) -> float:
    """mean(r) / sample_std(r); raises ZeroDispersion on constant series."""
    mu, sigma = mean_std(returns)
    if sigma == 0.0:
        raise ZeroDispersion("constant returns have no dispersion")
    return mu / sigma


def prediction_correct(state: str, realized_return: float, neutral_band: float) -> bool:
    """Scoring rule for one day.

    bullish is right above +band, bearish below -band, neutral inside it.
    `state` is the lowercase market-state string.
    """
    if state == "bullish":
        return realized_return > neutral_band
    if state == "bearish":
        return realized_return < -neutral_band
    if state == "neutral":
        return abs(realized_return) <= neutral_band
    raise ValueError(f"unknown market state {state!r}")


def accuracy(
    predictions: Sequence[str],
    realized: Sequence[float],
    neutral_band: float = 0.005,
) -> float:
    """Fraction of days whose predicted state matched the realized move."""
    if len(predictions) != len(realized):
        raise LengthMismatch(
            f"{len(predictions)} predictions vs {len(realized)} returns"
        )
    if not predictions:
        raise ValueError("accuracy of an empty series is undefined")
    correct = sum(
        1 for p, r in zip(predictions, realized) if prediction_correct(p, r, neutral_band)
    )
    return correct / len(predictions)


def regret(agent_values: Sequence[float], baseline_values: Sequence[float]) -> float:
    """Clamped shortfall of the agent's total return versus the baseline's."""
    if len(agent_values) != len(baseline_values):
        raise LengthMismatch("agent and baseline value series differ in length")
    if len(agent_values) < 2:
        return 0.0
    agent_total = agent_values[-1] / agent_values[0] - 1.0
    baseline_total = baseline_values[-1] / baseline_values[0] - 1.0
    return max(0.0, baseline_total - agent_total)


@dataclass(frozen=True)
class MetricsRow:
    """One table row: a regime label (or All Periods) for one portfolio."""

    label: str
    n_days: int
    total_return: float
    mean_daily_pct: float | None
    std_daily_pct: float | None
    sharpe: float | None
    accuracy: float | None
    regret: float | None


@dataclass(frozen=True)
class MetricsReport:
    all_periods: MetricsRow
    per_regime: tuple[MetricsRow, ...] = field(default_factory=tuple)


def _row(
    label: str,
    returns: Sequence[float],
    predictions: Sequence[str] | None,
    baseline_returns: Sequence[float] | None,
    neutral_band: float,
) -> MetricsRow:
    mean_pct = std_pct = sharpe_value = None
    if len(returns) >= 2:
        mu, sigma = mean_std(returns)
        mean_pct = 100.0 * mu
        std_pct = 100.0 * sigma
        if sigma > 0.0:
            sharpe_value = mu / sigma
    acc = None
    if predictions is not None and len(predictions) == len(returns) and returns:
        acc = accuracy(predictions, returns, neutral_band)
    reg = None
    if baseline_returns is not None:
        if len(baseline_returns) != len(returns):
            raise LengthMismatch("baseline returns misaligned with agent returns")
        reg = max(0.0, total_return(baseline_returns) - total_return(returns))
    return MetricsRow(
        label=label,
        n_days=len(returns),
        total_return=total_return(returns),
        mean_daily_pct=mean_pct,
        std_daily_pct=std_pct,
        sharpe=sharpe_value,
        accuracy=acc,
        regret=reg,
    )


def regime_report(
    series: ReturnSeries,
    segmentation: RegimeSegmentation | None = None,
    predictions: Sequence[str] | None = None,
    baseline: ReturnSeries | None = None,
    neutral_band: float = 0.005,
) -> MetricsReport:
    """All-period metrics plus one aggregated row per regime label.

    Days sharing a label are concatenated across spans before computing the
    row, so repeated sideways periods report as one line.
    """
    if predictions is not None and len(predictions) != len(series):
        raise LengthMismatch("one prediction per return required")
    if baseline is not None and baseline.dates != series.dates:
        raise LengthMismatch("baseline dates must match the return dates")

    base_returns = baseline.returns if baseline is not None else None
    all_row = _row("All Periods", series.returns, predictions, base_returns, neutral_band)
    if segmentation is None:
        return MetricsReport(all_periods=all_row)

    if not segmentation.covers(series.dates):
        raise CoverageError("segmentation does not cover all return dates")

    by_label: dict[str, list[int]] = {}
    order: list[str] = []
    for i, d in enumerate(series.dates):
        lab = segmentation.label_for(d).value
        if lab not in by_label:
            by_label[lab] = []
            order.append(lab)
        by_label[lab].append(i)

    rows = []
    for lab in order:
        idx = by_label[lab]
        rows.append(
            _row(
                lab,
                [series.returns[i] for i in idx],
                [predictions[i] for i in idx] if predictions is not None else None,
                [base_returns[i] for i in idx] if base_returns is not None else None,
                neutral_band,
            )
        )
    return MetricsReport(all_periods=all_row, per_regime=tuple(rows))
