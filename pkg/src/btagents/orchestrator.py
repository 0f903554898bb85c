"""Day loop, run journal assembly, and deterministic replay.

Each simulated day: slice the data window, compute the gauge snapshot,
invoke quants and signals, feed their views (never their allocations) to
the decision agent, rebalance all three tracked portfolios at the day's
close, mark at the next close, score the day, reflect, and inject the
feedback into the following day. Every nondeterministic input is recorded
verbatim, so the journal alone reproduces the run.
"""

from __future__ import annotations

import dataclasses
import hashlib
from dataclasses import dataclass, field
from datetime import date as Date
from typing import Mapping

from . import journal as journal_mod
from .agents import (
    Allocation,
    ChatClientConfig,
    CompletionClient,
    MarketState,
    build_decision_prompt,
    build_quants_prompt,
    build_signals_prompt,
    decide_with_retry,
    lint_bundle,
    parse_agent_output,
)
from .errors import DateNotFound, GapError, JournalCorrupt, WindowTooShort
from .indicators import IndicatorParams, snapshot
from .journal import RunJournal, canonical_json, dataset_digest, seal
from .market_data import MarketDataset, slice_window
from .portfolio import FeeModel, PortfolioState, mark, rebalance
from .reflection import (
    AGENT_ROLES,
    evaluate_day,
    load_weekly_templates,
    run_daily_reflection,
    weekly_feedback,
)
from .regime import RegimeParams

BASELINE_NAMES = ("buyhold", "static5050")


@dataclass
class RunConfig:
    """Everything a run needs; the journal header snapshots it verbatim."""

    start: Date
    end: Date
    initial_value_usd: float = 10_000.0
    lookback_days: int = 30
    neutral_band: float = 0.005
    fee_bps: float = 0.0
    indicator_params: IndicatorParams = field(default_factory=IndicatorParams)
    regime_params: RegimeParams = field(default_factory=RegimeParams)
    daily_feedback: bool = True
    weekly_feedback: bool = True
    praise_threshold: float = 0.0
    regret_threshold: float = 0.01
    parse_retry_limit: int = 1
    weekly_template_path: str | None = None
    client: ChatClientConfig = field(default_factory=ChatClientConfig)

    def __post_init__(self):
        if self.end < self.start:
            raise ValueError("end date before start date")
        if self.initial_value_usd <= 0:
            raise ValueError("initial value must be > 0")

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["start"] = self.start.isoformat()
        d["end"] = self.end.isoformat()
        return d

    @classmethod
    def from_dict(cls, d: Mapping) -> "RunConfig":
        kwargs = dict(d)
        kwargs["start"] = Date.fromisoformat(kwargs["start"])
        kwargs["end"] = Date.fromisoformat(kwargs["end"])
        kwargs["indicator_params"] = IndicatorParams(**kwargs.get("indicator_params", {}))
        kwargs["regime_params"] = RegimeParams(**kwargs.get("regime_params", {}))
        kwargs["client"] = ChatClientConfig(**kwargs.get("client", {}))
        return cls(**kwargs)


def _static5050_value(initial: float, p0: float, price: float) -> float:
    half = initial / 2.0
    return half + half * price / p0


def _buyhold_value(initial: float, p0: float, price: float) -> float:
    return initial * price / p0


def _inputs_digest(rec) -> str:
    payload = {
        "bar": [rec.bar.open, rec.bar.high, rec.bar.low, rec.bar.close, rec.bar.volume],
        "onchain": [rec.onchain.tx_count, rec.onchain.active_addresses, rec.onchain.transfer_volume_usd],
        "sentiment": [rec.sentiment.social_score_mean, rec.sentiment.fgi_value, rec.sentiment.fgi_label],
        "news": [[n.source, n.headline, n.summary] for n in rec.news],
    }
    return hashlib.sha256(canonical_json(payload).encode("utf-8")).hexdigest()


def _portfolio_dict(state: PortfolioState) -> dict:
    return {
        "btc_units": state.btc_units,
        "cash_usd": state.cash_usd,
        "mark_price": state.mark_price,
        "value_usd": state.value_usd,
    }


def run_backtest(
    config: RunConfig, dataset: MarketDataset, client: CompletionClient
) -> RunJournal:
    """Simulate the full pipeline over the configured date range."""
    days = [d for d in dataset.dates if config.start <= d <= config.end]
    if not days:
        raise DateNotFound(f"no trading days in {config.start}..{config.end}")
    min_win = config.indicator_params.min_window()
    if config.lookback_days < min_win:
        raise WindowTooShort(
            f"lookback_days {config.lookback_days} is shorter than the "
            f"indicator warm-up of {min_win} bars"
        )
    first_idx = dataset.index_of(days[0])
    if first_idx + 1 < min_win:
        raise WindowTooShort(
            f"need {min_win} bars of history up to {days[0]}, have {first_idx + 1}"
        )
    last_idx = dataset.index_of(days[-1])
    if last_idx + 1 >= len(dataset):
        raise WindowTooShort(f"need a bar after {days[-1]} to mark the last day")
    first_rec = dataset.record(days[0])
    if first_rec.onchain is None:
        raise GapError("onchain", days[0])
    if first_rec.sentiment is None:
        raise GapError("sentiment", days[0])

    templates = load_weekly_templates(config.weekly_template_path)
    fees = FeeModel(fee_bps=config.fee_bps)
    p0 = dataset.record(days[0]).bar.close
    ports = {
        role: PortfolioState.all_cash(days[0], config.initial_value_usd, p0)
        for role in AGENT_ROLES
    }
    prev_alloc: dict[str, float | None] = {role: None for role in AGENT_ROLES}
    counts = {role: (0, 0) for role in AGENT_ROLES}
    packets = []
    entries: list[dict] = []
    pending_daily = None  # reflection from day t, injected into day t+1
    active_weekly = None  # (WeeklyFeedback, first_day_index, last_day_index)

    header = seal(
        {
            "type": "header",
            "version": journal_mod.JOURNAL_VERSION,
            "config": config.to_dict(),
            "dataset_digest": dataset_digest(dataset),
            "n_days": len(days),
            "roles": list(AGENT_ROLES),
        }
    )

    for i, day in enumerate(days):
        idx = dataset.index_of(day)
        rec = dataset.records[idx]
        next_rec = dataset.records[idx + 1]
        close_t = rec.bar.close
        close_next = next_rec.bar.close

        daily_texts = {role: "" for role in AGENT_ROLES}
        if config.daily_feedback and pending_daily is not None:
            daily_texts = {role: pending_daily.text_for(role) for role in AGENT_ROLES}
        weekly_texts = {role: "" for role in AGENT_ROLES}
        if active_weekly is not None and active_weekly[1] <= i <= active_weekly[2]:
            weekly_texts = {role: active_weekly[0].text_for(role) for role in AGENT_ROLES}

        window = slice_window(dataset, day, config.lookback_days)
        snap = snapshot([r.bar for r in window], config.indicator_params)

        quants_bundle = build_quants_prompt(
            bars=[r.bar for r in window],
            snapshot=snap,
            onchain=[r.onchain for r in window],
            daily_feedback=daily_texts["quants"] or None,
            weekly_feedback=weekly_texts["quants"] or None,
        )
        signals_bundle = build_signals_prompt(
            news=rec.news,
            sentiment=rec.sentiment,
            daily_feedback=daily_texts["signals"] or None,
            weekly_feedback=weekly_texts["signals"] or None,
        )
        lint: dict[str, list[str]] = {
            "quants": lint_bundle(quants_bundle),
            "signals": lint_bundle(signals_bundle),
        }

        outcomes = {}
        outcomes["quants"] = decide_with_retry(
            client,
            quants_bundle,
            retry_limit=config.parse_retry_limit,
            fallback_allocation=prev_alloc["quants"] if prev_alloc["quants"] is not None else 0.5,
        )
        outcomes["signals"] = decide_with_retry(
            client,
            signals_bundle,
            retry_limit=config.parse_retry_limit,
            fallback_allocation=prev_alloc["signals"] if prev_alloc["signals"] is not None else 0.5,
        )

        decision_value = ports["decision"].btc_units * close_t + ports["decision"].cash_usd
        decision_bundle = build_decision_prompt(
            date=day,
            quants=outcomes["quants"].decision.prediction,
            signals=outcomes["signals"].decision.prediction,
            portfolio_value=decision_value,
            daily_feedback=daily_texts["decision"] or None,
            weekly_feedback=weekly_texts["decision"] or None,
        )
        lint["decision"] = lint_bundle(
            decision_bundle,
            upstream_allocations=[
                outcomes["quants"].decision.allocation.btc_fraction,
                outcomes["signals"].decision.allocation.btc_fraction,
            ],
        )
        outcomes["decision"] = decide_with_retry(
            client,
            decision_bundle,
            retry_limit=config.parse_retry_limit,
            fallback_allocation=prev_alloc["decision"] if prev_alloc["decision"] is not None else 0.5,
        )

        bundles = {"quants": quants_bundle, "signals": signals_bundle, "decision": decision_bundle}
        day_returns = {}
        new_states = {}
        for role in AGENT_ROLES:
            traded = rebalance(ports[role], outcomes[role].decision.allocation, close_t, fees)
            marked = mark(traded, next_rec.date, close_next)
            day_returns[role] = marked.value_usd / traded.value_usd - 1.0
            new_states[role] = marked

        bl_now = _static5050_value(config.initial_value_usd, p0, close_t)
        bl_next = _static5050_value(config.initial_value_usd, p0, close_next)
        baseline_return = bl_next / bl_now - 1.0
        btc_return = close_next / close_t - 1.0

        packet = evaluate_day(
            date=day,
            realized_btc_return=btc_return,
            decisions={role: outcomes[role].decision for role in AGENT_ROLES},
            portfolio_returns=day_returns,
            baseline_return=baseline_return,
            neutral_band=config.neutral_band,
            prior_counts=counts,
        )
        counts = {
            role: (
                counts[role][0] + (1 if packet.agents[role].correct else 0),
                counts[role][1] + 1,
            )
            for role in AGENT_ROLES
        }
        packets.append(packet)

        reflect_entry = None
        if config.daily_feedback:
            reflection = run_daily_reflection(
                client, packet, retry_limit=config.parse_retry_limit
            )
            pending_daily = reflection.feedback
            reflect_entry = {
                "system": reflection.bundle.system_text,
                "user": reflection.bundle.user_text,
                "attempts": [dict(a) for a in reflection.attempts],
                "feedback": {role: reflection.feedback.text_for(role) for role in AGENT_ROLES},
                "violations": [
                    {"role": v.role, "reason": v.reason} for v in reflection.violations
                ],
                "flags": list(reflection.flags),
            }
        else:
            pending_daily = None

        roles_entry = {}
        for role in AGENT_ROLES:
            out = outcomes[role]
            a = packet.agents[role]
            roles_entry[role] = {
                "system": bundles[role].system_text,
                "user": bundles[role].user_text,
                "raw": out.raw_used,
                "attempts": [dict(x) for x in out.attempts],
                "fallback": out.fallback_used,
                "state": a.state,
                "allocation": a.allocation,
                "reasoning": a.reasoning,
                "confidence": out.decision.confidence,
                "portfolio": _portfolio_dict(new_states[role]),
                "portfolio_return": a.portfolio_return,
                "correct": a.correct,
                "running_accuracy": a.running_accuracy,
            }

        entries.append(
            seal(
                {
                    "type": "day",
                    "seq": i,
                    "date": day.isoformat(),
                    "close": close_t,
                    "next_date": next_rec.date.isoformat(),
                    "next_close": close_next,
                    "inputs_digest": _inputs_digest(rec),
                    "btc_return": btc_return,
                    "daily_feedback_in": {k: v for k, v in daily_texts.items() if v},
                    "weekly_feedback_in": {k: v for k, v in weekly_texts.items() if v},
                    "roles": roles_entry,
                    "baseline": {
                        "static5050_value": bl_next,
                        "buyhold_value": _buyhold_value(config.initial_value_usd, p0, close_next),
                        "day_return_5050": baseline_return,
                    },
                    "reflect": reflect_entry,
                    "lint": lint,
                }
            )
        )

        ports = new_states
        for role in AGENT_ROLES:
            prev_alloc[role] = outcomes[role].decision.allocation.btc_fraction

        if config.weekly_feedback and (i + 1) % 7 == 0:
            wf = weekly_feedback(
                packets[i - 6 : i + 1],
                templates,
                praise_threshold=config.praise_threshold,
                regret_threshold=config.regret_threshold,
            )
            entries.append(
                seal(
                    {
                        "type": "weekly",
                        "after_day": day.isoformat(),
                        "week_start": wf.week_start.isoformat(),
                        "week_end": wf.week_end.isoformat(),
                        "texts": dict(wf.texts),
                        "kinds": dict(wf.kinds),
                        "stats": {
                            role: dataclasses.asdict(wf.stats[role]) for role in AGENT_ROLES
                        },
                    }
                )
            )
            active_weekly = (wf, i + 1, i + 7)

    return RunJournal(header=header, entries=entries)


# ---------------------------------------------------------------------------
# journal-derived outputs and replay

@dataclass
class RunOutputs:
    """Value paths and predictions reconstructed from a journal."""

    config: RunConfig
    neutral_band: float
    value_dates: list[Date]
    closes: list[float]
    values: dict[str, list[float]]
    predictions: dict[str, list[str]]
    fallback_days: dict[str, int]


def outputs_from_journal(
    journal: RunJournal,
    neutral_band: float | None = None,
    recompute: bool = False,
) -> RunOutputs:
    """Read (or re-derive) the run's value paths from its journal.

    With recompute=True every recorded response is re-parsed and every
    portfolio state re-simulated from the recorded closes; any divergence
    from the recorded numbers raises JournalCorrupt. Metrics downstream of
    the returned outputs are bit-identical either way.
    """
    journal.verify()
    config = RunConfig.from_dict(journal.header["config"])
    band = config.neutral_band if neutral_band is None else neutral_band
    days = journal.days
    if not days:
        raise JournalCorrupt("journal has no day records")

    first = days[0]
    start_date = Date.fromisoformat(first["date"])
    p0 = first["close"]
    initial = config.initial_value_usd

    value_dates = [start_date]
    closes = [p0]
    values: dict[str, list[float]] = {name: [initial] for name in (*AGENT_ROLES, *BASELINE_NAMES)}
    predictions: dict[str, list[str]] = {role: [] for role in AGENT_ROLES}
    fallback_days = {role: 0 for role in AGENT_ROLES}

    sim_ports = {
        role: PortfolioState.all_cash(start_date, initial, p0) for role in AGENT_ROLES
    }
    prev_alloc: dict[str, float | None] = {role: None for role in AGENT_ROLES}

    for day in days:
        date = Date.fromisoformat(day["date"])
        next_date = Date.fromisoformat(day["next_date"])
        close_t = day["close"]
        close_next = day["next_close"]
        value_dates.append(next_date)
        closes.append(close_next)

        for role in AGENT_ROLES:
            role_rec = day["roles"][role]
            predictions[role].append(role_rec["state"])
            if role_rec["fallback"]:
                fallback_days[role] += 1

            if recompute:
                if role_rec["fallback"]:
                    expected = prev_alloc[role] if prev_alloc[role] is not None else 0.5
                    state_name = MarketState.NEUTRAL.value
                else:
                    decision = parse_agent_output(role_rec["raw"], role=role)
                    expected = decision.allocation.btc_fraction
                    state_name = decision.prediction.state.value
                if expected != role_rec["allocation"]:
                    raise JournalCorrupt(
                        f"{date} {role}: recorded allocation {role_rec['allocation']} "
                        f"does not reproduce ({expected})"
                    )
                if state_name != role_rec["state"]:
                    raise JournalCorrupt(f"{date} {role}: recorded state does not reproduce")
                traded = rebalance(
                    sim_ports[role],
                    Allocation(btc_fraction=expected),
                    close_t,
                    FeeModel(fee_bps=config.fee_bps),
                )
                marked = mark(traded, next_date, close_next)
                recorded = role_rec["portfolio"]
                if (
                    marked.btc_units != recorded["btc_units"]
                    or marked.cash_usd != recorded["cash_usd"]
                    or marked.mark_price != recorded["mark_price"]
                ):
                    raise JournalCorrupt(
                        f"{date} {role}: recorded portfolio state does not reproduce"
                    )
                sim_ports[role] = marked
                values[role].append(marked.value_usd)
            else:
                values[role].append(day["roles"][role]["portfolio"]["value_usd"])
            prev_alloc[role] = day["roles"][role]["allocation"]

        bl5050 = _static5050_value(initial, p0, close_next)
        blbh = _buyhold_value(initial, p0, close_next)
        if recompute:
            if bl5050 != day["baseline"]["static5050_value"]:
                raise JournalCorrupt(f"{date}: recorded 50/50 baseline does not reproduce")
            if blbh != day["baseline"]["buyhold_value"]:
                raise JournalCorrupt(f"{date}: recorded buy-and-hold does not reproduce")
        values["static5050"].append(day["baseline"]["static5050_value"])
        values["buyhold"].append(day["baseline"]["buyhold_value"])

    return RunOutputs(
        config=config,
        neutral_band=band,
        value_dates=value_dates,
        closes=closes,
        values=values,
        predictions=predictions,
        fallback_days=fallback_days,
    )


def replay(journal: RunJournal, neutral_band: float | None = None) -> RunOutputs:
    """Recompute the whole run from recorded responses; no network involved."""
    return outputs_from_journal(journal, neutral_band=neutral_band, recompute=True)
