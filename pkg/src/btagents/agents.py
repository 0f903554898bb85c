"""Prompt construction, chat-completion transport, and decision parsing.

Each agent sees only its own inputs: the quants prompt carries prices,
gauges and chain activity; the signals prompt carries press items and mood
scores; the decision prompt carries the two upstream views (state and
reasoning only, never their allocations) plus the portfolio value.
`lint_bundle` enforces those boundaries on every generated prompt.
"""

from __future__ import annotations

import json
import os
import re
import time
from dataclasses import dataclass, field, replace
from datetime import date as Date
from enum import Enum
from typing import Protocol, Sequence

import requests

from .errors import (
    BtAgentsError,
    InvariantViolation,
    NetworkError,
    ParseError,
    RangeError,
    SchemaError,
)
from .indicators import IndicatorSnapshot
from .market_data import Bar, NewsItem, OnChainDaily, SentimentDaily
from .portfolio import Allocation


class MarketState(str, Enum):
    BULLISH = "bullish"
    BEARISH = "bearish"
    NEUTRAL = "neutral"


class Role(str, Enum):
    QUANTS = "quants"
    SIGNALS = "signals"
    DECISION = "decision"
    REFLECT = "reflect"


@dataclass(frozen=True)
class Prediction:
    state: MarketState
    reasoning: str

    def __post_init__(self):
        if not self.reasoning.strip():
            raise InvariantViolation("prediction reasoning must be non-empty")


@dataclass(frozen=True)
class AgentDecision:
    prediction: Prediction
    allocation: Allocation
    confidence: float | None = None


@dataclass(frozen=True)
class PromptBundle:
    role: Role
    date: Date
    system_text: str
    user_text: str


@dataclass(frozen=True)
class ChatClientConfig:
    base_url: str = "http://localhost:8000/v1"
    model_name: str = "deepseek-r1"
    api_key_env_var: str = "BTAGENTS_API_KEY"
    timeout: float = 120.0
    max_retries: int = 3
    temperature: float = 0.0
    backoff_seconds: float = 0.5

    def __post_init__(self):
        if self.max_retries < 0:
            raise InvariantViolation("max_retries must be >= 0")


@dataclass(frozen=True)
class InvokeResult:
    text: str
    attempts: int


class CompletionClient(Protocol):
    def complete(self, bundle: PromptBundle) -> InvokeResult: ...


# ---------------------------------------------------------------------------
# prompt templates

OUTPUT_CONTRACT = (
    "Respond with exactly one JSON object of the form\n"
    '{"state": "bullish" | "bearish" | "neutral", '
    '"allocation_btc_pct": <number between 0 and 100>, '
    '"reasoning": "<your full reasoning>"}\n'
    "You may reason in prose first, but the JSON object must appear in your reply."
)

DAILY_FEEDBACK_HEADER = "Short-term feedback on your previous decision:"
WEEKLY_FEEDBACK_HEADER = "Weekly review guidance (applies all week):"

QUANTS_SYSTEM = (
    "You are the quantitative analyst of a Bitcoin trading desk. Using only "
    "the price history, gauge readings, and chain activity provided, classify "
    "the NEXT day's market state as bullish, bearish, or neutral, and propose "
    "a BTC/cash split for the portfolio you manage.\n\n" + OUTPUT_CONTRACT
)

SIGNALS_SYSTEM = (
    "You are the mood analyst of a Bitcoin trading desk. Using only the press "
    "coverage and crowd-mood scores provided, classify the NEXT day's market "
    "state as bullish, bearish, or neutral, and propose a BTC/cash split for "
    "the portfolio you manage.\n\n" + OUTPUT_CONTRACT
)

DECISION_SYSTEM = (
    "You are the final decision maker of a Bitcoin trading desk. Two analysts "
    "report their market view and reasoning; they do not share their own "
    "position sizes with you. Weigh both views and set the desk's BTC/cash "
    "split for the NEXT day. Treat daily market inputs as the primary basis "
    "for decision-making; use short-term and long-term feedback only to "
    "refine your reasoning. Your mandate is to beat a passive benchmark that "
    "keeps half its value in BTC and half in cash.\n\n" + OUTPUT_CONTRACT
)


def _feedback_sections(daily_feedback: str | None, weekly_feedback: str | None) -> str:
    parts = []
    if daily_feedback:
        parts.append(f"{DAILY_FEEDBACK_HEADER}\n{daily_feedback}")
    if weekly_feedback:
        parts.append(f"{WEEKLY_FEEDBACK_HEADER}\n{weekly_feedback}")
    return ("\n\n" + "\n\n".join(parts)) if parts else ""


def build_quants_prompt(
    bars: Sequence[Bar],
    snapshot: IndicatorSnapshot,
    onchain: Sequence[OnChainDaily],
    daily_feedback: str | None = None,
    weekly_feedback: str | None = None,
) -> PromptBundle:
    """Price window, full gauge set, and chain activity for one date."""
    if snapshot.date != bars[-1].date:
        raise InvariantViolation("snapshot date must match the window's last bar")
    shown = bars[-10:]
    price_rows = "\n".join(
        f"{b.date.isoformat()}  open {b.open:.2f}  high {b.high:.2f}  "
        f"low {b.low:.2f}  close {b.close:.2f}  volume {b.volume:.2f}"
        for b in shown
    )
    adx_line = (
        f"ADX: {snapshot.adx:.2f}"
        if not snapshot.adx_degenerate
        else "ADX: not defined (flat range)"
    )
    chain_rows = "\n".join(
        f"{o.date.isoformat()}  transactions {o.tx_count}  "
        f"active addresses {o.active_addresses}  transfer volume {o.transfer_volume_usd:,.0f} USD"
        for o in onchain[-5:]
    )
    user = (
        f"Date: {snapshot.date.isoformat()}\n\n"
        f"Daily prices, last {len(shown)} of a {len(bars)}-day window (oldest first):\n"
        f"{price_rows}\n\n"
        "Gauge readings for the latest close:\n"
        f"SMA: {snapshot.sma:.2f}\n"
        f"EMA: {snapshot.ema:.2f}\n"
        f"MACD: line {snapshot.macd_line:.2f}, signal {snapshot.macd_signal_line:.2f}, "
        f"histogram {snapshot.macd_hist:.2f}\n"
        f"RSI: {snapshot.rsi:.2f}\n"
        f"Bollinger: upper {snapshot.bb_upper:.2f}, mid {snapshot.bb_mid:.2f}, "
        f"lower {snapshot.bb_lower:.2f}\n"
        f"VWAP: {snapshot.vwap:.2f}, with {snapshot.pct_below_vwap * 100:.0f}% of recent "
        "closes below it\n"
        f"{adx_line}\n\n"
        "Chain activity, most recent days:\n"
        f"{chain_rows}"
        f"{_feedback_sections(daily_feedback, weekly_feedback)}"
    )
    return PromptBundle(
        role=Role.QUANTS, date=snapshot.date, system_text=QUANTS_SYSTEM, user_text=user
    )


def build_signals_prompt(
    news: Sequence[NewsItem],
    sentiment: SentimentDaily,
    daily_feedback: str | None = None,
    weekly_feedback: str | None = None,
) -> PromptBundle:
    """Press items and crowd-mood scores for one date."""
    if news:
        news_block = "\n".join(
            f"- [{n.source}] {n.headline}" + (f" :: {n.summary}" if n.summary else "")
            for n in news
        )
    else:
        news_block = "No news available for this date."
    user = (
        f"Date: {sentiment.date.isoformat()}\n\n"
        "Crowd-mood readings:\n"
        f"Fear & Greed Index: {sentiment.fgi_value} ({sentiment.fgi_label})\n"
        f"Aggregate social score (scale -1 to +1): {sentiment.social_score_mean:+.4f}\n\n"
        "Press coverage:\n"
        f"{news_block}"
        f"{_feedback_sections(daily_feedback, weekly_feedback)}"
    )
    return PromptBundle(
        role=Role.SIGNALS, date=sentiment.date, system_text=SIGNALS_SYSTEM, user_text=user
    )


def build_decision_prompt(
    date: Date,
    quants: Prediction,
    signals: Prediction,
    portfolio_value: float,
    daily_feedback: str | None = None,
    weekly_feedback: str | None = None,
) -> PromptBundle:
    """Upstream views (state and reasoning only) plus the current book value."""
    user = (
        f"Date: {date.isoformat()}\n\n"
        f"Technical analyst's view: {quants.state.value}\n"
        f"Technical analyst's reasoning: {quants.reasoning}\n\n"
        f"Mood analyst's view: {signals.state.value}\n"
        f"Mood analyst's reasoning: {signals.reasoning}\n\n"
        f"Current portfolio value: {portfolio_value:,.2f} USD\n"
        "Set the BTC/cash split that you expect to beat the passive half-BTC, "
        "half-cash benchmark over the next day."
        f"{_feedback_sections(daily_feedback, weekly_feedback)}"
    )
    return PromptBundle(
        role=Role.DECISION, date=date, system_text=DECISION_SYSTEM, user_text=user
    )


# ---------------------------------------------------------------------------
# prompt linting

INDICATOR_TERMS = (
    "macd",
    "rsi",
    "vwap",
    "adx",
    "bollinger",
    "moving average",
    "sma",
    "ema",
    "macd_line",
    "macd_signal_line",
    "macd_hist",
    "bb_upper",
    "bb_mid",
    "bb_lower",
    "pct_below_vwap",
)

NEWS_SENTIMENT_TERMS = (
    "news",
    "headline",
    "sentiment",
    "fear",
    "greed",
    "fgi",
    "social",
    "press",
)


def _contains_term(text: str, term: str) -> bool:
    return re.search(rf"(?<![a-z0-9_]){re.escape(term)}(?![a-z0-9_])", text, re.IGNORECASE) is not None


def allocation_tokens(btc_fraction: float) -> list[str]:
    """Digit-bearing spellings of an allocation that must not leak downstream."""
    pct = btc_fraction * 100.0
    tokens = {f"{pct:.0f}%", f"{pct:.1f}%", f"{pct:.2f}%", f"{btc_fraction:.2f}", f"{btc_fraction:.3f}"}
    return sorted(tokens)


def _contains_token(text: str, token: str) -> bool:
    return re.search(rf"(?<![\d.]){re.escape(token)}(?!\d)", text) is not None


def lint_bundle(
    bundle: PromptBundle,
    upstream_allocations: Sequence[float] = (),
) -> list[str]:
    """Scope violations in a prompt: empty list means the bundle is clean."""
    text = bundle.system_text + "\n" + bundle.user_text
    violations = []
    if bundle.role == Role.SIGNALS:
        for term in INDICATOR_TERMS:
            if _contains_term(text, term):
                violations.append(f"signals prompt mentions indicator term '{term}'")
    elif bundle.role == Role.QUANTS:
        for term in NEWS_SENTIMENT_TERMS:
            if _contains_term(text, term):
                violations.append(f"quants prompt mentions news/sentiment term '{term}'")
    elif bundle.role == Role.DECISION:
        for frac in upstream_allocations:
            for token in allocation_tokens(frac):
                if _contains_token(text, token):
                    violations.append(
                        f"decision prompt leaks upstream allocation token '{token}'"
                    )
    return violations


# ---------------------------------------------------------------------------
# transports

class ChatClient:
    """Minimal chat-completions client with bounded retries.

    Retries transport failures and 5xx responses with exponential backoff;
    4xx responses fail immediately. `max_retries` caps total attempts.
    """

    def __init__(self, config: ChatClientConfig, session=None):
        self.config = config
        self._session = session if session is not None else requests.Session()

    def _headers(self) -> dict[str, str]:
        headers = {"Content-Type": "application/json"}
        key = os.environ.get(self.config.api_key_env_var, "")
        if key:
            headers["Authorization"] = f"Bearer {key}"
        return headers

    def complete(self, bundle: PromptBundle) -> InvokeResult:
        url = self.config.base_url.rstrip("/") + "/chat/completions"
        payload = {
            "model": self.config.model_name,
            "messages": [
                {"role": "system", "content": bundle.system_text},
                {"role": "user", "content": bundle.user_text},
            ],
            "temperature": self.config.temperature,
        }
        attempts_allowed = max(1, self.config.max_retries)
        last_error: Exception | None = None
        timed_out = False
        for attempt in range(1, attempts_allowed + 1):
            if attempt > 1 and self.config.backoff_seconds > 0:
                time.sleep(self.config.backoff_seconds * 2 ** (attempt - 2))
            try:
                resp = self._session.post(
                    url, json=payload, headers=self._headers(), timeout=self.config.timeout
                )
            except requests.Timeout as exc:
                last_error, timed_out = exc, True
                continue
            except requests.RequestException as exc:
                last_error, timed_out = exc, False
                continue
            if resp.status_code >= 500:
                last_error = NetworkError(f"server error {resp.status_code}", attempt)
                continue
            if resp.status_code >= 400:
                raise NetworkError(f"request rejected: {resp.status_code}", attempt)
            try:
                content = resp.json()["choices"][0]["message"]["content"]
            except (ValueError, KeyError, IndexError, TypeError) as exc:
                raise SchemaError(f"malformed completion body: {exc}") from exc
            if not isinstance(content, str):
                raise SchemaError("completion content is not text")
            return InvokeResult(text=content, attempts=attempt)
        if timed_out:
            raise TimeoutError(
                f"chat completion timed out after {attempts_allowed} attempt(s)"
            )
        raise NetworkError(f"chat completion failed: {last_error}", attempts_allowed)


class ScriptedResponder:
    """Deterministic stand-in for the chat endpoint, keyed by role and date.

    The fixture file is a JSON object mapping "role:YYYY-MM-DD" to the full
    assistant reply for that invocation.
    """

    def __init__(self, responses: dict[str, str]):
        self.responses = dict(responses)
        self.calls: list[str] = []

    @classmethod
    def from_file(cls, path: str) -> "ScriptedResponder":
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
        if not isinstance(data, dict) or not all(
            isinstance(k, str) and isinstance(v, str) for k, v in data.items()
        ):
            raise SchemaError(f"{path}: fixture must map 'role:date' strings to reply strings")
        return cls(data)

    def key_for(self, bundle: PromptBundle) -> str:
        return f"{bundle.role.value}:{bundle.date.isoformat()}"

    def complete(self, bundle: PromptBundle) -> InvokeResult:
        key = self.key_for(bundle)
        self.calls.append(key)
        if key not in self.responses:
            raise BtAgentsError(f"no scripted response for {key}")
        return InvokeResult(text=self.responses[key], attempts=1)


# ---------------------------------------------------------------------------
# output parsing

def _iter_json_objects(text: str):
    decoder = json.JSONDecoder()
    i = text.find("{")
    while i != -1:
        try:
            obj, end = decoder.raw_decode(text, i)
        except ValueError:
            i = text.find("{", i + 1)
            continue
        if isinstance(obj, dict):
            yield obj
        i = text.find("{", end)


REQUIRED_KEYS = ("state", "allocation_btc_pct", "reasoning")


def parse_agent_output(raw: str, role: str = "agent") -> AgentDecision:
    """Extract the first JSON object carrying a full decision from a reply.

    The reply may contain prose before or after the object. Percent
    allocations convert to fractions; an optional numeric `confidence`
    field is preserved but unused downstream.
    """
    if not raw or not raw.strip():
        raise ParseError(f"{role}: empty response")
    found_any = False
    for obj in _iter_json_objects(raw):
        found_any = True
        if not all(k in obj for k in REQUIRED_KEYS):
            continue
        state_raw = obj["state"]
        if not isinstance(state_raw, str) or state_raw.lower() not in (
            s.value for s in MarketState
        ):
            raise SchemaError(f"{role}: invalid state {state_raw!r}")
        pct = obj["allocation_btc_pct"]
        if isinstance(pct, bool) or not isinstance(pct, (int, float)):
            raise SchemaError(f"{role}: allocation_btc_pct must be a number")
        if not 0.0 <= float(pct) <= 100.0:
            raise RangeError(f"{role}: allocation_btc_pct {pct} outside [0, 100]")
        reasoning = obj["reasoning"]
        if not isinstance(reasoning, str) or not reasoning.strip():
            raise SchemaError(f"{role}: reasoning must be a non-empty string")
        confidence = obj.get("confidence")
        if isinstance(confidence, bool) or not isinstance(confidence, (int, float)):
            confidence = None
        return AgentDecision(
            prediction=Prediction(state=MarketState(state_raw.lower()), reasoning=reasoning),
            allocation=Allocation(btc_fraction=float(pct) / 100.0),
            confidence=float(confidence) if confidence is not None else None,
        )
    if found_any:
        raise SchemaError(f"{role}: no JSON object with fields {', '.join(REQUIRED_KEYS)}")
    raise ParseError(f"{role}: no JSON object found in response")


FORMAT_REMINDER = (
    "Your previous reply could not be parsed. " + OUTPUT_CONTRACT
)


@dataclass(frozen=True)
class DecideOutcome:
    decision: AgentDecision
    raw_used: str | None
    attempts: tuple[dict, ...] = field(default_factory=tuple)
    fallback_used: bool = False


def decide_with_retry(
    client: CompletionClient,
    bundle: PromptBundle,
    retry_limit: int = 1,
    fallback_allocation: float = 0.5,
) -> DecideOutcome:
    """Invoke, parse, and on malformed output re-ask with a format reminder.

    After `retry_limit` re-asks (or on transport failure) the fallback
    allocation is applied with a neutral state and the failure chain is
    preserved for the journal.
    """
    attempts: list[dict] = []
    current = bundle
    for round_no in range(retry_limit + 1):
        try:
            result = client.complete(current)
        except (NetworkError, TimeoutError) as exc:
            attempts.append({"raw": None, "error": f"{type(exc).__name__}: {exc}"})
            break
        try:
            decision = parse_agent_output(result.text, role=bundle.role.value)
        except (ParseError, SchemaError, RangeError) as exc:
            attempts.append({"raw": result.text, "error": f"{type(exc).__name__}: {exc}"})
            current = replace(
                current, user_text=current.user_text + "\n\n" + FORMAT_REMINDER
            )
            continue
        attempts.append({"raw": result.text, "error": None})
        return DecideOutcome(
            decision=decision, raw_used=result.text, attempts=tuple(attempts)
        )
    fallback = AgentDecision(
        prediction=Prediction(
            state=MarketState.NEUTRAL,
            reasoning="fallback: previous allocation held after unusable responses",
        ),
        allocation=Allocation(btc_fraction=fallback_allocation),
    )
    return DecideOutcome(
        decision=fallback, raw_used=None, attempts=tuple(attempts), fallback_used=True
    )
