"""Daily critic and weekly template feedback.

The daily critic is an LLM pass over each agent's outcome packet; its
feedback is lexically scope-filtered before it may enter the next day's
prompts. The weekly reviewer is deliberately not an LLM: it selects one
hardcoded template per role from the week's stats and never touches any
quantitative parameter.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field, replace
from datetime import date as Date
from importlib import resources
from typing import Mapping, Sequence

from .agents import (
    AgentDecision,
    CompletionClient,
    INDICATOR_TERMS,
    PromptBundle,
    Role,
    _iter_json_objects,
)
from .errors import (
    IncompleteWeek,
    InvariantViolation,
    MissingAgentRecord,
    NetworkError,
    ParseError,
    SchemaError,
    ZeroDispersion,
)
from .metrics import prediction_correct, sharpe, total_return

AGENT_ROLES = ("quants", "signals", "decision")

# verbatim phrases the default weekly templates are built around
PRAISE_PHRASE = "your signals consistently beat the baseline"
CORRECTIVE_QUANTS_PHRASE = "reconstruct your indicator selection"
NEUTRAL_PHRASE = "prioritize high-confidence inputs"

NO_ALLOCATION_ADVICE = (
    "Never tell any agent to set, raise, or lower a specific allocation "
    "percentage; critique the reasoning, not the position size."
)


@dataclass(frozen=True)
class AgentDayOutcome:
    role: str
    state: str
    allocation: float
    reasoning: str
    portfolio_return: float
    correct: bool
    running_accuracy: float


@dataclass(frozen=True)
class DailyOutcomePacket:
    """Everything the critic needs about one completed day. No LLM content."""

    date: Date
    realized_btc_return: float
    agents: Mapping[str, AgentDayOutcome]
    baseline_return: float

    def __post_init__(self):
        for role in AGENT_ROLES:
            if role not in self.agents:
                raise MissingAgentRecord(f"packet for {self.date} missing {role}")


@dataclass(frozen=True)
class DailyFeedback:
    """Per-role critique texts; an empty string means no feedback that day."""

    date: Date
    quants: str
    signals: str
    decision: str

    def text_for(self, role: str) -> str:
        return getattr(self, role)

    @classmethod
    def empty(cls, date: Date) -> "DailyFeedback":
        return cls(date=date, quants="", signals="", decision="")


@dataclass(frozen=True)
class ScopeViolation:
    role: str
    reason: str


@dataclass(frozen=True)
class WeeklyRoleStats:
    week_return: float
    baseline_return: float
    return_diff: float
    sharpe: float | None
    regret: float


@dataclass(frozen=True)
class WeeklyFeedback:
    week_start: Date
    week_end: Date
    texts: Mapping[str, str]
    stats: Mapping[str, WeeklyRoleStats]
    kinds: Mapping[str, str]

    def text_for(self, role: str) -> str:
        return self.texts.get(role, "")


def evaluate_day(
    date: Date,
    realized_btc_return: float,
    decisions: Mapping[str, AgentDecision],
    portfolio_returns: Mapping[str, float],
    baseline_return: float,
    neutral_band: float,
    prior_counts: Mapping[str, tuple[int, int]] | None = None,
) -> DailyOutcomePacket:
    """Assemble the day's outcome packet from already-computed pieces."""
    prior_counts = prior_counts or {}
    agents: dict[str, AgentDayOutcome] = {}
    for role in AGENT_ROLES:
        if role not in decisions or role not in portfolio_returns:
            raise MissingAgentRecord(f"{role} has no record for {date}")
        decision = decisions[role]
        correct = prediction_correct(
            decision.prediction.state.value, realized_btc_return, neutral_band
        )
        prev_ok, prev_n = prior_counts.get(role, (0, 0))
        agents[role] = AgentDayOutcome(
            role=role,
            state=decision.prediction.state.value,
            allocation=decision.allocation.btc_fraction,
            reasoning=decision.prediction.reasoning,
            portfolio_return=portfolio_returns[role],
            correct=correct,
            running_accuracy=(prev_ok + (1 if correct else 0)) / (prev_n + 1),
        )
    return DailyOutcomePacket(
        date=date,
        realized_btc_return=realized_btc_return,
        agents=agents,
        baseline_return=baseline_return,
    )


REFLECT_SYSTEM = (
    "You are the performance critic of a Bitcoin trading desk. Each evening "
    "you review what every agent predicted, how it reasoned, and what the "
    "market actually did. Judge whether each decision was justified by the "
    "reasoning provided, rather than purely by its portfolio performance "
    "outcome: a sound argument can lose to an unpredictable market, and a "
    "sloppy one can get lucky. Critique the reasoning, identify errors, and "
    "suggest how the analysis could improve. Each agent may only be told "
    "about data it can see: the technical analyst sees prices, gauges, and "
    "chain activity; the mood analyst sees press coverage and crowd scores. "
    + NO_ALLOCATION_ADVICE
    + "\n\nRespond with exactly one JSON object of the form "
    '{"quants": "<feedback>", "signals": "<feedback>", "decision": "<feedback>"} '
    "with one non-empty feedback string per agent."
)


def build_reflect_prompt(packet: DailyOutcomePacket) -> PromptBundle:
    lines = [
        f"Date: {packet.date.isoformat()}",
        f"Realized BTC move next day: {packet.realized_btc_return * 100:+.4f}%",
        f"Passive half-BTC baseline day return: {packet.baseline_return * 100:+.4f}%",
        "",
    ]
    titles = {
        "quants": "Technical analyst (quants)",
        "signals": "Mood analyst (signals)",
        "decision": "Final decision maker (decision)",
    }
    for role in AGENT_ROLES:
        a = packet.agents[role]
        lines += [
            f"{titles[role]}:",
            f"  predicted: {a.state}",
            f"  allocation taken: {a.allocation * 100:.0f}% BTC",
            f"  day portfolio return: {a.portfolio_return * 100:+.4f}%",
            f"  prediction correct: {'yes' if a.correct else 'no'}"
            f" (running accuracy {a.running_accuracy:.2f})",
            f"  reasoning given: {a.reasoning}",
            "",
        ]
    lines.append(
        "Write one feedback paragraph per agent, judging whether its "
        "reasoning justified its decision."
    )
    return PromptBundle(
        role=Role.REFLECT,
        date=packet.date,
        system_text=REFLECT_SYSTEM,
        user_text="\n".join(lines),
    )


def parse_reflect_output(raw: str) -> dict[str, str]:
    """Extract the per-role feedback object from a critic reply."""
    if not raw or not raw.strip():
        raise ParseError("reflect: empty response")
    found_any = False
    for obj in _iter_json_objects(raw):
        found_any = True
        if not all(role in obj for role in AGENT_ROLES):
            continue
        texts = {}
        for role in AGENT_ROLES:
            value = obj[role]
            if not isinstance(value, str) or not value.strip():
                raise SchemaError(f"reflect: feedback for {role} must be a non-empty string")
            texts[role] = value.strip()
        return texts
    if found_any:
        raise SchemaError("reflect: no JSON object with quants/signals/decision keys")
    raise ParseError("reflect: no JSON object found in response")


# ---------------------------------------------------------------------------
# scope filtering

SIGNALS_BANNED_TERMS = INDICATOR_TERMS + ("technical indicator", "technical indicators")

ALLOCATION_VERBS = (
    "increase", "decrease", "raise", "lower", "cut", "reduce",
    "boost", "set", "shift", "move", "bump", "trim",
)
ALLOCATION_NOUNS = ("allocation", "exposure", "position", "split")
_PERCENT_RE = re.compile(r"\d+(?:\.\d+)?\s*%")


def _word(term: str) -> re.Pattern:
    return re.compile(rf"(?<![a-z0-9_]){re.escape(term)}(?![a-z0-9_])", re.IGNORECASE)


def _has_allocation_directive(text: str) -> bool:
    # a percentage figure sharing a sentence with an allocation verb and noun
    for sentence in re.split(r"[.!?\n]", text):
        if not _PERCENT_RE.search(sentence):
            continue
        if any(_word(v).search(sentence) for v in ALLOCATION_VERBS) and any(
            _word(n).search(sentence) for n in ALLOCATION_NOUNS
        ):
            return True
    return False


def scope_filter(
    feedback: Mapping[str, str],
    signals_banned_terms: Sequence[str] = SIGNALS_BANNED_TERMS,
) -> list[ScopeViolation]:
    """Detect out-of-scope feedback. Empty result means all texts pass.

    The signals agent must not be told about technical-indicator data it
    cannot see, and no agent may receive an explicit percentage allocation
    directive.
    """
    violations = []
    signals_text = feedback.get("signals", "")
    for term in signals_banned_terms:
        if _word(term).search(signals_text):
            violations.append(
                ScopeViolation(role="signals", reason=f"mentions indicator term '{term}'")
            )
            break
    for role in AGENT_ROLES:
        if _has_allocation_directive(feedback.get(role, "")):
            violations.append(
                ScopeViolation(role=role, reason="contains an explicit allocation directive")
            )
    return violations


REFLECT_FORMAT_REMINDER = (
    "Your previous reply could not be parsed. Respond with exactly one JSON "
    'object of the form {"quants": "...", "signals": "...", "decision": "..."} '
    "with one non-empty feedback string per agent."
)


@dataclass(frozen=True)
class ReflectionOutcome:
    feedback: DailyFeedback
    bundle: PromptBundle
    attempts: tuple[dict, ...] = field(default_factory=tuple)
    violations: tuple[ScopeViolation, ...] = ()
    flags: tuple[str, ...] = ()


def run_daily_reflection(
    client: CompletionClient,
    packet: DailyOutcomePacket,
    retry_limit: int = 1,
    signals_banned_terms: Sequence[str] = SIGNALS_BANNED_TERMS,
) -> ReflectionOutcome:
    """Invoke the critic, parse, and scope-filter its feedback.

    Malformed replies get `retry_limit` format-reminder re-asks; a scope
    violation gets exactly one re-ask naming the violation. Roles that
    still violate end up with empty feedback so the next day simply runs
    without it.
    """
    bundle = build_reflect_prompt(packet)
    attempts: list[dict] = []
    flags: list[str] = []

    def try_parse(b: PromptBundle, rounds: int) -> dict[str, str] | None:
        current = b
        for _ in range(rounds):
            try:
                result = client.complete(current)
            except (NetworkError, TimeoutError) as exc:
                attempts.append({"raw": None, "error": f"{type(exc).__name__}: {exc}"})
                return None
            try:
                texts = parse_reflect_output(result.text)
            except (ParseError, SchemaError) as exc:
                attempts.append({"raw": result.text, "error": f"{type(exc).__name__}: {exc}"})
                current = replace(
                    current, user_text=current.user_text + "\n\n" + REFLECT_FORMAT_REMINDER
                )
                continue
            attempts.append({"raw": result.text, "error": None})
            return texts
        return None

    texts = try_parse(bundle, retry_limit + 1)
    if texts is None:
        flags.append("reflect_fallback_empty")
        return ReflectionOutcome(
            feedback=DailyFeedback.empty(packet.date),
            bundle=bundle,
            attempts=tuple(attempts),
            flags=tuple(flags),
        )

    violations = scope_filter(texts, signals_banned_terms)
    if violations:
        flags.append("reflect_scope_retry")
        note = "; ".join(f"{v.role}: {v.reason}" for v in violations)
        retry_bundle = replace(
            bundle,
            user_text=bundle.user_text
            + "\n\nYour previous feedback crossed role boundaries ("
            + note
            + "). Rewrite it within each agent's own data scope.",
        )
        retry_texts = try_parse(retry_bundle, 1)
        if retry_texts is not None:
            still = {v.role for v in scope_filter(retry_texts, signals_banned_terms)}
            for role in AGENT_ROLES:
                if role in still:
                    retry_texts[role] = ""
                    flags.append(f"reflect_scope_dropped_{role}")
            texts = retry_texts
        else:
            for v in violations:
                texts[v.role] = ""
                flags.append(f"reflect_scope_dropped_{v.role}")

    return ReflectionOutcome(
        feedback=DailyFeedback(date=packet.date, **{r: texts[r] for r in AGENT_ROLES}),
        bundle=bundle,
        attempts=tuple(attempts),
        violations=tuple(violations),
        flags=tuple(flags),
    )


# ---------------------------------------------------------------------------
# weekly templates

def load_weekly_templates(path: str | None = None) -> dict[str, dict[str, str]]:
    """Template pool: role -> {praise, corrective, neutral} -> text.

    Reads the packaged defaults unless an override file is given, so the
    phrases stay editable without touching code.
    """
    if path is None:
        raw = (
            resources.files("btagents")
            .joinpath("templates/weekly_templates.json")
            .read_text(encoding="utf-8")
        )
    else:
        with open(path, encoding="utf-8") as fh:
            raw = fh.read()
    pool = json.loads(raw)
    for role in AGENT_ROLES:
        if role not in pool:
            raise SchemaError(f"weekly templates missing role '{role}'")
        for kind in ("praise", "corrective", "neutral"):
            text = pool[role].get(kind)
            if not isinstance(text, str) or not text.strip():
                raise SchemaError(f"weekly template {role}/{kind} must be a non-empty string")
    return pool


def select_template_kind(
    return_diff: float,
    regret_value: float,
    praise_threshold: float = 0.0,
    regret_threshold: float = 0.01,
) -> str:
    """Pure selection rule: outperform -> praise, deep shortfall -> corrective."""
    if return_diff > praise_threshold:
        return "praise"
    if regret_value > regret_threshold:
        return "corrective"
    return "neutral"


def weekly_feedback(
    packets: Sequence[DailyOutcomePacket],
    templates: Mapping[str, Mapping[str, str]],
    praise_threshold: float = 0.0,
    regret_threshold: float = 0.01,
) -> WeeklyFeedback:
    """Condense exactly seven completed days into per-role template feedback.

    Stats (weekly return vs the passive baseline, weekly Sharpe, weekly
    regret) drive template selection; nothing numeric flows back into the
    agents, only the selected text.
    """
    if len(packets) != 7:
        raise IncompleteWeek(f"weekly feedback needs 7 days, got {len(packets)}")
    for a, b in zip(packets, packets[1:]):
        if b.date <= a.date:
            raise InvariantViolation("weekly packets must be in date order")

    baseline_week = total_return([p.baseline_return for p in packets])
    texts: dict[str, str] = {}
    stats: dict[str, WeeklyRoleStats] = {}
    kinds: dict[str, str] = {}
    for role in AGENT_ROLES:
        returns = [p.agents[role].portfolio_return for p in packets]
        week_return = total_return(returns)
        diff = week_return - baseline_week
        reg = max(0.0, baseline_week - week_return)
        try:
            sharpe_value = sharpe(returns)
        except ZeroDispersion:
            sharpe_value = None
        kind = select_template_kind(diff, reg, praise_threshold, regret_threshold)
        texts[role] = templates[role][kind]
        kinds[role] = kind
        stats[role] = WeeklyRoleStats(
            week_return=week_return,
            baseline_return=baseline_week,
            return_diff=diff,
            sharpe=sharpe_value,
            regret=reg,
        )
    return WeeklyFeedback(
        week_start=packets[0].date,
        week_end=packets[-1].date,
        texts=texts,
        stats=stats,
        kinds=kinds,
    )
