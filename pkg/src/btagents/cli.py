"""Command-line entry points: ingest, backtest, replay, report.

Exit codes: 0 success, 1 runtime error, 2 usage error. The backtest
subcommand runs fully offline when given a scripted-responder fixture.
"""

from __future__ import annotations

import argparse
import json
import sys
from datetime import date as Date
from pathlib import Path

from .agents import ChatClient, ChatClientConfig, ScriptedResponder
from .errors import BtAgentsError
from .indicators import IndicatorParams
from .journal import read_journal, write_journal
from .market_data import (
    GAP_CARRY,
    GAP_STRICT,
    align,
    load_bars,
    load_news,
    load_onchain,
    load_sentiment,
)
from .orchestrator import RunConfig, outputs_from_journal, replay, run_backtest
from .regime import RegimeParams, load_segmentation
from .report import cumrets_csv, render, resolve_segmentation, table_csv


def _load_config_file(path: str) -> tuple[RunConfig, dict, str]:
    """Parse the JSON config tree into a RunConfig plus data paths."""
    try:
        with open(path, encoding="utf-8") as fh:
            cfg = json.load(fh)
    except ValueError as exc:
        raise BtAgentsError(f"{path}: config is not valid JSON: {exc}") from exc

    try:
        data = cfg["data"]
        run = cfg["run"]
        start = Date.fromisoformat(run["start"])
        end = Date.fromisoformat(run["end"])
    except (KeyError, TypeError, ValueError) as exc:
        raise BtAgentsError(f"{path}: missing or invalid config key: {exc}") from exc

    feedback = cfg.get("feedback", {})
    try:
        run_config = RunConfig(
            start=start,
            end=end,
            initial_value_usd=run.get("initial_value_usd", 10_000.0),
            lookback_days=run.get("lookback_days", 30),
            neutral_band=run.get("neutral_band", 0.005),
            fee_bps=run.get("fee_bps", 0.0),
            parse_retry_limit=run.get("parse_retry_limit", 1),
            indicator_params=IndicatorParams(**cfg.get("indicators", {})),
            regime_params=RegimeParams(**cfg.get("regime", {})),
            daily_feedback=feedback.get("daily", True),
            weekly_feedback=feedback.get("weekly", True),
            praise_threshold=feedback.get("praise_threshold", 0.0),
            regret_threshold=feedback.get("regret_threshold", 0.01),
            weekly_template_path=feedback.get("templates"),
            client=ChatClientConfig(**cfg.get("client", {})),
        )
    except (TypeError, ValueError) as exc:
        raise BtAgentsError(f"{path}: bad config value: {exc}") from exc
    return run_config, data, cfg.get("journal", "journal.jsonl")


def _build_dataset(data: dict):
    bars = load_bars(data["bars"])
    onchain = load_onchain(data["onchain"]) if data.get("onchain") else ()
    sentiment = load_sentiment(data["sentiment"]) if data.get("sentiment") else ()
    news = load_news(data["news"]) if data.get("news") else ()
    return align(
        bars,
        onchain=onchain,
        sentiment=sentiment,
        news=news,
        gap_policy=data.get("gap_policy", GAP_CARRY),
    )


def cmd_ingest(args) -> int:
    data = {
        "bars": args.bars,
        "onchain": args.onchain,
        "sentiment": args.sentiment,
        "news": args.news,
        "gap_policy": args.gap_policy,
    }
    dataset = _build_dataset(data)
    dates = dataset.dates
    print(f"aligned dataset: {len(dataset)} records, {dates[0]} .. {dates[-1]}")
    for name, path, loader in (
        ("onchain", args.onchain, load_onchain),
        ("sentiment", args.sentiment, load_sentiment),
    ):
        if path:
            have = {row.date for row in loader(path)}
            carried = sum(1 for d in dates if d not in have)
            print(f"{name}: {len(have)} rows, {carried} dataset date(s) carried forward")
    if args.news:
        n_items = sum(len(r.news) for r in dataset.records)
        print(f"news: {n_items} items after dedup")
    return 0


def _emit_report(outputs, segmentation_path: str | None, out_dir: str | None) -> str:
    override = load_segmentation(segmentation_path) if segmentation_path else None
    segmentation = resolve_segmentation(outputs, override)
    artifacts = render(outputs, segmentation)
    if out_dir:
        target = Path(out_dir)
        target.mkdir(parents=True, exist_ok=True)
        (target / "report.txt").write_text(artifacts.text, encoding="utf-8")
        (target / "report.csv").write_text(table_csv(artifacts), encoding="utf-8")
        (target / "cumrets.csv").write_text(cumrets_csv(artifacts), encoding="utf-8")
    return artifacts.text


def cmd_backtest(args) -> int:
    run_config, data, journal_path = _load_config_file(args.config)
    dataset = _build_dataset(data)
    if args.fixtures:
        client = ScriptedResponder.from_file(args.fixtures)
    else:
        client = ChatClient(run_config.client)
    journal = run_backtest(run_config, dataset, client)
    out_path = args.journal or journal_path
    Path(out_path).parent.mkdir(parents=True, exist_ok=True)
    write_journal(journal, out_path)
    print(f"journal written to {out_path}", file=sys.stderr)
    outputs = outputs_from_journal(journal)
    print(_emit_report(outputs, None, args.report_dir), end="")
    return 0


def cmd_replay(args) -> int:
    journal = read_journal(args.journal)
    outputs = replay(journal, neutral_band=args.neutral_band)
    print(_emit_report(outputs, args.segmentation, args.out_dir), end="")
    return 0


def cmd_report(args) -> int:
    journal = read_journal(args.journal)
    outputs = outputs_from_journal(journal, neutral_band=args.neutral_band)
    print(_emit_report(outputs, args.segmentation, args.out_dir), end="")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="btagents",
        description="Deterministic backtester for an LLM multi-agent BTC trading loop",
    )
    sub = parser.add_subparsers(dest="command")

    p_ingest = sub.add_parser("ingest", help="validate and align data files")
    p_ingest.add_argument("--bars", required=True, help="OHLCV CSV path")
    p_ingest.add_argument("--onchain", help="on-chain CSV path")
    p_ingest.add_argument("--sentiment", help="sentiment CSV path")
    p_ingest.add_argument("--news", help="news CSV path")
    p_ingest.add_argument(
        "--gap-policy", choices=[GAP_CARRY, GAP_STRICT], default=GAP_CARRY
    )
    p_ingest.set_defaults(func=cmd_ingest)

    p_backtest = sub.add_parser("backtest", help="run a backtest from a config file")
    p_backtest.add_argument("--config", required=True, help="JSON config path")
    p_backtest.add_argument(
        "--fixtures", help="scripted responder JSON; run offline against it"
    )
    p_backtest.add_argument("--journal", help="override journal output path")
    p_backtest.add_argument("--report-dir", help="also write report files here")
    p_backtest.set_defaults(func=cmd_backtest)

    p_replay = sub.add_parser("replay", help="recompute a run from its journal")
    p_replay.add_argument("--journal", required=True)
    p_replay.add_argument("--neutral-band", type=float, default=None)
    p_replay.add_argument("--segmentation", help="override segmentation CSV")
    p_replay.add_argument("--out-dir", help="write report files here")
    p_replay.set_defaults(func=cmd_replay)

    p_report = sub.add_parser("report", help="render the report from a journal")
    p_report.add_argument("--journal", required=True)
    p_report.add_argument("--neutral-band", type=float, default=None)
    p_report.add_argument("--segmentation", help="override segmentation CSV")
    p_report.add_argument("--out-dir", help="write report files here")
    p_report.set_defaults(func=cmd_report)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else 0
    if getattr(args, "func", None) is None:
        parser.print_usage(sys.stderr)
        return 2
    try:
        return args.func(args)
    except BtAgentsError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
