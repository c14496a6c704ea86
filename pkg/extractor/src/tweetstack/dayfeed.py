"""From raw tweet records to per-day embedding stacks.

Tweets are cleaned individually, grouped by UTC calendar day, ordered by
timestamp, concatenated into one token stream per day, sliced, and embedded.
Days where no tweet survives cleaning produce no record.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from datetime import date as Date, datetime, timezone
from pathlib import Path

import numpy as np

from .binfile import DEFAULT_MAX_SLICES, write_embedding_file
from .cleaning import clean_tweet
from .errors import CapacityError, ParseError
from .slicing import DaySlices, slice_day


@dataclass(frozen=True)
class RawTweet:
    timestamp: datetime
    text: str


def _parse_timestamp(raw: str, where: str) -> datetime:
    raw = raw.strip().replace("Z", "+00:00")
    try:
        ts = datetime.fromisoformat(raw)
    except ValueError:
        raise ParseError(f"{where}: bad timestamp {raw!r}") from None
    if ts.tzinfo is None:
        ts = ts.replace(tzinfo=timezone.utc)
    return ts.astimezone(timezone.utc)


def read_tweets_csv(path: str | Path, timestamp_col: str = "timestamp",
                    text_col: str = "text") -> list[RawTweet]:
    tweets = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or timestamp_col not in reader.fieldnames \
                or text_col not in reader.fieldnames:
            raise ParseError(f"{path}: needs columns {timestamp_col!r} and {text_col!r}")
        for i, row in enumerate(reader, start=2):
            text = row[text_col] or ""
            if not text.strip():
                continue
            tweets.append(RawTweet(_parse_timestamp(row[timestamp_col], f"line {i}"), text))
    return tweets


def read_tweets_jsonl(path: str | Path, timestamp_col: str = "timestamp",
                      text_col: str = "text") -> list[RawTweet]:
    tweets = []
    with open(path, encoding="utf-8") as fh:
        for i, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(f"line {i}: bad JSON: {exc}") from None
            text = str(obj.get(text_col, "") or "")
            if not text.strip():
                continue
            if timestamp_col not in obj:
                raise ParseError(f"line {i}: missing {timestamp_col!r}")
            tweets.append(RawTweet(_parse_timestamp(str(obj[timestamp_col]), f"line {i}"), text))
    return tweets


def read_tweets(path: str | Path, timestamp_col: str = "timestamp",
                text_col: str = "text") -> list[RawTweet]:
    path = Path(path)
    if path.suffix.lower() in (".jsonl", ".ndjson"):
        return read_tweets_jsonl(path, timestamp_col, text_col)
    return read_tweets_csv(path, timestamp_col, text_col)


def build_day_slices(tweets: list[RawTweet]) -> tuple[list[DaySlices], list[str]]:
    """Per-day slice sets plus the cleaned corpus (for word frequencies).

    Days whose tweets all get discarded are dropped entirely.
    """
    by_day: dict[Date, list[tuple[datetime, str]]] = {}
    cleaned_corpus: list[str] = []
    for tweet in sorted(tweets, key=lambda t: t.timestamp):
        cleaned = clean_tweet(tweet.text)
        if cleaned is None:
            continue
        cleaned_corpus.append(cleaned)
        by_day.setdefault(tweet.timestamp.date(), []).append((tweet.timestamp, cleaned))
    days = []
    for day in sorted(by_day):
        tokens: list[str] = []
        for _, cleaned in by_day[day]:
            tokens.extend(cleaned.split())
        days.append(slice_day(day, tokens))
    return days, cleaned_corpus


def embed_days(days: list[DaySlices], embedder) -> list[tuple[Date, np.ndarray]]:
    out = []
    for day in days:
        if day.n_slices == 0:
            continue
        texts = [" ".join(s) for s in day.slices]
        matrix = embedder.embed(texts)
        out.append((day.date, matrix))
    return out


def run_extract(
    input_path: str | Path,
    output_path: str | Path,
    embedder,
    max_slices: int = DEFAULT_MAX_SLICES,
    timestamp_col: str = "timestamp",
    text_col: str = "text",
) -> dict:
    """Full pipeline; returns a summary suitable for a JSON report."""
    tweets = read_tweets(input_path, timestamp_col, text_col)
    days, corpus = build_day_slices(tweets)
    for day in days:
        if day.n_slices > max_slices:
            raise CapacityError(
                f"{day.date}: {day.n_slices} slices exceed the maximum {max_slices}"
            )
    stacks = embed_days(days, embedder)
    write_embedding_file(stacks, output_path, max_slices=max_slices)
    return {
        "tweets_read": len(tweets),
        "tweets_kept": len(corpus),
        "days_written": len(stacks),
        "total_slices": int(sum(len(m) for _, m in stacks)),
        "max_slices_seen": int(max((len(m) for _, m in stacks), default=0)),
        "backend": embedder.name,
    }
