"""Command line: `tweetstack extract` writes the binary stack file,
`tweetstack wordfreq` the top-word JSON report."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .binfile import DEFAULT_MAX_SLICES
from .cleaning import clean_tweet
from .dayfeed import read_tweets, run_extract
from .embedder import make_embedder
from .errors import ExtractorError
from .stopwords import STOPWORDS_VERSION
from .wordfreq import word_freq_report


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tweetstack",
        description="Build per-day tweet embedding stacks.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_ex = sub.add_parser("extract", help="clean, slice, embed, and write the stack file")
    p_ex.add_argument("--input", required=True, help="tweets CSV or JSONL")
    p_ex.add_argument("--output", required=True, help="output stack file")
    p_ex.add_argument("--backend", default="hash", choices=("hash", "finbert"))
    p_ex.add_argument("--max-slices", type=int, default=DEFAULT_MAX_SLICES)
    p_ex.add_argument("--timestamp-col", default="timestamp")
    p_ex.add_argument("--text-col", default="text")
    p_ex.add_argument("--report", default=None, help="write a JSON run summary here")

    p_wf = sub.add_parser("wordfreq", help="top words over the cleaned corpus")
    p_wf.add_argument("--input", required=True)
    p_wf.add_argument("--top", type=int, default=20)
    p_wf.add_argument("--timestamp-col", default="timestamp")
    p_wf.add_argument("--text-col", default="text")
    p_wf.add_argument("--output", default=None, help="JSON output path (stdout otherwise)")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "extract":
            embedder = make_embedder(args.backend)
            summary = run_extract(
                args.input, args.output, embedder,
                max_slices=args.max_slices,
                timestamp_col=args.timestamp_col,
                text_col=args.text_col,
            )
            if args.report:
                Path(args.report).write_text(
                    json.dumps(summary, sort_keys=True, indent=2), encoding="utf-8"
                )
            print(
                f"wrote {summary['days_written']} days "
                f"({summary['total_slices']} slices, max {summary['max_slices_seen']}) "
                f"-> {args.output}"
            )
            return 0
        if args.command == "wordfreq":
            tweets = read_tweets(args.input, args.timestamp_col, args.text_col)
            corpus = [c for t in tweets if (c := clean_tweet(t.text)) is not None]
            ranked = word_freq_report(corpus, k=args.top)
            payload = {
                "stopwords_version": STOPWORDS_VERSION,
                "top_words": [{"word": w, "count": c} for w, c in ranked],
            }
            text = json.dumps(payload, sort_keys=True, indent=2)
            if args.output:
                Path(args.output).write_text(text, encoding="utf-8")
            else:
                print(text)
            return 0
        raise ExtractorError(f"unknown command {args.command!r}")
    except ExtractorError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
