"""Per-day tweet embedding stacks.

Cleans raw tweets, concatenates each day's surviving text, slices it into
200-token windows overlapping by 50, embeds every slice with a pluggable
backend, and writes the binary stack file consumed downstream. Also emits a
word-frequency report over the cleaned corpus.
"""

__version__ = "0.1.0"

from .cleaning import clean_tweet
from .slicing import DaySlices, OVERLAP, WINDOW, expected_slice_count, slice_tokens
from .wordfreq import word_freq_report

__all__ = [
    "DaySlices",
    "OVERLAP",
    "WINDOW",
    "clean_tweet",
    "expected_slice_count",
    "slice_tokens",
    "word_freq_report",
]
