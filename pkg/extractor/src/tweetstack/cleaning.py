"""Tweet text cleaning, applied in a fixed order.

1. lowercase every ASCII letter
2. strip URLs
3. drop the '@' and '#' symbols (the tagged words stay)
4. delete every character outside the English alphabet (digits, punctuation,
   emoji, non-Latin scripts), which also empties out non-English tweets
5. discard the tweet if at most one word token survives

Cleaning is idempotent: output contains only single-spaced lowercase ASCII
words, which every rule maps to itself.
"""

from __future__ import annotations

import re

_URL_RE = re.compile(r"(?:https?://|www\.)\S+")
_NON_ALPHA_RE = re.compile(r"[^a-z\s]+")


def clean_tweet(text: str) -> str | None:
    """Cleaned single-spaced text, or None when the tweet is discarded."""
    text = text.lower()
    text = _URL_RE.sub(" ", text)
    text = text.replace("@", "").replace("#", "")
    text = _NON_ALPHA_RE.sub("", text)
    tokens = text.split()
    if len(tokens) <= 1:
        return None
    return " ".join(tokens)
