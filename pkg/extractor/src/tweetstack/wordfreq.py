"""Word frequencies over the cleaned corpus.

Stopwords and the query terms that dominate any keyword-collected corpus
(bitcoin, btc, cryptocurrency) are excluded from the counts.
"""

from __future__ import annotations

from collections import Counter
from typing import Iterable

from .stopwords import STOPWORDS

QUERY_TERMS = frozenset({"bitcoin", "btc", "cryptocurrency"})


def word_freq_report(cleaned_texts: Iterable[str], k: int = 20) -> list[tuple[str, int]]:
    """Top-k (word, count), descending by count with alphabetical ties."""
    counts: Counter[str] = Counter()
    for text in cleaned_texts:
        counts.update(
            tok for tok in text.split() if tok not in STOPWORDS and tok not in QUERY_TERMS
        )
    ranked = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
    return ranked[:k]
