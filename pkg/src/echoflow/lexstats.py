"""Term and hashtag frequency tables, and n-gram odds ratios between two groups."""

from __future__ import annotations

import csv
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

from .ingest import DatasetBundle, normalize_hashtag

SMOOTHING = 0.5


def _top(counts: Counter, top_n: int | None) -> list[tuple[str, int]]:
    ranked = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
    return ranked if top_n is None else ranked[:top_n]


def term_frequencies(docs: Iterable[Sequence[str]], top_n: int | None = None) -> list[tuple[str, int]]:
    """Most frequent tokens, count descending then alphabetical."""
    counts: Counter = Counter()
    for doc in docs:
        counts.update(doc)
    return _top(counts, top_n)


def hashtag_frequencies(
    bundle: DatasetBundle,
    top_n: int | None = None,
    exclude: Iterable[str] = (),
) -> list[tuple[str, int]]:
    """Hashtag counts over all posts, minus ``exclude`` (e.g. {"caa", "nrc"})."""
    drop = {normalize_hashtag(h) for h in exclude}
    counts: Counter = Counter()
    for t in bundle.tweets:
        counts.update(h for h in t.hashtags if h not in drop)
    return _top(counts, top_n)


def ngrams(tokens: Sequence[str], n: int) -> list[tuple[str, ...]]:
    return [tuple(tokens[i:i + n]) for i in range(len(tokens) - n + 1)]


def odds_ratio(a: int, n_a: int, b: int, n_b: int, smoothing: float = SMOOTHING) -> float:
    """Odds of presence in group A over odds in group B, with additive smoothing."""
    return ((a + smoothing) / (n_a - a + smoothing)) / ((b + smoothing) / (n_b - b + smoothing))


@dataclass(frozen=True)
class OddsRatioRow:
    ngram: tuple[str, ...]
    count_a: int
    count_b: int
    odds_ratio: float

    @property
    def n(self) -> int:
        return len(self.ngram)


def ngram_odds_ratios(
    docs_a: Sequence[Sequence[str]],
    docs_b: Sequence[Sequence[str]],
    n: int = 2,
    min_count: int = 3,
    smoothing: float = SMOOTHING,
) -> list[OddsRatioRow]:
    """Odds ratio of every n-gram's document presence in A versus B.

    ``count_a`` is the number of A documents containing the n-gram.  Rows with
    ``count_a + count_b < min_count`` are dropped; the rest are sorted by odds
    ratio, highest first.
    """
    if n not in (2, 3):
        raise ValueError("n must be 2 or 3")
    pres_a: Counter = Counter()
    pres_b: Counter = Counter()
    for doc in docs_a:
        pres_a.update(set(ngrams(doc, n)))
    for doc in docs_b:
        pres_b.update(set(ngrams(doc, n)))
    rows = []
    for g in set(pres_a) | set(pres_b):
        a, b = pres_a[g], pres_b[g]
        if a + b < min_count:
            continue
        rows.append(OddsRatioRow(g, a, b, odds_ratio(a, len(docs_a), b, len(docs_b), smoothing)))
    rows.sort(key=lambda r: (-r.odds_ratio, r.ngram))
    return rows


def write_frequencies_csv(path: str | Path, rows: Sequence[tuple[str, int]], label: str = "term") -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([label, "count"])
        w.writerows(rows)


def write_odds_csv(path: str | Path, rows: Sequence[OddsRatioRow]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["ngram", "n", "count_a", "count_b", "odds_ratio"])
        for r in rows:
            w.writerow([" ".join(r.ngram), r.n, r.count_a, r.count_b, f"{r.odds_ratio:.6f}"])
