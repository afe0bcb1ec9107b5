"""One-to-one mapping of app posts to similar other posts, and who posted first."""

from __future__ import annotations

import csv
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from ..ingest import TweetRecord
from .text import DEFAULT_STOPWORDS, l2_normalize, preprocess_text, transform, vectorize_corpus


@dataclass(frozen=True)
class TweetPair:
    app_tweet_id: str
    other_tweet_id: str
    cosine_similarity: float
    app_first: bool
    app_timestamp: float = 0.0
    other_timestamp: float = 0.0


def dedup_first_instance(tweets: Sequence[TweetRecord], tokens: Sequence[tuple[str, ...]]) -> list[int]:
    """Indices of the earliest tweet (then smallest id) for each distinct token sequence."""
    first: dict[tuple[str, ...], int] = {}
    for i, (t, toks) in enumerate(zip(tweets, tokens)):
        j = first.get(toks)
        if j is None or (t.timestamp, t.tweet_id) < (tweets[j].timestamp, tweets[j].tweet_id):
            first[toks] = i
    return sorted(first.values())


@dataclass
class PairMapping:
    pairs: list[TweetPair]
    collisions: int  # app posts mapped onto an already-used other post
    unmatched: int  # app posts with zero similarity to every other post


def map_similar_pairs(
    app_tweets: Sequence[TweetRecord],
    other_tweets: Sequence[TweetRecord],
    dedup: bool = False,
    stopwords=DEFAULT_STOPWORDS,
) -> PairMapping:
    """Map each app post to the other post with the highest cosine similarity.

    Vectors are counts over the union corpus vocabulary (document frequency
    of at least 2), L2-normalized.  Ties go to the earliest other post, then
    the smallest id.  App posts whose best similarity is zero are left out.
    With ``dedup`` identical texts on either side collapse to their earliest
    instance first.  Several app posts may share one other post.
    """
    if not other_tweets or not app_tweets:
        return PairMapping([], 0, 0)
    app_tok = [tuple(preprocess_text(t.text, stopwords)) for t in app_tweets]
    oth_tok = [tuple(preprocess_text(t.text, stopwords)) for t in other_tweets]
    app_idx = list(range(len(app_tweets)))
    oth_idx = list(range(len(other_tweets)))
    if dedup:
        app_idx = dedup_first_instance(app_tweets, app_tok)
        oth_idx = dedup_first_instance(other_tweets, oth_tok)
    apps = [app_tweets[i] for i in app_idx]
    others = [other_tweets[i] for i in oth_idx]
    a_docs = [app_tok[i] for i in app_idx]
    o_docs = [oth_tok[i] for i in oth_idx]
    vocab, _ = vectorize_corpus(a_docs + o_docs)
    A = l2_normalize(transform(a_docs, vocab))
    O = l2_normalize(transform(o_docs, vocab))
    sims = np.asarray((A @ O.T).todense())
    # tie-break order over other posts: earliest, then smallest id
    order = sorted(range(len(others)), key=lambda j: (others[j].timestamp, others[j].tweet_id))
    sims_ord = sims[:, order]
    pairs, used = [], Counter()
    unmatched = 0
    for i, a in enumerate(apps):
        row = sims_ord[i]
        best = row.max()
        if best <= 1e-12:
            unmatched += 1
            continue
        j = order[int(np.flatnonzero(row >= best - 1e-12)[0])]
        o = others[j]
        used[o.tweet_id] += 1
        pairs.append(TweetPair(a.tweet_id, o.tweet_id, float(min(best, 1.0)),
                               a.timestamp < o.timestamp, a.timestamp, o.timestamp))
    collisions = sum(c - 1 for c in used.values())
    return PairMapping(pairs, collisions, unmatched)


@dataclass(frozen=True)
class FirstPosterStats:
    app_first: int
    other_first: int
    simultaneous: int

    @property
    def total(self) -> int:
        return self.app_first + self.other_first + self.simultaneous

    @property
    def app_first_fraction(self) -> float:
        strict = self.app_first + self.other_first
        return self.app_first / strict if strict else float("nan")

    @property
    def other_first_fraction(self) -> float:
        strict = self.app_first + self.other_first
        return self.other_first / strict if strict else float("nan")

    def as_dict(self) -> dict:
        return {
            "pairs": self.total,
            "app_first": self.app_first,
            "other_first": self.other_first,
            "simultaneous": self.simultaneous,
            "app_first_fraction": round(self.app_first_fraction, 6),
            "other_first_fraction": round(self.other_first_fraction, 6),
        }


def first_poster_stats(pairs: Sequence[TweetPair]) -> FirstPosterStats:
    """Counts of pairs where the app post or the other post came first.

    Fractions are taken over pairs with distinct timestamps; ties are counted
    separately.
    """
    if not pairs:
        raise ValueError("no pairs")
    app = other = same = 0
    for p in pairs:
        if p.app_timestamp == p.other_timestamp:
            same += 1
        elif p.app_first:
            app += 1
        else:
            other += 1
    return FirstPosterStats(app, other, same)


def write_pairs_csv(path: str | Path, pairs: Sequence[TweetPair]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["app_tweet_id", "other_tweet_id", "cosine_similarity", "app_first",
                    "app_timestamp", "other_timestamp"])
        for p in pairs:
            w.writerow([p.app_tweet_id, p.other_tweet_id, f"{p.cosine_similarity:.6f}", int(p.app_first),
                        repr(p.app_timestamp), repr(p.other_timestamp)])


def read_pairs_csv(path: str | Path) -> list[TweetPair]:
    with open(path, newline="", encoding="utf-8") as fh:
        return [
            TweetPair(r["app_tweet_id"], r["other_tweet_id"], float(r["cosine_similarity"]),
                      r["app_first"] == "1", float(r["app_timestamp"]), float(r["other_timestamp"]))
            for r in csv.DictReader(fh)
        ]
