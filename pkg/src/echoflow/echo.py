"""Production and consumption polarity of users.

Each partisan hashtag gets a binary score (1 for the pro-BJP pole, 0 for the
other pole).  A user's production statistics are the mean and population
variance of the scores of the hashtags they post; consumption statistics pool
the hashtags posted by everyone they follow.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Mapping

import networkx as nx

from .ingest import Affiliation, DatasetBundle
from .lexicon import HashtagLabel

DEFAULT_SCORES = {
    HashtagLabel.PRO_BJP: 1,
    HashtagLabel.ANTI_CONGRESS: 1,
    HashtagLabel.ANTI_BJP: 0,
    HashtagLabel.PRO_CONGRESS: 0,
}


def hashtag_score(label: HashtagLabel | None, scores: Mapping[HashtagLabel, int] = DEFAULT_SCORES) -> int | None:
    """0/1 score of a label; None for neutral or unlabeled hashtags."""
    if label is None:
        return None
    return scores.get(label)


@dataclass(frozen=True)
class PolarityProfile:
    production_polarity: Fraction
    production_variance: Fraction
    consumption_polarity: Fraction | None
    consumption_variance: Fraction | None
    produced_hashtag_count: int
    consumed_hashtag_count: int


def bernoulli_stats(scores: Iterable[int]) -> tuple[Fraction, Fraction, int] | None:
    """Exact mean and population variance of 0/1 scores, or None if empty."""
    n = ones = 0
    for s in scores:
        n += 1
        ones += s
    if n == 0:
        return None
    p = Fraction(ones, n)
    return p, p * (1 - p), n


class _Scorer:
    def __init__(self, bundle: DatasetBundle, lexicon: Mapping[str, HashtagLabel],
                 scores: Mapping[HashtagLabel, int]):
        self.by_user: dict[str, list[int]] = {}
        for t in bundle.tweets:
            bucket = self.by_user.setdefault(t.user_id, [])
            for h in t.hashtags:
                s = hashtag_score(lexicon.get(h), scores)
                if s is not None:
                    bucket.append(s)

    def scores(self, uid: str) -> list[int]:
        return self.by_user.get(uid, [])


def followees(follow_graph: nx.DiGraph, uid: str) -> list[str]:
    """Accounts ``uid`` follows.  Follow-graph edges run followee -> follower."""
    if uid not in follow_graph:
        return []
    return sorted(follow_graph.predecessors(uid))


def _profile(scorer: _Scorer, uid: str, follow_graph: nx.DiGraph) -> PolarityProfile | None:
    prod = bernoulli_stats(scorer.scores(uid))
    if prod is None:
        return None
    pooled = [s for v in followees(follow_graph, uid) for s in scorer.scores(v)]
    cons = bernoulli_stats(pooled)
    return PolarityProfile(
        production_polarity=prod[0],
        production_variance=prod[1],
        consumption_polarity=cons[0] if cons else None,
        consumption_variance=cons[1] if cons else None,
        produced_hashtag_count=prod[2],
        consumed_hashtag_count=cons[2] if cons else 0,
    )


def polarity_profile(
    user: str,
    bundle: DatasetBundle,
    lexicon: Mapping[str, HashtagLabel],
    follow_graph: nx.DiGraph,
    scores: Mapping[HashtagLabel, int] = DEFAULT_SCORES,
) -> PolarityProfile | None:
    """Polarity statistics of one user; None if they posted no scored hashtag."""
    if user not in bundle.users:
        raise KeyError(f"user {user!r} not in bundle")
    return _profile(_Scorer(bundle, lexicon, scores), user, follow_graph)


def polarity_profiles(
    bundle: DatasetBundle,
    lexicon: Mapping[str, HashtagLabel],
    follow_graph: nx.DiGraph,
    users: Iterable[str] | None = None,
    scores: Mapping[HashtagLabel, int] = DEFAULT_SCORES,
) -> dict[str, PolarityProfile]:
    """Profiles for many users at once; users without scored hashtags are left out."""
    scorer = _Scorer(bundle, lexicon, scores)
    out = {}
    for uid in sorted(bundle.users if users is None else users):
        prof = _profile(scorer, uid, follow_graph)
        if prof is not None:
            out[uid] = prof
    return out


def _fmt(x: Fraction | None) -> str:
    return "" if x is None else f"{float(x):.6f}"


def write_polarity_csv(
    path: str | Path,
    profiles: Mapping[str, PolarityProfile],
    affiliations: Mapping[str, Affiliation] | None = None,
) -> None:
    affiliations = affiliations or {}
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["user_id", "production_polarity", "production_variance",
                    "consumption_polarity", "consumption_variance", "affiliation"])
        for uid in sorted(profiles):
            p = profiles[uid]
            a = affiliations.get(uid, Affiliation.UNKNOWN)
            w.writerow([uid, _fmt(p.production_polarity), _fmt(p.production_variance),
                        _fmt(p.consumption_polarity), _fmt(p.consumption_variance), a.value])
