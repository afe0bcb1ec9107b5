"""Reachability tables: follower-normalized engagement with its ECDFs, plus per-state user shares."""

from __future__ import annotations

import csv
from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .ingest import DatasetBundle, TweetRecord
from .match.temporal import TweetPair


@dataclass(frozen=True)
class EngagementRecord:
    tweet_id: str
    likes: int
    retweets: int
    followers: int
    likes_norm: float | None = None  # None when followers == 0
    retweets_norm: float | None = None
    paired_tweet_id: str | None = None

    @property
    def normalizable(self) -> bool:
        return self.followers > 0


def engagement_record(tweet: TweetRecord, followers: int, paired_tweet_id: str | None = None) -> EngagementRecord:
    if followers > 0:
        ln, rn = tweet.like_count / followers, tweet.retweet_count / followers
    else:
        ln = rn = None
    return EngagementRecord(tweet.tweet_id, tweet.like_count, tweet.retweet_count, followers,
                            ln, rn, paired_tweet_id)


@dataclass
class EngagementTable:
    """Aligned app/other records, one index per pair."""

    app: list[EngagementRecord] = field(default_factory=list)
    other: list[EngagementRecord] = field(default_factory=list)
    zero_follower_excluded: int = 0  # records left out of the normalized outputs
    missing: int = 0  # pairs naming a tweet absent from the bundle

    def __len__(self) -> int:
        return len(self.app)

    def normalized_pairs(self) -> list[tuple[EngagementRecord, EngagementRecord]]:
        return [(a, o) for a, o in zip(self.app, self.other) if a.normalizable and o.normalizable]


def normalized_engagement(pairs: Sequence[TweetPair], bundle: DatasetBundle) -> EngagementTable:
    """Raw and follower-normalized likes/retweets of both sides of every pair.

    Followers come from the author's profile.  Records whose author has zero
    followers keep their raw counts but get no normalized values, and each is
    counted in ``zero_follower_excluded``.
    """
    index = bundle.tweet_index()
    table = EngagementTable()
    for p in pairs:
        a, o = index.get(p.app_tweet_id), index.get(p.other_tweet_id)
        if a is None or o is None:
            table.missing += 1
            continue
        fa, fo = _followers(bundle, a.user_id), _followers(bundle, o.user_id)
        ra, ro = engagement_record(a, fa, o.tweet_id), engagement_record(o, fo, a.tweet_id)
        table.zero_follower_excluded += (not ra.normalizable) + (not ro.normalizable)
        table.app.append(ra)
        table.other.append(ro)
    return table


def _followers(bundle: DatasetBundle, uid: str) -> int:
    u = bundle.users.get(uid)
    return u.followers_count if u is not None else 0


def ecdf(values: Iterable[float]) -> list[tuple[float, float]]:
    """Right-continuous empirical CDF as (x, F(x)) at each distinct value."""
    v = np.asarray(list(values), dtype=float)
    if v.size == 0:
        raise ValueError("ecdf of an empty sample")
    xs, counts = np.unique(v, return_counts=True)
    cum = np.cumsum(counts)
    return [(float(x), float(c) / v.size) for x, c in zip(xs, cum)]


def pearson(x: Sequence[float], y: Sequence[float]) -> float:
    """Pearson correlation; nan when either side is constant or n < 2."""
    x, y = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
    if x.size < 2 or x.std() == 0 or y.std() == 0:
        return float("nan")
    return float(np.corrcoef(x, y)[0, 1])


def paired_summary(table: EngagementTable) -> dict:
    norm = table.normalized_pairs()
    return {
        "pairs": len(table),
        "normalized_pairs": len(norm),
        "zero_follower_excluded": table.zero_follower_excluded,
        "missing_tweets": table.missing,
        "likes_correlation": _round(pearson([a.likes for a in table.app], [o.likes for o in table.other])),
        "retweets_correlation": _round(pearson([a.retweets for a in table.app], [o.retweets for o in table.other])),
        "likes_norm_correlation": _round(pearson([a.likes_norm for a, _ in norm], [o.likes_norm for _, o in norm])),
        "retweets_norm_correlation": _round(
            pearson([a.retweets_norm for a, _ in norm], [o.retweets_norm for _, o in norm])),
    }


def _round(x: float) -> float | None:
    return None if np.isnan(x) else round(x, 6)


def state_fractions(
    affected: Iterable[str],
    all_users: Iterable[str],
    states: Mapping[str, object],
) -> list[tuple[str, Fraction, Fraction]]:
    """Per-state share of affected users and of all users.

    Only users whose state resolved to a name count; each column sums to 1
    (or is all zero when no user resolved).  Rows are sorted by the affected
    share, largest first, then by state name.
    """
    def shares(uids):
        c = Counter(s for u in uids if isinstance(s := states.get(u), str))
        n = sum(c.values())
        return c, n

    ca, na = shares(set(affected))
    cg, ng = shares(set(all_users))
    rows = []
    for st in set(ca) | set(cg):
        fa = Fraction(ca[st], na) if na else Fraction(0)
        fg = Fraction(cg[st], ng) if ng else Fraction(0)
        rows.append((st, fa, fg))
    rows.sort(key=lambda r: (-r[1], -r[2], r[0]))
    return rows


# --- writers -----------------------------------------------------------------

def _fmt(x: float | None) -> str:
    return "" if x is None else f"{x:.8f}"


def write_engagement_csv(path: str | Path, table: EngagementTable) -> None:
    """Scatter-plot table: one row per pair, normalized cells blank when excluded."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["app_tweet_id", "other_tweet_id",
                    "app_likes", "app_retweets", "app_followers", "app_likes_norm", "app_retweets_norm",
                    "other_likes", "other_retweets", "other_followers", "other_likes_norm",
                    "other_retweets_norm"])
        for a, o in zip(table.app, table.other):
            w.writerow([a.tweet_id, o.tweet_id,
                        a.likes, a.retweets, a.followers, _fmt(a.likes_norm), _fmt(a.retweets_norm),
                        o.likes, o.retweets, o.followers, _fmt(o.likes_norm), _fmt(o.retweets_norm)])


def write_ecdf_csv(path: str | Path, series: Mapping[str, Sequence[float]]) -> None:
    """Long-format ECDF table with one block per named sample; empty samples are skipped."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["series", "x", "F"])
        for name in sorted(series):
            if len(series[name]) == 0:
                continue
            for x, f in ecdf(series[name]):
                w.writerow([name, f"{x:.8g}", f"{f:.8f}"])


def write_state_fractions_csv(path: str | Path, rows: Sequence[tuple[str, Fraction, Fraction]]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["state", "frac_affected", "frac_general"])
        for st, fa, fg in rows:
            w.writerow([st, f"{float(fa):.6f}", f"{float(fg):.6f}"])
