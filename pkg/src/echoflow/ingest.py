"""Parsing of platform dumps into canonical records.

Tweets and users arrive as JSON-lines files whose field names follow the
public tweet-object vocabulary (``id_str``, ``text``, ``user.id_str``,
``user.followers_count``, ``place.full_name`` ...).  Edge lists arrive as
two-column CSV files.  A :class:`Schema` lets other dumps rename fields.
"""

from __future__ import annotations

import csv
import enum
import json
import logging
import re
from collections import Counter
from dataclasses import dataclass, field, fields, replace
from datetime import datetime
from pathlib import Path
from typing import Iterable, Mapping

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1


class SourceTag(str, enum.Enum):
    APP_MYNT = "AppMyNt"
    APP_NAMO = "AppNaMo"
    OTHER = "Other"

    @property
    def is_app(self) -> bool:
        return self is not SourceTag.OTHER


class Affiliation(str, enum.Enum):
    PRO_BJP = "ProBJP"
    OTHER = "Other"
    UNKNOWN = "Unknown"


class Role(str, enum.Enum):
    SEED = "Seed"
    AUXILIARY = "Auxiliary"
    NONE = "None"


class Removed(enum.Enum):
    """Marker for users dropped by the location filter."""

    REMOVED = "Removed"

    def __repr__(self):
        return "REMOVED"


REMOVED = Removed.REMOVED

# suffixes are compared lowercase after stripping trailing whitespace
APP_SUFFIXES = {
    SourceTag.APP_MYNT: "via mynt",
    SourceTag.APP_NAMO: "via namo app",
}


@dataclass(frozen=True)
class TweetRecord:
    tweet_id: str
    user_id: str
    timestamp: float
    text: str
    hashtags: tuple[str, ...] = ()
    source_tag: SourceTag = SourceTag.OTHER
    retweet_of: str | None = None
    like_count: int = 0
    retweet_count: int = 0
    image_refs: tuple[str, ...] = ()
    place_name: str | None = None
    geo_enabled: bool = False

    def __post_init__(self):
        if not self.timestamp > 0:
            raise ValueError(f"tweet {self.tweet_id}: timestamp must be positive")
        if self.like_count < 0 or self.retweet_count < 0:
            raise ValueError(f"tweet {self.tweet_id}: negative engagement count")
        object.__setattr__(self, "hashtags", tuple(normalize_hashtag(h) for h in self.hashtags))


@dataclass
class UserProfile:
    user_id: str
    screen_name: str = ""
    description: str = ""
    followers_count: int = 0
    location_raw: str | None = None
    geo_enabled: bool = False
    state: str | None = None
    affiliation: Affiliation = Affiliation.UNKNOWN
    role: Role = Role.NONE


@dataclass
class DatasetBundle:
    tweets: list[TweetRecord] = field(default_factory=list)
    users: dict[str, UserProfile] = field(default_factory=dict)
    follow_edges: list[tuple[str, str]] = field(default_factory=list)
    retweet_edges: list[tuple[str, str]] = field(default_factory=list)
    time_window: tuple[float, float] = (0.0, 0.0)
    unknown_users: set[str] = field(default_factory=set)
    skipped_lines: int = 0

    def tweets_by_user(self) -> dict[str, list[TweetRecord]]:
        out: dict[str, list[TweetRecord]] = {}
        for t in self.tweets:
            out.setdefault(t.user_id, []).append(t)
        return out

    def tweet_index(self) -> dict[str, TweetRecord]:
        return {t.tweet_id: t for t in self.tweets}


@dataclass(frozen=True)
class Schema:
    """Dotted field paths into each JSON record.

    Paths may point into nested objects (``"user.id_str"``).  Rename a path to
    read dumps with a different layout.
    """

    tweet_id: str = "id_str"
    created_at: str = "created_at"
    text: str = "text"
    source_text: str = "text"
    hashtags: str = "entities.hashtags"
    user_id: str = "user.id_str"
    retweet_of: str = "retweeted_status.id_str"
    like_count: str = "favorite_count"
    retweet_count: str = "retweet_count"
    image_refs: str = "image_refs"
    place_name: str = "place.full_name"
    geo_enabled: str = "user.geo_enabled"
    # user objects, both standalone (users.jsonl) and embedded under "user"
    user_key: str = "user"
    u_id: str = "id_str"
    u_screen_name: str = "screen_name"
    u_description: str = "description"
    u_followers: str = "followers_count"
    u_location: str = "location"
    u_geo_enabled: str = "geo_enabled"

    @classmethod
    def from_mapping(cls, mapping: Mapping[str, str]) -> "Schema":
        known = {f.name for f in fields(cls)}
        unknown = set(mapping) - known
        if unknown:
            raise ValueError(f"unknown schema keys: {sorted(unknown)}")
        return replace(cls(), **mapping)


def _get(record: Mapping, path: str, default=None):
    cur = record
    for part in path.split("."):
        if not isinstance(cur, Mapping) or part not in cur:
            return default
        cur = cur[part]
    return cur


def normalize_hashtag(tag: str) -> str:
    return tag.lstrip("#").lower()


_HASHTAG_RE = re.compile(r"#(\w+)")


def detect_source(raw_source_text: str | None) -> SourceTag:
    """Classify a post by the app tag at the end of its text.

    Matching is case-insensitive and ignores trailing whitespace; the tag must
    be a suffix, occurrences elsewhere in the text do not count.
    """
    if not raw_source_text:
        return SourceTag.OTHER
    tail = raw_source_text.rstrip().lower()
    for tag, suffix in APP_SUFFIXES.items():
        if tail.endswith(suffix):
            return tag
    return SourceTag.OTHER


_TWITTER_TIME = "%a %b %d %H:%M:%S %z %Y"


def parse_timestamp(value) -> float:
    """Epoch seconds from a number, a Twitter ``created_at`` string or ISO-8601."""
    if isinstance(value, bool):
        raise ValueError("boolean is not a timestamp")
    if isinstance(value, (int, float)):
        return float(value)
    if isinstance(value, str):
        s = value.strip()
        try:
            return float(s)
        except ValueError:
            pass
        try:
            return datetime.strptime(s, _TWITTER_TIME).timestamp()
        except ValueError:
            pass
        dt = datetime.fromisoformat(s.replace("Z", "+00:00"))
        if dt.tzinfo is None:
            raise ValueError(f"timestamp without timezone: {value!r}")
        return dt.timestamp()
    raise ValueError(f"cannot parse timestamp {value!r}")


def _hashtags_from(record: Mapping, schema: Schema, text: str) -> list[str]:
    raw = _get(record, schema.hashtags)
    if raw is None:
        return _HASHTAG_RE.findall(text)
    out = []
    for h in raw:
        out.append(h["text"] if isinstance(h, Mapping) else str(h))
    return out


def _image_refs_from(record: Mapping, schema: Schema) -> list[str]:
    refs = _get(record, schema.image_refs)
    if refs is not None:
        return [str(r) for r in refs]
    media = _get(record, "extended_entities.media") or []
    return [m["media_url_https"] for m in media if m.get("type", "photo") == "photo"]


def _nonneg_int(value, name: str) -> int:
    v = int(value or 0)
    if v < 0:
        raise ValueError(f"{name} is negative")
    return v


def _user_from(obj: Mapping, schema: Schema) -> UserProfile:
    uid = _get(obj, schema.u_id)
    if uid is None:
        raise ValueError("user record without id")
    return UserProfile(
        user_id=str(uid),
        screen_name=str(_get(obj, schema.u_screen_name) or ""),
        description=str(_get(obj, schema.u_description) or ""),
        followers_count=_nonneg_int(_get(obj, schema.u_followers), "followers_count"),
        location_raw=_get(obj, schema.u_location) or None,
        geo_enabled=bool(_get(obj, schema.u_geo_enabled, False)),
    )


def tweet_from_record(record: Mapping, schema: Schema = Schema()) -> TweetRecord:
    text = _get(record, schema.text)
    if not isinstance(text, str):
        raise ValueError("tweet without text")
    tweet_id = _get(record, schema.tweet_id)
    user_id = _get(record, schema.user_id)
    if tweet_id is None or user_id is None:
        raise ValueError("tweet without id or author")
    retweet_of = _get(record, schema.retweet_of)
    return TweetRecord(
        tweet_id=str(tweet_id),
        user_id=str(user_id),
        timestamp=parse_timestamp(_get(record, schema.created_at)),
        text=text,
        hashtags=tuple(_hashtags_from(record, schema, text)),
        source_tag=detect_source(_get(record, schema.source_text)),
        retweet_of=None if retweet_of is None else str(retweet_of),
        like_count=_nonneg_int(_get(record, schema.like_count), "like_count"),
        retweet_count=_nonneg_int(_get(record, schema.retweet_count), "retweet_count"),
        image_refs=tuple(_image_refs_from(record, schema)),
        place_name=_get(record, schema.place_name),
        geo_enabled=bool(_get(record, schema.geo_enabled, False)),
    )


def _iter_jsonl(path: Path, counter: Counter):
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                yield json.loads(line)
            except json.JSONDecodeError:
                log.warning("%s:%d: malformed JSON, skipped", path, lineno)
                counter["skipped"] += 1


def read_edges(path: str | Path) -> list[tuple[str, str]]:
    """Read a ``from_id,to_id`` CSV.  A header row is detected and skipped."""
    edges = []
    with open(path, newline="", encoding="utf-8") as fh:
        for i, row in enumerate(csv.reader(fh)):
            if not row:
                continue
            if i == 0 and row[0].strip().lower() in ("from_id", "from", "source"):
                continue
            edges.append((row[0].strip(), row[1].strip()))
    return edges


def parse_dataset(
    tweet_paths: Iterable[str | Path] = (),
    user_paths: Iterable[str | Path] = (),
    follow_paths: Iterable[str | Path] = (),
    retweet_paths: Iterable[str | Path] = (),
    schema: Schema = Schema(),
) -> DatasetBundle:
    """Load JSON-lines tweets/users and CSV edge lists into a bundle.

    Malformed lines (bad JSON or records violating the tweet invariants) are
    logged and counted in ``bundle.skipped_lines``; an unreadable file raises.
    Users embedded in tweets fill in for users missing from the user files.
    Edge endpoints and authors with no profile are listed in
    ``bundle.unknown_users``.
    """
    counter: Counter = Counter()
    tweets: list[TweetRecord] = []
    users: dict[str, UserProfile] = {}
    seen_ids: set[str] = set()

    for path in user_paths:
        for rec in _iter_jsonl(Path(path), counter):
            try:
                u = _user_from(rec, schema)
            except (ValueError, TypeError, AttributeError) as exc:
                log.warning("%s: bad user record (%s), skipped", path, exc)
                counter["skipped"] += 1
                continue
            users[u.user_id] = u

    for path in tweet_paths:
        for rec in _iter_jsonl(Path(path), counter):
            try:
                t = tweet_from_record(rec, schema)
            except (ValueError, TypeError, KeyError, AttributeError) as exc:
                log.warning("%s: bad tweet record (%s), skipped", path, exc)
                counter["skipped"] += 1
                continue
            if t.tweet_id in seen_ids:
                continue
            seen_ids.add(t.tweet_id)
            tweets.append(t)
            embedded = _get(rec, schema.user_key)
            if t.user_id not in users and isinstance(embedded, Mapping):
                try:
                    users[t.user_id] = _user_from(embedded, schema)
                except (ValueError, TypeError):
                    pass

    follow = [e for p in follow_paths for e in read_edges(p)]
    retweet = [e for p in retweet_paths for e in read_edges(p)]

    referenced = {t.user_id for t in tweets}
    referenced.update(x for e in follow + retweet for x in e)
    unknown = referenced - set(users)

    if tweets:
        stamps = [t.timestamp for t in tweets]
        window = (min(stamps), max(stamps))
    else:
        window = (0.0, 0.0)
    return DatasetBundle(
        tweets=tweets,
        users=users,
        follow_edges=follow,
        retweet_edges=retweet,
        time_window=window,
        unknown_users=unknown,
        skipped_lines=counter["skipped"],
    )


def classify_users(bundle: DatasetBundle, matched_tweet_ids: set[str]) -> dict[str, Role]:
    """Assign Seed/Auxiliary roles in place and return the role map.

    Seed wins over Auxiliary when a user qualifies for both.  Only the tagged
    post itself counts as app-sourced; retweets of it do not carry the tag.
    """
    tagged: set[str] = set()
    matched: set[str] = set()
    for t in bundle.tweets:
        if t.source_tag.is_app:
            tagged.add(t.user_id)
        if t.tweet_id in matched_tweet_ids:
            matched.add(t.user_id)
    roles: dict[str, Role] = {}
    for uid, user in bundle.users.items():
        if uid in tagged:
            role = Role.SEED
        elif uid in matched:
            role = Role.AUXILIARY
        else:
            role = Role.NONE
        user.role = role
        roles[uid] = role
    return roles


def affected_users(bundle: DatasetBundle) -> set[str]:
    return {uid for uid, u in bundle.users.items() if u.role is not Role.NONE}


def filter_active_users(
    bundles: DatasetBundle | Iterable[DatasetBundle],
    popular_hashtags: set[str],
    min_tweets: int = 50,
) -> set[str]:
    """Users with at least ``min_tweets`` tweets and one popular hashtag.

    With several bundles the result is the intersection of the per-bundle
    survivor sets.
    """
    if min_tweets < 1:
        raise ValueError("min_tweets must be >= 1")
    if not popular_hashtags:
        raise ValueError("popular_hashtags is empty; activity criterion undefined")
    popular = {normalize_hashtag(h) for h in popular_hashtags}
    if isinstance(bundles, DatasetBundle):
        bundles = [bundles]
    result: set[str] | None = None
    for bundle in bundles:
        counts: Counter = Counter()
        uses_popular: set[str] = set()
        for t in bundle.tweets:
            counts[t.user_id] += 1
            if popular.intersection(t.hashtags):
                uses_popular.add(t.user_id)
        survivors = {u for u, c in counts.items() if c >= min_tweets and u in uses_popular}
        result = survivors if result is None else result & survivors
    return result or set()


# --- location -------------------------------------------------------------

def load_city_to_state(path: str | Path) -> dict[str, str]:
    out = {}
    with open(path, newline="", encoding="utf-8") as fh:
        for i, row in enumerate(csv.reader(fh)):
            if not row or (i == 0 and row[0].strip().lower() == "city"):
                continue
            out[row[0].strip()] = row[1].strip()
    return out


def load_place_list(path: str | Path) -> list[str]:
    with open(path, encoding="utf-8") as fh:
        return [ln.strip() for ln in fh if ln.strip() and not ln.startswith("#")]


class LocationMapper:
    """Resolve free-text locations to Indian states.

    Names are matched on word boundaries, longest first, so "New Delhi" is not
    also counted as "Delhi".  State names resolve to themselves.
    """

    def __init__(self, city_to_state: Mapping[str, str], foreign_places: Iterable[str] = ()):
        self.city_to_state = {k.lower(): v for k, v in city_to_state.items()}
        for state in set(city_to_state.values()):
            self.city_to_state.setdefault(state.lower(), state)
        self.foreign = {p.lower() for p in foreign_places}
        names = sorted(set(self.city_to_state) | self.foreign, key=lambda s: (-len(s), s))
        self._pattern = re.compile(
            r"(?<!\w)(" + "|".join(re.escape(n) for n in names) + r")(?!\w)"
        ) if names else None

    def find_places(self, text: str) -> list[str]:
        if not self._pattern or not text:
            return []
        return [m.group(1) for m in self._pattern.finditer(text.lower())]

    def resolve(self, text: str | None) -> str | None | Removed:
        hits = self.find_places(text or "")
        if not hits:
            return None
        if any(h in self.foreign for h in hits):
            return REMOVED
        indian = set(hits)
        cities = {h for h in indian if self.city_to_state[h].lower() != h}
        if len(cities) > 1:
            return REMOVED
        states = {self.city_to_state[h] for h in indian}
        if len(states) > 1:
            return REMOVED
        return states.pop()


def map_location(
    user: UserProfile,
    place_name: str | None,
    mapper: LocationMapper,
) -> str | None | Removed:
    """Location of a user: the geotag place if geo-enabled, else the profile text."""
    text = place_name if user.geo_enabled and place_name else user.location_raw
    return mapper.resolve(text)


def assign_states(bundle: DatasetBundle, mapper: LocationMapper) -> dict[str, str | None | Removed]:
    """Run :func:`map_location` for every user, filling ``UserProfile.state``.

    The place name comes from the user's most recent geotagged tweet.
    """
    latest_place: dict[str, tuple[float, str]] = {}
    for t in bundle.tweets:
        if t.place_name:
            prev = latest_place.get(t.user_id)
            if prev is None or t.timestamp > prev[0]:
                latest_place[t.user_id] = (t.timestamp, t.place_name)
    out = {}
    for uid, user in bundle.users.items():
        place = latest_place.get(uid, (0, None))[1]
        res = map_location(user, place, mapper)
        user.state = res if isinstance(res, str) else None
        out[uid] = res
    return out
