"""Hashtag lexicon and user affiliation assignment.

Affiliation is decided in three stages, each overriding the next: a curated
handle list, keywords in the screen name / description, and finally the
leaning ratios of the user's annotated hashtags.
"""

from __future__ import annotations

import csv
import enum
import json
import re
from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .ingest import Affiliation, DatasetBundle, normalize_hashtag


class HashtagLabel(str, enum.Enum):
    PRO_BJP = "pro-bjp"
    ANTI_BJP = "anti-bjp"
    PRO_CONGRESS = "pro-congress"
    ANTI_CONGRESS = "anti-congress"
    NEUTRAL = "neutral"


PARTISAN = (
    HashtagLabel.PRO_BJP,
    HashtagLabel.PRO_CONGRESS,
    HashtagLabel.ANTI_BJP,
    HashtagLabel.ANTI_CONGRESS,
)

# Which pole each partisan label supports.  Anti-Congress sides with the
# pro-BJP pole by default.
DEFAULT_POLE = {
    HashtagLabel.PRO_BJP: Affiliation.PRO_BJP,
    HashtagLabel.ANTI_CONGRESS: Affiliation.PRO_BJP,
    HashtagLabel.ANTI_BJP: Affiliation.OTHER,
    HashtagLabel.PRO_CONGRESS: Affiliation.OTHER,
}


class HashtagLexicon(dict):
    """Mapping of lowercase hashtag -> :class:`HashtagLabel`.

    Hashtags absent from the mapping are *unlabeled*, which is not the same
    as :attr:`HashtagLabel.NEUTRAL`.
    """

    def label(self, hashtag: str) -> HashtagLabel | None:
        return self.get(normalize_hashtag(hashtag))

    @classmethod
    def from_csv(cls, path: str | Path) -> "HashtagLexicon":
        lex = cls()
        with open(path, newline="", encoding="utf-8") as fh:
            for i, row in enumerate(csv.reader(fh)):
                if not row or (i == 0 and row[0].strip().lower() == "hashtag"):
                    continue
                lex[normalize_hashtag(row[0].strip())] = HashtagLabel(row[1].strip().lower())
        return lex

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["hashtag", "label"])
            for tag in sorted(self):
                w.writerow([tag, self[tag].value])


@dataclass(frozen=True)
class LeaningRatios:
    pro_bjp_ratio: Fraction = Fraction(0)
    pro_congress_ratio: Fraction = Fraction(0)
    anti_bjp_ratio: Fraction = Fraction(0)
    anti_congress_ratio: Fraction = Fraction(0)
    annotated_count: int = 0
    not_neutral_count: int = 0
    total_hashtags: int = 0
    percent_used: Fraction = Fraction(0)

    def ratio(self, label: HashtagLabel) -> Fraction:
        return {
            HashtagLabel.PRO_BJP: self.pro_bjp_ratio,
            HashtagLabel.PRO_CONGRESS: self.pro_congress_ratio,
            HashtagLabel.ANTI_BJP: self.anti_bjp_ratio,
            HashtagLabel.ANTI_CONGRESS: self.anti_congress_ratio,
        }[label]


def compute_leaning_ratios(hashtags: Iterable[str], lexicon: Mapping[str, HashtagLabel]) -> LeaningRatios:
    """Leaning attributes of one user's hashtag multiset (repeats count).

    ``annotated`` counts the four partisan labels; ``not_neutral`` adds the
    hashtags missing from the lexicon; ``percent_used`` is their quotient.
    """
    counts: Counter = Counter()
    total = 0
    for h in hashtags:
        total += 1
        counts[lexicon.get(normalize_hashtag(h))] += 1
    annotated = sum(counts[lab] for lab in PARTISAN)
    not_neutral = annotated + counts[None]
    if annotated == 0:
        return LeaningRatios(not_neutral_count=not_neutral, total_hashtags=total)
    return LeaningRatios(
        pro_bjp_ratio=Fraction(counts[HashtagLabel.PRO_BJP], annotated),
        pro_congress_ratio=Fraction(counts[HashtagLabel.PRO_CONGRESS], annotated),
        anti_bjp_ratio=Fraction(counts[HashtagLabel.ANTI_BJP], annotated),
        anti_congress_ratio=Fraction(counts[HashtagLabel.ANTI_CONGRESS], annotated),
        annotated_count=annotated,
        not_neutral_count=not_neutral,
        total_hashtags=total,
        percent_used=Fraction(annotated, not_neutral),
    )


def assign_affiliation(
    ratios: LeaningRatios,
    threshold: Fraction | float = Fraction(1, 10),
    pole: Mapping[HashtagLabel, Affiliation] = DEFAULT_POLE,
) -> Affiliation:
    """Affiliation from the largest leaning ratio.

    Users whose ``percent_used`` falls below ``threshold`` stay Unknown, as do
    users whose maximal ratios are tied between labels of different poles.
    """
    threshold = Fraction(threshold)
    if not 0 <= threshold <= 1:
        raise ValueError(f"threshold must lie in [0, 1], got {threshold}")
    if ratios.annotated_count == 0 or ratios.percent_used < threshold:
        return Affiliation.UNKNOWN
    best = max(ratios.ratio(lab) for lab in PARTISAN)
    winners = {pole[lab] for lab in PARTISAN if ratios.ratio(lab) == best}
    if len(winners) != 1:
        return Affiliation.UNKNOWN
    return winners.pop()


@dataclass
class KeywordConfig:
    bjp_screen_name: list[str] = field(default_factory=lambda: ["bjp", "modi", "namo"])
    bjp_description: list[str] = field(default_factory=lambda: [
        "bjp", "modi", "namo", "narendra modi", "bhartiya janta party", "amit shah",
        "amitshah", "narendramodi", "bjp4india",
    ])
    congress_screen_name: list[str] = field(default_factory=lambda: ["congress", "inc", "cong"])
    congress_description: list[str] = field(default_factory=lambda: [
        "rahul gandhi", "congress", "inc", "priyanka gandhi", "raga", "shashi tharoor",
    ])

    @classmethod
    def from_json(cls, path: str | Path) -> "KeywordConfig":
        with open(path, encoding="utf-8") as fh:
            return cls(**json.load(fh))


def _word_pattern(words: Sequence[str]) -> re.Pattern:
    alts = "|".join(re.escape(w.lower()) for w in sorted(words, key=len, reverse=True))
    return re.compile(rf"(?<!\w)(?:{alts})(?!\w)")


def _decide(bjp_hit: bool, cong_hit: bool) -> Affiliation | None:
    if bjp_hit and not cong_hit:
        return Affiliation.PRO_BJP
    if cong_hit and not bjp_hit:
        return Affiliation.OTHER
    return None


def metadata_affiliation(
    screen_name: str,
    description: str,
    keywords: KeywordConfig | None = None,
) -> Affiliation | None:
    """Affiliation from profile metadata, or None if absent or ambiguous.

    The screen name is searched for keyword substrings first; only if it hits
    nothing is the description searched for whole-word keywords.  Hits for
    both parties at either step give None.
    """
    kw = keywords or KeywordConfig()
    name = (screen_name or "").lower()
    bjp = any(k in name for k in kw.bjp_screen_name)
    cong = any(k in name for k in kw.congress_screen_name)
    if bjp or cong:
        return _decide(bjp, cong)
    desc = (description or "").lower()
    bjp = bool(_word_pattern(kw.bjp_description).search(desc))
    cong = bool(_word_pattern(kw.congress_description).search(desc))
    return _decide(bjp, cong)


def load_curated(path: str | Path) -> dict[str, Affiliation]:
    """Read ``user_id,affiliation``; labels BJP/ProBJP map to ProBJP, any other party to Other."""
    out = {}
    with open(path, newline="", encoding="utf-8") as fh:
        for i, row in enumerate(csv.reader(fh)):
            if not row or (i == 0 and row[0].strip().lower() == "user_id"):
                continue
            label = row[1].strip()
            if label.lower() in ("probjp", "bjp", "pro-bjp"):
                out[row[0].strip()] = Affiliation.PRO_BJP
            elif label.lower() == "unknown":
                out[row[0].strip()] = Affiliation.UNKNOWN
            else:
                out[row[0].strip()] = Affiliation.OTHER
    return out


@dataclass(frozen=True)
class PartitionResult:
    affiliation: dict[str, Affiliation]
    stage: dict[str, str]
    ratios: dict[str, LeaningRatios]


def partition_users(
    bundle: DatasetBundle,
    lexicon: Mapping[str, HashtagLabel],
    curated: Mapping[str, Affiliation] | None = None,
    keywords: KeywordConfig | None = None,
    threshold: Fraction | float = Fraction(1, 10),
    users: Iterable[str] | None = None,
    pole: Mapping[HashtagLabel, Affiliation] = DEFAULT_POLE,
) -> PartitionResult:
    """Run the three affiliation stages over ``users`` (default: all users).

    Sets ``UserProfile.affiliation`` in place.  ``stage`` records which step
    decided each user: ``curated``, ``metadata``, ``hashtags`` or ``none``.
    """
    curated = curated or {}
    uids = sorted(bundle.users if users is None else users)
    tags_by_user: dict[str, list[str]] = {}
    for t in bundle.tweets:
        tags_by_user.setdefault(t.user_id, []).extend(t.hashtags)
    affil, stage, ratios = {}, {}, {}
    for uid in uids:
        prof = bundle.users.get(uid)
        r = compute_leaning_ratios(tags_by_user.get(uid, ()), lexicon)
        ratios[uid] = r
        if uid in curated:
            a, s = curated[uid], "curated"
        else:
            a = metadata_affiliation(prof.screen_name, prof.description, keywords) if prof else None
            if a is not None:
                s = "metadata"
            else:
                a = assign_affiliation(r, threshold, pole)
                s = "hashtags" if a is not Affiliation.UNKNOWN else "none"
        affil[uid], stage[uid] = a, s
        if prof is not None:
            prof.affiliation = a
    return PartitionResult(affil, stage, ratios)


def threshold_sweep(
    ratios: Iterable[LeaningRatios],
    thresholds: Sequence[Fraction | float],
    pole: Mapping[HashtagLabel, Affiliation] = DEFAULT_POLE,
) -> list[dict]:
    """Affiliation counts for each threshold (ascending) over the hashtag stage."""
    ths = [Fraction(t) for t in thresholds]
    if ths != sorted(ths):
        raise ValueError("thresholds must be sorted ascending")
    ratios = list(ratios)
    rows = []
    for th, raw in zip(ths, thresholds):
        c = Counter(assign_affiliation(r, th, pole) for r in ratios)
        rows.append({
            "threshold": raw,
            Affiliation.PRO_BJP.value: c[Affiliation.PRO_BJP],
            Affiliation.OTHER.value: c[Affiliation.OTHER],
            Affiliation.UNKNOWN.value: c[Affiliation.UNKNOWN],
        })
    return rows


def write_affiliations(path: str | Path, result: PartitionResult) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["user_id", "affiliation", "stage", "percent_used", "annotated_count"])
        for uid in sorted(result.affiliation):
            r = result.ratios[uid]
            w.writerow([uid, result.affiliation[uid].value, result.stage[uid],
                        f"{float(r.percent_used):.6f}", r.annotated_count])


def read_affiliations(path: str | Path) -> dict[str, Affiliation]:
    with open(path, newline="", encoding="utf-8") as fh:
        return {row["user_id"]: Affiliation(row["affiliation"]) for row in csv.DictReader(fh)}
