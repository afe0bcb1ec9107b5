"""Deterministic synthetic fixtures with planted ground truth.

A fixture directory holds every input the pipeline reads (tweets, users,
edge lists, lexicon, location tables, images, per-image event logs) plus a
``config.json`` that runs the pipeline on it and a ``manifest.json`` that
records what was planted.  The same seed always reproduces the same bytes.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Mapping

import numpy as np
from PIL import Image, ImageEnhance

from .hawkes import HawkesModel, geometric_p_for_mean, geometric_pmf, simulate
from .match.image import hamming, phash64

FIXTURE_VERSION = 1
BASE_EPOCH = 1577836800  # 2020-01-01T00:00:00Z

DEFAULT_SPEC = {
    "n_users": 200,
    "tweets_per_user": 10,
    "blocks": 3,
    "follow_p_in": 0.12,
    "follow_p_out": 0.004,
    "retweet_p_in": 0.05,
    "retweet_p_out": 0.002,
    "days": 14,
    "n_templates": 8,
    "n_seed_users": 24,
    "app_tweets_per_seed": 3,
    "n_auxiliary_users": 16,
    "copies_per_auxiliary": 2,
    "pure_group_size": 10,
    "zero_follower_users": 8,
    "image_groups": 6,
    "copies_per_image": 3,
    "noise_images": 2,
    "hawkes": {
        "platforms": ["namo", "twitter"],
        "background": [0.02, 0.03],
        "weights": [[0.2, 0.1], [0.15, 0.25]],
        "dt_max": 60,
        "minutes": 4320,
    },
}

LEXICON = {
    "pro-bjp": ["namoagain", "istandwithmodi", "bharatwithmodi", "phirekbaarmodisarkar"],
    "anti-congress": ["congressmuktbharat", "pappupassnahihoga"],
    "anti-bjp": ["gobackmodi", "modifailed", "nocaa"],
    "pro-congress": ["congress4india", "ragaforpm", "inc4india"],
    "neutral": ["caa", "nrc", "india", "news", "delhi"],
}
UNLABELED_TAGS = ["cricket", "bollywood", "monsoon", "budget2020", "startup"]
POPULAR_HASHTAGS = ["caa", "nrc"]

CITY_TO_STATE = {
    "New Delhi": "NCT of Delhi", "Delhi": "NCT of Delhi", "Mumbai": "Maharashtra",
    "Pune": "Maharashtra", "Lucknow": "Uttar Pradesh", "Varanasi": "Uttar Pradesh",
    "Kanpur": "Uttar Pradesh", "Ahmedabad": "Gujarat", "Surat": "Gujarat",
    "Bengaluru": "Karnataka", "Kolkata": "West Bengal", "Chennai": "Tamil Nadu",
    "Jaipur": "Rajasthan", "Patna": "Bihar", "Hyderabad": "Telangana",
}
FOREIGN_PLACES = ["London", "New York", "Dubai", "Toronto", "United Kingdom", "USA"]

SEED_PHRASES = ["nation first", "proud indian", "jai hind", "भारत माता की जय", "development for all"]
AUX_PHRASES = ["news junkie", "views are personal", "cricket lover", "चाय प्रेमी", "retweets not endorsements"]

_SYLLABLES = ["ka", "ro", "mi", "tu", "ve", "sa", "lo", "pi", "ne", "da", "gu", "ze", "bo", "hi", "ya", "fe"]


def _pseudo_words(n: int, rng: np.random.Generator, reserved: set[str]) -> list[str]:
    out: list[str] = []
    seen = set(reserved)
    while len(out) < n:
        w = "".join(rng.choice(_SYLLABLES, size=int(rng.integers(2, 4))))
        if w not in seen:
            seen.add(w)
            out.append(w)
    return out


@dataclass
class FixtureManifest:
    seed: int
    counts: dict = field(default_factory=dict)
    planted: dict = field(default_factory=dict)
    expected: dict = field(default_factory=dict)
    version: int = FIXTURE_VERSION

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True, ensure_ascii=False) + "\n"

    @classmethod
    def read(cls, path: str | Path) -> "FixtureManifest":
        with open(path, encoding="utf-8") as fh:
            return cls(**json.load(fh))


def _merge_spec(spec: Mapping | None) -> dict:
    out = json.loads(json.dumps(DEFAULT_SPEC))
    for key, value in (spec or {}).items():
        if key not in out:
            raise ValueError(f"unknown synth spec key {key!r}")
        if isinstance(out[key], dict):
            out[key].update(value)
        else:
            out[key] = value
    return out


def _twitter_time(epoch: int) -> str:
    return datetime.fromtimestamp(epoch, tz=timezone.utc).strftime("%a %b %d %H:%M:%S +0000 %Y")


def _write_csv(path: Path, header: list[str], rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def _write_jsonl(path: Path, records) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for r in records:
            fh.write(json.dumps(r, ensure_ascii=False, sort_keys=True) + "\n")


# --- graph ---------------------------------------------------------------------

def planted_edges(
    blocks: list[int],
    p_in: float,
    p_out: float,
    rng: np.random.Generator,
) -> list[tuple[int, int]]:
    """Directed edges of a stochastic block model, ``i != j``."""
    b = np.asarray(blocks)
    n = len(b)
    probs = np.where(b[:, None] == b[None, :], p_in, p_out)
    np.fill_diagonal(probs, 0.0)
    hit = rng.random((n, n)) < probs
    return [(int(i), int(j)) for i, j in zip(*np.nonzero(hit))]


# --- images --------------------------------------------------------------------

def _base_image(rng: np.random.Generator) -> Image.Image:
    grid = (rng.random((6, 6)) * 255).astype(np.uint8)
    gray = Image.fromarray(grid, "L").resize((96, 96), Image.Resampling.BICUBIC)
    tint = rng.integers(60, 196, size=3)
    g = np.asarray(gray, dtype=float) / 255.0
    rgb = np.stack([g * 255 * 0.6 + tint[c] * 0.4 for c in range(3)], axis=2)
    return Image.fromarray(np.clip(rgb, 0, 255).astype(np.uint8), "RGB")


def _png_bytes(im: Image.Image) -> bytes:
    buf = io.BytesIO()
    im.save(buf, format="PNG", optimize=False)
    return buf.getvalue()


def _jpeg_copy(im: Image.Image, rng: np.random.Generator) -> bytes:
    factor = 1.0 + float(rng.uniform(-0.08, 0.08))
    out = ImageEnhance.Brightness(im).enhance(factor)
    buf = io.BytesIO()
    out.save(buf, format="JPEG", quality=int(rng.integers(80, 96)))
    return buf.getvalue()


def _decode(data: bytes) -> Image.Image:
    with Image.open(io.BytesIO(data)) as im:
        im.load()
        return im.copy()


def make_image_groups(
    n_groups: int,
    copies: int,
    n_noise: int,
    rng: np.random.Generator,
    intra_max: int = 9,
    inter_min: int = 20,
    max_tries: int = 10_000,
) -> tuple[list[list[tuple[bytes, str, int]]], list[tuple[bytes, str, int]]]:
    """Near-duplicate image groups plus isolated noise images.

    Returns ``(groups, noise)``; each item is ``(file bytes, suffix, phash bits)``.
    Every pair inside a group is within ``intra_max`` bits, every pair across
    groups (and any noise image) at least ``inter_min`` bits apart.
    """
    accepted: list[int] = []
    groups = []

    def far_enough(bits: list[int]) -> bool:
        return all(hamming(a, b) >= inter_min for a in bits for b in accepted)

    for _ in range(n_groups):
        for _ in range(max_tries):
            base = _base_image(rng)
            items = [(_png_bytes(base), ".png", phash64(base).bits)]
            for _ in range(copies):
                data = _jpeg_copy(base, rng)
                items.append((data, ".jpg", phash64(_decode(data)).bits))
            bits = [b for _, _, b in items]
            tight = all(hamming(a, b) <= intra_max for a in bits for b in bits)
            if tight and far_enough(bits):
                groups.append(items)
                accepted.extend(bits)
                break
        else:
            raise RuntimeError("could not place an image group; relax the spacing")
    noise = []
    for _ in range(n_noise):
        for _ in range(max_tries):
            im = _base_image(rng)
            bits = phash64(im).bits
            if far_enough([bits]):
                noise.append((_png_bytes(im), ".png", bits))
                accepted.append(bits)
                break
        else:
            raise RuntimeError("could not place a noise image")
    return groups, noise


# --- generator -----------------------------------------------------------------

def _hashtags_for(kind: str, rng: np.random.Generator) -> list[str]:
    """1-3 hashtags for one post of a user in group ``kind``."""
    pro = LEXICON["pro-bjp"] + LEXICON["anti-congress"]
    opp = LEXICON["anti-bjp"] + LEXICON["pro-congress"]
    neutral, unlabeled = LEXICON["neutral"], UNLABELED_TAGS
    weights = {
        "pure": (0.8, 0.0, 0.2, 0.0),
        "pro": (0.65, 0.05, 0.2, 0.1),
        "opp": (0.05, 0.65, 0.2, 0.1),
        "mixed": (0.03, 0.03, 0.6, 0.34),
    }[kind]
    pools = (pro, opp, neutral, unlabeled)
    out = []
    for _ in range(int(rng.integers(1, 4))):
        pool = pools[int(rng.choice(4, p=weights))]
        out.append(str(rng.choice(pool)))
    return out


def generate(spec: Mapping | None = None, seed: int = 7, out_dir: str | Path = "fixture") -> FixtureManifest:
    """Write a fixture to ``out_dir`` and return its manifest."""
    sp = _merge_spec(spec)
    out = Path(out_dir)
    (out / "images").mkdir(parents=True, exist_ok=True)
    streams = np.random.SeedSequence(seed).spawn(6)
    r_users, r_edges, r_text, r_time, r_img, r_events = (np.random.default_rng(s) for s in streams)

    n = sp["n_users"]
    n_blocks = sp["blocks"]
    uids = [f"u{i:04d}" for i in range(n)]
    blocks = [i * n_blocks // n for i in range(n)]
    kind = ["pro" if b == 0 else "opp" if b == 1 else "mixed" for b in blocks]
    block0 = [i for i in range(n) if blocks[i] == 0]
    block1 = [i for i in range(n) if blocks[i] == 1]
    pure = block0[:sp["pure_group_size"]]
    for i in pure:
        kind[i] = "pure"

    # roles: seeds come mostly from the pro block, auxiliaries from anywhere else
    order = r_users.permutation([i for i in block0 if i not in pure])
    seeds = sorted(int(i) for i in order[:sp["n_seed_users"]])
    rest = [i for i in range(n) if i not in seeds and i not in pure]
    auxiliary = sorted(int(i) for i in r_users.choice(rest, size=sp["n_auxiliary_users"], replace=False))

    # metadata and curated planting (outside the seed/auxiliary sets)
    free0 = [i for i in block0 if i not in seeds and i not in auxiliary and i not in pure]
    free1 = [i for i in block1 if i not in auxiliary]
    meta_bjp, meta_cong, ambiguous = free0[:4], free1[:4], free1[4:5]
    curated_bjp, curated_cong = free0[4:7], free1[5:8]

    filler = _pseudo_words(400, r_text, reserved=set())
    template_words = _pseudo_words(sp["n_templates"] * 12, r_text, reserved=set(filler))
    templates = [template_words[12 * t:12 * (t + 1)] for t in range(sp["n_templates"])]
    template_tags = [LEXICON["pro-bjp"][t % 4] for t in range(sp["n_templates"])]

    # --- users
    cities = sorted(CITY_TO_STATE)
    users, planted_state = [], {}
    # one seed and one auxiliary user have no followers so the exclusion rule is exercised
    zero_followers = {seeds[0], auxiliary[0]}
    others = [i for i in range(n) if i not in zero_followers]
    zero_followers |= set(int(i) for i in r_users.choice(others, size=max(0, sp["zero_follower_users"] - 2),
                                                          replace=False))
    geo_enabled = set(int(i) for i in r_users.choice(n, size=n // 10, replace=False))
    geo_place: dict[int, str] = {}
    for i, uid in enumerate(uids):
        if i in meta_bjp:
            screen = f"namo_bhakt_{i}"
        elif i in meta_cong:
            screen = f"cong_voice_{i}"
        elif i in ambiguous:
            screen = f"modi_vs_congress_{i}"
        else:
            screen = f"user_{i:04d}"
        words = [str(w) for w in r_users.choice(filler, size=4)]
        if i in seeds:
            words += [str(p) for p in r_users.choice(SEED_PHRASES, size=2, replace=False)]
        elif i in auxiliary:
            words += [str(p) for p in r_users.choice(AUX_PHRASES, size=2, replace=False)]
        description = " ".join(words)

        roll = float(r_users.random())
        if roll < 0.5:
            city = str(r_users.choice(cities))
            location, state = f"{city}, India", CITY_TO_STATE[city]
        elif roll < 0.6:
            state_name = str(r_users.choice(sorted(set(CITY_TO_STATE.values()))))
            location, state = state_name, state_name
        elif roll < 0.7:
            location, state = str(r_users.choice(FOREIGN_PLACES)), "REMOVED"
        elif roll < 0.75:
            a, b = r_users.choice(cities, size=2, replace=False)
            location, state = f"{a}, {b}", "REMOVED"
        else:
            location, state = "", None
        if i in geo_enabled:
            city = str(r_users.choice(cities))
            geo_place[i] = f"{city}, India"
            state = CITY_TO_STATE[city]
        planted_state[uid] = state
        followers = 0 if i in zero_followers else int(np.exp(r_users.normal(5.0, 1.5))) + 1
        users.append({
            "id_str": uid, "screen_name": screen, "description": description,
            "followers_count": followers, "location": location, "geo_enabled": i in geo_enabled,
        })

    # --- edges
    follow = planted_edges(blocks, sp["follow_p_in"], sp["follow_p_out"], r_edges)
    retweet = []
    for (i, j) in planted_edges(blocks, sp["retweet_p_in"], sp["retweet_p_out"], r_edges):
        retweet.extend([(i, j)] * int(r_edges.integers(1, 4)))

    # --- tweets
    counts = [sp["tweets_per_user"]] * n
    for i in range(0, n - 1, 2):
        d = int(r_text.integers(-2, 3))
        counts[i] += d
        counts[i + 1] -= d
    t_end = sp["days"] * 86400
    tweets, app_ids, copy_ids = [], [], []
    dup_group: list[str] = []
    dup_text: str | None = None
    dup_template = 0
    next_id = 0

    def new_tweet(uid_i: int, text: str, tags: list[str], when: int, images=()) -> dict:
        nonlocal next_id
        next_id += 1
        tid = f"t{next_id:05d}"
        rec = {
            "id_str": tid,
            "created_at": _twitter_time(BASE_EPOCH + when),
            "text": text,
            "entities": {"hashtags": [{"text": h} for h in tags]},
            "user": {"id_str": uids[uid_i], "geo_enabled": uid_i in geo_enabled},
            "favorite_count": int(r_text.poisson(20 if uid_i in seeds else 8)),
            "retweet_count": int(r_text.poisson(6 if uid_i in seeds else 2)),
            "image_refs": list(images),
            "place": {"full_name": geo_place[uid_i]} if uid_i in geo_place else None,
        }
        tweets.append(rec)
        return rec

    def template_text(t: int, jitter: float) -> str:
        words = list(templates[t])
        if r_text.random() < jitter:
            words[int(r_text.integers(len(words)))] = str(r_text.choice(filler))
        return " ".join(words)

    for i in range(n):
        n_app = sp["app_tweets_per_seed"] if i in seeds else 0
        n_copy = sp["copies_per_auxiliary"] if i in auxiliary else 0
        for _ in range(n_app):
            # round-robin so every template has app posts to cluster
            t = len(app_ids) % sp["n_templates"]
            when = int(r_time.integers(3600, t_end - 3600))
            tag = "via MyNt" if r_text.random() < 0.3 else "via NaMo App"
            imgs = [f"images/g{t}_0.png"] if t < sp["image_groups"] else []
            rec = new_tweet(i, f"{template_text(t, 0.5)} #{template_tags[t]} {tag}", [template_tags[t]], when, imgs)
            app_ids.append(rec["id_str"])
        for c in range(n_copy):
            t = int(r_text.integers(sp["n_templates"]))
            when = int(r_time.integers(3600, t_end - 3600))
            if dup_text is None or len(dup_group) >= 3:
                text = f"{template_text(t, 0.0)} #{template_tags[t]}"
            else:
                # the first copied text is posted three times verbatim
                t, text = dup_template, dup_text
            imgs = [f"images/g{t}_{1 + c % sp['copies_per_image']}.jpg"] if t < sp["image_groups"] else []
            rec = new_tweet(i, text, [template_tags[t]], when, imgs)
            copy_ids.append(rec["id_str"])
            if dup_text is None:
                dup_text, dup_template = text, t
                dup_group.append(rec["id_str"])
            elif text == dup_text:
                dup_group.append(rec["id_str"])
        for _ in range(counts[i] - n_app - n_copy):
            tags = _hashtags_for(kind[i], r_text)
            body = " ".join(str(w) for w in r_text.choice(filler, size=int(r_text.integers(6, 14))))
            when = int(r_time.integers(1, t_end))
            new_tweet(i, body + " " + " ".join("#" + h for h in tags), tags, when)

    # --- images
    groups, noise = make_image_groups(sp["image_groups"], sp["copies_per_image"], sp["noise_images"], r_img)
    image_truth = []
    for g, items in enumerate(groups):
        names = []
        for c, (data, suffix, bits) in enumerate(items):
            name = f"g{g}_{c}{suffix}"
            (out / "images" / name).write_bytes(data)
            names.append(name)
        image_truth.append({"members": names, "hash_hex": f"{items[0][2]:016x}"})
    noise_names = []
    for m, (data, suffix, _) in enumerate(noise):
        name = f"noise_{m}{suffix}"
        (out / "images" / name).write_bytes(data)
        noise_names.append(name)

    # --- Hawkes event logs, one per image group
    hk = sp["hawkes"]
    K, D = len(hk["platforms"]), hk["dt_max"]
    p = geometric_p_for_mean(D / 4, D)
    pmf = np.broadcast_to(geometric_pmf(p, D), (K, K, D)).copy()
    model = HawkesModel(np.asarray(hk["background"], float), np.asarray(hk["weights"], float), pmf)
    events_rows = []
    start_minute = BASE_EPOCH // 60
    for g, truth in enumerate(image_truth):
        series = simulate(model, hk["minutes"], seed=r_events)
        offset = start_minute + g * hk["minutes"]
        for t, k in zip(*np.nonzero(series.counts)):
            for _ in range(int(series.counts[t, k])):
                events_rows.append((truth["hash_hex"], hk["platforms"][k], int(offset + t)))
    events_rows.sort()

    # --- write files
    _write_jsonl(out / "users.jsonl", users)
    with open(out / "tweets.jsonl", "w", encoding="utf-8") as fh:
        for rec in tweets:
            fh.write(json.dumps(rec, ensure_ascii=False, sort_keys=True) + "\n")
        fh.write('{"id_str": "truncated", "text": "this line was cut o\n')
    _write_csv(out / "edges_follow.csv", ["from_id", "to_id"], [(uids[a], uids[b]) for a, b in follow])
    _write_csv(out / "edges_retweet.csv", ["from_id", "to_id"], [(uids[a], uids[b]) for a, b in retweet])
    _write_csv(out / "lexicon.csv", ["hashtag", "label"],
               sorted((h, lab) for lab, tags in LEXICON.items() for h in tags))
    _write_csv(out / "city_to_state.csv", ["city", "state"], sorted(CITY_TO_STATE.items()))
    (out / "foreign_places.txt").write_text("".join(p + "\n" for p in FOREIGN_PLACES), encoding="utf-8")
    _write_csv(out / "curated.csv", ["user_id", "affiliation"],
               [(uids[i], "BJP") for i in curated_bjp] + [(uids[i], "INC") for i in curated_cong])
    _write_csv(out / "events.csv", ["image_hash_hex", "platform", "utc_minute"], events_rows)
    config = {
        "seed": seed,
        "inputs": {
            "tweets": ["tweets.jsonl"], "users": ["users.jsonl"],
            "edges_follow": ["edges_follow.csv"], "edges_retweet": ["edges_retweet.csv"],
            "lexicon": "lexicon.csv", "curated": "curated.csv",
            "city_to_state": "city_to_state.csv", "foreign_places": "foreign_places.txt",
            "images": "images", "events": "events.csv",
        },
        "partition": {"threshold": 0.1, "sweep": [0.0, 0.05, 0.1, 0.2, 0.3, 0.5]},
        "active": {"min_tweets": sp["tweets_per_user"], "popular_hashtags": POPULAR_HASHTAGS},
        "match": {"k": sp["n_templates"], "threshold": 0.45, "min_tokens": 5},
        "image": {"eps": 10, "min_points": 2},
        "graph": {"kinds": ["follow", "friends", "retweet"], "resolution": 1.0},
        "hawkes": {"platforms": hk["platforms"], "windows": [720, 1440, 2880]},
        "lexstats": {"top_n": 50, "exclude_hashtags": ["caa", "cab", "nrc"], "min_count": 3},
    }
    (out / "config.json").write_text(json.dumps(config, indent=2, sort_keys=True) + "\n", encoding="utf-8")

    # --- ground truth
    by_user: dict[str, list[dict]] = {}
    for rec in tweets:
        by_user.setdefault(rec["user"]["id_str"], []).append(rec)
    popular = set(POPULAR_HASHTAGS)
    active = sorted(
        uid for uid, recs in by_user.items()
        if len(recs) >= sp["tweets_per_user"]
        and any(popular & {h["text"] for h in r["entities"]["hashtags"]} for r in recs)
    )
    manifest = FixtureManifest(
        seed=seed,
        counts={
            "tweets": len(tweets), "users": n, "skipped_lines": 1,
            "app_tweets": len(app_ids), "copied_tweets": len(copy_ids),
            "follow_edges": len(follow), "retweet_edges": len(retweet),
            "images": sum(len(g) for g in groups) + len(noise), "events": len(events_rows),
        },
        planted={
            "blocks": {uids[i]: blocks[i] for i in range(n)},
            "pure_pro_bjp_users": [uids[i] for i in pure],
            "seed_users": [uids[i] for i in seeds],
            "auxiliary_users": [uids[i] for i in auxiliary],
            "metadata_pro_bjp": [uids[i] for i in meta_bjp],
            "metadata_other": [uids[i] for i in meta_cong],
            "metadata_ambiguous": [uids[i] for i in ambiguous],
            "curated_pro_bjp": [uids[i] for i in curated_bjp],
            "curated_other": [uids[i] for i in curated_cong],
            "zero_follower_users": [uids[i] for i in sorted(zero_followers)],
            "states": planted_state,
            "templates": [" ".join(t) for t in templates],
            "duplicate_text_group": {"tweet_ids": dup_group, "text": dup_text},
            "image_groups": image_truth,
            "noise_images": noise_names,
            "hawkes": {"background": hk["background"], "weights": hk["weights"], "dt_max": D,
                       "geometric_p": p, "minutes": hk["minutes"], "platforms": hk["platforms"]},
        },
        expected={
            "active_users": active,
            "pure_group_polarity": 1,
            "pure_group_variance": 0,
            "image_clusters": len(groups),
            "image_noise": len(noise),
        },
    )
    (out / "manifest.json").write_text(manifest.to_json(), encoding="utf-8")
    return manifest
