"""End-to-end driver: runs every analysis stage from one JSON config.

Config keys (paths are relative to the config file)::

    seed                      int, used by every randomized stage
    inputs.tweets             list of tweet JSON-lines files
    inputs.users              list of user JSON-lines files
    inputs.edges_follow       list of follower,followee CSVs
    inputs.edges_retweet      list of retweeter,author CSVs
    inputs.lexicon            hashtag,label CSV (required)
    inputs.curated            optional user_id,affiliation CSV
    inputs.keywords           optional keyword-list JSON
    inputs.city_to_state      optional city,state CSV
    inputs.foreign_places     optional one-per-line list
    inputs.images             optional image directory
    inputs.events             optional image_hash_hex,platform,utc_minute CSV
    schema                    optional field renames for the JSON records
    partition.threshold       minimum share of annotated hashtags (0.1)
    partition.sweep           thresholds for the Unknown-count table
    active.min_tweets         activity filter (50)
    active.popular_hashtags   activity filter hashtags
    match.k / .threshold / .min_tokens
    image.eps / .min_points
    graph.kinds / .resolution / .n_starts
    hawkes.platforms / .windows / .learn_lag_pmf
    lexstats.top_n / .exclude_hashtags / .min_count

Output is written to a scratch directory next to the target and renamed
into place only when every stage succeeds.  No file carries a timestamp, so
reruns with the same config produce identical bytes.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import platform
import shutil
import tempfile
import warnings
from fractions import Fraction
from importlib import metadata
from pathlib import Path
from typing import Any, Mapping

from . import echo, graph, hawkes, ingest, lexicon, lexstats, report
from .ingest import REMOVED, Role
from .match import image as mimage
from .match import temporal, text

log = logging.getLogger(__name__)

STAGES = ("ingest", "partition", "echo", "graph", "match", "temporal", "hawkes", "lexstats", "report")


class PipelineError(RuntimeError):
    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"[{stage}] {type(cause).__name__}: {cause}")
        self.stage = stage
        self.cause = cause


def load_config(config: str | Path | Mapping) -> tuple[dict, Path]:
    """Config mapping plus the directory relative paths are resolved against."""
    if isinstance(config, Mapping):
        return dict(config), Path.cwd()
    path = Path(config)
    with open(path, encoding="utf-8") as fh:
        return json.load(fh), path.resolve().parent


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    if path.is_dir():
        for p in sorted(path.rglob("*")):
            if p.is_file():
                h.update(p.relative_to(path).as_posix().encode())
                h.update(_sha256(p).encode())
        return h.hexdigest()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def _versions() -> dict[str, str]:
    out = {"python": platform.python_version()}
    for dist in ("artifact", "numpy", "scipy", "networkx", "scikit-learn", "pillow"):
        try:
            out[dist] = metadata.version(dist)
        except metadata.PackageNotFoundError:
            out[dist] = "unknown"
    return out


def _dump_json(path: Path, obj: Any) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True, ensure_ascii=False) + "\n", encoding="utf-8")


class _Run:
    def __init__(self, cfg: dict, base: Path, out: Path, seed: int | None):
        self.cfg = cfg
        self.base = base
        self.out = out
        self.seed = int(cfg.get("seed", 0) if seed is None else seed)
        self.inputs = cfg.get("inputs", {})
        self.metrics: dict[str, Any] = {}
        self.digests: dict[str, str] = {}

    def section(self, name: str) -> dict:
        return dict(self.cfg.get(name, {}))

    def path(self, key: str, required: bool = False) -> Path | None:
        value = self.inputs.get(key)
        if not value:
            if required:
                raise FileNotFoundError(f"config names no '{key}' input")
            return None
        p = self.base / value
        if not p.exists():
            raise FileNotFoundError(f"{key} input not found: {p}")
        self.digests[key] = _sha256(p)
        return p

    def paths(self, key: str) -> list[Path]:
        value = self.inputs.get(key, [])
        value = [value] if isinstance(value, str) else list(value)
        out = []
        for i, v in enumerate(value):
            p = self.base / v
            if not p.exists():
                raise FileNotFoundError(f"{key} input not found: {p}")
            self.digests[f"{key}[{i}]"] = _sha256(p)
            out.append(p)
        return out

    # --- stages -----------------------------------------------------------------

    def ingest(self):
        schema = ingest.Schema.from_mapping(self.cfg.get("schema", {}))
        self.bundle = ingest.parse_dataset(
            self.paths("tweets"), self.paths("users"),
            self.paths("edges_follow"), self.paths("edges_retweet"), schema,
        )
        b = self.bundle
        self.states: dict[str, Any] = {}
        cities = self.path("city_to_state")
        if cities is not None:
            foreign = self.path("foreign_places")
            mapper = ingest.LocationMapper(
                ingest.load_city_to_state(cities),
                ingest.load_place_list(foreign) if foreign else (),
            )
            self.states = ingest.assign_states(b, mapper)
        active = self.section("active")
        survivors = None
        if active.get("popular_hashtags"):
            survivors = ingest.filter_active_users(b, set(active["popular_hashtags"]),
                                                   int(active.get("min_tweets", 50)))
        self.metrics["ingest"] = {
            "tweets": len(b.tweets),
            "users": len(b.users),
            "follow_edges": len(b.follow_edges),
            "retweet_edges": len(b.retweet_edges),
            "skipped_lines": b.skipped_lines,
            "unknown_users": len(b.unknown_users),
            "app_tweets": sum(t.source_tag.is_app for t in b.tweets),
            "active_users": None if survivors is None else len(survivors),
            "location_removed": sum(v is REMOVED for v in self.states.values()),
            "location_resolved": sum(isinstance(v, str) for v in self.states.values()),
        }
        if survivors is not None:
            (self.out / "active_users.txt").write_text("".join(u + "\n" for u in sorted(survivors)))

    def partition(self):
        lex_path = self.path("lexicon", required=True)
        self.lexicon = lexicon.HashtagLexicon.from_csv(lex_path)
        cur = self.path("curated")
        kw = self.path("keywords")
        sec = self.section("partition")
        threshold = Fraction(str(sec.get("threshold", 0.1)))
        res = lexicon.partition_users(
            self.bundle, self.lexicon,
            curated=lexicon.load_curated(cur) if cur else None,
            keywords=lexicon.KeywordConfig.from_json(kw) if kw else None,
            threshold=threshold,
        )
        self.affiliations = res.affiliation
        lexicon.write_affiliations(self.out / "affiliations.csv", res)
        sweep = [Fraction(str(t)) for t in sec.get("sweep", [0, 0.05, 0.1, 0.2, 0.3, 0.5])]
        rows = lexicon.threshold_sweep(res.ratios.values(), sweep)
        with open(self.out / "threshold_sweep.csv", "w", encoding="utf-8") as fh:
            fh.write("threshold,ProBJP,Other,Unknown\n")
            for r in rows:
                fh.write(f"{float(r['threshold']):.4f},{r['ProBJP']},{r['Other']},{r['Unknown']}\n")
        counts: dict[str, int] = {}
        for a in res.affiliation.values():
            counts[a.value] = counts.get(a.value, 0) + 1
        stages: dict[str, int] = {}
        for s in res.stage.values():
            stages[s] = stages.get(s, 0) + 1
        self.metrics["partition"] = {"affiliations": counts, "decided_by": stages}

    def echo(self):
        self.follow_graph = graph.build_graph(self.bundle, graph.GraphKind.FOLLOW)
        profiles = echo.polarity_profiles(self.bundle, self.lexicon, self.follow_graph)
        echo.write_polarity_csv(self.out / "polarity.csv", profiles, self.affiliations)
        self.metrics["echo"] = {"users_with_polarity": len(profiles)}

    def graph(self):
        sec = self.section("graph")
        kinds = sec.get("kinds", [k.value for k in graph.GraphKind])
        resolution = float(sec.get("resolution", 1.0))
        n_starts = int(sec.get("n_starts", 8))
        self.metrics["graph"] = {}
        for kind in kinds:
            g = self.follow_graph if kind == "follow" else graph.build_graph(self.bundle, kind)
            if g.number_of_nodes() == 0:
                self.metrics["graph"][kind] = {"nodes": 0}
                continue
            part = graph.detect_communities(g, seed=self.seed, resolution=resolution, n_starts=n_starts)
            rows = graph.affiliation_fractions(part, self.affiliations)
            graph.write_fractions_csv(self.out / f"community_fractions_{kind}.csv", rows)
            graph.export_graph(self.out / f"graph_{kind}", g, part, self.affiliations)
            self.metrics["graph"][kind] = {
                "nodes": g.number_of_nodes(),
                "edges": g.number_of_edges(),
                "communities": len(rows),
                "modularity": round(part.modularity_q, 6),
            }

    def match(self):
        sec = self.section("match")
        res = text.match_corpus(
            self.bundle.tweets,
            k=sec.get("k"),
            seed=self.seed,
            threshold=float(sec.get("threshold", text.MATCH_THRESHOLD)),
            min_tokens=int(sec.get("min_tokens", text.MIN_TOKENS)),
        )
        with open(self.out / "text_matches.csv", "w", encoding="utf-8") as fh:
            fh.write("tweet_id,cluster,distance\n")
            for tid in sorted(res.matches):
                c, d = res.matches[tid]
                fh.write(f"{tid},{c},{d:.6f}\n")
        self.matched_ids = set(res.matches)
        roles = ingest.classify_users(self.bundle, self.matched_ids)
        with open(self.out / "roles.csv", "w", encoding="utf-8") as fh:
            fh.write("user_id,role\n")
            for uid in sorted(roles):
                fh.write(f"{uid},{roles[uid].value}\n")
        self.metrics["match"] = {
            "k": res.model.k,
            "vocabulary": len(res.model.vocabulary),
            "inertia": round(res.model.inertia, 6),
            "app_posts": len(res.app_tweet_ids),
            "matched_posts": len(res.matches),
            "too_short": res.too_short,
            "seed_users": sum(r is Role.SEED for r in roles.values()),
            "auxiliary_users": sum(r is Role.AUXILIARY for r in roles.values()),
        }
        images = self.path("images")
        if images is not None:
            isec = self.section("image")
            hashes = mimage.hash_directory(images)
            mimage.write_hash_cache(self.out / "image_hashes.csv", hashes)
            clusters, noise = mimage.cluster_images(
                hashes, int(isec.get("eps", mimage.DBSCAN_EPS)),
                int(isec.get("min_points", mimage.DBSCAN_MIN_POINTS)),
            )
            mimage.write_clusters_csv(self.out / "image_clusters.csv", clusters, noise)
            self.metrics["match"]["images"] = {
                "hashed": len(hashes), "clusters": len(clusters), "noise": len(noise),
            }

    def temporal(self):
        app = [t for t in self.bundle.tweets if t.source_tag.is_app]
        # candidates are the posts the text clusters matched to app content
        other = [t for t in self.bundle.tweets if t.tweet_id in self.matched_ids]
        out: dict[str, Any] = {}
        for label, dedup in (("raw", False), ("dedup", True)):
            mapping = temporal.map_similar_pairs(app, other, dedup=dedup)
            temporal.write_pairs_csv(self.out / f"pairs_{label}.csv", mapping.pairs)
            entry: dict[str, Any] = {"collisions": mapping.collisions, "unmatched": mapping.unmatched}
            if mapping.pairs:
                entry.update(temporal.first_poster_stats(mapping.pairs).as_dict())
            else:
                entry["pairs"] = 0
            out[label] = entry
            if not dedup:
                self.pairs = mapping.pairs
        _dump_json(self.out / "first_poster.json", out)
        self.metrics["temporal"] = out

    def hawkes(self):
        events_path = self.path("events")
        if events_path is None:
            self.metrics["hawkes"] = {"skipped": "no events input"}
            return
        sec = self.section("hawkes")
        platforms = list(sec.get("platforms", ["namo", "twitter"]))
        windows = [int(w) for w in sec.get("windows", hawkes.DEFAULT_WINDOWS)]
        events = hawkes.read_events_csv(events_path)
        summaries, per_image = hawkes.fit_influence(
            events, platforms, windows, seed=self.seed, learn_lag_pmf=bool(sec.get("learn_lag_pmf", False)),
        )
        self.metrics["hawkes"] = {}
        for dt in windows:
            _dump_json(self.out / f"influence_dt{dt}.json", summaries[dt].as_dict())
            fits = per_image[dt]
            self.metrics["hawkes"][str(dt)] = {
                "images": len(fits),
                "not_converged": sum(not m.converged for m in fits.values()),
            }

    def lexstats(self):
        sec = self.section("lexstats")
        top_n = int(sec.get("top_n", 50))
        min_count = int(sec.get("min_count", 3))
        docs = [text.preprocess_text(t.text, strip_hashtags=True) for t in self.bundle.tweets]
        lexstats.write_frequencies_csv(self.out / "term_frequencies.csv",
                                       lexstats.term_frequencies(docs, top_n), "term")
        lexstats.write_frequencies_csv(
            self.out / "hashtag_frequencies.csv",
            lexstats.hashtag_frequencies(self.bundle, top_n, sec.get("exclude_hashtags", ())), "hashtag")
        seeds = [u for u in self.bundle.users.values() if u.role is Role.SEED]
        aux = [u for u in self.bundle.users.values() if u.role is Role.AUXILIARY]
        da = [text.preprocess_text(u.description) for u in sorted(seeds, key=lambda u: u.user_id)]
        db = [text.preprocess_text(u.description) for u in sorted(aux, key=lambda u: u.user_id)]
        self.metrics["lexstats"] = {}
        for n in (2, 3):
            rows = lexstats.ngram_odds_ratios(da, db, n=n, min_count=min_count)
            name = "bigrams" if n == 2 else "trigrams"
            lexstats.write_odds_csv(self.out / f"odds_ratios_{name}.csv", rows)
            self.metrics["lexstats"][name] = len(rows)

    def report(self):
        table = report.normalized_engagement(self.pairs, self.bundle)
        report.write_engagement_csv(self.out / "engagement_pairs.csv", table)
        norm = table.normalized_pairs()
        report.write_ecdf_csv(self.out / "ecdf_engagement.csv", {
            "app_likes_norm": [a.likes_norm for a, _ in norm],
            "app_retweets_norm": [a.retweets_norm for a, _ in norm],
            "other_likes_norm": [o.likes_norm for _, o in norm],
            "other_retweets_norm": [o.retweets_norm for _, o in norm],
        })
        affected = ingest.affected_users(self.bundle)
        rows = report.state_fractions(affected, self.bundle.users, self.states)
        report.write_state_fractions_csv(self.out / "state_fractions.csv", rows)
        self.metrics["report"] = {
            "engagement": report.paired_summary(table),
            "states": len(rows),
            "affected_users": len(affected),
        }

    def run(self) -> dict:
        for stage in STAGES:
            log.info("stage %s", stage)
            try:
                with warnings.catch_warnings():
                    warnings.simplefilter("ignore", RuntimeWarning)
                    getattr(self, stage)()
            except Exception as exc:  # noqa: BLE001 - re-raised with the stage name
                raise PipelineError(stage, exc) from exc
        manifest = {
            "seed": self.seed,
            "stages": list(STAGES),
            "versions": _versions(),
            "input_sha256": self.digests,
            "config": self.cfg,
            "metrics": self.metrics,
        }
        _dump_json(self.out / "manifest.json", manifest)
        return manifest


def run_pipeline(config: str | Path | Mapping, out_dir: str | Path, seed: int | None = None) -> dict:
    """Run all stages and write the report directory; returns the manifest.

    Raises :class:`PipelineError` tagged with the failing stage.  On failure
    nothing is left at ``out_dir`` (an existing directory there is kept as is).
    """
    cfg, base = load_config(config)
    out = Path(out_dir)
    out.parent.mkdir(parents=True, exist_ok=True)
    scratch = Path(tempfile.mkdtemp(prefix=f".{out.name}.", dir=out.parent))
    try:
        manifest = _Run(cfg, base, scratch, seed).run()
    except BaseException:
        shutil.rmtree(scratch, ignore_errors=True)
        raise
    os.chmod(scratch, 0o755)
    if out.exists():
        shutil.rmtree(out)
    scratch.rename(out)
    return manifest
