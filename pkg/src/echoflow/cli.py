"""``echoflow`` command line.  Every subcommand exits 0 on success and 1 on failure."""

from __future__ import annotations

import argparse
import csv
import json
import logging
import pickle
import sys
from fractions import Fraction
from pathlib import Path

from . import echo, graph, hawkes, ingest, lexicon, lexstats, pipeline, synthgen
from .ingest import Affiliation, Role
from .match import image as mimage
from .match import temporal, text

BUNDLE_MAGIC = b"echoflow-bundle-1\n"


def save_bundle(bundle: ingest.DatasetBundle, path: str | Path) -> None:
    with open(path, "wb") as fh:
        fh.write(BUNDLE_MAGIC)
        pickle.dump(bundle, fh, protocol=4)


def load_bundle(path: str | Path) -> ingest.DatasetBundle:
    with open(path, "rb") as fh:
        if fh.readline() != BUNDLE_MAGIC:
            raise ValueError(f"{path} is not a bundle written by 'echoflow ingest'")
        return pickle.load(fh)


def _csv_list(value: str) -> list[str]:
    return [v.strip() for v in value.split(",") if v.strip()]


def _dump(path: str | Path, obj) -> None:
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8")


# --- subcommands -----------------------------------------------------------------

def cmd_ingest(a) -> None:
    schema = ingest.Schema()
    if a.schema:
        with open(a.schema, encoding="utf-8") as fh:
            schema = ingest.Schema.from_mapping(json.load(fh))
    b = ingest.parse_dataset(a.tweets, a.users, a.edges_follow, a.edges_retweet, schema)
    if a.city_to_state:
        places = ingest.load_place_list(a.foreign_places) if a.foreign_places else ()
        ingest.assign_states(b, ingest.LocationMapper(ingest.load_city_to_state(a.city_to_state), places))
    save_bundle(b, a.out)
    print(f"{len(b.tweets)} tweets, {len(b.users)} users, {b.skipped_lines} skipped lines")


def cmd_partition(a) -> None:
    b = load_bundle(a.bundle)
    res = lexicon.partition_users(
        b, lexicon.HashtagLexicon.from_csv(a.lexicon),
        curated=lexicon.load_curated(a.curated) if a.curated else None,
        keywords=lexicon.KeywordConfig.from_json(a.keywords) if a.keywords else None,
        threshold=Fraction(a.threshold),
    )
    lexicon.write_affiliations(a.out, res)


def cmd_echo(a) -> None:
    b = load_bundle(a.bundle)
    lex = lexicon.HashtagLexicon.from_csv(a.lexicon)
    affil = lexicon.read_affiliations(a.affiliations) if a.affiliations else {}
    profiles = echo.polarity_profiles(b, lex, graph.build_graph(b, graph.GraphKind.FOLLOW))
    echo.write_polarity_csv(a.out, profiles, affil)


def cmd_graph(a) -> None:
    b = load_bundle(a.bundle)
    g = graph.build_graph(b, a.kind)
    affil = lexicon.read_affiliations(a.affiliations) if a.affiliations else {}
    part = graph.detect_communities(g, seed=a.seed, resolution=a.resolution)
    graph.export_graph(a.out_prefix, g, part, affil)
    graph.write_fractions_csv(f"{a.out_prefix}_fractions.csv", graph.affiliation_fractions(part, affil))
    print(f"modularity {part.modularity_q:.6f}, {len(part.communities())} communities")


def cmd_match_text(a) -> None:
    b = load_bundle(a.bundle)
    res = text.match_corpus(b.tweets, k=a.k, seed=a.seed, threshold=a.threshold)
    app = [t for t in b.tweets if t.source_tag.is_app]
    matched = [t for t in b.tweets if t.tweet_id in res.matches]
    mapping = temporal.map_similar_pairs(app, matched)
    temporal.write_pairs_csv(a.out, mapping.pairs)
    print(f"{len(res.matches)} matched posts, {len(mapping.pairs)} pairs, {mapping.collisions} collisions")


def cmd_match_image(a) -> None:
    hashes = mimage.hash_directory(a.images)
    if a.hash_cache:
        mimage.write_hash_cache(a.hash_cache, hashes)
    clusters, noise = mimage.cluster_images(hashes, a.eps, a.min_points)
    mimage.write_clusters_csv(a.out, clusters, noise)
    print(f"{len(hashes)} images, {len(clusters)} clusters, {len(noise)} noise")


def cmd_temporal(a) -> None:
    pairs = temporal.read_pairs_csv(a.pairs)
    if a.dedup:
        if not a.bundle:
            raise ValueError("--dedup needs --bundle to compare post texts")
        idx = load_bundle(a.bundle).tweet_index()
        apps = [idx[i] for i in sorted({p.app_tweet_id for p in pairs})]
        others = [idx[i] for i in sorted({p.other_tweet_id for p in pairs})]
        pairs = temporal.map_similar_pairs(apps, others, dedup=True).pairs
    _dump(a.out, temporal.first_poster_stats(pairs).as_dict())


def cmd_hawkes(a) -> None:
    events = hawkes.read_events_csv(a.events)
    platforms = _csv_list(a.platforms)
    windows = [int(w) for w in _csv_list(a.dt)]
    summaries, _ = hawkes.fit_influence(events, platforms, windows, seed=a.seed, learn_lag_pmf=a.learn_lag_pmf)
    _dump(a.out, {str(dt): summaries[dt].as_dict() for dt in windows})


def _groups_from_roles(path: str) -> tuple[set[str], set[str]]:
    """Seed vs Auxiliary from a ``role`` column, else ProBJP vs Other from ``affiliation``."""
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    if rows and "role" in rows[0]:
        return ({r["user_id"] for r in rows if r["role"] == Role.SEED.value},
                {r["user_id"] for r in rows if r["role"] == Role.AUXILIARY.value})
    return ({r["user_id"] for r in rows if r.get("affiliation") == Affiliation.PRO_BJP.value},
            {r["user_id"] for r in rows if r.get("affiliation") == Affiliation.OTHER.value})


def cmd_lexstats(a) -> None:
    b = load_bundle(a.bundle)
    if a.terms:
        docs = [text.preprocess_text(t.text, strip_hashtags=True) for t in b.tweets]
        lexstats.write_frequencies_csv(a.terms, lexstats.term_frequencies(docs, a.top_n), "term")
    if a.hashtags:
        rows = lexstats.hashtag_frequencies(b, a.top_n, _csv_list(a.exclude))
        lexstats.write_frequencies_csv(a.hashtags, rows, "hashtag")
    if a.out:
        if not a.roles:
            raise ValueError("--out needs --roles to split users into two groups")
        ga, gb = _groups_from_roles(a.roles)
        da = [text.preprocess_text(b.users[u].description) for u in sorted(ga) if u in b.users]
        db = [text.preprocess_text(b.users[u].description) for u in sorted(gb) if u in b.users]
        lexstats.write_odds_csv(a.out, lexstats.ngram_odds_ratios(da, db, n=a.n, min_count=a.min_count))


def cmd_synth(a) -> None:
    spec = None
    if a.spec:
        with open(a.spec, encoding="utf-8") as fh:
            spec = json.load(fh)
    m = synthgen.generate(spec, a.seed, a.out)
    print(f"fixture with {m.counts['tweets']} tweets and {m.counts['users']} users in {a.out}")


def cmd_run(a) -> None:
    manifest = pipeline.run_pipeline(a.config, a.out, seed=a.seed)
    print(f"report written to {a.out} (seed {manifest['seed']})")


# --- parser ------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="echoflow", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("ingest", help="parse JSON-lines dumps and edge lists into a bundle")
    s.add_argument("--tweets", nargs="+", default=[])
    s.add_argument("--users", nargs="+", default=[])
    s.add_argument("--edges-follow", nargs="+", default=[])
    s.add_argument("--edges-retweet", nargs="+", default=[])
    s.add_argument("--schema", help="JSON object of field renames")
    s.add_argument("--city-to-state")
    s.add_argument("--foreign-places")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_ingest)

    s = sub.add_parser("partition", help="assign ProBJP / Other / Unknown to users")
    s.add_argument("--bundle", required=True)
    s.add_argument("--lexicon", required=True)
    s.add_argument("--curated")
    s.add_argument("--keywords")
    s.add_argument("--threshold", default="0.1")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_partition)

    s = sub.add_parser("echo", help="production and consumption polarity per user")
    s.add_argument("--bundle", required=True)
    s.add_argument("--lexicon", required=True)
    s.add_argument("--affiliations")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_echo)

    s = sub.add_parser("graph", help="build a graph, detect communities, export it")
    s.add_argument("--bundle", required=True)
    s.add_argument("--kind", choices=[k.value for k in graph.GraphKind], required=True)
    s.add_argument("--affiliations")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--resolution", type=float, default=1.0)
    s.add_argument("--out-prefix", required=True)
    s.set_defaults(func=cmd_graph)

    s = sub.add_parser("match-text", help="cluster app posts and pair them with matching posts")
    s.add_argument("--bundle", required=True)
    s.add_argument("--k", type=int)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--threshold", type=float, default=text.MATCH_THRESHOLD)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_match_text)

    s = sub.add_parser("match-image", help="pHash images and cluster near-duplicates")
    s.add_argument("--images", required=True)
    s.add_argument("--eps", type=int, default=mimage.DBSCAN_EPS)
    s.add_argument("--min-points", type=int, default=mimage.DBSCAN_MIN_POINTS)
    s.add_argument("--hash-cache")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_match_image)

    s = sub.add_parser("temporal", help="who posted first in each pair")
    s.add_argument("--pairs", required=True)
    s.add_argument("--dedup", action="store_true")
    s.add_argument("--bundle")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_temporal)

    s = sub.add_parser("hawkes", help="fit per-image Hawkes models and average the weights")
    s.add_argument("--events", required=True)
    s.add_argument("--platforms", default="namo,twitter")
    s.add_argument("--dt", default="720,1440,2880")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--learn-lag-pmf", action="store_true")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_hawkes)

    s = sub.add_parser("lexstats", help="frequency tables and n-gram odds ratios")
    s.add_argument("--bundle", required=True)
    s.add_argument("--roles")
    s.add_argument("--n", type=int, default=2, choices=[2, 3])
    s.add_argument("--min-count", type=int, default=3)
    s.add_argument("--top-n", type=int, default=50)
    s.add_argument("--exclude", default="")
    s.add_argument("--terms")
    s.add_argument("--hashtags")
    s.add_argument("--out")
    s.set_defaults(func=cmd_lexstats)

    s = sub.add_parser("synth", help="write a synthetic fixture")
    s.add_argument("--spec")
    s.add_argument("--seed", type=int, default=7)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_synth)

    s = sub.add_parser("run", help="run the whole pipeline from a config file")
    s.add_argument("--config", required=True)
    s.add_argument("--seed", type=int)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_run)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.ERROR,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except pipeline.PipelineError as exc:
        print(f"echoflow run failed in stage {exc.stage}: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001 - report any failure as exit code 1
        print(f"echoflow {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
