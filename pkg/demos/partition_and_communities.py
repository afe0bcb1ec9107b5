"""Partition users of a synthetic fixture, then look at their polarity and follow-graph communities.

    python demos/partition_and_communities.py [out_dir]
"""
import sys
import tempfile
from collections import Counter
from pathlib import Path

from echoflow.echo import polarity_profiles
from echoflow.graph import GraphKind, affiliation_fractions, build_graph, detect_communities
from echoflow.ingest import parse_dataset
from echoflow.lexicon import HashtagLexicon, load_curated, partition_users, threshold_sweep
from echoflow.synthgen import generate

out = Path(sys.argv[1]) if len(sys.argv) > 1 else Path(tempfile.mkdtemp()) / "fixture"
manifest = generate(seed=7, out_dir=out)
print(f"fixture: {manifest.counts['users']} users, {manifest.counts['tweets']} tweets in {out}")

bundle = parse_dataset([out / "tweets.jsonl"], [out / "users.jsonl"],
                       [out / "edges_follow.csv"], [out / "edges_retweet.csv"])
lex = HashtagLexicon.from_csv(out / "lexicon.csv")

# three stages: curated handles, profile keywords, hashtag leaning
res = partition_users(bundle, lex, curated=load_curated(out / "curated.csv"))
print("affiliations:", dict(Counter(a.value for a in res.affiliation.values())))
print("decided by:  ", dict(Counter(res.stage.values())))

print("\nUnknown users as the annotation threshold rises")
for row in threshold_sweep(res.ratios.values(), [0.0, 0.1, 0.2, 0.3, 0.5]):
    print(f"  threshold {float(row['threshold']):.2f}: {row['Unknown']:3d} unknown")

follow = build_graph(bundle, GraphKind.FOLLOW)
profiles = polarity_profiles(bundle, lex, follow)
pure = manifest.planted["pure_pro_bjp_users"][:3]
print("\nproduction polarity / variance of three planted pure users")
for uid in pure:
    p = profiles[uid]
    print(f"  {uid}: {p.production_polarity} / {p.production_variance}")

part = detect_communities(follow, seed=7)
print(f"\nfollow graph: Q = {part.modularity_q:.3f}, {len(part.communities())} communities")
for row in affiliation_fractions(part, res.affiliation):
    print(f"  community {row['community']} (n={row['size']}): ProBJP {float(row['frac_pro_bjp']):.3f}"
          f"  Other {float(row['frac_other']):.3f}  Unknown {float(row['frac_unknown']):.3f}")
