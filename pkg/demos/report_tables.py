"""Run the whole pipeline on the bundled fixture and print the headline tables.

    python demos/report_tables.py [report_dir]
"""
import csv
import json
import sys
import tempfile
from pathlib import Path

from echoflow.pipeline import run_pipeline

fixture = Path(__file__).resolve().parents[1] / "tests" / "data" / "fixture"
out = Path(sys.argv[1]) if len(sys.argv) > 1 else Path(tempfile.mkdtemp()) / "report"
run_pipeline(fixture / "config.json", out)
print(f"report in {out}\n")

for dt in (720, 1440, 2880):
    d = json.loads((out / f"influence_dt{dt}.json").read_text())
    print(f"mean W, {dt // 60} h window ({d['image_count']} images):", d["mean_weights"])

fp = json.loads((out / "first_poster.json").read_text())
for key in ("raw", "dedup"):
    s = fp[key]
    print(f"\nfirst poster ({key}): app first {s['app_first']}/{s['app_first'] + s['other_first']}"
          f" = {s['app_first_fraction']:.2f}")

print("\nstates, share of affected users vs all users")
with open(out / "state_fractions.csv", newline="") as fh:
    for row in list(csv.DictReader(fh))[:5]:
        print(f"  {row['state']:<16} {row['frac_affected']}  {row['frac_general']}")

print("\ntop description bigrams, seed vs auxiliary users")
with open(out / "odds_ratios_bigrams.csv", newline="") as fh:
    for row in list(csv.DictReader(fh))[:5]:
        print(f"  {row['ngram']:<24} OR {row['odds_ratio']}")
