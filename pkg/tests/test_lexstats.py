from collections import Counter

import pytest
from hypothesis import given
from hypothesis import strategies as st

from echoflow.ingest import DatasetBundle, TweetRecord
from echoflow.lexstats import (
    hashtag_frequencies,
    ngram_odds_ratios,
    ngrams,
    odds_ratio,
    term_frequencies,
    write_frequencies_csv,
    write_odds_csv,
)
from echoflow.match.text import preprocess_text


def test_term_frequencies_examples():
    assert term_frequencies([["a", "a", "b"]]) == [("a", 2), ("b", 1)]
    assert term_frequencies([]) == []
    assert term_frequencies([["b", "a"]], top_n=1) == [("a", 1)]


def test_fixture_top20_recount(fixture_bundle):
    docs = [preprocess_text(t.text) for t in fixture_bundle.tweets]
    counts = {}
    for d in docs:
        for w in d:
            counts[w] = counts.get(w, 0) + 1
    want = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))[:20]
    assert term_frequencies(docs, 20) == want


def test_hashtag_exclusion():
    b = DatasetBundle(tweets=[TweetRecord("1", "u", 1e9, "x", ("caa", "nrc", "modi")),
                              TweetRecord("2", "u", 1e9, "x", ("caa",))])
    assert hashtag_frequencies(b) == [("caa", 2), ("modi", 1), ("nrc", 1)]
    assert hashtag_frequencies(b, exclude={"#CAA"}) == [("modi", 1), ("nrc", 1)]
    assert hashtag_frequencies(DatasetBundle(tweets=[TweetRecord("1", "u", 1e9, "x")])) == []


def test_fixture_hashtag_recount(fixture_bundle):
    c = Counter(h for t in fixture_bundle.tweets for h in t.hashtags)
    assert dict(hashtag_frequencies(fixture_bundle)) == dict(c)


def test_ngrams():
    assert ngrams(["a", "b", "c"], 2) == [("a", "b"), ("b", "c")]
    assert ngrams(["a"], 2) == []


def test_hand_example():
    assert odds_ratio(10, 100, 1, 100) == pytest.approx((10.5 / 90.5) / (1.5 / 99.5), rel=1e-12)
    assert abs(odds_ratio(10, 100, 1, 100) - 7.70) <= 0.01
    assert abs(odds_ratio(1, 100, 10, 100) - 0.130) <= 0.001


@given(st.integers(0, 50), st.integers(0, 50), st.integers(0, 50), st.integers(0, 50))
def test_reciprocal_identity(a, extra_a, b, extra_b):
    n_a, n_b = a + extra_a, b + extra_b
    assert odds_ratio(a, n_a, b, n_b) * odds_ratio(b, n_b, a, n_a) == pytest.approx(1.0, rel=1e-12)


@given(st.integers(0, 40), st.integers(0, 40))
def test_equal_prevalence_is_one(a, extra):
    assert odds_ratio(a, a + extra, a, a + extra) == 1.0


@given(st.integers(0, 30), st.integers(1, 30), st.integers(0, 60))
def test_monotone_in_count_a(a, extra_a, b):
    n_a, n_b = a + extra_a, 60
    assert odds_ratio(a + 1, n_a, b, n_b) > odds_ratio(a, n_a, b, n_b)


def test_ngram_odds_table():
    docs_a = [["jai", "hind", "jai", "hind"]] * 10 + [["x", "y"]] * 90
    docs_b = [["jai", "hind"]] + [["p", "q"]] * 99
    rows = ngram_odds_ratios(docs_a, docs_b, n=2, min_count=3)
    (top,) = [r for r in rows if r.ngram == ("jai", "hind")]
    # presence is counted per document, so the repeated bigram counts once
    assert (top.count_a, top.count_b) == (10, 1)
    assert abs(top.odds_ratio - 7.70) <= 0.01
    assert all(r.count_a + r.count_b >= 3 for r in rows)
    assert [r.odds_ratio for r in rows] == sorted((r.odds_ratio for r in rows), reverse=True)


def test_swap_groups_inverts():
    docs_a = [["a", "b", "c"]] * 5 + [["d", "e"]] * 3
    docs_b = [["a", "b"]] * 2 + [["d", "e"]] * 6
    fwd = {r.ngram: r.odds_ratio for r in ngram_odds_ratios(docs_a, docs_b, 2, 1)}
    rev = {r.ngram: r.odds_ratio for r in ngram_odds_ratios(docs_b, docs_a, 2, 1)}
    assert fwd.keys() == rev.keys()
    for g in fwd:
        assert fwd[g] * rev[g] == pytest.approx(1.0, rel=1e-12)


def test_bad_n():
    with pytest.raises(ValueError):
        ngram_odds_ratios([["a"]], [["b"]], n=4)


def test_writers(tmp_path):
    write_frequencies_csv(tmp_path / "f.csv", [("a", 2)], label="hashtag")
    assert (tmp_path / "f.csv").read_text() == "hashtag,count\na,2\n"
    rows = ngram_odds_ratios([["a", "b", "c"]] * 3, [["x", "y", "z"]], n=3, min_count=1)
    write_odds_csv(tmp_path / "o.csv", rows)
    lines = (tmp_path / "o.csv").read_text().splitlines()
    assert lines[0] == "ngram,n,count_a,count_b,odds_ratio"
    assert lines[1] == f"a b c,3,3,0,{odds_ratio(3, 3, 0, 1):.6f}"
