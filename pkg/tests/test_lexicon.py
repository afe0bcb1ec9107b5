import copy
from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracles import all_tie_patterns

from echoflow.ingest import Affiliation, DatasetBundle, TweetRecord, UserProfile
from echoflow.lexicon import (
    PARTISAN,
    HashtagLabel,
    HashtagLexicon,
    KeywordConfig,
    LeaningRatios,
    assign_affiliation,
    compute_leaning_ratios,
    load_curated,
    metadata_affiliation,
    partition_users,
    read_affiliations,
    threshold_sweep,
    write_affiliations,
)

LEX = HashtagLexicon({
    "namoagain": HashtagLabel.PRO_BJP,
    "congressmukt": HashtagLabel.ANTI_CONGRESS,
    "gobackmodi": HashtagLabel.ANTI_BJP,
    "ragaforpm": HashtagLabel.PRO_CONGRESS,
    "india": HashtagLabel.NEUTRAL,
})
TAG_OF = {
    HashtagLabel.PRO_BJP: "namoagain",
    HashtagLabel.ANTI_CONGRESS: "congressmukt",
    HashtagLabel.ANTI_BJP: "gobackmodi",
    HashtagLabel.PRO_CONGRESS: "ragaforpm",
}


def test_hand_enumerated_multiset():
    tags = ["namoagain"] * 4 + ["congressmukt"] + ["india"] * 5 + ["unlisted1", "unlisted2"]
    r = compute_leaning_ratios(tags, LEX)
    assert r.pro_bjp_ratio == Fraction(4, 5)
    assert r.anti_congress_ratio == Fraction(1, 5)
    assert (r.annotated_count, r.not_neutral_count, r.total_hashtags) == (5, 7, 12)
    assert r.percent_used == Fraction(5, 7)
    assert assign_affiliation(r) is Affiliation.PRO_BJP


def test_empty_and_all_neutral():
    assert compute_leaning_ratios([], LEX) == LeaningRatios()
    r = compute_leaning_ratios(["india"] * 3, LEX)
    assert r.annotated_count == 0 and r.percent_used == 0 and r.total_hashtags == 3
    assert assign_affiliation(r) is Affiliation.UNKNOWN


@given(st.lists(st.sampled_from(list(LEX) + ["zzz", "yyy"]), max_size=40))
def test_ratio_invariants(tags):
    r = compute_leaning_ratios(tags, LEX)
    assert r.annotated_count <= r.not_neutral_count <= r.total_hashtags == len(tags)
    if r.annotated_count:
        assert sum(r.ratio(lab) for lab in PARTISAN) == 1
        assert r.percent_used == Fraction(r.annotated_count, r.not_neutral_count)
    else:
        assert r.percent_used == 0


@given(st.lists(st.sampled_from(list(LEX) + ["zzz"]), min_size=1, max_size=30), st.integers(2, 5))
def test_scale_free(tags, c):
    assert assign_affiliation(compute_leaning_ratios(tags, LEX)) is assign_affiliation(
        compute_leaning_ratios(tags * c, LEX))


def test_below_threshold_is_unknown():
    tags = ["namoagain"] + ["zzz"] * 19  # percent_used 0.05
    assert assign_affiliation(compute_leaning_ratios(tags, LEX), Fraction(1, 10)) is Affiliation.UNKNOWN
    assert assign_affiliation(compute_leaning_ratios(tags, LEX), Fraction(1, 20)) is Affiliation.PRO_BJP


def test_threshold_bounds():
    with pytest.raises(ValueError):
        assign_affiliation(LeaningRatios(), 1.5)
    with pytest.raises(ValueError):
        assign_affiliation(LeaningRatios(), -0.1)


def test_every_tie_pattern():
    pole = {HashtagLabel.PRO_BJP: "B", HashtagLabel.ANTI_CONGRESS: "B",
            HashtagLabel.ANTI_BJP: "O", HashtagLabel.PRO_CONGRESS: "O"}
    for pattern in all_tie_patterns():
        tied = [PARTISAN[i] for i in pattern]
        got = assign_affiliation(compute_leaning_ratios([TAG_OF[lab] for lab in tied], LEX))
        sides = {pole[lab] for lab in tied}
        if sides == {"B"}:
            assert got is Affiliation.PRO_BJP
        elif sides == {"O"}:
            assert got is Affiliation.OTHER
        else:
            assert got is Affiliation.UNKNOWN


def test_pro_bjp_pro_congress_tie_is_unknown():
    r = compute_leaning_ratios(["namoagain", "ragaforpm"], LEX)
    assert (r.pro_bjp_ratio, r.pro_congress_ratio) == (Fraction(1, 2), Fraction(1, 2))
    assert assign_affiliation(r) is Affiliation.UNKNOWN


# --- metadata ----------------------------------------------------------------------

@pytest.mark.parametrize("screen,expected", [
    ("Krish_BJP", Affiliation.PRO_BJP),
    ("MODIfied_SKP", Affiliation.PRO_BJP),
    ("Shivam_INC", Affiliation.OTHER),
    ("amitsoni_INC", Affiliation.OTHER),
    ("modi_vs_congress", None),
    ("plainuser", None),
])
def test_screen_name_examples(screen, expected):
    assert metadata_affiliation(screen, "") is expected


@pytest.mark.parametrize("screen,description,expected", [
    ("Dilsedesh", "Lawyer & Not associated with Congress in any manner My tweets are my personal views "
                  "and still Rahul Gandhi is my leader", Affiliation.OTHER),
    ("ParasKGhelani", "RSS, ABVP, BJP Research Analyst Stock Market Corporate Finacial Analyst Finance, "
                      "Sports. Cyber Security Data Protection Tweets & RTs are personal.", Affiliation.PRO_BJP),
    ("sparjaga", "Hardcore MODIJI fan. Former RSS pracharak. District secretary BJP IT & Social media "
                 "Tirupattur DT.Tamil nadu.", Affiliation.PRO_BJP),
    ("Nil_deshbhratar", "President Central Nagpur Congress Social Media Cell @INCIndia @INCMaharashtra",
     Affiliation.OTHER),
])
def test_description_examples(screen, description, expected):
    assert metadata_affiliation(screen, description) is expected


def test_description_is_whole_word():
    assert metadata_affiliation("x", "incredible views") is None
    assert metadata_affiliation("x", "supporter of inc") is Affiliation.OTHER


def test_keyword_config_json(tmp_path):
    p = tmp_path / "kw.json"
    p.write_text('{"bjp_screen_name": ["saffron"], "congress_screen_name": ["hand"]}')
    kw = KeywordConfig.from_json(p)
    assert metadata_affiliation("saffron_army", "", kw) is Affiliation.PRO_BJP
    assert metadata_affiliation("Krish_BJP", "", kw) is None


# --- stages --------------------------------------------------------------------------

def _stage_bundle():
    users = {
        "cur": UserProfile("cur", screen_name="Shivam_INC"),
        "meta": UserProfile("meta", screen_name="Krish_BJP"),
        "tags": UserProfile("tags", screen_name="someone"),
        "none": UserProfile("none", screen_name="someone_else"),
    }
    tweets = []
    for uid in users:
        for i in range(3):
            tweets.append(TweetRecord(f"{uid}{i}", uid, 1e9, "x", ("gobackmodi",)))
    return DatasetBundle(tweets=tweets, users=users)


def test_stage_precedence(tmp_path):
    cur = tmp_path / "curated.csv"
    cur.write_text("user_id,affiliation\ncur,BJP\n")
    b = _stage_bundle()
    b.tweets = [t for t in b.tweets if t.user_id != "none"]
    res = partition_users(b, LEX, curated=load_curated(cur))
    assert res.affiliation["cur"] is Affiliation.PRO_BJP and res.stage["cur"] == "curated"
    assert res.affiliation["meta"] is Affiliation.PRO_BJP and res.stage["meta"] == "metadata"
    assert res.affiliation["tags"] is Affiliation.OTHER and res.stage["tags"] == "hashtags"
    assert res.affiliation["none"] is Affiliation.UNKNOWN and res.stage["none"] == "none"
    assert b.users["tags"].affiliation is Affiliation.OTHER


def test_affiliations_roundtrip(tmp_path):
    res = partition_users(_stage_bundle(), LEX)
    p = tmp_path / "a.csv"
    write_affiliations(p, res)
    assert read_affiliations(p) == res.affiliation


# --- sweep ----------------------------------------------------------------------------

def test_sweep_single_user():
    r = compute_leaning_ratios(["namoagain", "zzz"], LEX)  # percent_used 1/2
    rows = threshold_sweep([r], [Fraction(2, 5), Fraction(3, 5)])
    assert rows[0]["ProBJP"] == 1 and rows[1]["Unknown"] == 1


def test_sweep_zero_and_one():
    full = compute_leaning_ratios(["namoagain"], LEX)
    partial = compute_leaning_ratios(["namoagain", "zzz"], LEX)
    rows = threshold_sweep([full, partial], [0, 1])
    assert rows[0]["ProBJP"] == 2
    assert rows[1]["ProBJP"] == 1 and rows[1]["Unknown"] == 1


def test_sweep_requires_ascending():
    with pytest.raises(ValueError):
        threshold_sweep([], [0.5, 0.1])


def test_fixture_sweep_matches_recount(fixture_dir, fixture_bundle):
    lex = HashtagLexicon.from_csv(fixture_dir / "lexicon.csv")
    res = partition_users(copy.deepcopy(fixture_bundle), lex)
    ths = [Fraction(1, 20), Fraction(1, 10), Fraction(1, 5)]
    rows = threshold_sweep(res.ratios.values(), ths)
    unknown = [r["Unknown"] for r in rows]
    assert unknown == sorted(unknown)
    # recount straight from the hashtag multisets
    tags: dict[str, list[str]] = {}
    for t in fixture_bundle.tweets:
        tags.setdefault(t.user_id, []).extend(t.hashtags)
    for th, row in zip(ths, rows):
        n_unknown = 0
        for uid in fixture_bundle.users:
            hs = tags.get(uid, [])
            annotated = sum(1 for h in hs if lex.get(h) in PARTISAN)
            unlabeled = sum(1 for h in hs if h not in lex)
            if annotated == 0 or Fraction(annotated, annotated + unlabeled) < th:
                n_unknown += 1
                continue
            per_side = {"B": 0, "O": 0}
            counts = {lab: sum(1 for h in hs if lex.get(h) is lab) for lab in PARTISAN}
            top = max(counts.values())
            for lab, c in counts.items():
                if c == top:
                    per_side["B" if lab in (HashtagLabel.PRO_BJP, HashtagLabel.ANTI_CONGRESS) else "O"] += 1
            if per_side["B"] and per_side["O"]:
                n_unknown += 1
        assert row["Unknown"] == n_unknown


def test_fixture_planted_stages(fixture_dir, fixture_bundle, manifest):
    lex = HashtagLexicon.from_csv(fixture_dir / "lexicon.csv")
    res = partition_users(copy.deepcopy(fixture_bundle), lex, curated=load_curated(fixture_dir / "curated.csv"))
    p = manifest["planted"]
    for uid in p["curated_pro_bjp"]:
        assert (res.affiliation[uid], res.stage[uid]) == (Affiliation.PRO_BJP, "curated")
    for uid in p["curated_other"]:
        assert (res.affiliation[uid], res.stage[uid]) == (Affiliation.OTHER, "curated")
    for uid in p["metadata_pro_bjp"]:
        assert (res.affiliation[uid], res.stage[uid]) == (Affiliation.PRO_BJP, "metadata")
    for uid in p["metadata_other"]:
        assert (res.affiliation[uid], res.stage[uid]) == (Affiliation.OTHER, "metadata")
    for uid in p["metadata_ambiguous"]:
        assert res.stage[uid] in ("hashtags", "none")
    for uid in p["pure_pro_bjp_users"]:
        assert res.affiliation[uid] is Affiliation.PRO_BJP
