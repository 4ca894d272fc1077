import json

import pytest
from hypothesis import given, settings, strategies as st

from triehh.data import (
    CorpusRecord,
    IngestConfig,
    filter_oov,
    generate_synthetic,
    ingest_csv,
    ingest_jsonl,
    ingest_records,
    load_dataset,
    load_fixture,
    planted_dataset,
    save_dataset,
    select_top1,
    tokenize,
    zipf_table,
)
from triehh.dataset import UserDataset
from triehh.errors import DatasetError, ParameterError
from triehh.trie import EOS

ALICE = [CorpusRecord("alice", "sun sun"), CorpusRecord("alice", "moon")]


def test_alice_counts():
    ds = ingest_records(ALICE)
    assert ds.counts == ({"moon$": 1, "sun$": 2},)
    assert ds.frequencies(0) == pytest.approx({"sun$": 2 / 3, "moon$": 1 / 3})


def test_alice_top1():
    ds = ingest_records(ALICE, IngestConfig(selection="top1"))
    assert ds.counts == ({"sun$": 1},)


def test_top1_ties_lexicographic():
    ds = ingest_records([CorpusRecord("u", "b a c")], IngestConfig(selection="top1"))
    assert ds.counts == ({"a$": 1},)


def test_truncation():
    token = "abcdefghijklmnopqrstuvwxy"
    ds = ingest_records([CorpusRecord("u", token)], IngestConfig(max_length=10))
    assert ds.counts == ({"abcdefghi$": 1},)


def test_tokenize_rules():
    assert tokenize("Hello *HUGS* :'( café a$b") == ["hello", "*hugs*", ":'("]
    assert tokenize("Hi, there!", IngestConfig(strip_punctuation=True)) == ["hi", "there"]
    assert tokenize("Hi", IngestConfig(lowercase=False)) == ["Hi"]


@pytest.mark.parametrize("kw", [dict(max_length=1), dict(selection="first"), dict(allowed_symbols=frozenset("a$"))])
def test_ingest_config_validation(kw):
    with pytest.raises(ParameterError):
        IngestConfig(**kw)


def test_corpus_record_requires_user():
    with pytest.raises(DatasetError):
        CorpusRecord("", "x")


def test_oov_examples():
    ds = UserDataset([{"sun$": 2, "b/c$": 1}])
    out = filter_oov(ds, {"sun"})
    assert out.counts == ({"b/c$": 1},)
    assert out.frequencies(0) == {"b/c$": 1.0}
    assert filter_oov(ds, {"zebra"}) == ds
    two = UserDataset([{"sun$": 1}, {"moon$": 1}])
    assert filter_oov(two, {"sun"}).n == 1


def test_oov_uses_untruncated_form():
    ds = ingest_records([CorpusRecord("u", "internationalization x")], IngestConfig(max_length=5))
    assert "inte$" in ds.counts[0]
    assert filter_oov(ds, {"inte"}) == ds
    assert filter_oov(ds, {"internationalization"}).counts == ({"x$": 1},)


def test_oov_merged_truncations_need_all_forms():
    ds = ingest_records([CorpusRecord("u", "abcdef abcdxy q")], IngestConfig(max_length=5))
    assert ds.counts[0]["abcd$"] == 2
    assert "abcd$" in filter_oov(ds, {"abcdef"}).counts[0]
    assert "abcd$" not in filter_oov(ds, {"abcdef", "abcdxy"}).counts[0]


def test_oov_via_config(tmp_path):
    d = tmp_path / "dict.txt"
    d.write_text("Sun\n\nmoon\n", encoding="utf-8")
    ds = ingest_records([CorpusRecord("a", "sun moon b/c"), CorpusRecord("b", "sun")], IngestConfig(oov_dictionary=d))
    assert ds.counts == ({"b/c$": 1},)
    assert ds.user_ids == ("a",)


def test_oov_rejects():
    ds = UserDataset([{"sun$": 1}])
    with pytest.raises(ParameterError):
        filter_oov(ds, set())
    with pytest.raises(DatasetError):
        filter_oov(ds, {"sun"})


def test_csv_six_columns(tmp_path):
    p = tmp_path / "s140.csv"
    p.write_text(
        '"0","1","Mon Apr 06","NO_QUERY","alice","sun sun"\n'
        '"4","2","Mon Apr 06","NO_QUERY","bob","Moon, stars"\n'
        '"0","3","Mon Apr 06","NO_QUERY","alice","moon"\n',
        encoding="utf-8",
    )
    ds = ingest_csv(p)
    assert ds.user_ids == ("alice", "bob")
    assert ds.counts == ({"moon$": 1, "sun$": 2}, {"moon,$": 1, "stars$": 1})


def test_csv_two_columns_with_header(tmp_path):
    p = tmp_path / "two.csv"
    p.write_text("user,text\nalice,sun sun moon\n", encoding="utf-8")
    assert ingest_csv(p).counts == ({"moon$": 1, "sun$": 2},)


@pytest.mark.parametrize("body", ["a,b,c\n", "alice,sun\nbob,x,y\n"])
def test_csv_bad_layout(tmp_path, body):
    p = tmp_path / "bad.csv"
    p.write_text(body, encoding="utf-8")
    with pytest.raises(DatasetError):
        ingest_csv(p)


def test_csv_no_users(tmp_path):
    p = tmp_path / "empty.csv"
    p.write_text("alice,éé\n", encoding="utf-8")
    with pytest.raises(DatasetError):
        ingest_csv(p)


def test_jsonl_and_round_trip(tmp_path):
    p = tmp_path / "in.jsonl"
    p.write_text(
        json.dumps({"user": "a", "words": {"sun$": 2, "Moon": 1}}) + "\n\n"
        + json.dumps({"user": "b", "words": {"verylongtoken": 1}}) + "\n",
        encoding="utf-8",
    )
    ds = ingest_jsonl(p, IngestConfig(max_length=6))
    assert ds.counts == ({"moon$": 1, "sun$": 2}, {"veryl$": 1})
    out = tmp_path / "out.jsonl"
    save_dataset(ds, out)
    back = load_dataset(out, max_length=6)
    assert back == ds
    assert back.origins[1] == {"veryl$": frozenset({"verylongtoken"})}
    assert out.read_text(encoding="utf-8") == ds.to_jsonl()


def test_jsonl_bad_record(tmp_path):
    p = tmp_path / "bad.jsonl"
    p.write_text('{"user": "a"}\n', encoding="utf-8")
    with pytest.raises(DatasetError, match=":1:"):
        ingest_jsonl(p)


@pytest.mark.parametrize("name, size, total", [("sentiment140-top100", 100, 0.4988), ("oov-top100", 100, 0.0924)])
def test_fixtures(name, size, total):
    t = load_fixture(name)
    assert len(t) == size
    assert sum(t.values()) == pytest.approx(total, abs=1e-3)


def test_fixture_head():
    assert load_fixture("sentiment140-top100")["the"] == 0.1028


def test_unknown_fixture():
    with pytest.raises(ParameterError):
        load_fixture("nope")


def test_synthetic_fixture_frequency():
    ds = generate_synthetic(load_fixture("sentiment140-top100"), 10**5, seed=0)
    assert ds.is_single_word and ds.n == 10**5
    assert ds.population_frequencies()["the$"] == pytest.approx(0.1028, abs=0.003)


def test_synthetic_single_word_table():
    ds = generate_synthetic({"w": 1.0}, 50, seed=4)
    assert ds.sequences() == {"w$"}


def test_synthetic_seed_determinism():
    t = load_fixture("oov-top100")
    a = generate_synthetic(t, 2000, words_per_user=3, seed=11)
    assert a.fingerprint() == generate_synthetic(t, 2000, words_per_user=3, seed=11).fingerprint()
    assert a.fingerprint() != generate_synthetic(t, 2000, words_per_user=3, seed=12).fingerprint()


@pytest.mark.parametrize(
    "table, kw",
    [({"a": 0.7, "b": 0.4}, {}), ({"a": -0.1}, {}), ({"a$b": 0.1}, {}), ({"a": 0.1}, {"n": 0}),
     ({"a": 0.1}, {"words_per_user": 0}), ({"a": 0.1}, {"max_length": 1})],
)
def test_synthetic_rejects(table, kw):
    args = dict(n=10) | kw
    with pytest.raises(ParameterError):
        generate_synthetic(table, **args)


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 300), st.integers(1, 4), st.integers(5, 12), st.integers(0, 2**31))
def test_synthetic_invariants(n, k, L, seed):
    ds = generate_synthetic(load_fixture("sentiment140-top100"), n, words_per_user=k, seed=seed, max_length=L)
    assert ds.n == n
    for i, user in enumerate(ds.counts):
        assert sum(user.values()) == k
        assert sum(ds.frequencies(i).values()) == pytest.approx(1.0, abs=1e-12)
        for s in user:
            assert s.endswith(EOS) and s.count(EOS) == 1 and len(s) <= L


def test_synthetic_filler_space_exhausted():
    # One-symbol fillers: only 26 distinct strings exist.
    with pytest.raises(ParameterError, match="distinct filler"):
        generate_synthetic({"a": 0.1}, 200, seed=0, max_length=2)


def test_zipf_table():
    t = zipf_table(1000)
    f = list(t.values())
    assert len(t) == 1000 and sum(f) == pytest.approx(1.0)
    assert f[0] / f[1] == pytest.approx(2.0)
    assert all(len(w) <= 9 for w in t)


@pytest.mark.parametrize("shared, first", [(0, 1), (3, 9801)])
def test_planted_dataset(shared, first):
    ds = planted_dataset(10**4, "zebra", 200, shared_prefix=shared, seed=1)
    assert ds.n == 10**4 and ds.is_single_word
    h = ds.holders()
    assert h["zebra$"] == 200 and max(h.values()) == 200
    assert sum(1 for s in ds.sequences() if s.startswith("zeb"[: max(shared, 1)])) == first
    assert sum(1 for s in ds.sequences() if s.startswith("zebra"[: shared + 1])) == 1


def test_dataset_validation():
    with pytest.raises(DatasetError):
        UserDataset([{"sun": 1}])
    with pytest.raises(DatasetError):
        UserDataset([{"s$n$": 1}])
    with pytest.raises(DatasetError):
        UserDataset([{"sun$": 0}])
    with pytest.raises(DatasetError):
        UserDataset([{}])
    with pytest.raises(DatasetError):
        UserDataset([{"sunshine$": 1}], max_length=5)


def test_top_k_and_population_frequencies():
    ds = UserDataset([{"a$": 1, "b$": 1}, {"a$": 3, "c$": 1}, {"c$": 1}])
    F = ds.population_frequencies()
    assert F == pytest.approx({"a$": (0.5 + 0.75) / 3, "b$": 0.5 / 3, "c$": 1.25 / 3})
    assert sum(F.values()) == pytest.approx(1.0)
    assert ds.top_k(2) == ["a$", "c$"]
    assert UserDataset.from_words(["b", "a"]).top_k(2) == ["a$", "b$"]


def test_select_top1():
    ds = UserDataset([{"a$": 1, "b$": 2}, {"c$": 1}])
    assert select_top1(ds).counts == ({"b$": 1}, {"c$": 1})
