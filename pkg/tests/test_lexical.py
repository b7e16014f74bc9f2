import math
import random
from collections import Counter

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from eclass_search.catalog import ComposedDocument, DataLevel, compose_all
from eclass_search.errors import ConfigError, DataError
from eclass_search.lexical import (
    Bm25Params,
    bm25_search,
    build_bm25_index,
    load_bm25_index,
    save_bm25_index,
    tokenize,
)


def doc(pid: str, text: str) -> ComposedDocument:
    return ComposedDocument(pid, DataLevel.ADVANCED, 1, text)


def test_tokenize_examples():
    assert tokenize("KNX terminal blocks") == ["knx", "terminal", "blocks"]
    assert tokenize("") == []
    assert tokenize("1.5 to 6 mm2") == ["1", "5", "to", "6", "mm2"]
    assert tokenize("Ø_Größe-ähnlich") == ["ø", "größe", "ähnlich"]


def test_single_doc_postings():
    index = build_bm25_index([doc("d", "a b a")])
    assert index.postings == {"a": [("d", 2)], "b": [("d", 1)]}
    assert index.avg_doc_length == 3
    assert index.doc_count == 1


def test_empty_corpus():
    index = build_bm25_index([])
    assert index.doc_count == 0
    assert bm25_search(index, "anything", 5) == []


def test_duplicate_id():
    with pytest.raises(DataError):
        build_bm25_index([doc("d", "a"), doc("d", "b")])


def test_postings_mass_equals_token_count(products, taxonomy):
    docs = compose_all(products, taxonomy, "advanced", 1)
    index = build_bm25_index(docs)
    mass = sum(tf for plist in index.postings.values() for _, tf in plist)
    assert mass == sum(len(tokenize(d.text)) for d in docs)
    assert index.doc_count == 50


def test_hand_example_ln2():
    index = build_bm25_index([doc("d1", "knx rail"), doc("d2", "din rail")])
    assert bm25_search(index, "knx", 10) == [("d1", math.log(2))]
    assert round(math.log(2), 4) == 0.6931


def test_unknown_terms_empty():
    index = build_bm25_index([doc("d1", "knx rail")])
    assert bm25_search(index, "zzz qqq", 5) == []


def test_top_k_validation():
    with pytest.raises(ConfigError):
        bm25_search(build_bm25_index([doc("a", "x")]), "x", 0)


def naive_bm25(docs, query, k1=1.2, b=0.75):
    toks = {d.product_id: tokenize(d.text) for d in docs}
    n = len(docs)
    avgdl = sum(map(len, toks.values())) / n
    out = []
    for pid, words in toks.items():
        tf = Counter(words)
        s = 0.0
        for t in set(tokenize(query)):
            df = sum(1 for w in toks.values() if t in w)
            if tf[t] == 0:
                continue
            idf = math.log(1 + (n - df + 0.5) / (df + 0.5))
            s += idf * tf[t] * (k1 + 1) / (tf[t] + k1 * (1 - b + b * len(words) / avgdl))
        if s > 0:
            out.append((pid, s))
    return sorted(out, key=lambda x: (-x[1], x[0]))


def random_corpus(seed: int, n: int = 20):
    rng = random.Random(seed)
    vocab = [f"w{i}" for i in range(30)]
    return [doc(f"d{i:02d}", " ".join(rng.choices(vocab, k=rng.randint(3, 25)))) for i in range(n)], vocab, rng


@pytest.mark.parametrize("seed", range(5))
def test_matches_naive_scoring(seed):
    docs, vocab, rng = random_corpus(seed)
    index = build_bm25_index(docs)
    for _ in range(20):
        q = " ".join(rng.choices(vocab, k=rng.randint(1, 5)))
        got, want = bm25_search(index, q, 20), naive_bm25(docs, q)
        assert [d for d, _ in got] == [d for d, _ in want]
        for (_, a), (_, b) in zip(got, want):
            assert abs(a - b) <= 1e-9


def test_query_term_repetition_is_set_semantics():
    docs, _, _ = random_corpus(1)
    index = build_bm25_index(docs)
    assert bm25_search(index, "w1 w1 w2", 20) == bm25_search(index, "w2 w1", 20)
    multi = build_bm25_index(docs, Bm25Params(dedupe_query=False))
    assert bm25_search(multi, "w1 w1", 1)[0][1] == pytest.approx(2 * bm25_search(multi, "w1", 1)[0][1])


def test_params_validation():
    with pytest.raises(ConfigError):
        Bm25Params(k1=-1)
    with pytest.raises(ConfigError):
        Bm25Params(b=1.5)


def test_persistence_round_trip(tmp_path):
    docs, _, _ = random_corpus(2)
    index = build_bm25_index(docs, Bm25Params(k1=1.5, b=0.5))
    save_bm25_index(index, tmp_path / "a.bm25")
    loaded = load_bm25_index(tmp_path / "a.bm25")
    assert loaded.postings == index.postings and loaded.params == index.params
    assert bm25_search(loaded, "w3 w4", 20) == bm25_search(index, "w3 w4", 20)
    save_bm25_index(loaded, tmp_path / "b.bm25")
    assert (tmp_path / "a.bm25").read_bytes() == (tmp_path / "b.bm25").read_bytes()


def test_load_rejects_foreign_file(tmp_path):
    (tmp_path / "x").write_bytes(b"nope" * 10)
    with pytest.raises(DataError):
        load_bm25_index(tmp_path / "x")


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 10_000), query=st.lists(st.sampled_from([f"w{i}" for i in range(35)]), min_size=1, max_size=6))
def test_scores_positive_sorted_and_idf_nonnegative(seed, query):
    docs, vocab, _ = random_corpus(seed, n=12)
    index = build_bm25_index(docs)
    got = bm25_search(index, " ".join(query), 50)
    assert all(s > 0 for _, s in got)
    assert got == sorted(got, key=lambda x: (-x[1], x[0]))
    assert all(index.idf(t) >= 0 for t in index.postings)
