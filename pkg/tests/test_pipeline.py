import json

import pytest

from eclass_search.catalog import compose_all
from eclass_search.dense import HashingProvider, build_vector_index, dense_search, embed_texts
from eclass_search.errors import ConfigError, DataError, ProvenanceError
from eclass_search.pipeline import (
    Components,
    RetrieverConfig,
    SearchConfig,
    StageConfig,
    load_config,
    load_grid,
    prepare_indices,
    run_search,
)
from eclass_search.rerank import OverlapReranker, rerank

DENSE = SearchConfig(data_level="basic", category_level=1, retriever=RetrieverConfig(dimension=256), top_k=30, final_k=5)
QUERIES = ["coupling relay KNX", "disconnect terminal 6 mm2", "feed-through terminal block grey"]


class FakeClock:
    def __init__(self):
        self.t = 0.0

    def __call__(self):
        self.t += 0.001
        return self.t


@pytest.fixture(scope="module")
def indices(products, taxonomy):
    configs = [DENSE, SearchConfig(retriever=RetrieverConfig(kind="bm25"), data_level="advanced", top_k=30, final_k=5)]
    return prepare_indices(products, taxonomy, configs)


def test_config_validation():
    with pytest.raises(ConfigError):
        SearchConfig(category_level=5)
    with pytest.raises(ConfigError):
        SearchConfig(data_level="huge")
    with pytest.raises(ConfigError):
        SearchConfig(top_k=5, final_k=6)
    with pytest.raises(ConfigError):
        RetrieverConfig(kind="ann")
    with pytest.raises(ConfigError):
        RetrieverConfig(provider="remote")
    with pytest.raises(ConfigError):
        SearchConfig.from_dict({"topk": 3})


def test_config_round_trip_and_fingerprint():
    cfg = SearchConfig.from_dict({"category_level": 2, "rerank": True, "retriever": {"dimension": 64}, "label": "x"})
    assert cfg.rerank == StageConfig(True, "overlap")
    again = SearchConfig.from_dict(cfg.to_dict())
    assert again == cfg
    assert cfg.fingerprint() == SearchConfig.from_dict(dict(cfg.to_dict(), label="y")).fingerprint()
    assert cfg.fingerprint() != cfg.with_overrides(top_k=50).fingerprint()


def test_passthrough_enabled_normalizes_to_disabled():
    assert SearchConfig(rewrite=StageConfig(True, "passthrough")) == SearchConfig()


def test_load_config_and_grid(tmp_path):
    (tmp_path / "c.json").write_text(json.dumps({"top_k": 20}))
    assert load_config(tmp_path / "c.json").top_k == 20
    (tmp_path / "g.json").write_text(json.dumps({"configs": [{"category_level": n} for n in range(3)]}))
    assert [c.category_level for c in load_grid(tmp_path / "g.json")] == [0, 1, 2]
    (tmp_path / "bad.json").write_text("{")
    with pytest.raises(ConfigError):
        load_config(tmp_path / "bad.json")
    with pytest.raises(DataError):
        load_config(tmp_path / "missing.json")
    (tmp_path / "empty.json").write_text("[]")
    with pytest.raises(ConfigError):
        load_grid(tmp_path / "empty.json")


def test_rerank_off_is_retrieval_order(indices):
    cfg = DENSE
    out = run_search(cfg, indices, QUERIES[0])
    prepared = indices.get(cfg)
    qvec = prepared.provider.embed([QUERIES[0]], role="query")[0]
    assert out.results == dense_search(prepared.vectors, qvec, cfg.top_k)[: cfg.final_k]
    assert out.scored_candidates == 0 and len(out.candidates) == cfg.top_k


def test_rewrite_off_equals_passthrough(indices):
    clock_a, clock_b = FakeClock(), FakeClock()
    off = run_search(DENSE, indices, QUERIES[1], "q", clock=clock_a)
    passthrough = run_search(
        DENSE.with_overrides(rewrite=StageConfig(True, "passthrough")), indices, QUERIES[1], "q", clock=clock_b
    )
    assert json.dumps(off.to_json(True)) == json.dumps(passthrough.to_json(True))


def test_step_by_step_oracle(products, taxonomy, indices):
    cfg = DENSE.with_overrides(rerank=StageConfig(True, "overlap"))
    docs = compose_all(products, taxonomy, "basic", 1)
    provider = HashingProvider(256)
    vindex = build_vector_index(docs, provider)
    for q in QUERIES:
        first = dense_search(vindex, embed_texts(provider, [q], role="query")[0], cfg.top_k)
        want = rerank(OverlapReranker(), q, first, {d.product_id: d for d in docs}).ranked[:5]
        got = run_search(cfg, indices, q)
        assert got.results == want
        assert set(got.ids) <= {pid for pid, _ in first}
        assert got.scored_candidates == cfg.top_k


def test_rules_rewrite_feeds_retrieval_and_rerank(indices):
    cfg = DENSE.with_overrides(rewrite=StageConfig(True, "rules"), rerank=StageConfig(True, "overlap"))
    out = run_search(cfg, indices, "Which coupling relays are available?")
    assert out.rewritten_query == "coupling relays"
    direct = run_search(DENSE.with_overrides(rerank=StageConfig(True, "overlap")), indices, "coupling relays")
    assert out.ids == direct.ids


def test_bm25_path(indices):
    cfg = SearchConfig(retriever=RetrieverConfig(kind="bm25"), data_level="advanced", top_k=30, final_k=5)
    out = run_search(cfg, indices, "coupling relay")
    assert out.results and out.timings.embed_ms == 0.0
    assert indices.names[out.ids[0]].startswith("PLC-RSC")


def test_timings_with_injected_clock(indices):
    out = run_search(DENSE.with_overrides(rerank=StageConfig(True, "overlap")), indices, QUERIES[0], clock=FakeClock())
    t = out.timings
    assert t.embed_ms == pytest.approx(1.0) and t.retrieve_ms == pytest.approx(1.0)
    assert t.rerank_ms == pytest.approx(1.0) and t.total_ms > t.embed_ms + t.retrieve_ms + t.rerank_ms


def test_missing_index_is_provenance_error(indices):
    with pytest.raises(ProvenanceError):
        run_search(DENSE.with_overrides(category_level=3), indices, "x")
    with pytest.raises(ConfigError):
        run_search(DENSE, indices, "  ")


def test_prepare_counts(products, taxonomy):
    only_top_k = prepare_indices(products, taxonomy, [DENSE, DENSE.with_overrides(top_k=50, final_k=10)])
    assert len(only_top_k) == 1
    levels = prepare_indices(products, taxonomy, [DENSE.with_overrides(category_level=n) for n in range(5)])
    assert len(levels) == 5


def test_cache_hit_makes_zero_embedding_calls(tmp_path, products, taxonomy):
    configs = [DENSE.with_overrides(category_level=n) for n in range(3)]
    first = Components()
    prepare_indices(products, taxonomy, configs, cache_dir=tmp_path, components=first)
    assert first.provider(DENSE.retriever).calls == 3
    files = sorted(p.name for p in tmp_path.glob("*.vec"))
    assert len(files) == 3

    second = Components()
    again = prepare_indices(products, taxonomy, configs, cache_dir=tmp_path, components=second)
    assert second.provider(DENSE.retriever).calls == 0
    assert run_search(DENSE, again, QUERIES[0]).ids == run_search(
        DENSE, prepare_indices(products, taxonomy, [DENSE]), QUERIES[0]
    ).ids


def test_cache_key_tracks_catalog(tmp_path, products, taxonomy):
    prepare_indices(products, taxonomy, [DENSE], cache_dir=tmp_path)
    comps = Components()
    prepare_indices(products[:-1], taxonomy, [DENSE], cache_dir=tmp_path, components=comps)
    assert comps.provider(DENSE.retriever).calls == 1
    assert len(list(tmp_path.glob("*.vec"))) == 2


def test_outcome_json_shape(indices):
    body = run_search(DENSE, indices, QUERIES[2], "Q1").to_json()
    assert [r["rank"] for r in body["results"]] == [1, 2, 3, 4, 5]
    assert set(body) == {
        "query_id", "query", "rewritten_query", "results", "scored_candidates", "timings", "degraded", "fingerprint"
    }
    assert all(r["name"] for r in body["results"])
