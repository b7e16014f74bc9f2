import httpx
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from eclass_search.errors import ConfigError
from eclass_search.lexical import tokenize
from eclass_search.rewrite import (
    PassthroughRewriter,
    RemoteRewriter,
    RulesRewriter,
    load_prompt,
    rewrite_query,
    rewrite_with_status,
)

from stubs import StubServer

KNX_QUESTION = "Which terminal blocks can I use for KNX applications?"


def test_rules_example():
    assert rewrite_query(RulesRewriter({"which", "are", "available"}), "Which relays are available?") == "relays"


def test_rules_default_stoplist_drops_filler():
    assert rewrite_query(RulesRewriter(), KNX_QUESTION) == "terminal blocks use for KNX applications"


def test_rules_all_stopwords_degrade_to_original():
    result = rewrite_with_status(RulesRewriter(), "Which are available?")
    assert result.text == "Which are available?" and result.degraded


def test_blank_query():
    with pytest.raises(ConfigError):
        rewrite_query(PassthroughRewriter(), "   ")


@settings(max_examples=200, deadline=None)
@given(st.text(min_size=1).filter(str.strip))
def test_passthrough_identity(query):
    assert rewrite_query(PassthroughRewriter(), query) == query


@settings(max_examples=200, deadline=None)
@given(st.lists(st.sampled_from(["which", "Are", "relays", "KNX", "rail", "the", "Fuse", "?", "can"]), min_size=1, max_size=8))
def test_rules_tokens_are_ordered_subsequence(parts):
    query = " ".join(parts)
    if not query.strip():
        return
    out = tokenize(rewrite_query(RulesRewriter(), query))
    it = iter(tokenize(query))
    assert all(tok in it for tok in out)


def test_remote_rewriter_example_via_stub():
    def handler(body):
        assert body["temperature"] == 0
        assert body["messages"][0]["content"] == load_prompt()
        assert body["messages"][1]["content"] == KNX_QUESTION
        return 200, {"choices": [{"message": {"content": " KNX terminal blocks\n"}}]}

    with StubServer(handler) as stub:
        result = rewrite_with_status(RemoteRewriter(stub.url, "llm"), KNX_QUESTION)
    assert result.text == "KNX terminal blocks" and not result.degraded


def test_remote_failure_falls_back_flagged():
    down = httpx.MockTransport(lambda r: httpx.Response(500))
    result = RemoteRewriter("http://stub/", "llm", max_retries=0, transport=down).rewrite("relays please")
    assert result.text == "relays please" and result.degraded
    empty = httpx.MockTransport(lambda r: httpx.Response(200, json={"choices": [{"message": {"content": ""}}]}))
    assert RemoteRewriter("http://stub/", "llm", transport=empty).rewrite("x").degraded


def test_prompt_file(tmp_path):
    (tmp_path / "p.txt").write_text("custom prompt\n")
    assert load_prompt(tmp_path / "p.txt") == "custom prompt"
    assert "keyword query" in load_prompt()
