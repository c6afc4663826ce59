from __future__ import annotations

import pytest

from satori.core import InputPair
from satori.backends.base import SearchHit, TransportError
from satori.backends.fixture import FixtureSearch
from satori.retrieval import PremiseCache, RetrievalError, build_query, fetch_premises

PAIR = InputPair("John Lennon", "PersonInstrument")
QUERY = "John Lennon plays instrument"


class CountingSearch:
    def __init__(self, hits_by_query, fail=False):
        self._inner = FixtureSearch(hits_by_query)
        self.calls = 0
        self.fail = fail

    def search(self, query, k):
        self.calls += 1
        if self.fail:
            raise TransportError("search backend down")
        return self._inner.search(query, k)


def five_hits():
    return {QUERY: [SearchHit(f"t{i}", f"http://h/{i}", f"snippet {i}") for i in range(5)]}


class TestBuildQuery:
    def test_renders_search_template(self, registry):
        assert build_query(PAIR, registry) == QUERY

    def test_subject_whitespace_preserved(self, registry):
        pair = InputPair("John  Lennon", "PersonInstrument")
        assert build_query(pair, registry) == "John  Lennon plays instrument"

    def test_unknown_relation(self, registry):
        from satori.core import ConfigError

        with pytest.raises(ConfigError):
            build_query(InputPair("x", "NoSuch"), registry)


class TestFetchPremises:
    def test_miss_queries_stores_and_truncates(self, registry, tmp_path):
        cache = PremiseCache(tmp_path / "premises.jsonl")
        backend = CountingSearch(five_hits())
        premises = fetch_premises(PAIR, registry, 3, backend, cache)
        assert [p.rank for p in premises] == [1, 2, 3]
        assert [p.text for p in premises] == ["snippet 0", "snippet 1", "snippet 2"]
        assert backend.calls == 1

    def test_hit_is_served_from_cache(self, registry, tmp_path):
        cache = PremiseCache(tmp_path / "premises.jsonl")
        backend = CountingSearch(five_hits())
        first = fetch_premises(PAIR, registry, 3, backend, cache)
        second = fetch_premises(PAIR, registry, 3, backend, cache)
        assert first == second
        assert backend.calls == 1

    def test_fewer_hits_than_k_no_padding(self, registry, tmp_path):
        cache = PremiseCache(tmp_path / "premises.jsonl")
        backend = CountingSearch({QUERY: [SearchHit("t", "u", "only one")]})
        premises = fetch_premises(PAIR, registry, 3, backend, cache)
        assert [p.text for p in premises] == ["only one"]

    def test_zero_hits_cached_as_empty(self, registry, tmp_path):
        cache = PremiseCache(tmp_path / "premises.jsonl")
        backend = CountingSearch({})
        assert fetch_premises(PAIR, registry, 3, backend, cache) == []
        assert fetch_premises(PAIR, registry, 3, backend, cache) == []
        assert backend.calls == 1  # the empty result itself is cached

    def test_backend_failure_with_empty_cache_raises(self, registry, tmp_path):
        cache = PremiseCache(tmp_path / "premises.jsonl")
        backend = CountingSearch({}, fail=True)
        with pytest.raises(RetrievalError):
            fetch_premises(PAIR, registry, 3, backend, cache)

    def test_cached_entry_survives_backend_failure(self, registry, tmp_path):
        cache = PremiseCache(tmp_path / "premises.jsonl")
        good = CountingSearch(five_hits())
        fetch_premises(PAIR, registry, 3, good, cache)
        bad = CountingSearch({}, fail=True)
        premises = fetch_premises(PAIR, registry, 3, bad, cache)
        assert [p.text for p in premises] == ["snippet 0", "snippet 1", "snippet 2"]
        assert bad.calls == 0

    def test_refresh_requeries(self, registry, tmp_path):
        cache = PremiseCache(tmp_path / "premises.jsonl")
        backend = CountingSearch(five_hits())
        fetch_premises(PAIR, registry, 3, backend, cache)
        fetch_premises(PAIR, registry, 3, backend, cache, refresh=True)
        assert backend.calls == 2

    def test_k_must_be_positive(self, registry, tmp_path):
        cache = PremiseCache(tmp_path / "premises.jsonl")
        with pytest.raises(RetrievalError):
            fetch_premises(PAIR, registry, 0, CountingSearch(five_hits()), cache)


class TestPremiseCache:
    def test_round_trip_is_byte_identical(self, tmp_path):
        path = tmp_path / "premises.jsonl"
        cache = PremiseCache(path)
        snippets = ["exact text éü", "tabs\tand  spaces", "quotes \"q\""]
        cache.put("q1", [SearchHit(f"t{i}", f"u{i}", s) for i, s in enumerate(snippets)])
        reloaded = PremiseCache(path)
        assert [p.text for p in reloaded.get("q1")] == snippets

    def test_none_for_never_fetched_vs_empty(self, tmp_path):
        cache = PremiseCache(tmp_path / "premises.jsonl")
        assert cache.get("never") is None
        cache.put("empty", [])
        assert cache.get("empty") == []
        reloaded = PremiseCache(tmp_path / "premises.jsonl")
        assert reloaded.get("empty") == []
        assert reloaded.get("never") is None

    def test_reput_latest_group_wins(self, tmp_path):
        path = tmp_path / "premises.jsonl"
        cache = PremiseCache(path)
        cache.put("q", [SearchHit("t", "u", "old")], retrieved_at="2025-01-01T00:00:00Z")
        cache.put("q", [SearchHit("t", "u", "new")], retrieved_at="2025-02-01T00:00:00Z")
        assert [p.text for p in cache.get("q")] == ["new"]
        reloaded = PremiseCache(path)
        assert [p.text for p in reloaded.get("q")] == ["new"]

    def test_rank_order_preserved_not_resorted(self, tmp_path):
        cache = PremiseCache(tmp_path / "premises.jsonl")
        premises = cache.put("q", [SearchHit("a", "u", "zz"), SearchHit("b", "u", "aa")])
        assert [p.text for p in premises] == ["zz", "aa"]

    def test_snippetless_hits_are_dropped(self, tmp_path):
        cache = PremiseCache(tmp_path / "premises.jsonl")
        premises = cache.put("q", [SearchHit("a", "u", ""), SearchHit("b", "u", "real")])
        assert [(p.rank, p.text) for p in premises] == [(1, "real")]
