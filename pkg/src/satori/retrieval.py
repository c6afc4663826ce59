"""Search-query construction and premise retrieval with an offline JSONL cache.

The cache is keyed by the exact query string. A fetched query is never
re-queried implicitly; refreshing is an explicit caller decision, so frozen
experiments stay frozen. Queries that returned no hits are recorded with a
rank-0 sentinel line so the miss itself is cached.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path

from satori.core import (
    InputPair,
    RelationRegistry,
    SatoriError,
    dump_json_line,
    read_jsonl,
    render_template,
)
from satori.backends.base import BackendError, SearchBackend, SearchHit


class RetrievalError(SatoriError):
    """Premises could not be obtained for a query (backend failed, no cache)."""


@dataclass(frozen=True)
class Premise:
    """One retrieved snippet; the entailment premise for a query."""

    text: str
    rank: int
    url: str
    query: str
    retrieved_at: str

    def __post_init__(self) -> None:
        if not self.text:
            raise RetrievalError(f"premise with empty text for query {self.query!r}")
        if self.rank < 1:
            raise RetrievalError(f"premise rank must be >= 1, got {self.rank}")


def _now_iso() -> str:
    return datetime.now(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


class PremiseCache:
    """Append-only JSONL cache of search results, one object per line.

    Line format: {"query", "rank", "title", "url", "snippet", "retrieved_at"}.
    A rank-0 line marks a query that was fetched and returned nothing.
    Re-putting a query appends a fresh group of lines; the latest group wins
    on load. Reads are lock-free; writes are serialized.
    """

    def __init__(self, path: str | Path) -> None:
        self.path = Path(path)
        self._lock = threading.Lock()
        self._entries: dict[str, list[dict]] = {}
        if self.path.exists():
            groups: dict[str, dict[str, list[dict]]] = {}
            for _, row in read_jsonl(self.path):
                query = row["query"]
                stamp = row.get("retrieved_at", "")
                groups.setdefault(query, {})
                # Later retrieved_at (or later file position on a tie) wins.
                groups[query].setdefault(stamp, [])
                groups[query][stamp].append(row)
            for query, by_stamp in groups.items():
                latest = max(by_stamp)
                self._entries[query] = sorted(
                    by_stamp[latest], key=lambda r: r["rank"]
                )

    def __contains__(self, query: str) -> bool:
        return query in self._entries

    def queries(self) -> list[str]:
        return list(self._entries)

    def get(self, query: str) -> list[Premise] | None:
        """Cached premises for a query; None when never fetched, [] when empty."""
        rows = self._entries.get(query)
        if rows is None:
            return None
        return [
            Premise(
                text=r["snippet"],
                rank=r["rank"],
                url=r["url"],
                query=r["query"],
                retrieved_at=r["retrieved_at"],
            )
            for r in rows
            if r["rank"] >= 1
        ]

    def put(
        self, query: str, hits: list[SearchHit], retrieved_at: str | None = None
    ) -> list[Premise]:
        stamp = retrieved_at or _now_iso()
        rows = []
        rank = 0
        for hit in hits:
            if not hit.snippet:
                continue  # a hit without snippet text cannot serve as a premise
            rank += 1
            rows.append(
                {
                    "query": query,
                    "rank": rank,
                    "title": hit.title,
                    "url": hit.url,
                    "snippet": hit.snippet,
                    "retrieved_at": stamp,
                }
            )
        if not rows:
            rows = [
                {
                    "query": query,
                    "rank": 0,
                    "title": "",
                    "url": "",
                    "snippet": "",
                    "retrieved_at": stamp,
                }
            ]
        with self._lock:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            with self.path.open("a", encoding="utf-8") as fh:
                for row in rows:
                    fh.write(dump_json_line(row) + "\n")
            self._entries[query] = rows
        premises = self.get(query)
        assert premises is not None
        return premises


def build_query(pair: InputPair, registry: RelationRegistry) -> str:
    """Render the relation's search template with the pair's subject."""
    schema = registry.get(pair.relation)
    return render_template(schema.t_search, pair.subject)


def fetch_premises(
    pair: InputPair,
    registry: RelationRegistry,
    k: int,
    search_backend: SearchBackend,
    cache: PremiseCache,
    refresh: bool = False,
) -> list[Premise]:
    """Top-k premises for a pair, served from the cache when possible.

    Fewer than k results are returned as-is; an empty list is a legal
    outcome, not an error. A backend failure with nothing cached raises
    RetrievalError.
    """
    if k < 1:
        raise RetrievalError(f"k must be >= 1, got {k}")
    query = build_query(pair, registry)
    if not refresh:
        cached = cache.get(query)
        if cached is not None:
            return cached[:k]
    try:
        hits = search_backend.search(query, k)
    except BackendError as exc:
        raise RetrievalError(f"search failed for query {query!r}: {exc}") from exc
    return cache.put(query, hits)[:k]
