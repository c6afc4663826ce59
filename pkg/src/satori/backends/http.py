"""HTTP clients for the backend capabilities.

All model endpoints speak POST with UTF-8 JSON bodies:

    /fill-mask {"prompt": str, "top_n": int} -> {"results": [{"token", "score"}]}
    /entail    {"premise": str, "hypothesis": str} -> {"entail", "contradiction", "neutral"}
    /ner       {"text": str} -> {"spans": [{"surface", "label", "start", "end"}]}
    /qa        {"question": str, "context": str} -> {"answer", "score", "start", "end"}
    /relext    {"text": str} -> {"triples": [{"subject", "relation", "object"}]}
    /search    {"query": str, "k": int} -> {"hits": [{"title", "url", "snippet"}]}

The SPARQL client speaks GET with a `query` parameter and expects the
standard JSON results format. Transport failures (connection errors,
timeouts, HTTP 5xx) are retried with exponential backoff and then surfaced
as TransportError; malformed responses raise ContractError immediately.
"""

from __future__ import annotations

import json

import requests

from satori.core import MASK_MARKER, canonical
from satori.backends.base import (
    DEFAULT_BACKOFF,
    DEFAULT_RETRIES,
    DEFAULT_TOP_N,
    ContractError,
    EntailmentLogits,
    ExtractedTriple,
    MaskFillResult,
    NerSpan,
    QaAnswer,
    SearchHit,
    TransportError,
    call_with_retries,
    check_logits,
    check_mask_prompt,
    check_mask_results,
    check_ner_spans,
    check_nonempty,
    check_qa_answer,
)


class HttpClientBase:
    """Shared POST/JSON plumbing with the retry policy applied per request."""

    def __init__(
        self,
        base_url: str,
        timeout: float = 30.0,
        retries: int = DEFAULT_RETRIES,
        backoff: float = DEFAULT_BACKOFF,
        api_key: str | None = None,
        session: requests.Session | None = None,
    ) -> None:
        self.base_url = base_url.rstrip("/")
        self.timeout = timeout
        self.retries = retries
        self.backoff = backoff
        self._headers = {"Content-Type": "application/json"}
        if api_key:
            self._headers["X-Api-Key"] = api_key
        self._session = session or requests.Session()

    def _post(self, path: str, payload: dict) -> dict:
        url = f"{self.base_url}{path}"

        def attempt() -> dict:
            try:
                resp = self._session.post(
                    url, json=payload, headers=self._headers, timeout=self.timeout
                )
            except requests.RequestException as exc:
                raise TransportError(f"POST {url} failed: {exc}") from exc
            if resp.status_code >= 500:
                raise TransportError(f"POST {url} returned {resp.status_code}")
            if resp.status_code >= 400:
                raise ContractError(f"POST {url} returned {resp.status_code}: {resp.text[:200]}")
            try:
                body = resp.json()
            except (json.JSONDecodeError, ValueError) as exc:
                raise ContractError(f"POST {url} returned non-JSON body") from exc
            if not isinstance(body, dict):
                raise ContractError(f"POST {url} returned a non-object body")
            return body

        return call_with_retries(attempt, retries=self.retries, backoff=self.backoff)


class HttpSearch(HttpClientBase):
    def search(self, query: str, k: int) -> list[SearchHit]:
        if k < 1:
            raise ContractError(f"k must be positive, got {k}")
        body = self._post("/search", {"query": query, "k": k})
        hits = [SearchHit(h["title"], h["url"], h["snippet"]) for h in body["hits"]]
        return hits[:k]


class HttpMaskFill(HttpClientBase):
    def fill_mask(self, prompt: str, top_n: int = DEFAULT_TOP_N) -> list[MaskFillResult]:
        check_mask_prompt(prompt, MASK_MARKER)
        body = self._post("/fill-mask", {"prompt": prompt, "top_n": top_n})
        results = [MaskFillResult(r["token"], float(r["score"])) for r in body["results"]]
        return check_mask_results(results, top_n)


class HttpEntailment(HttpClientBase):
    def entail(self, premise: str, hypothesis: str) -> EntailmentLogits:
        check_nonempty(premise, "premise")
        check_nonempty(hypothesis, "hypothesis")
        body = self._post("/entail", {"premise": premise, "hypothesis": hypothesis})
        return check_logits(
            EntailmentLogits(
                float(body["entail"]), float(body["contradiction"]), float(body["neutral"])
            )
        )


class HttpNer(HttpClientBase):
    def ner(self, text: str) -> list[NerSpan]:
        check_nonempty(text, "text")
        body = self._post("/ner", {"text": text})
        spans = [
            NerSpan(s["surface"], s["label"], int(s["start"]), int(s["end"]))
            for s in body["spans"]
        ]
        return check_ner_spans(spans, text)


class HttpQa(HttpClientBase):
    def qa(self, question: str, context: str) -> QaAnswer:
        check_nonempty(question, "question")
        check_nonempty(context, "context")
        body = self._post("/qa", {"question": question, "context": context})
        ans = QaAnswer(
            body["answer"], float(body["score"]), int(body["start"]), int(body["end"])
        )
        return check_qa_answer(ans, context)


class HttpRelationExtraction(HttpClientBase):
    def extract_relations(self, text: str) -> list[ExtractedTriple]:
        check_nonempty(text, "text")
        body = self._post("/relext", {"text": text})
        return [
            ExtractedTriple(t["subject"], t["relation"], t["object"])
            for t in body["triples"]
        ]


class SparqlKg(HttpClientBase):
    """Class-instance queries against a SPARQL endpoint.

    The query asks for instances of a class via the typing predicate
    (rdf:type by default; some knowledge graphs use an ad-hoc property,
    so it is configurable per endpoint).
    """

    QUERY_TEMPLATE = "SELECT ?y WHERE {{ ?y {predicate} {class_term} }}"

    def __init__(
        self,
        base_url: str,
        typing_predicate: str = "rdf:type",
        class_namespace: str = "",
        **kwargs,
    ) -> None:
        super().__init__(base_url, **kwargs)
        self.typing_predicate = typing_predicate
        self.class_namespace = class_namespace

    def _class_term(self, class_name: str) -> str:
        if self.class_namespace:
            return f"<{self.class_namespace}{class_name}>"
        return class_name

    def sparql_instances(self, class_name: str) -> list[str]:
        query = self.QUERY_TEMPLATE.format(
            predicate=self.typing_predicate, class_term=self._class_term(class_name)
        )

        def attempt() -> dict:
            try:
                resp = self._session.get(
                    self.base_url,
                    params={"query": query, "format": "json"},
                    headers={"Accept": "application/sparql-results+json"},
                    timeout=self.timeout,
                )
            except requests.RequestException as exc:
                raise TransportError(f"SPARQL GET {self.base_url} failed: {exc}") from exc
            if resp.status_code >= 500:
                raise TransportError(f"SPARQL endpoint returned {resp.status_code}")
            if resp.status_code >= 400:
                raise ContractError(f"SPARQL endpoint returned {resp.status_code}")
            try:
                return resp.json()
            except (json.JSONDecodeError, ValueError) as exc:
                raise ContractError("SPARQL endpoint returned non-JSON body") from exc

        body = call_with_retries(attempt, retries=self.retries, backoff=self.backoff)
        try:
            bindings = body["results"]["bindings"]
        except (KeyError, TypeError) as exc:
            raise ContractError("SPARQL response missing results.bindings") from exc
        labels: list[str] = []
        seen: set[str] = set()
        for binding in bindings:
            value = binding.get("y", {}).get("value")
            if not value:
                continue
            key = canonical(value)
            if key not in seen:
                seen.add(key)
                labels.append(value)
        return labels
