"""Deterministic in-process backends backed by keyed JSON lookup tables.

Unknown keys return empty results for search, fill-mask, NER, relation
extraction, and SPARQL; they raise ContractError for entailment and QA,
whose callers always expect a score. Tables are immutable after load, so
fixture backends are safe to share across concurrent pipeline workers.
"""

from __future__ import annotations

import json
from pathlib import Path

from satori.core import MASK_MARKER, canonical
from satori.backends.base import (
    DEFAULT_TOP_N,
    BackendSuite,
    ContractError,
    EntailmentLogits,
    ExtractedTriple,
    MaskFillResult,
    NerSpan,
    QaAnswer,
    SearchHit,
    check_logits,
    check_mask_prompt,
    check_mask_results,
    check_ner_spans,
    check_nonempty,
    check_qa_answer,
)


def _load_json(path: str | Path) -> list:
    p = Path(path)
    if not p.exists():
        raise ContractError(f"fixture file not found: {p}")
    doc = json.loads(p.read_text(encoding="utf-8"))
    if not isinstance(doc, list):
        raise ContractError(f"fixture file {p} must hold a JSON list")
    return doc


class FixtureSearch:
    def __init__(self, hits_by_query: dict[str, list[SearchHit]]):
        self._hits = dict(hits_by_query)

    @classmethod
    def from_file(cls, path: str | Path) -> "FixtureSearch":
        table = {
            entry["query"]: [
                SearchHit(h["title"], h["url"], h["snippet"]) for h in entry["hits"]
            ]
            for entry in _load_json(path)
        }
        return cls(table)

    def search(self, query: str, k: int) -> list[SearchHit]:
        if k < 1:
            raise ContractError(f"k must be positive, got {k}")
        return list(self._hits.get(query, []))[:k]


class FixtureMaskFill:
    def __init__(self, results_by_prompt: dict[str, list[MaskFillResult]]):
        self._results = dict(results_by_prompt)

    @classmethod
    def from_file(cls, path: str | Path) -> "FixtureMaskFill":
        table = {
            entry["prompt"]: [
                MaskFillResult(r["token"], float(r["score"])) for r in entry["results"]
            ]
            for entry in _load_json(path)
        }
        return cls(table)

    def fill_mask(self, prompt: str, top_n: int = DEFAULT_TOP_N) -> list[MaskFillResult]:
        check_mask_prompt(prompt, MASK_MARKER)
        results = sorted(
            self._results.get(prompt, []), key=lambda r: (-r.score, r.token)
        )[:top_n]
        return check_mask_results(results, top_n)


class FixtureEntailment:
    def __init__(self, logits_by_pair: dict[tuple[str, str], EntailmentLogits]):
        self._logits = dict(logits_by_pair)

    @classmethod
    def from_file(cls, path: str | Path) -> "FixtureEntailment":
        table = {
            (entry["premise"], entry["hypothesis"]): EntailmentLogits(
                float(entry["entail"]),
                float(entry["contradiction"]),
                float(entry["neutral"]),
            )
            for entry in _load_json(path)
        }
        return cls(table)

    def entail(self, premise: str, hypothesis: str) -> EntailmentLogits:
        check_nonempty(premise, "premise")
        check_nonempty(hypothesis, "hypothesis")
        try:
            logits = self._logits[(premise, hypothesis)]
        except KeyError:
            raise ContractError(
                f"no entailment fixture for premise={premise!r} hypothesis={hypothesis!r}"
            ) from None
        return check_logits(logits)


class FixtureNer:
    def __init__(self, spans_by_text: dict[str, list[NerSpan]]):
        self._spans = dict(spans_by_text)

    @classmethod
    def from_file(cls, path: str | Path) -> "FixtureNer":
        table = {
            entry["text"]: [
                NerSpan(s["surface"], s["label"], int(s["start"]), int(s["end"]))
                for s in entry["spans"]
            ]
            for entry in _load_json(path)
        }
        return cls(table)

    def ner(self, text: str) -> list[NerSpan]:
        check_nonempty(text, "text")
        return check_ner_spans(list(self._spans.get(text, [])), text)


class FixtureQa:
    def __init__(self, answers: dict[tuple[str, str], QaAnswer]):
        self._answers = dict(answers)

    @classmethod
    def from_file(cls, path: str | Path) -> "FixtureQa":
        table = {
            (entry["question"], entry["context"]): QaAnswer(
                entry["answer"], float(entry["score"]), int(entry["start"]), int(entry["end"])
            )
            for entry in _load_json(path)
        }
        return cls(table)

    def qa(self, question: str, context: str) -> QaAnswer:
        check_nonempty(question, "question")
        check_nonempty(context, "context")
        try:
            ans = self._answers[(question, context)]
        except KeyError:
            raise ContractError(
                f"no QA fixture for question={question!r} context={context!r}"
            ) from None
        return check_qa_answer(ans, context)


class FixtureRelationExtraction:
    def __init__(self, triples_by_text: dict[str, list[ExtractedTriple]]):
        self._triples = dict(triples_by_text)

    @classmethod
    def from_file(cls, path: str | Path) -> "FixtureRelationExtraction":
        table = {
            entry["text"]: [
                ExtractedTriple(t["subject"], t["relation"], t["object"])
                for t in entry["triples"]
            ]
            for entry in _load_json(path)
        }
        return cls(table)

    def extract_relations(self, text: str) -> list[ExtractedTriple]:
        check_nonempty(text, "text")
        return list(self._triples.get(text, []))


class FixtureKg:
    def __init__(self, labels_by_class: dict[str, list[str]]):
        self._labels = dict(labels_by_class)

    @classmethod
    def from_file(cls, path: str | Path) -> "FixtureKg":
        table = {entry["class"]: list(entry["labels"]) for entry in _load_json(path)}
        return cls(table)

    def sparql_instances(self, class_name: str) -> list[str]:
        seen: set[str] = set()
        out: list[str] = []
        for label in self._labels.get(class_name, []):
            key = canonical(label)
            if key not in seen:
                seen.add(key)
                out.append(label)
        return out


FIXTURE_FILES = {
    "search": "search.json",
    "mask_fill": "fill_mask.json",
    "entailment": "entail.json",
    "ner": "ner.json",
    "qa": "qa.json",
    "relext": "relext.json",
    "kg": "sparql.json",
}


def load_fixture_backends(directory: str | Path) -> BackendSuite:
    d = Path(directory)
    return BackendSuite(
        search=FixtureSearch.from_file(d / FIXTURE_FILES["search"]),
        mask_fill=FixtureMaskFill.from_file(d / FIXTURE_FILES["mask_fill"]),
        entailment=FixtureEntailment.from_file(d / FIXTURE_FILES["entailment"]),
        ner=FixtureNer.from_file(d / FIXTURE_FILES["ner"]),
        qa=FixtureQa.from_file(d / FIXTURE_FILES["qa"]),
        relext=FixtureRelationExtraction.from_file(d / FIXTURE_FILES["relext"]),
        kg=FixtureKg.from_file(d / FIXTURE_FILES["kg"]),
    )
