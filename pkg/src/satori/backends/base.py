"""Backend contracts: wire types, protocols, shared postcondition checks, retries.

Every external capability (web search, mask-fill LM, entailment scorer, NER,
extractive QA, relation extraction, SPARQL endpoint) has two interchangeable
implementations: an HTTP client and an in-process fixture. Both must satisfy
the same postconditions, enforced by the validators in this module and by the
contract test suite that runs against both.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import Callable, Protocol, TypeVar

from satori.core import NER_LABELS, SatoriError

DEFAULT_TOP_N = 100
DEFAULT_RETRIES = 3
DEFAULT_BACKOFF = 0.5


class BackendError(SatoriError):
    """Base class for backend failures."""


class TransportError(BackendError):
    """A retriable communication failure (network, 5xx, timeout)."""


class ContractError(BackendError):
    """The caller or the backend violated the capability contract."""


@dataclass(frozen=True)
class SearchHit:
    title: str
    url: str
    snippet: str


@dataclass(frozen=True)
class MaskFillResult:
    token: str
    score: float


@dataclass(frozen=True)
class EntailmentLogits:
    entail: float
    contradiction: float
    neutral: float


@dataclass(frozen=True)
class NerSpan:
    surface: str
    label: str
    start: int
    end: int


@dataclass(frozen=True)
class QaAnswer:
    answer: str
    score: float
    start: int
    end: int

    @property
    def is_empty(self) -> bool:
        return self.answer == ""


@dataclass(frozen=True)
class ExtractedTriple:
    subject: str
    relation_label: str
    object: str


class SearchBackend(Protocol):
    def search(self, query: str, k: int) -> list[SearchHit]: ...


class MaskFillBackend(Protocol):
    def fill_mask(self, prompt: str, top_n: int = DEFAULT_TOP_N) -> list[MaskFillResult]: ...


class EntailmentBackend(Protocol):
    def entail(self, premise: str, hypothesis: str) -> EntailmentLogits: ...


class NerBackend(Protocol):
    def ner(self, text: str) -> list[NerSpan]: ...


class QaBackend(Protocol):
    def qa(self, question: str, context: str) -> QaAnswer: ...


class RelationExtractionBackend(Protocol):
    def extract_relations(self, text: str) -> list[ExtractedTriple]: ...


class KgBackend(Protocol):
    def sparql_instances(self, class_name: str) -> list[str]: ...


@dataclass
class BackendSuite:
    """One object bundling every capability, as the pipeline consumes them."""

    search: SearchBackend
    mask_fill: MaskFillBackend
    entailment: EntailmentBackend
    ner: NerBackend
    qa: QaBackend
    relext: RelationExtractionBackend
    kg: KgBackend


# ---------------------------------------------------------------------------
# Postcondition checks, shared by fixture and HTTP implementations
# ---------------------------------------------------------------------------

def check_mask_prompt(prompt: str, mask_marker: str) -> None:
    n = prompt.count(mask_marker)
    if n != 1:
        raise ContractError(f"prompt must contain exactly one {mask_marker}, found {n}: {prompt!r}")


def check_mask_results(results: list[MaskFillResult], top_n: int) -> list[MaskFillResult]:
    if top_n < 1:
        raise ContractError(f"top_n must be positive, got {top_n}")
    if len(results) > top_n:
        raise ContractError(f"backend returned {len(results)} results for top_n={top_n}")
    for r in results:
        if not (0.0 <= r.score <= 1.0):
            raise ContractError(f"fill-mask score {r.score} outside [0, 1] for {r.token!r}")
    for a, b in zip(results, results[1:]):
        if b.score > a.score:
            raise ContractError("fill-mask results are not sorted by descending score")
    return results


def check_logits(logits: EntailmentLogits) -> EntailmentLogits:
    for name, v in (("entail", logits.entail), ("contradiction", logits.contradiction),
                    ("neutral", logits.neutral)):
        if not math.isfinite(v):
            raise ContractError(f"non-finite {name} logit: {v}")
    return logits


def check_ner_spans(spans: list[NerSpan], text: str) -> list[NerSpan]:
    for s in spans:
        if s.label not in NER_LABELS:
            raise ContractError(f"unknown NER label {s.label!r}")
        if not (0 <= s.start < s.end <= len(text)):
            raise ContractError(f"NER span offsets ({s.start}, {s.end}) invalid for text of length {len(text)}")
        if text[s.start:s.end] != s.surface:
            raise ContractError(
                f"NER surface {s.surface!r} does not equal text[{s.start}:{s.end}] = {text[s.start:s.end]!r}"
            )
    return spans


def check_qa_answer(ans: QaAnswer, context: str) -> QaAnswer:
    if not (0.0 <= ans.score <= 1.0):
        raise ContractError(f"QA score {ans.score} outside [0, 1]")
    if ans.answer == "":
        if (ans.start, ans.end) != (-1, -1):
            raise ContractError(f"empty answer must carry offsets (-1, -1), got ({ans.start}, {ans.end})")
        return ans
    if not (0 <= ans.start < ans.end <= len(context)):
        raise ContractError(f"QA answer offsets ({ans.start}, {ans.end}) invalid")
    if context[ans.start:ans.end] != ans.answer:
        raise ContractError(
            f"QA answer {ans.answer!r} does not equal context[{ans.start}:{ans.end}]"
        )
    return ans


def check_nonempty(value: str, what: str) -> str:
    if not value.strip():
        raise ContractError(f"{what} must be non-empty")
    return value


# ---------------------------------------------------------------------------
# Retry policy
# ---------------------------------------------------------------------------

T = TypeVar("T")


def call_with_retries(
    fn: Callable[[], T],
    retries: int = DEFAULT_RETRIES,
    backoff: float = DEFAULT_BACKOFF,
    sleep: Callable[[float], None] = time.sleep,
) -> T:
    """Run `fn`, retrying TransportError up to `retries` times with exponential backoff."""
    attempt = 0
    while True:
        try:
            return fn()
        except TransportError:
            if attempt >= retries:
                raise
            sleep(backoff * (2 ** attempt))
            attempt += 1
