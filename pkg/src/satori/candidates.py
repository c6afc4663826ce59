"""Candidate-object generation from the configured sources, plus the filters.

Sources: mask-fill LM tokens over the per-relation prompt, knowledge-graph
instances of the relation's range classes, and named entities recognized in
the retrieved premises whose NER label maps to a range class. The stopword
filter applies to all sources; the mention filter applies to LM and KG
candidates only, since NER candidates originate in the premises and are
mentioned by construction.
"""

from __future__ import annotations

import logging
import threading
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Iterable, Sequence

from satori.core import (
    InputPair,
    RelationRegistry,
    RelationSchema,
    SOURCE_KG,
    SOURCE_LM,
    SOURCE_NER,
    canonical,
    dump_json_line,
    mentioned_in,
    read_jsonl,
    render_template,
)
from satori.backends.base import BackendError, KgBackend, MaskFillBackend, NerBackend
from satori.retrieval import Premise

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class CandidateObject:
    """A surface form with source provenance; lm_score present iff LM is a source."""

    surface: str
    sources: frozenset[str]
    lm_score: float | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "surface", self.surface.strip())
        if not self.surface:
            raise ValueError("candidate with empty surface")
        if not self.sources or not self.sources <= {SOURCE_LM, SOURCE_KG, SOURCE_NER}:
            raise ValueError(f"bad candidate sources: {set(self.sources)}")
        if (self.lm_score is not None) != (SOURCE_LM in self.sources):
            raise ValueError(
                f"lm_score must be present exactly when LM is a source ({self.surface!r})"
            )


# ---------------------------------------------------------------------------
# Stoplist
# ---------------------------------------------------------------------------

def load_stoplist(path: str | Path) -> frozenset[str]:
    """Plain-text stoplist, one token per line; blank lines and # comments skipped."""
    tokens = set()
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        token = line.strip()
        if token and not token.startswith("#"):
            tokens.add(token.lower())
    return frozenset(tokens)


def default_stoplist() -> frozenset[str]:
    text = resources.files("satori.data").joinpath("stopwords_en.txt").read_text("utf-8")
    return frozenset(
        t.strip().lower() for t in text.splitlines() if t.strip() and not t.startswith("#")
    )


# ---------------------------------------------------------------------------
# KG instance cache
# ---------------------------------------------------------------------------

class KgInstanceCache:
    """JSONL cache of class -> instance labels: {"class": str, "labels": [str]}."""

    def __init__(self, path: str | Path) -> None:
        self.path = Path(path)
        self._lock = threading.Lock()
        self._labels: dict[str, list[str]] = {}
        if self.path.exists():
            for _, row in read_jsonl(self.path):
                self._labels[row["class"]] = list(row["labels"])

    def get(self, class_name: str) -> list[str] | None:
        return self._labels.get(class_name)

    def put(self, class_name: str, labels: list[str]) -> None:
        with self._lock:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            with self.path.open("a", encoding="utf-8") as fh:
                fh.write(dump_json_line({"class": class_name, "labels": labels}) + "\n")
            self._labels[class_name] = list(labels)


# ---------------------------------------------------------------------------
# Sources
# ---------------------------------------------------------------------------

def lm_candidates(
    pair: InputPair,
    registry: RelationRegistry,
    mask_fill_backend: MaskFillBackend,
    threshold: float,
) -> list[CandidateObject]:
    """Mask-fill tokens scoring at least `threshold`, ordered by descending score."""
    schema = registry.get(pair.relation)
    prompt = render_template(schema.t_lm, pair.subject)
    out = []
    seen: set[str] = set()
    for result in mask_fill_backend.fill_mask(prompt):
        if result.score < threshold:
            break  # results are sorted by descending score
        surface = result.token.strip()
        if not surface:
            continue
        key = canonical(surface)
        if key in seen:
            continue
        seen.add(key)
        out.append(CandidateObject(surface, frozenset({SOURCE_LM}), result.score))
    return out


def kg_candidates(
    schema: RelationSchema,
    kg_backend: KgBackend,
    cache: KgInstanceCache | None = None,
) -> list[CandidateObject]:
    """Instances of every range class, deduplicated case-insensitively."""
    out = []
    seen: set[str] = set()
    for class_name in schema.range_classes:
        labels = cache.get(class_name) if cache is not None else None
        if labels is None:
            labels = kg_backend.sparql_instances(class_name)
            if cache is not None:
                cache.put(class_name, labels)
        for label in labels:
            surface = label.strip()
            if not surface:
                continue
            key = canonical(surface)
            if key in seen:
                continue
            seen.add(key)
            out.append(CandidateObject(surface, frozenset({SOURCE_KG})))
    return out


def ner_candidates(
    premises: Sequence[Premise],
    schema: RelationSchema,
    ner_backend: NerBackend,
    class_label_map: dict[str, str],
) -> list[CandidateObject]:
    """Entities found in the premises whose NER label maps to a range class.

    A premise whose NER call fails is skipped with a warning; the remaining
    premises still contribute.
    """
    wanted_labels = {
        class_label_map[c] for c in schema.range_classes if c in class_label_map
    }
    out = []
    seen: set[str] = set()
    for premise in premises:
        try:
            spans = ner_backend.ner(premise.text)
        except BackendError as exc:
            logger.warning(
                "NER failed on premise rank %d for query %r: %s",
                premise.rank, premise.query, exc,
            )
            continue
        for span in spans:
            if span.label not in wanted_labels:
                continue
            surface = span.surface.strip()
            if not surface:
                continue
            key = canonical(surface)
            if key in seen:
                continue
            seen.add(key)
            out.append(CandidateObject(surface, frozenset({SOURCE_NER})))
    return out


# ---------------------------------------------------------------------------
# Filters and merge
# ---------------------------------------------------------------------------

def is_punctuation_only(surface: str) -> bool:
    return not any(ch.isalnum() for ch in surface)


def filter_stopwords(
    candidates: Iterable[CandidateObject], stoplist: frozenset[str]
) -> list[CandidateObject]:
    """Drop stoplist entries and surfaces made purely of punctuation/whitespace."""
    return [
        c
        for c in candidates
        if canonical(c.surface) not in stoplist and not is_punctuation_only(c.surface)
    ]


def filter_mentioned(
    candidates: Iterable[CandidateObject], premises: Sequence[Premise]
) -> list[CandidateObject]:
    """Keep candidates explicitly mentioned (word-boundary match) in some premise."""
    return [
        c
        for c in candidates
        if any(mentioned_in(c.surface, p.text) for p in premises)
    ]


def merge_candidates(
    candidate_lists: Sequence[Sequence[CandidateObject]],
) -> list[CandidateObject]:
    """Union with case-insensitive dedup and stable presentation order.

    A merged entry keeps the first-seen surface, the union of sources, and
    the maximum lm_score among merged entries. Order: LM-backed candidates
    by descending score, then KG-only, then NER-only, alphabetically within
    each block.
    """
    merged: dict[str, dict] = {}
    for cands in candidate_lists:
        for c in cands:
            key = canonical(c.surface)
            entry = merged.get(key)
            if entry is None:
                merged[key] = {
                    "surface": c.surface,
                    "sources": set(c.sources),
                    "lm_score": c.lm_score,
                }
            else:
                entry["sources"] |= set(c.sources)
                if c.lm_score is not None:
                    if entry["lm_score"] is None or c.lm_score > entry["lm_score"]:
                        entry["lm_score"] = c.lm_score

    def block(entry: dict) -> int:
        if SOURCE_LM in entry["sources"]:
            return 0
        if SOURCE_KG in entry["sources"]:
            return 1
        return 2

    def sort_key(entry: dict):
        if block(entry) == 0:
            return (0, -entry["lm_score"], canonical(entry["surface"]))
        return (block(entry), 0.0, canonical(entry["surface"]))

    return [
        CandidateObject(e["surface"], frozenset(e["sources"]), e["lm_score"])
        for e in sorted(merged.values(), key=sort_key)
    ]
