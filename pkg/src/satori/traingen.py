"""Deterministic fine-tuning dataset generators (MLM, entailment, QA, RE).

All generators read gold records plus the premise cache and emit instances
in a canonical order (sorted by relation then subject, preserving per-pair
emission order), so reruns are byte-identical. Premise selection always
breaks ties toward the lowest rank. Alias-sets contribute their first alias
as the emitted surface; the other aliases participate in matching only.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from satori.core import (
    ConfigError,
    GoldRecord,
    RelationRegistry,
    Triple,
    canonical,
    find_mentions,
    first_mention,
    mentioned_in,
    render_template,
)
from satori.backends.base import MaskFillBackend
from satori.evaluation import match
from satori.retrieval import Premise, PremiseCache, build_query

LABEL_ENTAILMENT = "ENTAILMENT"
LABEL_CONTRADICTION = "CONTRADICTION"


@dataclass(frozen=True)
class MlmInstance:
    prompt: str
    target: str


@dataclass(frozen=True)
class EntailmentInstance:
    premise: str
    hypothesis: str
    label: str


@dataclass(frozen=True)
class QaInstance:
    question: str
    context: str
    answer: str
    answer_start: int


@dataclass(frozen=True)
class ReInstance:
    text: str
    triples: tuple[Triple, ...]


@dataclass
class GenStats:
    """Counters reported alongside generated instances."""

    emitted: int = 0
    pairs_without_premises: int = 0
    skipped_no_positive: int = 0
    skipped_no_negative: int = 0
    skipped_no_mention: int = 0
    skipped_unmapped: int = 0

    def to_dict(self) -> dict:
        return {k: v for k, v in self.__dict__.items()}


def _sorted_by_pair(records: Sequence[GoldRecord]) -> list[GoldRecord]:
    return sorted(records, key=lambda r: (r.pair.relation, r.pair.subject))


def _premises_for(
    record: GoldRecord, cache: PremiseCache, registry: RelationRegistry
) -> list[Premise]:
    cached = cache.get(build_query(record.pair, registry))
    return cached or []


def _matches_gold(surface: str, gold: Sequence[Sequence[str]]) -> bool:
    return any(match(surface, alias_set) for alias_set in gold)


# ---------------------------------------------------------------------------
# Masked-language-model instances
# ---------------------------------------------------------------------------

def gen_mlm(
    records: Sequence[GoldRecord], registry: RelationRegistry
) -> list[MlmInstance]:
    """One prompt/target per (pair, alias-set); pairs with empty gold emit nothing."""
    instances = []
    for record in _sorted_by_pair(records):
        schema = registry.get(record.pair.relation)
        prompt = render_template(schema.t_lm, record.pair.subject)
        for alias_set in record.gold:
            instances.append(MlmInstance(prompt, alias_set[0]))
    return instances


# ---------------------------------------------------------------------------
# Entailment instances
# ---------------------------------------------------------------------------

def _first_premise_mentioning(
    premises: Sequence[Premise], surface: str
) -> Premise | None:
    for premise in premises:  # premises arrive rank-ordered
        if mentioned_in(surface, premise.text):
            return premise
    return None


def gen_entailment(
    records: Sequence[GoldRecord],
    cache: PremiseCache,
    mask_fill_backend: MaskFillBackend,
    registry: RelationRegistry,
) -> tuple[list[EntailmentInstance], GenStats]:
    """Positive/negative premise-hypothesis pairs per the construction rules.

    A positive requires a premise mentioning both subject and object; its
    negative replaces the object with the highest-scoring mask-fill token
    that is mentioned in some premise and absent from gold, falling back to
    another subject's gold object for the same relation. When the fallback
    object is mentioned in no premise, the rank-1 premise is used so the
    instance stays well-formed.
    """
    stats = GenStats()
    ordered = _sorted_by_pair(records)
    instances = []
    for record in ordered:
        pair = record.pair
        schema = registry.get(pair.relation)
        premises = _premises_for(record, cache, registry)
        if not premises:
            if record.gold:
                stats.pairs_without_premises += 1
                stats.skipped_no_positive += len(record.gold)
            continue
        lm_tokens = None  # fetched lazily, once per pair
        for alias_set in record.gold:
            positive = None
            for premise in premises:
                if not mentioned_in(pair.subject, premise.text):
                    continue
                for alias in alias_set:
                    if mentioned_in(alias, premise.text):
                        positive = (premise, alias)
                        break
                if positive:
                    break
            if positive is None:
                stats.skipped_no_positive += 1
                continue
            pos_premise, pos_object = positive
            instances.append(
                EntailmentInstance(
                    pos_premise.text,
                    render_template(schema.t_h, pair.subject, pos_object),
                    LABEL_ENTAILMENT,
                )
            )
            stats.emitted += 1

            if lm_tokens is None:
                prompt = render_template(schema.t_lm, pair.subject)
                lm_tokens = mask_fill_backend.fill_mask(prompt)
            negative = None
            for token in lm_tokens:  # descending score
                surface = token.token.strip()
                if not surface or _matches_gold(surface, record.gold):
                    continue
                neg_premise = _first_premise_mentioning(premises, surface)
                if neg_premise is not None:
                    negative = (neg_premise, surface)
                    break
            if negative is None:
                for other in ordered:
                    if (
                        other.pair.relation != pair.relation
                        or canonical(other.pair.subject) == canonical(pair.subject)
                    ):
                        continue
                    for other_set in other.gold:
                        surface = other_set[0]
                        if _matches_gold(surface, record.gold):
                            continue
                        neg_premise = _first_premise_mentioning(premises, surface)
                        negative = (neg_premise or premises[0], surface)
                        break
                    if negative:
                        break
            if negative is None:
                stats.skipped_no_negative += 1
                continue
            neg_premise, neg_object = negative
            instances.append(
                EntailmentInstance(
                    neg_premise.text,
                    render_template(schema.t_h, pair.subject, neg_object),
                    LABEL_CONTRADICTION,
                )
            )
            stats.emitted += 1
    return instances, stats


# ---------------------------------------------------------------------------
# Extractive-QA instances
# ---------------------------------------------------------------------------

def _whitespace_tokens(text: str) -> list[tuple[int, int]]:
    """(start, end) character offsets of whitespace-delimited tokens."""
    tokens = []
    i = 0
    n = len(text)
    while i < n:
        if text[i].isspace():
            i += 1
            continue
        j = i
        while j < n and not text[j].isspace():
            j += 1
        tokens.append((i, j))
        i = j
    return tokens


@dataclass(frozen=True)
class _ObjectMatch:
    start_tok: int
    end_tok: int
    start_char: int
    end_char: int
    set_id: int


def _object_matches(text: str, gold: Sequence[Sequence[str]]) -> list[_ObjectMatch]:
    tokens = _whitespace_tokens(text)
    if not tokens:
        return []

    def covering_tokens(start: int, end: int) -> tuple[int, int]:
        first = last = -1
        for idx, (ts, te) in enumerate(tokens):
            if ts < end and te > start:  # token overlaps the span
                if first == -1:
                    first = idx
                last = idx
        return first, last

    found = {}
    for set_id, alias_set in enumerate(gold):
        for alias in alias_set:
            for start, end in find_mentions(alias, text):
                ft, lt = covering_tokens(start, end)
                if ft == -1:
                    continue
                found.setdefault((start, end, set_id), _ObjectMatch(ft, lt, start, end, set_id))
    return sorted(found.values(), key=lambda m: (m.start_tok, m.end_tok, m.set_id))


MAX_TOKEN_GAP = 3


def _clusters(matches: list[_ObjectMatch]) -> list[list[_ObjectMatch]]:
    """Split sorted matches where the token gap to the cluster so far exceeds the cap."""
    clusters: list[list[_ObjectMatch]] = []
    frontier: int | None = None
    for m in matches:
        if frontier is not None and m.start_tok - frontier - 1 <= MAX_TOKEN_GAP:
            clusters[-1].append(m)
            frontier = max(frontier, m.end_tok)
        else:
            clusters.append([m])
            frontier = m.end_tok
    return clusters


def _trim_cluster(cluster: list[_ObjectMatch]) -> list[_ObjectMatch]:
    """Drop edge matches whose alias-set is already covered inside the cluster."""
    window = list(cluster)
    while len(window) > 1 and any(m.set_id == window[0].set_id for m in window[1:]):
        window.pop(0)
    while len(window) > 1 and any(m.set_id == window[-1].set_id for m in window[:-1]):
        window.pop()
    return window


def _best_window(text: str, gold: Sequence[Sequence[str]]) -> tuple[int, tuple[int, int]] | None:
    """(distinct objects covered, answer char span) of the best window, or None."""
    matches = _object_matches(text, gold)
    if not matches:
        return None
    best = None
    for cluster in _clusters(matches):
        distinct = len({m.set_id for m in cluster})
        if best is None or distinct > best[0]:
            window = _trim_cluster(cluster)
            best = (distinct, (window[0].start_char, window[-1].end_char))
    return best


def gen_qa(
    records: Sequence[GoldRecord],
    cache: PremiseCache,
    registry: RelationRegistry,
) -> tuple[list[QaInstance], GenStats]:
    """Question/answer/context instances per the span-construction rules.

    Empty gold yields the rank-1 passage with an empty answer. A single
    object uses the lowest-rank passage mentioning it. Multiple objects use
    the passage whose contiguous token window covers the most distinct gold
    objects with consecutive covered objects at most three whitespace tokens
    apart; the answer is the exact character span from the first to the last
    covered object, ties broken toward the lower rank.
    """
    stats = GenStats()
    instances = []
    for record in _sorted_by_pair(records):
        pair = record.pair
        schema = registry.get(pair.relation)
        question = render_template(schema.t_qa, pair.subject)
        premises = _premises_for(record, cache, registry)
        if not premises:
            stats.pairs_without_premises += 1
            continue
        if not record.gold:
            instances.append(QaInstance(question, premises[0].text, "", -1))
            stats.emitted += 1
            continue
        if len(record.gold) == 1:
            hit = None
            for premise in premises:
                for alias in record.gold[0]:
                    span = first_mention(alias, premise.text)
                    if span:
                        hit = (premise, span)
                        break
                if hit:
                    break
            if hit is None:
                stats.skipped_no_mention += 1
                continue
            premise, (start, end) = hit
            instances.append(
                QaInstance(question, premise.text, premise.text[start:end], start)
            )
            stats.emitted += 1
            continue
        best = None  # (distinct, rank, span, premise)
        for premise in premises:
            window = _best_window(premise.text, record.gold)
            if window is None:
                continue
            distinct, span = window
            if best is None or distinct > best[0]:
                best = (distinct, premise.rank, span, premise)
        if best is None:
            stats.skipped_no_mention += 1
            continue
        _, _, (start, end), premise = best
        instances.append(
            QaInstance(question, premise.text, premise.text[start:end], start)
        )
        stats.emitted += 1
    return instances, stats


# ---------------------------------------------------------------------------
# Relation-extraction instances
# ---------------------------------------------------------------------------

def load_relation_map(path: str | Path) -> dict[str, str | None]:
    """Dataset relation -> extractor relation label; null marks UNMAPPED relations."""
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"relation map not found: {p}")
    doc = json.loads(p.read_text(encoding="utf-8"))
    if not isinstance(doc, dict):
        raise ConfigError(f"relation map {p} must be a JSON object")
    for key, value in doc.items():
        if value is not None and not isinstance(value, str):
            raise ConfigError(f"relation map entry {key!r} must be a string or null")
    return doc


def gen_re(
    records: Sequence[GoldRecord],
    cache: PremiseCache,
    relation_map: dict[str, str | None],
    registry: RelationRegistry,
) -> tuple[list[ReInstance], GenStats]:
    """One instance per pair from the lowest-rank passage mentioning a gold object."""
    stats = GenStats()
    instances = []
    for record in _sorted_by_pair(records):
        pair = record.pair
        label = relation_map.get(pair.relation)
        if label is None:
            stats.skipped_unmapped += 1
            continue
        if not record.gold:
            continue
        premises = _premises_for(record, cache, registry)
        if not premises:
            stats.pairs_without_premises += 1
            continue
        emitted = False
        for premise in premises:
            objects = []
            for alias_set in record.gold:
                for alias in alias_set:
                    if mentioned_in(alias, premise.text):
                        objects.append(alias)
                        break
            if objects:
                instances.append(
                    ReInstance(
                        premise.text,
                        tuple(Triple(pair.subject, label, o) for o in objects),
                    )
                )
                stats.emitted += 1
                emitted = True
                break
        if not emitted:
            stats.skipped_no_mention += 1
    return instances, stats


# ---------------------------------------------------------------------------
# JSONL row serializers (the contract with the trainer)
# ---------------------------------------------------------------------------

def mlm_rows(instances: Sequence[MlmInstance]) -> list[dict]:
    return [{"prompt": i.prompt, "target": i.target} for i in instances]


def entailment_rows(instances: Sequence[EntailmentInstance]) -> list[dict]:
    return [
        {"premise": i.premise, "hypothesis": i.hypothesis, "label": i.label}
        for i in instances
    ]


def qa_rows(instances: Sequence[QaInstance]) -> list[dict]:
    rows = []
    for n, i in enumerate(instances):
        answers = (
            {"text": [], "answer_start": []}
            if i.answer == ""
            else {"text": [i.answer], "answer_start": [i.answer_start]}
        )
        rows.append(
            {"id": str(n), "question": i.question, "context": i.context, "answers": answers}
        )
    return rows


def re_rows(instances: Sequence[ReInstance]) -> list[dict]:
    return [
        {
            "text": i.text,
            "triples": [
                {"subject": t.subject, "relation": t.relation, "object": t.object}
                for t in i.triples
            ],
        }
        for i in instances
    ]
