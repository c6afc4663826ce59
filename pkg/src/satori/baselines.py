"""The three comparison systems: LM prompting, extractive QA, relation extraction.

All baselines consume the same premise cache and backend suite as the main
pipeline, so comparisons are apples-to-apples.
"""

from __future__ import annotations

import re
from typing import Sequence

from satori.core import (
    InputPair,
    PredictedObject,
    PredictionRecord,
    RelationRegistry,
    SOURCE_LM,
    canonical,
    render_template,
)
from satori.backends.base import (
    MaskFillBackend,
    QaBackend,
    RelationExtractionBackend,
)
from satori.candidates import is_punctuation_only
from satori.retrieval import Premise

SYSTEM_SATORI = "satori"
SYSTEM_LM_BASELINE = "lm-baseline"
SYSTEM_QA_BASELINE = "qa-baseline"
SYSTEM_RE_BASELINE = "re-baseline"
SYSTEMS = (SYSTEM_SATORI, SYSTEM_LM_BASELINE, SYSTEM_QA_BASELINE, SYSTEM_RE_BASELINE)

# Provenance tags for baseline outputs, alongside the pipeline's LM/KG/NER.
SOURCE_QA = "QA"
SOURCE_RE = "RE"

FLAG_UNSUPPORTED = "UNSUPPORTED"


def lm_baseline(
    pair: InputPair,
    registry: RelationRegistry,
    mask_fill_backend: MaskFillBackend,
    stoplist: frozenset[str],
    threshold: float | None = None,
) -> PredictionRecord:
    """Mask-fill tokens above the LM threshold, stopword-filtered, nothing else."""
    schema = registry.get(pair.relation)
    t_lm = threshold if threshold is not None else schema.T_lm
    prompt = render_template(schema.t_lm, pair.subject)
    objects = []
    seen: set[str] = set()
    for result in mask_fill_backend.fill_mask(prompt):
        if result.score < t_lm:
            break
        surface = result.token.strip()
        if not surface or is_punctuation_only(surface):
            continue
        key = canonical(surface)
        if key in stoplist or key in seen:
            continue
        seen.add(key)
        objects.append(PredictedObject(surface, frozenset({SOURCE_LM}), result.score))
    return PredictionRecord(pair, tuple(objects))


_FINAL_COORDINATOR = re.compile(r"\b(and|or)\b(?!.*\b(?:and|or)\b)")


def split_list_answer(answer: str) -> list[str]:
    """Split a list-style answer on commas and the final coordinating and/or.

    Items are trimmed and empties dropped; a non-list answer comes back as a
    singleton.
    """
    parts = answer.split(",")
    items = [p.strip() for p in parts[:-1]]
    last = parts[-1]
    m = _FINAL_COORDINATOR.search(last)
    if m:
        items.append(last[: m.start()].strip())
        items.append(last[m.end():].strip())
    else:
        items.append(last.strip())
    return [i for i in items if i]


def qa_baseline(
    pair: InputPair,
    premises: Sequence[Premise],
    qa_backend: QaBackend,
    registry: RelationRegistry,
    threshold: float | None = None,
) -> PredictionRecord:
    """Per-premise extractive QA; answers above T_qa are list-split and unioned."""
    schema = registry.get(pair.relation)
    t_qa = threshold if threshold is not None else schema.T_qa
    question = render_template(schema.t_qa, pair.subject)
    collected: dict[str, tuple[str, float]] = {}
    order: list[str] = []
    for premise in premises:
        answer = qa_backend.qa(question, premise.text)
        if answer.is_empty or answer.score < t_qa:
            continue
        for item in split_list_answer(answer.answer):
            key = canonical(item)
            if key not in collected:
                collected[key] = (item, answer.score)
                order.append(key)
            elif answer.score > collected[key][1]:
                collected[key] = (collected[key][0], answer.score)
    objects = tuple(
        PredictedObject(collected[k][0], frozenset({SOURCE_QA}), collected[k][1])
        for k in order
    )
    return PredictionRecord(pair, objects)


def re_baseline(
    pair: InputPair,
    premises: Sequence[Premise],
    re_backend: RelationExtractionBackend,
    relation_map: dict[str, str | None],
    require_subject_match: bool = True,
) -> PredictionRecord:
    """Objects of extracted triples whose relation label matches the mapping.

    Relations without a mapping produce an empty prediction flagged
    UNSUPPORTED. Subject matching is on by default for precision.
    """
    label = relation_map.get(pair.relation)
    if label is None:
        return PredictionRecord(pair, (), flags=(FLAG_UNSUPPORTED,))
    wanted = canonical(label)
    subject = canonical(pair.subject)
    objects = []
    seen: set[str] = set()
    for premise in premises:
        for triple in re_backend.extract_relations(premise.text):
            if canonical(triple.relation_label) != wanted:
                continue
            if require_subject_match and canonical(triple.subject) != subject:
                continue
            surface = triple.object.strip()
            if not surface:
                continue
            key = canonical(surface)
            if key in seen:
                continue
            seen.add(key)
            objects.append(PredictedObject(surface, frozenset({SOURCE_RE})))
    return PredictionRecord(pair, tuple(objects))
