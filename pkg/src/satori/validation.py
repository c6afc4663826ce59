"""Triple validation by textual entailment, and the full prediction pipeline.

A candidate triple is rendered into a hypothesis, scored against each
retrieved premise with the entailment backend, and accepted when the mean
two-class entailment probability reaches the relation's threshold. The
two-class probability restricts the softmax to the Entailment and
Contradiction logits, ignoring Neutral.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Sequence

from satori.core import (
    InputPair,
    PredictedObject,
    PredictionRecord,
    RelationRegistry,
    SOURCE_KG,
    SOURCE_LM,
    SOURCE_NER,
    Triple,
    render_template,
)
from satori.backends.base import (
    BackendError,
    BackendSuite,
    ContractError,
    EntailmentBackend,
    EntailmentLogits,
)
from satori.candidates import (
    CandidateObject,
    KgInstanceCache,
    filter_mentioned,
    filter_stopwords,
    kg_candidates,
    lm_candidates,
    merge_candidates,
    ner_candidates,
)
from satori.retrieval import Premise, PremiseCache, RetrievalError, fetch_premises

logger = logging.getLogger(__name__)

STATUS_VALIDATED = "VALIDATED"
STATUS_REJECTED = "REJECTED"
STATUS_NO_PREMISES = "NO_PREMISES"
STATUS_ERROR = "ERROR"


@dataclass(frozen=True)
class Verdict:
    """Per-premise entailment probabilities and the accept decision for one triple."""

    triple: Triple
    hypothesis: str
    per_premise: tuple[tuple[int, float], ...]
    mean_probability: float | None
    accepted: bool
    status: str
    error: str | None = None


def make_hypothesis(triple: Triple, registry: RelationRegistry) -> str:
    """Render the relation's hypothesis template with subject and object."""
    schema = registry.get(triple.relation)
    return render_template(schema.t_h, triple.subject, triple.object)


def entail_probability(logits: EntailmentLogits) -> float:
    """Two-class softmax over the Entailment and Contradiction logits.

    Computed as the logistic function of (entail - contradiction), which is
    numerically stable and shift-invariant; the neutral logit is ignored.
    """
    for v in (logits.entail, logits.contradiction, logits.neutral):
        if not math.isfinite(v):
            raise ContractError(f"non-finite logits: {logits}")
    diff = logits.entail - logits.contradiction
    if diff >= 0:
        return 1.0 / (1.0 + math.exp(-diff))
    e = math.exp(diff)
    return e / (1.0 + e)


def validate_triple(
    triple: Triple,
    hypothesis: str,
    premises: Sequence[Premise],
    rte_backend: EntailmentBackend,
    threshold: float,
) -> Verdict:
    """Score a hypothesis against every premise and apply the mean threshold.

    Zero premises yield status NO_PREMISES and a rejection; the mean divides
    by the actual premise count when fewer than k were retrieved.
    """
    if not (0.0 <= threshold <= 1.0):
        raise ValueError(f"entailment threshold {threshold} outside [0, 1]")
    if not premises:
        return Verdict(triple, hypothesis, (), None, False, STATUS_NO_PREMISES)
    per_premise = []
    for premise in premises:
        logits = rte_backend.entail(premise.text, hypothesis)
        per_premise.append((premise.rank, entail_probability(logits)))
    mean = sum(p for _, p in per_premise) / len(per_premise)
    accepted = mean >= threshold
    return Verdict(
        triple,
        hypothesis,
        tuple(per_premise),
        mean,
        accepted,
        STATUS_VALIDATED if accepted else STATUS_REJECTED,
    )


@dataclass(frozen=True)
class PipelineResult:
    """Prediction record plus the verdicts behind it; error set on pair-level failure."""

    record: PredictionRecord
    verdicts: tuple[Verdict, ...] = ()
    error: str | None = None


@dataclass
class PipelineSettings:
    """Knobs for one prediction run; schema values apply where a field is None."""

    k: int = 3
    stoplist: frozenset[str] = frozenset()
    sources: frozenset[str] | None = None
    lm_threshold: float | None = None
    entailment_threshold: float | None = None
    kg_cache: KgInstanceCache | None = None
    explain: bool = False


def generate_candidates(
    pair: InputPair,
    registry: RelationRegistry,
    backends: BackendSuite,
    premises: Sequence[Premise],
    settings: PipelineSettings,
) -> list[CandidateObject]:
    """Source-wise candidate generation followed by the per-source filters and merge."""
    schema = registry.get(pair.relation)
    sources = settings.sources if settings.sources is not None else schema.sources
    t_lm = settings.lm_threshold if settings.lm_threshold is not None else schema.T_lm

    per_source: list[list[CandidateObject]] = []
    if SOURCE_LM in sources:
        lm = lm_candidates(pair, registry, backends.mask_fill, t_lm)
        per_source.append(filter_mentioned(filter_stopwords(lm, settings.stoplist), premises))
    if SOURCE_KG in sources:
        kg = kg_candidates(schema, backends.kg, settings.kg_cache)
        per_source.append(filter_mentioned(filter_stopwords(kg, settings.stoplist), premises))
    if SOURCE_NER in sources:
        ner = ner_candidates(premises, schema, backends.ner, registry.ner_class_labels)
        per_source.append(filter_stopwords(ner, settings.stoplist))
    return merge_candidates(per_source)


def predict_objects(
    pair: InputPair,
    registry: RelationRegistry,
    backends: BackendSuite,
    cache: PremiseCache,
    settings: PipelineSettings | None = None,
) -> PipelineResult:
    """Full pipeline for one pair: premises, candidates, filters, validation.

    Deterministic given fixed backends and cache contents. A retrieval
    failure produces a pair-level failure result; a backend failure on one
    candidate degrades that candidate to an ERROR verdict and the pair
    continues.
    """
    settings = settings or PipelineSettings()
    schema = registry.get(pair.relation)
    t_e = (
        settings.entailment_threshold
        if settings.entailment_threshold is not None
        else schema.T_e
    )
    try:
        premises = fetch_premises(pair, registry, settings.k, backends.search, cache)
    except RetrievalError as exc:
        logger.warning("retrieval failed for %s/%s: %s", pair.subject, pair.relation, exc)
        return PipelineResult(PredictionRecord(pair, ()), (), error=str(exc))

    candidates = generate_candidates(pair, registry, backends, premises, settings)

    verdicts: list[Verdict] = []
    accepted: list[PredictedObject] = []
    for cand in candidates:
        triple = Triple(pair.subject, pair.relation, cand.surface)
        hypothesis = make_hypothesis(triple, registry)
        try:
            verdict = validate_triple(triple, hypothesis, premises, backends.entailment, t_e)
        except BackendError as exc:
            logger.warning("validation failed for %s: %s", triple, exc)
            verdict = Verdict(triple, hypothesis, (), None, False, STATUS_ERROR, str(exc))
        verdicts.append(verdict)
        if verdict.accepted:
            accepted.append(
                PredictedObject(cand.surface, cand.sources, verdict.mean_probability)
            )
    return PipelineResult(PredictionRecord(pair, tuple(accepted)), tuple(verdicts))


@dataclass(frozen=True)
class ScoredCandidate:
    """A candidate with both calibration scores attached (thresholds not applied)."""

    surface: str
    sources: frozenset[str]
    lm_score: float | None
    entail_mean: float | None  # None when no premises were available


def score_candidates(
    pair: InputPair,
    registry: RelationRegistry,
    backends: BackendSuite,
    cache: PremiseCache,
    settings: PipelineSettings | None = None,
) -> list[ScoredCandidate]:
    """Run the pipeline with thresholds disabled, recording every score.

    Used by threshold calibration: because the LM threshold and the
    entailment threshold are pointwise filters, the prediction set at any
    (T_lm, T_e) is recoverable from these scores without further backend
    calls.
    """
    settings = settings or PipelineSettings()
    open_settings = PipelineSettings(
        k=settings.k,
        stoplist=settings.stoplist,
        sources=settings.sources,
        lm_threshold=0.0,
        kg_cache=settings.kg_cache,
    )
    try:
        premises = fetch_premises(pair, registry, settings.k, backends.search, cache)
    except RetrievalError as exc:
        logger.warning("retrieval failed for %s/%s: %s", pair.subject, pair.relation, exc)
        return []
    candidates = generate_candidates(pair, registry, backends, premises, open_settings)
    scored = []
    for cand in candidates:
        triple = Triple(pair.subject, pair.relation, cand.surface)
        hypothesis = make_hypothesis(triple, registry)
        try:
            verdict = validate_triple(triple, hypothesis, premises, backends.entailment, 0.0)
        except BackendError as exc:
            logger.warning("scoring failed for %s: %s", triple, exc)
            continue
        scored.append(
            ScoredCandidate(cand.surface, cand.sources, cand.lm_score, verdict.mean_probability)
        )
    return scored
