"""Set-based scoring, macro reports, threshold grid search, regime driver.

Scoring conventions for a (predicted, gold) pair, with gold a list of
alias-sets and matching case-insensitive after trimming:

    P = |predictions matching some alias-set| / |predictions|   (if any predicted)
        else 1 if gold is empty else 0
    R = |alias-sets matched by some prediction| / |gold|        (if gold non-empty)
        else 1
    F1 = harmonic mean, 0 when P + R = 0

Each alias-set counts at most once for recall. The macro report averages
over a relation's pairs, then takes the unweighted mean over relations.
"""

from __future__ import annotations

import logging
import math
import random
from dataclasses import dataclass
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from satori.core import GoldRecord, InputPair, SatoriError, canonical

logger = logging.getLogger(__name__)

THRESHOLD_GRID: tuple[float, ...] = tuple(i / 100 for i in range(1, 100))


class EvaluationError(SatoriError):
    """Evaluation or calibration input is empty or malformed."""


@dataclass(frozen=True)
class PairScore:
    precision: float
    recall: float
    f1: float
    pair: InputPair | None = None


@dataclass(frozen=True)
class RelationSummary:
    precision: float
    recall: float
    f1: float
    pair_count: float


@dataclass(frozen=True)
class EvalReport:
    per_relation: dict[str, RelationSummary]
    overall_precision: float
    overall_recall: float
    overall_f1: float
    pooled: bool = False

    def to_dict(self) -> dict:
        return {
            "per_relation": {
                rel: {
                    "precision": s.precision,
                    "recall": s.recall,
                    "f1": s.f1,
                    "pairs": s.pair_count,
                }
                for rel, s in self.per_relation.items()
            },
            "overall": {
                "precision": self.overall_precision,
                "recall": self.overall_recall,
                "f1": self.overall_f1,
            },
            "pooled": self.pooled,
        }

    def render_table(self) -> str:
        rows = [("relation", "pairs", "P", "R", "F1")]
        for rel, s in self.per_relation.items():
            rows.append(
                (rel, f"{s.pair_count:g}", f"{s.precision:.4f}", f"{s.recall:.4f}", f"{s.f1:.4f}")
            )
        label = "ALL (pooled)" if self.pooled else "ALL (macro)"
        rows.append(
            (
                label,
                f"{sum(s.pair_count for s in self.per_relation.values()):g}",
                f"{self.overall_precision:.4f}",
                f"{self.overall_recall:.4f}",
                f"{self.overall_f1:.4f}",
            )
        )
        widths = [max(len(r[i]) for r in rows) for i in range(5)]
        lines = []
        for i, row in enumerate(rows):
            cells = [row[0].ljust(widths[0])] + [row[j].rjust(widths[j]) for j in range(1, 5)]
            lines.append("  ".join(cells))
            if i == 0:
                lines.append("-" * len(lines[0]))
        return "\n".join(lines) + "\n"

    def to_csv(self) -> str:
        lines = ["relation,pairs,precision,recall,f1"]
        for rel, s in self.per_relation.items():
            lines.append(f"{rel},{s.pair_count:g},{s.precision!r},{s.recall!r},{s.f1!r}")
        lines.append(
            f"ALL,{sum(s.pair_count for s in self.per_relation.values()):g},"
            f"{self.overall_precision!r},{self.overall_recall!r},{self.overall_f1!r}"
        )
        return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Pair-level metrics
# ---------------------------------------------------------------------------

def match(prediction_surface: str, alias_set: Sequence[str]) -> bool:
    """True when the prediction equals some alias, case-insensitively after trimming."""
    pred = canonical(prediction_surface)
    return any(pred == canonical(alias) for alias in alias_set)


def pair_scores(
    predicted: Iterable[str],
    gold: Sequence[Sequence[str]],
    pair: InputPair | None = None,
) -> PairScore:
    """Precision/recall/F1 for one pair; predictions carry set semantics."""
    unique: list[str] = []
    seen: set[str] = set()
    for surface in predicted:
        key = canonical(surface)
        if key not in seen:
            seen.add(key)
            unique.append(surface)

    if unique:
        correct = sum(1 for s in unique if any(match(s, g) for g in gold))
        precision = correct / len(unique)
    else:
        precision = 1.0 if not gold else 0.0
    if gold:
        matched = sum(1 for g in gold if any(match(s, g) for s in unique))
        recall = matched / len(gold)
    else:
        recall = 1.0
    f1 = 0.0 if precision + recall == 0 else 2 * precision * recall / (precision + recall)
    return PairScore(precision, recall, f1, pair)


def macro_report(
    scores_by_relation: Mapping[str, Sequence[PairScore]],
    pooled: bool = False,
) -> EvalReport:
    """Per-relation means over pairs; overall is the unweighted mean over relations.

    With pooled=True the overall line averages over all pairs directly
    instead, for comparison with the per-relation scheme.
    """
    if not scores_by_relation:
        raise EvaluationError("no relations to report on")
    per_relation: dict[str, RelationSummary] = {}
    for rel, scores in scores_by_relation.items():
        if not scores:
            raise EvaluationError(f"relation {rel!r} has no pair scores")
        n = len(scores)
        per_relation[rel] = RelationSummary(
            sum(s.precision for s in scores) / n,
            sum(s.recall for s in scores) / n,
            sum(s.f1 for s in scores) / n,
            float(n),
        )
    if pooled:
        pool = [s for scores in scores_by_relation.values() for s in scores]
        overall = (
            sum(s.precision for s in pool) / len(pool),
            sum(s.recall for s in pool) / len(pool),
            sum(s.f1 for s in pool) / len(pool),
        )
    else:
        summaries = list(per_relation.values())
        overall = (
            sum(s.precision for s in summaries) / len(summaries),
            sum(s.recall for s in summaries) / len(summaries),
            sum(s.f1 for s in summaries) / len(summaries),
        )
    return EvalReport(per_relation, overall[0], overall[1], overall[2], pooled)


# ---------------------------------------------------------------------------
# Threshold calibration
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CalibrationPair:
    """One pair's scored candidates and gold, input to the grid searches.

    For the 1-D search each candidate is (surface, score); for the joint
    search it is (surface, lm_score, entail_mean). Candidate surfaces must
    be unique case-insensitively; callers dedupe according to their system's
    semantics before calibration.
    """

    candidates: tuple[tuple, ...]
    gold: tuple[tuple[str, ...], ...]

    def __post_init__(self) -> None:
        seen: set[str] = set()
        for cand in self.candidates:
            key = canonical(cand[0])
            if key in seen:
                raise EvaluationError(f"duplicate calibration candidate {cand[0]!r}")
            seen.add(key)


def _match_matrix(pair: CalibrationPair) -> np.ndarray:
    """(num_candidates, num_gold) boolean matrix of candidate/alias-set matches."""
    c = len(pair.candidates)
    g = len(pair.gold)
    m = np.zeros((c, g), dtype=bool)
    for i, cand in enumerate(pair.candidates):
        for j, alias_set in enumerate(pair.gold):
            if match(cand[0], alias_set):
                m[i, j] = True
    return m


def _cellwise_f1(
    npred: np.ndarray, ncorr: np.ndarray, nmatched: np.ndarray, n_gold: int
) -> np.ndarray:
    empty_p = 1.0 if n_gold == 0 else 0.0
    p = np.where(npred > 0, ncorr / np.maximum(npred, 1), empty_p)
    r = np.full_like(p, 1.0) if n_gold == 0 else nmatched / n_gold
    denom = p + r
    return np.where(denom > 0, 2 * p * r / np.where(denom > 0, denom, 1.0), 0.0)


def calibrate_1d(
    pairs: Sequence[CalibrationPair],
    grid: Sequence[float] = THRESHOLD_GRID,
) -> float:
    """Grid value maximizing mean pair F1 of {surface : score >= T}.

    Ties break toward the smallest threshold. Scores are precomputed by the
    caller; the sweep itself makes no backend calls.
    """
    if not pairs:
        raise EvaluationError("no calibration pairs")
    grid_arr = np.asarray(grid, dtype=float)
    f1_total = np.zeros(len(grid_arr))
    for pair in pairs:
        mm = _match_matrix(pair)
        scores = np.asarray([c[1] for c in pair.candidates], dtype=float)
        included = scores[:, None] >= grid_arr[None, :]  # (C, T)
        npred = included.sum(axis=0)
        matched_any = mm.any(axis=1) if len(pair.candidates) else np.zeros(0, dtype=bool)
        ncorr = included[matched_any].sum(axis=0)
        nmatched = np.zeros(len(grid_arr), dtype=np.int64)
        for j in range(len(pair.gold)):
            hits = included[mm[:, j]]
            if hits.size:
                nmatched += hits.any(axis=0)
        f1_total = f1_total + _cellwise_f1(npred, ncorr, nmatched, len(pair.gold))
    best = int(np.argmax(f1_total))  # first occurrence = smallest threshold
    return float(grid_arr[best])


def calibrate_joint(
    pairs: Sequence[CalibrationPair],
    grid: Sequence[float] = THRESHOLD_GRID,
) -> tuple[float, float]:
    """Exhaustive sweep over the (T_lm, T_e) grid of {c : lm >= T_lm and e >= T_e}.

    Returns the F1-maximizing pair of thresholds; ties break toward the
    smallest T_e, then the smallest T_lm. Both score tables are precomputed
    once, so the full sweep does no backend calls.
    """
    if not pairs:
        raise EvaluationError("no calibration pairs")
    grid_arr = np.asarray(grid, dtype=float)
    t = len(grid_arr)
    f1_total = np.zeros((t, t))  # [T_e index, T_lm index]
    for pair in pairs:
        mm = _match_matrix(pair)
        lm = np.asarray([c[1] for c in pair.candidates], dtype=float)
        en = np.asarray([c[2] for c in pair.candidates], dtype=float)
        inc_lm = lm[:, None] >= grid_arr[None, :]  # (C, T)
        inc_e = en[:, None] >= grid_arr[None, :]  # (C, T)
        included = inc_e[:, :, None] & inc_lm[:, None, :]  # (C, T_e, T_lm)
        npred = included.sum(axis=0)
        matched_any = mm.any(axis=1) if len(pair.candidates) else np.zeros(0, dtype=bool)
        ncorr = included[matched_any].sum(axis=0)
        nmatched = np.zeros((t, t), dtype=np.int64)
        for j in range(len(pair.gold)):
            hits = included[mm[:, j]]
            if hits.size:
                nmatched += hits.any(axis=0)
        f1_total = f1_total + _cellwise_f1(npred, ncorr, nmatched, len(pair.gold))
    flat_best = int(np.argmax(f1_total))  # row-major: smallest T_e, then T_lm
    te_idx, tlm_idx = divmod(flat_best, t)
    return float(grid_arr[tlm_idx]), float(grid_arr[te_idx])


# ---------------------------------------------------------------------------
# Training-regime experiment driver
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RegimeSpec:
    """A sampling regime: per-relation fraction, repetition count, base seed."""

    fraction: float
    repetitions: int = 10
    seed: int = 0

    def __post_init__(self) -> None:
        if not (0.0 < self.fraction <= 1.0):
            raise EvaluationError(f"fraction {self.fraction} outside (0, 1]")
        if self.repetitions < 1:
            raise EvaluationError(f"repetitions must be >= 1, got {self.repetitions}")


@dataclass(frozen=True)
class RegimeResult:
    mean_report: EvalReport
    repetition_reports: tuple[EvalReport, ...]
    sample_sizes: tuple[dict[str, int], ...]


ExperimentFn = Callable[[list[GoldRecord], int], EvalReport]


def sample_records(
    records: Sequence[GoldRecord], fraction: float, rng: random.Random
) -> tuple[list[GoldRecord], dict[str, int]]:
    """Sample ceil(fraction * n_r) subjects within each relation.

    Relations keep their first-appearance order and sampled records keep
    dataset order within a relation.
    """
    by_relation: dict[str, list[GoldRecord]] = {}
    for record in records:
        by_relation.setdefault(record.pair.relation, []).append(record)
    sample: list[GoldRecord] = []
    sizes: dict[str, int] = {}
    for rel, group in by_relation.items():
        m = math.ceil(fraction * len(group))
        if m == 0:
            logger.warning("relation %r yields an empty sample; skipped", rel)
            continue
        indices = sorted(rng.sample(range(len(group)), m))
        sample.extend(group[i] for i in indices)
        sizes[rel] = m
    return sample, sizes


def mean_report(reports: Sequence[EvalReport]) -> EvalReport:
    """Elementwise mean of reports: per-relation values and the overall line."""
    if not reports:
        raise EvaluationError("no reports to average")
    relations: list[str] = []
    for report in reports:
        for rel in report.per_relation:
            if rel not in relations:
                relations.append(rel)
    per_relation: dict[str, RelationSummary] = {}
    for rel in relations:
        present = [r.per_relation[rel] for r in reports if rel in r.per_relation]
        n = len(present)
        per_relation[rel] = RelationSummary(
            sum(s.precision for s in present) / n,
            sum(s.recall for s in present) / n,
            sum(s.f1 for s in present) / n,
            sum(s.pair_count for s in present) / n,
        )
    n = len(reports)
    return EvalReport(
        per_relation,
        sum(r.overall_precision for r in reports) / n,
        sum(r.overall_recall for r in reports) / n,
        sum(r.overall_f1 for r in reports) / n,
        reports[0].pooled,
    )


def run_regime(
    records: Sequence[GoldRecord],
    spec: RegimeSpec,
    experiment: ExperimentFn,
) -> RegimeResult:
    """Run `experiment` on each seeded per-relation sample and average the reports.

    Repetition i samples with seed spec.seed + i, so repetitions are
    independent and the whole run is reproducible.
    """
    reports: list[EvalReport] = []
    sizes: list[dict[str, int]] = []
    for i in range(spec.repetitions):
        rep_seed = spec.seed + i
        sample, rep_sizes = sample_records(records, spec.fraction, random.Random(rep_seed))
        reports.append(experiment(sample, rep_seed))
        sizes.append(rep_sizes)
    return RegimeResult(mean_report(reports), tuple(reports), tuple(sizes))
