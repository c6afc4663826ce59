"""Acceptance suite: one test per criterion, each printing a pass/fail line.

Every check here is hermetic: fixture corpora, seeded randomness, and
independent oracles (tests/oracles.py) that never share code with the
implementation under test. The model server's two acceptance criteria live
with that package, in model_server/tests/test_acceptance.py.
"""

from __future__ import annotations

import hashlib
import json
import random
import time
from pathlib import Path

from click.testing import CliRunner

from satori.core import GoldRecord, InputPair, canonical, load_dataset, load_registry, mentioned_in
from satori.backends.base import (
    BackendSuite,
    EntailmentLogits,
    MaskFillResult,
    SearchHit,
)
from satori.backends.fixture import (
    FixtureEntailment,
    FixtureKg,
    FixtureMaskFill,
    FixtureNer,
    FixtureQa,
    FixtureRelationExtraction,
    FixtureSearch,
    load_fixture_backends,
)
from satori.baselines import lm_baseline
from satori.candidates import CandidateObject, filter_mentioned, filter_stopwords
from satori.cli import main as cli_main
from satori.evaluation import (
    THRESHOLD_GRID,
    PairScore,
    RegimeSpec,
    calibrate_1d,
    calibrate_joint,
    macro_report,
    pair_scores,
    run_regime,
)
from satori.retrieval import PremiseCache
from satori.traingen import (
    LABEL_ENTAILMENT,
    entailment_rows,
    gen_entailment,
    gen_qa,
    gen_re,
    qa_rows,
    re_rows,
)
from satori.validation import (
    PipelineSettings,
    entail_probability,
    predict_objects,
    score_candidates,
)

from conftest import CONFIG_DIR, FIXTURES_DIR
from oracles import (
    brute_calibrate_1d,
    brute_calibrate_joint,
    brute_pair_scores,
    invert_hypothesis,
    max_window_coverage,
    window_gaps_ok,
)
from test_evaluation import _instance_1d, _instance_joint, _to_calibration_pairs


def report(name: str, elapsed: float, budget: float) -> None:
    print(f"[PASS] {name}: {elapsed:.2f}s (budget {budget:.0f}s)")
    assert elapsed < budget, f"{name} exceeded its {budget}s budget ({elapsed:.2f}s)"


def test_metric_oracle():
    """pair_scores equals a brute-force implementation on 1,000 random instances."""
    rng = random.Random(20240815)
    vocabulary = [f"obj{i}" for i in range(12)] + ["Guitar", " guitar ", "PIANO", "a b"]
    start = time.perf_counter()
    for _ in range(1000):
        predicted = [rng.choice(vocabulary) for _ in range(rng.randint(0, 8))]
        gold = tuple(
            tuple(rng.choice(vocabulary) for _ in range(rng.randint(1, 3)))
            for _ in range(rng.randint(0, 8))
        )
        ours = pair_scores(predicted, gold)
        theirs = brute_pair_scores(predicted, [list(g) for g in gold])
        assert (ours.precision, ours.recall, ours.f1) == theirs
    report("metric oracle (1,000 instances, exact)", time.perf_counter() - start, 1.0)


def test_calibration_oracle():
    """Both grid searches equal exhaustive sweeps, including tie-breaks."""
    rng = random.Random(777)
    # Warm the jitted oracle kernels; compilation is not part of the sweep.
    tiny = _instance_1d(random.Random(0), max_candidates=2)
    brute_calibrate_1d(tiny, THRESHOLD_GRID)
    brute_calibrate_joint(_instance_joint(random.Random(0), max_candidates=2), THRESHOLD_GRID)

    start = time.perf_counter()
    for _ in range(200):
        raw = _instance_1d(rng, max_candidates=50)
        assert calibrate_1d(_to_calibration_pairs(raw)) == brute_calibrate_1d(
            raw, THRESHOLD_GRID
        )
    for _ in range(200):
        raw = _instance_joint(rng, max_candidates=50)
        assert calibrate_joint(_to_calibration_pairs(raw)) == brute_calibrate_joint(
            raw, THRESHOLD_GRID
        )
    report("calibration oracle (2x200 instances, exact)", time.perf_counter() - start, 10.0)


def test_softmax_properties():
    """Two-class probability: range, midpoint, shift invariance, monotonicity."""
    rng = random.Random(4242)
    start = time.perf_counter()
    for _ in range(2000):
        e = rng.uniform(-18, 18)
        c = rng.uniform(-18, 18)
        n = rng.uniform(-50, 50)
        p = entail_probability(EntailmentLogits(e, c, n))
        assert 0.0 < p < 1.0
        shift = rng.uniform(-50, 50)
        shifted = entail_probability(EntailmentLogits(e + shift, c + shift, n))
        assert abs(p - shifted) <= 1e-12
    for x in [rng.uniform(-20, 20) for _ in range(200)]:
        assert entail_probability(EntailmentLogits(x, x, rng.uniform(-50, 50))) == 0.5
    es = sorted(rng.uniform(-18, 18) for _ in range(500))
    probs = [entail_probability(EntailmentLogits(e, 0.3, 0.0)) for e in es]
    assert all(a <= b for a, b in zip(probs, probs[1:]))
    report("softmax properties", time.perf_counter() - start, 1.0)


def test_monotone_thresholds():
    """Accepted sets shrink as T_e and T_lm rise across the full grid."""
    registry = load_registry(FIXTURES_DIR / "relations.json")
    records = load_dataset(FIXTURES_DIR / "dataset.jsonl", registry)
    backends = load_fixture_backends(FIXTURES_DIR / "backends")
    cache = PremiseCache(FIXTURES_DIR / "premises.jsonl")
    from satori.candidates import default_stoplist

    settings = PipelineSettings(k=3, stoplist=default_stoplist())
    start = time.perf_counter()
    scored_by_pair = {
        record.pair: score_candidates(record.pair, registry, backends, cache, settings)
        for record in records
    }

    def accepted(scored, t_lm, t_e):
        return {
            s.surface
            for s in scored
            if (s.lm_score is None or s.lm_score >= t_lm)
            and s.entail_mean is not None
            and s.entail_mean >= t_e
        }

    for pair, scored in scored_by_pair.items():
        previous = None
        for t_e in THRESHOLD_GRID:
            current = accepted(scored, 0.1, t_e)
            if previous is not None:
                assert current <= previous, f"T_e monotonicity broken for {pair}"
            previous = current
        previous = None
        for t_lm in THRESHOLD_GRID:
            current = accepted(scored, t_lm, 0.5)
            if previous is not None:
                assert current <= previous, f"T_lm monotonicity broken for {pair}"
            previous = current
    report("monotone thresholds (24 pairs x full grid x 2 axes)", time.perf_counter() - start, 5.0)


def test_filter_laws():
    """Stopword/mention filters are contracting and idempotent; survivors findable."""
    rng = random.Random(1357)
    words = ["guitar", "Piano", "the", "of", "drums", "...", ",", "new york", "art", "quarter"]
    texts = [
        "He plays guitar and piano in New York.",
        "A quarter of modern art is improvised on drums.",
        "",
    ]
    stoplist = frozenset({"the", "of"})
    start = time.perf_counter()
    for _ in range(500):
        surfaces = rng.sample(words, rng.randint(0, len(words)))
        cands = []
        for i, s in enumerate(surfaces):
            if i % 2 == 0:
                cands.append(CandidateObject(s, frozenset({"LM"}), rng.random()))
            else:
                cands.append(CandidateObject(s, frozenset({"KG"})))
        from stubs import make_premises

        premises = make_premises([t for t in rng.sample(texts, rng.randint(0, 3)) if t])
        stopped = filter_stopwords(cands, stoplist)
        assert set(stopped) <= set(cands)
        assert filter_stopwords(stopped, stoplist) == stopped
        mentioned = filter_mentioned(cands, premises)
        assert set(mentioned) <= set(cands)
        assert filter_mentioned(mentioned, premises) == mentioned
        for c in mentioned:
            assert any(mentioned_in(c.surface, p.text) for p in premises)
    report("filter laws (500 random candidate lists)", time.perf_counter() - start, 1.0)


def test_traingen_invariants():
    """Construction rules hold on the shipped corpus; output is byte-stable."""
    registry = load_registry(FIXTURES_DIR / "relations.json")
    records = load_dataset(FIXTURES_DIR / "dataset.jsonl", registry)
    backends = load_fixture_backends(FIXTURES_DIR / "backends")
    cache = PremiseCache(FIXTURES_DIR / "premises.jsonl")
    records_by_pair = {(r.pair.subject, r.pair.relation): r for r in records}

    start = time.perf_counter()
    instances, _ = gen_entailment(records, cache, backends.mask_fill, registry)
    assert instances, "corpus produced no entailment instances"

    def attribute(instance):
        hits = []
        for record in records:
            template = registry.get(record.pair.relation).t_h
            obj = invert_hypothesis(template, record.pair.subject, instance.hypothesis)
            if obj is not None:
                hits.append((record, obj))
        assert len(hits) == 1, f"cannot attribute hypothesis {instance.hypothesis!r}"
        return hits[0]

    n_pos = n_neg = 0
    for instance in instances:
        record, obj = attribute(instance)
        if instance.label == LABEL_ENTAILMENT:
            n_pos += 1
            assert mentioned_in(record.pair.subject, instance.premise)
            assert mentioned_in(obj, instance.premise)
        else:
            n_neg += 1
            assert not any(
                canonical(obj) == canonical(alias)
                for alias_set in record.gold
                for alias in alias_set
            )
    assert n_pos > 0 and n_neg > 0 and n_neg <= n_pos

    qa_instances, _ = gen_qa(records, cache, registry)
    multi_checked = 0
    for inst in qa_instances:
        if inst.answer == "":
            continue
        matching = [
            r for r in records
            if inst.question == registry.get(r.pair.relation).t_qa.replace("{X}", r.pair.subject)
        ]
        assert len(matching) == 1
        record = matching[0]
        if len(record.gold) < 2:
            continue
        multi_checked += 1
        gold = [list(g) for g in record.gold]
        assert window_gaps_ok(inst.context, inst.answer_start, inst.answer, gold)
        covered = max_window_coverage(inst.answer, gold)
        best_possible = max(
            (max_window_coverage(p.text, gold) for p in cache.get(
                registry.get(record.pair.relation).t_search.replace("{X}", record.pair.subject)
            ) or []),
            default=0,
        )
        assert covered == best_possible, (
            f"{record.pair.subject}: span covers {covered}, best window covers {best_possible}"
        )
    assert multi_checked > 0, "no multi-object QA instances exercised"

    re_instances, _ = gen_re(
        records, cache, json.loads((CONFIG_DIR / "rebel_relation_map.json").read_text()), registry
    )
    for inst in re_instances:
        for triple in inst.triples:
            assert mentioned_in(triple.object, inst.text)

    again_e, _ = gen_entailment(records, cache, backends.mask_fill, registry)
    again_q, _ = gen_qa(records, cache, registry)
    again_r, _ = gen_re(
        records, cache, json.loads((CONFIG_DIR / "rebel_relation_map.json").read_text()), registry
    )
    assert entailment_rows(instances) == entailment_rows(again_e)
    assert qa_rows(qa_instances) == qa_rows(again_q)
    assert re_rows(re_instances) == re_rows(again_r)
    report("traingen invariants + determinism", time.perf_counter() - start, 5.0)


def _fixture_run_config(tmp_path: Path) -> Path:
    config = {
        "relations": str(FIXTURES_DIR / "relations.json"),
        "dataset": str(FIXTURES_DIR / "dataset.jsonl"),
        "premise_cache": str(FIXTURES_DIR / "premises.jsonl"),
        "kg_cache": str(FIXTURES_DIR / "kg_cache.jsonl"),
        "relation_map": str(CONFIG_DIR / "rebel_relation_map.json"),
        "output_dir": str(tmp_path / "out"),
        "k": 3,
        "seed": 7,
        "backends": {"mode": "fixture", "fixtures_dir": str(FIXTURES_DIR / "backends")},
    }
    path = tmp_path / "run_config.json"
    path.write_text(json.dumps(config))
    return path


def test_hermetic_end_to_end(tmp_path):
    """cmd_predict + cmd_evaluate reproduce the committed golden files byte-for-byte."""
    runner = CliRunner()
    config_path = _fixture_run_config(tmp_path)
    start = time.perf_counter()
    result = runner.invoke(cli_main, ["predict", "--config", str(config_path), "--jobs", "1"])
    assert result.exit_code == 0, result.output
    result = runner.invoke(
        cli_main,
        ["evaluate", "--config", str(config_path), str(tmp_path / "out" / "predictions_satori.jsonl")],
    )
    assert result.exit_code == 0, result.output
    for name in ("predictions_satori.jsonl", "eval_satori.json", "eval_satori.txt"):
        produced = (tmp_path / "out" / name).read_bytes()
        golden = (FIXTURES_DIR / "golden" / name).read_bytes()
        assert produced == golden, f"{name} deviates from the committed golden file"
    report("hermetic end-to-end (golden byte-for-byte)", time.perf_counter() - start, 10.0)


# ---------------------------------------------------------------------------
# Directional replication: validation beats plain LM prompting
# ---------------------------------------------------------------------------

def _directional_world():
    """Synthetic corpus where the LM proposes gold plus distractors and a
    90%-accurate entailment oracle validates; built as plain fixture tables."""
    relations = ["RelA", "RelB", "RelC"]
    subjects = [f"subject{i:02d}" for i in range(12)]
    registry_doc = {
        "relations": [
            {
                "name": rel,
                "domain_class": "Thing",
                "range_classes": ["Thing"],
                "t_search": "{X} " + rel.lower() + " facts",
                "t_lm": "{X} " + rel.lower() + " includes {MASK}.",
                "t_h": "{X} " + rel.lower() + " includes {Y}.",
                "t_qa": "What does {X} include for " + rel.lower() + "?",
                "sources": ["LM"],
                "T_lm": 0.1,
                "T_e": 0.5,
            }
            for rel in relations
        ]
    }

    def flipped(subject, relation, obj):
        digest = hashlib.md5(f"{subject}|{relation}|{canonical(obj)}".encode()).hexdigest()
        return int(digest, 16) % 10 == 0  # deterministic 10% error rate

    records, search, fill, entail = [], [], [], []
    rng = random.Random(31337)
    for rel in relations:
        for subject in subjects:
            gold = [f"{subject}-true-{j}" for j in range(2)]
            noise = [f"{subject}-noise-{j}" for j in range(4)]
            records.append(
                GoldRecord(InputPair(subject, rel), tuple((g,) for g in gold))
            )
            query = f"{subject} {rel.lower()} facts"
            text = f"{subject} is associated with " + ", ".join(gold + noise) + "."
            search.append((query, [SearchHit("t", "u", text)]))
            prompt = f"{subject} {rel.lower()} includes {{MASK}}."
            tokens = [(g, round(rng.uniform(0.5, 0.9), 3)) for g in gold]
            tokens += [(d, round(rng.uniform(0.3, 0.8), 3)) for d in noise]
            tokens.sort(key=lambda t: -t[1])
            fill.append((prompt, [MaskFillResult(t, s) for t, s in tokens]))
            for obj in gold + noise:
                hypothesis = f"{subject} {rel.lower()} includes {obj}."
                truthful = obj in gold
                says_entail = truthful != flipped(subject, rel, obj)
                logits = EntailmentLogits(3.0, -3.0, 0.0) if says_entail else EntailmentLogits(-3.0, 3.0, 0.0)
                entail.append(((text, hypothesis), logits))
    suite = BackendSuite(
        search=FixtureSearch(dict(search)),
        mask_fill=FixtureMaskFill(dict(fill)),
        entailment=FixtureEntailment(dict(entail)),
        ner=FixtureNer({}),
        qa=FixtureQa({}),
        relext=FixtureRelationExtraction({}),
        kg=FixtureKg({}),
    )
    return registry_doc, records, suite


def test_directional_replication(tmp_path):
    """Entailment validation beats the LM baseline, led by precision (>= 10 points)."""
    registry_doc, records, suite = _directional_world()
    registry_path = tmp_path / "relations.json"
    registry_path.write_text(json.dumps(registry_doc))
    registry = load_registry(registry_path)
    cache = PremiseCache(tmp_path / "premises.jsonl")
    settings = PipelineSettings(k=3, stoplist=frozenset())

    start = time.perf_counter()
    satori_scores: dict[str, list[PairScore]] = {}
    baseline_scores: dict[str, list[PairScore]] = {}
    for record in records:
        result = predict_objects(record.pair, registry, suite, cache, settings)
        satori_scores.setdefault(record.pair.relation, []).append(
            pair_scores(result.record.surfaces, record.gold, record.pair)
        )
        base = lm_baseline(record.pair, registry, suite.mask_fill, frozenset())
        baseline_scores.setdefault(record.pair.relation, []).append(
            pair_scores(base.surfaces, record.gold, record.pair)
        )
    satori_report = macro_report(satori_scores)
    baseline_report = macro_report(baseline_scores)
    elapsed = time.perf_counter() - start

    assert satori_report.overall_f1 > baseline_report.overall_f1, (
        f"validation F1 {satori_report.overall_f1:.3f} "
        f"did not beat baseline {baseline_report.overall_f1:.3f}"
    )
    precision_gain = satori_report.overall_precision - baseline_report.overall_precision
    assert precision_gain >= 0.10, f"precision gain {precision_gain:.3f} below 10 points"
    print(
        f"  validation P={satori_report.overall_precision:.3f} F1={satori_report.overall_f1:.3f}"
        f" vs baseline P={baseline_report.overall_precision:.3f} F1={baseline_report.overall_f1:.3f}"
        f" (precision gain {100 * precision_gain:.1f} points)"
    )
    report("directional replication (validation > LM baseline)", elapsed, 10.0)


def test_regime_driver():
    """Per-relation 5% sampling takes exactly 5 of 100 subjects; mean is exact."""
    records = []
    for rel in ("RelX", "RelY"):
        for i in range(100):
            records.append(
                GoldRecord(InputPair(f"s{i:03d}", rel), ((f"o{i}",),) if i % 3 else ())
            )

    def experiment(sample, seed):
        scores = {}
        rng = random.Random(seed)
        for record in sample:
            value = rng.random()
            scores.setdefault(record.pair.relation, []).append(
                PairScore(value, value / 2, value / 3, record.pair)
            )
        return macro_report(scores)

    start = time.perf_counter()
    result = run_regime(records, RegimeSpec(fraction=0.05, repetitions=10, seed=2024), experiment)
    for sizes in result.sample_sizes:
        assert sizes == {"RelX": 5, "RelY": 5}
    reports = result.repetition_reports
    for rel in ("RelX", "RelY"):
        for field in ("precision", "recall", "f1"):
            values = [getattr(r.per_relation[rel], field) for r in reports]
            assert getattr(result.mean_report.per_relation[rel], field) == sum(values) / len(values)
    assert result.mean_report.overall_f1 == sum(r.overall_f1 for r in reports) / len(reports)
    assert result.mean_report.overall_precision == sum(
        r.overall_precision for r in reports
    ) / len(reports)
    report("regime driver (5% of 100, exact mean)", time.perf_counter() - start, 5.0)
