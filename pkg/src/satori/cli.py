"""Command-line entry point orchestrating batch experiments.

Subcommands wrap one module each: fetch-premises, predict, evaluate,
calibrate, traingen, regime. All outputs are written atomically and every
command drops a run-manifest JSON (config hash, seed, backend modes)
alongside its outputs. Exit codes: 0 success, 1 fatal error, 2 config error.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import click

import satori
from satori.core import (
    ConfigError,
    GoldRecord,
    InputPair,
    PredictionRecord,
    RelationRegistry,
    SatoriError,
    atomic_write_text,
    canonical,
    dump_json_line,
    load_dataset,
    load_registry,
    read_jsonl,
    render_template,
    write_jsonl_atomic,
)
from satori.backends.base import BackendSuite
from satori.backends.fixture import load_fixture_backends
from satori.backends.http import (
    HttpEntailment,
    HttpMaskFill,
    HttpNer,
    HttpQa,
    HttpRelationExtraction,
    HttpSearch,
    SparqlKg,
)
from satori.baselines import (
    SYSTEM_LM_BASELINE,
    SYSTEM_QA_BASELINE,
    SYSTEM_RE_BASELINE,
    SYSTEM_SATORI,
    SYSTEMS,
    lm_baseline,
    qa_baseline,
    re_baseline,
    split_list_answer,
)
from satori.candidates import KgInstanceCache, default_stoplist, load_stoplist
from satori.evaluation import (
    CalibrationPair,
    EvalReport,
    PairScore,
    RegimeSpec,
    calibrate_1d,
    calibrate_joint,
    macro_report,
    pair_scores,
    run_regime,
)
from satori.retrieval import PremiseCache, fetch_premises
from satori.traingen import (
    entailment_rows,
    gen_entailment,
    gen_mlm,
    gen_qa,
    gen_re,
    load_relation_map,
    mlm_rows,
    qa_rows,
    re_rows,
)
from satori.validation import PipelineSettings, predict_objects, score_candidates

logger = logging.getLogger(__name__)

SOURCE_ORDER = ("LM", "KG", "NER", "QA", "RE")


# ---------------------------------------------------------------------------
# Run configuration
# ---------------------------------------------------------------------------

@dataclass
class RunConfig:
    """Paths and knobs for one experiment run, loaded from a JSON document.

    Relative paths resolve against the config file's directory.
    """

    config_path: Path
    relations: Path
    dataset: Path
    premise_cache: Path
    output_dir: Path
    kg_cache: Path | None = None
    stoplist: Path | None = None
    relation_map: Path | None = None
    thresholds: Path | None = None
    eval_dataset: Path | None = None
    k: int = 3
    seed: int = 0
    jobs: int | None = None
    backend_mode: str = "fixture"
    capability_modes: dict[str, str] = field(default_factory=dict)
    fixtures_dir: Path | None = None
    endpoints: dict[str, str] = field(default_factory=dict)
    sparql_typing_predicate: str = "rdf:type"
    regime_fraction: float = 1.0
    regime_repetitions: int = 1

    CAPABILITIES = ("search", "mask_fill", "entailment", "ner", "qa", "relext", "kg")

    @classmethod
    def load(cls, path: str | os.PathLike[str]) -> "RunConfig":
        p = Path(path)
        if not p.exists():
            raise ConfigError(f"run config not found: {p}")
        try:
            doc = json.loads(p.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"run config {p} is not valid JSON: {exc}") from exc
        base = p.parent

        def resolve(key: str, required: bool = False) -> Path | None:
            value = doc.get(key)
            if value is None:
                if required:
                    raise ConfigError(f"run config {p} is missing {key!r}")
                return None
            return (base / value).resolve() if not Path(value).is_absolute() else Path(value)

        backends = doc.get("backends", {})
        regime = doc.get("regime", {})
        cfg = cls(
            config_path=p.resolve(),
            relations=resolve("relations", required=True),
            dataset=resolve("dataset", required=True),
            premise_cache=resolve("premise_cache", required=True),
            output_dir=resolve("output_dir", required=True),
            kg_cache=resolve("kg_cache"),
            stoplist=resolve("stoplist"),
            relation_map=resolve("relation_map"),
            thresholds=resolve("thresholds"),
            eval_dataset=resolve("eval_dataset"),
            k=int(doc.get("k", 3)),
            seed=int(doc.get("seed", 0)),
            jobs=doc.get("jobs"),
            backend_mode=backends.get("mode", "fixture"),
            capability_modes=dict(backends.get("capability_modes", {})),
            fixtures_dir=(
                (base / backends["fixtures_dir"]).resolve()
                if backends.get("fixtures_dir")
                else None
            ),
            endpoints=dict(backends.get("endpoints", {})),
            sparql_typing_predicate=backends.get("sparql_typing_predicate", "rdf:type"),
            regime_fraction=float(regime.get("fraction", 1.0)),
            regime_repetitions=int(regime.get("repetitions", 1)),
        )
        if cfg.k < 1:
            raise ConfigError(f"k must be >= 1, got {cfg.k}")
        for capability, mode in [("<default>", cfg.backend_mode)] + list(
            cfg.capability_modes.items()
        ):
            if mode not in ("fixture", "http"):
                raise ConfigError(f"unknown backend mode {mode!r} for {capability}")
        unknown = set(cfg.capability_modes) - set(cls.CAPABILITIES)
        if unknown:
            raise ConfigError(f"unknown capabilities in backends.capability_modes: {sorted(unknown)}")
        for key, required_path in (("relations", cfg.relations), ("dataset", cfg.dataset)):
            if not required_path.exists():
                raise ConfigError(f"run config {key!r} path does not exist: {required_path}")
        if "fixture" in cfg.modes().values():
            if cfg.fixtures_dir is None or not cfg.fixtures_dir.exists():
                raise ConfigError(
                    f"fixture backend mode needs an existing backends.fixtures_dir, got {cfg.fixtures_dir}"
                )
        return cfg

    def modes(self) -> dict[str, str]:
        """Effective backend mode per capability (the default plus overrides)."""
        return {
            capability: self.capability_modes.get(capability, self.backend_mode)
            for capability in self.CAPABILITIES
        }

    def build_backends(self) -> BackendSuite:
        modes = self.modes()
        fixtures = (
            load_fixture_backends(self.fixtures_dir)
            if "fixture" in modes.values()
            else None
        )

        def url(capability: str) -> str:
            try:
                return self.endpoints[capability]
            except KeyError:
                raise ConfigError(
                    f"http mode for {capability!r} needs backends.endpoints[{capability!r}]"
                ) from None

        http_factories = {
            "search": lambda: HttpSearch(url("search")),
            "mask_fill": lambda: HttpMaskFill(url("mask_fill")),
            "entailment": lambda: HttpEntailment(url("entailment")),
            "ner": lambda: HttpNer(url("ner")),
            "qa": lambda: HttpQa(url("qa")),
            "relext": lambda: HttpRelationExtraction(url("relext")),
            "kg": lambda: SparqlKg(url("kg"), typing_predicate=self.sparql_typing_predicate),
        }

        def pick(capability: str):
            if modes[capability] == "fixture":
                return getattr(fixtures, capability)
            return http_factories[capability]()

        return BackendSuite(**{cap: pick(cap) for cap in self.CAPABILITIES})

    def load_stoplist(self) -> frozenset[str]:
        if self.stoplist is not None:
            return load_stoplist(self.stoplist)
        return default_stoplist()

    def sha256(self) -> str:
        return hashlib.sha256(self.config_path.read_bytes()).hexdigest()


def load_threshold_overlay(path: Path | None) -> dict[str, dict[str, float]]:
    if path is None:
        return {}
    if not path.exists():
        raise ConfigError(f"thresholds overlay not found: {path}")
    doc = json.loads(path.read_text(encoding="utf-8"))
    if not isinstance(doc, dict):
        raise ConfigError(f"thresholds overlay {path} must be a JSON object")
    return doc


def write_manifest(
    config: RunConfig, command: str, outputs: list[Path], extra: dict | None = None
) -> None:
    modes = config.modes()
    manifest = {
        "command": command,
        "config": str(config.config_path),
        "config_sha256": config.sha256(),
        "seed": config.seed,
        "backend_mode": config.backend_mode,
        "backend_modes": modes,
        "backend_endpoints": {c: config.endpoints.get(c) for c, m in modes.items() if m == "http"},
        "toolkit_version": satori.__version__,
        "created_at": datetime.now(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ"),
        "outputs": [str(o) for o in outputs],
    }
    if extra:
        manifest.update(extra)
    path = config.output_dir / f"manifest_{command}.json"
    atomic_write_text(path, json.dumps(manifest, indent=2, sort_keys=True) + "\n")


# ---------------------------------------------------------------------------
# Prediction plumbing
# ---------------------------------------------------------------------------

def _sorted_sources(sources: frozenset[str]) -> list[str]:
    return [s for s in SOURCE_ORDER if s in sources] + sorted(sources - set(SOURCE_ORDER))


def prediction_row(
    record: PredictionRecord, system: str, verdicts=None, error: str | None = None
) -> dict:
    row = {
        "subject": record.pair.subject,
        "relation": record.pair.relation,
        "system": system,
        "objects": [
            {
                "surface": o.surface,
                "sources": _sorted_sources(o.sources),
                "mean_entailment": o.score if system == SYSTEM_SATORI else None,
            }
            for o in record.objects
        ],
    }
    if record.flags:
        row["flags"] = list(record.flags)
    if error:
        row["error"] = error
    if verdicts is not None:
        row["verdicts"] = [
            {
                "triple": {
                    "subject": v.triple.subject,
                    "relation": v.triple.relation,
                    "object": v.triple.object,
                },
                "hypothesis": v.hypothesis,
                "per_premise": [[rank, prob] for rank, prob in v.per_premise],
                "mean_probability": v.mean_probability,
                "accepted": v.accepted,
                "status": v.status,
                "error": v.error,
            }
            for v in verdicts
        ]
    return row


def load_predictions(path: Path) -> list[tuple[InputPair, list[str]]]:
    out = []
    for _, row in read_jsonl(path):
        pair = InputPair(row["subject"], row["relation"])
        out.append((pair, [o["surface"] for o in row["objects"]]))
    return out


def _predict_one(
    record: GoldRecord,
    system: str,
    registry: RelationRegistry,
    backends: BackendSuite,
    cache: PremiseCache,
    settings: PipelineSettings,
    overlay: dict[str, dict[str, float]],
    relation_map: dict[str, str | None] | None,
) -> dict:
    pair = record.pair
    rel_overlay = overlay.get(pair.relation, {})
    if system == SYSTEM_SATORI:
        pair_settings = PipelineSettings(
            k=settings.k,
            stoplist=settings.stoplist,
            sources=settings.sources,
            lm_threshold=rel_overlay.get("T_lm", settings.lm_threshold),
            entailment_threshold=rel_overlay.get("T_e", settings.entailment_threshold),
            kg_cache=settings.kg_cache,
        )
        result = predict_objects(pair, registry, backends, cache, pair_settings)
        return prediction_row(
            result.record, system, verdicts=result.verdicts if settings.explain else None,
            error=result.error,
        )
    if system == SYSTEM_LM_BASELINE:
        rec = lm_baseline(
            pair, registry, backends.mask_fill, settings.stoplist,
            threshold=rel_overlay.get("T_lm"),
        )
        return prediction_row(rec, system)
    premises = fetch_premises(pair, registry, settings.k, backends.search, cache)
    if system == SYSTEM_QA_BASELINE:
        rec = qa_baseline(
            pair, premises, backends.qa, registry, threshold=rel_overlay.get("T_qa")
        )
        return prediction_row(rec, system)
    if system == SYSTEM_RE_BASELINE:
        if relation_map is None:
            raise ConfigError("re-baseline needs a relation_map in the run config")
        rec = re_baseline(pair, premises, backends.relext, relation_map)
        return prediction_row(rec, system)
    raise ConfigError(f"unknown system {system!r}")


def run_predictions(
    records: list[GoldRecord],
    system: str,
    registry: RelationRegistry,
    backends: BackendSuite,
    cache: PremiseCache,
    settings: PipelineSettings,
    overlay: dict[str, dict[str, float]],
    relation_map: dict[str, str | None] | None,
    jobs: int = 1,
) -> list[dict]:
    if jobs <= 1:
        return [
            _predict_one(r, system, registry, backends, cache, settings, overlay, relation_map)
            for r in records
        ]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        futures = [
            pool.submit(
                _predict_one, r, system, registry, backends, cache, settings, overlay,
                relation_map,
            )
            for r in records
        ]
        return [f.result() for f in futures]  # input order regardless of completion


# ---------------------------------------------------------------------------
# Calibration plumbing
# ---------------------------------------------------------------------------

def _dedupe_max(scored: list[tuple[str, float]]) -> list[tuple[str, float]]:
    best: dict[str, tuple[str, float]] = {}
    order: list[str] = []
    for surface, score in scored:
        key = canonical(surface)
        if key not in best:
            best[key] = (surface, score)
            order.append(key)
        elif score > best[key][1]:
            best[key] = (best[key][0], score)
    return [best[k] for k in order]


def calibration_pairs_for_system(
    records: list[GoldRecord],
    system: str,
    registry: RelationRegistry,
    backends: BackendSuite,
    cache: PremiseCache,
    settings: PipelineSettings,
) -> dict[str, dict[str, list[CalibrationPair]]]:
    """Per-relation calibration inputs, keyed by the threshold scheme to search.

    Returns {relation: {"joint": [...]} } for the pipeline when LM is a
    source (searching T_lm and T_e together), {relation: {"1d": [...]}} for
    everything else. Missing-score candidates pass the unsearched threshold
    dimension by construction (score pinned to 1.0, above the whole grid).
    """
    by_relation: dict[str, dict[str, list[CalibrationPair]]] = {}
    for record in records:
        pair = record.pair
        schema = registry.get(pair.relation)
        if system == SYSTEM_SATORI:
            scored = score_candidates(pair, registry, backends, cache, settings)
            if "LM" in (settings.sources or schema.sources):
                cands = tuple(
                    (
                        s.surface,
                        s.lm_score if s.lm_score is not None else 1.0,
                        s.entail_mean if s.entail_mean is not None else 0.0,
                    )
                    for s in scored
                )
                by_relation.setdefault(pair.relation, {}).setdefault("joint", []).append(
                    CalibrationPair(cands, record.gold)
                )
            else:
                cands = tuple(
                    (s.surface, s.entail_mean if s.entail_mean is not None else 0.0)
                    for s in scored
                )
                by_relation.setdefault(pair.relation, {}).setdefault("1d", []).append(
                    CalibrationPair(cands, record.gold)
                )
        elif system == SYSTEM_LM_BASELINE:
            rec = lm_baseline(pair, registry, backends.mask_fill, settings.stoplist, threshold=0.0)
            cands = tuple((o.surface, o.score) for o in rec.objects)
            by_relation.setdefault(pair.relation, {}).setdefault("1d", []).append(
                CalibrationPair(cands, record.gold)
            )
        elif system == SYSTEM_QA_BASELINE:
            premises = fetch_premises(pair, registry, settings.k, backends.search, cache)
            question = render_template(schema.t_qa, pair.subject)
            raw: list[tuple[str, float]] = []
            for premise in premises:
                answer = backends.qa.qa(question, premise.text)
                if answer.is_empty:
                    continue
                for item in split_list_answer(answer.answer):
                    raw.append((item, answer.score))
            cands = tuple(_dedupe_max(raw))
            by_relation.setdefault(pair.relation, {}).setdefault("1d", []).append(
                CalibrationPair(cands, record.gold)
            )
        else:
            raise ConfigError(f"system {system!r} has no threshold to calibrate")
    return by_relation


def calibrate_system(
    by_relation: dict[str, dict[str, list[CalibrationPair]]], system: str
) -> dict[str, dict[str, float]]:
    overlay: dict[str, dict[str, float]] = {}
    for relation, schemes in sorted(by_relation.items()):
        if "joint" in schemes:
            t_lm, t_e = calibrate_joint(schemes["joint"])
            overlay[relation] = {"T_lm": t_lm, "T_e": t_e}
        else:
            threshold = calibrate_1d(schemes["1d"])
            if system == SYSTEM_SATORI:
                overlay[relation] = {"T_e": threshold}
            elif system == SYSTEM_LM_BASELINE:
                overlay[relation] = {"T_lm": threshold}
            else:
                overlay[relation] = {"T_qa": threshold}
    return overlay


# ---------------------------------------------------------------------------
# Evaluation plumbing
# ---------------------------------------------------------------------------

def evaluate_predictions(
    predictions: list[tuple[InputPair, list[str]]],
    records: list[GoldRecord],
    pooled: bool = False,
) -> EvalReport:
    gold_by_pair = {
        (canonical(r.pair.subject), r.pair.relation): r.gold for r in records
    }
    scores: dict[str, list[PairScore]] = {}
    for pair, surfaces in predictions:
        key = (canonical(pair.subject), pair.relation)
        if key not in gold_by_pair:
            raise SatoriError(
                f"prediction for unknown pair {pair.subject!r}/{pair.relation!r}"
            )
        scores.setdefault(pair.relation, []).append(
            pair_scores(surfaces, gold_by_pair[key], pair)
        )
    return macro_report(scores, pooled=pooled)


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

@click.group()
@click.option("--verbose", is_flag=True, help="Enable debug logging.")
def main(verbose: bool) -> None:
    """Object prediction toolkit: pipeline, baselines, calibration, evaluation."""
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )


def _config_option(fn):
    return click.option(
        "--config", "config_path", required=True, type=click.Path(), help="Run config JSON."
    )(fn)


def _handle_errors(fn):
    import functools

    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except ConfigError as exc:
            click.echo(f"config error: {exc}", err=True)
            sys.exit(2)
        except SatoriError as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(1)

    return wrapper


def _load_common(config_path: str, relation: str | None):
    config = RunConfig.load(config_path)
    registry = load_registry(config.relations)
    records = load_dataset(config.dataset, registry)
    if relation is not None:
        if relation not in registry:
            raise ConfigError(f"unknown relation {relation!r}")
        records = [r for r in records if r.pair.relation == relation]
    config.output_dir.mkdir(parents=True, exist_ok=True)
    return config, registry, records


@main.command("fetch-premises")
@_config_option
@click.option("--relation", default=None, help="Restrict to one relation.")
@click.option("--refresh", is_flag=True, help="Re-query even when cached.")
@_handle_errors
def cmd_fetch_premises(config_path: str, relation: str | None, refresh: bool) -> None:
    """Fetch top-k premises for every dataset pair into the premise cache."""
    config, registry, records = _load_common(config_path, relation)
    backends = config.build_backends()
    cache = PremiseCache(config.premise_cache)
    fetched = 0
    for record in records:
        fetch_premises(
            record.pair, registry, config.k, backends.search, cache, refresh=refresh
        )
        fetched += 1
        click.echo(f"\r{fetched}/{len(records)} queries", nl=False, err=True)
    click.echo("", err=True)
    write_manifest(config, "fetch-premises", [config.premise_cache])
    click.echo(f"premise cache written: {config.premise_cache}")


def _build_settings(config: RunConfig, explain: bool = False, sources: str | None = None):
    stoplist = config.load_stoplist()
    kg_cache = KgInstanceCache(config.kg_cache) if config.kg_cache else None
    settings = PipelineSettings(k=config.k, stoplist=stoplist, kg_cache=kg_cache)
    if sources:
        settings.sources = frozenset(s.strip() for s in sources.split(",") if s.strip())
    settings.explain = explain
    return settings


@main.command("predict")
@_config_option
@click.option("--system", default=SYSTEM_SATORI, type=click.Choice(SYSTEMS))
@click.option("--relation", default=None, help="Restrict to one relation.")
@click.option("--sources", default=None, help="Override candidate sources, e.g. LM,KG.")
@click.option("--explain", is_flag=True, help="Include per-candidate verdicts.")
@click.option("--jobs", default=None, type=int, help="Parallel workers (default: CPUs).")
@click.option("--thresholds", "thresholds_path", default=None, type=click.Path(),
              help="Calibrated thresholds overlay JSON.")
@click.option("--out", "out_path", default=None, type=click.Path(), help="Output JSONL path.")
@_handle_errors
def cmd_predict(
    config_path: str,
    system: str,
    relation: str | None,
    sources: str | None,
    explain: bool,
    jobs: int | None,
    thresholds_path: str | None,
    out_path: str | None,
) -> None:
    """Run a system over the dataset and write prediction JSONL."""
    config, registry, records = _load_common(config_path, relation)
    if not config.premise_cache.exists() and system != SYSTEM_LM_BASELINE:
        raise ConfigError(
            f"premise cache {config.premise_cache} does not exist; run fetch-premises first"
        )
    backends = config.build_backends()
    cache = PremiseCache(config.premise_cache)
    settings = _build_settings(config, explain=explain, sources=sources)
    overlay_path = Path(thresholds_path) if thresholds_path else config.thresholds
    overlay = load_threshold_overlay(overlay_path)
    relation_map = load_relation_map(config.relation_map) if config.relation_map else None
    n_jobs = jobs if jobs is not None else (config.jobs or os.cpu_count() or 1)
    rows = run_predictions(
        records, system, registry, backends, cache, settings, overlay, relation_map,
        jobs=n_jobs,
    )
    out = Path(out_path) if out_path else config.output_dir / f"predictions_{system}.jsonl"
    write_jsonl_atomic(out, rows)
    write_manifest(
        config, f"predict-{system}", [out],
        extra={"system": system, "thresholds_overlay": str(overlay_path) if overlay_path else None,
               "overlay_values": overlay or None},
    )
    click.echo(f"predictions written: {out}")


@main.command("evaluate")
@_config_option
@click.argument("predictions", type=click.Path(exists=True))
@click.option("--pooled", is_flag=True, help="Also average over all pairs pooled.")
@click.option("--csv", "emit_csv", is_flag=True, help="Also write a CSV report.")
@click.option("--out-prefix", default=None, help="Output path prefix for the report files.")
@_handle_errors
def cmd_evaluate(
    config_path: str, predictions: str, pooled: bool, emit_csv: bool, out_prefix: str | None
) -> None:
    """Score a prediction file against the dataset and write the report."""
    config, registry, records = _load_common(config_path, None)
    preds = load_predictions(Path(predictions))
    report = evaluate_predictions(preds, records, pooled=False)
    prefix = out_prefix or str(config.output_dir / Path(predictions).stem.replace("predictions", "eval"))
    outputs = []
    json_path = Path(f"{prefix}.json")
    payload = report.to_dict()
    if pooled:
        pooled_report = evaluate_predictions(preds, records, pooled=True)
        payload["pooled_overall"] = {
            "precision": pooled_report.overall_precision,
            "recall": pooled_report.overall_recall,
            "f1": pooled_report.overall_f1,
        }
    atomic_write_text(json_path, json.dumps(payload, indent=2, sort_keys=True) + "\n")
    outputs.append(json_path)
    table_path = Path(f"{prefix}.txt")
    atomic_write_text(table_path, report.render_table())
    outputs.append(table_path)
    if emit_csv:
        csv_path = Path(f"{prefix}.csv")
        atomic_write_text(csv_path, report.to_csv())
        outputs.append(csv_path)
    write_manifest(config, "evaluate", outputs, extra={"predictions": str(predictions)})
    click.echo(report.render_table())
    click.echo(f"report written: {json_path}")


@main.command("calibrate")
@_config_option
@click.option("--system", default=SYSTEM_SATORI,
              type=click.Choice([SYSTEM_SATORI, SYSTEM_LM_BASELINE, SYSTEM_QA_BASELINE]))
@click.option("--relation", default=None, help="Restrict to one relation.")
@click.option("--sources", default=None, help="Override candidate sources for the pipeline.")
@click.option("--out", "out_path", default=None, type=click.Path())
@_handle_errors
def cmd_calibrate(
    config_path: str, system: str, relation: str | None, sources: str | None,
    out_path: str | None,
) -> None:
    """Grid-search per-relation thresholds and write a config overlay JSON."""
    config, registry, records = _load_common(config_path, relation)
    if not config.premise_cache.exists():
        raise ConfigError(
            f"premise cache {config.premise_cache} does not exist; run fetch-premises first"
        )
    backends = config.build_backends()
    cache = PremiseCache(config.premise_cache)
    settings = _build_settings(config, sources=sources)
    by_relation = calibration_pairs_for_system(
        records, system, registry, backends, cache, settings
    )
    overlay = calibrate_system(by_relation, system)
    out = Path(out_path) if out_path else config.output_dir / f"thresholds_{system}.json"
    atomic_write_text(out, json.dumps(overlay, indent=2, sort_keys=True) + "\n")
    write_manifest(config, f"calibrate-{system}", [out], extra={"system": system})
    click.echo(f"thresholds written: {out}")


@main.command("traingen")
@_config_option
@click.option("--kind", required=True, type=click.Choice(["mlm", "entailment", "qa", "re"]))
@click.option("--out", "out_path", default=None, type=click.Path())
@_handle_errors
def cmd_traingen(config_path: str, kind: str, out_path: str | None) -> None:
    """Generate fine-tuning instances of one kind from gold records and cached premises."""
    config, registry, records = _load_common(config_path, None)
    if not config.premise_cache.exists() and kind != "mlm":
        raise ConfigError(
            f"premise cache {config.premise_cache} does not exist; run fetch-premises first"
        )
    stats_dict: dict = {}
    if kind == "mlm":
        rows = mlm_rows(gen_mlm(records, registry))
    elif kind == "entailment":
        backends = config.build_backends()
        cache = PremiseCache(config.premise_cache)
        instances, stats = gen_entailment(records, cache, backends.mask_fill, registry)
        rows = entailment_rows(instances)
        stats_dict = stats.to_dict()
    elif kind == "qa":
        cache = PremiseCache(config.premise_cache)
        instances, stats = gen_qa(records, cache, registry)
        rows = qa_rows(instances)
        stats_dict = stats.to_dict()
    else:
        if config.relation_map is None:
            raise ConfigError("traingen --kind re needs a relation_map in the run config")
        cache = PremiseCache(config.premise_cache)
        relation_map = load_relation_map(config.relation_map)
        instances, stats = gen_re(records, cache, relation_map, registry)
        rows = re_rows(instances)
        stats_dict = stats.to_dict()
    out = Path(out_path) if out_path else config.output_dir / f"train_{kind}.jsonl"
    write_jsonl_atomic(out, rows)
    write_manifest(
        config, f"traingen-{kind}", [out],
        extra={"kind": kind, "instances": len(rows), "stats": stats_dict or None},
    )
    click.echo(f"{len(rows)} instances written: {out}")
    if stats_dict:
        click.echo(dump_json_line(stats_dict))


@main.command("regime")
@_config_option
@click.option("--system", default=SYSTEM_SATORI,
              type=click.Choice([SYSTEM_SATORI, SYSTEM_LM_BASELINE, SYSTEM_QA_BASELINE]))
@click.option("--fraction", default=None, type=float, help="Per-relation sample fraction.")
@click.option("--repetitions", default=None, type=int)
@click.option("--seed", default=None, type=int)
@click.option("--pooled", is_flag=True)
@_handle_errors
def cmd_regime(
    config_path: str, system: str, fraction: float | None, repetitions: int | None,
    seed: int | None, pooled: bool,
) -> None:
    """Repeat calibrate-on-sample / evaluate-on-heldout and average the reports.

    Each repetition samples the configured fraction per relation from the
    dataset, calibrates the system's thresholds on the sample, and evaluates
    on the eval dataset (or on the sample's complement when none is set).
    """
    config, registry, records = _load_common(config_path, None)
    if not config.premise_cache.exists():
        raise ConfigError(
            f"premise cache {config.premise_cache} does not exist; run fetch-premises first"
        )
    backends = config.build_backends()
    cache = PremiseCache(config.premise_cache)
    settings = _build_settings(config)
    spec = RegimeSpec(
        fraction=fraction if fraction is not None else config.regime_fraction,
        repetitions=repetitions if repetitions is not None else config.regime_repetitions,
        seed=seed if seed is not None else config.seed,
    )
    eval_records = (
        load_dataset(config.eval_dataset, registry) if config.eval_dataset else None
    )
    if eval_records is None and spec.fraction >= 1.0:
        raise ConfigError(
            "regime with fraction 1.0 needs an eval_dataset (no held-out complement exists)"
        )
    relation_map = load_relation_map(config.relation_map) if config.relation_map else None

    def experiment(sample: list[GoldRecord], rep_seed: int) -> EvalReport:
        by_relation = calibration_pairs_for_system(
            sample, system, registry, backends, cache, settings
        )
        overlay = calibrate_system(by_relation, system)
        if eval_records is not None:
            heldout = eval_records
        else:
            sampled = {(canonical(r.pair.subject), r.pair.relation) for r in sample}
            heldout = [
                r for r in records
                if (canonical(r.pair.subject), r.pair.relation) not in sampled
            ]
        rows = run_predictions(
            heldout, system, registry, backends, cache, settings, overlay, relation_map,
        )
        preds = [
            (InputPair(row["subject"], row["relation"]), [o["surface"] for o in row["objects"]])
            for row in rows
        ]
        return evaluate_predictions(preds, heldout, pooled=pooled)

    result = run_regime(records, spec, experiment)
    out = config.output_dir / f"regime_{system}.json"
    payload = {
        "spec": {"fraction": spec.fraction, "repetitions": spec.repetitions, "seed": spec.seed},
        "mean": result.mean_report.to_dict(),
        "repetitions": [r.to_dict() for r in result.repetition_reports],
        "sample_sizes": list(result.sample_sizes),
    }
    atomic_write_text(out, json.dumps(payload, indent=2, sort_keys=True) + "\n")
    write_manifest(config, f"regime-{system}", [out], extra={"system": system})
    click.echo(result.mean_report.render_table())
    click.echo(f"regime report written: {out}")


if __name__ == "__main__":
    main()
