"""Domain types, relation-schema registry, template rendering, and dataset I/O.

Everything downstream (candidate generation, validation, evaluation,
training-data generation) shares the types and the single canonical
string-matching rule defined here.
"""

from __future__ import annotations

import json
import os
import re
import tempfile
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path
from typing import Iterable, Iterator

PLACEHOLDER_SUBJECT = "{X}"
PLACEHOLDER_OBJECT = "{Y}"
MASK_MARKER = "{MASK}"

SOURCE_LM = "LM"
SOURCE_KG = "KG"
SOURCE_NER = "NER"
VALID_SOURCES = (SOURCE_LM, SOURCE_KG, SOURCE_NER)

NER_LABELS = ("PER", "LOC", "ORG")


class SatoriError(Exception):
    """Base class for all toolkit errors."""


class TemplateError(SatoriError):
    """A template is malformed or was rendered with the wrong arguments."""


class ConfigError(SatoriError):
    """A configuration document is missing, unparsable, or invalid."""


class DatasetError(SatoriError):
    """A dataset file is missing, unparsable, or violates record invariants."""


# ---------------------------------------------------------------------------
# Canonical string matching
# ---------------------------------------------------------------------------

def canonical(text: str) -> str:
    """Trim and Unicode-lowercase; the one comparison rule used everywhere."""
    return text.strip().lower()


@lru_cache(maxsize=4096)
def _mention_pattern(surface: str) -> re.Pattern[str]:
    # Word-boundary rule: an alphanumeric edge of the needle must not sit
    # inside a longer alphanumeric token ("art" must not match "quarter").
    # [^\W_] is the alphanumeric class under the Unicode flag.
    needle = surface.strip()
    pattern = re.escape(needle)
    if needle and needle[0].isalnum():
        pattern = r"(?<![^\W_])" + pattern
    if needle and needle[-1].isalnum():
        pattern = pattern + r"(?![^\W_])"
    return re.compile(pattern, re.IGNORECASE)


def find_mentions(surface: str, text: str) -> list[tuple[int, int]]:
    """All (start, end) character spans where `surface` is mentioned in `text`."""
    if not surface.strip():
        return []
    return [m.span() for m in _mention_pattern(surface).finditer(text)]


def first_mention(surface: str, text: str) -> tuple[int, int] | None:
    if not surface.strip():
        return None
    m = _mention_pattern(surface).search(text)
    return m.span() if m else None


def mentioned_in(surface: str, text: str) -> bool:
    return first_mention(surface, text) is not None


# ---------------------------------------------------------------------------
# Template rendering
# ---------------------------------------------------------------------------

def render_template(template: str, subject: str, obj: str | None = None) -> str:
    """Substitute {X} (and {Y} when given) into a template.

    {MASK} is preserved verbatim for the mask-fill backend. Raises
    TemplateError when a placeholder is unresolved or an object is supplied
    to a template without {Y}.
    """
    if PLACEHOLDER_SUBJECT not in template:
        raise TemplateError(f"template {template!r} has no {{X}} placeholder")
    has_object_slot = PLACEHOLDER_OBJECT in template
    if has_object_slot and obj is None:
        raise TemplateError(f"template {template!r} has {{Y}} but no object was given")
    if obj is not None and not has_object_slot:
        raise TemplateError(f"object given but template {template!r} has no {{Y}}")
    rendered = template.replace(PLACEHOLDER_SUBJECT, subject)
    if has_object_slot:
        rendered = rendered.replace(PLACEHOLDER_OBJECT, obj)  # type: ignore[arg-type]
    return rendered


# ---------------------------------------------------------------------------
# Domain types
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RelationSchema:
    """Per-relation configuration: templates, range classes, sources, thresholds.

    Template fields hold the raw pattern strings; T_lm / T_e / T_qa are the
    acceptance thresholds applied by the pipeline and the baselines.
    """

    name: str
    domain_class: str
    range_classes: tuple[str, ...]
    t_search: str
    t_lm: str
    t_h: str
    t_qa: str
    sources: frozenset[str]
    T_lm: float = 0.1
    T_e: float = 0.5
    T_qa: float = 0.3
    optional_relation: bool = False

    def __post_init__(self) -> None:
        def fail(fld: str, msg: str) -> ConfigError:
            return ConfigError(f"relation {self.name!r}, field {fld!r}: {msg}")

        if not self.name.strip():
            raise ConfigError("relation with empty name")
        if not self.range_classes:
            raise fail("range_classes", "must be non-empty")
        if not self.sources:
            raise fail("sources", "must be non-empty")
        unknown = set(self.sources) - set(VALID_SOURCES)
        if unknown:
            raise fail("sources", f"unknown sources {sorted(unknown)}")
        if PLACEHOLDER_SUBJECT not in self.t_search:
            raise fail("t_search", "must contain {X}")
        if PLACEHOLDER_SUBJECT not in self.t_lm:
            raise fail("t_lm", "must contain {X}")
        if self.t_lm.count(MASK_MARKER) != 1:
            raise fail("t_lm", "must contain exactly one {MASK}")
        if PLACEHOLDER_SUBJECT not in self.t_h or PLACEHOLDER_OBJECT not in self.t_h:
            raise fail("t_h", "must contain both {X} and {Y}")
        if PLACEHOLDER_SUBJECT not in self.t_qa:
            raise fail("t_qa", "must contain {X}")
        for fld, value in (("T_lm", self.T_lm), ("T_e", self.T_e), ("T_qa", self.T_qa)):
            if not (0.0 <= value <= 1.0):
                raise fail(fld, f"threshold {value} outside [0, 1]")


@dataclass(frozen=True)
class InputPair:
    """A (subject, relation) pair to predict objects for."""

    subject: str
    relation: str

    def __post_init__(self) -> None:
        object.__setattr__(self, "subject", self.subject.strip())
        if not self.subject:
            raise DatasetError("input pair with empty subject")
        if not self.relation.strip():
            raise DatasetError("input pair with empty relation")


@dataclass(frozen=True)
class Triple:
    subject: str
    relation: str
    object: str

    def __post_init__(self) -> None:
        if not (self.subject.strip() and self.relation.strip() and self.object.strip()):
            raise DatasetError(f"triple with empty field: {self!r}")


@dataclass(frozen=True)
class GoldRecord:
    """One dataset row: an input pair plus its complete gold object list.

    Each gold object is an alias-set (non-empty tuple of surface forms);
    the outer tuple may be empty for pairs that legitimately have no objects.
    """

    pair: InputPair
    gold: tuple[tuple[str, ...], ...]

    def __post_init__(self) -> None:
        for alias_set in self.gold:
            if not alias_set or any(not a.strip() for a in alias_set):
                raise DatasetError(
                    f"empty alias or alias-set in gold for {self.pair.subject!r}/{self.pair.relation!r}"
                )


@dataclass(frozen=True)
class PredictedObject:
    surface: str
    sources: frozenset[str]
    score: float | None = None

    def __post_init__(self) -> None:
        if not self.surface.strip():
            raise DatasetError("predicted object with empty surface")
        if not self.sources:
            raise DatasetError(f"predicted object {self.surface!r} carries no source")


@dataclass(frozen=True)
class PredictionRecord:
    """System output for one input pair; objects deduplicated case-insensitively."""

    pair: InputPair
    objects: tuple[PredictedObject, ...]
    flags: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        seen: set[str] = set()
        for o in self.objects:
            key = canonical(o.surface)
            if key in seen:
                raise DatasetError(f"duplicate predicted object {o.surface!r}")
            seen.add(key)

    @property
    def surfaces(self) -> list[str]:
        return [o.surface for o in self.objects]


# ---------------------------------------------------------------------------
# Relation registry
# ---------------------------------------------------------------------------

class RelationRegistry:
    """Immutable name -> RelationSchema lookup plus the NER class->label map."""

    def __init__(
        self,
        schemas: Iterable[RelationSchema],
        ner_class_labels: dict[str, str] | None = None,
    ) -> None:
        self._schemas: dict[str, RelationSchema] = {}
        self._ner_class_labels = dict(ner_class_labels or {})
        for schema in schemas:
            if schema.name in self._schemas:
                raise ConfigError(f"duplicate relation {schema.name!r}")
            self._schemas[schema.name] = schema
        for cls, label in self._ner_class_labels.items():
            if label not in NER_LABELS:
                raise ConfigError(
                    f"class {cls!r} maps to unknown NER label {label!r} (expected one of {NER_LABELS})"
                )
        for schema in self._schemas.values():
            if SOURCE_NER in schema.sources:
                unmapped = [c for c in schema.range_classes if c not in self._ner_class_labels]
                if unmapped:
                    raise ConfigError(
                        f"relation {schema.name!r}, field 'range_classes': classes {unmapped} "
                        f"have no NER label mapping but NER is a configured source"
                    )

    def get(self, name: str) -> RelationSchema:
        try:
            return self._schemas[name]
        except KeyError:
            raise ConfigError(f"unknown relation {name!r}") from None

    def __contains__(self, name: str) -> bool:
        return name in self._schemas

    def __len__(self) -> int:
        return len(self._schemas)

    def __iter__(self) -> Iterator[RelationSchema]:
        return iter(self._schemas.values())

    def names(self) -> list[str]:
        return list(self._schemas)

    def ner_label_for(self, class_name: str) -> str | None:
        return self._ner_class_labels.get(class_name)

    @property
    def ner_class_labels(self) -> dict[str, str]:
        return dict(self._ner_class_labels)


_SCHEMA_JSON_FIELDS = {
    "name", "domain_class", "range_classes", "t_search", "t_lm", "t_h", "t_qa",
    "sources", "T_lm", "T_e", "T_qa", "optional_relation",
}


def load_registry(path: str | os.PathLike[str]) -> RelationRegistry:
    """Load the declarative relation config (JSON) into a validated registry."""
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"relation config not found: {p}")
    try:
        doc = json.loads(p.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"relation config {p} is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict) or "relations" not in doc:
        raise ConfigError(f"relation config {p} must be an object with a 'relations' list")
    entries = doc["relations"]
    if not entries:
        raise ConfigError(f"relation config {p} defines no relations")
    schemas = []
    for entry in entries:
        unknown = set(entry) - _SCHEMA_JSON_FIELDS
        if unknown:
            raise ConfigError(
                f"relation {entry.get('name', '?')!r}: unknown fields {sorted(unknown)}"
            )
        try:
            schemas.append(
                RelationSchema(
                    name=entry["name"],
                    domain_class=entry["domain_class"],
                    range_classes=tuple(entry["range_classes"]),
                    t_search=entry["t_search"],
                    t_lm=entry["t_lm"],
                    t_h=entry["t_h"],
                    t_qa=entry["t_qa"],
                    sources=frozenset(entry["sources"]),
                    T_lm=float(entry.get("T_lm", 0.1)),
                    T_e=float(entry.get("T_e", 0.5)),
                    T_qa=float(entry.get("T_qa", 0.3)),
                    optional_relation=bool(entry.get("optional_relation", False)),
                )
            )
        except KeyError as exc:
            raise ConfigError(
                f"relation {entry.get('name', '?')!r}: missing field {exc.args[0]!r}"
            ) from exc
    return RelationRegistry(schemas, doc.get("ner_class_labels"))


# ---------------------------------------------------------------------------
# JSONL helpers
# ---------------------------------------------------------------------------

def read_jsonl(path: str | os.PathLike[str]) -> Iterator[tuple[int, dict]]:
    """Yield (line_number, object) for every non-blank line of a JSONL file."""
    p = Path(path)
    if not p.exists():
        raise DatasetError(f"file not found: {p}")
    with p.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DatasetError(f"{p}:{lineno}: invalid JSON: {exc}") from exc
            if not isinstance(obj, dict):
                raise DatasetError(f"{p}:{lineno}: expected a JSON object")
            yield lineno, obj


def dump_json_line(obj: dict) -> str:
    return json.dumps(obj, ensure_ascii=False, sort_keys=True)


def atomic_write_text(path: str | os.PathLike[str], text: str) -> None:
    """Write via a temp file in the same directory, then rename."""
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=p.parent, prefix=p.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, p)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_jsonl_atomic(path: str | os.PathLike[str], rows: Iterable[dict]) -> None:
    atomic_write_text(path, "".join(dump_json_line(r) + "\n" for r in rows))


# ---------------------------------------------------------------------------
# Dataset I/O
# ---------------------------------------------------------------------------

def load_dataset(
    path: str | os.PathLike[str],
    registry: RelationRegistry | None = None,
) -> list[GoldRecord]:
    """Load a JSONL dataset of gold records.

    Plain string object lists are promoted to singleton alias-sets. When a
    registry is given, every record's relation must resolve in it.
    """
    records: list[GoldRecord] = []
    for lineno, obj in read_jsonl(path):
        try:
            subject = obj["subject"]
            relation = obj["relation"]
            raw_objects = obj["objects"]
        except KeyError as exc:
            raise DatasetError(f"{path}:{lineno}: missing field {exc.args[0]!r}") from exc
        alias_sets: list[tuple[str, ...]] = []
        for item in raw_objects:
            if isinstance(item, str):
                alias_sets.append((item.strip(),))
            elif isinstance(item, list) and all(isinstance(a, str) for a in item):
                alias_sets.append(tuple(a.strip() for a in item))
            else:
                raise DatasetError(
                    f"{path}:{lineno}: objects must be strings or lists of strings"
                )
        try:
            record = GoldRecord(InputPair(subject, relation), tuple(alias_sets))
        except DatasetError as exc:
            raise DatasetError(f"{path}:{lineno}: {exc}") from exc
        if registry is not None and record.pair.relation not in registry:
            raise DatasetError(
                f"{path}:{lineno}: relation {record.pair.relation!r} not in registry"
            )
        records.append(record)
    return records


def save_dataset(records: Iterable[GoldRecord], path: str | os.PathLike[str]) -> None:
    write_jsonl_atomic(
        path,
        (
            {
                "subject": r.pair.subject,
                "relation": r.pair.relation,
                "objects": [list(alias_set) for alias_set in r.gold],
            }
            for r in records
        ),
    )
