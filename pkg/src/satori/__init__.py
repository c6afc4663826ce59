"""Object prediction for knowledge base population with entailment-based validation."""

from satori.core import (
    ConfigError,
    DatasetError,
    GoldRecord,
    InputPair,
    PredictedObject,
    PredictionRecord,
    RelationRegistry,
    RelationSchema,
    SatoriError,
    TemplateError,
    Triple,
    canonical,
    load_dataset,
    load_registry,
    render_template,
    save_dataset,
)

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "DatasetError",
    "GoldRecord",
    "InputPair",
    "PredictedObject",
    "PredictionRecord",
    "RelationRegistry",
    "RelationSchema",
    "SatoriError",
    "TemplateError",
    "Triple",
    "canonical",
    "load_dataset",
    "load_registry",
    "render_template",
    "save_dataset",
    "__version__",
]
