from satori.backends.base import (
    BackendError,
    BackendSuite,
    ContractError,
    EntailmentBackend,
    EntailmentLogits,
    ExtractedTriple,
    KgBackend,
    MaskFillBackend,
    MaskFillResult,
    NerBackend,
    NerSpan,
    QaAnswer,
    QaBackend,
    RelationExtractionBackend,
    SearchBackend,
    SearchHit,
    TransportError,
    call_with_retries,
)
from satori.backends.fixture import load_fixture_backends

__all__ = [
    "BackendError",
    "BackendSuite",
    "ContractError",
    "EntailmentBackend",
    "EntailmentLogits",
    "ExtractedTriple",
    "KgBackend",
    "MaskFillBackend",
    "MaskFillResult",
    "NerBackend",
    "NerSpan",
    "QaAnswer",
    "QaBackend",
    "RelationExtractionBackend",
    "SearchBackend",
    "SearchHit",
    "TransportError",
    "call_with_retries",
    "load_fixture_backends",
]
