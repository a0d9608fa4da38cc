from .base import (
    CLUE_KINDS,
    Backends,
    SelectorRequest,
    SelectorResponse,
    VisualClue,
    parse_selector_text,
)
from .http import HttpBackend, http_backends
from .mock import MockBackend, mock_backends

__all__ = [
    "CLUE_KINDS",
    "Backends",
    "SelectorRequest",
    "SelectorResponse",
    "VisualClue",
    "parse_selector_text",
    "HttpBackend",
    "http_backends",
    "MockBackend",
    "mock_backends",
]
