"""Export EMBV1 embedding files for budget-transcript segments and sectors."""

from embed_export.encoders import HashingEncoder, make_encoder
from embed_export.errors import EncoderLoadFailure, ExportError, InputFormatError
from embed_export.exporter import (DEFAULT_ENCODER, ExportConfig, ExportResult,
                                   export)

__all__ = [
    "DEFAULT_ENCODER",
    "EncoderLoadFailure",
    "ExportConfig",
    "ExportError",
    "ExportResult",
    "HashingEncoder",
    "InputFormatError",
    "export",
    "make_encoder",
]
