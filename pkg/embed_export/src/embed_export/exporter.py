"""Read segments + taxonomy, encode texts, and write an EMBV1 file.

The output contract matches the primary pipeline's embedding-store format:
a ``EMBV1 <dim>`` header, then one ``id<TAB>v1 v2 ... vdim`` row per segment
(in input file order) followed by one ``sector::<name>`` row per taxonomy
sector (in first-appearance order). Sector prototype text is the bare
sector name. Texts longer than the encoder's maximum length are
head-truncated, one warning log per truncated id.
"""

import csv
import json
import logging
import unicodedata
from dataclasses import dataclass

import numpy as np

from embed_export.encoders import make_encoder
from embed_export.errors import ExportError, InputFormatError

log = logging.getLogger("embed_export")

SECTOR_PREFIX = "sector::"
DEFAULT_ENCODER = "hash:256"


@dataclass(frozen=True)
class ExportConfig:
    segments_path: str
    taxonomy_path: str
    out_path: str
    encoder: str = DEFAULT_ENCODER
    normalize: bool = False


@dataclass(frozen=True)
class ExportResult:
    rows: int
    dim: int
    truncated: int


def _normalize_name(raw: str) -> str:
    return unicodedata.normalize("NFC", raw).strip()


def read_segments(path: str) -> list[tuple[str, str]]:
    """(id, text) pairs from a segments JSONL file, in file order."""
    out: list[tuple[str, str]] = []
    seen: set[str] = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise InputFormatError(f"invalid JSON: {exc.msg}",
                                       path=path, line=lineno)
            if not isinstance(obj, dict):
                raise InputFormatError("expected a JSON object",
                                       path=path, line=lineno)
            seg_id = obj.get("id")
            text = obj.get("text")
            if not isinstance(seg_id, str) or not seg_id:
                raise InputFormatError("missing or empty 'id'",
                                       path=path, line=lineno)
            if "\t" in seg_id or "\n" in seg_id:
                raise InputFormatError(f"id {seg_id!r} contains tab/newline",
                                       path=path, line=lineno)
            if seg_id.startswith(SECTOR_PREFIX):
                raise InputFormatError(
                    f"id {seg_id!r} collides with the sector prototype namespace",
                    path=path, line=lineno)
            if not isinstance(text, str):
                raise InputFormatError("missing or non-string 'text'",
                                       path=path, line=lineno)
            if seg_id in seen:
                raise InputFormatError(f"duplicate id {seg_id!r}",
                                       path=path, line=lineno)
            seen.add(seg_id)
            out.append((seg_id, text))
    return out


def read_sector_names(path: str) -> list[str]:
    """Distinct sector names from a ``sector,company`` CSV, in first-appearance
    order."""
    names: list[str] = []
    seen: set[str] = set()
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [_normalize_name(c) for c in header] != ["sector", "company"]:
            raise InputFormatError(
                f"expected header 'sector,company', got {header!r}",
                path=path, line=1)
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 2:
                raise InputFormatError(f"expected 2 columns, got {len(row)}",
                                       path=path, line=lineno)
            name = _normalize_name(row[0])
            if not name:
                raise InputFormatError("empty sector name", path=path, line=lineno)
            if name not in seen:
                seen.add(name)
                names.append(name)
    return names


def _truncate(text: str, max_tokens: int, row_id: str) -> tuple[str, bool]:
    words = text.split()
    if len(words) <= max_tokens:
        return text, False
    log.warning("truncated %s from %d to %d tokens (head kept)",
                row_id, len(words), max_tokens)
    return " ".join(words[:max_tokens]), True


def export(config: ExportConfig) -> ExportResult:
    encoder = make_encoder(config.encoder)
    segments = read_segments(config.segments_path)
    sectors = read_sector_names(config.taxonomy_path)

    ids: list[str] = []
    texts: list[str] = []
    truncated = 0
    for seg_id, text in segments:
        text, was_truncated = _truncate(text, encoder.max_tokens, seg_id)
        truncated += was_truncated
        ids.append(seg_id)
        texts.append(text)
    for name in sectors:
        row_id = SECTOR_PREFIX + name
        text, was_truncated = _truncate(name, encoder.max_tokens, row_id)
        truncated += was_truncated
        ids.append(row_id)
        texts.append(text)

    vectors = encoder.encode_batch(texts)
    if vectors.shape != (len(ids), encoder.dim):
        raise ExportError(
            f"encoder returned shape {vectors.shape}, expected "
            f"({len(ids)}, {encoder.dim})")
    norms = np.linalg.norm(vectors, axis=1)
    zero = np.flatnonzero(norms == 0)
    if zero.size:
        raise ExportError(f"encoder produced a zero-norm vector for id "
                          f"{ids[int(zero[0])]!r}")
    if config.normalize:
        vectors = vectors / norms[:, None]

    with open(config.out_path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"EMBV1 {encoder.dim}\n")
        for row_id, row in zip(ids, vectors):
            values = " ".join(repr(float(v)) for v in row)
            fh.write(f"{row_id}\t{values}\n")
    return ExportResult(rows=len(ids), dim=encoder.dim, truncated=truncated)
