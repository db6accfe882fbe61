"""Annotated transcript corpus and sector taxonomy: loading, validation, splits.

File formats:
  taxonomy.csv  — UTF-8 CSV, header ``sector,company``, RFC-4180 quoting.
  segments.jsonl — one JSON object per line:
      {"id": str, "year": int, "date": "YYYY-MM-DD", "text": str, "sectors": [str]}

All loaded structures are immutable after construction and safe to share.
Loaders either raise the first LoadError (default) or, given ``on_error``,
report every recoverable error and skip the offending rows.
"""

from __future__ import annotations

import csv
import datetime as dt
import importlib.resources
import json
import unicodedata
import warnings
from dataclasses import dataclass, field
from typing import Callable, Iterable

from ._io import atomic_writer
from .errors import (
    DateYearMismatch,
    DuplicateId,
    DuplicatePair,
    EmptyField,
    EmptySplitWarning,
    JsonSyntax,
    MalformedRow,
    MissingLabels,
    UnknownSector,
)

SectorId = str

YEAR_MIN, YEAR_MAX = 1947, 2100

OnError = Callable[[Exception], None] | None


def normalize_name(raw: str) -> str:
    """Canonical form used for sector and company strings: NFC + trim."""
    return unicodedata.normalize("NFC", raw).strip()


def reference_sector_names() -> tuple[SectorId, ...]:
    """The 81 canonical sector names shipped with the package."""
    text = importlib.resources.files("budgetrank").joinpath("data/sectors.txt").read_text("utf-8")
    return tuple(line for line in text.splitlines() if line)


@dataclass(frozen=True)
class SectorTaxonomy:
    """Ordered sector list plus constituent company tickers per sector."""

    sectors: tuple[SectorId, ...]
    companies: dict[SectorId, tuple[str, ...]]

    def __post_init__(self):
        if len(set(self.sectors)) != len(self.sectors):
            raise ValueError("sector names must be unique")
        for name in self.sectors:
            if not self.companies.get(name):
                raise ValueError(f"sector {name!r} has no companies")

    def __contains__(self, name: str) -> bool:
        return name in self.companies

    def __len__(self) -> int:
        return len(self.sectors)

    def index(self, name: SectorId) -> int:
        return self.sectors.index(name)


@dataclass(frozen=True)
class Segment:
    """One transcript excerpt with its budget date and gold sector labels."""

    id: str
    year: int
    date: dt.date
    text: str
    sectors: frozenset[SectorId]

    def __post_init__(self):
        if not (YEAR_MIN <= self.year <= YEAR_MAX):
            raise ValueError(f"year {self.year} outside {YEAR_MIN}..{YEAR_MAX}")
        if self.date.year != self.year:
            raise ValueError(f"date {self.date} does not fall in year {self.year}")


@dataclass(frozen=True)
class SplitSpec:
    """Inclusive year boundaries: train ends at train_end_year, validation at val_end_year."""

    train_end_year: int
    val_end_year: int

    def __post_init__(self):
        if self.train_end_year >= self.val_end_year:
            raise ValueError("train_end_year must be < val_end_year")


@dataclass(frozen=True)
class Corpus:
    """Segments sorted by (date, id); one budget event per distinct date."""

    segments: tuple[Segment, ...] = field(default_factory=tuple)

    def __post_init__(self):
        ordered = tuple(sorted(self.segments, key=lambda s: (s.date, s.id)))
        seen: set[str] = set()
        for seg in ordered:
            if seg.id in seen:
                raise DuplicateId(f"segment id {seg.id!r} occurs twice")
            seen.add(seg.id)
        object.__setattr__(self, "segments", ordered)

    def __len__(self) -> int:
        return len(self.segments)

    def __iter__(self):
        return iter(self.segments)

    @property
    def events(self) -> tuple[dt.date, ...]:
        return tuple(sorted({s.date for s in self.segments}))

    def segments_for(self, date: dt.date, sector: SectorId | None = None) -> tuple[Segment, ...]:
        """Segments of one budget event, optionally restricted to one gold label."""
        picked = (s for s in self.segments if s.date == date)
        if sector is not None:
            picked = (s for s in picked if sector in s.sectors)
        return tuple(picked)

    def ids(self) -> tuple[str, ...]:
        return tuple(s.id for s in self.segments)


def _report(err: Exception, on_error: OnError) -> None:
    if on_error is None:
        raise err
    on_error(err)


def load_taxonomy(path: str, on_error: OnError = None) -> SectorTaxonomy:
    """Read a ``sector,company`` CSV into a SectorTaxonomy.

    Sector order is first-appearance order. Raises (or reports) MalformedRow,
    EmptyField and DuplicatePair; the header row must be exactly
    ``sector,company``.
    """
    sectors: list[SectorId] = []
    companies: dict[SectorId, list[str]] = {}
    seen_pairs: set[tuple[str, str]] = set()
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [normalize_name(c) for c in header] != ["sector", "company"]:
            _report(MalformedRow(f"expected header 'sector,company', got {header!r}",
                                 path=path, line=1), on_error)
            return SectorTaxonomy(tuple(), {})
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 2:
                _report(MalformedRow(f"expected 2 columns, got {len(row)}",
                                     path=path, line=lineno), on_error)
                continue
            sector, company = normalize_name(row[0]), normalize_name(row[1])
            if not sector or not company:
                _report(EmptyField("sector and company must be non-empty",
                                   path=path, line=lineno), on_error)
                continue
            if (sector, company) in seen_pairs:
                _report(DuplicatePair(f"({sector!r}, {company!r}) listed twice",
                                      path=path, line=lineno), on_error)
                continue
            seen_pairs.add((sector, company))
            if sector not in companies:
                sectors.append(sector)
                companies[sector] = []
            companies[sector].append(company)
    return SectorTaxonomy(tuple(sectors), {s: tuple(sorted(c)) for s, c in companies.items()})


def _parse_segment_record(obj, taxonomy: SectorTaxonomy, require_labels: bool,
                          path: str, lineno: int) -> Segment:
    if not isinstance(obj, dict):
        raise JsonSyntax("record is not a JSON object", path=path, line=lineno)
    for key, kind in (("id", str), ("year", int), ("date", str), ("text", str), ("sectors", list)):
        if key not in obj:
            raise JsonSyntax(f"missing key {key!r}", path=path, line=lineno)
        if not isinstance(obj[key], kind) or isinstance(obj[key], bool):
            raise JsonSyntax(f"key {key!r} must be {kind.__name__}", path=path, line=lineno)
    seg_id = obj["id"].strip()
    if not seg_id:
        raise JsonSyntax("empty id", path=path, line=lineno)
    try:
        date = dt.date.fromisoformat(obj["date"])
    except ValueError:
        raise JsonSyntax(f"bad date {obj['date']!r}, want YYYY-MM-DD", path=path, line=lineno)
    year = obj["year"]
    if not (YEAR_MIN <= year <= YEAR_MAX):
        raise JsonSyntax(f"year {year} outside {YEAR_MIN}..{YEAR_MAX}", path=path, line=lineno)
    if date.year != year:
        raise DateYearMismatch(f"date {date} does not fall in year {year}",
                               path=path, line=lineno)
    labels = set()
    for raw in obj["sectors"]:
        if not isinstance(raw, str):
            raise JsonSyntax("sectors must be a list of strings", path=path, line=lineno)
        name = normalize_name(raw)
        if name not in taxonomy:
            raise UnknownSector(f"unknown sector {name!r}", path=path, line=lineno)
        labels.add(name)
    if require_labels and not labels:
        raise MissingLabels(f"segment {seg_id!r} has no sector labels", path=path, line=lineno)
    return Segment(seg_id, year, date, obj["text"], frozenset(labels))


def load_segments(path: str, taxonomy: SectorTaxonomy, require_labels: bool = False,
                  on_error: OnError = None) -> Corpus:
    """Read segments.jsonl into a Corpus, validating labels against the taxonomy.

    Labels are always checked against the taxonomy when present; require_labels
    additionally rejects segments with an empty sector set (unlabeled inference
    mode leaves it off).
    """
    segments: list[Segment] = []
    seen_ids: set[str] = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                try:
                    obj = json.loads(line)
                except json.JSONDecodeError as exc:
                    raise JsonSyntax(f"invalid JSON: {exc.msg}", path=path, line=lineno)
                seg = _parse_segment_record(obj, taxonomy, require_labels, path, lineno)
                if seg.id in seen_ids:
                    raise DuplicateId(f"segment id {seg.id!r} already seen", path=path, line=lineno)
            except Exception as exc:
                _report(exc, on_error)
                continue
            seen_ids.add(seg.id)
            segments.append(seg)
    return Corpus(tuple(segments))


def segment_to_json(seg: Segment) -> str:
    """Canonical single-line JSON used by save_segments (stable byte-for-byte)."""
    record = {
        "id": seg.id,
        "year": seg.year,
        "date": seg.date.isoformat(),
        "text": seg.text,
        "sectors": sorted(seg.sectors),
    }
    return json.dumps(record, ensure_ascii=False)


def save_segments(corpus: Corpus, path: str) -> None:
    """Write a corpus back to segments.jsonl in canonical form.

    Re-loading the written file and saving again reproduces it byte for byte.
    """
    with atomic_writer(path) as fh:
        for seg in corpus.segments:
            fh.write(segment_to_json(seg) + "\n")


def temporal_split(corpus: Corpus, spec: SplitSpec) -> tuple[Corpus, Corpus, Corpus]:
    """Partition by announcement year: train ≤ train_end < val ≤ val_end < test.

    The partition is exhaustive and disjoint. Empty partitions are legal but
    raise an EmptySplitWarning so silent misconfigurations surface.
    """
    train = [s for s in corpus if s.year <= spec.train_end_year]
    val = [s for s in corpus if spec.train_end_year < s.year <= spec.val_end_year]
    test = [s for s in corpus if s.year > spec.val_end_year]
    for name, part in (("train", train), ("val", val), ("test", test)):
        if not part:
            warnings.warn(EmptySplitWarning(f"{name} split is empty for {spec}"))
    return Corpus(tuple(train)), Corpus(tuple(val)), Corpus(tuple(test))


def collect_labels(segments: Iterable[Segment]) -> dict[SectorId, int]:
    """Gold-label support counts over an iterable of segments."""
    counts: dict[SectorId, int] = {}
    for seg in segments:
        for name in seg.sectors:
            counts[name] = counts.get(name, 0) + 1
    return counts
