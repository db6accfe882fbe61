"""Post-budget sector returns from opening prices, and ground-truth rankings.

The per-sector performance for a budget date d averages, over the sector's
usable constituent companies, the relative change between the open at the
anchor day (first trading day at or after d) and the open at the company's
next trading day after the anchor. "Next day" means next trading day for
that company, never next calendar day.
"""

from __future__ import annotations

import csv
import logging
from bisect import bisect_left, bisect_right
from dataclasses import dataclass
from datetime import date

from ._io import atomic_writer
from .corpus import SectorTaxonomy, normalize_name
from .errors import (
    BadHeader,
    DuplicateEntry,
    DuplicateSector,
    MalformedRow,
    MixedDates,
    NoLaterDate,
    NonPositivePrice,
    NoUsableCompanies,
    UnknownSector,
)

log = logging.getLogger(__name__)

PRICES_HEADER = ("company", "date", "open")


@dataclass(frozen=True)
class PriceTable:
    opens: dict[tuple[str, date], float]
    trading_days: dict[str, tuple[date, ...]]

    def __contains__(self, company: str) -> bool:
        return company in self.trading_days


@dataclass(frozen=True)
class SectorReturn:
    sector: str
    budget_date: date
    value: float
    companies_used: int
    companies_skipped: int


@dataclass(frozen=True)
class GroundTruthRanking:
    budget_date: date
    ordered: tuple[tuple[str, float], ...]

    def sectors(self) -> tuple[str, ...]:
        return tuple(s for s, _ in self.ordered)


def load_prices(path: str, on_error=None) -> PriceTable:
    """CSV `company,date,open` with ISO dates and positive finite prices."""

    def report(err):
        if on_error is None:
            raise err
        on_error(err)

    opens: dict[tuple[str, date], float] = {}
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(h.strip() for h in header) != PRICES_HEADER:
            report(BadHeader(f"expected header 'company,date,open', got {header!r}",
                             path=path, line=1))
            return PriceTable({}, {})
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 3:
                report(MalformedRow(f"expected 3 fields, got {len(row)}",
                                    path=path, line=lineno))
                continue
            company = normalize_name(row[0])
            if not company:
                report(MalformedRow("empty company name", path=path, line=lineno))
                continue
            try:
                day = date.fromisoformat(row[1].strip())
            except ValueError:
                report(MalformedRow(f"bad ISO date {row[1]!r}", path=path, line=lineno))
                continue
            try:
                price = float(row[2])
            except ValueError:
                report(MalformedRow(f"bad price {row[2]!r}", path=path, line=lineno))
                continue
            if not price > 0 or price != price or price == float("inf"):
                report(NonPositivePrice(
                    f"open must be a positive finite number, got {row[2]}",
                    path=path, line=lineno))
                continue
            if (company, day) in opens:
                report(DuplicateEntry(
                    f"duplicate entry for ({company}, {day.isoformat()})",
                    path=path, line=lineno))
                continue
            opens[(company, day)] = price

    days: dict[str, list[date]] = {}
    for company, day in opens:
        days.setdefault(company, []).append(day)
    trading_days = {c: tuple(sorted(ds)) for c, ds in days.items()}
    return PriceTable(opens, trading_days)


def next_trading_day(table: PriceTable, company: str, d: date) -> date:
    """Smallest listed date strictly after d for the company."""
    if company not in table.trading_days:
        raise KeyError(f"unknown company {company!r}")
    days = table.trading_days[company]
    i = bisect_right(days, d)
    if i == len(days):
        raise NoLaterDate(f"{company!r} has no trading day after {d.isoformat()}")
    return days[i]


def _anchor_day(table: PriceTable, company: str, d: date) -> date | None:
    days = table.trading_days.get(company, ())
    i = bisect_left(days, d)
    return days[i] if i < len(days) else None


def sector_return(taxonomy: SectorTaxonomy, table: PriceTable, sector: str,
                  d: date) -> SectorReturn:
    """Mean relative open-to-next-open change over usable constituents.

    A company is usable when it has an anchor day (first trading day >= d)
    and a later trading day; others are counted as skipped. The denominator
    is the usable count, not the full constituent list.
    """
    if sector not in taxonomy:
        raise UnknownSector(f"sector {sector!r} not in taxonomy")
    companies = taxonomy.companies.get(sector, ())
    total = 0.0
    used = 0
    for company in companies:
        anchor = _anchor_day(table, company, d)
        if anchor is None:
            continue
        try:
            after = next_trading_day(table, company, anchor)
        except NoLaterDate:
            continue
        base = table.opens[(company, anchor)]
        total += (table.opens[(company, after)] - base) / base
        used += 1
    if not used:
        raise NoUsableCompanies(
            f"no usable constituent prices for {sector!r} at {d.isoformat()}")
    return SectorReturn(sector, d, total / used, used, len(companies) - used)


def event_returns(taxonomy: SectorTaxonomy, table: PriceTable, d: date,
                  sectors=None) -> list[SectorReturn]:
    """Returns for the requested sectors (default: whole taxonomy) at one date,
    in taxonomy order; sectors with no usable companies are omitted."""
    out = []
    for sector in taxonomy.sectors if sectors is None else sectors:
        try:
            out.append(sector_return(taxonomy, table, sector, d))
        except NoUsableCompanies:
            log.debug("skipping %s at %s: no usable companies", sector, d.isoformat())
    return out


def ground_truth_ranking(returns: list[SectorReturn]) -> GroundTruthRanking:
    """Sort by return descending, ties by sector name ascending."""
    if not returns:
        raise ValueError("no sector returns to rank")
    budget_date = returns[0].budget_date
    seen = set()
    for r in returns:
        if r.budget_date != budget_date:
            raise MixedDates(
                f"returns mix dates {budget_date.isoformat()} and {r.budget_date.isoformat()}")
        if r.sector in seen:
            raise DuplicateSector(f"duplicate sector {r.sector!r}")
        seen.add(r.sector)
    ordered = sorted(returns, key=lambda r: (-r.value, r.sector))
    return GroundTruthRanking(budget_date, tuple((r.sector, r.value) for r in ordered))


def write_returns(path: str, returns: list[SectorReturn]) -> None:
    """CSV `date,sector,return,companies_used,companies_skipped` in input order."""
    with atomic_writer(path) as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["date", "sector", "return", "companies_used",
                         "companies_skipped"])
        for r in returns:
            writer.writerow([r.budget_date.isoformat(), r.sector, repr(r.value),
                             r.companies_used, r.companies_skipped])


def load_returns(path: str) -> list[SectorReturn]:
    out = []
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or header[:3] != ["date", "sector", "return"]:
            raise BadHeader(f"expected returns CSV header, got {header!r}",
                            path=path, line=1)
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 5:
                raise MalformedRow(f"expected 5 fields, got {len(row)}",
                                   path=path, line=lineno)
            try:
                out.append(SectorReturn(row[1], date.fromisoformat(row[0]),
                                        float(row[2]), int(row[3]), int(row[4])))
            except ValueError as exc:
                raise MalformedRow(str(exc), path=path, line=lineno)
    return out
