"""Price-table parsing, per-sector event returns, ground-truth rankings."""

import csv
from datetime import date, timedelta

import numpy as np
import pytest

from budgetrank import errors, market

from util import make_taxonomy, naive_sector_return


def _table(rows):
    """rows: (company, iso_date, open) triples."""
    opens = {(c, date.fromisoformat(d)): p for c, d, p in rows}
    days: dict[str, list[date]] = {}
    for c, d in opens:
        days.setdefault(c, []).append(d)
    return market.PriceTable(opens, {c: tuple(sorted(v)) for c, v in days.items()})


# ------------------------------------------------------------- load_prices

def test_load_prices_fixture(prices):
    assert "HDFCBANK" in prices
    assert "NOSUCHCO" not in prices
    for days in prices.trading_days.values():
        assert list(days) == sorted(days)
    assert prices.opens[("HDFCBANK", date(2018, 2, 1))] == 100.0


def test_load_prices_bad_header(tmp_path):
    p = tmp_path / "p.csv"
    p.write_text("firm,day,price\nX,2020-01-01,1\n")
    with pytest.raises(errors.BadHeader):
        market.load_prices(str(p))
    collected = []
    out = market.load_prices(str(p), on_error=collected.append)
    assert isinstance(collected[0], errors.BadHeader)
    assert not out.opens


def test_load_prices_row_errors(tmp_path):
    p = tmp_path / "p.csv"
    p.write_text(
        "company,date,open\n"
        "X,2020-01-01,10.0\n"
        "X,2020-01-01,11.0\n"      # DuplicateEntry
        "X,2020-01-02\n"           # MalformedRow: field count
        ",2020-01-02,10.0\n"       # MalformedRow: empty company
        "X,01/02/2020,10.0\n"      # MalformedRow: date
        "X,2020-01-03,ten\n"       # MalformedRow: price
        "X,2020-01-04,0\n"         # NonPositivePrice
        "X,2020-01-05,-1.5\n"      # NonPositivePrice
        "X,2020-01-06,nan\n"       # NonPositivePrice
        "X,2020-01-07,inf\n"       # NonPositivePrice
        "X,2020-01-08,12.5\n"
    )
    collected = []
    out = market.load_prices(str(p), on_error=collected.append)
    kinds = [type(e) for e in collected]
    assert kinds == [errors.DuplicateEntry] + [errors.MalformedRow] * 4 + \
        [errors.NonPositivePrice] * 4
    assert "p.csv:3:" in str(collected[0])
    assert out.trading_days["X"] == (date(2020, 1, 1), date(2020, 1, 8))
    with pytest.raises(errors.DuplicateEntry):
        market.load_prices(str(p))


# -------------------------------------------------------- trading-day logic

def test_next_trading_day():
    t = _table([("X", "2020-01-02", 1.0), ("X", "2020-01-06", 1.0)])
    assert market.next_trading_day(t, "X", date(2020, 1, 1)) == date(2020, 1, 2)
    assert market.next_trading_day(t, "X", date(2020, 1, 2)) == date(2020, 1, 6)
    assert market.next_trading_day(t, "X", date(2020, 1, 4)) == date(2020, 1, 6)
    with pytest.raises(errors.NoLaterDate):
        market.next_trading_day(t, "X", date(2020, 1, 6))
    with pytest.raises(KeyError):
        market.next_trading_day(t, "Y", date(2020, 1, 1))


# ------------------------------------------------------------ sector_return

def test_sector_return_single_company():
    taxonomy = make_taxonomy(["Banks"])
    t = _table([("Banks-CO0", "2020-02-01", 100.0), ("Banks-CO0", "2020-02-02", 102.0)])
    r = market.sector_return(taxonomy, t, "Banks", date(2020, 2, 1))
    assert r.value == pytest.approx(0.02)
    assert (r.companies_used, r.companies_skipped) == (1, 0)
    assert r.budget_date == date(2020, 2, 1)


def test_sector_return_anchor_shifts_to_first_trading_day():
    # Budget date falls on a holiday: anchor is the first later trading day,
    # and "next" is the day after that anchor.
    taxonomy = make_taxonomy(["Banks"])
    t = _table([("Banks-CO0", "2020-02-03", 100.0), ("Banks-CO0", "2020-02-04", 101.0)])
    r = market.sector_return(taxonomy, t, "Banks", date(2020, 2, 1))
    assert r.value == pytest.approx(0.01)


def test_sector_return_zero_change_is_exact():
    taxonomy = make_taxonomy(["Banks"])
    t = _table([("Banks-CO0", "2020-02-01", 97.3), ("Banks-CO0", "2020-02-02", 97.3)])
    assert market.sector_return(taxonomy, t, "Banks", date(2020, 2, 1)).value == 0.0


def test_sector_return_denominator_counts_usable_only():
    taxonomy = make_taxonomy(["Banks"], companies_per=3)
    t = _table([
        ("Banks-CO0", "2020-02-01", 100.0), ("Banks-CO0", "2020-02-02", 104.0),
        ("Banks-CO1", "2020-02-01", 50.0),              # no later day
        # Banks-CO2 absent entirely
    ])
    r = market.sector_return(taxonomy, t, "Banks", date(2020, 2, 1))
    assert r.value == pytest.approx(0.04)
    assert (r.companies_used, r.companies_skipped) == (1, 2)


def test_sector_return_errors():
    taxonomy = make_taxonomy(["Banks"])
    t = _table([])
    with pytest.raises(errors.UnknownSector):
        market.sector_return(taxonomy, t, "Opium", date(2020, 2, 1))
    with pytest.raises(errors.NoUsableCompanies):
        market.sector_return(taxonomy, t, "Banks", date(2020, 2, 1))


def test_sector_return_matches_naive_oracle():
    rng = np.random.default_rng(77)
    for trial in range(200):
        n_sectors = int(rng.integers(1, 4))
        per = int(rng.integers(1, 4))
        taxonomy = make_taxonomy([f"S{i}" for i in range(n_sectors)], companies_per=per)
        base = date(2021, 2, 1)
        rows = []
        for sector in taxonomy.sectors:
            for company in taxonomy.companies[sector]:
                for k in range(int(rng.integers(0, 6))):
                    day = base + timedelta(days=int(rng.integers(-3, 6)))
                    rows.append((company, day.isoformat(),
                                 float(rng.uniform(10.0, 500.0))))
        # Duplicate (company, day) pairs collapse to the last value.
        opens = {(c, date.fromisoformat(d)): p for c, d, p in rows}
        t = _table([(c, d.isoformat(), p) for (c, d), p in opens.items()])
        d = base + timedelta(days=int(rng.integers(-1, 4)))
        for sector in taxonomy.sectors:
            want, used = naive_sector_return(taxonomy, opens, sector, d)
            if want is None:
                with pytest.raises(errors.NoUsableCompanies):
                    market.sector_return(taxonomy, t, sector, d)
            else:
                got = market.sector_return(taxonomy, t, sector, d)
                assert got.value == pytest.approx(want, abs=1e-12)
                assert got.companies_used == used


# ------------------------------------------------------------ event_returns

def test_event_returns_taxonomy_order_and_omission():
    taxonomy = make_taxonomy(["B", "A", "C"])
    t = _table([
        ("A-CO0", "2020-02-01", 100.0), ("A-CO0", "2020-02-02", 101.0),
        ("B-CO0", "2020-02-01", 100.0), ("B-CO0", "2020-02-02", 99.0),
        # C-CO0 unusable
    ])
    out = market.event_returns(taxonomy, t, date(2020, 2, 1))
    assert [r.sector for r in out] == ["B", "A"]
    sub = market.event_returns(taxonomy, t, date(2020, 2, 1), sectors=["A"])
    assert [r.sector for r in sub] == ["A"]


def test_fixture_event_returns_match_hand_table(taxonomy, prices):
    # Hand-derived from the checked-in price fixture (see fixtures/make_fixtures.py).
    want = {
        date(2018, 2, 1): {"Banks": 0.02, "Steel": -0.01, "Textiles": 0.005, "Cement": 0.0},
        date(2022, 2, 1): {"Banks": 0.0, "Steel": -0.02, "Textiles": 0.015, "Cement": -0.01},
        date(2025, 2, 1): {"Banks": -0.01, "Steel": 0.005, "Textiles": 0.02, "Cement": 0.01},
    }
    for d, by_sector in want.items():
        out = market.event_returns(taxonomy, prices, d)
        assert {r.sector: r.value for r in out} == by_sector
    # SBIN delisted after 2019: skipped but the other two banks still count.
    banks = market.sector_return(taxonomy, prices, "Banks", date(2021, 2, 1))
    assert (banks.companies_used, banks.companies_skipped) == (2, 1)
    # RAYMOND has an anchor in 2025 but no later day: usable=1.
    textiles = market.sector_return(taxonomy, prices, "Textiles", date(2025, 2, 1))
    assert (textiles.companies_used, textiles.companies_skipped) == (1, 1)


# ----------------------------------------------------- ground_truth_ranking

def _ret(sector, value, d=date(2020, 2, 1)):
    return market.SectorReturn(sector, d, value, 1, 0)


def test_ground_truth_ranking_sorts_desc_then_name():
    ranking = market.ground_truth_ranking(
        [_ret("B", 0.01), _ret("A", 0.03), _ret("D", 0.01), _ret("C", -0.02)])
    assert ranking.sectors() == ("A", "B", "D", "C")
    assert ranking.ordered[0] == ("A", 0.03)
    assert ranking.budget_date == date(2020, 2, 1)


def test_ground_truth_ranking_errors():
    with pytest.raises(ValueError):
        market.ground_truth_ranking([])
    with pytest.raises(errors.MixedDates):
        market.ground_truth_ranking([_ret("A", 0.1), _ret("B", 0.1, date(2021, 2, 1))])
    with pytest.raises(errors.DuplicateSector):
        market.ground_truth_ranking([_ret("A", 0.1), _ret("A", 0.2)])


# ------------------------------------------------------------------ files

def test_returns_round_trip(tmp_path):
    rows = [market.SectorReturn("Banks", date(2020, 2, 1), 0.0123, 3, 1),
            market.SectorReturn("Steel", date(2020, 2, 1), -0.5, 2, 0)]
    p = tmp_path / "r.csv"
    market.write_returns(str(p), rows)
    assert market.load_returns(str(p)) == rows
    header = p.read_text().splitlines()[0]
    assert header == "date,sector,return,companies_used,companies_skipped"


def test_load_returns_errors(tmp_path):
    p = tmp_path / "r.csv"
    p.write_text("when,sector,return\n")
    with pytest.raises(errors.BadHeader):
        market.load_returns(str(p))
    p.write_text("date,sector,return,companies_used,companies_skipped\n"
                 "2020-02-01,Banks,0.01,x,0\n")
    with pytest.raises(errors.MalformedRow, match="r.csv:2:"):
        market.load_returns(str(p))
