import datetime as dt

import pytest
from hypothesis import given
from hypothesis import strategies as st

from attnflow import periods
from attnflow.periods import Period


def test_parse_and_format_roundtrip():
    assert str(periods.parse("1997-03")) == "1997-03"
    assert str(periods.parse("1997-Q1")) == "1997-Q1"
    assert str(periods.parse("1997")) == "1997"
    assert periods.parse("1997-03").granularity == periods.MONTHLY
    assert periods.parse("1997-Q4").granularity == periods.QUARTERLY
    assert periods.parse("1997").granularity == periods.YEARLY


@pytest.mark.parametrize("text", ["199", "1997-13", "1997-Q5", "1997-Q0", "97-01", "1997-1"])
def test_parse_rejects_malformed(text):
    with pytest.raises(ValueError):
        periods.parse(text)


def test_parse_checks_expected_granularity():
    with pytest.raises(ValueError):
        periods.parse("1997-03", periods.QUARTERLY)


def test_alignment_invariants():
    with pytest.raises(ValueError):
        Period(periods.MONTHLY, 1997, 13)
    with pytest.raises(ValueError):
        Period(periods.QUARTERLY, 1997, 0)
    with pytest.raises(ValueError):
        Period("weekly", 1997, 1)


def test_from_date():
    d = dt.date(1997, 8, 23)
    assert str(periods.from_date(d, periods.MONTHLY)) == "1997-08"
    assert str(periods.from_date(d, periods.QUARTERLY)) == "1997-Q3"
    assert str(periods.from_date(d, periods.YEARLY)) == "1997"


def test_start_date_is_aligned():
    assert periods.parse("1997-08").start_date() == dt.date(1997, 8, 1)
    assert periods.parse("1997-Q3").start_date() == dt.date(1997, 7, 1)
    assert periods.parse("1997").start_date() == dt.date(1997, 1, 1)


def test_ordering_within_granularity():
    assert periods.parse("1997-12") < periods.parse("1998-01")
    assert periods.parse("1997-Q4") < periods.parse("1998-Q1")
    with pytest.raises(ValueError):
        periods.parse("1997-12") < periods.parse("1998-Q1")


def test_next_crosses_year_boundaries():
    assert str(periods.parse("1997-12").next()) == "1998-01"
    assert str(periods.parse("1997-Q4").next()) == "1998-Q1"
    assert str(periods.parse("1997").next()) == "1998"


def test_period_range_is_gap_free():
    r = periods.period_range(periods.parse("1997-11"), periods.parse("1998-02"))
    assert [str(p) for p in r] == ["1997-11", "1997-12", "1998-01", "1998-02"]
    with pytest.raises(ValueError):
        periods.period_range(periods.parse("1998-01"), periods.parse("1997-01"))


def test_quarter_and_year_of():
    assert str(periods.quarter_of(periods.parse("1997-09"))) == "1997-Q3"
    assert str(periods.year_of(periods.parse("1997-Q2"))) == "1997"
    with pytest.raises(ValueError):
        periods.quarter_of(periods.parse("1997-Q2"))


@given(
    st.sampled_from(periods.GRANULARITIES),
    st.integers(min_value=1900, max_value=2099),
    st.integers(min_value=0, max_value=11),
)
def test_ordinal_roundtrip(granularity, year, seq0):
    per_year = {"monthly": 12, "quarterly": 4, "yearly": 1}[granularity]
    p = Period(granularity, year, seq0 % per_year + 1)
    assert periods.from_ordinal(granularity, p.ordinal) == p
    assert p.next().ordinal == p.ordinal + 1
    assert periods.parse(str(p)) == p
