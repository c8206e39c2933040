"""Calendar periods on monthly, quarterly, and yearly grids.

Periods are the time axis shared by the corpus counters, the attention
indices, and the estimation panel. A period is identified by its
granularity, its year, and a 1-based sequence number within the year
(month 1-12, quarter 1-4, always 1 for yearly), which makes alignment
to the grid hold by construction.

Text forms: ``1997-03`` (monthly), ``1997-Q1`` (quarterly), ``1997``
(yearly).
"""

from __future__ import annotations

import datetime as dt
import re
from dataclasses import dataclass

MONTHLY = "monthly"
QUARTERLY = "quarterly"
YEARLY = "yearly"
GRANULARITIES = (MONTHLY, QUARTERLY, YEARLY)

_PER_YEAR = {MONTHLY: 12, QUARTERLY: 4, YEARLY: 1}

_MONTHLY_RE = re.compile(r"^(\d{4})-(\d{2})$")
_QUARTERLY_RE = re.compile(r"^(\d{4})-Q([1-4])$")
_YEARLY_RE = re.compile(r"^(\d{4})$")


@dataclass(frozen=True)
class Period:
    granularity: str
    year: int
    seq: int = 1

    def __post_init__(self) -> None:
        if self.granularity not in GRANULARITIES:
            raise ValueError(f"unknown granularity {self.granularity!r}")
        if not 1 <= self.seq <= _PER_YEAR[self.granularity]:
            raise ValueError(
                f"seq {self.seq} out of range for {self.granularity} period"
            )

    def __str__(self) -> str:
        if self.granularity == MONTHLY:
            return f"{self.year:04d}-{self.seq:02d}"
        if self.granularity == QUARTERLY:
            return f"{self.year:04d}-Q{self.seq}"
        return f"{self.year:04d}"

    @property
    def ordinal(self) -> int:
        """Position on this granularity's grid; consecutive periods differ by 1."""
        return self.year * _PER_YEAR[self.granularity] + (self.seq - 1)

    def _check_comparable(self, other: "Period") -> None:
        if not isinstance(other, Period):
            raise TypeError(f"cannot compare Period with {type(other).__name__}")
        if other.granularity != self.granularity:
            raise ValueError(
                f"cannot compare {self.granularity} and {other.granularity} periods"
            )

    def __lt__(self, other: "Period") -> bool:
        self._check_comparable(other)
        return self.ordinal < other.ordinal

    def __le__(self, other: "Period") -> bool:
        self._check_comparable(other)
        return self.ordinal <= other.ordinal

    def __gt__(self, other: "Period") -> bool:
        self._check_comparable(other)
        return self.ordinal > other.ordinal

    def __ge__(self, other: "Period") -> bool:
        self._check_comparable(other)
        return self.ordinal >= other.ordinal

    def next(self) -> "Period":
        return from_ordinal(self.granularity, self.ordinal + 1)

    def start_date(self) -> dt.date:
        if self.granularity == MONTHLY:
            return dt.date(self.year, self.seq, 1)
        if self.granularity == QUARTERLY:
            return dt.date(self.year, 3 * (self.seq - 1) + 1, 1)
        return dt.date(self.year, 1, 1)


def from_ordinal(granularity: str, ordinal: int) -> Period:
    per = _PER_YEAR[granularity]
    return Period(granularity, ordinal // per, ordinal % per + 1)


def from_date(d: dt.date, granularity: str) -> Period:
    if granularity == MONTHLY:
        return Period(MONTHLY, d.year, d.month)
    if granularity == QUARTERLY:
        return Period(QUARTERLY, d.year, (d.month - 1) // 3 + 1)
    if granularity == YEARLY:
        return Period(YEARLY, d.year)
    raise ValueError(f"unknown granularity {granularity!r}")


def parse(text: str, granularity: str | None = None) -> Period:
    """Parse a period string, inferring granularity from its shape unless given."""
    m = _MONTHLY_RE.match(text)
    if m:
        got = Period(MONTHLY, int(m.group(1)), int(m.group(2)))
    else:
        m = _QUARTERLY_RE.match(text)
        if m:
            got = Period(QUARTERLY, int(m.group(1)), int(m.group(2)))
        else:
            m = _YEARLY_RE.match(text)
            if m:
                got = Period(YEARLY, int(m.group(1)))
            else:
                raise ValueError(f"unparseable period {text!r}")
    if granularity is not None and got.granularity != granularity:
        raise ValueError(f"period {text!r} is not {granularity}")
    return got


def period_range(start: Period, end: Period) -> list[Period]:
    """Gap-free inclusive range; start and end must share a granularity."""
    start._check_comparable(end)
    if end < start:
        raise ValueError(f"range end {end} precedes start {start}")
    return [
        from_ordinal(start.granularity, o)
        for o in range(start.ordinal, end.ordinal + 1)
    ]


def quarter_of(p: Period) -> Period:
    if p.granularity != MONTHLY:
        raise ValueError("quarter_of expects a monthly period")
    return Period(QUARTERLY, p.year, (p.seq - 1) // 3 + 1)


def year_of(p: Period) -> Period:
    return Period(YEARLY, p.year)
