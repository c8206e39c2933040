"""Keyword mention counting over dated document collections.

Turns documents (articles, speeches, abstracts, parliamentary questions)
into per-period counts and shares for configurable phrase sets. Matching
is case-insensitive (via ``str.casefold``), word-boundary aware, and
diacritic-sensitive; a run of whitespace inside a phrase matches any run
of whitespace in the text.
"""

from __future__ import annotations

import csv
import datetime as dt
import functools
import json
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence, TextIO

from . import periods
from .periods import Period, quarter_of

CONTAINS_DOCUMENT = "contains_document"
COUNT_OCCURRENCES = "count_occurrences"
MATCH_MODES = (CONTAINS_DOCUMENT, COUNT_OCCURRENCES)

DEFAULT_SANITY_WINDOW = (dt.date(1900, 1, 1), dt.date(2100, 1, 1))

DOCUMENTS_CSV_HEADER = ["id", "date", "outlet", "group", "text"]
COUNTS_CSV_HEADER = [
    "outlet",
    "period",
    "n_docs",
    "n_matching_docs",
    "n_occurrences",
    "share",
]


class CorpusError(Exception):
    pass


class DocumentsCsvError(CorpusError):
    """Malformed documents CSV; carries the offending path and line number."""

    def __init__(self, path: str, line: int, message: str):
        self.path = path
        self.line = line
        super().__init__(f"{path}:{line}: {message}")


class DateSanityError(CorpusError):
    """Documents dated outside the configured sanity window."""

    def __init__(self, ids: Sequence[str], window: tuple[dt.date, dt.date]):
        self.ids = tuple(ids)
        self.window = window
        shown = ", ".join(self.ids[:10])
        more = "" if len(self.ids) <= 10 else f" (+{len(self.ids) - 10} more)"
        super().__init__(
            f"{len(self.ids)} document(s) dated outside "
            f"{window[0].isoformat()}..{window[1].isoformat()}: {shown}{more}"
        )


@dataclass(frozen=True)
class Document:
    id: str
    date: dt.date
    outlet: str
    text: str
    group: str = ""

    def __post_init__(self) -> None:
        if not self.outlet:
            raise ValueError(f"document {self.id!r} has empty outlet")


@dataclass(frozen=True)
class PhraseSet:
    name: str
    phrases: tuple[str, ...]
    match_mode: str = CONTAINS_DOCUMENT

    def __post_init__(self) -> None:
        if not self.phrases:
            raise ValueError(f"phrase set {self.name!r} has no phrases")
        for p in self.phrases:
            if not p or p != p.strip():
                raise ValueError(
                    f"phrase {p!r} in set {self.name!r} is empty or has "
                    "leading/trailing whitespace"
                )
        if self.match_mode not in MATCH_MODES:
            raise ValueError(f"unknown match_mode {self.match_mode!r}")


@dataclass(frozen=True)
class MentionRow:
    period: Period
    n_docs: int
    n_matching_docs: int
    n_occurrences: int

    @property
    def share(self) -> float | None:
        """Matching-document share; undefined (None) for empty periods."""
        if self.n_docs == 0:
            return None
        return self.n_matching_docs / self.n_docs


@dataclass(frozen=True)
class MentionSeries:
    outlet: str
    phrase_set: str
    granularity: str
    rows: tuple[MentionRow, ...] = field(default=())

    def __post_init__(self) -> None:
        for prev, cur in zip(self.rows, self.rows[1:]):
            if cur.period.ordinal != prev.period.ordinal + 1:
                raise ValueError(
                    f"mention series {self.outlet}/{self.phrase_set} has a gap "
                    f"between {prev.period} and {cur.period}"
                )
        for r in self.rows:
            if r.n_matching_docs > r.n_docs:
                raise ValueError(
                    f"{self.outlet}/{r.period}: n_matching_docs > n_docs"
                )


@functools.lru_cache(maxsize=1024)
def _phrase_pattern(phrase: str) -> re.Pattern[str]:
    tokens = phrase.casefold().split()
    if not tokens:
        raise ValueError(f"phrase {phrase!r} contains no words")
    return re.compile(r"\b" + r"\s+".join(re.escape(t) for t in tokens) + r"\b")


def match_phrase(text: str, phrase: str) -> int:
    """Count non-overlapping occurrences of ``phrase`` in ``text``.

    Case-insensitive via casefolding, so diacritics stay significant;
    word boundaries prevent intra-word matches; whitespace between the
    phrase's words matches any whitespace run in the text.
    """
    if not text:
        return 0
    return sum(1 for _ in _phrase_pattern(phrase).finditer(text.casefold()))


def doc_matches(doc: Document, ps: PhraseSet) -> bool:
    """True iff any phrase of the set occurs at least once in the document."""
    return any(match_phrase(doc.text, p) >= 1 for p in ps.phrases)


def count_occurrences(doc: Document, ps: PhraseSet) -> int:
    return sum(match_phrase(doc.text, p) for p in ps.phrases)


def validate_dates(
    docs: Iterable[Document],
    sanity_window: tuple[dt.date, dt.date] = DEFAULT_SANITY_WINDOW,
) -> None:
    lo, hi = sanity_window
    bad = sorted(d.id for d in docs if not lo <= d.date <= hi)
    if bad:
        raise DateSanityError(bad, sanity_window)


def aggregate(
    docs: Sequence[Document],
    ps: PhraseSet,
    granularity: str,
    sanity_window: tuple[dt.date, dt.date] = DEFAULT_SANITY_WINDOW,
) -> dict[str, MentionSeries]:
    """Per-outlet mention series on a gap-free period grid.

    Every period from an outlet's earliest to latest document is present;
    periods without documents carry ``n_docs = 0`` and an undefined share.
    Output is independent of the input document order.
    """
    validate_dates(docs, sanity_window)
    buckets: dict[str, dict[int, list[Document]]] = {}
    for d in docs:
        p = periods.from_date(d.date, granularity)
        buckets.setdefault(d.outlet, {}).setdefault(p.ordinal, []).append(d)

    out: dict[str, MentionSeries] = {}
    for outlet in sorted(buckets):
        by_period = buckets[outlet]
        rows = []
        for o in range(min(by_period), max(by_period) + 1):
            in_period = by_period.get(o, [])
            rows.append(
                MentionRow(
                    period=periods.from_ordinal(granularity, o),
                    n_docs=len(in_period),
                    n_matching_docs=sum(
                        1 for d in in_period if doc_matches(d, ps)
                    ),
                    n_occurrences=sum(
                        count_occurrences(d, ps) for d in in_period
                    ),
                )
            )
        out[outlet] = MentionSeries(outlet, ps.name, granularity, tuple(rows))
    return out


@dataclass(frozen=True)
class CountTable:
    """Matching-document counts per phrase set and period, pooled over outlets.

    ``counts[s][t]`` is the number of documents in period ``t`` matching
    phrase set ``s``; ``n_docs[t]`` is the period's document total.
    """

    phrase_sets: tuple[str, ...]
    periods: tuple[Period, ...]
    counts: tuple[tuple[int, ...], ...]
    n_docs: tuple[int, ...]


def count_table(
    docs: Sequence[Document],
    phrase_sets: Sequence[PhraseSet],
    granularity: str = periods.YEARLY,
) -> CountTable:
    """Documents matching each phrase set, bucketed by period.

    Rows keep the phrase-set order given; the period axis is gap-free from
    the earliest to the latest document. Empty corpus gives an empty table.
    """
    if not phrase_sets:
        raise ValueError("count_table needs at least one phrase set")
    names = tuple(ps.name for ps in phrase_sets)
    if not docs:
        return CountTable(names, (), tuple(() for _ in phrase_sets), ())

    ords = [periods.from_date(d.date, granularity).ordinal for d in docs]
    lo, hi = min(ords), max(ords)
    grid = [periods.from_ordinal(granularity, o) for o in range(lo, hi + 1)]
    n_docs = [0] * len(grid)
    counts = [[0] * len(grid) for _ in phrase_sets]
    for d, o in zip(docs, ords):
        t = o - lo
        n_docs[t] += 1
        for s, ps in enumerate(phrase_sets):
            if doc_matches(d, ps):
                counts[s][t] += 1
    return CountTable(
        names,
        tuple(grid),
        tuple(tuple(row) for row in counts),
        tuple(n_docs),
    )


def rebucket(series: MentionSeries, granularity: str) -> MentionSeries:
    """Re-aggregate a monthly series onto a coarser grid by summing counts."""
    conv = {
        periods.QUARTERLY: quarter_of,
        periods.YEARLY: periods.year_of,
    }.get(granularity)
    if series.granularity != periods.MONTHLY or conv is None:
        raise ValueError("rebucket supports monthly -> quarterly/yearly only")
    sums: dict[int, list[int]] = {}
    for r in series.rows:
        acc = sums.setdefault(conv(r.period).ordinal, [0, 0, 0])
        acc[0] += r.n_docs
        acc[1] += r.n_matching_docs
        acc[2] += r.n_occurrences
    if not sums:
        return MentionSeries(series.outlet, series.phrase_set, granularity, ())
    # contiguous months land on contiguous coarse buckets, so the range is gap-free
    rows = tuple(
        MentionRow(periods.from_ordinal(granularity, o), *sums[o])
        for o in range(min(sums), max(sums) + 1)
    )
    return MentionSeries(series.outlet, series.phrase_set, granularity, rows)


# ---------------------------------------------------------------------------
# External interfaces: documents CSV, phrase-set config, counts CSV
# ---------------------------------------------------------------------------


def read_documents_csv(path: str | Path) -> list[Document]:
    """Read a UTF-8 documents CSV with header ``id,date,outlet,group,text``."""
    path = Path(path)
    if not path.exists():
        raise DocumentsCsvError(str(path), 0, "file not found")
    docs: list[Document] = []
    with open(path, encoding="utf-8", newline="") as f:
        reader = csv.reader(f)
        try:
            header = next(reader)
        except StopIteration:
            raise DocumentsCsvError(str(path), 1, "missing header row") from None
        if header != DOCUMENTS_CSV_HEADER:
            raise DocumentsCsvError(
                str(path),
                1,
                f"expected header {','.join(DOCUMENTS_CSV_HEADER)!r}, "
                f"got {','.join(header)!r}",
            )
        for row in reader:
            line = reader.line_num
            if not row:
                continue
            if len(row) != len(DOCUMENTS_CSV_HEADER):
                raise DocumentsCsvError(
                    str(path), line, f"expected 5 fields, got {len(row)}"
                )
            doc_id, date_s, outlet, group, text = row
            try:
                date = dt.date.fromisoformat(date_s)
            except ValueError:
                raise DocumentsCsvError(
                    str(path), line, f"invalid ISO date {date_s!r}"
                ) from None
            try:
                docs.append(Document(doc_id, date, outlet, text, group))
            except ValueError as exc:
                raise DocumentsCsvError(str(path), line, str(exc)) from None
    return docs


def load_phrase_sets(path: str | Path) -> list[PhraseSet]:
    """Load phrase sets from JSON: a list of {name, phrases[], match_mode?}."""
    with open(path, encoding="utf-8") as f:
        raw = json.load(f)
    if not isinstance(raw, list):
        raise ValueError(f"{path}: expected a JSON list of phrase sets")
    sets = []
    for i, entry in enumerate(raw):
        try:
            sets.append(
                PhraseSet(
                    name=entry["name"],
                    phrases=tuple(entry["phrases"]),
                    match_mode=entry.get("match_mode", CONTAINS_DOCUMENT),
                )
            )
        except (KeyError, TypeError) as exc:
            raise ValueError(f"{path}: bad phrase set at position {i}: {exc}")
    return sets


def write_counts_csv(
    series: MentionSeries, f: TextIO, metadata: Sequence[str] = ()
) -> None:
    """Write one outlet's counts; undefined shares become empty fields."""
    for line in metadata:
        f.write(f"# {line}\n")
    writer = csv.writer(f, lineterminator="\n")
    writer.writerow(COUNTS_CSV_HEADER)
    for r in series.rows:
        share = "" if r.share is None else repr(r.share)
        writer.writerow(
            [series.outlet, str(r.period), r.n_docs, r.n_matching_docs,
             r.n_occurrences, share]
        )
