"""Normalized attention indices from mention-share series.

The pooled index recipe: standardize each outlet's share series to unit
sample standard deviation over a normalization window, average the
standardized series per period across outlets, then rescale the average
to mean 100 over the window. Undefined observations (periods without
documents) stay undefined and are skipped by every statistic.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence, TextIO

import numpy as np

from . import corpus, periods
from .periods import Period, quarter_of

Window = tuple[Period, Period] | None


class SeriesError(Exception):
    pass


class ZeroVarianceError(SeriesError):
    pass


class InsufficientDataError(SeriesError):
    pass


class NonPositiveMeanError(SeriesError):
    pass


class InsufficientOverlapError(SeriesError):
    pass


@dataclass(frozen=True)
class ShareSeries:
    label: str
    granularity: str
    periods: tuple[Period, ...]
    values: tuple[float | None, ...]

    def __post_init__(self) -> None:
        if len(self.periods) != len(self.values):
            raise ValueError(f"{self.label}: periods/values length mismatch")
        for prev, cur in zip(self.periods, self.periods[1:]):
            if not cur > prev:
                raise ValueError(f"{self.label}: periods not strictly increasing")
        for p, v in zip(self.periods, self.values):
            if v is not None and not np.isfinite(v):
                raise ValueError(f"{self.label}: non-finite value at {p}")

    def defined(self) -> int:
        return sum(1 for v in self.values if v is not None)


@dataclass(frozen=True)
class IndexSeries:
    """A dimensionless attention index pinned to mean 100 over its window."""

    label: str
    granularity: str
    window: tuple[Period, Period]
    periods: tuple[Period, ...]
    values: tuple[float | None, ...]

    def __post_init__(self) -> None:
        if len(self.periods) != len(self.values):
            raise ValueError(f"{self.label}: periods/values length mismatch")
        for prev, cur in zip(self.periods, self.periods[1:]):
            if not cur > prev:
                raise ValueError(f"{self.label}: periods not strictly increasing")
        inside = [
            v
            for p, v in zip(self.periods, self.values)
            if v is not None and self.window[0] <= p <= self.window[1]
        ]
        if inside:
            mean = float(np.mean(inside))
            if abs(mean - 100.0) > 1e-9 * 100.0:
                raise ValueError(
                    f"{self.label}: window mean {mean!r} is not pinned to 100"
                )


def _values_array(s: ShareSeries) -> np.ndarray:
    return np.array(
        [np.nan if v is None else v for v in s.values], dtype=np.float64
    )


def _window_mask(s: ShareSeries, window: Window) -> np.ndarray:
    if window is None:
        return np.ones(len(s.periods), dtype=bool)
    lo, hi = window
    return np.array([lo <= p <= hi for p in s.periods], dtype=bool)


def _resolve_window(
    series: Sequence[ShareSeries], window: Window
) -> tuple[Period, Period]:
    if window is not None:
        lo, hi = window
        if lo > hi:
            raise ValueError(f"window start {lo} after end {hi}")
        return (lo, hi)
    granularity = series[0].granularity
    lo = min(s.periods[0].ordinal for s in series if s.periods)
    hi = max(s.periods[-1].ordinal for s in series if s.periods)
    return (
        periods.from_ordinal(granularity, lo),
        periods.from_ordinal(granularity, hi),
    )


def _sample_sd(window_values: np.ndarray, label: str) -> float:
    """Sample sd, raising ZeroVariance when it is zero at working precision.

    A constant series picks up rounding noise of order eps * scale in the
    deviations; anything at that level is variance-free for our purposes.
    """
    sd = float(np.std(window_values, ddof=1))
    if sd <= 1e-12 * float(np.max(np.abs(window_values))):
        raise ZeroVarianceError(f"{label}: zero variance over window")
    return sd


def standardize(s: ShareSeries, window: Window = None) -> ShareSeries:
    """Scale a series so its sample (n-1) standard deviation over the window is 1.

    The scaling factor comes from the window's defined values only, but is
    applied to the whole series. Undefined values stay undefined.
    """
    vals = _values_array(s)
    in_win = _window_mask(s, window) & ~np.isnan(vals)
    n = int(in_win.sum())
    if n < 2:
        raise InsufficientDataError(
            f"{s.label}: {n} defined value(s) in window, need at least 2"
        )
    sd = _sample_sd(vals[in_win], s.label)
    out = vals / sd
    return ShareSeries(
        s.label,
        s.granularity,
        s.periods,
        tuple(None if np.isnan(v) else float(v) for v in out),
    )


def build_index(
    series: Sequence[ShareSeries],
    window: Window = None,
    label: str = "index",
) -> IndexSeries:
    """Pooled index: standardize, average across series, rescale to mean 100.

    The period grid is the gap-free union of the input extents; a period
    is undefined only where every input is undefined. The averaging step
    uses whichever series are defined in a period, so archive gaps do not
    drag the index toward zero.
    """
    if not series:
        raise ValueError("build_index needs at least one series")
    granularity = series[0].granularity
    for s in series:
        if s.granularity != granularity:
            raise ValueError(f"{s.label}: mixed granularities in build_index")
        if not s.periods:
            raise InsufficientDataError(f"{s.label}: empty series")
    win = _resolve_window(series, window)

    standardized = [standardize(s, win) for s in series]
    lo = min(s.periods[0].ordinal for s in series)
    hi = max(s.periods[-1].ordinal for s in series)
    grid = [periods.from_ordinal(granularity, o) for o in range(lo, hi + 1)]

    sums = np.zeros(len(grid))
    counts = np.zeros(len(grid), dtype=np.int64)
    for s in standardized:
        for p, v in zip(s.periods, s.values):
            if v is not None:
                sums[p.ordinal - lo] += v
                counts[p.ordinal - lo] += 1
    avg = np.full(len(grid), np.nan)
    has = counts > 0
    avg[has] = sums[has] / counts[has]

    in_win = np.array([win[0] <= p <= win[1] for p in grid]) & has
    if not in_win.any():
        raise InsufficientDataError(f"{label}: no defined periods in window")
    mean = float(avg[in_win].mean())
    if mean <= 0.0:
        raise NonPositiveMeanError(
            f"{label}: window mean {mean!r} of averaged series is not positive"
        )
    out = 100.0 * avg / mean
    return IndexSeries(
        label,
        granularity,
        win,
        tuple(grid),
        tuple(None if np.isnan(v) else float(v) for v in out),
    )


def normalize_mean100(
    s: ShareSeries,
    window: Window = None,
    label: str | None = None,
    rescale_sd: bool = False,
) -> IndexSeries:
    """Rescale a single series to mean 100 over the window.

    Default is the pure ratio map ``100 * x / mean``, which keeps relative
    movements intact. With ``rescale_sd`` the map is affine,
    ``100 + 100 * (x - mean) / sd``, pinning the standard deviation to 100
    as well (at the cost of a shift).
    """
    label = s.label if label is None else label
    vals = _values_array(s)
    win = _resolve_window([s], window)
    in_win = _window_mask(s, win) & ~np.isnan(vals)
    n = int(in_win.sum())
    if n == 0:
        raise InsufficientDataError(f"{label}: no defined values in window")
    mean = float(vals[in_win].mean())
    if rescale_sd:
        if n < 2:
            raise InsufficientDataError(
                f"{label}: {n} defined value(s) in window, need at least 2"
            )
        sd = _sample_sd(vals[in_win], label)
        out = 100.0 + 100.0 * (vals - mean) / sd
    else:
        if mean <= 0.0:
            raise NonPositiveMeanError(
                f"{label}: window mean {mean!r} is not positive"
            )
        out = 100.0 * vals / mean
    return IndexSeries(
        label,
        s.granularity,
        win,
        s.periods,
        tuple(None if np.isnan(v) else float(v) for v in out),
    )


def to_quarterly(s: ShareSeries) -> ShareSeries:
    """Quarterly means of a monthly series; a quarter with no defined month
    is undefined."""
    if s.granularity != periods.MONTHLY:
        raise ValueError(f"{s.label}: to_quarterly expects a monthly series")
    if not s.periods:
        return ShareSeries(s.label, periods.QUARTERLY, (), ())
    acc: dict[int, list[float]] = {}
    for p, v in zip(s.periods, s.values):
        acc.setdefault(quarter_of(p).ordinal, [])
        if v is not None:
            acc[quarter_of(p).ordinal].append(v)
    lo, hi = min(acc), max(acc)
    grid = [periods.from_ordinal(periods.QUARTERLY, o) for o in range(lo, hi + 1)]
    values: list[float | None] = []
    for o in range(lo, hi + 1):
        vs = acc.get(o, [])
        values.append(float(np.mean(vs)) if vs else None)
    return ShareSeries(s.label, periods.QUARTERLY, tuple(grid), tuple(values))


def correlation(a: ShareSeries, b: ShareSeries) -> float:
    """Pearson correlation over the periods where both series are defined."""
    if a.granularity != b.granularity:
        raise ValueError("correlation needs series on the same grid")
    bvals = {p.ordinal: v for p, v in zip(b.periods, b.values) if v is not None}
    pairs = [
        (v, bvals[p.ordinal])
        for p, v in zip(a.periods, a.values)
        if v is not None and p.ordinal in bvals
    ]
    if len(pairs) < 2:
        raise InsufficientOverlapError(
            f"{a.label}/{b.label}: {len(pairs)} common defined period(s)"
        )
    x = np.array([p[0] for p in pairs])
    y = np.array([p[1] for p in pairs])
    xc = x - x.mean()
    yc = y - y.mean()
    sxx = float(np.sum(xc * xc))
    syy = float(np.sum(yc * yc))
    if sxx == 0.0 or syy == 0.0:
        raise ZeroVarianceError(
            f"{a.label}/{b.label}: constant over the common periods"
        )
    # sqrt of the product (not product of sqrts) keeps corr(a, a) exactly 1
    return float(np.sum(xc * yc)) / float(np.sqrt(sxx * syy))


def mention_share_series(
    ms: corpus.MentionSeries, match_mode: str = corpus.CONTAINS_DOCUMENT
) -> ShareSeries:
    """Share series from per-period mention counts.

    ``contains_document`` uses the matching-document share (the default
    index input); ``count_occurrences`` uses occurrences per document.
    Periods without documents are undefined either way.
    """
    if match_mode not in corpus.MATCH_MODES:
        raise ValueError(f"unknown match_mode {match_mode!r}")
    values: list[float | None] = []
    for r in ms.rows:
        if r.n_docs == 0:
            values.append(None)
        elif match_mode == corpus.CONTAINS_DOCUMENT:
            values.append(r.share)
        else:
            values.append(r.n_occurrences / r.n_docs)
    return ShareSeries(
        ms.outlet,
        ms.granularity,
        tuple(r.period for r in ms.rows),
        tuple(values),
    )


def index_to_share(ix: IndexSeries) -> ShareSeries:
    """View an index as a plain value series (for resampling or panels)."""
    return ShareSeries(ix.label, ix.granularity, ix.periods, ix.values)


# ---------------------------------------------------------------------------
# Series CSV: `period,value`, empty value = undefined, `#` lines are metadata
# ---------------------------------------------------------------------------


def write_series_csv(
    label: str,
    grid: Sequence[Period],
    values: Sequence[float | None],
    f: TextIO,
    metadata: Sequence[str] = (),
) -> None:
    for line in metadata:
        f.write(f"# {line}\n")
    writer = csv.writer(f, lineterminator="\n")
    writer.writerow(["period", "value"])
    for p, v in zip(grid, values):
        writer.writerow([str(p), "" if v is None else repr(v)])


def read_series_csv(
    path: str | Path, label: str | None = None
) -> ShareSeries:
    path = Path(path)
    grid: list[Period] = []
    values: list[float | None] = []
    with open(path, encoding="utf-8", newline="") as f:
        rows = csv.reader(line for line in f if not line.startswith("#"))
        header = next(rows, None)
        if header != ["period", "value"]:
            raise ValueError(f"{path}: expected header 'period,value'")
        for row in rows:
            if not row:
                continue
            grid.append(periods.parse(row[0]))
            values.append(None if row[1] == "" else float(row[1]))
    if not grid:
        raise ValueError(f"{path}: empty series")
    granularity = grid[0].granularity
    return ShareSeries(
        label if label is not None else path.stem,
        granularity,
        tuple(grid),
        tuple(values),
    )
