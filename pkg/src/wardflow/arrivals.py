"""Daily infection counts: synthetic generation and CSV ingestion.

A case series is the exogenous driver of the whole model: one non-negative
integer count per calendar day. Synthetic series draw independent Poisson
counts and may superimpose sharp peak events on selected days.
"""

from __future__ import annotations

import datetime as dt
from dataclasses import dataclass

import numpy as np
import pandas as pd

from .errors import IngestionError, ParameterError
from .seeding import stream

#: default peak events for the canonical synthetic series: (day offset, added cases)
CANONICAL_PEAKS = ((20, 30), (50, 40), (80, 50))


@dataclass(frozen=True, eq=False)
class PeakEvent:
    """Extra cases dumped on one day, on top of the background process."""

    day: int
    count: int

    def __post_init__(self):
        if self.day < 0:
            raise ParameterError(f"peak day must be >= 0, got {self.day}")
        if self.count < 0:
            raise ParameterError(f"peak count must be >= 0, got {self.count}")

    def __eq__(self, other):
        if not isinstance(other, PeakEvent):
            return NotImplemented
        return (self.day, self.count) == (other.day, other.count)


@dataclass(frozen=True, eq=False)
class CaseSeries:
    """New infection counts per day, anchored to a start date."""

    start_date: dt.date
    counts: np.ndarray

    def __post_init__(self):
        counts = np.asarray(self.counts)
        if counts.ndim != 1:
            raise ParameterError("case counts must be one-dimensional")
        if counts.size == 0:
            raise ParameterError("case series must cover at least one day")
        if np.any(counts < 0):
            raise ParameterError("case counts must be non-negative")
        if not np.issubdtype(counts.dtype, np.integer):
            rounded = np.rint(counts)
            if not np.allclose(counts, rounded):
                raise ParameterError("case counts must be whole numbers")
            counts = rounded.astype(np.int64)
        else:
            counts = counts.astype(np.int64)
        counts.flags.writeable = False
        object.__setattr__(self, "counts", counts)

    def __len__(self) -> int:
        return len(self.counts)

    def __eq__(self, other):
        if not isinstance(other, CaseSeries):
            return NotImplemented
        return self.start_date == other.start_date and np.array_equal(self.counts, other.counts)

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def dates(self) -> list[dt.date]:
        return [self.start_date + dt.timedelta(days=i) for i in range(len(self.counts))]


def generate_poisson_series(
    lam: float,
    horizon_days: int,
    seed: int,
    start_date: dt.date = dt.date(2020, 9, 1),
) -> CaseSeries:
    """Independent Poisson(lam) counts for each of ``horizon_days`` days."""
    if lam < 0:
        raise ParameterError(f"arrival rate must be >= 0, got {lam}")
    if horizon_days < 1:
        raise ParameterError(f"horizon_days must be >= 1, got {horizon_days}")
    rng = stream(seed)
    counts = rng.poisson(lam, size=horizon_days)
    return CaseSeries(start_date=start_date, counts=counts)


def apply_peaks(series: CaseSeries, peaks: tuple[PeakEvent, ...] | list[PeakEvent]) -> CaseSeries:
    """Return a new series with peak counts added on their days."""
    counts = series.counts.copy()
    for peak in peaks:
        if peak.day >= len(counts):
            raise ParameterError(
                f"peak day {peak.day} beyond series horizon {len(counts)}"
            )
        counts[peak.day] += peak.count
    return CaseSeries(start_date=series.start_date, counts=counts)


def synthetic_series(
    lam: float = 4.0,
    horizon_days: int = 91,
    seed: int = 0,
    start_date: dt.date = dt.date(2020, 9, 1),
    peaks: tuple[tuple[int, int], ...] = CANONICAL_PEAKS,
) -> CaseSeries:
    """Poisson background plus the canonical three peak events."""
    base = generate_poisson_series(lam, horizon_days, seed, start_date)
    return apply_peaks(base, [PeakEvent(day, count) for day, count in peaks])


def load_case_series(path) -> CaseSeries:
    """Read a ``date,count`` CSV into a CaseSeries.

    Rows must be consecutive calendar days in ascending order; gaps,
    duplicates, negative or fractional counts and malformed dates are all
    rejected with a row-numbered message.
    """
    try:
        frame = pd.read_csv(path, dtype=str)
    except (OSError, pd.errors.ParserError, pd.errors.EmptyDataError) as exc:
        raise IngestionError(f"cannot read case file {path}: {exc}") from exc
    expected = ["date", "count"]
    if list(frame.columns) != expected:
        raise IngestionError(
            f"case file {path}: expected columns {expected}, found {list(frame.columns)}"
        )
    if len(frame) == 0:
        raise IngestionError(f"case file {path}: no data rows")

    dates: list[dt.date] = []
    counts: list[int] = []
    for pos, row in enumerate(frame.itertuples(index=False), start=2):  # row 1 is the header
        try:
            day = dt.date.fromisoformat(str(row.date).strip())
        except ValueError as exc:
            raise IngestionError(f"case file {path}, row {pos}: bad date {row.date!r}") from exc
        raw = str(row.count).strip()
        try:
            value = float(raw)
        except ValueError as exc:
            raise IngestionError(f"case file {path}, row {pos}: bad count {raw!r}") from exc
        if value < 0 or value != int(value):
            raise IngestionError(
                f"case file {path}, row {pos}: count must be a non-negative integer, got {raw}"
            )
        dates.append(day)
        counts.append(int(value))

    for pos, (prev, curr) in enumerate(zip(dates, dates[1:]), start=3):
        if (curr - prev).days != 1:
            raise IngestionError(
                f"case file {path}, row {pos}: dates must be consecutive days "
                f"({prev} followed by {curr})"
            )
    return CaseSeries(start_date=dates[0], counts=np.array(counts, dtype=np.int64))


def save_case_series(series: CaseSeries, path) -> None:
    frame = pd.DataFrame({
        "date": [d.isoformat() for d in series.dates()],
        "count": series.counts,
    })
    frame.to_csv(path, index=False)
