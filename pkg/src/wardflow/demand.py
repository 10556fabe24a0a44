"""Resource demand series, trailing-window incidence, and reference demand.

Demand is a (3, T) array of bed, icu and vent counts per day. The reference
("ground truth") demand against which simulations are scored is built from
the case series alone: each resource's demand on a day is a fixed fraction
of the trailing 15-day infection total ending on that day.
"""

from __future__ import annotations

import datetime as dt
from dataclasses import dataclass

import numpy as np
import pandas as pd

from .arrivals import CaseSeries
from .errors import IngestionError, ParameterError
from .scenario import RESOURCE_KINDS

#: days contributing to the trailing incidence window (today plus 14 back)
WINDOW_DAYS = 15


@dataclass(frozen=True, eq=False)
class DemandSeries:
    """Per-day demand for each resource kind, anchored to a start date.

    ``values`` has shape (3, T) in RESOURCE_KINDS order. Optional ``low`` and
    ``high`` arrays of the same shape carry a replication envelope.
    """

    start_date: dt.date
    values: np.ndarray
    low: np.ndarray | None = None
    high: np.ndarray | None = None

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 2 or values.shape[0] != len(RESOURCE_KINDS):
            raise ParameterError(
                f"demand values must have shape (3, T), got {values.shape}"
            )
        if values.shape[1] == 0:
            raise ParameterError("demand series must cover at least one day")
        values.flags.writeable = False
        object.__setattr__(self, "values", values)
        for attr in ("low", "high"):
            band = getattr(self, attr)
            if band is None:
                continue
            band = np.asarray(band, dtype=float)
            if band.shape != values.shape:
                raise ParameterError(
                    f"{attr} envelope shape {band.shape} does not match values {values.shape}"
                )
            band.flags.writeable = False
            object.__setattr__(self, attr, band)

    @property
    def horizon_days(self) -> int:
        return self.values.shape[1]

    def __eq__(self, other):
        if not isinstance(other, DemandSeries):
            return NotImplemented
        if self.start_date != other.start_date:
            return False
        if not np.array_equal(self.values, other.values):
            return False
        for attr in ("low", "high"):
            a, b = getattr(self, attr), getattr(other, attr)
            if (a is None) != (b is None):
                return False
            if a is not None and not np.array_equal(a, b):
                return False
        return True

    def kind(self, name: str) -> np.ndarray:
        try:
            return self.values[RESOURCE_KINDS.index(name)]
        except ValueError:
            raise ParameterError(f"unknown resource kind {name!r}") from None

    def dates(self) -> list[dt.date]:
        return [self.start_date + dt.timedelta(days=i) for i in range(self.horizon_days)]


def windowed_incidence(counts) -> np.ndarray:
    """Trailing 15-day sum of daily counts.

    Element t is the sum of counts[t-14] .. counts[t]; indices before the
    series start contribute zero, so early entries are partial sums.
    """
    arr = np.asarray(counts, dtype=float)
    if arr.ndim != 1:
        raise ParameterError("counts must be one-dimensional")
    if arr.size == 0:
        raise ParameterError("counts must not be empty")
    return np.convolve(arr, np.ones(WINDOW_DAYS))[: arr.size]


def ground_truth_demand(series: CaseSeries, rates: tuple[float, float, float]) -> DemandSeries:
    """Reference demand: rate_k times the trailing window sum, per resource."""
    if len(rates) != len(RESOURCE_KINDS):
        raise ParameterError("rates must supply one value per resource kind")
    window = windowed_incidence(series.counts)
    values = np.array(rates, dtype=float)[:, None] * window[None, :]
    return DemandSeries(start_date=series.start_date, values=values)


def save_demand(series: DemandSeries, path) -> None:
    """Write ``date,bed,icu,vent`` (plus ``*_min``/``*_max`` if present)."""
    data: dict[str, object] = {"date": [d.isoformat() for d in series.dates()]}
    for i, kind in enumerate(RESOURCE_KINDS):
        data[kind] = series.values[i]
    if series.low is not None and series.high is not None:
        for i, kind in enumerate(RESOURCE_KINDS):
            data[f"{kind}_min"] = series.low[i]
        for i, kind in enumerate(RESOURCE_KINDS):
            data[f"{kind}_max"] = series.high[i]
    pd.DataFrame(data).to_csv(path, index=False)


def load_demand(path) -> DemandSeries:
    """Read a demand CSV; envelope columns are optional but must come in pairs."""
    try:
        frame = pd.read_csv(path)
    except (OSError, pd.errors.ParserError, pd.errors.EmptyDataError) as exc:
        raise IngestionError(f"cannot read demand file {path}: {exc}") from exc
    required = ["date"] + list(RESOURCE_KINDS)
    for col in required:
        if col not in frame.columns:
            raise IngestionError(f"demand file {path}: missing column {col!r}")
    env_cols = [f"{k}_{side}" for side in ("min", "max") for k in RESOURCE_KINDS]
    present = [c for c in env_cols if c in frame.columns]
    if present and len(present) != len(env_cols):
        missing = sorted(set(env_cols) - set(present))
        raise IngestionError(
            f"demand file {path}: incomplete envelope columns, missing {missing}"
        )
    extras = set(frame.columns) - set(required) - set(env_cols)
    if extras:
        raise IngestionError(f"demand file {path}: unexpected column(s) {sorted(extras)}")
    if len(frame) == 0:
        raise IngestionError(f"demand file {path}: no data rows")
    try:
        dates = [dt.date.fromisoformat(str(v).strip()) for v in frame["date"]]
    except ValueError as exc:
        raise IngestionError(f"demand file {path}: bad date value: {exc}") from exc
    for i, (prev, curr) in enumerate(zip(dates, dates[1:]), start=3):
        if (curr - prev).days != 1:
            raise IngestionError(
                f"demand file {path}, row {i}: dates must be consecutive days"
            )
    values = np.vstack([frame[k].to_numpy(dtype=float) for k in RESOURCE_KINDS])
    low = high = None
    if present:
        low = np.vstack([frame[f"{k}_min"].to_numpy(dtype=float) for k in RESOURCE_KINDS])
        high = np.vstack([frame[f"{k}_max"].to_numpy(dtype=float) for k in RESOURCE_KINDS])
    return DemandSeries(start_date=dates[0], values=values, low=low, high=high)
