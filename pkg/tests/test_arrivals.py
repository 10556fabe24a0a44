import datetime as dt

import numpy as np
import pytest
from scipy import stats

from wardflow import (
    CaseSeries,
    IngestionError,
    ParameterError,
    PeakEvent,
    apply_peaks,
    generate_poisson_series,
    load_case_series,
    save_case_series,
    synthetic_series,
)


def test_poisson_counts_match_distribution():
    # goodness of fit against the target distribution, not our own sampler
    lam = 4.0
    series = generate_poisson_series(lam, 10_000, seed=5)
    counts = series.counts
    edges = np.arange(0, 12)
    observed = np.array([(counts == k).sum() for k in edges])
    observed = np.append(observed, (counts >= 12).sum())
    expected = stats.poisson.pmf(edges, lam) * counts.size
    expected = np.append(expected, stats.poisson.sf(11, lam) * counts.size)
    chi2 = ((observed - expected) ** 2 / expected).sum()
    p = stats.chi2.sf(chi2, df=len(expected) - 1)
    assert p > 1e-4
    assert abs(counts.mean() - lam) < 3 * np.sqrt(lam / counts.size)


def test_generation_is_deterministic():
    a = generate_poisson_series(4.0, 91, seed=9)
    b = generate_poisson_series(4.0, 91, seed=9)
    c = generate_poisson_series(4.0, 91, seed=10)
    assert a == b
    assert a != c


def test_generate_validates_arguments():
    with pytest.raises(ParameterError, match="rate"):
        generate_poisson_series(-1.0, 10, seed=0)
    with pytest.raises(ParameterError, match="horizon"):
        generate_poisson_series(4.0, 0, seed=0)


def test_apply_peaks_adds_on_the_right_days():
    base = CaseSeries(dt.date(2020, 9, 1), np.zeros(10, dtype=int))
    peaked = apply_peaks(base, [PeakEvent(2, 30), PeakEvent(7, 5)])
    assert peaked.counts[2] == 30
    assert peaked.counts[7] == 5
    assert peaked.total == 35
    assert base.total == 0  # original untouched


def test_peak_beyond_horizon_rejected():
    base = CaseSeries(dt.date(2020, 9, 1), np.ones(5, dtype=int))
    with pytest.raises(ParameterError, match="beyond"):
        apply_peaks(base, [PeakEvent(5, 1)])


def test_peak_event_validation():
    with pytest.raises(ParameterError):
        PeakEvent(-1, 3)
    with pytest.raises(ParameterError):
        PeakEvent(1, -3)
    assert PeakEvent(2, 3) == PeakEvent(2, 3)


def test_synthetic_series_includes_canonical_peaks():
    plain = generate_poisson_series(4.0, 91, seed=0)
    peaked = synthetic_series(seed=0)
    delta = peaked.counts - plain.counts
    assert delta[20] == 30
    assert delta[50] == 40
    assert delta[80] == 50
    assert delta.sum() == 120


def test_case_series_validation():
    with pytest.raises(ParameterError, match="non-negative"):
        CaseSeries(dt.date(2020, 9, 1), np.array([1, -2]))
    with pytest.raises(ParameterError, match="whole"):
        CaseSeries(dt.date(2020, 9, 1), np.array([1.5]))
    with pytest.raises(ParameterError, match="at least one"):
        CaseSeries(dt.date(2020, 9, 1), np.array([], dtype=int))
    series = CaseSeries(dt.date(2020, 9, 1), np.array([3.0, 4.0]))
    assert series.counts.dtype == np.int64


def test_csv_roundtrip(tmp_path):
    series = synthetic_series(seed=3)
    path = tmp_path / "cases.csv"
    save_case_series(series, path)
    loaded = load_case_series(path)
    assert loaded == series
    assert loaded.dates()[0] == dt.date(2020, 9, 1)


def test_load_rejects_wrong_header(tmp_path):
    path = tmp_path / "cases.csv"
    path.write_text("day,n\n2020-09-01,4\n")
    with pytest.raises(IngestionError, match="columns"):
        load_case_series(path)


def test_load_rejects_bad_date(tmp_path):
    path = tmp_path / "cases.csv"
    path.write_text("date,count\n2020-09-01,4\nyesterday,5\n")
    with pytest.raises(IngestionError, match="row 3"):
        load_case_series(path)


def test_load_rejects_gap(tmp_path):
    path = tmp_path / "cases.csv"
    path.write_text("date,count\n2020-09-01,4\n2020-09-03,5\n")
    with pytest.raises(IngestionError, match="consecutive"):
        load_case_series(path)


def test_load_rejects_fractional_and_negative_counts(tmp_path):
    path = tmp_path / "cases.csv"
    path.write_text("date,count\n2020-09-01,4.5\n")
    with pytest.raises(IngestionError, match="row 2"):
        load_case_series(path)
    path.write_text("date,count\n2020-09-01,-2\n")
    with pytest.raises(IngestionError, match="non-negative"):
        load_case_series(path)


def test_load_rejects_empty(tmp_path):
    path = tmp_path / "cases.csv"
    path.write_text("date,count\n")
    with pytest.raises(IngestionError, match="no data"):
        load_case_series(path)


def test_load_missing_file(tmp_path):
    with pytest.raises(IngestionError, match="cannot read"):
        load_case_series(tmp_path / "absent.csv")
