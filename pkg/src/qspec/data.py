"""Return panel ingestion: CSV parsing, missing codes, excess returns, calendars."""

from __future__ import annotations

import csv
import datetime as dt
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

DEFAULT_MISSING_CODES = (-99.99, -999.0)
DEFAULT_MIN_PERIODS = 360


class DataError(ValueError):
    """Raised for malformed or unusable input files."""


@dataclass(frozen=True)
class ReturnSeries:
    """Time-indexed returns in percent per period.

    ``dates`` are integer period labels (YYYYMM or YYYYMMDD); missing periods
    are simply absent.
    """

    id: str
    dates: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        dates = np.asarray(self.dates, dtype=np.int64)
        values = np.asarray(self.values, dtype=float)
        if dates.shape != values.shape or dates.ndim != 1:
            raise DataError(f"{self.id}: dates and values must be 1-D of equal length")
        if dates.size > 1 and np.any(np.diff(dates) <= 0):
            raise DataError(f"{self.id}: dates must be strictly increasing")
        dates.setflags(write=False)
        values.setflags(write=False)
        object.__setattr__(self, "dates", dates)
        object.__setattr__(self, "values", values)

    def __len__(self):
        return self.values.size

    def restrict(self, dates: np.ndarray) -> "ReturnSeries":
        """Keep only the periods in ``dates``."""
        keep = np.isin(self.dates, dates)
        return ReturnSeries(self.id, self.dates[keep], self.values[keep])

    def equals(self, other: "ReturnSeries") -> bool:
        return (
            self.id == other.id
            and np.array_equal(self.dates, other.dates)
            and np.array_equal(self.values, other.values)
        )


@dataclass(frozen=True)
class ReturnPanel:
    """Aligned cross-section of excess returns plus the market.

    ``assets`` and ``market`` hold excess returns. ``raw_assets`` and
    ``raw_market`` keep the values as read, so that ``raw - riskfree``
    reproduces the excess values cell by cell.
    """

    assets: tuple
    market: ReturnSeries
    riskfree: ReturnSeries
    raw_assets: tuple = field(default=(), repr=False)
    raw_market: ReturnSeries | None = field(default=None, repr=False)
    frequency: str = "monthly"

    @property
    def dates(self) -> np.ndarray:
        return self.market.dates

    @property
    def asset_ids(self) -> list[str]:
        return [a.id for a in self.assets]

    def __len__(self):
        return len(self.market)

    def asset(self, asset_id: str) -> ReturnSeries:
        for a in self.assets:
            if a.id == asset_id:
                return a
        raise KeyError(asset_id)

    def select(self, asset_ids: Iterable[str]) -> "ReturnPanel":
        wanted = list(asset_ids)
        idx = [self.asset_ids.index(a) for a in wanted]
        raw = tuple(self.raw_assets[i] for i in idx) if self.raw_assets else ()
        return ReturnPanel(
            tuple(self.assets[i] for i in idx), self.market, self.riskfree,
            raw, self.raw_market, self.frequency,
        )

    def equals(self, other: "ReturnPanel") -> bool:
        if len(self.assets) != len(other.assets):
            return False
        return (
            all(a.equals(b) for a, b in zip(self.assets, other.assets))
            and self.market.equals(other.market)
            and self.riskfree.equals(other.riskfree)
        )


def parse_date(text: str, frequency: str) -> int:
    """Validate and convert a YYYYMM / YYYYMMDD label to int."""
    s = text.strip()
    width = 6 if frequency == "monthly" else 8
    if len(s) != width or not s.isdigit():
        raise DataError(f"malformed {frequency} date {text!r}")
    year, month = int(s[:4]), int(s[4:6])
    if not 1 <= month <= 12:
        raise DataError(f"malformed {frequency} date {text!r}: month {month}")
    if frequency == "daily":
        try:
            dt.date(year, month, int(s[6:8]))
        except ValueError as exc:
            raise DataError(f"malformed daily date {text!r}: {exc}") from None
    return int(s)


def _is_missing(value: float, missing_codes: Sequence[float]) -> bool:
    return any(math.isclose(value, code, rel_tol=0.0, abs_tol=1e-9) for code in missing_codes)


def read_table(path, frequency: str, missing_codes: Sequence[float] = DEFAULT_MISSING_CODES):
    """Read a date-first CSV into (header, dates, matrix with NaN for missing).

    Blank cells are treated as missing. Any other non-numeric cell is an error.
    """
    path = Path(path)
    if frequency not in ("monthly", "daily"):
        raise DataError(f"unknown frequency {frequency!r}")
    with path.open(newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
    if not rows:
        raise DataError(f"{path}: empty file")
    header = [h.strip() for h in rows[0]]
    if len(header) < 2:
        raise DataError(f"{path}: header must name a date column and at least one series")
    ncol = len(header) - 1
    dates = []
    data = np.full((len(rows) - 1, ncol), np.nan)
    for i, row in enumerate(rows[1:]):
        lineno = i + 2
        if len(row) != len(header):
            raise DataError(f"{path}:{lineno}: expected {len(header)} cells, got {len(row)}")
        try:
            dates.append(parse_date(row[0], frequency))
        except DataError as exc:
            raise DataError(f"{path}:{lineno}: {exc}") from None
        for j, cell in enumerate(row[1:]):
            cell = cell.strip()
            if not cell:
                continue
            try:
                value = float(cell)
            except ValueError:
                raise DataError(f"{path}:{lineno}: non-numeric cell {cell!r} in column {header[j + 1]!r}") from None
            if not np.isfinite(value) or _is_missing(value, missing_codes):
                continue
            data[i, j] = value
    dates = np.asarray(dates, dtype=np.int64)
    if dates.size > 1 and np.any(np.diff(dates) <= 0):
        raise DataError(f"{path}: dates must be strictly increasing without duplicates")
    return header, dates, data


def load_panel(
    portfolio_csv,
    market_csv,
    frequency: str = "monthly",
    missing_codes: Sequence[float] = DEFAULT_MISSING_CODES,
    min_length: int | None = None,
) -> ReturnPanel:
    """Load asset returns and the market/risk-free file into an excess-return panel.

    The market file has columns ``date, mkt, rf`` holding the raw market
    return and the risk-free rate, both in percent. Dates where either is
    missing are dropped for the whole panel; an asset missing at a date is
    dropped for that asset only.
    """
    header, pdates, pdata = read_table(portfolio_csv, frequency, missing_codes)
    mheader, mdates, mdata = read_table(market_csv, frequency, missing_codes)
    cols = [c.lower() for c in mheader[1:]]
    try:
        mkt_col, rf_col = cols.index("mkt"), cols.index("rf")
    except ValueError:
        raise DataError(f"{market_csv}: market file needs columns 'mkt' and 'rf', got {mheader[1:]}") from None

    mkt, rf = mdata[:, mkt_col], mdata[:, rf_col]
    ok = np.isfinite(mkt) & np.isfinite(rf)
    calendar = np.intersect1d(mdates[ok], pdates)
    if calendar.size == 0:
        raise DataError("asset and market files share no dates")
    if min_length is not None and calendar.size < min_length:
        raise DataError(f"aligned calendar has {calendar.size} periods, need at least {min_length}")

    mpos = np.searchsorted(mdates, calendar)
    ppos = np.searchsorted(pdates, calendar)
    rf_cal = rf[mpos]
    raw_market = ReturnSeries("mkt", calendar, mkt[mpos])
    riskfree = ReturnSeries("rf", calendar, rf_cal)
    market = ReturnSeries("mkt", calendar, mkt[mpos] - rf_cal)

    assets, raw_assets = [], []
    for j, name in enumerate(header[1:]):
        col = pdata[ppos, j]
        have = np.isfinite(col)
        raw_assets.append(ReturnSeries(name, calendar[have], col[have]))
        assets.append(ReturnSeries(name, calendar[have], col[have] - rf_cal[have]))
    return ReturnPanel(tuple(assets), market, riskfree, tuple(raw_assets), raw_market, frequency)


def write_panel(panel: ReturnPanel, portfolio_csv, market_csv, missing_code: float = -99.99):
    """Write the raw panel back in the input format (asset file + market file)."""
    if not panel.raw_assets or panel.raw_market is None:
        raise DataError("panel has no raw values to write")
    cal = panel.dates
    with Path(portfolio_csv).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["date"] + [a.id for a in panel.raw_assets])
        lookup = [dict(zip(a.dates.tolist(), a.values.tolist())) for a in panel.raw_assets]
        for d in cal.tolist():
            w.writerow([d] + [repr(col[d]) if d in col else repr(missing_code) for col in lookup])
    with Path(market_csv).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["date", "mkt", "rf"])
        for d, m, r in zip(cal.tolist(), panel.raw_market.values.tolist(), panel.riskfree.values.tolist()):
            w.writerow([d, repr(m), repr(r)])


def align_panel(panel: ReturnPanel) -> ReturnPanel:
    """Restrict every member series to the market calendar."""
    cal = panel.dates
    return ReturnPanel(
        tuple(a.restrict(cal) for a in panel.assets),
        panel.market,
        panel.riskfree.restrict(cal),
        tuple(a.restrict(cal) for a in panel.raw_assets),
        panel.raw_market.restrict(cal) if panel.raw_market is not None else None,
        panel.frequency,
    )


def filter_min_history(panel: ReturnPanel, min_periods: int) -> ReturnPanel:
    """Drop assets with fewer than ``min_periods`` observations (boundary kept)."""
    if min_periods < 1:
        raise ValueError("min_periods must be >= 1")
    keep = [a.id for a in panel.assets if len(a) >= min_periods]
    return panel.select(keep)


def aggregate_daily_to_monthly(series: ReturnSeries) -> ReturnSeries:
    """Compound daily percent returns into monthly percent returns."""
    if series.dates.size and series.dates.min() < 10_000_000:
        raise DataError(f"{series.id}: expected daily YYYYMMDD dates")
    months = series.dates // 100
    labels, start = np.unique(months, return_index=True)
    gross = 1.0 + series.values / 100.0
    out = np.array([np.prod(g) - 1.0 for g in np.split(gross, start[1:])]) * 100.0
    return ReturnSeries(series.id, labels, out)


def load_series(path, column: str, frequency: str,
                missing_codes: Sequence[float] = DEFAULT_MISSING_CODES) -> ReturnSeries:
    """Read one named column of a date-first CSV as a series."""
    header, dates, data = read_table(path, frequency, missing_codes)
    lower = [h.lower() for h in header[1:]]
    if column.lower() not in lower:
        raise DataError(f"{path}: no column {column!r}")
    col = data[:, lower.index(column.lower())]
    ok = np.isfinite(col)
    return ReturnSeries(column, dates[ok], col[ok])


def load_daily_excess_market(path, missing_codes: Sequence[float] = DEFAULT_MISSING_CODES) -> ReturnSeries:
    """Daily market excess returns from a ``date, mkt, rf`` file."""
    mkt = load_series(path, "mkt", "daily", missing_codes)
    rf = load_series(path, "rf", "daily", missing_codes)
    common, im, ir = np.intersect1d(mkt.dates, rf.dates, return_indices=True)
    return ReturnSeries("mkt", common, mkt.values[im] - rf.values[ir])


def load_factors(path, frequency: str, names: Sequence[str] = ("mkt", "smb", "hml"),
                 missing_codes: Sequence[float] = DEFAULT_MISSING_CODES) -> dict[str, ReturnSeries]:
    """Load factor return columns (percent) keyed by lower-case name."""
    return {n.lower(): load_series(path, n, frequency, missing_codes) for n in names}
