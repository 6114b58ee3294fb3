"""Ingest, clean, and align option quotes, equity closes, and risk-free rates.

File formats are comma-separated text with a header row (ISO-8601 dates,
decimal points, no thousands separators):

    option chain: quote_date, expiry_date, strike, bid, ask, mid, vendor_iv
    close history: date, adjusted_close
    rates: date, annual_yield
    trading calendar: one ISO date per line

Cleaning rules: drop bids below $0.05 (strictly below; the boundary is
kept), drop maturities beyond 350 days, keep strikes inside the closed
band [0.10, 1.50] x spot, winsorize vendor implied vols at the
nearest-rank 99th percentile of the surviving set, and snap expiries to
the nearest trading day (earlier day on ties).
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from datetime import date
from enum import Enum
from pathlib import Path

from .errors import DataError, InsufficientDataError, SchemaError

logger = logging.getLogger(__name__)

BID_FLOOR = 0.05
MAX_MATURITY_DAYS = 350
STRIKE_BAND = (0.10, 1.50)
WINSOR_PERCENTILE = 99
DAYS_PER_YEAR = 365

CHAIN_COLUMNS = ("quote_date", "expiry_date", "strike", "bid", "ask", "mid")


class RateConvention(Enum):
    TO_DAILY_CONTINUOUS = "to_daily_continuous"


@dataclass(frozen=True)
class OptionQuote:
    quote_date: date
    expiry_date: date
    strike: float
    bid: float
    ask: float
    mid: float
    vendor_iv: float | None = None

    @property
    def maturity_days(self) -> int:
        return (self.expiry_date - self.quote_date).days


@dataclass(frozen=True)
class RejectRecord:
    """One refused input row: position, rule code, offending value."""

    row_number: int
    rule_code: str
    offending_value: str


@dataclass(frozen=True)
class ImputationRecord:
    """One filled rate: the date filled and the date the value came from."""

    filled_date: date
    source_date: date


@dataclass
class RateSeries:
    """Ordered date -> annualized rate map plus the log of every fill."""

    rates: dict[date, float]
    imputation_log: list[ImputationRecord] = field(default_factory=list)

    def dates(self) -> list[date]:
        return sorted(self.rates)


@dataclass
class CleaningReport:
    """Kept quotes plus per-rule counts; drops + kept always equal input."""

    kept: list[OptionQuote]
    dropped_bid_below_floor: int = 0
    dropped_maturity_above_cap: int = 0
    dropped_strike_outside_band: int = 0
    winsorized: int = 0
    snapped_expiries: int = 0

    @property
    def dropped_total(self) -> int:
        return (
            self.dropped_bid_below_floor
            + self.dropped_maturity_above_cap
            + self.dropped_strike_outside_band
        )

    def counts(self) -> dict[str, int]:
        return {
            "bid_below_floor": self.dropped_bid_below_floor,
            "maturity_above_cap": self.dropped_maturity_above_cap,
            "strike_outside_band": self.dropped_strike_outside_band,
            "winsorized": self.winsorized,
            "snapped_expiries": self.snapped_expiries,
        }


@dataclass
class MarketSnapshot:
    """Cleaned inputs for one calibration date.

    close_history and rates cover the same window dates after imputation
    (equal lengths by construction). Rates are stored as annualized
    continuously-compounded values.
    """

    as_of: date
    equity_close: float
    close_history: list[tuple[date, float]]
    quotes: list[OptionQuote]
    rates: RateSeries
    asset_value_assumption: float = 1e12

    def rate_on(self, day: date) -> float:
        return self.rates.rates[day]


@dataclass
class SnapshotBuild:
    snapshot: MarketSnapshot
    rejects: list[RejectRecord]
    cleaning: CleaningReport
    excluded_close_dates: list[date]


def _parse_date(text: str) -> date:
    return date.fromisoformat(text.strip())


def load_option_chain(path: str | Path) -> tuple[list[OptionQuote], list[RejectRecord]]:
    """Parse a chain file into quotes; malformed rows become rejects.

    Mandatory columns are quote_date, expiry_date, strike, bid, ask, mid;
    vendor_iv is optional (blank cells give quotes without a vendor IV).
    A missing mandatory column raises SchemaError naming it.
    """
    path = Path(path)
    with path.open(newline="") as handle:
        reader = csv.DictReader(handle)
        if reader.fieldnames is None:
            logger.warning("option chain file %s is empty", path)
            return [], []
        fields = [name.strip() for name in reader.fieldnames]
        for column in CHAIN_COLUMNS:
            if column not in fields:
                raise SchemaError(f"option chain file missing column: {column}")
        has_vendor_iv = "vendor_iv" in fields

        quotes: list[OptionQuote] = []
        rejects: list[RejectRecord] = []
        for row_number, row in enumerate(reader, start=2):
            try:
                quote_date = _parse_date(row["quote_date"])
                expiry_date = _parse_date(row["expiry_date"])
            except (ValueError, TypeError):
                rejects.append(
                    RejectRecord(row_number, "PARSE_DATE", str(row.get("quote_date")))
                )
                continue
            try:
                strike = float(row["strike"])
                bid = float(row["bid"])
                ask = float(row["ask"])
                mid_raw = (row.get("mid") or "").strip()
                mid = float(mid_raw) if mid_raw else 0.5 * (bid + ask)
            except (ValueError, TypeError):
                rejects.append(
                    RejectRecord(row_number, "PARSE_NUMBER", str(row.get("strike")))
                )
                continue
            vendor_iv = None
            if has_vendor_iv:
                iv_raw = (row.get("vendor_iv") or "").strip()
                if iv_raw:
                    try:
                        vendor_iv = float(iv_raw)
                    except ValueError:
                        rejects.append(RejectRecord(row_number, "PARSE_NUMBER", iv_raw))
                        continue
            if expiry_date < quote_date:
                rejects.append(
                    RejectRecord(
                        row_number, "EXPIRY_BEFORE_QUOTE", expiry_date.isoformat()
                    )
                )
                continue
            if bid < 0 or ask < 0:
                rejects.append(RejectRecord(row_number, "NEGATIVE_PRICE", str(min(bid, ask))))
                continue
            if ask < bid:
                rejects.append(RejectRecord(row_number, "ASK_BELOW_BID", str(ask)))
                continue
            quotes.append(
                OptionQuote(quote_date, expiry_date, strike, bid, ask, mid, vendor_iv)
            )
        if not quotes and not rejects:
            logger.warning("option chain file %s has a header but no rows", path)
        return quotes, rejects


def nearest_rank_percentile(values: list[float], percentile: float) -> float:
    """Nearest-rank percentile: the ceil(p/100 * n)-th smallest value."""
    if not values:
        raise ValueError("cannot take a percentile of an empty list")
    ordered = sorted(values)
    rank = math.ceil(percentile / 100.0 * len(ordered))
    return ordered[max(rank, 1) - 1]


def _snap_to_calendar(day: date, calendar: list[date]) -> date:
    # Nearest trading day, earlier date on ties.
    best = min(calendar, key=lambda c: (abs((c - day).days), c))
    return best


def clean_quotes(
    quotes: list[OptionQuote],
    spot: float,
    calendar: list[date] | None = None,
) -> CleaningReport:
    """Apply the cleaning rules in order; total (never raises).

    Rules: bid floor, maturity cap, strike band, vendor-IV winsorization
    on the post-filter set, expiry snapping against the supplied trading
    calendar (skipped when no calendar is given).
    """
    if not spot > 0:
        raise ValueError(f"spot must be > 0, got {spot}")
    report = CleaningReport(kept=[])
    survivors: list[OptionQuote] = []
    for quote in quotes:
        if quote.bid < BID_FLOOR:
            report.dropped_bid_below_floor += 1
            continue
        if quote.maturity_days > MAX_MATURITY_DAYS:
            report.dropped_maturity_above_cap += 1
            continue
        if not STRIKE_BAND[0] * spot <= quote.strike <= STRIKE_BAND[1] * spot:
            report.dropped_strike_outside_band += 1
            continue
        survivors.append(quote)

    vols = [q.vendor_iv for q in survivors if q.vendor_iv is not None]
    cap = nearest_rank_percentile(vols, WINSOR_PERCENTILE) if vols else None

    for quote in survivors:
        vendor_iv = quote.vendor_iv
        if cap is not None and vendor_iv is not None and vendor_iv > cap:
            vendor_iv = cap
            report.winsorized += 1
        expiry = quote.expiry_date
        if calendar:
            snapped = _snap_to_calendar(expiry, calendar)
            if snapped != expiry:
                report.snapped_expiries += 1
                expiry = snapped
        if vendor_iv is not quote.vendor_iv or expiry != quote.expiry_date:
            quote = OptionQuote(
                quote.quote_date, expiry, quote.strike, quote.bid, quote.ask,
                quote.mid, vendor_iv,
            )
        report.kept.append(quote)
    return report


def impute_rates(rates: RateSeries, required_dates: list[date]) -> RateSeries:
    """Fill every required date from the nearest date with data.

    Missing dates take the value of the nearest available day, earlier
    date winning ties (no look-ahead preference); every fill is logged.
    The output domain is exactly required_dates.
    """
    if not rates.rates:
        raise DataError("cannot impute from an empty rate series")
    available = sorted(rates.rates)
    filled: dict[date, float] = {}
    log: list[ImputationRecord] = []
    for day in sorted(required_dates):
        if day in rates.rates:
            filled[day] = rates.rates[day]
            continue
        source = min(available, key=lambda c: (abs((c - day).days), c))
        filled[day] = rates.rates[source]
        log.append(ImputationRecord(filled_date=day, source_date=source))
    return RateSeries(rates=filled, imputation_log=log)


def convert_rate(
    annual_yield: float,
    convention: RateConvention = RateConvention.TO_DAILY_CONTINUOUS,
) -> float:
    """Daily continuously-compounded equivalent of an annual simple yield.

    r_daily = ln(1 + y) / 365, so exp(365 * r_daily) - 1 round-trips to y.
    """
    if convention is not RateConvention.TO_DAILY_CONTINUOUS:
        raise ValueError(f"unknown convention {convention}")
    if annual_yield <= -1:
        raise ValueError(f"annual_yield must exceed -1, got {annual_yield}")
    return math.log1p(annual_yield) / DAYS_PER_YEAR


def load_close_history(path: str | Path) -> tuple[list[tuple[date, float]], list[date]]:
    """Read (date, adjusted_close) rows; dates with no close are excluded."""
    path = Path(path)
    closes: list[tuple[date, float]] = []
    excluded: list[date] = []
    with path.open(newline="") as handle:
        reader = csv.DictReader(handle)
        if reader.fieldnames is None:
            raise SchemaError(f"close history file {path} is empty")
        for column in ("date", "adjusted_close"):
            if column not in reader.fieldnames:
                raise SchemaError(f"close history file missing column: {column}")
        for row in reader:
            day = _parse_date(row["date"])
            raw = (row.get("adjusted_close") or "").strip()
            if not raw:
                excluded.append(day)
                continue
            closes.append((day, float(raw)))
    closes.sort(key=lambda item: item[0])
    return closes, excluded


def load_rate_file(path: str | Path) -> dict[date, float]:
    """Read (date, annual_yield) rows into a raw yield map."""
    path = Path(path)
    yields: dict[date, float] = {}
    with path.open(newline="") as handle:
        reader = csv.DictReader(handle)
        if reader.fieldnames is None:
            raise SchemaError(f"rate file {path} is empty")
        for column in ("date", "annual_yield"):
            if column not in reader.fieldnames:
                raise SchemaError(f"rate file missing column: {column}")
        for row in reader:
            raw = (row.get("annual_yield") or "").strip()
            if not raw:
                continue
            yields[_parse_date(row["date"])] = float(raw)
    return yields


def load_calendar(path: str | Path) -> list[date]:
    """Read a trading calendar, one ISO date per line."""
    days = []
    for line in Path(path).read_text().splitlines():
        line = line.strip()
        if line:
            days.append(date.fromisoformat(line))
    return sorted(days)


def build_snapshot(
    chain_file: str | Path,
    close_file: str | Path,
    rate_file: str | Path,
    *,
    window_length: int,
    asset_value: float = 1e12,
    calendar: list[date] | None = None,
) -> SnapshotBuild:
    """Compose loading, cleaning, and alignment into one MarketSnapshot.

    The window is the last window_length close dates after excluding
    days with missing closes; raw yields are imputed onto exactly those
    dates (nearest day, earlier ties) and then converted to annualized
    continuously-compounded rates, so closes and rates have equal length.
    """
    closes, excluded = load_close_history(close_file)
    if len(closes) < window_length:
        raise InsufficientDataError(
            f"only {len(closes)} usable closes, window needs {window_length}"
        )
    window = closes[-window_length:]
    window_dates = [day for day, _ in window]

    raw_yields = load_rate_file(rate_file)
    if not raw_yields:
        raise DataError(f"rate file {rate_file} holds no usable rates")
    imputed = impute_rates(RateSeries(rates=raw_yields), window_dates)
    annualized = {
        day: convert_rate(value) * DAYS_PER_YEAR
        for day, value in imputed.rates.items()
    }
    rates = RateSeries(rates=annualized, imputation_log=imputed.imputation_log)

    as_of, equity_close = window[-1]
    quotes, rejects = load_option_chain(chain_file)
    cleaning = clean_quotes(quotes, spot=equity_close, calendar=calendar)

    snapshot = MarketSnapshot(
        as_of=as_of,
        equity_close=equity_close,
        close_history=window,
        quotes=cleaning.kept,
        rates=rates,
        asset_value_assumption=asset_value,
    )
    return SnapshotBuild(
        snapshot=snapshot,
        rejects=rejects,
        cleaning=cleaning,
        excluded_close_dates=excluded,
    )


def write_rejects_report(rejects: list[RejectRecord], path: str | Path) -> None:
    """Write the rejects report: input row number, rule code, offending value."""
    with Path(path).open("w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["row_number", "rule_code", "offending_value"])
        for record in rejects:
            writer.writerow([record.row_number, record.rule_code, record.offending_value])
