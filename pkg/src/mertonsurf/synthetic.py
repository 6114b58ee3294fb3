"""Deterministic synthetic market fixtures built from known ground truth.

The real February 2025 snapshot behind the reference surfaces is not
distributable, so this generator substitutes a desk-scale fixture whose
chain, closes, and rates are produced by the toolkit's own forward
models. Ground truth is written alongside the files so round-trip tests
can assert recovery:

* equity option quotes are closed-form call prices at one true
  volatility, so the equity-vol surface must come back flat;
* the closes observed one designated maturity before the window end are
  binomial tree prices at a true drift (probability fixed) or a true
  up-probability (drift fixed), so the drift and probability
  calibrations must recover them at the designated cells.

Drift recovery needs one more care: the kink-free tree price is
symmetric around a price-maximizing drift, so the fixture config caps
the drift search below that hump (see the ledger of the generated
ground_truth.json). A second, tiny fixture mirrors the five published
reference closes for the snapshot-construction tests.

Everything is seeded; identical seeds give byte-identical files.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from datetime import date, timedelta
from pathlib import Path

import numpy as np

from .calibration import CalibrationTarget, implied_asset_vol
from .market_data import DAYS_PER_YEAR, RateSeries, convert_rate, impute_rates
from .pricing import BsmInputs, bsm_call
from .tree import QConvention, ReturnMode, TreeParams, tree_call_price

TABLE1_CLOSES = (
    (date(2025, 2, 7), 6025.99),
    (date(2025, 2, 10), 6066.44),
    (date(2025, 2, 11), 6068.50),
    (date(2025, 2, 12), 6051.97),
    (date(2025, 2, 13), 6115.07),
)


@dataclass(frozen=True)
class SyntheticParams:
    as_of: date = date(2025, 2, 13)
    window_length: int = 120
    asset_value: float = 1e4
    annual_yield: float = 0.0433
    sigma_true: float = 0.2
    mu_true: float = 0.02
    p_true: float = 0.35
    fixed_mu: float = 0.08
    # asset-vol lookup column and the reference maturity that anchors S0
    lookup_moneyness: float = 0.95
    anchor_maturity_days: int = 30
    drift_maturities: tuple[int, ...] = (15, 25, 35)
    prob_maturities: tuple[int, ...] = (10, 20, 30)
    designated_moneyness: float = 0.5
    equity_moneyness: tuple[float, ...] = (0.90, 0.95, 1.00, 1.05, 1.10)
    equity_maturities: tuple[int, ...] = (30, 60, 90)
    # drift search is capped below the price-maximizing hump
    mu_bounds: tuple[float, float] = (-2.0, 0.03)


def _fmt(x: float) -> str:
    return "%.10g" % x


def generate_fixture(
    outdir: str | Path, seed: int, params: SyntheticParams = SyntheticParams()
) -> dict[str, Path]:
    """Write the full fixture set into outdir and return the paths."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    p = params

    # one close per calendar day; the maturity axis then counts both
    # calendar days and window positions identically
    window_dates = [
        p.as_of - timedelta(days=p.window_length - 1 - k)
        for k in range(p.window_length)
    ]
    calendar_dates = [
        window_dates[0] + timedelta(days=k)
        for k in range(p.window_length + 120)
    ]

    rate_dates = [d for k, d in enumerate(window_dates) if k % 17 != 3 or d == p.as_of]
    yields = {
        d: round(p.annual_yield + 0.0002 * math.sin(k / 11.0), 6)
        for k, d in enumerate(window_dates)
        if d in set(rate_dates)
    }
    # replicate the ingestion path so generated targets match what the
    # pipeline will see after imputation and conversion
    imputed = impute_rates(RateSeries(rates=dict(yields)), window_dates)
    cc_rates = {
        d: convert_rate(y) * DAYS_PER_YEAR for d, y in imputed.rates.items()
    }
    r_as_of = cc_rates[p.as_of]

    # equity spot anchored so the lookup column inverts to sigma_true at
    # the anchor maturity; other maturities then invert to nearby values
    spot = round(
        bsm_call(
            BsmInputs(
                underlying_value=p.asset_value,
                strike=p.lookup_moneyness * p.asset_value,
                rate=r_as_of,
                volatility=p.sigma_true,
                time_to_maturity=p.anchor_maturity_days / DAYS_PER_YEAR,
            )
        ),
        6,
    )

    lookup_maturities = sorted(set(p.drift_maturities) | set(p.prob_maturities))

    def sigma_lookup(days: int) -> float:
        target = CalibrationTarget(
            observed_price=spot,
            underlying_value=p.asset_value,
            strike=p.lookup_moneyness * p.asset_value,
            maturity=days / DAYS_PER_YEAR,
            rate=r_as_of,
        )
        return implied_asset_vol(target).fitted_value

    def designated_close(days: int, mu: float, up_probability: float) -> float:
        quote = tree_call_price(
            p.asset_value,
            p.designated_moneyness * p.asset_value,
            TreeParams(
                drift=mu,
                volatility=sigma_lookup(days),
                up_probability=up_probability,
                rate=cc_rates[window_dates[p.window_length - 1 - days]],
                step_years=1.0 / DAYS_PER_YEAR,
                steps=days,
                return_mode=ReturnMode.LOG,
                q_convention=QConvention.CLOSED_FORM,
            ),
        )
        return round(quote.value, 6)

    overrides: dict[int, float] = {}
    for days in p.drift_maturities:
        overrides[p.window_length - 1 - days] = designated_close(days, p.mu_true, 0.5)
    for days in p.prob_maturities:
        overrides[p.window_length - 1 - days] = designated_close(
            days, p.fixed_mu, p.p_true
        )

    closes = []
    level = 5000.0
    for k, d in enumerate(window_dates):
        level *= 1.0 + 0.0005 * float(rng.standard_normal())
        value = overrides.get(k, round(level, 6))
        if d == p.as_of:
            value = spot
        closes.append((d, value))

    # equity chain: exact closed-form quotes plus rows each cleaning rule
    # must drop, and one oversized vendor IV to winsorize
    chain_rows: list[tuple[date, date, float, float, float, float, float | None]] = []
    for days in p.equity_maturities:
        expiry = p.as_of + timedelta(days=days)
        for j, m in enumerate(p.equity_moneyness):
            strike = round(m * spot, 6)
            mid = bsm_call(
                BsmInputs(
                    underlying_value=spot,
                    strike=strike,
                    rate=r_as_of,
                    volatility=p.sigma_true,
                    time_to_maturity=days / DAYS_PER_YEAR,
                )
            )
            vendor_iv = p.sigma_true
            if days == p.equity_maturities[0] and j == 0:
                vendor_iv = 10.0  # winsorized back to the 99th percentile
            chain_rows.append(
                (p.as_of, expiry, strike, round(mid * 0.99, 6), round(mid * 1.01, 6),
                 round(mid, 6), vendor_iv)
            )
    chain_rows.append(  # bid below the floor
        (p.as_of, p.as_of + timedelta(days=30), round(1.49 * spot, 6), 0.03, 0.05, 0.04, p.sigma_true)
    )
    chain_rows.append(  # beyond the maturity cap
        (p.as_of, p.as_of + timedelta(days=400), round(spot, 6), 10.0, 11.0, 10.5, p.sigma_true)
    )
    chain_rows.append(  # below the strike band
        (p.as_of, p.as_of + timedelta(days=30), round(0.05 * spot, 6), 10.0, 11.0, 10.5, p.sigma_true)
    )
    chain_rows.append(  # above the strike band
        (p.as_of, p.as_of + timedelta(days=30), round(1.60 * spot, 6), 10.0, 11.0, 10.5, p.sigma_true)
    )

    paths: dict[str, Path] = {}

    def write(name: str, text: str) -> None:
        target = outdir / name
        target.write_text(text)
        paths[name] = target

    write(
        "calendar.txt",
        "\n".join(d.isoformat() for d in calendar_dates) + "\n",
    )
    write(
        "closes.csv",
        "date,adjusted_close\n"
        + "\n".join(f"{d.isoformat()},{_fmt(v)}" for d, v in closes)
        + "\n",
    )
    write(
        "rates.csv",
        "date,annual_yield\n"
        + "\n".join(f"{d.isoformat()},{_fmt(yields[d])}" for d in rate_dates)
        + "\n",
    )
    write(
        "chain.csv",
        "quote_date,expiry_date,strike,bid,ask,mid,vendor_iv\n"
        + "\n".join(
            f"{qd.isoformat()},{ed.isoformat()},{_fmt(k)},{_fmt(b)},{_fmt(a)},{_fmt(m)},"
            + ("" if iv is None else _fmt(iv))
            for qd, ed, k, b, a, m, iv in chain_rows
        )
        + "\n",
    )

    lookup_axis = ",".join(str(d) for d in lookup_maturities)
    write(
        "config.cfg",
        "\n".join(
            [
                "# synthetic fixture configuration",
                "chain = chain.csv",
                "closes = closes.csv",
                "rates = rates.csv",
                "calendar = calendar.txt",
                f"asset_value = {_fmt(p.asset_value)}",
                f"window_length = {p.window_length}",
                f"fixed_mu = {_fmt(p.fixed_mu)}",
                "fixed_p = 0.5",
                f"vol_lookup_moneyness = {_fmt(p.lookup_moneyness)}",
                "tree_mode = log",
                "q_convention = closed_form",
                "steps_per_day = 1",
                f"mu_min = {_fmt(p.mu_bounds[0])}",
                f"mu_max = {_fmt(p.mu_bounds[1])}",
                f"asset_moneyness = {_fmt(p.lookup_moneyness)}",
                f"asset_maturities = {lookup_axis}",
                "equity_moneyness = " + ",".join(_fmt(m) for m in p.equity_moneyness),
                "equity_maturities = " + ",".join(str(d) for d in p.equity_maturities),
                f"drift_moneyness = {_fmt(p.designated_moneyness)}",
                "drift_maturities = " + ",".join(str(d) for d in p.drift_maturities),
                f"prob_moneyness = {_fmt(p.designated_moneyness)},0.9",
                "prob_maturities = " + ",".join(str(d) for d in p.prob_maturities),
                "monitor_moneyness = 0.9",
                "monitor_maturity_days = 30",
                "heatmap = true",
            ]
        )
        + "\n",
    )

    ground_truth = {
        "seed": seed,
        "as_of": p.as_of.isoformat(),
        "asset_value": p.asset_value,
        "equity_close": spot,
        "annual_yield_base": p.annual_yield,
        "rate_as_of": r_as_of,
        "sigma_true": p.sigma_true,
        "mu_true": p.mu_true,
        "p_true": p.p_true,
        "fixed_mu": p.fixed_mu,
        "lookup_moneyness": p.lookup_moneyness,
        "designated_moneyness": p.designated_moneyness,
        "drift_maturities": list(p.drift_maturities),
        "prob_maturities": list(p.prob_maturities),
        "equity_moneyness": list(p.equity_moneyness),
        "equity_maturities": list(p.equity_maturities),
        "mu_bounds": list(p.mu_bounds),
        "sigma_lookup": {str(d): sigma_lookup(d) for d in lookup_maturities},
        "note": (
            "drift search capped at mu_max below the price-maximizing drift "
            "r + sigma^2/3 so the kink-free tree price is one-to-one on the "
            "search interval"
        ),
    }
    write("ground_truth.json", json.dumps(ground_truth, indent=2, sort_keys=True) + "\n")

    _write_table1_fixture(outdir, paths)
    return paths


def _write_table1_fixture(outdir: Path, paths: dict[str, Path]) -> None:
    """Five-close reference fixture with a gappy rate file."""
    dates = [d for d, _ in TABLE1_CLOSES]

    def write(name: str, text: str) -> None:
        target = outdir / name
        target.write_text(text)
        paths[name] = target

    write(
        "closes_table1.csv",
        "date,adjusted_close\n"
        + "\n".join(f"{d.isoformat()},{_fmt(v)}" for d, v in TABLE1_CLOSES)
        + "\n",
    )
    # yields only on three of five days; imputation must fill the rest
    write(
        "rates_table1.csv",
        "date,annual_yield\n"
        + "\n".join(
            f"{d.isoformat()},0.0433" for d in (dates[0], dates[2], dates[4])
        )
        + "\n",
    )
    write(
        "chain_table1.csv",
        "quote_date,expiry_date,strike,bid,ask,mid,vendor_iv\n",
    )
    write("calendar_table1.txt", "\n".join(d.isoformat() for d in dates) + "\n")
    r_cc = convert_rate(0.0433) * DAYS_PER_YEAR
    write(
        "config_table1.cfg",
        "\n".join(
            [
                "# five-close reference fixture: asset value fixed at 1e12",
                "chain = chain_table1.csv",
                "closes = closes_table1.csv",
                "rates = rates_table1.csv",
                "calendar = calendar_table1.txt",
                "asset_value = 1e12",
                "window_length = 5",
                "asset_moneyness = 0.1:0.9:0.2",
                "asset_maturities = 7,14,30",
                # probability task: drift pinned to the risk-free rate so the
                # risk-neutral probability stays feasible at every cell
                f"fixed_mu = {_fmt(r_cc)}",
                "vol_lookup_moneyness = 0.9",
                "prob_moneyness = 0.5,0.9",
                "prob_maturities = 1,2,3",
                "heatmap = false",
            ]
        )
        + "\n",
    )
