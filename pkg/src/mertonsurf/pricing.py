"""Closed-form structural pricing: terminal payoffs, call/put values, debt.

Equity is priced as a European call on the firm's asset value with strike
equal to the face value of debt; debt is the asset value less that call.
All values are plain floats (double precision); at index scale rounding
is immaterial, so no fixed-point money type is used.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import ArbitrageError

_SQRT2 = math.sqrt(2.0)


def norm_cdf(x: float) -> float:
    """Standard normal CDF.

    Computed as erfc(-x / sqrt(2)) / 2 using the C library's erfc, which
    is accurate to below 1e-15 absolute error across the real line and
    keeps precision in the left tail where 1 + erf would cancel.
    """
    return 0.5 * math.erfc(-x / _SQRT2)


@dataclass(frozen=True)
class BsmInputs:
    """Inputs to the closed-form call/put formulas.

    underlying_value: current asset (or equity) value, > 0
    strike: face value of debt or option strike, >= 0 (0 degenerates the
        call to the underlying itself)
    rate: annualized continuously-compounded risk-free rate
    volatility: annualized, >= 0
    time_to_maturity: years, > 0
    """

    underlying_value: float
    strike: float
    rate: float
    volatility: float
    time_to_maturity: float

    def __post_init__(self):
        if not self.underlying_value > 0:
            raise ValueError(f"underlying_value must be > 0, got {self.underlying_value}")
        if self.strike < 0:
            raise ValueError(f"strike must be >= 0, got {self.strike}")
        if self.volatility < 0:
            raise ValueError(f"volatility must be >= 0, got {self.volatility}")
        if not self.time_to_maturity > 0:
            raise ValueError(f"time_to_maturity must be > 0, got {self.time_to_maturity}")


@dataclass(frozen=True)
class CapitalStructureSlice:
    """One date's decomposition of asset value into equity and debt.

    Satisfies asset_value = equity_value + debt_value and
    debt_value = discount_factor * strike - put_value by construction.
    """

    asset_value: float
    equity_value: float
    debt_value: float
    put_value: float
    discount_factor: float


def payoff_at_maturity(asset_terminal: float, face_value: float) -> tuple[float, float]:
    """Terminal payoffs (debt, equity) for asset value against debt face value.

    Debt holders receive min(face_value, asset_terminal); equity holders
    keep the residual max(asset_terminal - face_value, 0) under limited
    liability.
    """
    if asset_terminal < 0:
        raise ValueError(f"asset_terminal must be >= 0, got {asset_terminal}")
    if face_value < 0:
        raise ValueError(f"face_value must be >= 0, got {face_value}")
    debt = min(face_value, asset_terminal)
    equity = max(asset_terminal - face_value, 0.0)
    return debt, equity


def bsm_call(inputs: BsmInputs) -> float:
    """European call value for the given inputs.

    The sigma = 0 limit returns the discounted intrinsic value and a zero
    strike returns the underlying, both analytic limits of the formula.
    """
    v, k = inputs.underlying_value, inputs.strike
    r, sigma, t = inputs.rate, inputs.volatility, inputs.time_to_maturity
    if k == 0.0:
        return v
    if sigma == 0.0:
        return max(v - k * math.exp(-r * t), 0.0)
    sig_sqrt_t = sigma * math.sqrt(t)
    d1 = (math.log(v / k) + (r + 0.5 * sigma * sigma) * t) / sig_sqrt_t
    d2 = d1 - sig_sqrt_t
    return v * norm_cdf(d1) - k * math.exp(-r * t) * norm_cdf(d2)


def bsm_put(inputs: BsmInputs) -> float:
    """European put value, defined through put-call parity.

    put = call - underlying + strike * exp(-rate * T), so parity holds
    exactly by construction.
    """
    k, r, t = inputs.strike, inputs.rate, inputs.time_to_maturity
    return bsm_call(inputs) - inputs.underlying_value + k * math.exp(-r * t)


def debt_value(asset_value: float, call_value: float) -> float:
    """Debt as asset value minus the equity call value."""
    if call_value < 0:
        raise ValueError(f"call_value must be >= 0, got {call_value}")
    if call_value > asset_value:
        raise ArbitrageError(
            f"call value {call_value} exceeds asset value {asset_value}"
        )
    return asset_value - call_value


def capital_structure(inputs: BsmInputs) -> CapitalStructureSlice:
    """Assemble the full equity/debt decomposition at the given inputs."""
    call = bsm_call(inputs)
    put = bsm_put(inputs)
    return CapitalStructureSlice(
        asset_value=inputs.underlying_value,
        equity_value=call,
        debt_value=debt_value(inputs.underlying_value, call),
        put_value=put,
        discount_factor=math.exp(-inputs.rate * inputs.time_to_maturity),
    )
