import math

import numpy as np
import pytest
from scipy.stats import norm

from mertonsurf.errors import ArbitrageError
from mertonsurf.pricing import (
    BsmInputs,
    bsm_call,
    bsm_put,
    capital_structure,
    debt_value,
    norm_cdf,
    payoff_at_maturity,
)


def _inputs(v=100.0, k=100.0, r=0.0, sigma=0.2, t=1.0):
    return BsmInputs(v, k, r, sigma, t)


def _random_inputs(rng):
    return BsmInputs(
        underlying_value=rng.uniform(10.0, 1e4),
        strike=rng.uniform(1.0, 1.5e4),
        rate=rng.uniform(-0.02, 0.10),
        volatility=rng.uniform(0.01, 1.5),
        time_to_maturity=rng.uniform(0.02, 3.0),
    )


class TestNormCdf:
    @pytest.mark.parametrize("x", [-8.0, -3.0, -1.0, -0.1, 0.0, 0.1, 1.0, 3.0, 8.0])
    def test_matches_reference(self, x):
        assert abs(norm_cdf(x) - norm.cdf(x)) <= 1e-15

    def test_symmetry(self):
        for x in np.linspace(-5, 5, 41):
            assert norm_cdf(x) + norm_cdf(-x) == pytest.approx(1.0, abs=1e-15)


class TestPayoffAtMaturity:
    @pytest.mark.parametrize(
        "asset, face, expected",
        [
            (120.0, 100.0, (100.0, 20.0)),
            (80.0, 100.0, (80.0, 0.0)),
            (100.0, 100.0, (100.0, 0.0)),
        ],
    )
    def test_examples(self, asset, face, expected):
        assert payoff_at_maturity(asset, face) == expected

    def test_rejects_negative(self):
        with pytest.raises(ValueError):
            payoff_at_maturity(-1.0, 100.0)
        with pytest.raises(ValueError):
            payoff_at_maturity(100.0, -1.0)

    def test_payoffs_split_the_asset(self):
        rng = np.random.default_rng(3)
        for _ in range(200):
            asset = rng.uniform(0, 200)
            face = rng.uniform(0, 200)
            debt, equity = payoff_at_maturity(asset, face)
            assert debt + equity == pytest.approx(max(asset, min(asset, face) + equity))
            assert debt <= face and equity >= 0


class TestBsmCall:
    def test_zero_strike_is_underlying(self):
        assert bsm_call(_inputs(k=0.0, r=0.05)) == 100.0

    def test_tiny_vol_is_discounted_intrinsic(self):
        value = bsm_call(_inputs(k=90.0, sigma=1e-12))
        assert value == pytest.approx(10.0, abs=1e-8)

    def test_zero_vol_branch(self):
        assert bsm_call(_inputs(k=90.0, r=0.05, sigma=0.0)) == pytest.approx(
            100.0 - 90.0 * math.exp(-0.05), abs=1e-12
        )
        assert bsm_call(_inputs(k=200.0, sigma=0.0)) == 0.0

    def test_at_the_money_frozen_value(self):
        # independent numerical-integration oracle value, frozen
        assert bsm_call(_inputs()) == pytest.approx(7.965567, abs=1e-5)

    def test_validation(self):
        with pytest.raises(ValueError):
            BsmInputs(-1.0, 100.0, 0.0, 0.2, 1.0)
        with pytest.raises(ValueError):
            BsmInputs(100.0, 100.0, 0.0, -0.2, 1.0)
        with pytest.raises(ValueError):
            BsmInputs(100.0, 100.0, 0.0, 0.2, 0.0)


class TestBsmPut:
    def test_parity_at_the_money(self):
        assert bsm_put(_inputs()) == pytest.approx(7.965567, abs=1e-5)

    def test_zero_strike_put_is_worthless(self):
        assert bsm_put(_inputs(k=0.0, r=0.07, sigma=0.4)) == 0.0

    def test_tiny_vol_itm_call_side(self):
        assert bsm_put(_inputs(k=90.0, sigma=1e-12)) == pytest.approx(0.0, abs=1e-8)


class TestDebtValue:
    def test_from_frozen_call_value(self):
        assert debt_value(100.0, 7.965567) == pytest.approx(92.034433, abs=1e-6)

    def test_boundaries(self):
        assert debt_value(100.0, 0.0) == 100.0
        assert debt_value(100.0, 100.0) == 0.0

    def test_call_above_asset_rejected(self):
        with pytest.raises(ArbitrageError):
            debt_value(100.0, 100.5)
        with pytest.raises(ValueError):
            debt_value(100.0, -1.0)


def test_put_call_parity_randomized():
    rng = np.random.default_rng(42)
    for _ in range(10_000):
        inputs = _random_inputs(rng)
        call = bsm_call(inputs)
        put = bsm_put(inputs)
        forward = inputs.underlying_value - inputs.strike * math.exp(
            -inputs.rate * inputs.time_to_maturity
        )
        assert abs(call - put - forward) < 1e-9 * inputs.underlying_value


def test_no_arbitrage_bounds():
    rng = np.random.default_rng(1)
    for _ in range(2_000):
        inputs = _random_inputs(rng)
        call = bsm_call(inputs)
        intrinsic = max(
            inputs.underlying_value
            - inputs.strike * math.exp(-inputs.rate * inputs.time_to_maturity),
            0.0,
        )
        assert intrinsic - 1e-9 * inputs.underlying_value <= call
        assert call <= inputs.underlying_value * (1 + 1e-12)


def test_monotonicity_sweeps():
    sigmas = np.linspace(0.05, 1.5, 30)
    calls = [bsm_call(_inputs(sigma=s)) for s in sigmas]
    assert all(b >= a - 1e-12 for a, b in zip(calls, calls[1:]))

    underlyings = np.linspace(50, 150, 30)
    calls = [bsm_call(BsmInputs(v, 100.0, 0.02, 0.3, 1.0)) for v in underlyings]
    assert all(b >= a - 1e-12 for a, b in zip(calls, calls[1:]))

    strikes = np.linspace(50, 150, 30)
    calls = [bsm_call(BsmInputs(100.0, k, 0.02, 0.3, 1.0)) for k in strikes]
    assert all(b <= a + 1e-12 for a, b in zip(calls, calls[1:]))


def test_vega_positive_by_finite_difference():
    rng = np.random.default_rng(11)
    h = 1e-5
    for _ in range(300):
        inputs = _random_inputs(rng)
        if inputs.volatility < 2 * h:
            continue
        up = bsm_call(
            BsmInputs(
                inputs.underlying_value,
                inputs.strike,
                inputs.rate,
                inputs.volatility + h,
                inputs.time_to_maturity,
            )
        )
        down = bsm_call(
            BsmInputs(
                inputs.underlying_value,
                inputs.strike,
                inputs.rate,
                inputs.volatility - h,
                inputs.time_to_maturity,
            )
        )
        assert (up - down) / (2 * h) > 0


def test_capital_structure_identity():
    rng = np.random.default_rng(5)
    for _ in range(2_000):
        inputs = _random_inputs(rng)
        slice_ = capital_structure(inputs)
        assert slice_.equity_value + slice_.debt_value == pytest.approx(
            slice_.asset_value, rel=1e-9
        )
        # debt equals discounted face value net of the matching put
        lhs = slice_.debt_value
        rhs = slice_.discount_factor * inputs.strike - slice_.put_value
        assert lhs == pytest.approx(rhs, rel=1e-9, abs=1e-9 * inputs.underlying_value)
