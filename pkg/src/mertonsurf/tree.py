"""Recombining binomial tree under the physical measure.

The per-step returns carry the physical drift and up-probability,

    U = mu * dt + sigma * sqrt((1 - p) / p) * sqrt(dt)
    D = mu * dt - sigma * sqrt(p / (1 - p)) * sqrt(dt)

so that the per-step physical mean is mu * dt and the variance is
sigma^2 * dt exactly. Pricing discounts expected values under a
risk-neutral up probability q, for which the module supports two
conventions:

CLOSED_FORM (default)
    q = p - theta * sqrt(p * (1 - p) * dt) with theta = (mu - r) / sigma.
    This is the exact one-period no-arbitrage probability for arithmetic
    returns (u = 1 + U, d = 1 + D, R = 1 + r * dt) and its first-order
    form for log returns. It keeps the explicit physical-to-risk-neutral
    parameter mapping, which is what the implied-drift and
    implied-probability calibrations invert: under it the (kink-free)
    tree price is a smooth, informative function of mu and p.

MARTINGALE
    q = (R - d) / (u - d) per mode. Discounted prices are then exact
    one-period martingales in both modes, and the log-mode lattice
    converges to the closed-form call value as steps grow, for any
    feasible (mu, p). Use this convention for convergence studies.

The two coincide exactly in ARITHMETIC mode. See the README for why both
exist: the closed-form mapping applied to exponentiated returns carries a
persistent growth bias of order sigma^2 * T / 2 and therefore cannot
converge to the closed-form price.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import NamedTuple

import numpy as np

from .errors import NegativePriceError, RiskNeutralInfeasibleError

MAX_TREE_STEPS = 20_000
MAX_ENUM_STEPS = 22


class ReturnMode(Enum):
    ARITHMETIC = "arithmetic"
    LOG = "log"


class QConvention(Enum):
    CLOSED_FORM = "closed_form"
    MARTINGALE = "martingale"


@dataclass(frozen=True)
class TreeParams:
    """Everything that determines a recombining binomial tree.

    drift: annualized physical mean return (mu)
    volatility: annualized, > 0
    up_probability: physical per-step up probability, in (0, 1)
    rate: annualized continuously-compounded risk-free rate
    step_years: length of one step in years (dt = T / steps)
    steps: number of steps, >= 1
    return_mode: ARITHMETIC (u = 1 + U) or LOG (u = exp(U))
    q_convention: risk-neutral probability convention (module docstring)
    """

    drift: float
    volatility: float
    up_probability: float
    rate: float
    step_years: float
    steps: int
    return_mode: ReturnMode = ReturnMode.LOG
    q_convention: QConvention = QConvention.CLOSED_FORM

    def __post_init__(self):
        if not self.volatility > 0:
            raise ValueError(f"volatility must be > 0, got {self.volatility}")
        if not 0 < self.up_probability < 1:
            raise ValueError(
                f"up_probability must be in (0, 1), got {self.up_probability}"
            )
        if not self.step_years > 0:
            raise ValueError(f"step_years must be > 0, got {self.step_years}")
        if self.steps < 1:
            raise ValueError(f"steps must be >= 1, got {self.steps}")


class StepReturns(NamedTuple):
    U: float
    D: float
    u: float
    d: float
    R: float


@dataclass(frozen=True)
class RiskNeutralStep:
    q: float
    theta: float
    gross_rate: float


@dataclass(frozen=True)
class TreeDiagnostics:
    q: float
    theta: float
    U: float
    D: float


@dataclass(frozen=True)
class TreeQuote:
    value: float
    steps_used: int
    mode: ReturnMode
    diagnostics: TreeDiagnostics


def derive_step_returns(params: TreeParams) -> StepReturns:
    """Per-step returns (U, D) and growth factors (u, d, R) for the tree.

    U > D always holds. In ARITHMETIC mode a down return D <= -1 would
    produce non-positive prices and is rejected.
    """
    mu, sigma, p, dt = (
        params.drift,
        params.volatility,
        params.up_probability,
        params.step_years,
    )
    sqrt_dt = math.sqrt(dt)
    U = mu * dt + sigma * math.sqrt((1.0 - p) / p) * sqrt_dt
    D = mu * dt - sigma * math.sqrt(p / (1.0 - p)) * sqrt_dt
    if params.return_mode is ReturnMode.ARITHMETIC:
        if D <= -1.0:
            raise NegativePriceError(
                f"arithmetic down return D={D} <= -1 gives a non-positive price"
            )
        u, d, R = 1.0 + U, 1.0 + D, 1.0 + params.rate * dt
    else:
        u, d, R = math.exp(U), math.exp(D), math.exp(params.rate * dt)
    return StepReturns(U=U, D=D, u=u, d=d, R=R)


def derive_risk_neutral(params: TreeParams) -> RiskNeutralStep:
    """Risk-neutral up probability and risk-reward ratio for one step.

    Raises RiskNeutralInfeasibleError (carrying the offending q) when q
    leaves [0, 1]; callers that calibrate treat that as an infinite
    objective penalty rather than clamping.
    """
    theta = (params.drift - params.rate) / params.volatility
    sr = derive_step_returns(params)
    if params.q_convention is QConvention.CLOSED_FORM:
        p, dt = params.up_probability, params.step_years
        q = p - theta * math.sqrt(p * (1.0 - p) * dt)
    else:
        q = (sr.R - sr.d) / (sr.u - sr.d)
    if not 0.0 <= q <= 1.0:
        raise RiskNeutralInfeasibleError(q)
    return RiskNeutralStep(q=q, theta=theta, gross_rate=sr.R)


def tree_call_price(asset0: float, strike: float, params: TreeParams) -> TreeQuote:
    """European call value by backward induction over the recombining lattice.

    Node (k, j) holds asset0 * u^j * d^(k - j); each step discounts the
    risk-neutral expectation by R. Induction reuses a single value row,
    so memory is O(steps).
    """
    if not asset0 > 0:
        raise ValueError(f"asset0 must be > 0, got {asset0}")
    if strike < 0:
        raise ValueError(f"strike must be >= 0, got {strike}")
    if params.steps > MAX_TREE_STEPS:
        raise ValueError(
            f"steps={params.steps} exceeds the overflow guard ({MAX_TREE_STEPS})"
        )
    sr = derive_step_returns(params)
    rn = derive_risk_neutral(params)
    n, q = params.steps, rn.q
    log_u, log_d = math.log(sr.u), math.log(sr.d)
    j = np.arange(n + 1)
    leaves = asset0 * np.exp(j * log_u + (n - j) * log_d)
    values = np.maximum(leaves - strike, 0.0)
    for _ in range(n):
        values = (q * values[1:] + (1.0 - q) * values[:-1]) / sr.R
    return TreeQuote(
        value=float(values[0]),
        steps_used=n,
        mode=params.return_mode,
        diagnostics=TreeDiagnostics(q=q, theta=rn.theta, U=sr.U, D=sr.D),
    )


def enumerate_paths_price(asset0: float, strike: float, params: TreeParams) -> float:
    """Brute-force oracle: sum the payoff over all 2^n up/down paths.

    Each path with k up moves carries weight q^k (1 - q)^(n - k); the sum
    is discounted by R^n. Must match tree_call_price to 1e-10 relative.
    Refused above MAX_ENUM_STEPS steps (combinatorial blowup).
    """
    if params.steps > MAX_ENUM_STEPS:
        raise ValueError(
            f"steps={params.steps} exceeds the path enumeration limit ({MAX_ENUM_STEPS})"
        )
    sr = derive_step_returns(params)
    rn = derive_risk_neutral(params)
    n, q = params.steps, rn.q
    paths = np.arange(2**n, dtype=np.uint32)
    ups = np.zeros(paths.shape, dtype=np.int64)
    for bit in range(n):
        ups += (paths >> bit) & 1
    terminal = asset0 * sr.u**ups * sr.d ** (n - ups)
    payoff = np.maximum(terminal - strike, 0.0)
    weights = q**ups * (1.0 - q) ** (n - ups)
    return float(np.sum(weights * payoff) / sr.R**n)


def physical_step_moments(params: TreeParams) -> tuple[float, float]:
    """Per-step mean and variance of the return under the physical measure.

    Algebraically these equal mu * dt and sigma^2 * dt; the computed
    values are returned so tests can compare against that identity.
    """
    sr = derive_step_returns(params)
    p = params.up_probability
    mean = p * sr.U + (1.0 - p) * sr.D
    variance = p * (1.0 - p) * (sr.U - sr.D) ** 2
    return mean, variance


def lattice_node_count(steps: int) -> int:
    """Number of distinct nodes in a recombining lattice of the given depth."""
    return (steps + 1) * (steps + 2) // 2
