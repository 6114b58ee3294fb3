"""Bounded scalar calibrations of squared relative pricing error.

Four inversions share one deterministic minimizer: implied asset
volatility and implied equity volatility invert the closed-form call,
implied drift and implied up-probability invert the binomial tree with
all other parameters held fixed. Infeasible tree evaluations (risk-
neutral probability outside [0, 1]) contribute an infinite penalty and
are never clamped.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Mapping, NamedTuple

from .errors import CalibrationInfeasibleError, NanObjectiveError, RiskNeutralInfeasibleError
from .pricing import BsmInputs, bsm_call
from .tree import QConvention, ReturnMode, TreeParams, tree_call_price

SIGMA_BOUNDS = (1e-4, 5.0)
MU_BOUNDS = (-5.0, 5.0)
P_BOUNDS = (0.01, 0.99)
# Tighter than the mu/p tolerance so a recovered sigma reproduces the
# target price to a squared relative error below 1e-16.
SIGMA_TOL = 1e-10
MU_TOL = 1e-6
P_TOL = 1e-6
SCAN_POINTS = 64

# Relative sensitivity below this marks a cell as unreliable for recovery.
LOW_SENSITIVITY_THRESHOLD = 1e-8

_INVPHI = (math.sqrt(5.0) - 1.0) / 2.0


class MinimizeResult(NamedTuple):
    argmin: float
    value: float
    iterations: int
    boundary_hit: bool


@dataclass(frozen=True)
class CalibrationTarget:
    """One observed price plus everything held fixed while fitting.

    observed_price: market or generated price the model must match, > 0
    underlying_value: asset value V0 or equity spot S0 per context
    strike: option strike / debt face value
    maturity: years to maturity
    rate: annualized continuously-compounded risk-free rate
    fixed_params: parameters frozen during the search; tree calibrations
        read sigma, steps, step_years, mode, q_convention plus the fixed
        p (drift fit) or fixed mu (probability fit) from here.
    """

    observed_price: float
    underlying_value: float
    strike: float
    maturity: float
    rate: float
    fixed_params: Mapping[str, object] = field(default_factory=dict)

    def __post_init__(self):
        if not self.observed_price > 0:
            raise ValueError(f"observed_price must be > 0, got {self.observed_price}")
        if not self.maturity > 0:
            raise ValueError(f"maturity must be > 0, got {self.maturity}")


@dataclass(frozen=True)
class CalibrationResult:
    """Fitted scalar plus diagnostics.

    objective: squared relative pricing error at the solution
    iterations: objective evaluations spent
    boundary_hit: solution sits at a search bound (ill-posed or pinned)
    sensitivity: finite-difference derivative of the model price with
        respect to the fitted parameter at the solution
    feasible: risk-neutral feasibility held at the solution (tree fits;
        closed-form fits are always feasible)
    low_sensitivity: |sensitivity| is negligible relative to the target,
        so the fitted value should not be read as a recovery
    """

    fitted_value: float
    objective: float
    iterations: int
    boundary_hit: bool
    sensitivity: float
    feasible: bool = True
    low_sensitivity: bool = False


def minimize_scalar(
    objective: Callable[[float], float],
    bounds: tuple[float, float],
    tol: float,
    scan_points: int = SCAN_POINTS,
) -> MinimizeResult:
    """Deterministic bracketing minimizer: coarse scan, then golden section.

    The scan covers the interval (endpoints included) on an even grid;
    golden-section search then refines around the best scanned point,
    tracking the best point seen anywhere. For unimodal objectives the
    argmin is within tol of the true minimizer; otherwise it is the best
    point reachable from the deterministic scan grid. Points may return
    +inf (infeasible); NaN raises NanObjectiveError with the abscissa.
    """
    lo, hi = bounds
    if hi < lo:
        raise ValueError(f"empty bounds [{lo}, {hi}]")
    if not tol > 0:
        raise ValueError(f"tol must be > 0, got {tol}")

    evaluations = 0

    def f(x: float) -> float:
        nonlocal evaluations
        value = objective(x)
        evaluations += 1
        if math.isnan(value):
            raise NanObjectiveError(x)
        return value

    if hi == lo:
        return MinimizeResult(lo, f(lo), evaluations, True)

    xs = [lo + (hi - lo) * i / (scan_points - 1) for i in range(scan_points)]
    fs = [f(x) for x in xs]
    best_index = min(range(scan_points), key=lambda i: (fs[i], i))
    best_x, best_f = xs[best_index], fs[best_index]

    a = xs[max(best_index - 1, 0)]
    b = xs[min(best_index + 1, scan_points - 1)]
    x1 = b - _INVPHI * (b - a)
    x2 = a + _INVPHI * (b - a)
    f1, f2 = f(x1), f(x2)
    while b - a > tol:
        if f1 < f2:
            b, x2, f2 = x2, x1, f1
            x1 = b - _INVPHI * (b - a)
            f1 = f(x1)
        else:
            a, x1, f1 = x1, x2, f2
            x2 = a + _INVPHI * (b - a)
            f2 = f(x2)
        for x, v in ((x1, f1), (x2, f2)):
            if v < best_f:
                best_x, best_f = x, v

    edge = max(tol, (hi - lo) * 1e-12)
    boundary_hit = best_x - lo <= edge or hi - best_x <= edge
    return MinimizeResult(best_x, best_f, evaluations, boundary_hit)


def _relative_objective(model: Callable[[float], float], observed: float):
    def objective(x: float) -> float:
        try:
            price = model(x)
        except RiskNeutralInfeasibleError:
            return math.inf
        return ((price - observed) / observed) ** 2

    return objective


def _sensitivity(
    model: Callable[[float], float],
    x: float,
    bounds: tuple[float, float],
    step: float = 1e-5,
) -> float:
    """Finite-difference price derivative at x, one-sided near bounds.

    Infeasible neighbors fall back to the other side; if no neighbor is
    evaluable the sensitivity is reported as 0.
    """
    lo, hi = bounds
    up = min(x + step, hi)
    down = max(x - step, lo)

    def safe(v: float) -> float | None:
        try:
            return model(v)
        except (RiskNeutralInfeasibleError, ValueError):
            return None

    f_up = safe(up) if up > x else None
    f_down = safe(down) if down < x else None
    if f_up is not None and f_down is not None:
        return (f_up - f_down) / (up - down)
    center = safe(x)
    if center is None:
        return 0.0
    if f_up is not None:
        return (f_up - center) / (up - x)
    if f_down is not None:
        return (center - f_down) / (x - down)
    return 0.0


def _calibrate(
    model: Callable[[float], float],
    target: CalibrationTarget,
    bounds: tuple[float, float],
    tol: float,
    scan_points: int,
) -> CalibrationResult:
    objective = _relative_objective(model, target.observed_price)
    result = minimize_scalar(objective, bounds, tol, scan_points)
    if math.isinf(result.value):
        raise CalibrationInfeasibleError(
            f"no feasible point on [{bounds[0]}, {bounds[1]}]"
        )
    sensitivity = _sensitivity(model, result.argmin, bounds)
    low = abs(sensitivity) <= LOW_SENSITIVITY_THRESHOLD * max(
        1.0, target.observed_price
    )
    return CalibrationResult(
        fitted_value=result.argmin,
        objective=result.value,
        iterations=result.iterations,
        boundary_hit=result.boundary_hit,
        sensitivity=sensitivity,
        feasible=True,
        low_sensitivity=low,
    )


def _bsm_model(target: CalibrationTarget) -> Callable[[float], float]:
    def model(sigma: float) -> float:
        return bsm_call(
            BsmInputs(
                underlying_value=target.underlying_value,
                strike=target.strike,
                rate=target.rate,
                volatility=sigma,
                time_to_maturity=target.maturity,
            )
        )

    return model


def implied_asset_vol(
    target: CalibrationTarget,
    bounds: tuple[float, float] = SIGMA_BOUNDS,
    tol: float = SIGMA_TOL,
    scan_points: int = SCAN_POINTS,
) -> CalibrationResult:
    """Volatility making the asset-value call match the observed equity price.

    When the intrinsic value already exceeds the target no zero of the
    objective exists; the constrained argmin is still returned, flagged
    boundary_hit with a positive residual, so downstream surfaces can
    mask the cell rather than trust it.
    """
    return _calibrate(_bsm_model(target), target, bounds, tol, scan_points)


def implied_equity_vol(
    target: CalibrationTarget,
    bounds: tuple[float, float] = SIGMA_BOUNDS,
    tol: float = SIGMA_TOL,
    scan_points: int = SCAN_POINTS,
) -> CalibrationResult:
    """Volatility making the equity call match an observed option quote.

    Same objective as implied_asset_vol with the equity spot as the
    underlying; quotes are expected to have passed market-data cleaning.
    """
    return _calibrate(_bsm_model(target), target, bounds, tol, scan_points)


def _tree_model(
    target: CalibrationTarget, fitted: str
) -> Callable[[float], float]:
    fixed = target.fixed_params
    sigma = float(fixed["sigma"])
    steps = int(fixed.get("steps", max(1, round(target.maturity * 365))))
    step_years = float(fixed.get("step_years", target.maturity / steps))
    mode = fixed.get("mode", ReturnMode.LOG)
    q_convention = fixed.get("q_convention", QConvention.CLOSED_FORM)

    def model(x: float) -> float:
        if fitted == "drift":
            mu, p = x, float(fixed.get("p", 0.5))
        else:
            mu, p = float(fixed.get("mu", 0.08)), x
        params = TreeParams(
            drift=mu,
            volatility=sigma,
            up_probability=p,
            rate=target.rate,
            step_years=step_years,
            steps=steps,
            return_mode=mode,
            q_convention=q_convention,
        )
        return tree_call_price(target.underlying_value, target.strike, params).value

    return model


def implied_drift(
    target: CalibrationTarget,
    bounds: tuple[float, float] = MU_BOUNDS,
    tol: float = MU_TOL,
    scan_points: int = SCAN_POINTS,
) -> CalibrationResult:
    """Physical drift making the tree price match the observed price.

    The up-probability stays fixed (fixed_params["p"], default 0.5) and
    the volatility comes from fixed_params["sigma"]. Regions where the
    risk-neutral probability leaves [0, 1] contribute an infinite
    penalty; an entirely infeasible interval raises
    CalibrationInfeasibleError.

    The price-drift map need not be globally one-to-one: for kink-free
    trees it is symmetric around a price-maximizing drift, so two drifts
    can reproduce the same target exactly. Callers that need recovery
    rather than price-matching should restrict the bounds to one
    monotone branch.
    """
    return _calibrate(_tree_model(target, "drift"), target, bounds, tol, scan_points)


def implied_up_probability(
    target: CalibrationTarget,
    bounds: tuple[float, float] = P_BOUNDS,
    tol: float = P_TOL,
    scan_points: int = SCAN_POINTS,
) -> CalibrationResult:
    """Physical up-probability making the tree price match the observed price.

    The drift stays fixed (fixed_params["mu"], default 0.08). The
    downside probability is the complement 1 - fitted_value; surface
    assembly derives it cellwise.
    """
    return _calibrate(
        _tree_model(target, "up_probability"), target, bounds, tol, scan_points
    )
