"""Structural credit calibration toolkit.

Treats equity as a call on firm assets, inverts the closed-form pricer
for asset and equity volatility surfaces, and inverts a physical-measure
binomial tree for implied drift and downside-probability surfaces plus a
credit-stress signal.
"""

from .calibration import (
    CalibrationResult,
    CalibrationTarget,
    implied_asset_vol,
    implied_drift,
    implied_equity_vol,
    implied_up_probability,
    minimize_scalar,
)
from .market_data import (
    MarketSnapshot,
    OptionQuote,
    RateSeries,
    build_snapshot,
    clean_quotes,
    convert_rate,
    impute_rates,
    load_option_chain,
)
from .pricing import (
    BsmInputs,
    CapitalStructureSlice,
    bsm_call,
    bsm_put,
    capital_structure,
    debt_value,
    norm_cdf,
    payoff_at_maturity,
)
from .stress import Action, StressSignal, classify_signal, signal_series, stress_metric
from .surfaces import (
    CalibrationSettings,
    ExportFormat,
    SurfaceGrid,
    SurfaceKind,
    build_surface,
    complement_surface,
    diff_surface,
    export_surface,
    read_records,
    relative_diff_surface,
)
from .tree import (
    QConvention,
    ReturnMode,
    TreeParams,
    TreeQuote,
    derive_risk_neutral,
    derive_step_returns,
    enumerate_paths_price,
    physical_step_moments,
    tree_call_price,
)

__version__ = "0.1.0"

__all__ = [
    "Action",
    "BsmInputs",
    "CalibrationResult",
    "CalibrationSettings",
    "CalibrationTarget",
    "CapitalStructureSlice",
    "ExportFormat",
    "MarketSnapshot",
    "OptionQuote",
    "QConvention",
    "RateSeries",
    "ReturnMode",
    "StressSignal",
    "SurfaceGrid",
    "SurfaceKind",
    "TreeParams",
    "TreeQuote",
    "bsm_call",
    "bsm_put",
    "build_snapshot",
    "build_surface",
    "capital_structure",
    "classify_signal",
    "clean_quotes",
    "complement_surface",
    "convert_rate",
    "debt_value",
    "derive_risk_neutral",
    "derive_step_returns",
    "diff_surface",
    "enumerate_paths_price",
    "export_surface",
    "implied_asset_vol",
    "implied_drift",
    "implied_equity_vol",
    "implied_up_probability",
    "impute_rates",
    "load_option_chain",
    "minimize_scalar",
    "norm_cdf",
    "payoff_at_maturity",
    "physical_step_moments",
    "read_records",
    "relative_diff_surface",
    "signal_series",
    "stress_metric",
    "tree_call_price",
]
