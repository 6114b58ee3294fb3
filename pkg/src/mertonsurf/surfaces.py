"""Assemble calibration results into (moneyness, maturity) surfaces.

A surface stores one fitted value, one residual (the squared relative
pricing error at the solution), and a tuple of flag codes per cell.
Cells are always stored, even when flagged; masking is a presentation
choice, not data loss. Derived surfaces (differences, complements)
propagate flags from every contributing cell.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Iterable

import numpy as np

from .calibration import (
    CalibrationResult,
    CalibrationTarget,
    implied_asset_vol,
    implied_drift,
    implied_equity_vol,
    implied_up_probability,
)
from .errors import CalibrationInfeasibleError, DataError, DependencyError
from .market_data import DAYS_PER_YEAR, MarketSnapshot
from .tree import QConvention, ReturnMode

FLAG_BOUNDARY = "boundary"
FLAG_INFEASIBLE = "infeasible"
FLAG_LOW_SENSITIVITY = "low_sens"
FLAG_NO_QUOTE = "no_quote"
FLAG_NO_TARGET = "no_target"
FLAG_ZERO_DENOM = "zero_denom"


class SurfaceKind(Enum):
    ASSET_VOL = "ASSET_VOL"
    EQUITY_VOL = "EQUITY_VOL"
    DRIFT = "DRIFT"
    UP_PROB = "UP_PROB"
    DOWNSIDE_PROB = "DOWNSIDE_PROB"
    DIFF = "DIFF"
    REL_DIFF = "REL_DIFF"


_VOL_KINDS = {SurfaceKind.ASSET_VOL, SurfaceKind.EQUITY_VOL}


@dataclass
class SurfaceGrid:
    """Values over a (moneyness, maturity-days) grid with provenance.

    values, residuals, and flags share the shape
    (len(maturity_days), len(moneyness)); both axes are strictly
    increasing. metadata carries free-form provenance echoed into every
    export header.
    """

    moneyness: np.ndarray
    maturity_days: np.ndarray
    values: np.ndarray
    residuals: np.ndarray
    flags: list[list[tuple[str, ...]]]
    kind: SurfaceKind
    metadata: dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        self.moneyness = np.asarray(self.moneyness, dtype=float)
        self.maturity_days = np.asarray(self.maturity_days, dtype=int)
        self.values = np.asarray(self.values, dtype=float)
        self.residuals = np.asarray(self.residuals, dtype=float)
        if self.moneyness.size == 0 or self.maturity_days.size == 0:
            raise ValueError("surface axes must be nonempty")
        if np.any(np.diff(self.moneyness) <= 0):
            raise ValueError("moneyness axis must be strictly increasing")
        if np.any(np.diff(self.maturity_days) <= 0):
            raise ValueError("maturity axis must be strictly increasing")
        expected = (self.maturity_days.size, self.moneyness.size)
        for name, array in (("values", self.values), ("residuals", self.residuals)):
            if array.shape != expected:
                raise ValueError(f"{name} shape {array.shape} != axes shape {expected}")
        if len(self.flags) != expected[0] or any(len(row) != expected[1] for row in self.flags):
            raise ValueError("flags shape does not match axes")
        if self.kind in (SurfaceKind.UP_PROB, SurfaceKind.DOWNSIDE_PROB):
            finite = self.values[np.isfinite(self.values)]
            if finite.size and (finite.min() < 0.0 or finite.max() > 1.0):
                raise ValueError(f"{self.kind.value} values must lie in [0, 1]")

    def shape(self) -> tuple[int, int]:
        return self.values.shape

    def nearest_cell(self, moneyness: float, maturity_days: float) -> tuple[int, int, bool]:
        """Indices of the nearest cell and whether the hit was exact."""
        j = int(np.argmin(np.abs(self.moneyness - moneyness)))
        i = int(np.argmin(np.abs(self.maturity_days - maturity_days)))
        exact = (
            math.isclose(float(self.moneyness[j]), moneyness, rel_tol=0, abs_tol=1e-12)
            and float(self.maturity_days[i]) == maturity_days
        )
        return i, j, exact

    def value_at(self, moneyness: float, maturity_days: float) -> float:
        i, j, _ = self.nearest_cell(moneyness, maturity_days)
        return float(self.values[i, j])


@dataclass(frozen=True)
class CalibrationSettings:
    """Knobs shared by every surface build (defaults match the CLI)."""

    sigma_bounds: tuple[float, float] = (1e-4, 5.0)
    mu_bounds: tuple[float, float] = (-5.0, 5.0)
    p_bounds: tuple[float, float] = (0.01, 0.99)
    sigma_tol: float = 1e-10
    mu_tol: float = 1e-6
    p_tol: float = 1e-6
    scan_points: int = 64
    fixed_p: float = 0.5
    fixed_mu: float = 0.08
    vol_lookup_moneyness: float = 0.01
    tree_mode: ReturnMode = ReturnMode.LOG
    q_convention: QConvention = QConvention.CLOSED_FORM
    steps_per_day: float = 1.0
    strike_match_tol: float = 1e-6


def _result_flags(result: CalibrationResult) -> tuple[str, ...]:
    flags = []
    if result.boundary_hit:
        flags.append(FLAG_BOUNDARY)
    if not result.feasible:
        flags.append(FLAG_INFEASIBLE)
    if result.low_sensitivity:
        flags.append(FLAG_LOW_SENSITIVITY)
    return tuple(flags)


def _tree_steps(days: int, settings: CalibrationSettings) -> tuple[int, float]:
    steps = max(1, round(days * settings.steps_per_day))
    step_years = (days / DAYS_PER_YEAR) / steps
    return steps, step_years


def _quote_lookup(snapshot: MarketSnapshot):
    by_days: dict[int, list] = {}
    for quote in snapshot.quotes:
        by_days.setdefault(quote.maturity_days, []).append(quote)
    return by_days


def build_surface(
    snapshot: MarketSnapshot,
    moneyness: Iterable[float],
    maturity_days: Iterable[int],
    kind: SurfaceKind,
    settings: CalibrationSettings = CalibrationSettings(),
    vol_surface: SurfaceGrid | None = None,
) -> SurfaceGrid:
    """Run one calibration per grid cell and collect the results.

    ASSET_VOL and DRIFT/UP_PROB strike at moneyness x asset value; the
    EQUITY_VOL strike is moneyness x equity spot, matched against the
    cleaned chain. DRIFT and UP_PROB price against the close observed
    one maturity before the window end and therefore need both enough
    close history and a previously calibrated ASSET_VOL surface for the
    volatility lookup (nearest grid point on the configured column).
    Cells without a usable target or quote are flagged, not dropped.
    Evaluation order is row-major and the build is deterministic.
    """
    m_axis = np.asarray(sorted(set(float(m) for m in moneyness)), dtype=float)
    t_axis = np.asarray(sorted(set(int(t) for t in maturity_days)), dtype=int)
    if m_axis.size == 0 or t_axis.size == 0:
        raise ValueError("surface axes must be nonempty")
    if kind in (SurfaceKind.DRIFT, SurfaceKind.UP_PROB) and vol_surface is None:
        raise DependencyError(f"{kind.value} surface requires an ASSET_VOL surface")
    if kind is SurfaceKind.DOWNSIDE_PROB:
        up = build_surface(snapshot, m_axis, t_axis, SurfaceKind.UP_PROB, settings, vol_surface)
        return complement_surface(up)
    if kind in (SurfaceKind.DIFF, SurfaceKind.REL_DIFF):
        raise ValueError(f"{kind.value} surfaces are derived, not calibrated")

    values = np.full((t_axis.size, m_axis.size), np.nan)
    residuals = np.full((t_axis.size, m_axis.size), np.nan)
    flags: list[list[tuple[str, ...]]] = [
        [() for _ in range(m_axis.size)] for _ in range(t_axis.size)
    ]

    quotes_by_days = _quote_lookup(snapshot) if kind is SurfaceKind.EQUITY_VOL else {}
    spot = snapshot.equity_close
    asset_value = snapshot.asset_value_assumption
    rate_as_of = snapshot.rate_on(snapshot.as_of)
    history = snapshot.close_history

    for i, days in enumerate(t_axis):
        for j, m in enumerate(m_axis):
            maturity_years = days / DAYS_PER_YEAR
            if kind is SurfaceKind.ASSET_VOL:
                target = CalibrationTarget(
                    observed_price=spot,
                    underlying_value=asset_value,
                    strike=m * asset_value,
                    maturity=maturity_years,
                    rate=rate_as_of,
                )
                result = implied_asset_vol(
                    target, settings.sigma_bounds, settings.sigma_tol, settings.scan_points
                )
            elif kind is SurfaceKind.EQUITY_VOL:
                strike = m * spot
                candidates = quotes_by_days.get(int(days), [])
                quote = min(
                    candidates, key=lambda q: abs(q.strike - strike), default=None
                )
                if quote is None or abs(quote.strike - strike) > settings.strike_match_tol * spot:
                    flags[i][j] = (FLAG_NO_QUOTE,)
                    continue
                target = CalibrationTarget(
                    observed_price=quote.mid,
                    underlying_value=spot,
                    strike=quote.strike,
                    maturity=maturity_years,
                    rate=rate_as_of,
                )
                result = implied_equity_vol(
                    target, settings.sigma_bounds, settings.sigma_tol, settings.scan_points
                )
            else:  # DRIFT or UP_PROB
                offset = len(history) - 1 - int(days)
                if offset < 0:
                    flags[i][j] = (FLAG_NO_TARGET,)
                    continue
                obs_date, obs_close = history[offset]
                sigma = _lookup_vol(vol_surface, settings.vol_lookup_moneyness, int(days))
                steps, step_years = _tree_steps(int(days), settings)
                fixed: dict[str, object] = {
                    "sigma": sigma,
                    "steps": steps,
                    "step_years": step_years,
                    "mode": settings.tree_mode,
                    "q_convention": settings.q_convention,
                }
                target = CalibrationTarget(
                    observed_price=obs_close,
                    underlying_value=asset_value,
                    strike=m * asset_value,
                    maturity=maturity_years,
                    rate=snapshot.rate_on(obs_date),
                    fixed_params=fixed,
                )
                try:
                    if kind is SurfaceKind.DRIFT:
                        fixed["p"] = settings.fixed_p
                        result = implied_drift(
                            target, settings.mu_bounds, settings.mu_tol, settings.scan_points
                        )
                    else:
                        fixed["mu"] = settings.fixed_mu
                        result = implied_up_probability(
                            target, settings.p_bounds, settings.p_tol, settings.scan_points
                        )
                except CalibrationInfeasibleError:
                    flags[i][j] = (FLAG_INFEASIBLE,)
                    residuals[i, j] = math.inf
                    continue
            values[i, j] = result.fitted_value
            residuals[i, j] = result.objective
            flags[i][j] = _result_flags(result)

    return SurfaceGrid(
        moneyness=m_axis,
        maturity_days=t_axis,
        values=values,
        residuals=residuals,
        flags=flags,
        kind=kind,
    )


def _lookup_vol(vol_surface: SurfaceGrid, moneyness: float, days: int) -> float:
    i, j, _ = vol_surface.nearest_cell(moneyness, days)
    sigma = float(vol_surface.values[i, j])
    if not math.isfinite(sigma) or sigma <= 0:
        raise DataError(
            f"volatility lookup at (M={moneyness}, T={days}d) found unusable value {sigma}"
        )
    return sigma


def complement_surface(up: SurfaceGrid) -> SurfaceGrid:
    """Downside-probability surface: cellwise 1 - p with flags preserved."""
    if up.kind is not SurfaceKind.UP_PROB:
        raise ValueError(f"complement expects an UP_PROB surface, got {up.kind.value}")
    return SurfaceGrid(
        moneyness=up.moneyness.copy(),
        maturity_days=up.maturity_days.copy(),
        values=1.0 - up.values,
        residuals=up.residuals.copy(),
        flags=[list(row) for row in up.flags],
        kind=SurfaceKind.DOWNSIDE_PROB,
        metadata=dict(up.metadata),
    )


def _check_axes(a: SurfaceGrid, b: SurfaceGrid) -> None:
    if not np.array_equal(a.moneyness, b.moneyness) or not np.array_equal(
        a.maturity_days, b.maturity_days
    ):
        raise DataError("surfaces have different axes; no interpolation is performed")


def _union_flags(a: SurfaceGrid, b: SurfaceGrid) -> list[list[tuple[str, ...]]]:
    rows, cols = a.shape()
    return [
        [
            tuple(sorted(set(a.flags[i][j]) | set(b.flags[i][j])))
            for j in range(cols)
        ]
        for i in range(rows)
    ]


def diff_surface(a: SurfaceGrid, b: SurfaceGrid) -> SurfaceGrid:
    """Cellwise a - b for two volatility surfaces on identical axes."""
    _check_axes(a, b)
    if a.kind not in _VOL_KINDS or b.kind not in _VOL_KINDS:
        raise DataError("difference surfaces require two volatility surfaces")
    return SurfaceGrid(
        moneyness=a.moneyness.copy(),
        maturity_days=a.maturity_days.copy(),
        values=a.values - b.values,
        residuals=np.full(a.values.shape, np.nan),
        flags=_union_flags(a, b),
        kind=SurfaceKind.DIFF,
    )


def relative_diff_surface(a: SurfaceGrid, b: SurfaceGrid) -> SurfaceGrid:
    """Cellwise (a - b) / b; zero-denominator cells are flagged, value unset."""
    _check_axes(a, b)
    if a.kind not in _VOL_KINDS or b.kind not in _VOL_KINDS:
        raise DataError("relative difference surfaces require two volatility surfaces")
    flags = _union_flags(a, b)
    values = np.full(a.values.shape, np.nan)
    rows, cols = a.shape()
    for i in range(rows):
        for j in range(cols):
            denom = b.values[i, j]
            if denom == 0 or not math.isfinite(denom):
                flags[i][j] = tuple(sorted(set(flags[i][j]) | {FLAG_ZERO_DENOM}))
                continue
            values[i, j] = (a.values[i, j] - denom) / denom
    return SurfaceGrid(
        moneyness=a.moneyness.copy(),
        maturity_days=a.maturity_days.copy(),
        values=values,
        residuals=np.full(a.values.shape, np.nan),
        flags=flags,
        kind=SurfaceKind.REL_DIFF,
    )


class ExportFormat(Enum):
    GRID_TEXT = "grid"
    RECORDS_TEXT = "records"
    HEATMAP_IMAGE = "heatmap"


def _format_value(x: float) -> str:
    return "%.10g" % x


def _flags_token(flags: tuple[str, ...]) -> str:
    return "|".join(flags) if flags else "-"


def _metadata_lines(surface: SurfaceGrid, extra: dict[str, str] | None) -> list[str]:
    meta = {"kind": surface.kind.value}
    meta.update(surface.metadata)
    if extra:
        meta.update(extra)
    return [f"# {key} = {meta[key]}" for key in sorted(meta)]


def export_surface(
    surface: SurfaceGrid,
    fmt: ExportFormat,
    path: str | Path,
    metadata: dict[str, str] | None = None,
) -> Path:
    """Write the surface as a value grid, per-cell records, or a heatmap.

    GRID_TEXT holds a moneyness header row, a maturity-days first column
    and cell values at 10 significant digits. RECORDS_TEXT holds one
    (maturity, moneyness, value, residual, flags) line per cell and round
    trips losslessly at 10 significant digits. HEATMAP_IMAGE renders a
    self-contained SVG with axis labels and a color bar.
    """
    path = Path(path)
    if fmt is ExportFormat.HEATMAP_IMAGE:
        from .plotting import render_heatmap

        render_heatmap(surface, path, metadata=metadata)
        return path

    lines = _metadata_lines(surface, metadata)
    if fmt is ExportFormat.GRID_TEXT:
        header = ["maturity_days"] + [_format_value(m) for m in surface.moneyness]
        lines.append(",".join(header))
        for i, days in enumerate(surface.maturity_days):
            row = [str(int(days))] + [_format_value(v) for v in surface.values[i]]
            lines.append(",".join(row))
    elif fmt is ExportFormat.RECORDS_TEXT:
        lines.append("maturity_days,moneyness,value,residual,flags")
        for i, days in enumerate(surface.maturity_days):
            for j, m in enumerate(surface.moneyness):
                lines.append(
                    ",".join(
                        [
                            str(int(days)),
                            _format_value(m),
                            _format_value(surface.values[i, j]),
                            _format_value(surface.residuals[i, j]),
                            _flags_token(surface.flags[i][j]),
                        ]
                    )
                )
    else:
        raise ValueError(f"unknown export format {fmt}")
    path.write_text("\n".join(lines) + "\n")
    return path


def read_records(path: str | Path) -> SurfaceGrid:
    """Re-import a RECORDS_TEXT export, including kind and metadata."""
    path = Path(path)
    metadata: dict[str, str] = {}
    rows: list[tuple[int, float, float, float, tuple[str, ...]]] = []
    header_seen = False
    for line in path.read_text().splitlines():
        line = line.strip()
        if not line:
            continue
        if line.startswith("#"):
            body = line[1:].strip()
            if "=" in body:
                key, _, value = body.partition("=")
                metadata[key.strip()] = value.strip()
            continue
        if not header_seen:
            if line != "maturity_days,moneyness,value,residual,flags":
                raise DataError(f"unexpected records header in {path}: {line}")
            header_seen = True
            continue
        days_s, m_s, v_s, r_s, flags_s = line.split(",")
        flags = () if flags_s == "-" else tuple(flags_s.split("|"))
        rows.append((int(days_s), float(m_s), float(v_s), float(r_s), flags))
    if not rows:
        raise DataError(f"records file {path} holds no cells")
    if "kind" not in metadata:
        raise DataError(f"records file {path} is missing the kind metadata line")
    kind = SurfaceKind(metadata.pop("kind"))

    m_axis = sorted(set(row[1] for row in rows))
    t_axis = sorted(set(row[0] for row in rows))
    m_index = {m: j for j, m in enumerate(m_axis)}
    t_index = {t: i for i, t in enumerate(t_axis)}
    values = np.full((len(t_axis), len(m_axis)), np.nan)
    residuals = np.full((len(t_axis), len(m_axis)), np.nan)
    flags: list[list[tuple[str, ...]]] = [
        [() for _ in m_axis] for _ in t_axis
    ]
    for days, m, value, residual, cell_flags in rows:
        i, j = t_index[days], m_index[m]
        values[i, j] = value
        residuals[i, j] = residual
        flags[i][j] = cell_flags
    return SurfaceGrid(
        moneyness=np.asarray(m_axis),
        maturity_days=np.asarray(t_axis),
        values=values,
        residuals=residuals,
        flags=flags,
        kind=kind,
        metadata=metadata,
    )
