"""Credit-stress monitoring from implied downside-probability surfaces.

The monitor tracks the downside probability at a fixed surface
coordinate (default moneyness 0.9, 30-day maturity) and classifies each
reading with two strict cut points: above 0.80 reduce exposure, below
0.60 increase it, otherwise hold. The boundary values themselves map to
HOLD.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from datetime import date
from enum import Enum
from pathlib import Path

from .errors import DataError
from .surfaces import SurfaceGrid, SurfaceKind

REDUCE_THRESHOLD = 0.80
INCREASE_THRESHOLD = 0.60
DEFAULT_COORDINATE = (0.9, 30)


class Action(Enum):
    REDUCE = "REDUCE"
    HOLD = "HOLD"
    INCREASE = "INCREASE"


@dataclass(frozen=True)
class StressReading:
    """One surface lookup: value plus how trustworthy the cell is."""

    value: float
    coordinate: tuple[float, int]
    requested: tuple[float, int]
    nearest_used: bool
    reliable: bool
    flags: tuple[str, ...]


@dataclass(frozen=True)
class StressSignal:
    as_of: date
    downside_probability: float
    action: Action
    coordinate: tuple[float, int]
    reliable: bool = True


def stress_metric(
    surface: SurfaceGrid,
    coordinate: tuple[float, int] = DEFAULT_COORDINATE,
) -> StressReading:
    """Downside probability at the monitor coordinate.

    Off-grid requests fall back to the nearest cell, recorded in the
    reading; flagged cells propagate an unreliable marker instead of
    being hidden.
    """
    if surface.kind is not SurfaceKind.DOWNSIDE_PROB:
        raise DataError(
            f"stress metric needs a DOWNSIDE_PROB surface, got {surface.kind.value}"
        )
    m, days = coordinate
    i, j, exact = surface.nearest_cell(m, days)
    flags = surface.flags[i][j]
    return StressReading(
        value=float(surface.values[i, j]),
        coordinate=(float(surface.moneyness[j]), int(surface.maturity_days[i])),
        requested=(float(m), int(days)),
        nearest_used=not exact,
        reliable=not flags,
        flags=flags,
    )


def classify_signal(probability: float) -> Action:
    """REDUCE above 0.80, INCREASE below 0.60, HOLD otherwise (bounds hold)."""
    if not 0.0 <= probability <= 1.0:
        raise ValueError(f"probability must lie in [0, 1], got {probability}")
    if probability > REDUCE_THRESHOLD:
        return Action.REDUCE
    if probability < INCREASE_THRESHOLD:
        return Action.INCREASE
    return Action.HOLD


def signal_series(
    dated_surfaces: list[tuple[date, SurfaceGrid]],
    coordinate: tuple[float, int] = DEFAULT_COORDINATE,
) -> list[StressSignal]:
    """One classified signal per date, chronologically sorted.

    Duplicate dates are refused; input order does not matter.
    """
    seen: set[date] = set()
    for day, _ in dated_surfaces:
        if day in seen:
            raise DataError(f"duplicate surface date {day}")
        seen.add(day)
    signals = []
    for day, surface in sorted(dated_surfaces, key=lambda item: item[0]):
        reading = stress_metric(surface, coordinate)
        signals.append(
            StressSignal(
                as_of=day,
                downside_probability=reading.value,
                action=classify_signal(reading.value),
                coordinate=reading.coordinate,
                reliable=reading.reliable,
            )
        )
    return signals


def write_signal_series(
    signals: list[StressSignal],
    path: str | Path,
    metadata: dict[str, str] | None = None,
) -> Path:
    """Export the series as date, probability, action, reliability flag."""
    path = Path(path)
    with path.open("w", newline="") as handle:
        for key in sorted(metadata or {}):
            handle.write(f"# {key} = {metadata[key]}\n")
        writer = csv.writer(handle)
        writer.writerow(["date", "downside_probability", "action", "reliable"])
        for signal in signals:
            writer.writerow(
                [
                    signal.as_of.isoformat(),
                    "%.10g" % signal.downside_probability,
                    signal.action.value,
                    str(signal.reliable).lower(),
                ]
            )
    return path
