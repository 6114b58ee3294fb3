"""Run configuration: a flat key = value text file plus flag overrides.

Relative paths are resolved against the config file's directory so a
fixture directory stays portable. The effective configuration is echoed
verbatim into every output's metadata header, which is what makes run
manifests reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass, fields, replace
from pathlib import Path

from .errors import ConfigError
from .surfaces import CalibrationSettings
from .tree import QConvention, ReturnMode

_PATH_KEYS = {"chain", "closes", "rates", "calendar", "output_dir", "asset_vol_surface"}


@dataclass(frozen=True)
class RunConfig:
    # input/output paths
    chain: str = "chain.csv"
    closes: str = "closes.csv"
    rates: str = "rates.csv"
    calendar: str = "calendar.txt"
    output_dir: str = "out"
    asset_vol_surface: str = ""
    # economics
    asset_value: float = 1e12
    window_length: int = 250
    fixed_mu: float = 0.08
    fixed_p: float = 0.5
    vol_lookup_moneyness: float = 0.01
    tree_mode: str = "log"
    q_convention: str = "closed_form"
    steps_per_day: float = 1.0
    # optimizer
    sigma_min: float = 1e-4
    sigma_max: float = 5.0
    mu_min: float = -5.0
    mu_max: float = 5.0
    p_min: float = 0.01
    p_max: float = 0.99
    sigma_tol: float = 1e-10
    mu_tol: float = 1e-6
    p_tol: float = 1e-6
    scan_points: int = 64
    strike_match_tol: float = 1e-6
    # grids ("auto" maturities come from the cleaned chain)
    asset_moneyness: str = "0.01:0.90:0.01"
    asset_maturities: str = "auto"
    equity_moneyness: str = "0.05:1.50:0.05"
    equity_maturities: str = "auto"
    drift_moneyness: str = "0.01:0.90:0.01"
    drift_maturities: str = "auto"
    prob_moneyness: str = "0.01:0.90:0.01"
    prob_maturities: str = "auto"
    # reporting
    heatmap: bool = True
    monitor_moneyness: float = 0.9
    monitor_maturity_days: int = 30

    def metadata(self) -> dict[str, str]:
        """Every key rendered deterministically for output headers."""
        rendered = {}
        for f in fields(self):
            value = getattr(self, f.name)
            if isinstance(value, bool):
                rendered[f"config.{f.name}"] = str(value).lower()
            elif isinstance(value, float):
                rendered[f"config.{f.name}"] = "%.10g" % value
            else:
                rendered[f"config.{f.name}"] = str(value)
        return rendered

    def settings(self) -> CalibrationSettings:
        try:
            mode = ReturnMode(self.tree_mode)
        except ValueError:
            raise ConfigError(f"unknown tree_mode: {self.tree_mode}") from None
        try:
            convention = QConvention(self.q_convention)
        except ValueError:
            raise ConfigError(f"unknown q_convention: {self.q_convention}") from None
        return CalibrationSettings(
            sigma_bounds=(self.sigma_min, self.sigma_max),
            mu_bounds=(self.mu_min, self.mu_max),
            p_bounds=(self.p_min, self.p_max),
            sigma_tol=self.sigma_tol,
            mu_tol=self.mu_tol,
            p_tol=self.p_tol,
            scan_points=self.scan_points,
            fixed_p=self.fixed_p,
            fixed_mu=self.fixed_mu,
            vol_lookup_moneyness=self.vol_lookup_moneyness,
            tree_mode=mode,
            q_convention=convention,
            steps_per_day=self.steps_per_day,
            strike_match_tol=self.strike_match_tol,
        )


def _coerce(name: str, raw: str, kind: type):
    try:
        if kind is bool:
            lowered = raw.strip().lower()
            if lowered in ("true", "yes", "1", "on"):
                return True
            if lowered in ("false", "no", "0", "off"):
                return False
            raise ValueError(raw)
        return kind(raw.strip())
    except ValueError:
        raise ConfigError(f"config key {name}: cannot parse {raw!r} as {kind.__name__}") from None


def _field_types() -> dict[str, type]:
    types = {}
    for f in fields(RunConfig):
        default = getattr(RunConfig, f.name)
        types[f.name] = type(default)
    return types


def parse_overrides(pairs: list[str]) -> dict[str, str]:
    overrides = {}
    for pair in pairs:
        if "=" not in pair:
            raise ConfigError(f"override must look like key=value, got {pair!r}")
        key, _, value = pair.partition("=")
        overrides[key.strip()] = value.strip()
    return overrides


def load_config(path: str | Path | None, overrides: dict[str, str] | None = None) -> RunConfig:
    """Read the flat key = value file and apply flag overrides on top."""
    types = _field_types()
    values: dict[str, object] = {}
    base_dir = Path.cwd()
    if path is not None:
        path = Path(path)
        if not path.exists():
            raise ConfigError(f"config file not found: {path}")
        base_dir = path.parent
        for line_number, line in enumerate(path.read_text().splitlines(), start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{line_number}: expected key = value, got {line!r}")
            key, _, raw = line.partition("=")
            key = key.strip()
            if key not in types:
                raise ConfigError(f"{path}:{line_number}: unknown config key {key!r}")
            values[key] = _coerce(key, raw, types[key])
    for key, raw in (overrides or {}).items():
        if key not in types:
            raise ConfigError(f"unknown config key {key!r}")
        values[key] = _coerce(key, raw, types[key])
    config = RunConfig(**values)
    return _resolve_paths(config, base_dir, overrides or {})


def _resolve_paths(config: RunConfig, base_dir: Path, overrides: dict[str, str]) -> RunConfig:
    changes = {}
    for key in _PATH_KEYS:
        raw = getattr(config, key)
        if not raw:
            continue
        candidate = Path(raw)
        if not candidate.is_absolute():
            anchor = Path.cwd() if key in overrides else base_dir
            candidate = anchor / candidate
        changes[key] = str(candidate)
    return replace(config, **changes)


def parse_float_axis(spec: str) -> list[float]:
    """Parse "a,b,c" or inclusive "start:stop:step" into sorted floats."""
    spec = spec.strip()
    if ":" in spec:
        parts = spec.split(":")
        if len(parts) != 3:
            raise ConfigError(f"range axis must be start:stop:step, got {spec!r}")
        start, stop, step = (float(p) for p in parts)
        if step <= 0:
            raise ConfigError(f"axis step must be > 0, got {step}")
        values = []
        k = 0
        while True:
            value = start + k * step
            if value > stop + 1e-9:
                break
            values.append(round(value, 10))
            k += 1
        return values
    try:
        return sorted(float(part) for part in spec.split(",") if part.strip())
    except ValueError:
        raise ConfigError(f"cannot parse axis spec {spec!r}") from None


def parse_int_axis(spec: str) -> list[int] | None:
    """Parse maturities; None means "auto" (derive from the cleaned chain)."""
    spec = spec.strip()
    if spec == "auto":
        return None
    return sorted(int(round(v)) for v in parse_float_axis(spec))
