"""Command-line driver: ingestion, calibration, surfaces, stress signals.

Subcommands: synthesize, ingest, calibrate {asset-vol|equity-vol|drift|prob},
surface {diff|reldiff}, stress, export. Outputs land in (first match wins)
--out, the MERTONSURF_OUT environment variable, or the config output_dir.
Exit codes: 0 success, 1 usage/config, 2 data, 3 numerical, 4 I/O. Every
command writes a manifest of input and output digests; reruns on the same
inputs produce identical digests.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import time
from datetime import date
from pathlib import Path

from .config import RunConfig, load_config, parse_float_axis, parse_int_axis, parse_overrides
from .errors import (
    CalibrationInfeasibleError,
    ConfigError,
    DataError,
    DependencyError,
    ToolkitError,
)
from .market_data import (
    MAX_MATURITY_DAYS,
    SnapshotBuild,
    build_snapshot,
    load_calendar,
    write_rejects_report,
)
from .stress import signal_series, write_signal_series
from .surfaces import (
    FLAG_INFEASIBLE,
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
from .synthetic import SyntheticParams, generate_fixture

ENV_OUTPUT_DIR = "MERTONSURF_OUT"

_EXIT_CODES = {"usage": 1, "data": 2, "numerical": 3, "io": 4}

_TASKS = {
    "asset-vol": SurfaceKind.ASSET_VOL,
    "equity-vol": SurfaceKind.EQUITY_VOL,
    "drift": SurfaceKind.DRIFT,
    "prob": SurfaceKind.UP_PROB,
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse would exit(2); usage errors are exit 1
        raise ConfigError(message)


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _write_manifest(
    outdir: Path,
    name: str,
    config: RunConfig | None,
    inputs: list[Path],
    outputs: list[Path],
    started: float,
) -> Path:
    manifest = {
        "command": name,
        "config": config.metadata() if config else {},
        "inputs": {p.name: _sha256(p) for p in sorted(set(inputs))},
        "outputs": {p.name: _sha256(p) for p in sorted(set(outputs))},
        "timings": {"wall_seconds": round(time.perf_counter() - started, 3)},
    }
    path = outdir / f"manifest_{name}.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return path


def _outdir(args, config: RunConfig | None) -> Path:
    candidate = (
        getattr(args, "out", None)
        or os.environ.get(ENV_OUTPUT_DIR)
        or (config.output_dir if config else "out")
    )
    outdir = Path(candidate)
    outdir.mkdir(parents=True, exist_ok=True)
    return outdir


def _load_snapshot(config: RunConfig) -> SnapshotBuild:
    calendar = load_calendar(config.calendar) if Path(config.calendar).exists() else None
    return build_snapshot(
        config.chain,
        config.closes,
        config.rates,
        window_length=config.window_length,
        asset_value=config.asset_value,
        calendar=calendar,
    )


def _auto_maturities(build: SnapshotBuild, cap_window: bool, config: RunConfig) -> list[int]:
    days = sorted(
        {
            q.maturity_days
            for q in build.snapshot.quotes
            if 0 < q.maturity_days <= MAX_MATURITY_DAYS
        }
    )
    if cap_window:
        limit = len(build.snapshot.close_history) - 1
        days = [d for d in days if d <= limit]
    if not days:
        raise DataError("no maturities available; supply an explicit maturity axis")
    return days


def _task_axes(task: str, config: RunConfig, build: SnapshotBuild) -> tuple[list[float], list[int]]:
    specs = {
        "asset-vol": (config.asset_moneyness, config.asset_maturities),
        "equity-vol": (config.equity_moneyness, config.equity_maturities),
        "drift": (config.drift_moneyness, config.drift_maturities),
        "prob": (config.prob_moneyness, config.prob_maturities),
    }
    m_spec, t_spec = specs[task]
    moneyness = parse_float_axis(m_spec)
    maturities = parse_int_axis(t_spec)
    if maturities is None:
        maturities = _auto_maturities(build, task in ("drift", "prob"), config)
    return moneyness, maturities


def _surface_outputs(
    surface: SurfaceGrid,
    stem: str,
    outdir: Path,
    config: RunConfig,
    as_of: date,
    heatmap: bool,
) -> list[Path]:
    metadata = dict(config.metadata())
    metadata["as_of"] = as_of.isoformat()
    outputs = [
        export_surface(surface, ExportFormat.GRID_TEXT, outdir / f"{stem}_grid.csv", metadata),
        export_surface(surface, ExportFormat.RECORDS_TEXT, outdir / f"{stem}_records.csv", metadata),
    ]
    if heatmap:
        outputs.append(
            export_surface(surface, ExportFormat.HEATMAP_IMAGE, outdir / f"{stem}_heatmap.svg", metadata)
        )
    return outputs


def _all_infeasible(surface: SurfaceGrid) -> bool:
    rows, cols = surface.shape()
    return all(
        FLAG_INFEASIBLE in surface.flags[i][j] for i in range(rows) for j in range(cols)
    )


def cmd_synthesize(args) -> int:
    started = time.perf_counter()
    outdir = Path(args.out or os.environ.get(ENV_OUTPUT_DIR) or "fixtures")
    paths = generate_fixture(outdir, seed=args.seed, params=SyntheticParams())
    _write_manifest(outdir, "synthesize", None, [], sorted(paths.values()), started)
    print(f"wrote {len(paths)} fixture files to {outdir}")
    return 0


def cmd_ingest(args) -> int:
    started = time.perf_counter()
    config = load_config(args.config, parse_overrides(args.set or []))
    outdir = _outdir(args, config)
    build = _load_snapshot(config)
    snapshot = build.snapshot

    rejects_path = outdir / "rejects.csv"
    write_rejects_report(build.rejects, rejects_path)
    summary = {
        "as_of": snapshot.as_of.isoformat(),
        "equity_close": snapshot.equity_close,
        "asset_value_assumption": snapshot.asset_value_assumption,
        "window_length": len(snapshot.close_history),
        "quotes_kept": len(snapshot.quotes),
        "rejected_rows": len(build.rejects),
        "cleaning_counts": build.cleaning.counts(),
        "excluded_close_dates": [d.isoformat() for d in build.excluded_close_dates],
        "rate_imputations": [
            {"date": r.filled_date.isoformat(), "source": r.source_date.isoformat()}
            for r in snapshot.rates.imputation_log
        ],
    }
    summary_path = outdir / "snapshot_summary.json"
    summary_path.write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    inputs = [Path(config.chain), Path(config.closes), Path(config.rates)]
    _write_manifest(outdir, "ingest", config, inputs, [rejects_path, summary_path], started)
    print(f"snapshot {snapshot.as_of} ready: {len(snapshot.quotes)} quotes kept")
    return 0


def cmd_calibrate(args) -> int:
    started = time.perf_counter()
    config = load_config(args.config, parse_overrides(args.set or []))
    outdir = _outdir(args, config)
    kind = _TASKS[args.task]
    build = _load_snapshot(config)
    snapshot = build.snapshot
    settings = config.settings()
    moneyness, maturities = _task_axes(args.task, config, build)

    vol_surface = None
    if kind in (SurfaceKind.DRIFT, SurfaceKind.UP_PROB):
        source = args.asset_vol_surface or config.asset_vol_surface
        if not source:
            candidate = outdir / "asset_vol_records.csv"
            source = str(candidate) if candidate.exists() else ""
        if not source or not Path(source).exists():
            raise DependencyError(
                "drift/prob calibration needs an asset-vol surface; run "
                "`calibrate asset-vol` first or point asset_vol_surface at one"
            )
        vol_surface = read_records(source)
        if vol_surface.kind is not SurfaceKind.ASSET_VOL:
            raise DependencyError(
                f"asset_vol_surface points at a {vol_surface.kind.value} surface"
            )

    surface = build_surface(snapshot, moneyness, maturities, kind, settings, vol_surface)
    if _all_infeasible(surface):
        raise CalibrationInfeasibleError(
            "every grid cell is risk-neutral infeasible; nothing calibrated"
        )

    heatmap = config.heatmap and not args.no_heatmap
    stem = kind.value.lower()
    outputs = _surface_outputs(surface, stem, outdir, config, snapshot.as_of, heatmap)
    if kind is SurfaceKind.UP_PROB:
        downside = complement_surface(surface)
        outputs += _surface_outputs(
            downside, SurfaceKind.DOWNSIDE_PROB.value.lower(), outdir, config,
            snapshot.as_of, heatmap,
        )
    inputs = [Path(config.chain), Path(config.closes), Path(config.rates)]
    if vol_surface is not None:
        inputs.append(Path(source))
    _write_manifest(outdir, f"calibrate_{args.task}", config, inputs, outputs, started)
    print(f"calibrated {kind.value} over {len(maturities)}x{len(moneyness)} cells")
    return 0


def cmd_surface(args) -> int:
    started = time.perf_counter()
    config = load_config(args.config, parse_overrides(args.set or [])) if args.config else RunConfig()
    outdir = _outdir(args, config)
    a = read_records(Path(args.a))
    b = read_records(Path(args.b))
    if args.operation == "diff":
        result = diff_surface(a, b)
    else:
        result = relative_diff_surface(a, b)
    stem = args.name or result.kind.value.lower()
    as_of_text = a.metadata.get("as_of") or b.metadata.get("as_of") or ""
    metadata = dict(config.metadata())
    if as_of_text:
        metadata["as_of"] = as_of_text
    outputs = [
        export_surface(result, ExportFormat.GRID_TEXT, outdir / f"{stem}_grid.csv", metadata),
        export_surface(result, ExportFormat.RECORDS_TEXT, outdir / f"{stem}_records.csv", metadata),
    ]
    if config.heatmap and not args.no_heatmap:
        outputs.append(
            export_surface(result, ExportFormat.HEATMAP_IMAGE, outdir / f"{stem}_heatmap.svg", metadata)
        )
    _write_manifest(
        outdir, f"surface_{args.operation}", config, [Path(args.a), Path(args.b)], outputs, started
    )
    print(f"wrote {result.kind.value} surface as {stem}_*")
    return 0


def _dated_downside_surfaces(paths: list[Path]) -> list[tuple[date, SurfaceGrid]]:
    dated = []
    for path in paths:
        surface = read_records(path)
        if surface.kind is not SurfaceKind.DOWNSIDE_PROB:
            continue
        as_of_text = surface.metadata.get("as_of")
        if not as_of_text:
            raise DataError(f"{path} has no as_of metadata; cannot date the surface")
        dated.append((date.fromisoformat(as_of_text), surface))
    if not dated:
        raise DependencyError("no DOWNSIDE_PROB record files found to monitor")
    return dated


def cmd_stress(args) -> int:
    started = time.perf_counter()
    config = load_config(args.config, parse_overrides(args.set or [])) if args.config else RunConfig()
    outdir = _outdir(args, config)
    roots = [Path(p) for p in args.surfaces]
    files: list[Path] = []
    for root in roots:
        if root.is_dir():
            files.extend(sorted(root.glob("*.csv")))
        else:
            files.append(root)
    dated = _dated_downside_surfaces(files)
    coordinate = (config.monitor_moneyness, config.monitor_maturity_days)
    signals = signal_series(dated, coordinate)
    metadata = dict(config.metadata())
    signals_path = write_signal_series(signals, outdir / "signals.csv", metadata)
    _write_manifest(outdir, "stress", config, files, [signals_path], started)
    print(f"wrote {len(signals)} stress signals to {signals_path}")
    return 0


def cmd_export(args) -> int:
    started = time.perf_counter()
    surface = read_records(Path(args.records))
    fmt = {
        "grid": ExportFormat.GRID_TEXT,
        "records": ExportFormat.RECORDS_TEXT,
        "heatmap": ExportFormat.HEATMAP_IMAGE,
    }[args.format]
    out = Path(args.out_file)
    out.parent.mkdir(parents=True, exist_ok=True)
    export_surface(surface, fmt, out, dict(surface.metadata))
    _write_manifest(out.parent, "export", None, [Path(args.records)], [out], started)
    print(f"exported {surface.kind.value} as {out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="mertonsurf", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synthesize", parents=[], help="generate deterministic fixtures")
    p.add_argument("--out", help="fixture directory (default: fixtures)")
    p.add_argument("--seed", type=int, required=True)
    p.set_defaults(func=cmd_synthesize)

    def common(p):
        p.add_argument("--config", required=False, help="flat key = value config file")
        p.add_argument("--out", help="output directory override")
        p.add_argument("--set", action="append", metavar="KEY=VALUE",
                       help="override a config key (repeatable)")

    p = sub.add_parser("ingest", help="build and summarize a market snapshot")
    common(p)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("calibrate", help="calibrate one surface")
    p.add_argument("task", choices=sorted(_TASKS))
    common(p)
    p.add_argument("--asset-vol-surface", help="records file for the sigma lookup")
    p.add_argument("--no-heatmap", action="store_true")
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("surface", help="derive difference surfaces")
    p.add_argument("operation", choices=["diff", "reldiff"])
    common(p)
    p.add_argument("--a", required=True, help="records file, left operand")
    p.add_argument("--b", required=True, help="records file, right operand")
    p.add_argument("--name", help="output stem (default: kind)")
    p.add_argument("--no-heatmap", action="store_true")
    p.set_defaults(func=cmd_surface)

    p = sub.add_parser("stress", help="classify downside-probability readings")
    common(p)
    p.add_argument("--surfaces", nargs="+", required=True,
                   help="DOWNSIDE_PROB records files or directories of them")
    p.set_defaults(func=cmd_stress)

    p = sub.add_parser("export", help="re-export a stored surface")
    p.add_argument("--records", required=True)
    p.add_argument("--format", choices=["grid", "records", "heatmap"], required=True)
    p.add_argument("--out-file", required=True)
    p.set_defaults(func=cmd_export)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except ToolkitError as error:
        category = error.category
        print(f"error category={category}: {error}", file=sys.stderr)
        return _EXIT_CODES.get(category, 2)
    except (ValueError, KeyError) as error:
        print(f"error category=data: {error}", file=sys.stderr)
        return 2
    except OSError as error:
        print(f"error category=io: {error}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
