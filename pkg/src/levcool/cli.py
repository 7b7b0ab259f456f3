"""Command-line front end.

Exit codes:
  0  success
  1  usage error or unknown command
  2  configuration error
  3  fit / convergence error
  4  table-check tolerance failure
  5  missing input file

Set LEVCOOL_WORKERS to bound the worker threads used by ensembles.
"""

from __future__ import annotations

import json
import math
import sys
from dataclasses import replace
from pathlib import Path

import click
import numpy as np

from . import __version__
from .coil import DipoleSource, coupling_dz, coupling_map, coupling_map_csv, optimize_geometry
from .config import AnalysisSettings, ConfigError, ExperimentConfig, load_config
from .langevin import effective_damping, equipartition_temperature, simulate_ensemble, thermal_force_psd
from .limits import NoiseBudget, min_temperature, table_report
from .pressure import PressureReading, PressureRangeError, correct_pressure
from .series import TimeSeries, atomic_write_text
from .spectral import (
    CalibrationReference,
    FitError,
    band_rms,
    fit_lorentzian,
    fit_report,
    fit_ringdown,
    mode_temperature,
    ringdown_envelope,
    welch_psd,
)
from .trap import dipole_moment
from .units import UnitError, parse_quantity

EXIT_OK, EXIT_USAGE, EXIT_CONFIG, EXIT_FIT, EXIT_TOLERANCE, EXIT_MISSING = 0, 1, 2, 3, 4, 5


class ToleranceFailure(click.ClickException):
    exit_code = EXIT_TOLERANCE


def _config(path) -> ExperimentConfig:
    if path is None:
        raise ConfigError("--config is required for this command")
    return load_config(path)


def _emit(fmt: str, doc, text: str, csv: str | None = None):
    if fmt == "json":
        click.echo(json.dumps(doc, indent=2))
    elif fmt == "csv" and csv is not None:
        click.echo(csv, nl=False)
    else:
        click.echo(text)


def _gnuplot(path: Path, data: str, xcol: int, ycol: int, xlabel: str, ylabel: str, log: str = ""):
    script = [
        "set datafile separator ','",
        f"set xlabel '{xlabel}'",
        f"set ylabel '{ylabel}'",
    ]
    if log:
        script.append(f"set logscale {log}")
    script.append(f"plot '{data}' every ::1 using {xcol}:{ycol} with lines notitle")
    atomic_write_text(path, "\n".join(script) + "\n")


common_options = [
    click.option("--config", "config_path", type=click.Path(dir_okay=False), help="Experiment config file."),
    click.option("--out", "out_dir", type=click.Path(file_okay=False), help="Output directory (overrides config)."),
    click.option("--format", "fmt", type=click.Choice(["json", "text", "csv"]), default="text", show_default=True),
]


def with_common(f):
    for opt in reversed(common_options):
        f = opt(f)
    return f


@click.group(help=__doc__)
@click.version_option(__version__)
def cli():
    pass


def _out(cfg: ExperimentConfig | None, out_dir) -> Path:
    return Path(out_dir or (cfg.outputs.directory if cfg else "out"))


@cli.command(help="Integrate the configured mode and write time series.")
@with_common
@click.option("--seed", type=int, help="Override [noise] seed (unsigned 64-bit).")
def simulate(config_path, out_dir, fmt, seed):
    cfg = _config(config_path)
    cfg.require("noise", "feedback", "simulation")
    s = cfg.simulation
    mode = cfg.mode(s.mode)
    noise = cfg.noise if seed is None else replace(cfg.noise, seed=seed)
    runs = simulate_ensemble(mode, noise, cfg.feedback, s.runs, s.timestep, s.duration, record_every=s.record_every,
                             max_quality_factor=s.max_quality_factor, x0=s.x0)
    out = _out(cfg, out_dir)
    summary = []
    for ts in runs:
        i = ts.metadata["run_index"]
        name = f"timeseries_{mode.label}_run{i:03d}.{cfg.outputs.timeseries_format}"
        if cfg.outputs.timeseries_format == "bin":
            ts.to_binary(out / name)
        else:
            ts.to_csv(out / name)
        x = ts["true_position"]
        x = x[int(len(x) * 0.1):]
        ms = float(np.mean(x * x)) if len(x) else float("nan")
        summary.append({
            "file": name,
            "run_index": i,
            "samples": len(ts),
            "sample_rate_hz": ts.sample_rate,
            "mean_square": ms,
            "temperature_k": equipartition_temperature(ms, mode),
            "effective_damping_s": ts.metadata["effective_damping"],
            "simulated_quality_factor": ts.metadata["simulated_quality_factor"],
            "unstable": ts.metadata["unstable"],
        })
    if cfg.outputs.timeseries_format == "csv" and summary:
        _gnuplot(out / "timeseries.gp", summary[0]["file"], 1, 2, "time (s)", f"position ({mode.unit})")
    atomic_write_text(out / "simulate_summary.json", json.dumps(summary, indent=2) + "\n")
    text = "\n".join(
        f"run {r['run_index']}: T = {r['temperature_k']:.4g} K, <x^2> = {r['mean_square']:.4g}, "
        f"unstable = {r['unstable']}  -> {r['file']}" for r in summary
    )
    _emit(fmt, summary, text)


def _load_series(path) -> TimeSeries:
    if not Path(path).exists():
        raise FileNotFoundError(path)
    return TimeSeries.load(path)


@cli.command(help="Welch PSD, line-shape fit and mode temperature of a recorded series.")
@with_common
@click.option("--input", "input_path", required=True, type=click.Path(dir_okay=False))
@click.option("--mode", "label", help="Mode label (default: [simulation] mode).")
def analyze(config_path, out_dir, fmt, input_path, label):
    cfg = _config(config_path)
    ts = _load_series(input_path)
    label = label or (cfg.simulation.mode if cfg.simulation else None)
    if label is None:
        raise ConfigError("no mode given (--mode or [simulation] mode)")
    mode = cfg.mode(label)
    an = cfg.analysis or AnalysisSettings()
    ts = ts.tail(1 - an.settle_fraction)
    gamma = effective_damping(mode, cfg.feedback) if cfg.feedback else mode.gamma0
    if not gamma > 0:
        gamma = mode.gamma0
    psd = welch_psd(ts, an.segment_length, channel=an.channel, gamma_total=gamma)
    f0 = mode.frequency
    half = an.band_linewidths * gamma / (2 * math.pi)
    band = (max(f0 - half, f0 / 2), min(f0 + half, 2 * f0))
    fit = fit_lorentzian(psd, band)
    fit_band = (max(fit.omega0 / (2 * math.pi) - an.band_linewidths * fit.gamma_total / (2 * math.pi), f0 / 2),
                min(fit.omega0 / (2 * math.pi) + an.band_linewidths * fit.gamma_total / (2 * math.pi), 2 * f0))
    rms = band_rms(psd, fit_band)
    if an.reference_temperature and an.reference_rms:
        temperature = mode_temperature(rms, CalibrationReference(an.reference_temperature, an.reference_rms))
        method = "reference RMS ratio"
    else:
        temperature = fit.temperature(mode.inertia)
        method = "fitted line area"
    out = _out(cfg, out_dir)
    psd.to_csv(out / "psd.csv")
    _gnuplot(out / "psd.gp", "psd.csv", 1, 2, "frequency (Hz)", f"PSD ({psd.unit}^2/Hz)", "y")
    report = fit_report(fit, temperature=temperature)
    atomic_write_text(out / "fit_report.json", report + "\n")
    doc = json.loads(report)
    text = (f"omega0 = {fit.omega0:.6g} rad/s ({fit.omega0 / (2 * math.pi):.6g} Hz)\n"
            f"gamma_total = {fit.gamma_total:.4g} 1/s, Q = {fit.quality_factor:.4g} +/- {fit.quality_factor_error:.2g}\n"
            f"band RMS = {rms:.4g} {psd.unit}\n"
            f"temperature = {temperature:.4g} K ({method})")
    _emit(fmt, doc, text, psd.to_csv_text())


@cli.command(help="Fit the exponential decay of a ring-down record.")
@with_common
@click.option("--input", "input_path", required=True, type=click.Path(dir_okay=False))
@click.option("--mode", "label", help="Mode label (default: [simulation] mode).")
@click.option("--channel", default="true_position", show_default=True)
def ringdown(config_path, out_dir, fmt, input_path, label, channel):
    cfg = _config(config_path)
    ts = _load_series(input_path)
    label = label or (cfg.simulation.mode if cfg.simulation else None)
    mode = cfg.mode(label)
    env = ts if "envelope" in ts.channels else ringdown_envelope(ts, channel)
    fit = fit_ringdown(env, mode.omega0)
    report = fit_report(ringdown=fit)
    atomic_write_text(_out(cfg, out_dir) / "ringdown_report.json", report + "\n")
    text = f"tau = {fit.tau:.6g} s, Q = {fit.quality_factor:.6g} +/- {fit.fit_error_q:.2g}"
    _emit(fmt, json.loads(report), text)


@cli.command(help="Detection-noise-limited cooling floor for each configured mode.")
@with_common
def limits(config_path, out_dir, fmt):
    cfg = _config(config_path)
    if not cfg.limits:
        raise ConfigError("config has no [limits.<mode>] sections")
    docs = {}
    lines = []
    for label, lim in cfg.limits.items():
        mode = cfg.mode(label)
        coupling = None
        if lim.detector_noise_psd is None and cfg.coil and cfg.magnet:
            coupling = coupling_dz(cfg.coil, DipoleSource(dipole_moment(cfg.magnet)))
        budget = NoiseBudget(
            force_psd=lim.force_psd if lim.force_psd is not None else thermal_force_psd(mode),
            detector_psd=lim.detector_noise_psd,
            squid_flux_psd=lim.squid_flux_psd,
            flux_coupling=coupling,
            flux_transfer_ratio=lim.flux_transfer_ratio,
        )
        try:
            rep = min_temperature(mode, budget)
        except ValueError as exc:
            raise ConfigError(f"[limits.{label}]: {exc}") from None
        docs[label] = rep.as_dict()
        lines.append(f"{label}: T_min = {rep.t_min:.4g} K, N_min = {rep.n_min:.4g}, "
                     f"amplitude = {rep.min_amplitude:.4g} {mode.unit}")
    atomic_write_text(_out(cfg, out_dir) / "limits.json", json.dumps(docs, indent=2) + "\n")
    _emit(fmt, docs, "\n".join(lines))


@cli.command("coil-optimize", help="Search coil offset, height and orientation for the largest |dPhi/dz|.")
@with_common
def coil_optimize(config_path, out_dir, fmt):
    cfg = _config(config_path)
    cfg.require("magnet", "coil", "coil_search")
    s = cfg.coil_search
    source = DipoleSource(dipole_moment(cfg.magnet), radius=cfg.magnet.radius)
    res = optimize_geometry(source, (s.x_min, s.x_max), (s.z_min, s.z_max), cfg.coil.turns, cfg.coil.loop_radius,
                            s.orientations, s.grid_points)
    xs = np.linspace(s.x_min, s.x_max, s.grid_points) if s.x_max > s.x_min else [s.x_min]
    zs = np.linspace(s.z_min, s.z_max, s.grid_points) if s.z_max > s.z_min else [s.z_min]
    rows = coupling_map(source, xs, zs, cfg.coil.turns, cfg.coil.loop_radius, s.orientations)
    out = _out(cfg, out_dir)
    csv = coupling_map_csv(rows, out / "coupling_map.csv")
    _gnuplot(out / "coupling_map.gp", "coupling_map.csv", 2, 4, "z (m)", "dPhi/dz (Wb/m)")
    g = res.geometry
    doc = {"orientation": g.orientation, "lateral_offset_m": g.lateral_offset, "separation_m": g.separation,
           "turns": g.turns, "loop_radius_m": g.loop_radius, "dphi_dz_wb_per_m": res.coupling}
    atomic_write_text(out / "coil_optimum.json", json.dumps(doc, indent=2) + "\n")
    text = (f"best: {g.orientation}, x = {g.lateral_offset:.4g} m, z = {g.separation:.4g} m, "
            f"|dPhi/dz| = {res.coupling:.4g} Wb/m")
    _emit(fmt, doc, text, csv)


@cli.command("table-check", help="Recompute the parameter table and compare with the reported values.")
@with_common
@click.option("--fixture", type=click.Path(dir_okay=False), help="Fixture file (default: the shipped table).")
@click.option("--tolerance", type=float, default=0.05, show_default=True, help="Relative tolerance per row.")
def table_check(config_path, out_dir, fmt, fixture, tolerance):
    if fixture is not None and not Path(fixture).exists():
        raise FileNotFoundError(fixture)
    rep = table_report(fixture, tolerance)
    if out_dir:
        atomic_write_text(Path(out_dir) / "table_report.json", rep.to_json() + "\n")
    csv = "key,value,reported,relative_deviation,ok\n" + "".join(
        f"{r.key},{r.value!r},{r.reported!r},{r.deviation!r},{r.ok()}\n" for r in rep.rows)
    _emit(fmt, json.loads(rep.to_json()), rep.to_text(), csv)
    bad = rep.failures()
    if bad:
        raise ToleranceFailure(f"{len(bad)} row(s) outside tolerance: {', '.join(r.key for r in bad)}")


@cli.command("pressure-correct", help="Helium gas factor and thermal-transpiration correction of a gauge reading.")
@with_common
@click.option("--gauge", help="Gauge reading with unit, e.g. '1e-8 mbar'.")
@click.option("--warm", help="Gauge-side temperature, e.g. '295 K'.")
@click.option("--cold", help="Experiment-side temperature, e.g. '410 mK'.")
def pressure_correct(config_path, out_dir, fmt, gauge, warm, cold):
    if gauge is not None:
        try:
            reading = PressureReading(
                parse_quantity(gauge, "pressure"),
                parse_quantity(warm or "295 K", "temperature"),
                parse_quantity(cold or "295 K", "temperature"),
            )
        except (UnitError, ValueError) as exc:
            raise ConfigError(str(exc)) from None
    else:
        cfg = _config(config_path)
        cfg.require("pressure")
        reading = cfg.pressure
    try:
        res = correct_pressure(reading)
    except PressureRangeError as exc:
        raise ConfigError(str(exc)) from None
    text = (f"C = {res.factor}, gas corrected = {res.gas_corrected:.4g} mbar, "
            f"cold side = {res.cold_side:.4g} mbar")
    _emit(fmt, res.as_dict(), text)


def main(argv=None) -> int:
    try:
        cli.main(args=argv, prog_name="levcool", standalone_mode=False)
    except click.exceptions.Exit as exc:
        return exc.exit_code
    except click.exceptions.Abort:
        click.echo("aborted", err=True)
        return EXIT_USAGE
    except ToleranceFailure as exc:
        click.echo(f"error: {exc.message}", err=True)
        return EXIT_TOLERANCE
    except click.UsageError as exc:
        exc.show()
        return EXIT_USAGE
    except (ConfigError, UnitError) as exc:
        click.echo(f"config error: {exc}", err=True)
        return EXIT_CONFIG
    except FitError as exc:
        click.echo(f"fit error: {exc}", err=True)
        return EXIT_FIT
    except FileNotFoundError as exc:
        click.echo(f"missing input: {exc}", err=True)
        return EXIT_MISSING
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
