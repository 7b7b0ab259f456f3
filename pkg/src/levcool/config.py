"""Experiment description files.

INI-style sections, every dimensioned value written with its unit::

    [magnet]
    mass = 23 ug
    radius = 100 um

    [mode.z]
    kind = translational
    frequency = 42.4 Hz
    mass = magnet            # or an explicit value
    quality_factor = 1e4
    bath_temperature = 4.4 K

Sections: ``magnet``, ``mode.<label>`` (repeatable), ``noise``,
``feedback``, ``coil``, ``coil_search``, ``simulation``, ``analysis``,
``limits.<label>``, ``pressure``, ``outputs``.  Commands check that the
sections they need are present.  :func:`dump_config` writes the parsed
config back out in SI units; parsing that output gives an equal object.
"""

from __future__ import annotations

import configparser
import math
from dataclasses import dataclass, field
from pathlib import Path

from .coil import CoilGeometry
from .langevin import FeedbackConfig, ModeSpec, NoiseConfig
from .pressure import PressureReading
from .trap import MagnetSpec, mode_frequencies, moment_of_inertia
from .units import UnitError, format_quantity, parse_quantity

__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "SimulationSettings",
    "AnalysisSettings",
    "LimitSettings",
    "CoilSearch",
    "OutputSettings",
    "load_config",
    "parse_config",
    "dump_config",
]


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class SimulationSettings:
    mode: str
    duration: float
    timestep: float | None = None
    record_every: int = 1
    runs: int = 1
    max_quality_factor: float | None = None
    x0: float | None = None


@dataclass(frozen=True)
class AnalysisSettings:
    channel: str = "measured_position"
    segment_length: int | None = None
    band_linewidths: float = 5.0
    settle_fraction: float = 0.1
    reference_temperature: float | None = None
    reference_rms: float | None = None
    reference_rms_dimension: str = "length"


@dataclass(frozen=True)
class LimitSettings:
    detector_noise_psd: float | None = None
    force_psd: float | None = None
    squid_flux_psd: float | None = None
    flux_transfer_ratio: float | None = None


@dataclass(frozen=True)
class CoilSearch:
    x_min: float
    x_max: float
    z_min: float
    z_max: float
    orientations: tuple = ("perpendicular", "parallel")
    grid_points: int = 41


@dataclass(frozen=True)
class OutputSettings:
    directory: str = "out"
    timeseries_format: str = "csv"


@dataclass(frozen=True)
class ExperimentConfig:
    magnet: MagnetSpec | None = None
    modes: dict = field(default_factory=dict)
    noise: NoiseConfig | None = None
    feedback: FeedbackConfig | None = None
    coil: CoilGeometry | None = None
    coil_search: CoilSearch | None = None
    simulation: SimulationSettings | None = None
    analysis: AnalysisSettings | None = None
    limits: dict = field(default_factory=dict)
    pressure: PressureReading | None = None
    outputs: OutputSettings = OutputSettings()

    def require(self, *names: str) -> None:
        missing = [n for n in names if not getattr(self, n)]
        if missing:
            raise ConfigError(f"config is missing required section(s): {', '.join(missing)}")

    def mode(self, label: str) -> ModeSpec:
        try:
            return self.modes[label]
        except KeyError:
            raise ConfigError(f"no [mode.{label}] section") from None


def _get(sec, key, kind, default=None, required=False):
    if key not in sec:
        if required:
            raise ConfigError(f"[{sec.name}] needs {key}")
        return default
    try:
        return parse_quantity(sec[key], kind)
    except UnitError as exc:
        raise ConfigError(f"[{sec.name}] {key}: {exc}") from None


def _num(sec, key, default=None, cast=float):
    if key not in sec:
        return default
    raw = sec[key].strip()
    try:
        if cast is int:
            return int(raw) if raw.lstrip("+-").isdigit() else int(float(raw))
        return cast(raw)
    except ValueError:
        raise ConfigError(f"[{sec.name}] {key}: expected a number, got {sec[key]!r}") from None


def _bool(sec, key, default):
    if key not in sec:
        return default
    try:
        return sec.getboolean(key)
    except ValueError:
        raise ConfigError(f"[{sec.name}] {key}: expected on/off") from None


def _magnet(sec) -> MagnetSpec:
    return MagnetSpec(
        mass=_get(sec, "mass", "mass", required=True),
        radius=_get(sec, "radius", "length", required=True),
        thickness=_get(sec, "thickness", "length", required=True),
        density=_get(sec, "density", "density"),
        magnetization=_get(sec, "magnetization", "magnetization"),
        residual_flux_density=_get(sec, "residual_flux_density", "flux_density"),
    )


def _mode(label: str, sec, magnet: MagnetSpec | None, g: float) -> ModeSpec:
    kind = sec.get("kind", "librational" if label in ("alpha", "beta") else "translational")
    if "omega0" in sec:
        omega0 = _get(sec, "omega0", "angular_frequency")
    elif sec.get("frequency", "").strip() == "analytic":
        if magnet is None or label not in ("z", "beta"):
            raise ConfigError(f"[{sec.name}] analytic frequency needs [magnet] and a z or beta mode")
        wz, wb = mode_frequencies(magnet, g)
        omega0 = wz if label == "z" else wb
    else:
        omega0 = 2 * math.pi * _get(sec, "frequency", "frequency", required=True)
    key = "mass" if kind == "translational" else "moment_of_inertia"
    raw = sec.get(key, sec.get("inertia"))
    if raw is None:
        raise ConfigError(f"[{sec.name}] needs {key}")
    if raw.strip() == "magnet":
        if magnet is None:
            raise ConfigError(f"[{sec.name}] {key} = magnet needs a [magnet] section")
        inertia = magnet.mass if kind == "translational" else moment_of_inertia(magnet)
    else:
        inertia = _get(sec, key if key in sec else "inertia", "inertia")
    q = _num(sec, "quality_factor")
    if q is None:
        raise ConfigError(f"[{sec.name}] needs quality_factor")
    return ModeSpec(label, kind, omega0, inertia, q, _get(sec, "bath_temperature", "temperature", required=True))


def parse_config(text: str, *, source: str = "<config>") -> ExperimentConfig:
    cp = configparser.ConfigParser(inline_comment_prefixes=("#",))
    cp.optionxform = str
    try:
        cp.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError(str(exc)) from None
    try:
        return _build(cp)
    except ConfigError:
        raise
    except ValueError as exc:  # dataclass invariants
        raise ConfigError(str(exc)) from None


def _build(cp) -> ExperimentConfig:
    g = _get(cp["physics"], "gravity", "acceleration", 9.81) if cp.has_section("physics") else 9.81
    magnet = _magnet(cp["magnet"]) if cp.has_section("magnet") else None
    modes = {}
    limits = {}
    for name in cp.sections():
        if name.startswith("mode."):
            label = name[5:]
            modes[label] = _mode(label, cp[name], magnet, g)
        elif name.startswith("limits."):
            sec = cp[name]
            limits[name[7:]] = LimitSettings(
                detector_noise_psd=_get(sec, "detector_noise_psd", "displacement_psd"),
                force_psd=_get(sec, "force_psd", "generalized_force_psd"),
                squid_flux_psd=_get(sec, "squid_flux_psd", "flux_psd"),
                flux_transfer_ratio=_num(sec, "flux_transfer_ratio"),
            )

    noise = None
    if cp.has_section("noise"):
        sec = cp["noise"]
        noise = NoiseConfig(
            thermal=_bool(sec, "thermal", True),
            vibration_accel_psd=_get(sec, "vibration_accel_psd", "vibration_psd", 0.0),
            detector_noise_psd=_get(sec, "detector_noise_psd", "displacement_psd", 0.0),
            seed=_num(sec, "seed", 0, int),
        )

    feedback = None
    if cp.has_section("feedback"):
        sec = cp["feedback"]
        feedback = FeedbackConfig(
            mode=sec.get("mode", "off"),
            gain=_num(sec, "gain", 0.0),
            phase_offset=_get(sec, "phase_offset", "angle", 0.0),
            bandpass_center=_get(sec, "bandpass_center", "angular_frequency"),
            bandpass_width=_get(sec, "bandpass_width", "angular_frequency"),
            loop_delay=_get(sec, "loop_delay", "time", 0.0),
        )

    coil = None
    if cp.has_section("coil"):
        sec = cp["coil"]
        coil = CoilGeometry(
            turns=_num(sec, "turns", 1, int),
            loop_radius=_get(sec, "loop_radius", "length", required=True),
            lateral_offset=_get(sec, "lateral_offset", "length", 0.0),
            separation=_get(sec, "separation", "length", required=True),
            orientation=sec.get("orientation", "perpendicular"),
        )

    coil_search = None
    if cp.has_section("coil_search"):
        sec = cp["coil_search"]
        coil_search = CoilSearch(
            x_min=_get(sec, "x_min", "length", required=True),
            x_max=_get(sec, "x_max", "length", required=True),
            z_min=_get(sec, "z_min", "length", required=True),
            z_max=_get(sec, "z_max", "length", required=True),
            orientations=tuple(o.strip() for o in sec.get("orientations", "perpendicular, parallel").split(",")),
            grid_points=_num(sec, "grid_points", 41, int),
        )

    simulation = None
    if cp.has_section("simulation"):
        sec = cp["simulation"]
        ts = sec.get("timestep", "auto").strip()
        simulation = SimulationSettings(
            mode=sec.get("mode", "z"),
            duration=_get(sec, "duration", "time", required=True),
            timestep=None if ts == "auto" else _get(sec, "timestep", "time"),
            record_every=_num(sec, "record_every", 1, int),
            runs=_num(sec, "runs", 1, int),
            max_quality_factor=_num(sec, "max_quality_factor"),
            x0=_get(sec, "x0", "amplitude"),
        )

    analysis = None
    if cp.has_section("analysis"):
        sec = cp["analysis"]
        ref_rms, ref_dim = None, "length"
        if "reference_rms" in sec:
            try:
                ref_rms, ref_dim = parse_quantity(sec["reference_rms"], "amplitude", with_dimension=True)
            except UnitError as exc:
                raise ConfigError(f"[analysis] reference_rms: {exc}") from None
        analysis = AnalysisSettings(
            channel=sec.get("channel", "measured_position"),
            segment_length=_num(sec, "segment_length", None, int),
            band_linewidths=_num(sec, "band_linewidths", 5.0),
            settle_fraction=_num(sec, "settle_fraction", 0.1),
            reference_temperature=_get(sec, "reference_temperature", "temperature"),
            reference_rms=ref_rms,
            reference_rms_dimension=ref_dim,
        )

    pressure = None
    if cp.has_section("pressure"):
        sec = cp["pressure"]
        pressure = PressureReading(
            gauge_value=_get(sec, "gauge_value", "pressure", required=True),
            warm_temperature=_get(sec, "warm_temperature", "temperature", required=True),
            cold_temperature=_get(sec, "cold_temperature", "temperature", required=True),
        )

    outputs = OutputSettings()
    if cp.has_section("outputs"):
        sec = cp["outputs"]
        outputs = OutputSettings(sec.get("directory", "out"), sec.get("timeseries_format", "csv"))
        if outputs.timeseries_format not in ("csv", "bin"):
            raise ConfigError("[outputs] timeseries_format must be csv or bin")

    return ExperimentConfig(magnet, modes, noise, feedback, coil, coil_search, simulation, analysis, limits,
                            pressure, outputs)


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(path)
    return parse_config(path.read_text(), source=str(path))


def dump_config(cfg: ExperimentConfig) -> str:
    """Serialize with every value in canonical SI units."""
    out: list[str] = []

    def section(name, items):
        items = [(k, v) for k, v in items if v is not None]
        out.append(f"[{name}]")
        out.extend(f"{k} = {v}" for k, v in items)
        out.append("")

    q = format_quantity
    if cfg.magnet:
        m = cfg.magnet
        section("magnet", [
            ("mass", q(m.mass, "mass")),
            ("radius", q(m.radius, "length")),
            ("thickness", q(m.thickness, "length")),
            ("density", None if m.density is None else q(m.density, "density")),
            ("magnetization", None if m.magnetization is None else q(m.magnetization, "magnetization")),
            ("residual_flux_density",
             None if m.residual_flux_density is None else q(m.residual_flux_density, "flux_density")),
        ])
    for label, mode in cfg.modes.items():
        key, dim = ("mass", "mass") if mode.kind == "translational" else ("moment_of_inertia", "moment_of_inertia")
        section(f"mode.{label}", [
            ("kind", mode.kind),
            ("omega0", q(mode.omega0, "angular_frequency")),
            (key, q(mode.inertia, dim)),
            ("quality_factor", repr(mode.quality_factor)),
            ("bath_temperature", q(mode.bath_temperature, "temperature")),
        ])
    if cfg.noise:
        n = cfg.noise
        unit_dim = "length_psd"
        if cfg.simulation and cfg.simulation.mode in cfg.modes and cfg.modes[cfg.simulation.mode].kind == "librational":
            unit_dim = "angle_psd"
        section("noise", [
            ("thermal", "on" if n.thermal else "off"),
            ("vibration_accel_psd", q(n.vibration_accel_psd, "accel_psd")),
            ("detector_noise_psd", q(n.detector_noise_psd, unit_dim)),
            ("seed", str(n.seed)),
        ])
    if cfg.feedback:
        f = cfg.feedback
        section("feedback", [
            ("mode", f.mode),
            ("gain", repr(f.gain)),
            ("phase_offset", q(f.phase_offset, "angle")),
            ("bandpass_center", None if f.bandpass_center is None else q(f.bandpass_center, "angular_frequency")),
            ("bandpass_width", None if f.bandpass_width is None else q(f.bandpass_width, "angular_frequency")),
            ("loop_delay", q(f.loop_delay, "time")),
        ])
    if cfg.coil:
        c = cfg.coil
        section("coil", [
            ("turns", str(c.turns)),
            ("loop_radius", q(c.loop_radius, "length")),
            ("lateral_offset", q(c.lateral_offset, "length")),
            ("separation", q(c.separation, "length")),
            ("orientation", c.orientation),
        ])
    if cfg.coil_search:
        s = cfg.coil_search
        section("coil_search", [
            ("x_min", q(s.x_min, "length")), ("x_max", q(s.x_max, "length")),
            ("z_min", q(s.z_min, "length")), ("z_max", q(s.z_max, "length")),
            ("orientations", ", ".join(s.orientations)), ("grid_points", str(s.grid_points)),
        ])
    if cfg.simulation:
        s = cfg.simulation
        unit_dim = "angle" if s.mode in cfg.modes and cfg.modes[s.mode].kind == "librational" else "length"
        section("simulation", [
            ("mode", s.mode),
            ("duration", q(s.duration, "time")),
            ("timestep", "auto" if s.timestep is None else q(s.timestep, "time")),
            ("record_every", str(s.record_every)),
            ("runs", str(s.runs)),
            ("max_quality_factor", None if s.max_quality_factor is None else repr(s.max_quality_factor)),
            ("x0", None if s.x0 is None else q(s.x0, unit_dim)),
        ])
    if cfg.analysis:
        a = cfg.analysis
        section("analysis", [
            ("channel", a.channel),
            ("segment_length", None if a.segment_length is None else str(a.segment_length)),
            ("band_linewidths", repr(a.band_linewidths)),
            ("settle_fraction", repr(a.settle_fraction)),
            ("reference_temperature",
             None if a.reference_temperature is None else q(a.reference_temperature, "temperature")),
            ("reference_rms", None if a.reference_rms is None else q(a.reference_rms, a.reference_rms_dimension)),
        ])
    for label, lim in cfg.limits.items():
        dim = "angle_psd" if label in cfg.modes and cfg.modes[label].kind == "librational" else "length_psd"
        fdim = "torque_psd" if dim == "angle_psd" else "force_psd"
        section(f"limits.{label}", [
            ("detector_noise_psd", None if lim.detector_noise_psd is None else q(lim.detector_noise_psd, dim)),
            ("force_psd", None if lim.force_psd is None else q(lim.force_psd, fdim)),
            ("squid_flux_psd", None if lim.squid_flux_psd is None else q(lim.squid_flux_psd, "flux_psd")),
            ("flux_transfer_ratio", None if lim.flux_transfer_ratio is None else repr(lim.flux_transfer_ratio)),
        ])
    if cfg.pressure:
        p = cfg.pressure
        section("pressure", [
            ("gauge_value", q(p.gauge_value, "pressure")),
            ("warm_temperature", q(p.warm_temperature, "temperature")),
            ("cold_temperature", q(p.cold_temperature, "temperature")),
        ])
    section("outputs", [("directory", cfg.outputs.directory), ("timeseries_format", cfg.outputs.timeseries_format)])
    return "\n".join(out)
