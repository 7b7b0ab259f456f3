"""Feedback-cooling limits and the parameter-table check.

With force noise ``S_F`` and detector displacement noise ``S_xd`` (both
one-sided), cold damping bottoms out at

    N_min = sqrt(S_F S_xd) / (2 hbar),    T_min = N_min hbar omega0 / k_B

The same expressions hold for librational modes with torque and angle noise.
"""

from __future__ import annotations

import configparser
import json
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from .coil import CoilGeometry, DipoleSource, coupling_dz
from .constants import FLUX_QUANTUM, HBAR, K_B
from .langevin import ModeSpec, thermal_force_psd
from .spectral import thermal_amplitude
from .trap import MagnetSpec, dipole_moment, mode_frequencies, moment_of_inertia
from .units import parse_quantity

__all__ = [
    "NoiseBudget",
    "LimitReport",
    "min_temperature",
    "detector_noise_from_flux",
    "infer_flux_transfer_ratio",
    "TableRow",
    "TableReport",
    "table_report",
    "default_fixture_path",
]

BACKACTION_CAVEAT = (
    "SQUID backaction force noise is not included; the limit assumes the "
    "force noise is thermal and the detector noise is white near the mode."
)


@dataclass(frozen=True)
class NoiseBudget:
    force_psd: float
    detector_psd: float | None = None
    squid_flux_psd: float | None = None
    flux_coupling: float | None = None
    flux_transfer_ratio: float | None = None

    def __post_init__(self):
        for name in ("force_psd", "detector_psd", "squid_flux_psd"):
            v = getattr(self, name)
            if v is not None and v < 0:
                raise ValueError(f"{name} must be non-negative")

    def resolved_detector_psd(self) -> float:
        if self.detector_psd is not None:
            return self.detector_psd
        if None in (self.squid_flux_psd, self.flux_coupling, self.flux_transfer_ratio):
            raise ValueError("budget needs detector_psd or the full SQUID flux chain")
        return detector_noise_from_flux(self.squid_flux_psd, self.flux_coupling, self.flux_transfer_ratio)


@dataclass
class LimitReport:
    t_min: float
    n_min: float
    min_amplitude: float
    caveats: list[str] = field(default_factory=lambda: [BACKACTION_CAVEAT])

    def as_dict(self):
        return {"t_min_k": self.t_min, "n_min": self.n_min, "min_amplitude": self.min_amplitude, "caveats": self.caveats}


def min_temperature(mode: ModeSpec, budget: NoiseBudget) -> LimitReport:
    s_f = budget.force_psd
    s_d = budget.resolved_detector_psd()
    if not (s_f > 0 and s_d > 0):
        raise ValueError("force and detector PSDs must be positive")
    n_min = math.sqrt(s_f * s_d) / (2 * HBAR)
    t_min = n_min * HBAR * mode.omega0 / K_B
    return LimitReport(t_min, n_min, thermal_amplitude(mode, t_min))


def detector_noise_from_flux(squid_flux_psd: float, flux_coupling: float, flux_transfer_ratio: float) -> float:
    """Displacement PSD (m^2/Hz) equivalent to a SQUID flux noise floor.

    ``squid_flux_psd`` is in flux quanta squared per Hz; ``flux_coupling``
    is dPhi/dz of the pick-up coil; ``flux_transfer_ratio`` is the factor
    between coil flux and SQUID flux.
    """
    if flux_coupling == 0:
        raise ValueError("zero flux coupling: motion is undetectable")
    if not flux_transfer_ratio > 0:
        raise ValueError("flux_transfer_ratio must be positive")
    asd = math.sqrt(squid_flux_psd) * FLUX_QUANTUM / (flux_transfer_ratio * abs(flux_coupling))
    return asd * asd


def infer_flux_transfer_ratio(squid_flux_psd: float, flux_coupling: float, detector_psd: float) -> float:
    """Transfer ratio that makes :func:`detector_noise_from_flux` return ``detector_psd``."""
    return math.sqrt(squid_flux_psd) * FLUX_QUANTUM / (math.sqrt(detector_psd) * abs(flux_coupling))


# -- parameter table ----------------------------------------------------------


def default_fixture_path() -> Path:
    return Path(str(resources.files("levcool") / "data" / "table.ini"))


@dataclass
class TableRow:
    key: str
    description: str
    unit: str
    value: float | None
    reported: float | None
    tolerance: float
    note: str = ""

    @property
    def deviation(self) -> float | None:
        if self.value is None or self.reported is None:
            return None
        return (self.value - self.reported) / self.reported

    @property
    def missing(self) -> bool:
        return self.value is None or self.reported is None

    def ok(self, tolerance: float | None = None) -> bool:
        tol = self.tolerance if tolerance is None else max(tolerance, self.tolerance)
        return not self.missing and abs(self.deviation) <= tol

    def as_dict(self):
        return {
            "key": self.key,
            "description": self.description,
            "unit": self.unit,
            "value": self.value,
            "reported": self.reported,
            "relative_deviation": self.deviation,
            "tolerance": self.tolerance,
            "ok": self.ok(),
            "note": self.note,
        }


@dataclass
class TableReport:
    rows: list[TableRow]
    inferred: dict[str, float]

    def row(self, key: str) -> TableRow:
        return next(r for r in self.rows if r.key == key)

    def failures(self, tolerance: float | None = None) -> list[TableRow]:
        return [r for r in self.rows if not r.ok(tolerance)]

    def to_json(self) -> str:
        return json.dumps({"rows": [r.as_dict() for r in self.rows], "inferred": self.inferred}, indent=2)

    def to_text(self, tolerance: float | None = None) -> str:
        head = f"{'key':<28} {'computed':>12} {'reported':>12} {'dev %':>8}  {'unit':<14} ok"
        lines = [head, "-" * len(head)]
        for r in self.rows:
            if r.missing:
                lines.append(f"{r.key:<28} {'missing input':>34}")
                continue
            flag = "yes" if r.ok(tolerance) else "NO"
            lines.append(f"{r.key:<28} {r.value:>12.4g} {r.reported:>12.4g} {100 * r.deviation:>8.2f}  {r.unit:<14} {flag}")
        for k, v in self.inferred.items():
            lines.append(f"(inferred) {k} = {v:.4g}")
        return "\n".join(lines)


# Each row: key, description, unit shown, kind used to parse the reported value.
_ROWS = [
    ("moment_of_inertia", "moment of inertia", "kg*m^2", "moment_of_inertia"),
    ("dipole_moment", "dipole moment", "A*m^2", "dipole_moment"),
    ("omega_z_analytic", "analytic z frequency", "Hz", "frequency"),
    ("omega_beta_analytic", "analytic beta frequency", "Hz", "frequency"),
    ("force_noise_eq_z", "force noise at equilibrium temperature", "N/rtHz", "force_asd"),
    ("force_noise_bath_z", "force noise at bath temperature", "N/rtHz", "force_asd"),
    ("torque_noise_eq_beta", "torque noise at equilibrium temperature", "N*m/rtHz", "torque_asd"),
    ("torque_noise_bath_beta", "torque noise at bath temperature", "N*m/rtHz", "torque_asd"),
    ("t_min_z", "minimum temperature, current detection", "K", "temperature"),
    ("t_min_squid_z", "minimum temperature, SQUID-limited detection", "K", "temperature"),
    ("t_min_beta", "minimum temperature, current detection", "K", "temperature"),
    ("t_min_squid_beta", "minimum temperature, SQUID-limited detection", "K", "temperature"),
    ("n_min_squid_z", "minimum phonon number, SQUID-limited", "", "dimensionless"),
    ("n_min_squid_beta", "minimum phonon number, SQUID-limited", "", "dimensionless"),
    ("amplitude_eq_z", "amplitude at equilibrium temperature", "m", "length"),
    ("amplitude_ref_z", "amplitude at reference temperature", "m", "length"),
    ("amplitude_fb_z", "amplitude at feedback temperature", "m", "length"),
    ("amplitude_min_z", "amplitude at minimum temperature", "m", "length"),
    ("amplitude_min_squid_z", "amplitude at SQUID-limited minimum", "m", "length"),
    ("amplitude_eq_beta", "amplitude at equilibrium temperature", "rad", "angle"),
    ("amplitude_ref_beta", "amplitude at reference temperature", "rad", "angle"),
    ("amplitude_fb_beta", "amplitude at feedback temperature", "rad", "angle"),
    ("amplitude_min_beta", "amplitude at minimum temperature", "rad", "angle"),
    ("amplitude_min_squid_beta", "amplitude at SQUID-limited minimum", "rad", "angle"),
    ("coupling_perpendicular", "|dPhi/dz|, perpendicular coil", "Wb/m", "flux_coupling"),
    ("coupling_parallel", "|dPhi/dz|, parallel coil", "Wb/m", "flux_coupling"),
    ("coupling_ratio", "parallel / perpendicular coupling", "", "dimensionless"),
    ("detector_noise_parallel_z", "SQUID-limited detection noise, parallel coil", "m/rtHz", "length_asd"),
    ("n_min_parallel_z", "minimum phonon number, parallel coil", "", "dimensionless"),
    ("t_min_parallel_z", "minimum temperature, parallel coil", "K", "temperature"),
]


def _q(section, key, kind):
    if key not in section:
        return None
    return parse_quantity(section[key], kind)


def _compute(cfg: configparser.ConfigParser) -> tuple[dict[str, float | None], dict[str, float]]:
    mag = cfg["magnet"]
    magnet = MagnetSpec(
        mass=_q(mag, "mass", "mass"),
        radius=_q(mag, "radius", "length"),
        thickness=_q(mag, "thickness", "length"),
        density=_q(mag, "density", "density"),
        magnetization=_q(mag, "magnetization", "magnetization"),
        residual_flux_density=_q(mag, "residual_flux_density", "flux_density"),
    )
    inertia = moment_of_inertia(magnet)
    mu = dipole_moment(magnet)
    out: dict[str, float | None] = {"moment_of_inertia": inertia, "dipole_moment": mu}
    wz, wb = mode_frequencies(magnet)
    out["omega_z_analytic"] = wz / (2 * math.pi)
    out["omega_beta_analytic"] = wb / (2 * math.pi)
    inferred: dict[str, float] = {}

    modes = {}
    for label, kind, mass in (("z", "translational", magnet.mass), ("beta", "librational", inertia)):
        sec = cfg[f"mode.{label}"]
        modes[label] = (
            ModeSpec(label, kind, 2 * math.pi * _q(sec, "frequency", "frequency"), mass,
                     float(sec["quality_factor"]), _q(sec, "bath_temperature", "temperature")),
            sec,
        )

    for label, (mode, sec) in modes.items():
        noun = "force" if label == "z" else "torque"
        T_eq = _q(sec, "equilibrium_temperature", "temperature")
        T_bath = mode.bath_temperature
        s_eq = thermal_force_psd(mode, T_eq)
        s_bath = thermal_force_psd(mode, T_bath)
        out[f"{noun}_noise_eq_{label}"] = math.sqrt(s_eq)
        out[f"{noun}_noise_bath_{label}"] = math.sqrt(s_bath)
        det = _q(sec, "detector_noise", "displacement_psd")
        squid_det = _q(sec, "squid_detector_noise", "displacement_psd")
        cur = min_temperature(mode, NoiseBudget(s_eq, det)) if det else None
        fut = min_temperature(mode, NoiseBudget(s_bath, squid_det)) if squid_det else None
        out[f"t_min_{label}"] = cur.t_min if cur else None
        out[f"t_min_squid_{label}"] = fut.t_min if fut else None
        out[f"n_min_squid_{label}"] = fut.n_min if fut else None
        out[f"amplitude_eq_{label}"] = thermal_amplitude(mode, T_eq)
        out[f"amplitude_ref_{label}"] = thermal_amplitude(mode, _q(sec, "reference_temperature", "temperature"))
        out[f"amplitude_fb_{label}"] = thermal_amplitude(mode, _q(sec, "feedback_temperature", "temperature"))
        out[f"amplitude_min_{label}"] = cur.min_amplitude if cur else None
        out[f"amplitude_min_squid_{label}"] = fut.min_amplitude if fut else None

    if cfg.has_section("coil"):
        c = cfg["coil"]
        source = DipoleSource(mu)
        geo = CoilGeometry(int(c["turns"]), _q(c, "loop_radius", "length"), _q(c, "lateral_offset", "length"),
                           _q(c, "separation", "length"), "perpendicular")
        perp = abs(coupling_dz(geo, source))
        par = abs(coupling_dz(CoilGeometry(geo.turns, geo.loop_radius, geo.lateral_offset, geo.separation, "parallel"),
                              source))
        out["coupling_perpendicular"] = perp
        out["coupling_parallel"] = par
        out["coupling_ratio"] = par / perp
        zmode, zsec = modes["z"]
        flux_noise = _q(zsec, "squid_flux_noise", "flux_psd")
        squid_det = _q(zsec, "squid_detector_noise", "displacement_psd")
        if flux_noise and squid_det:
            ratio = infer_flux_transfer_ratio(flux_noise, perp, squid_det)
            inferred["flux_transfer_ratio"] = ratio
            det_par = detector_noise_from_flux(flux_noise, par, ratio)
            out["detector_noise_parallel_z"] = math.sqrt(det_par)
            lim = min_temperature(zmode, NoiseBudget(thermal_force_psd(zmode), det_par))
            out["n_min_parallel_z"] = lim.n_min
            out["t_min_parallel_z"] = lim.t_min
    return out, inferred


def table_report(fixture=None, tolerance: float = 0.05) -> TableReport:
    """Recompute every derivable table row from the fixture's inputs.

    A row whose inputs are absent is reported with ``value=None`` rather
    than raising.  Rows may carry their own looser tolerance in the
    fixture's ``[tolerance]`` section (values quoted to one significant
    figure).
    """
    cfg = configparser.ConfigParser(inline_comment_prefixes=("#",))
    cfg.optionxform = str
    path = default_fixture_path() if fixture is None else Path(fixture)
    if not cfg.read(path):
        raise FileNotFoundError(path)
    values, inferred = {}, {}
    try:
        values, inferred = _compute(cfg)
    except (KeyError, TypeError) as exc:  # incomplete fixture: report what we can
        inferred["error"] = str(exc)
    expected = cfg["expected"] if cfg.has_section("expected") else {}
    tols = cfg["tolerance"] if cfg.has_section("tolerance") else {}
    rows = []
    for key, desc, unit, kind in _ROWS:
        reported = _q(expected, key, kind) if key in expected else None
        if reported is not None and kind.endswith("_asd"):
            reported = math.sqrt(reported)
        tol = float(tols[key]) if key in tols else tolerance
        rows.append(TableRow(key, desc, unit, values.get(key), reported, tol))
    return TableReport(rows, inferred)
