"""Quantity parsing for config files.

Every dimensioned field in a config is written as ``<number> <unit>``, e.g.
``radius = 100 um``.  :func:`parse_quantity` converts such a string to SI
given the *kind* of the field and refuses anything whose unit does not
belong to that kind.  Amplitude spectral densities (``m/rtHz``) are accepted
where a PSD is expected and are squared on the way in.
"""

from __future__ import annotations

import math
import re

__all__ = ["UnitError", "parse_quantity", "format_quantity", "CANONICAL_UNIT"]


class UnitError(ValueError):
    """Raised for a missing, unknown, or mismatched unit suffix."""


_PREFIX = {"": 1.0, "k": 1e3, "m": 1e-3, "u": 1e-6, "µ": 1e-6, "n": 1e-9, "p": 1e-12, "f": 1e-15}


def _prefixed(base: str, scale: float = 1.0, power: int = 1, prefixes: str = "kmunpf") -> dict[str, float]:
    out = {base: scale}
    for p in prefixes:
        out[p + base] = scale * _PREFIX[p] ** power
    out["µ" + base] = out.get("u" + base, scale)
    return out


# kind -> {suffix: factor to SI}
_UNITS: dict[str, dict[str, float]] = {
    "length": {**_prefixed("m"), "cm": 1e-2},
    "mass": {"kg": 1.0, "g": 1e-3, "mg": 1e-6, "ug": 1e-9, "µg": 1e-9},
    "time": _prefixed("s", prefixes="mun"),
    "frequency": _prefixed("Hz", prefixes="km"),
    "angular_frequency": {"rad/s": 1.0, "Hz": 2 * math.pi, "kHz": 2e3 * math.pi},
    "acceleration": {"m/s^2": 1.0},
    "rate": {"1/s": 1.0, "s^-1": 1.0, "Hz": 1.0},
    "temperature": _prefixed("K", prefixes="mun"),
    "angle": {**_prefixed("rad", prefixes="mun"), "deg": math.pi / 180},
    "magnetization": {"A/m": 1.0, "kA/m": 1e3},
    "flux_density": {"T": 1.0, "mT": 1e-3},
    "dipole_moment": {"A*m^2": 1.0, "A m^2": 1.0},
    "density": {"kg/m^3": 1.0, "g/cm^3": 1e3},
    "moment_of_inertia": {"kg*m^2": 1.0, "kg m^2": 1.0},
    "pressure": {"mbar": 1.0, "Pa": 1e-2, "bar": 1e3},
    "voltage": _prefixed("V", prefixes="mun"),
    "flux_coupling": {"Wb/m": 1.0, "Wb/rad": 1.0},
    "dimensionless": {"": 1.0, "1": 1.0},
    # spectral densities, one-sided
    "force_psd": {"N^2/Hz": 1.0},
    "force_asd": {"N/rtHz": 1.0},
    "torque_psd": {"(N*m)^2/Hz": 1.0, "N^2*m^2/Hz": 1.0},
    "torque_asd": {"N*m/rtHz": 1.0, "Nm/rtHz": 1.0},
    "length_psd": {"m^2/Hz": 1.0},
    "length_asd": {k + "/rtHz": v for k, v in _prefixed("m").items()},
    "angle_psd": {"rad^2/Hz": 1.0},
    "angle_asd": {k + "/rtHz": v for k, v in _prefixed("rad", prefixes="mun").items()},
    "accel_psd": {"(m/s^2)^2/Hz": 1.0, "m^2/s^4/Hz": 1.0},
    "accel_asd": {"m/s^2/rtHz": 1.0},
    "angular_accel_psd": {"(rad/s^2)^2/Hz": 1.0},
    "angular_accel_asd": {"rad/s^2/rtHz": 1.0},
    "flux_psd": {"Phi0^2/Hz": 1.0},
    "flux_asd": {"Phi0/rtHz": 1.0, "uPhi0/rtHz": 1e-6, "µPhi0/rtHz": 1e-6},
}

# Composite kinds: a field may accept several dimensions (e.g. a mode's
# detector noise is m^2/Hz or rad^2/Hz depending on the mode).
_ALIASES = {
    "inertia": ("mass", "moment_of_inertia"),
    "displacement_psd": ("length_psd", "angle_psd"),
    "generalized_force_psd": ("force_psd", "torque_psd"),
    "vibration_psd": ("accel_psd", "angular_accel_psd"),
    "amplitude": ("length", "angle", "voltage"),
}

CANONICAL_UNIT = {
    "length": "m",
    "mass": "kg",
    "time": "s",
    "frequency": "Hz",
    "angular_frequency": "rad/s",
    "acceleration": "m/s^2",
    "rate": "1/s",
    "temperature": "K",
    "angle": "rad",
    "magnetization": "A/m",
    "flux_density": "T",
    "dipole_moment": "A*m^2",
    "density": "kg/m^3",
    "moment_of_inertia": "kg*m^2",
    "pressure": "mbar",
    "voltage": "V",
    "flux_coupling": "Wb/m",
    "dimensionless": "",
    "force_psd": "N^2/Hz",
    "torque_psd": "(N*m)^2/Hz",
    "length_psd": "m^2/Hz",
    "angle_psd": "rad^2/Hz",
    "accel_psd": "(m/s^2)^2/Hz",
    "angular_accel_psd": "(rad/s^2)^2/Hz",
    "flux_psd": "Phi0^2/Hz",
}

_NUMBER = re.compile(r"^\s*([-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)\s*(.*?)\s*$")


def _kinds(kind: str) -> tuple[str, ...]:
    base = _ALIASES.get(kind, (kind,))
    out = []
    for k in base:
        out.append(k)
        if k.endswith("_psd"):
            out.append(k[:-4] + "_asd")
    return tuple(out)


def parse_quantity(text: str, kind: str, *, with_dimension: bool = False):
    """Parse ``"<number> <unit>"`` into an SI float.

    With ``with_dimension=True`` returns ``(value, dimension)`` where
    dimension is the matched base kind (ASD units report the PSD kind).
    """
    m = _NUMBER.match(str(text))
    if not m:
        raise UnitError(f"cannot parse quantity {text!r}")
    number, suffix = float(m.group(1)), m.group(2)
    for k in _kinds(kind):
        table = _UNITS[k]
        if suffix in table:
            value = number * table[suffix]
            dim = k
            if k.endswith("_asd"):
                value = value * value
                dim = k[:-4] + "_psd"
            return (value, dim) if with_dimension else value
    if suffix == "" and kind != "dimensionless":
        raise UnitError(f"missing unit on {text!r} (expected {kind})")
    raise UnitError(f"unit {suffix!r} in {text!r} is not a valid {kind} unit")


def format_quantity(value: float, dimension: str) -> str:
    """Inverse of :func:`parse_quantity` in canonical SI units, lossless."""
    unit = CANONICAL_UNIT[dimension]
    return f"{value!r} {unit}".rstrip()
