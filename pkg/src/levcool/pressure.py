"""Gauge-reading corrections for a helium-filled, thermally graded vacuum can.

Gauges read nitrogen-equivalent pressure.  Helium needs a factor C that is
only defined in the Pirani range (> 2e-2 mbar, C = 0.8) and the
Bayard-Alpert range (< 1e-3 mbar, C = 5.9); readings in between are
rejected.  Thermal transpiration then scales the warm-side pressure to the
cold side by sqrt(T_cold / T_warm).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

PIRANI_MIN = 2e-2  # mbar
BAYARD_ALPERT_MAX = 1e-3  # mbar
PIRANI_HELIUM_FACTOR = 0.8
BAYARD_ALPERT_HELIUM_FACTOR = 5.9


class PressureRangeError(ValueError):
    pass


@dataclass(frozen=True)
class PressureReading:
    gauge_value: float
    warm_temperature: float
    cold_temperature: float

    def __post_init__(self):
        if not self.gauge_value > 0:
            raise ValueError("gauge_value must be positive")
        if not (self.warm_temperature > 0 and self.cold_temperature > 0):
            raise ValueError("temperatures must be positive")


@dataclass(frozen=True)
class PressureCorrection:
    factor: float
    gas_corrected: float
    cold_side: float

    def as_dict(self):
        return {"factor": self.factor, "gas_corrected_mbar": self.gas_corrected, "cold_side_mbar": self.cold_side}


def helium_factor(gauge_value: float) -> float:
    if gauge_value > PIRANI_MIN:
        return PIRANI_HELIUM_FACTOR
    if gauge_value < BAYARD_ALPERT_MAX:
        return BAYARD_ALPERT_HELIUM_FACTOR
    raise PressureRangeError(
        f"no correction factor defined for {gauge_value:g} mbar "
        f"(between {BAYARD_ALPERT_MAX:g} and {PIRANI_MIN:g} mbar)"
    )


def correct_pressure(reading: PressureReading) -> PressureCorrection:
    c = helium_factor(reading.gauge_value)
    gas = c * reading.gauge_value
    cold = gas * math.sqrt(reading.cold_temperature / reading.warm_temperature)
    return PressureCorrection(c, gas, cold)
