"""Static levitation of a cylindrical magnet above a superconducting plane.

The superconductor is replaced by a mirror dipole (method of images) so the
magnet sees the potential

    U(z, beta) = mu0 mu^2 / (64 pi z^3) * (1 + sin^2 beta) + m g z

with the closed-form minimum at z0 = (3 mu0 mu^2 / (64 pi m g))**(1/4) and
beta0 = 0.  Spring constants are the second derivatives of U at that point;
for the tilt mode this is d^2U/dbeta^2 (not d^2U/dz^2).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

from .constants import MU_0, STANDARD_GRAVITY

__all__ = [
    "MagnetSpec",
    "TrapSolution",
    "cylinder_volume",
    "cylinder_moment_of_inertia",
    "dipole_moment",
    "moment_of_inertia",
    "potential_energy",
    "equilibrium_height",
    "mode_frequencies",
    "solve_trap",
]


@dataclass(frozen=True)
class MagnetSpec:
    """Geometry and magnetization of the levitated cylinder (SI units).

    Give either ``magnetization`` (A/m) or ``residual_flux_density`` (T);
    if both are present they must agree to 1%.
    """

    mass: float
    radius: float
    thickness: float
    density: float | None = None
    magnetization: float | None = None
    residual_flux_density: float | None = None

    def __post_init__(self):
        if not (self.mass > 0 and self.radius > 0 and self.thickness > 0):
            raise ValueError("mass, radius and thickness must be positive")
        if self.magnetization is None and self.residual_flux_density is None:
            raise ValueError("one of magnetization / residual_flux_density is required")
        if self.magnetization is not None and self.magnetization < 0:
            raise ValueError("magnetization must be non-negative")
        if self.magnetization is not None and self.residual_flux_density is not None:
            implied = self.residual_flux_density / MU_0
            if not math.isclose(implied, self.magnetization, rel_tol=0.01):
                raise ValueError(
                    f"magnetization {self.magnetization:g} A/m disagrees with "
                    f"B_r/mu0 = {implied:g} A/m"
                )
        if self.density is not None:
            expected = self.density * self.volume
            if abs(expected - self.mass) > 0.05 * self.mass:
                warnings.warn(
                    f"mass {self.mass:g} kg differs from density*volume = {expected:g} kg by more than 5%",
                    stacklevel=3,
                )

    @property
    def volume(self) -> float:
        return cylinder_volume(self.radius, self.thickness)

    @property
    def magnetization_value(self) -> float:
        if self.magnetization is not None:
            return self.magnetization
        return self.residual_flux_density / MU_0


@dataclass(frozen=True)
class TrapSolution:
    z0: float
    beta0: float
    omega_z: float
    omega_beta: float
    dipole_moment: float
    moment_of_inertia: float


def cylinder_volume(radius: float, thickness: float) -> float:
    return math.pi * radius**2 * thickness


def cylinder_moment_of_inertia(mass: float, radius: float, thickness: float) -> float:
    """Moment of inertia about a diameter through the centre of mass."""
    return mass * (thickness**2 + 3 * radius**2) / 12


def dipole_moment(spec: MagnetSpec) -> float:
    return spec.magnetization_value * spec.volume


def moment_of_inertia(spec: MagnetSpec) -> float:
    return cylinder_moment_of_inertia(spec.mass, spec.radius, spec.thickness)


def potential_energy(spec: MagnetSpec, z: float, beta: float = 0.0, g: float = STANDARD_GRAVITY) -> float:
    """Image-dipole plus gravitational energy at height ``z`` and tilt ``beta``."""
    if z <= 0:
        raise ValueError("height must be positive; the image potential diverges at z <= 0")
    mu = dipole_moment(spec)
    return MU_0 * mu**2 / (64 * math.pi * z**3) * (1 + math.sin(beta) ** 2) + spec.mass * g * z


def equilibrium_height(spec: MagnetSpec, g: float = STANDARD_GRAVITY) -> float:
    mu = dipole_moment(spec)
    return (3 * MU_0 * mu**2 / (64 * math.pi * spec.mass * g)) ** 0.25


def mode_frequencies(spec: MagnetSpec, g: float = STANDARD_GRAVITY) -> tuple[float, float]:
    """Angular frequencies ``(omega_z, omega_beta)`` of the vertical and tilt modes."""
    z0 = equilibrium_height(spec, g)
    if z0 == 0:
        raise ValueError("zero dipole moment: the magnet does not levitate")
    inertia = moment_of_inertia(spec)
    omega_z = math.sqrt(4 * g / z0)
    omega_beta = math.sqrt(2 * z0 * g * spec.mass / (3 * inertia))
    return omega_z, omega_beta


def solve_trap(spec: MagnetSpec, g: float = STANDARD_GRAVITY) -> TrapSolution:
    omega_z, omega_beta = mode_frequencies(spec, g)
    return TrapSolution(
        z0=equilibrium_height(spec, g),
        beta0=0.0,
        omega_z=omega_z,
        omega_beta=omega_beta,
        dipole_moment=dipole_moment(spec),
        moment_of_inertia=moment_of_inertia(spec),
    )
