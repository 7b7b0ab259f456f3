"""Flux coupling between the levitated dipole and a pick-up coil.

Geometry: the dipole sits at the origin pointing along x.  The coil centre
is at lateral offset ``x`` and height ``z``.  In the *perpendicular*
orientation the coil normal is z (normal perpendicular to the moment); in
the *parallel* orientation it is x.  The coil is treated as a point loop:
flux = N * B(centre) . n * pi R^2.

The closed forms used here are the published ones, kept verbatim because
the quoted couplings (4.24e-10 and 4.77e-7 Wb/m) follow from them:

    perpendicular  Phi = 3 N mu0 R^2 mu x z / (4 s^2)
    parallel       Phi = N mu0 R^2 mu / 4 * (3 x^2 / s^2 - 1 / s^(5/2))
    dPhi_perp/dz   = 3 N mu0 R^2 mu x (x^2 - 3 z^2) / (4 s^3)
    dPhi_par/dz    = N mu0 R^2 mu / 4 * (3 z / s^(5/2) - 12 x^2 z / s^3)

with s = x^2 + z^2.  They are not dimensionally homogeneous: the
perpendicular flux is exactly |r| times the point-loop flux, and the
printed parallel flux is not the antiderivative of the printed parallel
coupling.  ``variant="consistent"`` swaps the parallel flux for
``3 x^2 / s^2 - 1 / s^(3/2)``, whose z-derivative is exactly the printed
coupling.  :func:`point_loop_flux` gives the dimensionally correct flux.
"""

from __future__ import annotations

import io
import itertools
import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import optimize

from .constants import MU_0
from .series import atomic_write_text

__all__ = [
    "CoilGeometry",
    "DipoleSource",
    "dipole_field",
    "flux",
    "point_loop_flux",
    "coupling_dz",
    "optimize_geometry",
    "coupling_map",
    "coupling_map_csv",
]

ORIENTATIONS = ("perpendicular", "parallel")


@dataclass(frozen=True)
class CoilGeometry:
    turns: int
    loop_radius: float
    lateral_offset: float
    separation: float
    orientation: str = "perpendicular"

    def __post_init__(self):
        if self.turns < 1:
            raise ValueError("turns must be >= 1")
        if not self.loop_radius > 0:
            raise ValueError("loop_radius must be positive")
        if self.lateral_offset < 0 or self.separation < 0:
            raise ValueError("offsets must be non-negative")
        if self.orientation not in ORIENTATIONS:
            raise ValueError(f"orientation must be one of {ORIENTATIONS}")

    @property
    def normal(self) -> np.ndarray:
        return np.array([0.0, 0.0, 1.0]) if self.orientation == "perpendicular" else np.array([1.0, 0.0, 0.0])


@dataclass(frozen=True)
class DipoleSource:
    moment: float
    axis: tuple = (1.0, 0.0, 0.0)
    radius: float | None = None  # magnet size, only used for the near-field warning

    def __post_init__(self):
        if self.moment < 0:
            raise ValueError("moment must be non-negative")
        a = np.asarray(self.axis, dtype=float)
        if not math.isclose(float(np.linalg.norm(a)), 1.0, rel_tol=1e-9):
            raise ValueError("axis must be a unit vector")

    @property
    def vector(self) -> np.ndarray:
        return self.moment * np.asarray(self.axis, dtype=float)


def dipole_field(source: DipoleSource, position) -> np.ndarray:
    """Field (T) of a point dipole at ``position`` (m) relative to it."""
    r = np.asarray(position, dtype=float)
    d = float(np.linalg.norm(r))
    if d == 0:
        raise ValueError("field is undefined at the dipole position")
    rhat = r / d
    mu = source.vector
    return MU_0 / (4 * math.pi * d**3) * (3 * np.dot(mu, rhat) * rhat - mu)


def _check(geometry: CoilGeometry, source: DipoleSource):
    x, z = geometry.lateral_offset, geometry.separation
    if x == 0 and z == 0:
        raise ValueError("coil centre coincides with the dipole")
    if source.radius is not None and z < 5 * source.radius:
        warnings.warn(
            f"separation {z:g} m is within 5 magnet radii; the point-dipole model is unreliable",
            stacklevel=3,
        )
    return x, z, x * x + z * z


def _prefactor(geometry: CoilGeometry, source: DipoleSource) -> float:
    return geometry.turns * MU_0 * geometry.loop_radius**2 * source.moment / 4


def flux(geometry: CoilGeometry, source: DipoleSource, variant: str = "printed") -> float:
    """Closed-form flux.  ``variant`` only affects the parallel orientation."""
    x, z, s = _check(geometry, source)
    c = _prefactor(geometry, source)
    if geometry.orientation == "perpendicular":
        return 3 * c * x * z / s**2
    if variant == "printed":
        return c * (3 * x * x / s**2 - 1 / s**2.5)
    if variant == "consistent":
        return c * (3 * x * x / s**2 - 1 / s**1.5)
    raise ValueError(f"unknown variant {variant!r}")


def point_loop_flux(geometry: CoilGeometry, source: DipoleSource) -> float:
    """N * pi R^2 * B(centre) . n, evaluated from the dipole field."""
    _check(geometry, source)
    centre = np.array([geometry.lateral_offset, 0.0, geometry.separation])
    b = dipole_field(source, centre)
    return geometry.turns * math.pi * geometry.loop_radius**2 * float(b @ geometry.normal)


def coupling_dz(geometry: CoilGeometry, source: DipoleSource) -> float:
    """Closed-form dPhi/dz (Wb/m) for the coil's orientation."""
    x, z, s = _check(geometry, source)
    c = _prefactor(geometry, source)
    if geometry.orientation == "perpendicular":
        return 3 * c * x * (x * x - 3 * z * z) / s**3
    return c * (3 * z / s**2.5 - 12 * x * x * z / s**3)


def _grid(lo, hi, n):
    return np.array([lo]) if hi == lo else np.linspace(lo, hi, n)


@dataclass
class OptimizationResult:
    geometry: CoilGeometry
    coupling: float
    grid_best: float


def optimize_geometry(
    source: DipoleSource,
    x_bounds,
    z_bounds,
    turns: int,
    loop_radius: float,
    orientations=ORIENTATIONS,
    grid_points: int = 41,
    refine_rounds: int = 4,
) -> OptimizationResult:
    """Maximize |dPhi/dz| over a box of (x, z) and the given orientations.

    A uniform grid scan picks the best vertex per orientation; alternating
    bounded scalar searches along x and z then refine it within the
    neighbouring grid cells.  The result is never worse than the best grid
    vertex.
    """
    (x_lo, x_hi), (z_lo, z_hi) = x_bounds, z_bounds
    if x_lo > x_hi or z_lo > z_hi or x_lo < 0 or not z_lo > 0 or not orientations:
        raise ValueError("empty or invalid search box (need 0 <= x_lo <= x_hi, 0 < z_lo <= z_hi)")
    xs, zs = _grid(x_lo, x_hi, grid_points), _grid(z_lo, z_hi, grid_points)

    def value(x, z, orient):
        g = CoilGeometry(turns, loop_radius, x, z, orient)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            return abs(coupling_dz(g, source))

    best = None
    grid_best = 0.0
    for orient in orientations:
        vals = np.array([[value(x, z, orient) for z in zs] for x in xs])
        i, j = np.unravel_index(int(np.argmax(vals)), vals.shape)
        grid_best = max(grid_best, float(vals[i, j]))
        x, z = float(xs[i]), float(zs[j])
        xb = (float(xs[max(i - 1, 0)]), float(xs[min(i + 1, len(xs) - 1)]))
        zb = (float(zs[max(j - 1, 0)]), float(zs[min(j + 1, len(zs) - 1)]))
        cur = float(vals[i, j])
        for _ in range(refine_rounds):
            if xb[1] > xb[0]:
                r = optimize.minimize_scalar(lambda t: -value(t, z, orient), bounds=xb, method="bounded",
                                             options={"xatol": 1e-12})
                if -r.fun > cur:
                    x, cur = float(r.x), float(-r.fun)
            if zb[1] > zb[0]:
                r = optimize.minimize_scalar(lambda t: -value(x, t, orient), bounds=zb, method="bounded",
                                             options={"xatol": 1e-12})
                if -r.fun > cur:
                    z, cur = float(r.x), float(-r.fun)
        if best is None or cur > best[0]:
            best = (cur, CoilGeometry(turns, loop_radius, x, z, orient))
    return OptimizationResult(best[1], best[0], grid_best)


def coupling_map(source: DipoleSource, xs, zs, turns: int, loop_radius: float, orientations=ORIENTATIONS):
    """Rows ``(x_m, z_m, orientation, dphi_dz_wb_per_m)`` over a grid."""
    rows = []
    for orient, x, z in itertools.product(orientations, xs, zs):
        g = CoilGeometry(turns, loop_radius, float(x), float(z), orient)
        rows.append((float(x), float(z), orient, coupling_dz(g, source)))
    return rows


def coupling_map_csv(rows, path=None) -> str:
    buf = io.StringIO()
    buf.write("x_m,z_m,orientation,dphi_dz_wb_per_m\n")
    for x, z, o, c in rows:
        buf.write(f"{x!r},{z!r},{o},{c!r}\n")
    text = buf.getvalue()
    if path is not None:
        atomic_write_text(path, text)
    return text
