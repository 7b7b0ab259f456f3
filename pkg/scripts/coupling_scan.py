"""Pick-up coil coupling over offset and height for both orientations.

    python scripts/coupling_scan.py --out coupling.csv
"""

import argparse
import warnings

import numpy as np

from levcool.coil import CoilGeometry, DipoleSource, coupling_dz, coupling_map, coupling_map_csv, optimize_geometry


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--moment", type=float, default=1.4e-6, help="A m^2")
    ap.add_argument("--turns", type=int, default=15)
    ap.add_argument("--loop-radius", type=float, default=1e-3, help="m")
    ap.add_argument("--x-max", type=float, default=1e-3, help="m")
    ap.add_argument("--z-min", type=float, default=1e-3, help="m")
    ap.add_argument("--z-max", type=float, default=3e-3, help="m")
    ap.add_argument("--points", type=int, default=41)
    ap.add_argument("--out", help="CSV output path")
    args = ap.parse_args()

    src = DipoleSource(args.moment)
    for orient in ("perpendicular", "parallel"):
        g = CoilGeometry(args.turns, args.loop_radius, 0.3e-3, 2.5e-3, orient)
        print(f"{orient:13s} at x = 0.3 mm, z = 2.5 mm: |dPhi/dz| = {abs(coupling_dz(g, src)):.3e} Wb/m")

    res = optimize_geometry(src, (0.0, args.x_max), (args.z_min, args.z_max), args.turns, args.loop_radius,
                            grid_points=args.points)
    g = res.geometry
    print(f"best in box: {g.orientation}, x = {g.lateral_offset * 1e3:.3f} mm, z = {g.separation * 1e3:.3f} mm, "
          f"|dPhi/dz| = {res.coupling:.3e} Wb/m")
    if args.out:
        xs = np.linspace(0.0, args.x_max, args.points)
        zs = np.linspace(args.z_min, args.z_max, args.points)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            coupling_map_csv(coupling_map(src, xs, zs, args.turns, args.loop_radius), args.out)


if __name__ == "__main__":
    main()
