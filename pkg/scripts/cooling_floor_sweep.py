"""Feedback gain sweep with detector noise: simulated temperatures against
the closed-form noise floor.

The detector noise is set so the optimum sits near a chosen gain; the
simulated quality factor is kept low so each point settles in seconds.

    python scripts/cooling_floor_sweep.py --optimum 20 --out sweep.csv
"""

import argparse
import math

import numpy as np

from levcool.constants import K_B
from levcool.langevin import FeedbackConfig, ModeSpec, NoiseConfig, gain_sweep, thermal_force_psd
from levcool.series import atomic_write_text


def predicted(mode, s_xd, g):
    # thermal part cooled as 1/(1+g) plus fed-back detector noise
    a = mode.inertia * mode.omega0**2 * s_xd * mode.gamma0 / (4 * K_B)
    return mode.bath_temperature / (1 + g) + a * g * g / (1 + g)


def main():
    ap = argparse.ArgumentParser(description="gain sweep against the detector-noise floor")
    ap.add_argument("--frequency", type=float, default=39.7, help="Hz")
    ap.add_argument("--quality-factor", type=float, default=2000)
    ap.add_argument("--temperature", type=float, default=4.4, help="K")
    ap.add_argument("--optimum", type=float, default=20.0, help="target optimal gain (gamma_fb / gamma0)")
    ap.add_argument("--duration", type=float, default=300.0, help="s per run")
    ap.add_argument("--runs", type=int, default=2)
    ap.add_argument("--seed", type=int, default=1)
    ap.add_argument("--out", help="CSV output path")
    args = ap.parse_args()

    mode = ModeSpec("z", "translational", 2 * math.pi * args.frequency, 23e-9, args.quality_factor, args.temperature)
    u = 1 + args.optimum
    s_xd = 4 * K_B * args.temperature / (u * u - 1) / (mode.inertia * mode.omega0**2 * mode.gamma0)
    floor = mode.omega0 * math.sqrt(thermal_force_psd(mode) * s_xd) / (2 * K_B)
    gains = np.geomspace(args.optimum / 20, args.optimum * 20, 9)
    res = gain_sweep(mode, NoiseConfig(detector_noise_psd=s_xd, seed=args.seed), FeedbackConfig("ideal_velocity"),
                     gains, duration=args.duration, record_every=10, n_runs=args.runs)

    print(f"detector noise {math.sqrt(s_xd):.3e} m/rtHz, floor {floor:.4g} K")
    lines = ["gain,temperature_k,predicted_k,unstable"]
    for g, t, bad in zip(res.gains, res.temperatures, res.unstable):
        p = predicted(mode, s_xd, g)
        print(f"  gain {g:8.3f}  T = {t:.4g} K  (model {p:.4g} K){'  unstable' if bad else ''}")
        lines.append(f"{g!r},{t!r},{p!r},{bad}")
    print(f"best gain {res.best_gain:.3g}: {res.best_temperature:.4g} K = {res.best_temperature / floor:.3f} x floor")
    if args.out:
        atomic_write_text(args.out, "\n".join(lines) + "\n")


if __name__ == "__main__":
    main()
