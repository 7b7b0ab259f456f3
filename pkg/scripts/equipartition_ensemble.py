"""Thermal-only ensemble: mean-square displacement against equipartition,
and ideal cold damping at a few gains.

    python scripts/equipartition_ensemble.py --runs 20
"""

import argparse
import math

import numpy as np

from levcool.constants import K_B
from levcool.langevin import (
    FeedbackConfig,
    ModeSpec,
    NoiseConfig,
    equipartition_temperature,
    predicted_feedback_temperature,
    simulate_ensemble,
)


def ensemble_temperature(mode, feedback, runs, duration, seed):
    series = simulate_ensemble(mode, NoiseConfig(seed=seed), feedback, runs, duration=duration, record_every=10)
    ms = np.mean([np.mean(ts["true_position"][len(ts) // 5:] ** 2) for ts in series])
    return equipartition_temperature(float(ms), mode), ms


def main():
    ap = argparse.ArgumentParser(description="equipartition and cold-damping check")
    ap.add_argument("--runs", type=int, default=20)
    ap.add_argument("--duration", type=float, default=400.0)
    ap.add_argument("--quality-factor", type=float, default=300)
    ap.add_argument("--temperature", type=float, default=4.4)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    mode = ModeSpec("z", "translational", 2 * math.pi * 39.7, 23e-9, args.quality_factor, args.temperature)
    t, ms = ensemble_temperature(mode, FeedbackConfig(), args.runs, args.duration, args.seed)
    print(f"no feedback: <x^2> = {ms:.4e} m^2, kT/(m w0^2) = {K_B * args.temperature / (mode.inertia * mode.omega0**2):.4e}")
    for gain in (1, 10, 100):
        t, _ = ensemble_temperature(mode, FeedbackConfig("ideal_velocity", gain), args.runs, args.duration, args.seed)
        tp = predicted_feedback_temperature(args.temperature, mode.gamma0, gain * mode.gamma0)
        print(f"gain {gain:4d}: T = {t:.4g} K, predicted {tp:.4g} K ({100 * (t / tp - 1):+.1f}%)")


if __name__ == "__main__":
    main()
