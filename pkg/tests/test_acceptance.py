"""Acceptance criteria, one test each, at the stated tolerances.

Every test prints a single ``[criterion N] PASS|FAIL`` line (visible in the
captured log of ``pytest -v``) before asserting.
"""

import math
import time
from dataclasses import replace

import numpy as np
import pytest

from levcool.coil import CoilGeometry, DipoleSource, coupling_dz, flux
from levcool.constants import K_B
from levcool.langevin import (
    FeedbackConfig,
    ModeSpec,
    NoiseConfig,
    equipartition_temperature,
    gain_sweep,
    predicted_feedback_temperature,
    simulate,
    simulate_ensemble,
    thermal_force_psd,
)
from levcool.limits import table_report
from levcool.pressure import PressureRangeError, PressureReading, correct_pressure
from levcool.spectral import (
    fit_lorentzian,
    fit_ringdown,
    ringdown_envelope,
    thermal_limit_diagnostic,
    welch_psd,
)
from levcool.trap import MagnetSpec, mode_frequencies

MASS = 23e-9
MAGNET = MagnetSpec(mass=MASS, radius=100e-6, thickness=100e-6, magnetization=4.4e5)


@pytest.fixture
def report(capsys):
    start = time.perf_counter()

    def emit(n, ok, detail):
        with capsys.disabled():
            print(f"\n[criterion {n}] {'PASS' if ok else 'FAIL'} ({time.perf_counter() - start:.2f} s) {detail}")
        assert ok, detail

    return emit


def rel(a, b):
    return abs(a / b - 1)


def test_criterion_1_analytic_frequencies(report):
    wz, wb = mode_frequencies(MAGNET)
    fz, fb = wz / (2 * math.pi), wb / (2 * math.pi)
    ok = rel(fz, 39.7) <= 0.01 and rel(fb, 175.4) <= 0.01
    report(1, ok, f"f_z = {fz:.2f} Hz (39.7), f_beta = {fb:.2f} Hz (175.4), tol 1%")


def test_criterion_2_table_reproduction(report):
    rep = table_report(tolerance=0.05)
    bad = rep.failures()
    worst = max(rep.rows, key=lambda r: abs(r.deviation or 0) / r.tolerance)
    report(2, not bad, f"{len(rep.rows)} rows, {len(bad)} outside tolerance; "
                       f"worst {worst.key} at {100 * worst.deviation:+.2f}% (tol {100 * worst.tolerance:.0f}%)")


def test_criterion_3_coupling_values(report):
    src = DipoleSource(1.4e-6)
    perp = CoilGeometry(15, 1e-3, 0.3e-3, 2.5e-3, "perpendicular")
    par = CoilGeometry(15, 1e-3, 0.3e-3, 2.5e-3, "parallel")
    cp, cq = abs(coupling_dz(perp, src)), abs(coupling_dz(par, src))
    fd_errors = []
    for g, variant in [(perp, "printed"), (par, "consistent")]:
        h = g.separation * 1e-5
        lo, hi = replace(g, separation=g.separation - h), replace(g, separation=g.separation + h)
        fd = (flux(hi, src, variant) - flux(lo, src, variant)) / (2 * h)
        fd_errors.append(rel(fd, coupling_dz(g, src)))
    ok = rel(cp, 4.24e-10) <= 0.05 and rel(cq, 4.77e-7) <= 0.05 and rel(cq / cp, 1100) <= 0.05 and max(fd_errors) <= 1e-6
    report(3, ok, f"perp {cp:.3e} (4.24e-10), par {cq:.3e} (4.77e-7), ratio {cq / cp:.0f} (1100), "
                  f"max FD error {max(fd_errors):.1e}")


def test_criterion_4_equipartition(report):
    mode = ModeSpec("z", "translational", 2 * math.pi * 39.7, MASS, 100, 4.4)
    runs = simulate_ensemble(mode, NoiseConfig(seed=404), FeedbackConfig(), 20, duration=200.0, record_every=10)
    ms = float(np.mean([np.mean(ts["true_position"][len(ts) // 10:] ** 2) for ts in runs]))
    expected = K_B * 4.4 / (MASS * mode.omega0**2)
    report(4, rel(ms, expected) <= 0.05, f"<x^2> = {ms:.4e} vs kT/(m w0^2) = {expected:.4e} "
                                         f"({100 * (ms / expected - 1):+.2f}%, 20 seeds, Q = 100, tol 5%)")


def test_criterion_5_cold_damping(report):
    mode = ModeSpec("z", "translational", 2 * math.pi * 39.7, MASS, 1e3, 4.4)
    parts, ok = [], True
    for gain in (1.0, 10.0, 100.0):
        runs = simulate_ensemble(mode, NoiseConfig(seed=505), FeedbackConfig("ideal_velocity", gain), 8,
                                 duration=200.0, record_every=10)
        ms = float(np.mean([np.mean(ts["true_position"][len(ts) // 5:] ** 2) for ts in runs]))
        t = equipartition_temperature(ms, mode)
        tp = predicted_feedback_temperature(4.4, mode.gamma0, gain * mode.gamma0)
        ok &= rel(t, tp) <= 0.10
        parts.append(f"G/G0={gain:g}: {t:.4g} K vs {tp:.4g} K")
    report(5, ok, "; ".join(parts) + " (tol 10%)")


def test_criterion_6_detector_noise_floor(report):
    mode = ModeSpec("z", "translational", 2 * math.pi * 39.7, MASS, 2000, 4.4)
    # detector noise chosen so the optimum gain is about 20
    s_xd = 4 * K_B * (4.4 / 399) / (MASS * mode.omega0**2 * mode.gamma0)
    t_floor = mode.omega0 * math.sqrt(thermal_force_psd(mode) * s_xd) / (2 * K_B)
    gains = [1, 3, 8, 20, 50, 150, 400]
    res = gain_sweep(mode, NoiseConfig(detector_noise_psd=s_xd, seed=606), FeedbackConfig("ideal_velocity"), gains,
                     duration=300.0, record_every=10, n_runs=2)
    k = res.gains.index(res.best_gain)
    interior = 0 < k < len(gains) - 1
    ratio = res.best_temperature / t_floor
    ok = interior and 1 / 3 <= ratio <= 3
    report(6, ok, f"minimum {res.best_temperature:.4g} K at gain {res.best_gain:g} (interior: {interior}); "
                  f"floor {t_floor:.4g} K; ratio {ratio:.3f} (tol factor 3)")


def test_criterion_7_round_trip(report):
    mode = ModeSpec("z", "translational", 2 * math.pi * 39.7, MASS, 100, 4.2)
    runs = simulate_ensemble(mode, NoiseConfig(seed=707), FeedbackConfig(), 10, duration=400.0, record_every=10)
    f0 = mode.frequency
    fits = []
    for ts in runs:
        psd = welch_psd(ts.tail(0.9), channel="measured_position", gamma_total=mode.gamma0)
        fits.append(fit_lorentzian(psd, (f0 / 2, 2 * f0)))
    rbw = psd.resolution_bandwidth
    df = max(abs(f.omega0 / (2 * math.pi) - f0) for f in fits)
    t = float(np.mean([f.temperature(MASS) for f in fits]))
    g = float(np.mean([f.gamma_total for f in fits]))
    ring_mode = replace(mode, quality_factor=1e5, bath_temperature=0.0)
    decay = simulate(ring_mode, NoiseConfig(thermal=False), FeedbackConfig(), duration=1500.0, x0=1e-9, v0=0.0,
                     record_every=10)
    q = fit_ringdown(ringdown_envelope(decay), ring_mode.omega0).quality_factor
    ok = df <= rbw and rel(t, 4.2) <= 0.10 and rel(g, mode.gamma0) <= 0.25 and rel(q, 1e5) <= 0.02
    report(7, ok, f"max |df| = {df:.4f} Hz (RBW {rbw:.4f}), T = {t:.3f} K (4.2, 10%), "
                  f"Gamma = {g:.4f} (/s, {mode.gamma0:.4f}, 25%), ring-down Q = {q:.5g} (1e5, 2%)")


def test_criterion_8_thermal_limit_diagnostic(report):
    q = np.logspace(2, 7, 26)
    v = 1e-3 * np.sqrt(np.maximum(1.0, q / 1e4))
    rep = thermal_limit_diagnostic(list(zip(q, v)))
    ok = rep.crossover_q is not None and abs(math.log10(rep.crossover_q) - 4) <= 0.5
    report(8, ok, f"crossover Q = {rep.crossover_q:.4g} (1e4, within half a decade)")


def test_criterion_9_pressure_correction(report):
    low = correct_pressure(PressureReading(1e-8, 295.0, 0.41))
    high = correct_pressure(PressureReading(1e-1, 295.0, 0.41))
    ok = (low.factor == 5.9 and low.gas_corrected == 5.9 * 1e-8
          and low.cold_side == 5.9 * 1e-8 * math.sqrt(0.41 / 295.0)
          and high.factor == 0.8 and high.gas_corrected == 0.8 * 1e-1)
    gap_errors = 0
    for p in (1e-3, 5e-3, 2e-2):
        try:
            correct_pressure(PressureReading(p, 295.0, 0.41))
        except PressureRangeError:
            gap_errors += 1
    ok = ok and gap_errors == 3
    report(9, ok, f"C = {low.factor} below 1e-3 mbar, {high.factor} above 2e-2 mbar, "
                  f"cold/warm = {low.cold_side / low.gas_corrected:.4f}, gap readings rejected: {gap_errors}/3")
