import json
import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate

from conftest import MASS, beta_mode, z_mode
from levcool.constants import K_B
from levcool.langevin import FeedbackConfig, ModeSpec, NoiseConfig, simulate, simulate_ensemble
from levcool.series import TimeSeries
from levcool.spectral import (
    CalibrationReference,
    FitError,
    PSDResult,
    band_power,
    conversion_factor,
    fit_lorentzian,
    fit_report,
    fit_ringdown,
    lorentzian,
    mode_temperature,
    oscillator_psd,
    ringdown_envelope,
    thermal_amplitude,
    thermal_limit_diagnostic,
    welch_psd,
)

THERMAL = ModeSpec("z", "translational", 2 * math.pi * 39.7, MASS, 100, 4.2)


@pytest.fixture(scope="module")
def thermal_runs():
    return simulate_ensemble(THERMAL, NoiseConfig(seed=2024), FeedbackConfig(), 10, duration=400.0, record_every=10)


# -- estimator calibration ----------------------------------------------------


def test_sinusoid_power_at_bin_centre():
    fs, n, seg = 1000.0, 1 << 16, 1 << 12
    f = 40 * fs / seg
    ts = TimeSeries(fs, {"x": 3.0 * np.sin(2 * math.pi * f * np.arange(n) / fs)})
    psd = welch_psd(ts, seg, channel="x")
    assert band_power(psd, (f - 5 * psd.resolution_bandwidth, f + 5 * psd.resolution_bandwidth)) == pytest.approx(
        9.0 / 2, rel=0.02)


def test_white_noise_plateau():
    fs, s0 = 2000.0, 4e-22
    rng = np.random.default_rng(11)
    x = rng.normal(scale=math.sqrt(s0 * fs / 2), size=1 << 18)
    psd = welch_psd(TimeSeries(fs, {"x": x}), 1024, channel="x")
    assert psd.averages >= 100
    assert np.mean(psd.values[5:-5]) == pytest.approx(s0, rel=0.03)
    assert psd.resolution_bandwidth == fs / 1024


@given(seed=st.integers(0, 2**32 - 1), log_seg=st.integers(8, 12), tone=st.floats(0, 5))
def test_integrated_psd_equals_variance(seed, log_seg, tone):
    rng = np.random.default_rng(seed)
    n = 1 << 17
    x = rng.normal(size=n) + tone * np.sin(2 * math.pi * 0.1234 * np.arange(n))
    psd = welch_psd(TimeSeries(1.0, {"x": x}), 1 << log_seg, channel="x")
    assert np.all(psd.values >= 0) and np.all(np.diff(psd.frequencies) > 0)
    assert np.sum(psd.values) * psd.resolution_bandwidth == pytest.approx(np.var(x), rel=0.02)


def test_series_too_short():
    with pytest.raises(ValueError):
        welch_psd(TimeSeries(1.0, {"x": np.zeros(10)}), 64, channel="x")


def test_band_power_of_simulated_oscillator(thermal_runs):
    f0 = THERMAL.frequency
    powers = [band_power(welch_psd(ts, channel="true_position", gamma_total=THERMAL.gamma0), (f0 / 2, 2 * f0))
              for ts in thermal_runs]
    assert np.mean(powers) == pytest.approx(K_B * 4.2 / (MASS * THERMAL.omega0**2), rel=0.05)


def test_averaged_psd_matches_line_shape(thermal_runs):
    psds = [welch_psd(ts, channel="true_position", gamma_total=THERMAL.gamma0) for ts in thermal_runs]
    f = psds[0].frequencies
    mean = np.mean([p.values for p in psds], axis=0)
    f0 = THERMAL.frequency
    band = (f >= f0 / 2) & (f <= 2 * f0)
    ratio = mean[band] / oscillator_psd(f[band], THERMAL)
    # pointwise ratio of a 10-run average: scatter shrinks with the number of averaged segments
    assert np.all(np.abs(ratio - 1) < 0.2)


# -- line-shape fit -----------------------------------------------------------


def test_lorentzian_fit_is_self_inverse():
    f = np.linspace(30, 50, 2001)
    w0, g, d = 2 * math.pi * 42.4, 0.8, 3e-15
    psd = PSDResult(f, lorentzian(f, w0, g, d), f[1] - f[0], 1)
    fit = fit_lorentzian(psd, (35, 50))
    assert fit.omega0 == pytest.approx(w0, rel=1e-3)
    assert fit.gamma_total == pytest.approx(g, rel=1e-3)
    assert fit.gamma_total > 0 and 35 <= fit.omega0 / (2 * math.pi) <= 50


def test_lorentzian_area_is_variance():
    w0, g, d = 2 * math.pi * 10, 0.5, 1.0
    line = lambda f: lorentzian(f, w0, g, d)  # noqa: E731
    area = integrate.quad(line, 0, 20, points=[10.0], limit=500)[0] + integrate.quad(line, 20, np.inf)[0]
    assert area == pytest.approx(d / (4 * w0**2 * g), rel=1e-3)


def test_fit_needs_a_peak():
    f = np.linspace(1, 10, 100)
    psd = PSDResult(f, 1.0 / f, f[1] - f[0], 1)
    with pytest.raises(FitError):
        fit_lorentzian(psd, (1, 10))
    with pytest.raises(FitError):
        fit_lorentzian(psd, (1, 1.05))


def test_round_trip_on_thermal_ensemble(thermal_runs):
    f0 = THERMAL.frequency
    fits = []
    for ts in thermal_runs:
        psd = welch_psd(ts, channel="true_position", gamma_total=THERMAL.gamma0)
        fits.append(fit_lorentzian(psd, (f0 / 2, 2 * f0)))
    rbw = psd.resolution_bandwidth
    for fit in fits:
        assert abs(fit.omega0 / (2 * math.pi) - f0) <= rbw
    assert np.mean([f.gamma_total for f in fits]) == pytest.approx(THERMAL.gamma0, rel=0.2)
    assert np.mean([f.temperature(MASS) for f in fits]) == pytest.approx(4.2, rel=0.10)


def test_cooled_linewidth():
    mode = replace(THERMAL, quality_factor=1000)
    ts = simulate(mode, NoiseConfig(seed=1), FeedbackConfig("ideal_velocity", 9.0), duration=400.0, record_every=10)
    psd = welch_psd(ts, channel="true_position", gamma_total=10 * mode.gamma0)
    fit = fit_lorentzian(psd, (mode.frequency / 2, 2 * mode.frequency))
    assert fit.gamma_total / mode.gamma0 == pytest.approx(10, rel=0.25)


def test_fit_report_fields():
    f = np.linspace(30, 50, 401)
    fit = fit_lorentzian(PSDResult(f, lorentzian(f, 250.0, 1.0, 1.0), 0.05, 1), (30, 50))
    doc = json.loads(fit_report(fit, temperature=1.5))
    assert set(doc) == {"omega0_rad_s", "gamma_total_s", "q_factor", "q_error", "temperature_k"}
    assert doc["q_factor"] == pytest.approx(250.0, rel=1e-3)


# -- temperatures and conversions ---------------------------------------------


def test_equilibrium_temperature_from_rms_ratio():
    r = 1.93e-10
    assert mode_temperature(math.sqrt(3400 / 4.4) * r, CalibrationReference(4.4, r)) == pytest.approx(3400, rel=1e-12)
    assert mode_temperature(r, CalibrationReference(4.4, r)) == 4.4


def test_beta_equilibrium_temperature_from_amplitudes():
    assert mode_temperature(5.2e-6, CalibrationReference(4.2, 1.1e-6)) == pytest.approx(97, rel=0.05)


@given(k=st.floats(1e-9, 1e9), ratio=st.floats(0.01, 100))
def test_temperature_is_unit_free(k, ratio):
    t1 = mode_temperature(ratio, CalibrationReference(4.2, 1.0))
    t2 = mode_temperature(ratio * k, CalibrationReference(4.2, k))
    assert t2 == pytest.approx(t1, rel=1e-9)


def test_calibration_reference_validation():
    with pytest.raises(ValueError):
        CalibrationReference(0.0, 1.0)
    with pytest.raises(ValueError):
        mode_temperature(0.0, CalibrationReference(4.2, 1.0))


def test_thermal_amplitudes():
    z = z_mode()
    assert thermal_amplitude(z, 4.4) == pytest.approx(270e-12, rel=0.05)
    assert thermal_amplitude(z, 3400) == pytest.approx(7.6e-9, rel=0.05)
    assert thermal_amplitude(z, 0.0) == 0.0
    assert thermal_amplitude(beta_mode(), 4.2) == pytest.approx(1.1e-6, rel=0.05)


def test_conversion_factors_are_consistent():
    # Reference voltages are not reported; reconstruct them from the factors
    # and the thermal RMS and check the factors come back.
    for mode, T, c in [(z_mode(), 4.4, 1.76e6), (beta_mode(), 4.2, 123.2)]:
        v = c * math.sqrt(K_B * T / (mode.inertia * mode.omega0**2))
        assert conversion_factor(v, mode, T) == pytest.approx(c, rel=1e-12)
        assert conversion_factor(2 * v, mode, T) == pytest.approx(2 * c, rel=1e-12)


# -- ring-down ----------------------------------------------------------------


def test_ringdown_fit_is_self_inverse():
    w0, q = 2 * math.pi * 42.4, 1e7
    tau = 2 * q / w0
    assert tau == pytest.approx(7.5e4, rel=0.01)
    t = np.arange(0, 2e4, 1.0)
    env = TimeSeries(1.0, {"envelope": 1e-9 * np.exp(-t / tau)})
    fit = fit_ringdown(env, w0)
    assert fit.quality_factor == pytest.approx(q, rel=1e-4)
    assert fit.tau > 0 and fit.quality_factor == pytest.approx(w0 * fit.tau / 2, rel=1e-12)


def test_ringdown_of_simulated_decay():
    mode = ModeSpec("z", "translational", 2 * math.pi * 42.4, MASS, 1e5, 0.0)
    ts = simulate(mode, NoiseConfig(thermal=False), FeedbackConfig(), duration=1500.0, x0=1e-9, v0=0.0,
                  record_every=10)
    fit = fit_ringdown(ringdown_envelope(ts), mode.omega0)
    assert fit.quality_factor == pytest.approx(1e5, rel=0.02)


def test_growing_envelope_rejected():
    t = np.arange(100.0)
    with pytest.raises(FitError):
        fit_ringdown(TimeSeries(1.0, {"envelope": np.exp(t / 50)}), 1.0)


def test_ringdown_and_linewidth_agree():
    mode = ModeSpec("z", "translational", 2 * math.pi * 39.7, MASS, 300, 4.2)
    ts = simulate(mode, NoiseConfig(seed=5), FeedbackConfig(), duration=600.0, record_every=10)
    psd = welch_psd(ts, channel="true_position", gamma_total=mode.gamma0)
    q_line = fit_lorentzian(psd, (mode.frequency / 2, 2 * mode.frequency)).quality_factor
    decay = simulate(mode, NoiseConfig(thermal=False), FeedbackConfig(), duration=20.0, x0=1e-9, v0=0.0)
    q_ring = fit_ringdown(ringdown_envelope(decay), mode.omega0).quality_factor
    assert q_line == pytest.approx(q_ring, rel=0.25)


# -- thermal-limit diagnostic -------------------------------------------------


def step_data(crossover, n=25):
    q = np.logspace(2, 7, n)
    return list(zip(q, 1e-3 * np.sqrt(np.maximum(1.0, q / crossover))))


def test_diagnostic_finds_crossover():
    rep = thermal_limit_diagnostic(step_data(1e4))
    assert abs(math.log10(rep.crossover_q) - 4) < 0.5
    assert rep.classification[0] == "thermal" and rep.classification[-1] == "vibration"


def test_diagnostic_quadrature_mix():
    q = np.logspace(1.5, 6.5, 30)
    a = 1e-3
    b2 = a * a / 3e3
    rep = thermal_limit_diagnostic(list(zip(q, np.sqrt(a * a + b2 * q))))
    assert abs(math.log10(rep.crossover_q) - math.log10(3e3)) < 0.5


def test_diagnostic_all_thermal():
    q = np.logspace(2, 6, 10)
    rep = thermal_limit_diagnostic(list(zip(q, np.full_like(q, 2e-3))))
    assert rep.crossover_q is None and rep.vibration_region is None
    assert set(rep.classification) == {"thermal"}


def test_diagnostic_needs_span():
    q = np.logspace(2, 3, 10)
    with pytest.raises(ValueError):
        thermal_limit_diagnostic(list(zip(q, q)))
    with pytest.raises(ValueError):
        thermal_limit_diagnostic([(1e2, 1.0), (1e5, 1.0)])
