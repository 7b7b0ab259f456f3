"""Spectral and ring-down analysis of mode records.

Conventions: PSDs are one-sided per Hz; frequencies in PSDResult are in Hz,
while fitted resonance parameters are angular (rad/s).  The damped
oscillator line shape is

    S(f) = D / ((omega0^2 - w^2)^2 + w^2 gamma^2),   w = 2 pi f

whose integral over f is ``D / (4 omega0^2 gamma)``.  For a thermal mode
``D = 4 k_B T gamma0 / inertia``.

Quoted mode "amplitudes" follow the peak convention, sqrt(2) times the RMS.
"""

from __future__ import annotations

import io
import json
import math
from dataclasses import dataclass

import numpy as np
from scipy import optimize, signal

from .constants import K_B
from .langevin import ModeSpec
from .series import TimeSeries, atomic_write_text

__all__ = [
    "FitError",
    "PSDResult",
    "LorentzianFit",
    "RingdownFit",
    "CalibrationReference",
    "ThermalLimitReport",
    "welch_psd",
    "segment_length_for",
    "lorentzian",
    "oscillator_psd",
    "fit_lorentzian",
    "band_power",
    "band_rms",
    "psd_temperature",
    "mode_temperature",
    "thermal_rms",
    "thermal_amplitude",
    "conversion_factor",
    "ringdown_envelope",
    "fit_ringdown",
    "thermal_limit_diagnostic",
    "fit_report",
]


class FitError(RuntimeError):
    """A fit failed to converge or its input is unusable."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


@dataclass
class PSDResult:
    frequencies: np.ndarray
    values: np.ndarray
    resolution_bandwidth: float
    averages: int
    unit: str = "m"

    def __post_init__(self):
        self.frequencies = np.asarray(self.frequencies, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if np.any(self.values < 0):
            raise ValueError("PSD values must be non-negative")
        if np.any(np.diff(self.frequencies) <= 0):
            raise ValueError("frequencies must be strictly increasing")

    def to_csv_text(self) -> str:
        buf = io.StringIO()
        buf.write(f"# unit={self.unit}^2/Hz resolution_bandwidth_hz={self.resolution_bandwidth!r} averages={self.averages}\n")
        np.savetxt(buf, np.column_stack([self.frequencies, self.values]), delimiter=",",
                   header="frequency_hz,psd_value", comments="", fmt="%.17g")
        return buf.getvalue()

    def to_csv(self, path) -> None:
        atomic_write_text(path, self.to_csv_text())


@dataclass
class LorentzianFit:
    omega0: float
    gamma_total: float
    drive_strength: float
    covariance: np.ndarray
    residual_norm: float

    @property
    def quality_factor(self) -> float:
        return self.omega0 / self.gamma_total

    @property
    def quality_factor_error(self) -> float:
        # first-order propagation through Q = omega0 / gamma
        c = self.covariance
        q = self.quality_factor
        rel = c[0, 0] / self.omega0**2 + c[1, 1] / self.gamma_total**2 - 2 * c[0, 1] / (self.omega0 * self.gamma_total)
        return q * math.sqrt(max(rel, 0.0))

    @property
    def variance(self) -> float:
        """Area under the fitted line."""
        return self.drive_strength / (4 * self.omega0**2 * self.gamma_total)

    def temperature(self, inertia: float) -> float:
        return inertia * self.omega0**2 * self.variance / K_B


@dataclass
class RingdownFit:
    amplitude0: float
    tau: float
    quality_factor: float
    fit_error_q: float
    omega0: float


@dataclass(frozen=True)
class CalibrationReference:
    reference_temperature: float
    reference_rms: float
    conversion_factor: float | None = None

    def __post_init__(self):
        if not (self.reference_temperature > 0 and self.reference_rms > 0):
            raise ValueError("reference temperature and RMS must be positive")


# -- PSD estimation -----------------------------------------------------------


def segment_length_for(sample_rate: float, gamma_total: float) -> int:
    """Power-of-two segment length giving a bin width <= linewidth / 5."""
    linewidth_hz = gamma_total / (2 * math.pi)
    n = sample_rate / (linewidth_hz / 5)
    return 1 << max(3, math.ceil(math.log2(n)))


def welch_psd(
    series: TimeSeries,
    segment_length: int | None = None,
    overlap_fraction: float = 0.5,
    *,
    channel: str = "measured_position",
    gamma_total: float | None = None,
) -> PSDResult:
    """One-sided Welch estimate with a Hann window.

    Window power is compensated, so white noise of level S gives a plateau
    of S and the summed spectrum times the bin width equals the variance.
    Either ``segment_length`` or ``gamma_total`` (to pick one) is required.
    """
    x = np.asarray(series[channel] if channel in series.channels else next(iter(series.channels.values())))
    if segment_length is None:
        if gamma_total is None:
            raise ValueError("give segment_length or gamma_total")
        segment_length = segment_length_for(series.sample_rate, gamma_total)
    segment_length = int(segment_length)
    if not 0 <= overlap_fraction < 1:
        raise ValueError("overlap_fraction must be in [0, 1)")
    if segment_length > len(x) or segment_length < 2:
        raise ValueError(f"series of {len(x)} samples is too short for segments of {segment_length}")
    noverlap = int(segment_length * overlap_fraction)
    f, p = signal.welch(x, fs=series.sample_rate, window="hann", nperseg=segment_length,
                        noverlap=noverlap, detrend="constant", scaling="density", return_onesided=True)
    step = segment_length - noverlap
    averages = 1 + (len(x) - segment_length) // step
    return PSDResult(f, p, series.sample_rate / segment_length, averages, series.unit)


def _band_mask(psd: PSDResult, band) -> np.ndarray:
    lo, hi = band
    return (psd.frequencies >= lo) & (psd.frequencies <= hi)


def band_power(psd: PSDResult, band) -> float:
    """Integrated power (unit^2) between ``band = (f_lo, f_hi)`` in Hz."""
    return float(np.sum(psd.values[_band_mask(psd, band)]) * psd.resolution_bandwidth)


def band_rms(psd: PSDResult, band) -> float:
    return math.sqrt(band_power(psd, band))


def psd_temperature(psd: PSDResult, mode: ModeSpec, band=None) -> float:
    """Equipartition temperature from the power in ``band`` (default
    ``[f0/2, 2 f0]``)."""
    f0 = mode.frequency
    band = (f0 / 2, 2 * f0) if band is None else band
    return mode.inertia * mode.omega0**2 * band_power(psd, band) / K_B


# -- line-shape fitting -------------------------------------------------------


def lorentzian(f, omega0, gamma_total, drive_strength):
    w = 2 * np.pi * np.asarray(f, dtype=float)
    return drive_strength / ((omega0**2 - w**2) ** 2 + w**2 * gamma_total**2)


def oscillator_psd(f, mode: ModeSpec, gamma_fb: float = 0.0, temperature: float | None = None):
    """Thermal displacement PSD of ``mode`` with extra feedback damping."""
    T = mode.bath_temperature if temperature is None else temperature
    drive = 4 * K_B * T * mode.gamma0 / mode.inertia
    return lorentzian(f, mode.omega0, mode.gamma0 + gamma_fb, drive)


def _initial_guess(f, s):
    k = int(np.argmax(s))
    w0 = 2 * np.pi * f[k]
    half = s[k] / 2
    lo = k
    while lo > 0 and s[lo] > half:
        lo -= 1
    hi = k
    while hi < len(s) - 1 and s[hi] > half:
        hi += 1
    df = f[1] - f[0]
    fwhm = max((hi - lo) * df, df)
    gamma = 2 * np.pi * fwhm
    return w0, gamma, s[k] * w0**2 * gamma**2


def fit_lorentzian(psd: PSDResult, band, initial_guess=None, *, max_evaluations: int = 2000) -> LorentzianFit:
    """Least-squares fit of the oscillator line shape in log space.

    ``initial_guess`` is ``(omega0, gamma_total, drive_strength)``; without
    it the guess comes from the peak bin and its half-power width.
    """
    mask = _band_mask(psd, band)
    f = psd.frequencies[mask]
    s = psd.values[mask]
    if len(f) < 10:
        raise FitError(f"band {band} holds only {len(f)} bins; need >= 10")
    k = int(np.argmax(s))
    if k == 0 or k == len(s) - 1 or not np.all(s > 0):
        raise FitError("no interior local maximum in the fit band")
    w0, g0, d0 = initial_guess if initial_guess is not None else _initial_guess(f, s)
    logs = np.log(s)
    # parametrize as (omega0, log gamma, log D) to keep scales comparable
    p0 = np.array([w0, math.log(g0), math.log(d0)])
    scale = np.array([2 * np.pi * (f[1] - f[0]), 1.0, 1.0])

    def resid(p):
        return np.log(lorentzian(f, p[0], math.exp(p[1]), math.exp(p[2]))) - logs

    res = optimize.least_squares(resid, p0, x_scale=scale, max_nfev=max_evaluations, method="lm")
    if not res.success or not np.all(np.isfinite(res.x)):
        raise FitError(f"line-shape fit did not converge: {res.message}", residual=float(np.linalg.norm(res.fun)))
    p = res.x
    dof = max(len(f) - 3, 1)
    s2 = float(res.fun @ res.fun) / dof
    try:
        cov_p = np.linalg.inv(res.jac.T @ res.jac) * s2
    except np.linalg.LinAlgError:
        cov_p = np.full((3, 3), np.nan)
    gamma, drive = math.exp(p[1]), math.exp(p[2])
    jac = np.diag([1.0, gamma, drive])
    cov = jac @ cov_p @ jac
    omega0 = abs(p[0])
    return LorentzianFit(omega0, gamma, drive, cov, float(np.linalg.norm(res.fun)))


# -- temperatures and conversions ---------------------------------------------


def mode_temperature(measured_rms: float, reference: CalibrationReference) -> float:
    """Temperature from an RMS ratio to a thermally limited reference.

    Units cancel, so the RMS values may be in volts as long as both are.
    """
    if not measured_rms > 0:
        raise ValueError("measured_rms must be positive")
    return reference.reference_temperature * (measured_rms / reference.reference_rms) ** 2


def thermal_rms(mode: ModeSpec, T: float) -> float:
    if T < 0:
        raise ValueError("temperature must be non-negative")
    return math.sqrt(K_B * T / (mode.inertia * mode.omega0**2))


def thermal_amplitude(mode: ModeSpec, T: float) -> float:
    """Peak amplitude sqrt(2 k_B T / (inertia omega0^2)), i.e. sqrt(2) x RMS."""
    return math.sqrt(2) * thermal_rms(mode, T)


def conversion_factor(voltage_rms: float, mode: ModeSpec, T: float) -> float:
    """Volts per metre (or radian) from thermally limited reference data."""
    return voltage_rms / thermal_rms(mode, T)


# -- ring-down ----------------------------------------------------------------


def ringdown_envelope(series: TimeSeries, channel: str = "true_position", trim: float = 0.05) -> TimeSeries:
    """Analytic-signal envelope of a free decay, with the edges trimmed."""
    x = series[channel]
    env = np.abs(signal.hilbert(x - np.mean(x)))
    n = len(env)
    cut = int(n * trim)
    t0 = cut / series.sample_rate
    out = TimeSeries(series.sample_rate, {"envelope": env[cut:n - cut]}, series.unit, dict(series.metadata))
    out.metadata["t0"] = t0
    return out


def fit_ringdown(envelope: TimeSeries, omega0: float, channel: str = "envelope") -> RingdownFit:
    """Fit ``A0 exp(-t/tau)`` in log space; ``Q = omega0 tau / 2``.

    The Q error is the 1-sigma value from the fit covariance.
    """
    a = envelope[channel] if channel in envelope.channels else next(iter(envelope.channels.values()))
    if len(a) < 3:
        raise FitError("ring-down needs at least 3 samples")
    if np.any(a <= 0):
        raise FitError("envelope must be positive")
    t = envelope.times + envelope.metadata.get("t0", 0.0)
    (slope, intercept), cov = np.polyfit(t, np.log(a), 1, cov="unscaled" if len(a) <= 3 else True)
    if not slope < 0:
        raise FitError("envelope is not decaying", residual=float(slope))
    tau = -1.0 / slope
    q = omega0 * tau / 2
    q_err = q * math.sqrt(max(cov[0, 0], 0.0)) / abs(slope)
    return RingdownFit(math.exp(intercept), tau, q, q_err, omega0)


# -- thermal-limit diagnostic -------------------------------------------------


@dataclass
class ThermalLimitReport:
    thermal_region: tuple[float, float] | None
    vibration_region: tuple[float, float] | None
    crossover_q: float | None
    classification: list[str]

    def as_dict(self):
        return {
            "thermal_region": self.thermal_region,
            "vibration_region": self.vibration_region,
            "crossover_q": self.crossover_q,
            "classification": self.classification,
        }


def thermal_limit_diagnostic(points, *, tolerance: float = 0.05) -> ThermalLimitReport:
    """Split ``(Q, V_rms)`` points into thermally and vibration-limited sets.

    Works on ``y = log(V_rms / sqrt(Q))`` against ``u = log Q``.  Thermally
    limited points have constant V_rms (slope -1/2 in y); vibration-limited
    points have constant y.  A two-segment least-squares split (thermal
    below, vibration above) is compared with the single-regime fits; a
    single regime wins when its RMS log residual is within ``tolerance``.
    The crossover is where the two fitted segments intersect.
    """
    pts = sorted((float(q), float(v)) for q, v in points)
    if len(pts) < 4:
        raise ValueError("need at least 4 points")
    q = np.array([p[0] for p in pts])
    v = np.array([p[1] for p in pts])
    if np.any(q <= 0) or np.any(v <= 0):
        raise ValueError("Q and V_rms must be positive")
    if math.log10(q[-1] / q[0]) < 2:
        raise ValueError("points must span at least two decades of Q")
    u = np.log(q)
    y = np.log(v) - 0.5 * u
    n = len(q)

    def thermal_fit(idx):
        c = np.mean(y[idx] + 0.5 * u[idx])
        r = y[idx] - (c - 0.5 * u[idx])
        return c, float(r @ r)

    def vib_fit(idx):
        c = np.mean(y[idx])
        r = y[idx] - c
        return c, float(r @ r)

    everything = np.arange(n)
    _, sse_t = thermal_fit(everything)
    _, sse_v = vib_fit(everything)
    best = None
    for k in range(2, n - 1):
        ct, st = thermal_fit(everything[:k])
        cv, sv = vib_fit(everything[k:])
        if best is None or st + sv < best[0]:
            best = (st + sv, k, ct, cv)

    single = min((sse_t, "thermal"), (sse_v, "vibration"))
    if math.sqrt(single[0] / n) <= tolerance or best is None:
        label = single[1]
        region = (float(q[0]), float(q[-1]))
        return ThermalLimitReport(
            region if label == "thermal" else None,
            region if label == "vibration" else None,
            None,
            [label] * n,
        )
    _, k, ct, cv = best
    crossover = math.exp(2 * (ct - cv))
    labels = ["thermal"] * k + ["vibration"] * (n - k)
    return ThermalLimitReport((float(q[0]), float(q[k - 1])), (float(q[k]), float(q[-1])), crossover, labels)


# -- reports ------------------------------------------------------------------


def fit_report(fit: LorentzianFit | None = None, ringdown: RingdownFit | None = None,
               temperature: float | None = None) -> str:
    """JSON fit report with the fixed field names."""
    doc = {"omega0_rad_s": None, "gamma_total_s": None, "q_factor": None, "q_error": None, "temperature_k": temperature}
    if fit is not None:
        doc.update(omega0_rad_s=fit.omega0, gamma_total_s=fit.gamma_total,
                   q_factor=fit.quality_factor, q_error=fit.quality_factor_error)
    if ringdown is not None:
        doc.update(omega0_rad_s=ringdown.omega0, q_factor=ringdown.quality_factor, q_error=ringdown.fit_error_q)
        if fit is None:
            doc["gamma_total_s"] = ringdown.omega0 / ringdown.quality_factor
    return json.dumps(doc, indent=2)
