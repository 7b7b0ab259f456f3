"""Single-mode Langevin dynamics with thermal drive and cold-damping feedback.

The mode obeys

    x'' + gamma0 x' + omega0^2 x = (F_th + F_vib + F_fb) / inertia

where ``inertia`` is a mass for translational modes and a moment of inertia
for librational ones (``x`` is then an angle).  All spectral densities are
one-sided, so a white force with PSD ``S`` has two-sided level ``S/2``.

Integration is semi-implicit (symplectic) Euler-Maruyama: the velocity is
kicked with a Gaussian increment of exact variance ``S dt / (2 inertia^2)``
and the position is advanced with the updated velocity.  Detector noise is
added only to the measured channel, which is what the feedback sees.

Feedback gains are expressed in units of the intrinsic damping: ``gain = 9``
means ``gamma_fb = 9 * gamma0``.  This keeps a feedback configuration
meaningful when a run is carried out at a reduced quality factor.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np
from numba import njit

from .constants import K_B
from .series import TimeSeries

__all__ = [
    "ModeSpec",
    "FeedbackConfig",
    "NoiseConfig",
    "GainSweepResult",
    "thermal_force_psd",
    "predicted_feedback_temperature",
    "equipartition_temperature",
    "effective_damping",
    "default_timestep",
    "simulate",
    "simulate_ensemble",
    "gain_sweep",
]

MODE_LABELS = ("x", "y", "z", "alpha", "beta")
MODE_KINDS = ("translational", "librational")
FEEDBACK_MODES = ("off", "ideal_velocity", "filtered_displacement")

_CHUNK = 1 << 20


@dataclass(frozen=True)
class ModeSpec:
    label: str
    kind: str
    omega0: float
    inertia: float
    quality_factor: float
    bath_temperature: float

    def __post_init__(self):
        if self.label not in MODE_LABELS:
            raise ValueError(f"unknown mode label {self.label!r}")
        if self.kind not in MODE_KINDS:
            raise ValueError(f"unknown mode kind {self.kind!r}")
        if not (self.omega0 > 0 and self.inertia > 0 and self.quality_factor > 0):
            raise ValueError("omega0, inertia and quality_factor must be positive")
        if not self.bath_temperature >= 0:
            raise ValueError("bath_temperature must be non-negative")

    @property
    def gamma0(self) -> float:
        return self.omega0 / self.quality_factor

    @property
    def frequency(self) -> float:
        return self.omega0 / (2 * math.pi)

    @property
    def unit(self) -> str:
        return "m" if self.kind == "translational" else "rad"


@dataclass(frozen=True)
class FeedbackConfig:
    """Feedback loop settings.

    ``ideal_velocity`` applies ``-inertia * gain * gamma0 * v_meas`` where
    ``v_meas`` is the true velocity plus the time derivative of the
    detector noise.  ``filtered_displacement`` passes the measured signal
    through a second-order band-pass (unity gain at ``bandpass_center``),
    mixes the quadrature and in-phase outputs by ``phase_offset`` and
    applies the result after ``loop_delay``.  Zero phase offset is pure
    velocity damping at the band-pass centre.
    """

    mode: str = "off"
    gain: float = 0.0
    phase_offset: float = 0.0
    bandpass_center: float | None = None
    bandpass_width: float | None = None
    loop_delay: float = 0.0

    def __post_init__(self):
        if self.mode not in FEEDBACK_MODES:
            raise ValueError(f"unknown feedback mode {self.mode!r}")
        if not self.gain >= 0:
            raise ValueError("gain must be non-negative")
        if self.loop_delay < 0:
            raise ValueError("loop_delay must be non-negative")
        if self.mode == "filtered_displacement" and not (self.bandpass_width or 0) > 0:
            raise ValueError("filtered_displacement feedback needs bandpass_width > 0")


@dataclass(frozen=True)
class NoiseConfig:
    thermal: bool = True
    vibration_accel_psd: float = 0.0
    detector_noise_psd: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.vibration_accel_psd < 0 or self.detector_noise_psd < 0:
            raise ValueError("noise PSDs must be non-negative")


def thermal_force_psd(mode: ModeSpec, temperature: float | None = None) -> float:
    """One-sided thermal force (or torque) PSD, ``4 k_B T inertia omega0 / Q``."""
    T = mode.bath_temperature if temperature is None else temperature
    return 4 * K_B * T * mode.inertia * mode.omega0 / mode.quality_factor


def predicted_feedback_temperature(T: float, gamma0: float, gamma_fb: float) -> float:
    if not gamma0 > 0 or gamma_fb < 0:
        raise ValueError("need gamma0 > 0 and gamma_fb >= 0")
    return T * gamma0 / (gamma0 + gamma_fb)


def equipartition_temperature(mean_square: float, mode: ModeSpec) -> float:
    return mode.inertia * mode.omega0**2 * mean_square / K_B


def default_timestep(mode: ModeSpec) -> float:
    return 1.0 / (200 * mode.frequency)


def effective_damping(mode: ModeSpec, feedback: FeedbackConfig) -> float:
    """Total linear damping rate at the mode frequency, feedback included.

    A non-positive value means the closed loop is unstable.
    """
    if feedback.mode == "off" or feedback.gain == 0:
        return mode.gamma0
    w = mode.omega0
    s = 1j * w
    delay = np.exp(-s * feedback.loop_delay)
    if feedback.mode == "ideal_velocity":
        k = feedback.gain * mode.gamma0 * s * delay
    else:
        wc = feedback.bandpass_center or w
        dw = feedback.bandpass_width
        h = dw * s / (s * s + dw * s + wc * wc)
        phi = feedback.phase_offset
        k = feedback.gain * mode.gamma0 * h * (math.cos(phi) * s + math.sin(phi) * wc) * delay
    return mode.gamma0 + float(np.imag(k)) / w


@njit(cache=True, nogil=True)
def _integrate(state, delay_buf, kicks, det, dt, omega0, gamma0, inertia, fb_mode, fb_coef,
               cos_phi, sin_phi, wc, dw, record_every, out_x, out_meas, out_force, bound):
    # state = [x, v, q, qd, xn_prev, delay_index]
    x = state[0]
    v = state[1]
    q = state[2]
    qd = state[3]
    xn_prev = state[4]
    idx = int(state[5])
    nd = delay_buf.shape[0]
    w2 = omega0 * omega0
    wc2 = wc * wc
    acc = 0.0
    x_rec = 0.0
    f_rec = 0.0
    r = 0
    ok = True
    for k in range(kicks.shape[0]):
        xn = det[k]
        meas = x + xn
        cmd = 0.0
        if fb_mode == 1:
            cmd = -fb_coef * (v + (xn - xn_prev) / dt)
        elif fb_mode == 2:
            drive = meas - dw * qd - wc2 * q
            cmd = -fb_coef * (cos_phi * dw * drive + sin_phi * wc * dw * qd)
            qd += dt * drive
            q += dt * qd
        delay_buf[idx] = cmd
        idx += 1
        if idx == nd:
            idx = 0
        force = delay_buf[idx]
        j = k % record_every
        if j == 0:
            x_rec = x
            f_rec = force
            acc = 0.0
        acc += xn
        if j == record_every - 1:
            out_x[r] = x_rec
            out_meas[r] = x_rec + acc / record_every
            out_force[r] = f_rec
            r += 1
            if not abs(x_rec) < bound:
                ok = False
                break
        v = v + dt * (-w2 * x - gamma0 * v + force / inertia) + kicks[k]
        x = x + dt * v
        xn_prev = xn
    state[0] = x
    state[1] = v
    state[2] = q
    state[3] = qd
    state[4] = xn_prev
    state[5] = idx
    return ok


def _rngs(seed: int, run_index: int):
    ss = np.random.SeedSequence(seed, spawn_key=(run_index,))
    return [np.random.Generator(np.random.PCG64(s)) for s in ss.spawn(3)]


def simulate(
    mode: ModeSpec,
    noise: NoiseConfig,
    feedback: FeedbackConfig,
    timestep: float | None = None,
    duration: float = 0.0,
    *,
    x0: float | None = None,
    v0: float | None = None,
    record_every: int = 1,
    run_index: int = 0,
    max_quality_factor: float | None = None,
) -> TimeSeries:
    """Integrate one realization of the mode.

    Returns a :class:`TimeSeries` with channels ``true_position``,
    ``measured_position`` and ``feedback_force`` sampled every
    ``record_every`` steps.  The measured channel carries the detector
    noise averaged over each output interval, so its white level stays
    ``detector_noise_psd`` after decimation.

    When ``x0``/``v0`` are omitted and thermal noise is on, the initial
    state is drawn from the bath's Boltzmann distribution.  With
    ``max_quality_factor`` set, a higher-Q mode is run at that Q and the
    same bath temperature (the force noise shrinks accordingly); the
    substitution is recorded in the metadata.

    An unstable closed loop is not an error: ``metadata["unstable"]`` is
    set and the record is truncated where the motion diverged.
    """
    sim_mode = mode
    if max_quality_factor is not None and mode.quality_factor > max_quality_factor:
        sim_mode = replace(mode, quality_factor=max_quality_factor)
    dt = default_timestep(sim_mode) if timestep is None else float(timestep)
    period = 2 * math.pi / sim_mode.omega0
    if not 0 < dt < 0.05 * period:
        raise ValueError(f"timestep {dt:g} s must be below 5% of the period ({period:g} s)")
    if duration < 100 * period:
        raise ValueError(f"duration {duration:g} s must cover at least 100 periods ({100 * period:g} s)")
    record_every = int(record_every)
    if record_every < 1:
        raise ValueError("record_every must be >= 1")

    n_out = int(round(duration / dt)) // record_every
    n_steps = n_out * record_every
    rng_th, rng_det, rng_init = _rngs(noise.seed, run_index)

    S_force = thermal_force_psd(sim_mode) if noise.thermal else 0.0
    S_force += sim_mode.inertia**2 * noise.vibration_accel_psd
    kick_sigma = math.sqrt(S_force * dt / 2) / sim_mode.inertia
    det_sigma = math.sqrt(noise.detector_noise_psd / (2 * dt))

    if noise.thermal and sim_mode.bath_temperature > 0:
        kT = K_B * sim_mode.bath_temperature
        xs = math.sqrt(kT / (sim_mode.inertia * sim_mode.omega0**2))
        vs = math.sqrt(kT / sim_mode.inertia)
        init = rng_init.standard_normal(2)
        x_init = xs * init[0] if x0 is None else x0
        v_init = vs * init[1] if v0 is None else v0
    else:
        x_init = 0.0 if x0 is None else x0
        v_init = 0.0 if v0 is None else v0

    fb_mode = FEEDBACK_MODES.index(feedback.mode)
    if feedback.gain == 0:
        fb_mode = 0
    fb_coef = sim_mode.inertia * feedback.gain * sim_mode.gamma0
    wc = feedback.bandpass_center or sim_mode.omega0
    dw = feedback.bandpass_width or 0.0
    n_delay = int(round(feedback.loop_delay / dt))
    delay_buf = np.zeros(n_delay + 1)

    # Divergence guard: far above any physical excursion of a stable run.
    scale = max(abs(x_init), math.sqrt(max(S_force, 1e-300) / (sim_mode.inertia**2 * sim_mode.omega0**2 * sim_mode.gamma0)),
                math.sqrt(noise.detector_noise_psd / dt) if noise.detector_noise_psd else 0.0, 1e-300)
    bound = 1e6 * scale

    out_x = np.empty(n_out)
    out_meas = np.empty(n_out)
    out_force = np.empty(n_out)
    state = np.array([x_init, v_init, 0.0, 0.0, 0.0, 0.0])
    chunk = max(record_every, (_CHUNK // record_every) * record_every)
    done = 0
    ok = True
    while done < n_steps:
        n = min(chunk, n_steps - done)
        kicks = rng_th.standard_normal(n) * kick_sigma if kick_sigma else np.zeros(n)
        det = rng_det.standard_normal(n) * det_sigma if det_sigma else np.zeros(n)
        r0 = done // record_every
        r1 = r0 + n // record_every
        ok = _integrate(
            state, delay_buf, kicks, det, dt, sim_mode.omega0, sim_mode.gamma0, sim_mode.inertia,
            fb_mode, fb_coef, math.cos(feedback.phase_offset), math.sin(feedback.phase_offset),
            wc, dw, record_every, out_x[r0:r1], out_meas[r0:r1], out_force[r0:r1], bound,
        )
        if not ok:
            finite = np.isfinite(out_x[r0:r1]) & (np.abs(out_x[r0:r1]) < bound)
            stop = r0 + (int(np.argmin(finite)) if not finite.all() else r1 - r0)
            out_x, out_meas, out_force = out_x[:stop], out_meas[:stop], out_force[:stop]
            break
        done += n

    gamma_eff = effective_damping(sim_mode, feedback)
    meta = {
        "mode": sim_mode.label,
        "kind": sim_mode.kind,
        "seed": int(noise.seed),
        "run_index": int(run_index),
        "timestep": dt,
        "record_every": record_every,
        "omega0": sim_mode.omega0,
        "quality_factor": mode.quality_factor,
        "simulated_quality_factor": sim_mode.quality_factor,
        "bath_temperature": sim_mode.bath_temperature,
        "inertia": sim_mode.inertia,
        "feedback_mode": feedback.mode,
        "feedback_gain": feedback.gain,
        "effective_damping": gamma_eff,
        "unstable": bool(gamma_eff <= 0 or not ok),
        "diverged": not ok,
    }
    return TimeSeries(
        1.0 / (dt * record_every),
        {"true_position": out_x, "measured_position": out_meas, "feedback_force": out_force},
        sim_mode.unit,
        meta,
    )


def _workers(workers: int | None) -> int:
    if workers is not None:
        return max(1, int(workers))
    env = os.environ.get("LEVCOOL_WORKERS")
    return max(1, int(env)) if env else (os.cpu_count() or 1)


def simulate_ensemble(mode, noise, feedback, n_runs: int, timestep=None, duration=0.0, *, workers=None, **kwargs):
    """Independent runs ``0..n_runs-1``; each has its own RNG stream, so the
    result does not depend on the number of workers."""
    def one(i):
        return simulate(mode, noise, feedback, timestep, duration, run_index=i, **kwargs)

    with ThreadPoolExecutor(_workers(workers)) as pool:
        return list(pool.map(one, range(n_runs)))


@dataclass
class GainSweepResult:
    gains: list[float]
    temperatures: list[float]
    unstable: list[bool]

    @property
    def best_gain(self) -> float | None:
        stable = [(t, g) for g, t, u in zip(self.gains, self.temperatures, self.unstable) if not u]
        return min(stable)[1] if stable else None

    @property
    def best_temperature(self) -> float | None:
        stable = [t for t, u in zip(self.temperatures, self.unstable) if not u]
        return min(stable) if stable else None

    def pairs(self):
        return list(zip(self.gains, self.temperatures))


def gain_sweep(
    mode: ModeSpec,
    noise: NoiseConfig,
    feedback: FeedbackConfig,
    gains,
    timestep: float | None = None,
    duration: float = 0.0,
    *,
    settle_fraction: float = 0.2,
    n_runs: int = 1,
    workers: int | None = None,
    **kwargs,
) -> GainSweepResult:
    """Steady-state mode temperature (equipartition on the true position)
    for each gain.  Unstable runs are kept, flagged, and ignored by
    :attr:`GainSweepResult.best_gain`."""
    gains = [float(g) for g in gains]
    if len(gains) < 3:
        raise ValueError("a gain sweep needs at least 3 gains")
    jobs = [(g, i) for g in gains for i in range(n_runs)]

    def one(job):
        g, i = job
        fb = replace(feedback, gain=g, mode=feedback.mode if feedback.mode != "off" else "ideal_velocity")
        ts = simulate(mode, noise, fb, timestep, duration, run_index=i, **kwargs)
        x = ts["true_position"]
        x = x[int(len(x) * settle_fraction):]
        unstable = ts.metadata["unstable"] or len(x) == 0
        ms = float(np.mean(x * x)) if len(x) else float("inf")
        return unstable, ms, ts.metadata

    with ThreadPoolExecutor(_workers(workers)) as pool:
        results = list(pool.map(one, jobs))

    temps, flags = [], []
    for k, g in enumerate(gains):
        chunk = results[k * n_runs:(k + 1) * n_runs]
        unstable = any(r[0] for r in chunk)
        ms = float(np.mean([r[1] for r in chunk]))
        run_mode = replace(mode, omega0=chunk[0][2]["omega0"])
        temps.append(equipartition_temperature(ms, run_mode) if not unstable else float("inf"))
        flags.append(unstable)
    return GainSweepResult(gains, temps, flags)
