"""Protocol-level drivers: spectroscopy, free-induction decay, Rabi
oscillations, gate trains, and the driven-coherence scan.

Every driver is a deterministic function of (config, grids, master_seed):
trajectory index k always consumes the same noise draws, aggregation
runs in fixed index order, and worker threads only fill disjoint rows
of a preallocated array, so results are bit-identical for any value of
DSIM_THREADS.

Quasi-static noise (the default) makes the Hamiltonian of every
constant-drive window time-independent within one trajectory.  The
drivers exploit that: ramps and RF pulses are stepped through the
kernels once per trajectory, while delay windows and constant drives
use the exact spectral form of the constant Hamiltonian, evaluated for
all scan points at once.  Time-correlated noise falls back to literal
stepping where supported.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .analysis import FitResult, fit_gaussian_decay
from .exceptions import ConfigError, VanishingMatrixElementError
from .noise import (
    NoiseModel,
    calibrate_bath,
    derive_rng,
    sample_field_trajectory,
)
from .propagate import (
    PulseSequence,
    RFSpec,
    compile_sequence,
    evolve,
    protection_segment,
    ramp_segment,
    readout_map,
    sequence_unitary,
)
from .spin import (
    NuclearConfig,
    PhysicalConstants,
    bare_spectrum,
    build_driven_hamiltonian,
    dressed_spectrum,
    ket,
    rf_matrix_element,
)

T2_STAR_REFERENCE = 0.93  # microseconds; sets the default bath strength

DEFAULT_PROBE_LENGTH = 2.0
DEFAULT_RF_OFFSET = 0.05
DEFAULT_SHOT_STREAM = 2  # rng stream id for shot sampling


@dataclass(frozen=True)
class DriveConfig:
    """Protection drive: common detuning and per-tone amplitude."""

    delta: float = 0.4
    omega: float = 1.6

    def __post_init__(self) -> None:
        if self.omega < 0.0:
            raise ValueError("omega must be >= 0")


@dataclass(frozen=True)
class RampConfig:
    t1: float = 50.0
    t2: float = 50.0

    def __post_init__(self) -> None:
        if self.t1 < 0.0 or self.t2 < 0.0:
            raise ValueError("ramp times must be >= 0")


@dataclass(frozen=True)
class RFConfig:
    """Gate field.  f_rf = None means resonant with the dressed gap."""

    b_rf: float = 0.1389
    f_rf: float | None = None

    def __post_init__(self) -> None:
        if not (self.b_rf > 0.0):
            raise ValueError("b_rf must be positive")
        if self.f_rf is not None and not (self.f_rf > 0.0):
            raise ValueError("f_rf must be positive when given")


@dataclass(frozen=True)
class BareDriveConfig:
    """Single-tone drive used for undriven-space pulses."""

    omega: float = 10.0
    detuning: float = 4.0

    def __post_init__(self) -> None:
        if not (self.omega > 0.0):
            raise ValueError("bare drive omega must be positive")


@dataclass(frozen=True)
class ExperimentConfig:
    constants: PhysicalConstants = field(default_factory=PhysicalConstants)
    noise: NoiseModel = field(
        default_factory=lambda: NoiseModel(sigma_b=calibrate_bath(T2_STAR_REFERENCE))
    )
    drive: DriveConfig = field(default_factory=DriveConfig)
    ramps: RampConfig = field(default_factory=RampConfig)
    rf: RFConfig = field(default_factory=RFConfig)
    bare: BareDriveConfig = field(default_factory=BareDriveConfig)
    nuclear: NuclearConfig = field(default_factory=NuclearConfig.mixture)
    trajectories: int = 2000
    contrast: float = 0.3

    def __post_init__(self) -> None:
        if self.trajectories < 1:
            raise ValueError("trajectories must be >= 1")
        if not (0.0 < self.contrast <= 1.0):
            raise ValueError("contrast must lie in (0, 1]")


@dataclass(frozen=True)
class TimeSeries:
    abscissa: np.ndarray
    unit: str
    mean: np.ndarray
    stderr: np.ndarray
    n_trajectories: int
    extra: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.abscissa.shape != self.mean.shape or self.mean.shape != self.stderr.shape:
            raise ValueError("abscissa, mean and stderr must have equal shapes")
        if np.any(self.stderr < 0.0):
            raise ValueError("standard errors must be >= 0")


def worker_count() -> int:
    env = os.environ.get("DSIM_THREADS", "").strip()
    if env:
        try:
            n = int(env)
        except ValueError as exc:
            raise ConfigError(f"DSIM_THREADS must be an integer, got {env!r}") from exc
        return max(1, n)
    return max(1, min(8, os.cpu_count() or 1))


def _ensemble(per_trajectory, n_traj: int, n_points: int):
    """Row k of the table is trajectory k; the fill order never matters."""
    table = np.empty((n_traj, n_points))

    def fill(lo: int, hi: int) -> None:
        for idx in range(lo, hi):
            table[idx] = per_trajectory(idx)

    workers = min(worker_count(), n_traj)
    if workers <= 1:
        fill(0, n_traj)
    else:
        chunk = math.ceil(n_traj / workers)
        spans = [(lo, min(lo + chunk, n_traj)) for lo in range(0, n_traj, chunk)]
        with ThreadPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(fill, lo, hi) for lo, hi in spans]
            for fut in futures:
                fut.result()
    mean = table.mean(axis=0)
    if n_traj > 1:
        stderr = table.std(axis=0, ddof=1) / math.sqrt(n_traj)
    else:
        stderr = np.zeros(n_points)
    return mean, stderr


def _apply_shot_noise(mean, stderr, shots: int | None, master_seed: int):
    if shots is None:
        return mean, stderr
    if shots < 1:
        raise ValueError("shot count must be >= 1")
    rng = derive_rng(master_seed, 0, DEFAULT_SHOT_STREAM)
    lam = np.clip(mean, 0.0, None) * shots
    sampled = rng.poisson(lam) / shots
    stderr = np.sqrt(stderr**2 + lam / shots**2)
    return sampled, stderr


def _series(abscissa, unit, mean, stderr, config, shots, master_seed, extra=None):
    mean, stderr = _apply_shot_noise(mean, stderr, shots, master_seed)
    return TimeSeries(
        abscissa=np.asarray(abscissa, dtype=float),
        unit=unit,
        mean=np.asarray(mean, dtype=float),
        stderr=np.asarray(stderr, dtype=float),
        n_trajectories=config.trajectories,
        extra=dict(extra or {}),
    )


def _draw(config: ExperimentConfig, duration: float, master_seed: int, index: int):
    model = config.noise
    dt = min(model.tau_c / 20.0, 0.05) if not model.is_quasi_static else 1.0
    return sample_field_trajectory(model, duration, dt, master_seed, index)


def _require_quasi_static(config: ExperimentConfig, driver: str) -> None:
    if not config.noise.is_quasi_static:
        raise ConfigError(
            f"{driver} currently supports quasi-static noise only (tau_c = inf)"
        )


def _spectral(ham: np.ndarray):
    w, v = np.linalg.eigh(ham)
    return w, v


def _const_states(ham: np.ndarray, psi0: np.ndarray, taus: np.ndarray) -> np.ndarray:
    """States exp(-2j*pi*H*tau) psi0 for every tau; H constant."""
    w, v = _spectral(ham)
    coeff = v.conj().T @ psi0
    phases = np.exp(-2j * np.pi * np.outer(w, taus))
    return (v @ (coeff[:, None] * phases)).T


def resonant_rf_frequency(config: ExperimentConfig) -> float:
    if config.rf.f_rf is not None:
        return config.rf.f_rf
    return dressed_spectrum(
        config.drive.delta, config.drive.omega, gamma_e=config.constants.gamma_e
    ).w_dg


def calibrate_pi_pulse(config: ExperimentConfig) -> float:
    """Rotating-wave gate time 1/(2 * gamma_e * b_rf * |<d|S_z|g>|)."""
    if config.drive.omega <= 0.0:
        raise VanishingMatrixElementError("the S_z matrix element vanishes without drive")
    element = rf_matrix_element(
        config.drive.delta, config.drive.omega, gamma_e=config.constants.gamma_e
    )
    if element <= 1e-6:
        raise VanishingMatrixElementError(
            f"|<d|S_z|g>| = {element:.2e} is too small to drive"
        )
    return 1.0 / (2.0 * config.constants.gamma_e * config.rf.b_rf * element)


def _nuclear_offsets(config: ExperimentConfig):
    # hyperfine projection enters as a static field-equivalent offset
    consts = config.constants
    return [
        (w, consts.a_hf * m_i / consts.gamma_e)
        for m_i, w in zip(config.nuclear.projections, config.nuclear.weights)
    ]


# ---------------------------------------------------------------------------
# spectroscopy


def default_odmr_grid(config: ExperimentConfig) -> np.ndarray:
    w01 = bare_spectrum(config.constants).w_01
    return np.arange(w01 - 4.5, w01 + 4.5 + 1e-9, 0.05)


def run_odmr(
    config: ExperimentConfig,
    freq_grid: np.ndarray | None = None,
    probe_length: float = DEFAULT_PROBE_LENGTH,
    master_seed: int = 0,
    shot_noise: int | None = None,
) -> TimeSeries:
    """Weak single-tone probe sweep; dips mark the |0> -> |+1> lines."""
    _require_quasi_static(config, "run_odmr")
    grid = default_odmr_grid(config) if freq_grid is None else np.asarray(freq_grid, float)
    consts = config.constants
    w01 = bare_spectrum(consts).w_01
    omega_probe = 1.0 / (2.0 * probe_length)  # a pi pulse on resonance
    offsets = _nuclear_offsets(config)
    psi0 = ket(0)

    def one(idx: int) -> np.ndarray:
        traj = _draw(config, probe_length, master_seed, idx)
        b = traj.value_at(0.0)
        amp = traj.amplitude_factor
        signal = np.zeros(grid.shape[0])
        for weight, b_off in offsets:
            hams = np.zeros((grid.shape[0], 3, 3), dtype=np.complex128)
            hams[:, 0, 0] = (w01 - grid) + consts.gamma_e * (b + b_off)
            hams[:, 2, 2] = -consts.gamma_e * (b + b_off)
            hams[:, 1, 0] = 0.5 * omega_probe * amp
            hams[:, 0, 1] = 0.5 * omega_probe * amp
            w, v = np.linalg.eigh(hams)
            coeff = np.einsum("fji,j->fi", v.conj(), psi0)
            phases = np.exp(-2j * np.pi * w * probe_length)
            finals = np.einsum("fij,fj->fi", v, coeff * phases)
            p0 = np.abs(finals[:, 1]) ** 2
            signal += weight * (1.0 - config.contrast * (1.0 - p0))
        return signal

    mean, stderr = _ensemble(one, config.trajectories, grid.shape[0])
    return _series(grid, "freq_MHz", mean, stderr, config, shot_noise, master_seed)


def default_rf_spectroscopy_grid(config: ExperimentConfig) -> np.ndarray:
    center = dressed_spectrum(
        config.drive.delta, config.drive.omega, gamma_e=config.constants.gamma_e
    ).w_dg
    return np.arange(center - 0.2, center + 0.2 + 1e-9, 0.01)


def run_rf_spectroscopy(
    config: ExperimentConfig,
    freq_grid: np.ndarray | None = None,
    probe_length: float = 20.0,
    master_seed: int = 0,
    shot_noise: int | None = None,
) -> TimeSeries:
    """Weak RF probe on the prepared dressed ground state; the dip sits
    at the protected-gap frequency."""
    _require_quasi_static(config, "run_rf_spectroscopy")
    grid = (
        default_rf_spectroscopy_grid(config)
        if freq_grid is None
        else np.asarray(freq_grid, float)
    )
    drive = config.drive
    consts = config.constants
    t1, t2 = config.ramps.t1, config.ramps.t2
    b_probe = config.rf.b_rf / 10.0
    psi0 = ket(0)

    def one(idx: int) -> np.ndarray:
        traj = _draw(config, t1 + probe_length + t2, master_seed, idx)
        up = compile_sequence(
            PulseSequence((ramp_segment(0.0, drive.omega, drive.delta, t1),)),
            traj,
            gamma_e=consts.gamma_e,
        )
        u_up = sequence_unitary(up)
        down = compile_sequence(
            PulseSequence((ramp_segment(drive.omega, 0.0, drive.delta, t2),)),
            traj,
            gamma_e=consts.gamma_e,
            t_start=t1 + probe_length,
        )
        u_down = sequence_unitary(down)
        prepared = u_up @ psi0
        signal = np.empty(grid.shape[0])
        for k, f_probe in enumerate(grid):
            probe = compile_sequence(
                PulseSequence(
                    (
                        protection_segment(
                            drive.omega,
                            drive.delta,
                            probe_length,
                            rf=RFSpec(b_probe, float(f_probe)),
                        ),
                    )
                ),
                traj,
                gamma_e=consts.gamma_e,
                t_start=t1,
            )
            final = u_down @ (sequence_unitary(probe) @ prepared)
            signal[k] = readout_map(final, config.contrast)
        return signal

    mean, stderr = _ensemble(one, config.trajectories, grid.shape[0])
    return _series(grid, "freq_MHz", mean, stderr, config, shot_noise, master_seed)


# ---------------------------------------------------------------------------
# free induction decay


def default_bare_fid_grid() -> np.ndarray:
    return np.linspace(0.0, 3.0, 241)


def run_fid_bare(
    config: ExperimentConfig,
    delay_grid: np.ndarray | None = None,
    mw_detuning: float | None = None,
    master_seed: int = 0,
    shot_noise: int | None = None,
) -> TimeSeries:
    """pi/2 - delay - pi/2 on the {|0>,|-1>} pair with a detuned carrier.

    The hyperfine mixture beats at (detuning - a_hf*m_I), all under the
    common bath-limited Gaussian envelope.
    """
    _require_quasi_static(config, "run_fid_bare")
    taus = default_bare_fid_grid() if delay_grid is None else np.asarray(delay_grid, float)
    det = config.bare.detuning if mw_detuning is None else mw_detuning
    omega = config.bare.omega
    consts = config.constants
    t_pulse = 1.0 / (4.0 * omega)
    offsets = _nuclear_offsets(config)
    psi0 = ket(0)

    def one(idx: int) -> np.ndarray:
        traj = _draw(config, 2.0 * t_pulse + taus[-1], master_seed, idx)
        b = traj.value_at(0.0)
        amp = traj.amplitude_factor
        signal = np.zeros(taus.shape[0])
        for weight, b_off in offsets:
            shift = consts.gamma_e * (b + b_off)
            pulse = np.zeros((3, 3), dtype=np.complex128)
            pulse[0, 0] = shift
            pulse[2, 2] = det - shift
            pulse[1, 2] = pulse[2, 1] = 0.5 * omega * amp
            w, v = _spectral(pulse)
            phases = np.exp(-2j * np.pi * w * t_pulse)
            u_pulse = (v * phases) @ v.conj().T
            psi1 = u_pulse @ psi0
            # free evolution is diagonal in this frame
            diag = np.array([shift, 0.0, det - shift])
            free = np.exp(-2j * np.pi * np.outer(taus, diag))
            finals = (free * psi1) @ u_pulse.T
            p0 = np.abs(finals[:, 1]) ** 2
            signal += weight * (1.0 - config.contrast * (1.0 - p0))
        return signal

    mean, stderr = _ensemble(one, config.trajectories, taus.shape[0])
    return _series(taus, "delay_us", mean, stderr, config, shot_noise, master_seed)


def default_cwdd_fid_grid(config: ExperimentConfig, rf_offset: float = DEFAULT_RF_OFFSET,
                          points: int = 70) -> np.ndarray:
    # delays in whole RF periods: every delay then sees the same gate
    # waveform, which also lets one pulse propagator serve all delays
    f_rf = _cwdd_fid_frequency(config, rf_offset)
    return np.arange(points) / f_rf


def _cwdd_fid_frequency(config: ExperimentConfig, rf_offset: float) -> float:
    w_dg = dressed_spectrum(
        config.drive.delta, config.drive.omega, gamma_e=config.constants.gamma_e
    ).w_dg
    return w_dg + rf_offset


def run_fid_cwdd(
    config: ExperimentConfig,
    delay_grid: np.ndarray | None = None,
    rf_offset: float = DEFAULT_RF_OFFSET,
    master_seed: int = 0,
    shot_noise: int | None = None,
    dt_scale: float = 1.0,
) -> TimeSeries:
    """Protected-space Ramsey fringe: ramp in, RF pi/2 - delay - RF pi/2
    at (gap + offset), ramp out, contrast readout.

    Restricted to the m_I = 0 manifold.  The RF phase runs on the global
    clock, so the fringe appears at the programmed offset frequency.
    """
    _require_quasi_static(config, "run_fid_cwdd")
    f_rf = _cwdd_fid_frequency(config, rf_offset)
    taus = (
        default_cwdd_fid_grid(config, rf_offset)
        if delay_grid is None
        else np.asarray(delay_grid, float)
    )
    drive = config.drive
    consts = config.constants
    t1, t2 = config.ramps.t1, config.ramps.t2
    t_half = 0.5 * calibrate_pi_pulse(config)
    psi0 = ket(0)
    commensurate = bool(
        np.allclose(taus * f_rf, np.round(taus * f_rf), rtol=0.0, atol=1e-9)
    )

    def one(idx: int) -> np.ndarray:
        traj = _draw(config, t1 + 2.0 * t_half + taus[-1] + t2, master_seed, idx)
        b = traj.value_at(0.0)
        amp = traj.amplitude_factor

        up = compile_sequence(
            PulseSequence((ramp_segment(0.0, drive.omega, drive.delta, t1),)),
            traj, gamma_e=consts.gamma_e, dt_scale=dt_scale,
        )
        u_up = sequence_unitary(up)
        pulse1 = compile_sequence(
            PulseSequence(
                (protection_segment(drive.omega, drive.delta, t_half,
                                    rf=RFSpec(config.rf.b_rf, f_rf)),)
            ),
            traj, gamma_e=consts.gamma_e, t_start=t1, dt_scale=dt_scale,
        )
        u_p1 = sequence_unitary(pulse1)
        u_down = sequence_unitary(
            compile_sequence(
                PulseSequence((ramp_segment(drive.omega, 0.0, drive.delta, t2),)),
                traj, gamma_e=consts.gamma_e, t_start=t1 + 2.0 * t_half + taus[-1],
                dt_scale=dt_scale,
            )
        )
        h_delay = build_driven_hamiltonian(
            drive.delta, drive.omega * amp, b=b, gamma_e=consts.gamma_e
        )
        w, v = _spectral(h_delay)
        psi_mid = v.conj().T @ (u_p1 @ (u_up @ psi0))

        if commensurate:
            u_p2 = sequence_unitary(
                compile_sequence(
                    PulseSequence(
                        (protection_segment(drive.omega, drive.delta, t_half,
                                            rf=RFSpec(config.rf.b_rf, f_rf)),)
                    ),
                    traj, gamma_e=consts.gamma_e, t_start=t1 + t_half, dt_scale=dt_scale,
                )
            )
            u_p2_list = None
        else:
            u_p2 = None
            u_p2_list = [
                sequence_unitary(
                    compile_sequence(
                        PulseSequence(
                            (protection_segment(drive.omega, drive.delta, t_half,
                                                rf=RFSpec(config.rf.b_rf, f_rf)),)
                        ),
                        traj, gamma_e=consts.gamma_e,
                        t_start=t1 + t_half + float(tau), dt_scale=dt_scale,
                    )
                )
                for tau in taus
            ]

        signal = np.empty(taus.shape[0])
        phases = np.exp(-2j * np.pi * np.outer(taus, w))
        final_map = u_down @ (u_p2 if commensurate else np.eye(3))
        for k in range(taus.shape[0]):
            psi = v @ (phases[k] * psi_mid)
            if commensurate:
                final = final_map @ psi
            else:
                final = u_down @ (u_p2_list[k] @ psi)
            signal[k] = readout_map(final, config.contrast)
        return signal

    cfg = replace(config, nuclear=NuclearConfig.single(0))
    mean, stderr = _ensemble(one, cfg.trajectories, taus.shape[0])
    return _series(
        taus, "delay_us", mean, stderr, cfg, shot_noise, master_seed,
        extra={"rf_offset_mhz": np.full(taus.shape[0], rf_offset)},
    )


# ---------------------------------------------------------------------------
# driven oscillations


def default_rabi_grid(mode: str) -> np.ndarray:
    if mode == "bare":
        return np.linspace(0.0, 25.0, 1251)
    return np.linspace(0.0, 25.0, 101)


def run_rabi(
    config: ExperimentConfig,
    duration_grid: np.ndarray | None = None,
    mode: str = "bare",
    master_seed: int = 0,
    shot_noise: int | None = None,
) -> TimeSeries:
    """Oscillation signal vs drive duration.

    bare: resonant single tone on |0> <-> |-1>.
    cwdd: resonant RF rotation of the protected pair under constant
    protection tones, read out through the reverse ramp.
    """
    if mode not in ("bare", "cwdd"):
        raise ValueError(f"mode must be 'bare' or 'cwdd', got {mode!r}")
    _require_quasi_static(config, "run_rabi")
    grid = default_rabi_grid(mode) if duration_grid is None else np.asarray(duration_grid, float)
    consts = config.constants
    psi0 = ket(0)

    if mode == "bare":
        omega = config.bare.omega

        def one(idx: int) -> np.ndarray:
            traj = _draw(config, grid[-1], master_seed, idx)
            b = traj.value_at(0.0)
            ham = np.zeros((3, 3), dtype=np.complex128)
            ham[0, 0] = consts.gamma_e * b
            ham[2, 2] = -consts.gamma_e * b
            ham[1, 2] = ham[2, 1] = 0.5 * omega * traj.amplitude_factor
            states = _const_states(ham, psi0, grid)
            p0 = np.abs(states[:, 1]) ** 2
            return 1.0 - config.contrast * (1.0 - p0)

    else:
        drive = config.drive
        f_rf = resonant_rf_frequency(config)
        t1, t2 = config.ramps.t1, config.ramps.t2

        def one(idx: int) -> np.ndarray:
            traj = _draw(config, t1 + grid[-1] + t2, master_seed, idx)
            up = compile_sequence(
                PulseSequence((ramp_segment(0.0, drive.omega, drive.delta, t1),)),
                traj, gamma_e=consts.gamma_e,
            )
            prepared = evolve(psi0, up)
            u_down = sequence_unitary(
                compile_sequence(
                    PulseSequence((ramp_segment(drive.omega, 0.0, drive.delta, t2),)),
                    traj, gamma_e=consts.gamma_e, t_start=t1 + grid[-1],
                )
            )
            drive_window = compile_sequence(
                PulseSequence(
                    (protection_segment(drive.omega, drive.delta, float(grid[-1]),
                                        rf=RFSpec(config.rf.b_rf, f_rf)),)
                ),
                traj, gamma_e=consts.gamma_e, t_start=t1,
            ) if grid[-1] > 0.0 else None
            signal = np.empty(grid.shape[0])
            if drive_window is None:
                signal[:] = readout_map(u_down @ prepared, config.contrast)
                return signal
            times, states = evolve(prepared, drive_window, return_states=True)
            rel = times - t1
            pick = np.searchsorted(rel, grid, side="left")
            pick = np.clip(pick, 0, states.shape[0] - 1)
            for k, j in enumerate(pick):
                signal[k] = readout_map(u_down @ states[j], config.contrast)
            return signal

    cfg = replace(config, nuclear=NuclearConfig.single(0))
    mean, stderr = _ensemble(one, cfg.trajectories, grid.shape[0])
    return _series(grid, "duration_us", mean, stderr, cfg, shot_noise, master_seed)


# ---------------------------------------------------------------------------
# gate trains


def default_train_length(mode: str) -> int:
    return 550 if mode == "bare" else 30


def run_not_gate_train(
    config: ExperimentConfig,
    n_max: int | None = None,
    mode: str = "cwdd",
    master_seed: int = 0,
) -> TimeSeries:
    """Indicator F after n back-to-back pi rotations.

    Odd n targets the flipped state, even n the starting state.  F is a
    bare population, not a contrast-mapped signal.  In cwdd mode the
    state is carried through the reverse ramp first and F is what the
    readout actually resolves: P(|0>) for even n, 1 - P(|0>) for odd n.
    The flipped dressed state turns into a dark superposition of |+1>
    and |-1> under the reverse ramp, so only the |0> population is
    informative, exactly as in a fluorescence measurement.  The
    abscissa is the gate count; extra["time_us"] carries n * t_pi.
    """
    if mode not in ("bare", "cwdd"):
        raise ValueError(f"mode must be 'bare' or 'cwdd', got {mode!r}")
    _require_quasi_static(config, "run_not_gate_train")
    n_max = default_train_length(mode) if n_max is None else int(n_max)
    if n_max < 1:
        raise ValueError("n_max must be >= 1")
    counts = np.arange(n_max + 1)
    consts = config.constants
    psi0 = ket(0)

    if mode == "bare":
        omega = config.bare.omega
        t_pi = 1.0 / (2.0 * omega)
        times = counts * t_pi

        def one(idx: int) -> np.ndarray:
            traj = _draw(config, times[-1], master_seed, idx)
            b = traj.value_at(0.0)
            ham = np.zeros((3, 3), dtype=np.complex128)
            ham[0, 0] = consts.gamma_e * b
            ham[2, 2] = -consts.gamma_e * b
            ham[1, 2] = ham[2, 1] = 0.5 * omega * traj.amplitude_factor
            states = _const_states(ham, psi0, times)
            p0 = np.abs(states[:, 1]) ** 2
            f = np.empty(counts.shape[0])
            f[0::2] = p0[0::2]        # even: back on |0>
            f[1::2] = 1.0 - p0[1::2]  # odd: flipped away from |0>
            return f

    else:
        drive = config.drive
        t_pi = calibrate_pi_pulse(config)
        times = counts * t_pi
        f_rf = resonant_rf_frequency(config)
        t1, t2 = config.ramps.t1, config.ramps.t2
        # snap the step so every gate boundary is a recorded state
        dt_gate = t_pi / max(1, round(t_pi / 1.5e-4))

        def one(idx: int) -> np.ndarray:
            traj = _draw(config, t1 + times[-1] + t2, master_seed, idx)
            up = compile_sequence(
                PulseSequence((ramp_segment(0.0, drive.omega, drive.delta, t1),)),
                traj, gamma_e=consts.gamma_e,
            )
            prepared = evolve(psi0, up)
            # the reverse ramp is the physical readout: it carries the
            # protected pair back to |0> / |-1> populations, so it also
            # defines the reported F; it has no absolute-time dependence
            u_down = sequence_unitary(
                compile_sequence(
                    PulseSequence((ramp_segment(drive.omega, 0.0, drive.delta, t2),)),
                    traj, gamma_e=consts.gamma_e, t_start=t1 + times[-1],
                )
            )
            window = compile_sequence(
                PulseSequence(
                    (protection_segment(drive.omega, drive.delta, float(times[-1]),
                                        rf=RFSpec(config.rf.b_rf, f_rf),
                                        dt_max=dt_gate),)
                ),
                traj, gamma_e=consts.gamma_e, t_start=t1,
            )
            _, states = evolve(prepared, window, return_states=True)
            per_gate = round(t_pi / dt_gate)
            f = np.empty(counts.shape[0])
            for n in counts:
                p0 = np.abs((u_down @ states[n * per_gate])[1]) ** 2
                f[n] = p0 if n % 2 == 0 else 1.0 - p0
            return f

    cfg = replace(config, nuclear=NuclearConfig.single(0))
    mean, stderr = _ensemble(one, cfg.trajectories, counts.shape[0])
    return TimeSeries(
        abscissa=counts.astype(float),
        unit="gates",
        mean=mean,
        stderr=stderr,
        n_trajectories=cfg.trajectories,
        extra={"time_us": times.astype(float)},
    )


def train_decay_fit(series: TimeSeries) -> FitResult:
    """Gaussian decay time of a gate train on the cumulative-time axis."""
    return fit_gaussian_decay((series.extra["time_us"], series.mean))


# ---------------------------------------------------------------------------
# driven-coherence scan


def default_t2prime_grid() -> np.ndarray:
    return np.linspace(0.2, 10.0, 15)


def _t2prime_window(config: ExperimentConfig, omega: float, master_seed: int) -> float:
    # predicted dephasing rate of the protected splitting, sampled over
    # the noise ensemble; sets a window that contains the decay
    rng = derive_rng(master_seed, 0, 3)
    n = 400
    b = config.noise.sigma_b * rng.standard_normal(n)
    eps = config.noise.sigma_eps * rng.standard_normal(n)
    gaps = np.empty(n)
    for k in range(n):
        ham = build_driven_hamiltonian(
            0.0, omega * max(1.0 + eps[k], 0.01), b=b[k], gamma_e=config.constants.gamma_e
        )
        w = np.linalg.eigvalsh(ham)
        gaps[k] = w[2] - w[0]
    sigma = float(np.std(gaps))
    bare_t2 = math.sqrt(2.0) / (
        2.0 * math.pi * config.constants.gamma_e * max(config.noise.sigma_b, 1e-12)
    )
    if sigma < 1e-9:
        return min(5.0 * bare_t2, 400.0)
    window = 3.0 * math.sqrt(2.0) / (2.0 * math.pi * sigma)
    return float(min(max(window, 2.0 * bare_t2, 1.0), 400.0))


def run_t2prime_scan(
    config: ExperimentConfig,
    omega_grid: np.ndarray | None = None,
    master_seed: int = 0,
    points: int = 90,
) -> TimeSeries:
    """Decay time of driven bare-qubit coherence vs tone amplitude.

    The superposition (|0> + |-1>)/sqrt(2) evolves under both resonant
    tones; the reported signal is its overlap with the noiseless
    evolution, so the deterministic dressed beating divides out and the
    Gaussian that remains is pure noise-induced dephasing.  At omega = 0
    this reduces identically to the bare free-induction envelope.
    """
    _require_quasi_static(config, "run_t2prime_scan")
    omegas = default_t2prime_grid() if omega_grid is None else np.asarray(omega_grid, float)
    consts = config.constants
    psi_plus = np.array([0.0, 1.0, 1.0], dtype=np.complex128) / math.sqrt(2.0)

    t2_values = np.empty(omegas.shape[0])
    t2_sigmas = np.empty(omegas.shape[0])
    decayed = np.empty(omegas.shape[0], dtype=bool)
    converged = np.empty(omegas.shape[0], dtype=bool)

    for j, omega in enumerate(omegas):
        window = _t2prime_window(config, float(omega), master_seed)
        taus = np.linspace(0.0, window, points)
        h0 = build_driven_hamiltonian(0.0, float(omega), gamma_e=consts.gamma_e)
        ref = _const_states(h0, psi_plus, taus)

        def one(idx: int) -> np.ndarray:
            traj = _draw(config, taus[-1], master_seed, idx)
            ham = build_driven_hamiltonian(
                0.0, float(omega) * traj.amplitude_factor,
                b=traj.value_at(0.0), gamma_e=consts.gamma_e,
            )
            states = _const_states(ham, psi_plus, taus)
            return np.abs(np.einsum("ki,ki->k", ref.conj(), states)) ** 2

        mean, stderr = _ensemble(one, config.trajectories, taus.shape[0])
        floor = mean[0] - 0.25 * (mean[0] - float(mean.min()))
        decayed[j] = bool(mean.min() < mean[0] - 0.1) and bool(np.any(mean < floor))
        # residual dressed-frequency wiggle rides on the envelope at
        # small omega; average over one dressed period before fitting
        dtau = taus[1] - taus[0]
        period = math.sqrt(2.0) / float(omega)
        span = int(round(period / dtau)) | 1
        if span >= 3 and taus.shape[0] - span + 1 >= 12:
            kernel = np.full(span, 1.0 / span)
            smooth = np.convolve(mean, kernel, mode="valid")
            fit_taus = taus[span // 2 : span // 2 + smooth.shape[0]]
            fit = fit_gaussian_decay((fit_taus, smooth))
        else:
            fit = fit_gaussian_decay((taus, mean))
        t2_values[j] = fit.t2_us
        t2_sigmas[j] = fit.sigmas.get("t2_us", math.inf)
        converged[j] = fit.converged

    return TimeSeries(
        abscissa=omegas,
        unit="omega_MHz",
        mean=t2_values,
        stderr=np.where(np.isfinite(t2_sigmas), np.abs(t2_sigmas), 0.0),
        n_trajectories=config.trajectories,
        extra={
            "decayed": decayed.astype(float),
            "converged": converged.astype(float),
        },
    )
