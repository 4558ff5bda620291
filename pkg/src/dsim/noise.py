"""Stochastic environment models.

Two noise channels act on the spin:

* a magnetic field fluctuation b(t) along z, modelled as an
  Ornstein-Uhlenbeck process with standard deviation sigma_b (Gauss) and
  correlation time tau_c (microseconds).  tau_c = inf degenerates to a
  quasi-static draw, one constant offset per trajectory, which is the
  regime that produces a Gaussian free-induction envelope.
* a multiplicative microwave amplitude factor (1 + eps), quasi-static,
  with eps ~ N(0, sigma_eps^2).  It scales both microwave tones and only
  those; the radio-frequency drive couples through a separate coil.

Sampling is deterministic given (master_seed, trajectory_index): each
trajectory derives its generators through a SeedSequence spawn key, so
ensembles can be evaluated in any order or split across workers without
changing the draws.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .spin import GAMMA_E

# stream ids inside one trajectory's seed space
_STREAM_FIELD = 0
_STREAM_AMPLITUDE = 1

# (1 + eps) is clamped below at this value; a negative drive amplitude
# would silently flip tone phases instead of modelling a weak drive
_MIN_AMPLITUDE_FACTOR = 0.01


@dataclass(frozen=True)
class NoiseModel:
    """Ensemble parameters for one simulated environment."""

    sigma_b: float = 0.0
    tau_c: float = math.inf
    sigma_eps: float = 0.0

    def __post_init__(self) -> None:
        if not (self.sigma_b >= 0.0):
            raise ValueError(f"sigma_b must be >= 0, got {self.sigma_b}")
        if not (self.tau_c > 0.0):
            raise ValueError(f"tau_c must be positive (inf allowed), got {self.tau_c}")
        if not (0.0 <= self.sigma_eps < 0.5):
            raise ValueError(f"sigma_eps must lie in [0, 0.5), got {self.sigma_eps}")

    @property
    def is_quasi_static(self) -> bool:
        return math.isinf(self.tau_c)

    @property
    def is_trivial(self) -> bool:
        return self.sigma_b == 0.0 and self.sigma_eps == 0.0


@dataclass(frozen=True)
class FieldTrajectory:
    """One realisation of the environment over a time grid.

    ``grid`` holds sample times (microseconds) and ``values`` the field
    offset (Gauss) on them; a quasi-static draw uses a single-point grid
    and is treated as constant everywhere.  ``eps`` is the microwave
    amplitude deviation for the same trajectory.
    """

    grid: np.ndarray
    values: np.ndarray
    eps: float = 0.0

    def value_at(self, t: float) -> float:
        if self.grid.shape[0] == 1:
            return float(self.values[0])
        idx = int(np.searchsorted(self.grid, t, side="right")) - 1
        idx = min(max(idx, 0), self.values.shape[0] - 1)
        return float(self.values[idx])

    @property
    def amplitude_factor(self) -> float:
        return max(1.0 + self.eps, _MIN_AMPLITUDE_FACTOR)


def calibrate_bath(t2_star: float, gamma_e: float = GAMMA_E) -> float:
    """Field spread sigma_b that yields a Gaussian dephasing time t2_star.

    For a quasi-static Gaussian field acting on a bare transition of
    slope gamma_e the ensemble average of exp(-2j*pi*gamma_e*b*t) decays
    as exp(-(t/T2*)^2) with T2* = sqrt(2) / (2*pi*gamma_e*sigma_b);
    inverted here.
    """
    if t2_star <= 0.0:
        raise ValueError(f"t2_star must be positive, got {t2_star}")
    return math.sqrt(2.0) / (2.0 * math.pi * gamma_e * t2_star)


def derive_rng(master_seed: int, index: int, stream: int) -> np.random.Generator:
    """Deterministic per-(trajectory, stream) generator.

    Streams 0 and 1 are reserved for the field and amplitude channels;
    higher stream ids are free for experiment-level draws (e.g. shot
    sampling) without colliding with trajectory noise.
    """
    seq = np.random.SeedSequence(master_seed, spawn_key=(index, stream))
    return np.random.Generator(np.random.PCG64(seq))


_trajectory_rng = derive_rng


def sample_field_trajectory(
    model: NoiseModel,
    duration: float,
    dt: float,
    master_seed: int,
    index: int,
) -> FieldTrajectory:
    """Draw one field realisation covering [0, duration].

    Quasi-static models cost a single normal draw.  Finite tau_c uses
    the exact one-step Ornstein-Uhlenbeck update on a uniform grid of
    spacing <= dt, with the stationary distribution as initial value:

        b[k+1] = b[k]*a + sigma_b*sqrt(1 - a^2)*xi,   a = exp(-dt/tau_c)
    """
    if duration < 0.0:
        raise ValueError("duration must be >= 0")
    eps = sample_mw_amplitude_factor(model, master_seed, index)
    rng = _trajectory_rng(master_seed, index, _STREAM_FIELD)
    if model.sigma_b == 0.0:
        return FieldTrajectory(np.zeros(1), np.zeros(1), eps)
    if model.is_quasi_static:
        value = model.sigma_b * rng.standard_normal()
        return FieldTrajectory(np.zeros(1), np.full(1, value), eps)
    if dt <= 0.0:
        raise ValueError("dt must be positive for a finite correlation time")
    n = max(int(math.ceil(duration / dt)), 1)
    grid = np.linspace(0.0, duration, n + 1)
    step = grid[1] - grid[0] if n > 0 else dt
    decay = math.exp(-step / model.tau_c)
    kick = model.sigma_b * math.sqrt(1.0 - decay * decay)
    xi = rng.standard_normal(n + 1)
    values = np.empty(n + 1)
    values[0] = model.sigma_b * xi[0]
    for k in range(n):
        values[k + 1] = values[k] * decay + kick * xi[k + 1]
    return FieldTrajectory(grid, values, eps)


def sample_mw_amplitude_factor(model: NoiseModel, master_seed: int, index: int) -> float:
    """Microwave amplitude deviation eps for one trajectory."""
    if model.sigma_eps == 0.0:
        return 0.0
    rng = _trajectory_rng(master_seed, index, _STREAM_AMPLITUDE)
    return float(model.sigma_eps * rng.standard_normal())
