"""Least-squares model fitting and spectral feature extraction.

The fit engine is a small damped least-squares (Levenberg-Marquardt)
loop with numeric Jacobians: the models are cheap, so robustness and a
recorded accepted-cost history matter more than per-call speed.  Three
signal models cover the protocols: a Gaussian envelope, a Gaussian
damped cosine, and a three-tone beat under one common Gaussian
envelope (asymmetric-looking interference of hyperfine-split
transitions).  Decay times parameterize as exp(-(t/T2)^2), so T2 is
reported as an absolute value.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .exceptions import AmbiguousFrequencyError, DegenerateDataError

MAX_ITERATIONS = 200


@dataclass(frozen=True)
class FitResult:
    model: str
    params: dict[str, float]
    sigmas: dict[str, float]
    residual_rms: float
    converged: bool
    n_iterations: int
    cost_history: tuple[float, ...] = field(default=())

    @property
    def t2_us(self) -> float:
        return self.params["t2_us"]


@dataclass(frozen=True)
class Dip:
    center: float
    depth: float


def _series_xy(series) -> tuple[np.ndarray, np.ndarray]:
    # accepts a TimeSeries-like object or a plain (x, y) pair
    if hasattr(series, "abscissa") and hasattr(series, "mean"):
        x, y = series.abscissa, series.mean
    else:
        x, y = series
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.ndim != 1 or x.shape != y.shape:
        raise ValueError("series must provide matching 1-d abscissa and values")
    return x, y


def _check_variation(y: np.ndarray) -> None:
    spread = float(np.ptp(y))
    scale = max(float(np.max(np.abs(y))), 1.0)
    if spread <= 1e-12 * scale:
        raise DegenerateDataError("signal is constant; nothing to fit")


def _numeric_jacobian(residual, p: np.ndarray, r0: np.ndarray) -> np.ndarray:
    jac = np.empty((r0.shape[0], p.shape[0]))
    for k in range(p.shape[0]):
        step = 1e-6 * max(abs(p[k]), 1e-3)
        hi = p.copy()
        hi[k] += step
        lo = p.copy()
        lo[k] -= step
        jac[:, k] = (residual(hi) - residual(lo)) / (2.0 * step)
    return jac


def _levenberg_marquardt(residual, p0: np.ndarray):
    """Damped normal-equation iterations; accepted cost never increases."""
    p = np.asarray(p0, dtype=float).copy()
    r = residual(p)
    cost = float(r @ r)
    history = [cost]
    lam = 1e-3
    n_iter = 0
    converged = False
    for n_iter in range(1, MAX_ITERATIONS + 1):
        jac = _numeric_jacobian(residual, p, r)
        jtj = jac.T @ jac
        jtr = jac.T @ r
        diag = np.diag(jtj).copy()
        diag[diag <= 0.0] = 1.0
        accepted = False
        for _ in range(25):
            try:
                step = np.linalg.solve(jtj + lam * np.diag(diag), -jtr)
            except np.linalg.LinAlgError:
                lam *= 10.0
                continue
            trial = p + step
            r_trial = residual(trial)
            cost_trial = float(r_trial @ r_trial)
            if np.isfinite(cost_trial) and cost_trial <= cost:
                improvement = cost - cost_trial
                p, r, cost = trial, r_trial, cost_trial
                history.append(cost)
                lam = max(lam * 0.3, 1e-12)
                accepted = True
                if improvement <= 1e-14 * (cost + 1e-30) or float(np.abs(step).max()) < 1e-12:
                    converged = True
                break
            lam *= 10.0
        if not accepted:
            converged = True  # no downhill direction left at machine scale
            break
        if converged:
            break
    cov = _covariance(residual, p, r)
    return p, cov, cost, tuple(history), n_iter, converged


def _covariance(residual, p: np.ndarray, r: np.ndarray) -> np.ndarray:
    jac = _numeric_jacobian(residual, p, r)
    dof = max(r.shape[0] - p.shape[0], 1)
    variance = float(r @ r) / dof
    jtj = jac.T @ jac
    try:
        cov = np.linalg.inv(jtj) * variance
    except np.linalg.LinAlgError:
        cov = np.full((p.shape[0], p.shape[0]), np.inf)
    return cov


def _result(model, names, p, cov, cost, history, n_iter, converged, n_points, absify=()):
    params = {}
    sigmas = {}
    for k, name in enumerate(names):
        value = float(p[k])
        if name in absify:
            value = abs(value)
        params[name] = value
        var = cov[k, k]
        sigmas[name] = float(math.sqrt(var)) if np.isfinite(var) and var >= 0.0 else math.inf
    rms = math.sqrt(cost / n_points)
    return FitResult(
        model=model,
        params=params,
        sigmas=sigmas,
        residual_rms=rms,
        converged=converged,
        n_iterations=n_iter,
        cost_history=history,
    )


def gaussian_decay_model(t: np.ndarray, amplitude: float, t2: float, offset: float) -> np.ndarray:
    return amplitude * np.exp(-((t / t2) ** 2)) + offset


def damped_cosine_model(
    t: np.ndarray, amplitude: float, t2: float, f: float, phi: float, offset: float
) -> np.ndarray:
    return amplitude * np.exp(-((t / t2) ** 2)) * np.cos(2.0 * np.pi * f * t + phi) + offset


def three_tone_model(t: np.ndarray, p: np.ndarray) -> np.ndarray:
    # p = [t2, offset, a1, f1, phi1, a2, f2, phi2, a3, f3, phi3]
    env = np.exp(-((t / p[0]) ** 2))
    total = np.full_like(t, p[1], dtype=float)
    for k in range(3):
        a, f, phi = p[2 + 3 * k : 5 + 3 * k]
        total += env * a * np.cos(2.0 * np.pi * f * t + phi)
    return total


def power_spectrum(x: np.ndarray, y: np.ndarray, pad: int = 8) -> tuple[np.ndarray, np.ndarray]:
    """Discrete power spectrum of a quasi-uniform series, mean removed.

    Zero-padding refines the peak grid; it does not add information.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape[0] < 4:
        raise ValueError("need at least 4 points for a spectrum")
    dt = float(np.mean(np.diff(x)))
    if dt <= 0.0:
        raise ValueError("abscissa must be increasing")
    n = x.shape[0] * pad
    amp = np.fft.rfft(y - np.mean(y), n=n)
    freqs = np.fft.rfftfreq(n, d=dt)
    return freqs, np.abs(amp) ** 2


def _spectral_peaks(freqs: np.ndarray, power: np.ndarray) -> list[tuple[float, float]]:
    # interior local maxima, strongest first, parabolic refinement
    peaks = []
    for i in range(1, power.shape[0] - 1):
        if power[i] > power[i - 1] and power[i] >= power[i + 1] and power[i] > 0.0:
            denom = power[i - 1] - 2.0 * power[i] + power[i + 1]
            shift = 0.0
            if denom < 0.0:
                shift = 0.5 * (power[i - 1] - power[i + 1]) / denom
            f0 = freqs[i] + shift * (freqs[1] - freqs[0])
            peaks.append((float(f0), float(power[i])))
    peaks.sort(key=lambda pair: pair[1], reverse=True)
    return peaks


def dominant_frequency(x: np.ndarray, y: np.ndarray) -> float:
    """Strongest oscillation frequency; raises when two candidates carry
    comparable power (within 10%) and the seed would be arbitrary."""
    freqs, power = power_spectrum(x, y)
    peaks = _spectral_peaks(freqs, power)
    if not peaks:
        return 0.0
    f_best, p_best = peaks[0]
    min_sep = 1.5 / (x[-1] - x[0])  # natural linewidth of the window
    for f_k, p_k in peaks[1:]:
        if abs(f_k - f_best) < min_sep:
            continue  # same lobe
        if p_k >= 0.9 * p_best:
            raise AmbiguousFrequencyError(
                f"spectral peaks at {f_best:.4g} and {f_k:.4g} MHz are within 10% power"
            )
        break  # peaks are sorted; first distinct one decides
    return f_best


def _oscillation_detected(x: np.ndarray, y: np.ndarray) -> bool:
    # A plain decay concentrates its spectrum at the lowest frequencies;
    # a fringe puts more power into an interior peak completing at least
    # one period inside the window.  Compare the two regions.
    freqs, power = power_spectrum(x, y)
    peaks = _spectral_peaks(freqs, power)
    span = float(x[-1] - x[0])
    if span <= 0.0:
        return False
    interior = [(f, p) for f, p in peaks if f * span >= 1.0]
    if not interior:
        return False
    f_best, p_best = max(interior, key=lambda fp: fp[1])
    low = (freqs > 0.0) & (freqs < min(0.75 / span, 0.5 * f_best))
    p_low = float(np.max(power[low])) if np.any(low) else 0.0
    return p_best > p_low


def fit_gaussian_decay(series, allow_reroute: bool = True) -> FitResult:
    """Gaussian envelope fit; oscillatory inputs are routed through the
    damped-cosine (or, for multi-tone beats, the three-tone) model and
    the envelope parameters are reported.  allow_reroute=False forces
    the plain three-parameter fit."""
    x, y = _series_xy(series)
    if x.shape[0] < 6:
        raise ValueError("need at least 6 points")
    _check_variation(y)
    if allow_reroute and _oscillation_detected(x, y):
        try:
            return fit_damped_cosine((x, y))
        except AmbiguousFrequencyError:
            return fit_three_tone((x, y))

    offset0 = float(y[-1])
    amplitude0 = float(y[0] - y[-1])
    if amplitude0 == 0.0:
        amplitude0 = float(np.ptp(y))
    t2_0 = 0.5 * float(x[-1] - x[0]) if x[-1] > x[0] else 1.0

    def residual(p):
        return gaussian_decay_model(x, p[0], p[1], p[2]) - y

    p, cov, cost, history, n_iter, conv = _levenberg_marquardt(
        residual, np.array([amplitude0, t2_0, offset0])
    )
    return _result(
        "gaussian_decay",
        ("amplitude", "t2_us", "offset"),
        p, cov, cost, history, n_iter, conv, x.shape[0],
        absify=("t2_us",),
    )


def fit_damped_cosine(series) -> FitResult:
    """Gaussian-damped cosine fit with spectral frequency seeding."""
    x, y = _series_xy(series)
    if x.shape[0] < 8:
        raise ValueError("need at least 8 points")
    _check_variation(y)
    f0 = dominant_frequency(x, y)
    offset0 = float(np.mean(y))
    amplitude0 = 0.5 * float(np.ptp(y))
    t2_0 = 0.5 * float(x[-1] - x[0])
    # phase seed from the first sample
    c = (float(y[0]) - offset0) / amplitude0 if amplitude0 > 0.0 else 1.0
    phi0 = math.acos(min(max(c, -1.0), 1.0))

    def residual(p):
        return damped_cosine_model(x, p[0], p[1], p[2], p[3], p[4]) - y

    best = None
    for phi_seed in (phi0, -phi0):
        p, cov, cost, history, n_iter, conv = _levenberg_marquardt(
            residual, np.array([amplitude0, t2_0, f0, phi_seed, offset0])
        )
        if best is None or cost < best[2]:
            best = (p, cov, cost, history, n_iter, conv)
    p, cov, cost, history, n_iter, conv = best
    return _result(
        "damped_cosine",
        ("amplitude", "t2_us", "f_mhz", "phi_rad", "offset"),
        p, cov, cost, history, n_iter, conv, x.shape[0],
        absify=("t2_us", "f_mhz"),
    )


def fit_three_tone(series) -> FitResult:
    """Three cosines under a common Gaussian envelope (beat signals)."""
    x, y = _series_xy(series)
    if x.shape[0] < 14:
        raise ValueError("need at least 14 points")
    _check_variation(y)
    freqs, power = power_spectrum(x, y)
    peaks = _spectral_peaks(freqs, power)
    min_sep = 1.5 / (x[-1] - x[0])
    distinct: list[float] = []
    for f_k, _ in peaks:
        if all(abs(f_k - f_j) >= min_sep for f_j in distinct):
            distinct.append(f_k)
        if len(distinct) == 3:
            break
    while len(distinct) < 3:
        distinct.append((distinct[-1] if distinct else 1.0) * (1.1 + 0.1 * len(distinct)))
    offset0 = float(np.mean(y))
    amplitude0 = float(np.ptp(y)) / 6.0
    t2_0 = 0.5 * float(x[-1] - x[0])
    p0 = np.array(
        [t2_0, offset0]
        + [value for f_k in distinct for value in (amplitude0, f_k, 0.0)]
    )

    def residual(p):
        return three_tone_model(x, p) - y

    p, cov, cost, history, n_iter, conv = _levenberg_marquardt(residual, p0)
    names = ("t2_us", "offset",
             "a1", "f1_mhz", "phi1_rad",
             "a2", "f2_mhz", "phi2_rad",
             "a3", "f3_mhz", "phi3_rad")
    return _result(
        "three_tone", names, p, cov, cost, history, n_iter, conv, x.shape[0],
        absify=("t2_us", "f1_mhz", "f2_mhz", "f3_mhz"),
    )


def find_dips(series, stderr: np.ndarray | None = None) -> list[Dip]:
    """Local minima below (baseline - 3*standard error), refined to
    sub-grid centers by a parabola through the three lowest points."""
    x, y = _series_xy(series)
    if x.shape[0] < 5:
        raise ValueError("need at least 5 points")
    if stderr is None and hasattr(series, "stderr"):
        stderr = np.asarray(series.stderr, dtype=float)
    baseline = float(np.median(y))
    if stderr is not None and stderr.size:
        noise = float(np.median(stderr))
    else:
        noise = 0.0
    # floor keeps a perfectly flat noiseless spectrum dip-free
    threshold = baseline - max(3.0 * noise, 1e-9, 1e-3 * abs(baseline))
    dips: list[Dip] = []
    for i in range(1, x.shape[0] - 1):
        if y[i] >= threshold:
            continue
        if y[i] < y[i - 1] and y[i] <= y[i + 1]:
            denom = y[i - 1] - 2.0 * y[i] + y[i + 1]
            shift = 0.0
            if denom > 0.0:
                shift = 0.5 * (y[i - 1] - y[i + 1]) / denom
                shift = min(max(shift, -0.5), 0.5)
            step = 0.5 * (x[i + 1] - x[i - 1])
            dips.append(Dip(center=float(x[i] + shift * step), depth=float(baseline - y[i])))
    dips.sort(key=lambda d: d.center)
    return dips
