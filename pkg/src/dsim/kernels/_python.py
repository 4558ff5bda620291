"""Pure-numpy stepping backend.

Schedules produced by the sequence compiler contain long runs of steps
that share a Hamiltonian and duration bitwise (constant-tone segments,
cached noise draws).  The run structure is recovered up front so each
distinct step costs one slot in a single batched eigendecomposition, and
within a run the state advances through eigenbasis phases rather than
repeated matrix products.
"""

from __future__ import annotations

import numpy as np

BACKEND = "python"

_TWO_PI = 2.0 * np.pi


def _run_starts(dts: np.ndarray, hams: np.ndarray) -> np.ndarray:
    n = dts.shape[0]
    if n == 0:
        return np.zeros(0, dtype=np.intp)
    if n == 1:
        return np.zeros(1, dtype=np.intp)
    same_h = np.all(hams[1:] == hams[:-1], axis=(1, 2))
    same = same_h & (dts[1:] == dts[:-1])
    return np.concatenate(([0], np.flatnonzero(~same) + 1)).astype(np.intp)


def _run_eigs(dts: np.ndarray, hams: np.ndarray, starts: np.ndarray):
    # eigh once per run representative
    w, v = np.linalg.eigh(hams[starts])
    return w, v


def propagate(dts: np.ndarray, hams: np.ndarray, psi0: np.ndarray) -> np.ndarray:
    n = dts.shape[0]
    psi = psi0.astype(np.complex128, copy=True)
    if n == 0:
        return psi
    starts = _run_starts(dts, hams)
    w, v = _run_eigs(dts, hams, starts)
    bounds = np.concatenate((starts, [n]))
    for r in range(starts.shape[0]):
        length = bounds[r + 1] - bounds[r]
        span = dts[starts[r]] * length
        coeff = v[r].conj().T @ psi
        coeff *= np.exp(-1j * _TWO_PI * w[r] * span)
        psi = v[r] @ coeff
    return psi


def propagate_states(dts: np.ndarray, hams: np.ndarray, psi0: np.ndarray) -> np.ndarray:
    n = dts.shape[0]
    out = np.empty((n + 1, 3), dtype=np.complex128)
    out[0] = psi0
    if n == 0:
        return out
    starts = _run_starts(dts, hams)
    w, v = _run_eigs(dts, hams, starts)
    bounds = np.concatenate((starts, [n]))
    psi = psi0.astype(np.complex128, copy=False)
    for r in range(starts.shape[0]):
        begin, end = bounds[r], bounds[r + 1]
        length = end - begin
        spans = dts[begin] * np.arange(1, length + 1)
        coeff = v[r].conj().T @ psi
        phases = np.exp(-1j * _TWO_PI * np.outer(w[r], spans))
        out[begin + 1 : end + 1] = (v[r] @ (coeff[:, None] * phases)).T
        psi = out[end]
    return out


def propagate_unitary(dts: np.ndarray, hams: np.ndarray) -> np.ndarray:
    n = dts.shape[0]
    total = np.eye(3, dtype=np.complex128)
    if n == 0:
        return total
    starts = _run_starts(dts, hams)
    w, v = _run_eigs(dts, hams, starts)
    bounds = np.concatenate((starts, [n]))
    for r in range(starts.shape[0]):
        length = bounds[r + 1] - bounds[r]
        span = dts[starts[r]] * length
        phases = np.exp(-1j * _TWO_PI * w[r] * span)
        u_run = (v[r] * phases[None, :]) @ v[r].conj().T
        total = u_run @ total
    return total
