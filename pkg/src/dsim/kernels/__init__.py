"""Time-stepping kernels.

A schedule is a pair of arrays: per-step durations ``dts`` (microseconds)
and per-step Hermitian Hamiltonians ``hams`` (N, 3, 3) in MHz.  Each step
applies exp(-2j*pi*H*dt) to the state, computed through a Hermitian
eigendecomposition, so the evolution is unitary to machine precision.

Two interchangeable backends exist: a Cython extension built at install
time and a pure-numpy fallback.  Selection happens at import, and can be
forced with the environment variable DSIM_KERNEL in {"auto", "compiled",
"python"}.  Both implement:

    propagate(dts, hams, psi0)         -> final state (3,)
    propagate_states(dts, hams, psi0)  -> states at step boundaries (N+1, 3)
    propagate_unitary(dts, hams)       -> total propagator (3, 3)
"""

from __future__ import annotations

import os

import numpy as np

from . import _python

try:
    from . import _compiled
except ImportError:  # pragma: no cover - depends on the build environment
    _compiled = None

_choice = os.environ.get("DSIM_KERNEL", "auto").strip().lower()
if _choice not in ("auto", "compiled", "python"):
    raise ValueError(f"DSIM_KERNEL must be auto, compiled or python, got {_choice!r}")
if _choice == "compiled" and _compiled is None:
    raise ImportError("DSIM_KERNEL=compiled but the compiled kernel is not available")

if _choice == "python" or _compiled is None:
    _active = _python
else:
    _active = _compiled


def backend_name() -> str:
    """Name of the kernel backend selected at import time."""
    return _active.BACKEND


def available_backends() -> tuple[str, ...]:
    names = ["python"]
    if _compiled is not None:
        names.insert(0, "compiled")
    return tuple(names)


def get_backend(name: str):
    """Return a specific backend module, independent of the active one."""
    if name == "python":
        return _python
    if name == "compiled":
        if _compiled is None:
            raise ValueError("compiled kernel is not available")
        return _compiled
    raise ValueError(f"unknown backend {name!r}")


def _as_schedule_arrays(dts, hams):
    dts = np.ascontiguousarray(dts, dtype=np.float64)
    hams = np.ascontiguousarray(hams, dtype=np.complex128)
    if dts.ndim != 1 or hams.shape != (dts.shape[0], 3, 3):
        raise ValueError("schedule arrays must have shapes (N,) and (N, 3, 3)")
    return dts, hams


def propagate(dts, hams, psi0) -> np.ndarray:
    dts, hams = _as_schedule_arrays(dts, hams)
    psi0 = np.ascontiguousarray(psi0, dtype=np.complex128)
    return _active.propagate(dts, hams, psi0)


def propagate_states(dts, hams, psi0) -> np.ndarray:
    dts, hams = _as_schedule_arrays(dts, hams)
    psi0 = np.ascontiguousarray(psi0, dtype=np.complex128)
    return _active.propagate_states(dts, hams, psi0)


def propagate_unitary(dts, hams) -> np.ndarray:
    dts, hams = _as_schedule_arrays(dts, hams)
    return _active.propagate_unitary(dts, hams)
