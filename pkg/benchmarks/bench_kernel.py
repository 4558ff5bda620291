"""Compare the propagation backends on the two workloads that matter:
schedules where every step has a fresh Hamiltonian (ramps, RF) and
schedules dominated by repeated steps (constant drive windows).

Usage: python3 benchmarks/bench_kernel.py [--steps N] [--repeats R]
"""

import argparse
import time

import numpy as np

from dsim.kernels import available_backends, get_backend
from dsim.spin import build_driven_hamiltonian


def distinct_schedule(n: int):
    dts = np.full(n, 1.5e-4)
    hams = np.empty((n, 3, 3), dtype=np.complex128)
    t_mid = (np.arange(n) + 0.5) * dts[0]
    for k in range(n):
        zeeman = 0.1389 * 2.802 * np.cos(2 * np.pi * 1.3489 * t_mid[k])
        h = build_driven_hamiltonian(0.4, 1.6, b=0.0)
        h[0, 0] += zeeman
        h[2, 2] -= zeeman
        hams[k] = h
    return dts, np.ascontiguousarray(hams)


def repeated_schedule(n: int):
    dts = np.full(n, 1.5e-4)
    hams = np.broadcast_to(build_driven_hamiltonian(0.4, 1.6), (n, 3, 3))
    return dts, np.ascontiguousarray(hams)


def run(backend, dts, hams, psi0, repeats: int) -> float:
    best = np.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        backend.propagate(dts, hams, psi0)
        best = min(best, time.perf_counter() - t0)
    return best


def main() -> None:
    parser = argparse.ArgumentParser()
    parser.add_argument("--steps", type=int, default=200_000)
    parser.add_argument("--repeats", type=int, default=3)
    args = parser.parse_args()

    psi0 = np.array([0.0, 1.0, 0.0], dtype=np.complex128)
    names = available_backends()
    print(f"backends: {', '.join(names)}   steps: {args.steps}")

    for label, maker in (("distinct", distinct_schedule), ("repeated", repeated_schedule)):
        dts, hams = maker(args.steps)
        finals = {}
        print(f"\n[{label} Hamiltonians]")
        timings = {}
        for name in names:
            backend = get_backend(name)
            elapsed = run(backend, dts, hams, psi0, args.repeats)
            timings[name] = elapsed
            finals[name] = backend.propagate(dts, hams, psi0)
            rate = 1e6 * elapsed / args.steps
            print(f"  {name:10s} {elapsed:8.3f} s   {rate:8.4f} us/step")
        if len(names) == 2:
            a, b = (finals[n] for n in names)
            print(f"  speedup python/compiled: {timings['python'] / timings['compiled']:.1f}x")
            print(f"  max |amplitude difference|: {np.abs(a - b).max():.3e}")


if __name__ == "__main__":
    main()
