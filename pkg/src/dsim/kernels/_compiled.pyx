# cython: language_level=3
# cython: boundscheck=False
# cython: wraparound=False
# cython: cdivision=True
# cython: initializedcheck=False
"""Compiled stepping backend.

One C-level loop over the schedule.  Each distinct (H, dt) pair costs a
closed-form 3x3 Hermitian eigendecomposition: eigenvalues from the
trigonometric solution of the characteristic cubic, eigenvectors from
cross products of rows of (H - lambda*I), with guarded fallbacks when
the spectrum clusters.  The propagator for a step is reused while the
following steps carry a bitwise-identical (H, dt).
"""

from libc.math cimport sqrt, acos, cos, sin, fabs, M_PI

import numpy as np

BACKEND = "compiled"

ctypedef double complex dc

cdef double _TWO_PI = 2.0 * M_PI


cdef inline void _eigvals3(const dc* h, double* ev) noexcept nogil:
    # Ascending eigenvalues of a Hermitian 3x3 via the trigonometric
    # closed form.  Row-major h, only the upper triangle is trusted.
    cdef double q = (h[0].real + h[4].real + h[8].real) / 3.0
    cdef double off = (h[1].real * h[1].real + h[1].imag * h[1].imag
                       + h[2].real * h[2].real + h[2].imag * h[2].imag
                       + h[5].real * h[5].real + h[5].imag * h[5].imag)
    cdef double d0 = h[0].real - q
    cdef double d1 = h[4].real - q
    cdef double d2 = h[8].real - q
    cdef double p2 = d0 * d0 + d1 * d1 + d2 * d2 + 2.0 * off
    cdef double p, det, r, phi, big, small
    cdef dc o01, o02, o12, acc
    if p2 <= 0.0:
        ev[0] = q
        ev[1] = q
        ev[2] = q
        return
    p = sqrt(p2 / 6.0)
    o01 = h[1]
    o02 = h[2]
    o12 = h[5]
    acc = (d0 * (d1 * d2 - o12 * o12.conjugate())
           - o01 * (o01.conjugate() * d2 - o12 * o02.conjugate())
           + o02 * (o01.conjugate() * o12.conjugate() - d1 * o02.conjugate()))
    det = acc.real
    r = det / (2.0 * p * p * p)
    if r > 1.0:
        r = 1.0
    elif r < -1.0:
        r = -1.0
    phi = acos(r) / 3.0
    big = q + 2.0 * p * cos(phi)
    small = q + 2.0 * p * cos(phi + 2.0 * M_PI / 3.0)
    ev[0] = small
    ev[1] = 3.0 * q - big - small
    ev[2] = big


cdef inline double _cross(const dc* a, const dc* b, dc* out) noexcept nogil:
    # Complex cross product (no conjugation); returns squared 2-norm.
    out[0] = a[1] * b[2] - a[2] * b[1]
    out[1] = a[2] * b[0] - a[0] * b[2]
    out[2] = a[0] * b[1] - a[1] * b[0]
    return (out[0].real * out[0].real + out[0].imag * out[0].imag
            + out[1].real * out[1].real + out[1].imag * out[1].imag
            + out[2].real * out[2].real + out[2].imag * out[2].imag)


cdef inline double _eigvec3(const dc* h, double lam, dc* out) noexcept nogil:
    # Best cross product of two rows of (h - lam*I); returns its squared
    # norm so the caller can detect a (near-)degenerate eigenvalue.
    cdef dc m[9]
    cdef dc cand[3]
    cdef double best, norm2
    cdef int i, j, pair
    m[0] = h[0] - lam
    m[1] = h[1]
    m[2] = h[2]
    m[3] = h[1].conjugate()
    m[4] = h[4] - lam
    m[5] = h[5]
    m[6] = h[2].conjugate()
    m[7] = h[5].conjugate()
    m[8] = h[8] - lam
    best = -1.0
    for pair in range(3):
        i = 3 * (pair if pair < 2 else 0)
        j = 3 * (pair + 1 if pair < 2 else 2)
        norm2 = _cross(&m[i], &m[j], cand)
        if norm2 > best:
            best = norm2
            out[0] = cand[0]
            out[1] = cand[1]
            out[2] = cand[2]
    return best


cdef inline void _normalize(dc* v) noexcept nogil:
    cdef double n = sqrt(v[0].real * v[0].real + v[0].imag * v[0].imag
                         + v[1].real * v[1].real + v[1].imag * v[1].imag
                         + v[2].real * v[2].real + v[2].imag * v[2].imag)
    cdef double inv
    if n == 0.0:
        return
    inv = 1.0 / n
    v[0] = v[0] * inv
    v[1] = v[1] * inv
    v[2] = v[2] * inv


cdef inline void _complete_pair(const dc* a, dc* v) noexcept nogil:
    # Unit vector orthogonal to a: project a basis vector picked where
    # |a| is smallest, so the projection never vanishes.
    cdef int k = 0
    cdef double m0 = a[0].real * a[0].real + a[0].imag * a[0].imag
    cdef double m1 = a[1].real * a[1].real + a[1].imag * a[1].imag
    cdef double m2 = a[2].real * a[2].real + a[2].imag * a[2].imag
    cdef dc overlap
    if m1 < m0:
        k = 1
        m0 = m1
    if m2 < m0:
        k = 2
    v[0] = 0.0
    v[1] = 0.0
    v[2] = 0.0
    v[k] = 1.0
    overlap = a[0].conjugate() * v[0] + a[1].conjugate() * v[1] + a[2].conjugate() * v[2]
    v[0] = v[0] - overlap * a[0]
    v[1] = v[1] - overlap * a[1]
    v[2] = v[2] - overlap * a[2]
    _normalize(v)


cdef inline void _propagator(const dc* h, double dt, dc* u) noexcept nogil:
    # u = exp(-2j*pi*h*dt) through the spectral decomposition.
    cdef double ev[3]
    cdef dc vec[3][3]
    cdef dc conj_a[3]
    cdef dc conj_b[3]
    cdef int order[3]
    cdef int k, a, b, c, row, col
    cdef double gap_lo, gap_hi, scale, tol2, norm2
    cdef dc overlap, phase
    cdef double ang
    _eigvals3(h, ev)
    scale = fabs(ev[0])
    if fabs(ev[2]) > scale:
        scale = fabs(ev[2])
    if scale < 1e-300:
        # h is numerically zero: identity
        for k in range(9):
            u[k] = 0.0
        u[0] = 1.0
        u[4] = 1.0
        u[8] = 1.0
        return
    gap_lo = ev[1] - ev[0]
    gap_hi = ev[2] - ev[1]
    # Endpoint with the larger gap first, other endpoint second, middle
    # last: cross-product conditioning for an eigenvalue scales with the
    # product of its gaps, and the middle value owns the two smallest.
    if gap_lo >= gap_hi:
        order[0] = 0
        order[1] = 2
    else:
        order[0] = 2
        order[1] = 0
    order[2] = 1
    a = order[0]
    b = order[1]
    c = order[2]
    tol2 = 1e-24 * scale * scale * scale * scale
    norm2 = _eigvec3(h, ev[a], vec[a])
    if norm2 <= tol2:
        # Fully clustered spectrum: any orthonormal frame works.
        vec[a][0] = 1.0
        vec[a][1] = 0.0
        vec[a][2] = 0.0
    _normalize(vec[a])
    norm2 = _eigvec3(h, ev[b], vec[b])
    overlap = (vec[a][0].conjugate() * vec[b][0]
               + vec[a][1].conjugate() * vec[b][1]
               + vec[a][2].conjugate() * vec[b][2])
    vec[b][0] = vec[b][0] - overlap * vec[a][0]
    vec[b][1] = vec[b][1] - overlap * vec[a][1]
    vec[b][2] = vec[b][2] - overlap * vec[a][2]
    if (vec[b][0].real * vec[b][0].real + vec[b][0].imag * vec[b][0].imag
            + vec[b][1].real * vec[b][1].real + vec[b][1].imag * vec[b][1].imag
            + vec[b][2].real * vec[b][2].real + vec[b][2].imag * vec[b][2].imag
            <= 1e-12 * norm2 or norm2 <= tol2):
        _complete_pair(vec[a], vec[b])
    else:
        _normalize(vec[b])
    # Third vector: the conjugated cross product closes the frame.
    conj_a[0] = vec[a][0].conjugate()
    conj_a[1] = vec[a][1].conjugate()
    conj_a[2] = vec[a][2].conjugate()
    conj_b[0] = vec[b][0].conjugate()
    conj_b[1] = vec[b][1].conjugate()
    conj_b[2] = vec[b][2].conjugate()
    _cross(conj_a, conj_b, vec[c])
    _normalize(vec[c])
    for k in range(9):
        u[k] = 0.0
    for k in range(3):
        ang = -_TWO_PI * ev[k] * dt
        phase = cos(ang) + 1j * sin(ang)
        for row in range(3):
            for col in range(3):
                u[3 * row + col] = u[3 * row + col] + phase * vec[k][row] * vec[k][col].conjugate()


cdef inline bint _same_step(const dc* h, const dc* prev, double dt, double dt_prev) noexcept nogil:
    cdef int k
    if dt != dt_prev:
        return 0
    for k in range(9):
        if h[k].real != prev[k].real or h[k].imag != prev[k].imag:
            return 0
    return 1


cdef inline void _apply(const dc* u, dc* psi) noexcept nogil:
    cdef dc r0 = u[0] * psi[0] + u[1] * psi[1] + u[2] * psi[2]
    cdef dc r1 = u[3] * psi[0] + u[4] * psi[1] + u[5] * psi[2]
    cdef dc r2 = u[6] * psi[0] + u[7] * psi[1] + u[8] * psi[2]
    psi[0] = r0
    psi[1] = r1
    psi[2] = r2


def propagate(const double[::1] dts, const dc[:, :, ::1] hams, const dc[::1] psi0):
    cdef Py_ssize_t n = dts.shape[0]
    out = np.empty(3, dtype=np.complex128)
    cdef dc[::1] psi = out
    cdef dc u[9]
    cdef dc hcur[9]
    cdef dc hprev[9]
    cdef double dt_prev = -1.0
    cdef bint have = 0
    cdef Py_ssize_t k, j
    psi[0] = psi0[0]
    psi[1] = psi0[1]
    psi[2] = psi0[2]
    with nogil:
        for k in range(n):
            for j in range(9):
                hcur[j] = hams[k, j // 3, j % 3]
            if not have or not _same_step(hcur, hprev, dts[k], dt_prev):
                _propagator(hcur, dts[k], u)
                for j in range(9):
                    hprev[j] = hcur[j]
                dt_prev = dts[k]
                have = 1
            _apply(u, &psi[0])
    return out


def propagate_states(const double[::1] dts, const dc[:, :, ::1] hams, const dc[::1] psi0):
    cdef Py_ssize_t n = dts.shape[0]
    out = np.empty((n + 1, 3), dtype=np.complex128)
    cdef dc[:, ::1] states = out
    cdef dc u[9]
    cdef dc hcur[9]
    cdef dc hprev[9]
    cdef dc psi[3]
    cdef double dt_prev = -1.0
    cdef bint have = 0
    cdef Py_ssize_t k, j
    psi[0] = psi0[0]
    psi[1] = psi0[1]
    psi[2] = psi0[2]
    states[0, 0] = psi[0]
    states[0, 1] = psi[1]
    states[0, 2] = psi[2]
    with nogil:
        for k in range(n):
            for j in range(9):
                hcur[j] = hams[k, j // 3, j % 3]
            if not have or not _same_step(hcur, hprev, dts[k], dt_prev):
                _propagator(hcur, dts[k], u)
                for j in range(9):
                    hprev[j] = hcur[j]
                dt_prev = dts[k]
                have = 1
            _apply(u, psi)
            states[k + 1, 0] = psi[0]
            states[k + 1, 1] = psi[1]
            states[k + 1, 2] = psi[2]
    return out


def propagate_unitary(const double[::1] dts, const dc[:, :, ::1] hams):
    cdef Py_ssize_t n = dts.shape[0]
    out = np.eye(3, dtype=np.complex128)
    cdef dc[:, ::1] tot = out
    cdef dc u[9]
    cdef dc hcur[9]
    cdef dc hprev[9]
    cdef dc acc[9]
    cdef dc nxt[9]
    cdef double dt_prev = -1.0
    cdef bint have = 0
    cdef Py_ssize_t k, j, row, col
    for j in range(9):
        acc[j] = 0.0
    acc[0] = 1.0
    acc[4] = 1.0
    acc[8] = 1.0
    with nogil:
        for k in range(n):
            for j in range(9):
                hcur[j] = hams[k, j // 3, j % 3]
            if not have or not _same_step(hcur, hprev, dts[k], dt_prev):
                _propagator(hcur, dts[k], u)
                for j in range(9):
                    hprev[j] = hcur[j]
                dt_prev = dts[k]
                have = 1
            for row in range(3):
                for col in range(3):
                    nxt[3 * row + col] = (u[3 * row] * acc[col]
                                          + u[3 * row + 1] * acc[3 + col]
                                          + u[3 * row + 2] * acc[6 + col])
            for j in range(9):
                acc[j] = nxt[j]
    for row in range(3):
        for col in range(3):
            tot[row, col] = acc[3 * row + col]
    return out
