# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled string kernels; same signatures as ``_kernels_py``."""
cimport cython
import numpy as np
cimport numpy as cnp

cnp.import_array()

ctypedef fused scalar_t:
    double
    double complex

cdef extern from *:
    int popcount64 "__builtin_popcountll"(unsigned long long) nogil


cdef inline double parity_sign(long long j, long long z) noexcept nogil:
    return 1.0 - 2.0 * (popcount64(<unsigned long long>(j & z)) & 1)


cdef double complex _phase(long long p):
    p = p & 3
    if p == 0:
        return 1.0
    if p == 1:
        return 1j
    if p == 2:
        return -1.0
    return -1j


def materialize(const cnp.int64_t[:] xs, const cnp.int64_t[:] zs, const cnp.int64_t[:] ph,
                const double[:] coeffs, int n_qubits, bint real):
    cdef Py_ssize_t d = 1 << n_qubits
    cdef Py_ssize_t k, j
    cdef long long x, z
    cdef double c
    cdef double complex pc
    cdef double[:, ::1] Hr
    cdef double complex[:, ::1] Hc
    if real:
        H = np.zeros((d, d), dtype=np.float64)
        Hr = H
        for k in range(xs.shape[0]):
            c = coeffs[k]
            if c == 0.0:
                continue
            c = c * _phase(ph[k]).real
            x = xs[k]
            z = zs[k]
            with nogil:
                for j in range(d):
                    Hr[j ^ x, j] += c * parity_sign(j, z)
        return H
    H = np.zeros((d, d), dtype=np.complex128)
    Hc = H
    for k in range(xs.shape[0]):
        c = coeffs[k]
        if c == 0.0:
            continue
        pc = c * _phase(ph[k])
        x = xs[k]
        z = zs[k]
        with nogil:
            for j in range(d):
                Hc[j ^ x, j] += pc * parity_sign(j, z)
    return H


def project(scalar_t[:, :] H, const cnp.int64_t[:] xs, const cnp.int64_t[:] zs, const cnp.int64_t[:] ph):
    cdef Py_ssize_t d = H.shape[0]
    cdef Py_ssize_t k, j
    cdef long long x, z
    cdef double complex acc
    out = np.empty(xs.shape[0], dtype=np.float64)
    cdef double[::1] o = out
    for k in range(xs.shape[0]):
        x = xs[k]
        z = zs[k]
        acc = 0.0
        for j in range(d):
            acc = acc + parity_sign(j, z) * H[j, j ^ x]
        o[k] = (_phase(ph[k]) * acc).real / d
    return out


def diag_expectations(const double[:, ::1] V, const cnp.int64_t[:] xs, const cnp.int64_t[:] zs,
                      const cnp.int64_t[:] ph, bint is_complex):
    """``V`` is real (d, nv) or the float64 view (d, 2 nv) of a complex array."""
    cdef Py_ssize_t d = V.shape[0]
    cdef Py_ssize_t nv = V.shape[1] // 2 if is_complex else V.shape[1]
    cdef Py_ssize_t m = xs.shape[0]
    cdef Py_ssize_t k, j, n, jx
    cdef long long x, z, p
    cdef double s, sgn
    Q = np.empty((nv, m), dtype=np.float64)
    cdef double[:, ::1] q = Q
    acc_arr = np.empty(nv, dtype=np.float64)
    cdef double[::1] acc = acc_arr
    for k in range(m):
        x = xs[k]
        z = zs[k]
        p = ph[k] & 3
        # Re(i^p conj(a) b): p even -> +-Re(conj(a) b), p odd -> -+Im(conj(a) b)
        sgn = 1.0 if (p == 0 or p == 3) else -1.0
        with nogil:
            for n in range(nv):
                acc[n] = 0.0
            for j in range(d):
                s = parity_sign(j, z)
                jx = j ^ x
                if not is_complex:
                    for n in range(nv):
                        acc[n] += s * V[jx, n] * V[j, n]
                elif p % 2 == 0:
                    for n in range(nv):
                        acc[n] += s * (V[jx, 2 * n] * V[j, 2 * n] + V[jx, 2 * n + 1] * V[j, 2 * n + 1])
                else:
                    for n in range(nv):
                        acc[n] += s * (V[jx, 2 * n] * V[j, 2 * n + 1] - V[jx, 2 * n + 1] * V[j, 2 * n])
            for n in range(nv):
                q[n, k] = sgn * acc[n]
    return Q


def diag_energies(const cnp.int64_t[:] zs, const double[:] h, int n_qubits):
    cdef Py_ssize_t d = 1 << n_qubits
    cdef Py_ssize_t m = zs.shape[0]
    cdef Py_ssize_t c, k
    cdef double e
    out = np.empty(d, dtype=np.float64)
    cdef double[::1] o = out
    with nogil:
        for c in range(d):
            e = 0.0
            for k in range(m):
                e += h[k] * parity_sign(c, zs[k])
            o[c] = e
    return out


def diag_contract(const cnp.int64_t[:] zs, const double[:] r, int n_qubits):
    cdef Py_ssize_t d = 1 << n_qubits
    cdef Py_ssize_t m = zs.shape[0]
    cdef Py_ssize_t c, k
    cdef double rc
    out = np.zeros(m, dtype=np.float64)
    cdef double[::1] o = out
    with nogil:
        for c in range(d):
            rc = r[c]
            for k in range(m):
                o[k] += rc * parity_sign(c, zs[k])
    return out
