# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot loops: Philox4x32-10 streams and batched gate kernels."""

import numpy as np
cimport numpy as cnp
from libc.stdint cimport uint32_t, uint64_t

cnp.import_array()

cdef uint32_t M0 = 0xD2511F53u
cdef uint32_t M1 = 0xCD9E8D57u
cdef uint32_t W0 = 0x9E3779B9u
cdef uint32_t W1 = 0xBB67AE85u
cdef double TWO_M53 = 1.0 / 9007199254740992.0


cdef inline void _philox(uint32_t* c, uint32_t k0, uint32_t k1) noexcept nogil:
    cdef uint64_t p0, p1
    cdef uint32_t hi0, lo0, hi1, lo1
    cdef int i
    for i in range(10):
        if i > 0:
            k0 = k0 + W0
            k1 = k1 + W1
        p0 = <uint64_t>M0 * c[0]
        p1 = <uint64_t>M1 * c[2]
        hi0 = <uint32_t>(p0 >> 32)
        lo0 = <uint32_t>p0
        hi1 = <uint32_t>(p1 >> 32)
        lo1 = <uint32_t>p1
        c[0] = hi1 ^ c[1] ^ k0
        c[1] = lo1
        c[2] = hi0 ^ c[3] ^ k1
        c[3] = lo0


def philox_block(cnp.uint32_t[:, ::1] counters, uint32_t k0, uint32_t k1):
    """Philox4x32-10 applied row-wise to an (n, 4) counter array."""
    cdef Py_ssize_t n = counters.shape[0], i
    out = np.empty((n, 4), dtype=np.uint32)
    cdef cnp.uint32_t[:, ::1] o = out
    cdef uint32_t c[4]
    with nogil:
        for i in range(n):
            c[0] = counters[i, 0]; c[1] = counters[i, 1]
            c[2] = counters[i, 2]; c[3] = counters[i, 3]
            _philox(c, k0, k1)
            o[i, 0] = c[0]; o[i, 1] = c[1]; o[i, 2] = c[2]; o[i, 3] = c[3]
    return out


cdef inline void _uniform_pair(Py_ssize_t row, Py_ssize_t block, uint32_t s0, uint32_t s1,
                               uint32_t k0, uint32_t k1, double* u) noexcept nogil:
    cdef uint32_t c[4]
    cdef uint64_t a, b
    c[0] = <uint32_t>block
    c[1] = <uint32_t>row
    c[2] = s0
    c[3] = s1
    _philox(c, k0, k1)
    a = ((<uint64_t>c[0]) << 32) | c[1]
    b = ((<uint64_t>c[2]) << 32) | c[3]
    u[0] = (a >> 11) * TWO_M53
    u[1] = (b >> 11) * TWO_M53


def uniforms(uint32_t k0, uint32_t k1, uint32_t s0, uint32_t s1,
             Py_ssize_t row0, Py_ssize_t n_rows, Py_ssize_t n_cols):
    """(n_rows, n_cols) uniforms on [0, 1); row r uses counter word 1 = row0 + r."""
    out = np.empty((n_rows, n_cols), dtype=np.float64)
    cdef double[:, ::1] o = out
    cdef Py_ssize_t r, j, nb = (n_cols + 1) // 2
    cdef double u[2]
    with nogil:
        for r in range(n_rows):
            for j in range(nb):
                _uniform_pair(row0 + r, j, s0, s1, k0, k1, u)
                o[r, 2 * j] = u[0]
                if 2 * j + 1 < n_cols:
                    o[r, 2 * j + 1] = u[1]
    return out


def apply_1q(psi, u, int qubit, int n_qubits):
    """In place: apply a 2x2 unitary to `qubit` (qubit 0 is the most significant bit)."""
    _apply_1q_real(psi.view(np.float64), np.ascontiguousarray(u).view(np.float64).reshape(2, 4),
                   qubit, n_qubits)


cdef void _apply_1q_real(double[::1] v, double[:, ::1] u, int qubit, int n_qubits) noexcept nogil:
    # same operation order as numpy's complex multiply-add, so results match bitwise
    cdef Py_ssize_t stride = (<Py_ssize_t>1) << (n_qubits - 1 - qubit)
    cdef Py_ssize_t dim = (<Py_ssize_t>1) << n_qubits
    cdef Py_ssize_t base = 0, i, j
    cdef double ar, ai, br, bi
    cdef double u00r = u[0, 0], u00i = u[0, 1], u01r = u[0, 2], u01i = u[0, 3]
    cdef double u10r = u[1, 0], u10i = u[1, 1], u11r = u[1, 2], u11i = u[1, 3]
    while base < dim:
        for i in range(base, base + stride):
            j = i + stride
            ar = v[2 * i]
            ai = v[2 * i + 1]
            br = v[2 * j]
            bi = v[2 * j + 1]
            v[2 * i] = (u00r * ar - u00i * ai) + (u01r * br - u01i * bi)
            v[2 * i + 1] = (u00r * ai + u00i * ar) + (u01r * bi + u01i * br)
            v[2 * j] = (u10r * ar - u10i * ai) + (u11r * br - u11i * bi)
            v[2 * j + 1] = (u10r * ai + u10i * ar) + (u11r * bi + u11i * br)
        base += 2 * stride


def rx_batch(psi, angles, int qubit, int n_qubits):
    """In place: R_X(angles[b]) on `qubit` of row b."""
    half = 0.5 * np.asarray(angles, dtype=np.float64)
    # trig in numpy so both backends see the same cos/sin values
    _rx_batch_real(psi.view(np.float64), np.ascontiguousarray(np.cos(half)),
                   np.ascontiguousarray(np.sin(half)), qubit, n_qubits)


cdef void _rx_rows(double[:, ::1] v, double[::1] cs, double[::1] sn, Py_ssize_t stride, Py_ssize_t dim) noexcept nogil:
    # real arithmetic on interleaved (re, im) pairs; avoids the slow generic complex multiply
    cdef Py_ssize_t r, base, i, j
    cdef double c, s, ar, ai, br, bi
    for r in range(v.shape[0]):
        c = cs[r]
        s = sn[r]
        base = 0
        while base < dim:
            for i in range(base, base + stride):
                j = i + stride
                ar = v[r, 2 * i]
                ai = v[r, 2 * i + 1]
                br = v[r, 2 * j]
                bi = v[r, 2 * j + 1]
                v[r, 2 * i] = c * ar + s * bi
                v[r, 2 * i + 1] = c * ai - s * br
                v[r, 2 * j] = c * br + s * ai
                v[r, 2 * j + 1] = c * bi - s * ar
            base += 2 * stride


def _rx_batch_real(double[:, ::1] v, double[::1] cs, double[::1] sn, int qubit, int n_qubits):
    cdef Py_ssize_t stride = (<Py_ssize_t>1) << (n_qubits - 1 - qubit)
    cdef Py_ssize_t dim = (<Py_ssize_t>1) << n_qubits
    with nogil:
        _rx_rows(v, cs, sn, stride, dim)


def cnot_batch(cnp.complex128_t[:, ::1] psi, int ctrl, int tgt, int n_qubits):
    """In place: CNOT(ctrl -> tgt) on every row."""
    cdef Py_ssize_t cbit = (<Py_ssize_t>1) << (n_qubits - 1 - ctrl)
    cdef Py_ssize_t tbit = (<Py_ssize_t>1) << (n_qubits - 1 - tgt)
    cdef Py_ssize_t dim = (<Py_ssize_t>1) << n_qubits
    cdef Py_ssize_t B = psi.shape[0]
    cdef Py_ssize_t r, i
    cdef double complex a
    with nogil:
        for r in range(B):
            for i in range(dim):
                if (i & cbit) and not (i & tbit):
                    a = psi[r, i]
                    psi[r, i] = psi[r, i | tbit]
                    psi[r, i | tbit] = a
