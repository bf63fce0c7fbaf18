"""Pure numpy versions of the compiled kernels; bit-compatible outputs."""

import numpy as np

_M0 = np.uint64(0xD2511F53)
_M1 = np.uint64(0xCD9E8D57)
_W0 = 0x9E3779B9
_W1 = 0xBB67AE85
_MASK = np.uint64(0xFFFFFFFF)
_TWO_M53 = 1.0 / 9007199254740992.0


def _philox(c0, c1, c2, c3, k0, k1):
    c0, c1, c2, c3 = (np.asarray(c, dtype=np.uint64) for c in (c0, c1, c2, c3))
    for i in range(10):
        if i > 0:
            k0 = (k0 + _W0) & 0xFFFFFFFF
            k1 = (k1 + _W1) & 0xFFFFFFFF
        p0 = _M0 * c0
        p1 = _M1 * c2
        hi0, lo0 = p0 >> np.uint64(32), p0 & _MASK
        hi1, lo1 = p1 >> np.uint64(32), p1 & _MASK
        c0, c1, c2, c3 = hi1 ^ c1 ^ np.uint64(k0), lo1, hi0 ^ c3 ^ np.uint64(k1), lo0
    return c0, c1, c2, c3


def philox_block(counters, k0, k1):
    c = np.ascontiguousarray(counters, dtype=np.uint32).astype(np.uint64)
    out = _philox(c[:, 0], c[:, 1], c[:, 2], c[:, 3], int(k0), int(k1))
    return np.stack(out, axis=1).astype(np.uint32)


def _uniform_pairs(k0, k1, s0, s1, row0, n_rows, n_cols):
    nb = (n_cols + 1) // 2
    rows = np.arange(row0, row0 + n_rows, dtype=np.uint64)[:, None]
    blocks = np.arange(nb, dtype=np.uint64)[None, :]
    shape = (n_rows, nb)
    c0, c1, c2, c3 = _philox(
        np.broadcast_to(blocks, shape) & _MASK,
        np.broadcast_to(rows, shape) & _MASK,
        np.full(shape, s0, dtype=np.uint64),
        np.full(shape, s1, dtype=np.uint64),
        int(k0), int(k1),
    )
    a = (c0 << np.uint64(32)) | c1
    b = (c2 << np.uint64(32)) | c3
    u0 = (a >> np.uint64(11)).astype(np.float64) * _TWO_M53
    u1 = (b >> np.uint64(11)).astype(np.float64) * _TWO_M53
    return u0, u1


def uniforms(k0, k1, s0, s1, row0, n_rows, n_cols):
    u0, u1 = _uniform_pairs(k0, k1, s0, s1, row0, n_rows, n_cols)
    out = np.empty((n_rows, 2 * u0.shape[1]))
    out[:, 0::2] = u0
    out[:, 1::2] = u1
    return np.ascontiguousarray(out[:, :n_cols])


def apply_1q(psi, u, qubit, n_qubits):
    # explicit real arithmetic: numpy's complex loops may fuse multiply-adds
    view = psi.view(np.float64).reshape(1 << qubit, 2, 1 << (n_qubits - 1 - qubit), 2)
    ar, ai = view[:, 0, :, 0].copy(), view[:, 0, :, 1].copy()
    br, bi = view[:, 1, :, 0].copy(), view[:, 1, :, 1].copy()
    for row in (0, 1):
        (pr, pi), (qr, qi) = [(z.real, z.imag) for z in u[row]]
        view[:, row, :, 0] = (pr * ar - pi * ai) + (qr * br - qi * bi)
        view[:, row, :, 1] = (pr * ai + pi * ar) + (qr * bi + qi * br)


def rx_batch(psi, angles, qubit, n_qubits):
    B = psi.shape[0]
    view = psi.view(np.float64).reshape(B, 1 << qubit, 2, 1 << (n_qubits - 1 - qubit), 2)
    half = 0.5 * np.asarray(angles, dtype=np.float64)
    c = np.cos(half)[:, None, None]
    s = np.sin(half)[:, None, None]
    ar, ai = view[:, :, 0, :, 0].copy(), view[:, :, 0, :, 1].copy()
    br, bi = view[:, :, 1, :, 0].copy(), view[:, :, 1, :, 1].copy()
    view[:, :, 0, :, 0] = c * ar + s * bi
    view[:, :, 0, :, 1] = c * ai - s * br
    view[:, :, 1, :, 0] = c * br + s * ai
    view[:, :, 1, :, 1] = c * bi - s * ar


def cnot_batch(psi, ctrl, tgt, n_qubits):
    B = psi.shape[0]
    view = psi.reshape((B,) + (2,) * n_qubits)
    sel = [slice(None)] * (n_qubits + 1)
    sel[ctrl + 1] = 1
    sub = view[tuple(sel)]
    ax = tgt + 1 - (1 if tgt > ctrl else 0)
    sub[...] = np.flip(sub, axis=ax).copy()
