"""Kernel backend selection.

The compiled extension is used when it imports; set ``QBSDE_PURE_PYTHON=1``
to force the numpy fallback. Both produce identical random streams: the
backends generate the Philox uniforms and the Box-Muller transform is shared
numpy code, so libm rounding differences cannot leak into the normals.
"""

import os

import numpy as np

BACKEND = "python"

if os.environ.get("QBSDE_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _kernels as _impl

        BACKEND = "compiled"
    except ImportError:  # extension not built
        from . import _kernels_py as _impl
else:
    from . import _kernels_py as _impl

philox_block = _impl.philox_block
uniforms = _impl.uniforms


def normals(k0, k1, s0, s1, row0, n_rows, n_cols):
    """(n_rows, n_cols) standard normals, one Box-Muller pair per Philox block."""
    u = uniforms(k0, k1, s0, s1, row0, n_rows, n_cols + (n_cols & 1))
    rad = np.sqrt(-2.0 * np.log(1.0 - u[:, 0::2]))
    ang = 2.0 * np.pi * u[:, 1::2]
    out = np.empty_like(u)
    out[:, 0::2] = rad * np.cos(ang)
    out[:, 1::2] = rad * np.sin(ang)
    return np.ascontiguousarray(out[:, :n_cols])


apply_1q = _impl.apply_1q
rx_batch = _impl.rx_batch
cnot_batch = _impl.cnot_batch

__all__ = ["BACKEND", "philox_block", "uniforms", "normals", "apply_1q", "rx_batch", "cnot_batch"]
