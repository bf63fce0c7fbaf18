"""Time the compiled kernels against the numpy fallback.

    python benchmarks/bench_kernels.py [--repeat 5]

Each kernel is run on identical inputs by both backends; outputs are
checked for bitwise equality before timings are reported.
"""

import argparse
import timeit

import numpy as np

from qbsde import _kernels_py as py

try:
    from qbsde import _kernels as cy
except ImportError:
    cy = None


def cases():
    rng = np.random.default_rng(0)
    psi = rng.normal(size=1 << 14) + 1j * rng.normal(size=1 << 14)
    psi /= np.linalg.norm(psi)
    u = np.array([[0, 1], [1, 0]], dtype=np.complex128) @ np.diag(np.exp([0.3j, -0.3j]))
    batch = np.ascontiguousarray(np.tile(psi[:256], (512, 1)))
    angles = rng.uniform(-3, 3, 512)
    return {
        "uniforms 20000x20": lambda k: k.uniforms(1, 2, 3, 4, 0, 20000, 20),
        "apply_1q 14 qubits": lambda k: _inplace(k.apply_1q, psi, u, 5, 14),
        "rx_batch 512x8 qubits": lambda k: _inplace(k.rx_batch, batch, angles, 3, 8),
        "cnot_batch 512x8 qubits": lambda k: _inplace(k.cnot_batch, batch, 2, 6, 8),
    }


def _inplace(fn, state, *args):
    s = state.copy()
    fn(s, *args)
    return s


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    if cy is None:
        print("compiled extension not built; only the fallback is available")
    print(f"{'kernel':<26}{'fallback ms':>14}{'compiled ms':>14}{'speedup':>10}")
    for name, run in cases().items():
        t_py = min(timeit.repeat(lambda: run(py), number=1, repeat=args.repeat)) * 1e3
        if cy is None:
            print(f"{name:<26}{t_py:>14.3f}")
            continue
        if not np.array_equal(run(py), run(cy)):
            raise SystemExit(f"{name}: backends disagree")
        t_cy = min(timeit.repeat(lambda: run(cy), number=1, repeat=args.repeat)) * 1e3
        print(f"{name:<26}{t_py:>14.3f}{t_cy:>14.3f}{t_py / t_cy:>10.1f}x")


if __name__ == "__main__":
    main()
