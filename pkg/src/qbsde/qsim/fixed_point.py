"""Sign-magnitude fixed-point labels: one sign bit, c1 integer bits, c2 fraction bits."""

from __future__ import annotations

import dataclasses

import numpy as np


@dataclasses.dataclass(frozen=True)
class FixedPointFormat:
    c1: int
    c2: int

    def __post_init__(self):
        if self.c1 < 0 or self.c2 < 0 or self.c1 + self.c2 == 0:
            raise ValueError("need c1, c2 >= 0 with at least one magnitude bit")

    @property
    def n_bits(self) -> int:
        return 1 + self.c1 + self.c2

    @property
    def R(self) -> float:
        return 2.0 ** self.c1 - 2.0 ** -self.c2

    @property
    def resolution(self) -> float:
        return 2.0 ** -self.c2

    def encode(self, x) -> np.ndarray:
        """Label = s a_{c1-1} ... a_0 b_0 ... b_{c2-1}, sign bit most significant. Rounds to nearest."""
        x = np.asarray(x, dtype=np.float64)
        if np.any(np.abs(x) > self.R + 0.5 * self.resolution):
            raise OverflowError(f"value outside [-{self.R}, {self.R}]")
        mag = np.rint(np.abs(x) * 2.0 ** self.c2).astype(np.int64)
        mag = np.minimum(mag, (1 << (self.c1 + self.c2)) - 1)
        sign = ((x < 0) & (mag > 0)).astype(np.int64)
        return (sign << (self.c1 + self.c2)) | mag

    def decode(self, label) -> np.ndarray:
        label = np.asarray(label, dtype=np.int64)
        mag = label & ((1 << (self.c1 + self.c2)) - 1)
        sign = (label >> (self.c1 + self.c2)) & 1
        return np.where(sign == 1, -1.0, 1.0) * mag * 2.0 ** -self.c2

    def grid(self) -> np.ndarray:
        """Every representable value (zero once)."""
        m = np.arange(1 << (self.c1 + self.c2)) * 2.0 ** -self.c2
        return np.concatenate([-m[:0:-1], m])
