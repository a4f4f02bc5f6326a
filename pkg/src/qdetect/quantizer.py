"""B-bit uniform scalar quantizer applied to real and imaginary parts."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import ParameterError


@dataclass(frozen=True)
class Quantizer:
    """Scalar quantizer with levels ``q_1 < ... < q_P`` and bin edges ``b_0..b_P``.

    ``Q(r) = q_p`` iff ``b_{p-1} < r <= b_p``; ``b_0 = -inf`` and ``b_P = +inf``.
    """

    bits: int
    levels: np.ndarray
    boundaries: np.ndarray

    @classmethod
    def from_levels(cls, levels, bits: int | None = None) -> "Quantizer":
        levels = np.asarray(levels, dtype=float)
        if levels.ndim != 1 or levels.size < 2 or np.any(np.diff(levels) <= 0):
            raise ParameterError("levels must be strictly increasing with >= 2 entries")
        inner = 0.5 * (levels[:-1] + levels[1:])
        bounds = np.concatenate(([-np.inf], inner, [np.inf]))
        if bits is None:
            bits = int(np.log2(levels.size))
        levels.setflags(write=False)
        bounds.setflags(write=False)
        return cls(bits, levels, bounds)

    @property
    def n_levels(self) -> int:
        return self.levels.size

    @property
    def finite_boundaries(self) -> np.ndarray:
        return self.boundaries[1:-1]

    def level_index(self, r) -> np.ndarray:
        """Bin index p-1 (0-based) of each real sample; ties go to the lower bin."""
        return np.searchsorted(self.finite_boundaries, np.asarray(r, dtype=float), side="left")

    def quantize_real(self, r) -> np.ndarray:
        return self.levels[self.level_index(r)]

    def __call__(self, r):
        return quantize_seq(self, r)

    def bounds(self, level: float) -> tuple[float, float]:
        return bounds(self, level)

    def bounds_by_index(self, idx):
        idx = np.asarray(idx)
        return self.boundaries[idx], self.boundaries[idx + 1]


def make_uniform(bits: int) -> Quantizer:
    """Symmetric uniform quantizer without a zero level.

    B=1 gives the sign quantizer {-1, +1}; B>=2 uses step ``0.75 * 2**(2-B)``,
    which reproduces {-1.125, -0.375, 0.375, 1.125} at B=2.
    """
    if not isinstance(bits, (int, np.integer)) or not 1 <= bits <= 16:
        raise ParameterError(f"adc bits must be an integer in 1..16, got {bits!r}")
    bits = int(bits)
    if bits == 1:
        return Quantizer.from_levels([-1.0, 1.0], bits)
    step = 0.75 * 2.0 ** (2 - bits)
    n = 2**bits
    levels = (np.arange(n) - (n - 1) / 2.0) * step
    return Quantizer.from_levels(levels, bits)


def quantize_seq(q: Quantizer, r_seq) -> np.ndarray:
    """Quantize real and imaginary parts separately; returns complex output."""
    r = np.asarray(r_seq)
    if np.iscomplexobj(r):
        return q.quantize_real(r.real) + 1j * q.quantize_real(r.imag)
    return q.quantize_real(r)


def bounds(q: Quantizer, level: float) -> tuple[float, float]:
    """Half-open bin ``(l, u]`` that maps to ``level``."""
    hit = np.flatnonzero(np.isclose(q.levels, level, rtol=0.0, atol=1e-12))
    if hit.size != 1:
        raise ParameterError(f"{level!r} is not a quantizer level")
    p = int(hit[0])
    return float(q.boundaries[p]), float(q.boundaries[p + 1])
