"""Bit <-> symbol-vector mapping.

Symbol-vector index ``k`` (0-based) carries bits ``m = 1..M`` as its binary
digits, most significant first. Antenna ``t`` takes the bits
``t*b .. t*b+b-1`` where ``b`` is the number of bits per antenna symbol.
Labeling within an antenna is Gray: bit 0 -> +1 (BPSK), and for 4-QAM the
first bit picks the sign of the in-phase part, the second the quadrature.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from ..core import ParameterError

_PER_ANTENNA = {
    "bpsk": np.array([1.0, -1.0], dtype=complex),
    "qpsk": np.array([1 + 1j, 1 - 1j, -1 + 1j, -1 - 1j], dtype=complex) / np.sqrt(2),
}
_PER_ANTENNA["4qam"] = _PER_ANTENNA["qpsk"]


@dataclass(frozen=True)
class Constellation:
    n_tx: int
    modulation: str = "bpsk"

    def __post_init__(self):
        mod = self.modulation.lower().replace("-", "")
        if mod not in _PER_ANTENNA:
            raise ParameterError(f"unknown modulation {self.modulation!r}")
        if self.n_tx < 1:
            raise ParameterError("n_tx must be >= 1")
        object.__setattr__(self, "modulation", mod)

    @property
    def antenna_points(self) -> np.ndarray:
        return _PER_ANTENNA[self.modulation]

    @property
    def bits_per_antenna(self) -> int:
        return int(np.log2(self.antenna_points.size))

    @property
    def M(self) -> int:
        return self.n_tx * self.bits_per_antenna

    @property
    def size(self) -> int:
        return 2**self.M

    @cached_property
    def bit_table(self) -> np.ndarray:
        """``(2**M, M)`` table; row k holds Demap_1..Demap_M of x_k."""
        k = np.arange(self.size)[:, None]
        shifts = self.M - 1 - np.arange(self.M)[None, :]
        return ((k >> shifts) & 1).astype(np.int8)

    @cached_property
    def points(self) -> np.ndarray:
        """``(2**M, n_tx)`` array of symbol vectors x_k."""
        b = self.bits_per_antenna
        weights = 1 << np.arange(b - 1, -1, -1)
        out = np.empty((self.size, self.n_tx), complex)
        for t in range(self.n_tx):
            sub = self.bit_table[:, t * b : (t + 1) * b] @ weights
            out[:, t] = self.antenna_points[sub]
        out.setflags(write=False)
        return out

    def K(self, m: int, u: int) -> np.ndarray:
        """Indices k whose m-th bit (1-based) equals u."""
        if not 1 <= m <= self.M or u not in (0, 1):
            raise ParameterError(f"bit position {m} / value {u} out of range")
        return np.flatnonzero(self.bit_table[:, m - 1] == u)


def map_symbols(coded, cst: Constellation) -> np.ndarray:
    """Group coded bits M at a time into symbol vectors; returns ``(N_d, n_tx)``."""
    return cst.points[map_indices(coded, cst)]


def map_indices(coded, cst: Constellation) -> np.ndarray:
    c = np.asarray(coded, dtype=np.int64).ravel()
    if c.size % cst.M:
        raise ParameterError(f"{c.size} coded bits not divisible by M={cst.M}")
    if np.any((c != 0) & (c != 1)):
        raise ParameterError("coded bits must be 0/1")
    groups = c.reshape(-1, cst.M)
    weights = 1 << np.arange(cst.M - 1, -1, -1)
    return groups @ weights


def demap_bits(k: int, m: int, cst: Constellation) -> int:
    if not 0 <= k < cst.size or not 1 <= m <= cst.M:
        raise ParameterError(f"symbol index {k} or bit position {m} out of range")
    return int(cst.bit_table[k, m - 1])


def indices_to_bits(idx, cst: Constellation) -> np.ndarray:
    return cst.bit_table[np.asarray(idx)].reshape(-1)


def nearest_indices(x_seq, cst: Constellation) -> np.ndarray:
    x = np.asarray(x_seq, complex)
    d = np.abs(x[:, None, :] - cst.points[None, :, :]) ** 2
    return np.argmin(d.sum(axis=2), axis=1)
