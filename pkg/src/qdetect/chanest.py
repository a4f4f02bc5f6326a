"""Least-squares CIR estimation from quantized pilot observations."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import ChannelTaps, propagate
from .core import ParameterError, RngStream
from .quantizer import Quantizer, quantize_seq

NORMALIZATIONS = ("sqrt", "conventional")


@dataclass(frozen=True)
class PilotBlock:
    X_p: np.ndarray  # (n_tx, T_p)
    L: int

    @property
    def n_tx(self) -> int:
        return self.X_p.shape[0]

    @property
    def T_p(self) -> int:
        return self.X_p.shape[1]

    @property
    def X_bar(self) -> np.ndarray:
        return toeplitz(self.X_p, self.L)

    def sequence(self) -> np.ndarray:
        """Pilots as a transmit sequence, shape ``(T_p, n_tx)``."""
        return self.X_p.T.copy()


def min_pilot_length(n_tx: int, L: int) -> int:
    return max(L * (n_tx - 1) + 1, n_tx)


def gen_pilots(T_p: int, n_tx: int, L: int, rng, normalization: str = "sqrt") -> PilotBlock:
    """Random QPSK rows, orthonormalized, then scaled.

    ``normalization="sqrt"`` gives ``X_p X_p^H = sqrt(T_p) I``;
    ``"conventional"`` gives ``X_p X_p^H = T_p I``.
    """
    if normalization not in NORMALIZATIONS:
        raise ParameterError(f"normalization must be one of {NORMALIZATIONS}")
    if L < 1 or n_tx < 1:
        raise ParameterError("L and n_tx must be >= 1")
    if T_p < min_pilot_length(n_tx, L):
        raise ParameterError(f"T_p={T_p} too short; need >= {min_pilot_length(n_tx, L)}")
    gen = rng.generator() if isinstance(rng, RngStream) else rng
    raw = (gen.choice([-1.0, 1.0], (n_tx, T_p)) + 1j * gen.choice([-1.0, 1.0], (n_tx, T_p))) / np.sqrt(2)
    q, _ = np.linalg.qr(raw.conj().T)  # orthonormal columns (T_p, n_tx)
    rows = q.conj().T
    scale = T_p**0.25 if normalization == "sqrt" else np.sqrt(T_p)
    return PilotBlock(rows * scale, L)


def toeplitz(X_p, L: int) -> np.ndarray:
    """Block-Toeplitz matrix with row ``t`` and column block ``l`` equal to ``x_p[t-l]^T``."""
    X = np.asarray(X_p, complex)
    n_tx, T_p = X.shape
    out = np.zeros((T_p + L - 1, L * n_tx), complex)
    for l in range(L):
        out[l : l + T_p, l * n_tx : (l + 1) * n_tx] = X.T
    return out


def ls_estimate(Y_p, pilots: PilotBlock, quant: Quantizer | None = None) -> ChannelTaps:
    """Per-antenna LS solve of ``Y_p = X_bar h_i``; returns taps ``0..L-1``.

    ``Y_p`` has shape ``(T_p + L - 1, n_rx)``. If ``quant`` is given the
    input is quantized first (a no-op for samples already on the grid).
    """
    Y = np.asarray(Y_p, complex)
    if Y.ndim == 1:
        Y = Y[:, None]
    Xb = pilots.X_bar
    if Y.shape[0] != Xb.shape[0]:
        raise ParameterError(f"expected {Xb.shape[0]} pilot observations, got {Y.shape[0]}")
    if quant is not None:
        Y = quantize_seq(quant, Y)
    gram = Xb.conj().T @ Xb
    if np.linalg.cond(gram) > 1e12:
        raise ParameterError("pilot Gram matrix is singular")
    h = np.linalg.solve(gram, Xb.conj().T @ Y)  # (L*n_tx, n_rx)
    n_tx, L = pilots.n_tx, pilots.L
    taps = h.reshape(L, n_tx, -1).transpose(0, 2, 1)
    return ChannelTaps.from_dense(taps)


def transmit_pilots(channel: ChannelTaps, pilots: PilotBlock, sigma2: float, rng, quant: Quantizer | None = None, f_tx_bb=None):
    """Quantized received pilot block, zero-padded to ``T_p + L - 1`` slots."""
    r = propagate(channel, pilots.sequence(), f_tx_bb, sigma2, rng)
    n = pilots.T_p + pilots.L - 1
    if r.shape[0] < n:
        r = np.vstack([r, np.zeros((n - r.shape[0], r.shape[1]), complex)])
    r = r[:n]
    return quantize_seq(quant, r) if quant is not None else r


def estimation_nmse(est: ChannelTaps, true: ChannelTaps, L: int) -> float:
    a = np.zeros((L, true.n_rx, true.n_tx), complex)
    b = np.zeros_like(a)
    for d, h in est.taps.items():
        if d < L:
            a[d] = h
    for d, h in true.taps.items():
        if d < L:
            b[d] = h
    return float(np.sum(np.abs(a - b) ** 2) / np.sum(np.abs(b) ** 2))
