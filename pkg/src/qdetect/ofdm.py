"""OFDM baselines: per-subcarrier LMMSE with and without Bussgang linearization.

The frame carries one symbol vector per subcarrier (``N_sc = N_d``) and a
cyclic prefix of ``L - 1`` samples. FFTs are unitary so time-domain samples
keep unit average power per antenna.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.stats import norm

from .channel import ChannelTaps, propagate
from .coding.mapping import Constellation
from .core import LLR_CLAMP, ParameterError
from .detect.common import LlrFrame
from .quantizer import Quantizer, quantize_seq


@dataclass(frozen=True)
class OfdmFrame:
    n_sc: int
    cp: int
    H_f: np.ndarray  # (n_sc, n_rx, n_tx)
    noise_var: float  # thermal noise after the CP power penalty

    @classmethod
    def build(cls, channel: ChannelTaps, n_sc: int, sigma2: float, f_tx_bb=None) -> "OfdmFrame":
        ch = channel.scaled(f_tx_bb)
        cp = max(ch.length - 1, 0)
        return cls(n_sc, cp, subcarrier_channels(ch, n_sc), cp_noise_var(sigma2, n_sc, cp + 1))


def cp_noise_var(sigma2: float, n_sc: int, L: int) -> float:
    """Noise power scaled by ``(N_d + L - 1) / N_d`` to charge for the prefix."""
    return sigma2 * (n_sc + L - 1) / n_sc


def subcarrier_channels(ch: ChannelTaps, n_sc: int) -> np.ndarray:
    """DFT of the zero-padded tap sequence, one matrix per subcarrier."""
    if ch.length > n_sc:
        raise ParameterError("channel longer than the number of subcarriers")
    dense = np.zeros((n_sc, ch.n_rx, ch.n_tx), complex)
    if ch.length:
        dense[: ch.length] = ch.dense()
    return np.fft.fft(dense, axis=0)


def ofdm_modulate(x_freq, cp: int) -> np.ndarray:
    """Unitary IFFT per antenna followed by a cyclic prefix of ``cp`` samples."""
    x = np.asarray(x_freq, complex)
    t = np.fft.ifft(x, axis=0, norm="ortho")
    return np.concatenate([t[t.shape[0] - cp :], t], axis=0) if cp else t


def ofdm_demodulate(y_time, n_sc: int, cp: int) -> np.ndarray:
    """Drop the prefix and return the unitary FFT of the next ``n_sc`` samples."""
    y = np.asarray(y_time, complex)[cp : cp + n_sc]
    if y.shape[0] != n_sc:
        raise ParameterError("received block shorter than one OFDM symbol")
    return np.fft.fft(y, axis=0, norm="ortho")


def ofdm_transmit(channel: ChannelTaps, x_freq, sigma2: float, rng, quant: Quantizer | None = None, f_tx_bb=None):
    """Send one CP-OFDM block; returns ``(received, frame)`` (quantized if ``quant``)."""
    x = np.asarray(x_freq, complex)
    frame = OfdmFrame.build(channel, x.shape[0], sigma2, f_tx_bb)
    r = propagate(channel, ofdm_modulate(x, frame.cp), f_tx_bb, frame.noise_var, rng)
    return (quantize_seq(quant, r) if quant is not None else r), frame


def bussgang_gain(quant: Quantizer, var: float) -> tuple[float, float]:
    """Bussgang gain and distortion power for a complex Gaussian input of power ``var``.

    Real and imaginary parts are quantized separately, each with variance
    ``var / 2``. The returned distortion power is for the complex sample.
    """
    if var <= 0:
        raise ParameterError("received variance must be positive")
    s = np.sqrt(var / 2.0)
    lo = quant.boundaries[:-1] / s
    hi = quant.boundaries[1:] / s
    q = quant.levels
    gain = float(np.sum(q * (norm.pdf(lo) - norm.pdf(hi))) / s)
    power = float(np.sum(q**2 * (norm.cdf(hi) - norm.cdf(lo))))
    dist = max(power - gain**2 * s**2, 0.0)
    return gain, 2.0 * dist


def lmmse_llrs(Yf, H_f, noise_diag, cst: Constellation):
    """Per-subcarrier LMMSE + max-log demapping with post-equalization SINR.

    ``noise_diag`` is the per-antenna noise(+distortion) power, shape ``(n_rx,)``.
    Returns ``(llrs, z, nu)`` where ``z`` are the unbiased estimates and ``nu``
    their effective noise variances.
    """
    n_sc, n_rx, n_tx = H_f.shape
    c = np.maximum(np.asarray(noise_diag, float), 1e-12 * max(np.mean(np.abs(H_f) ** 2), 1e-300))
    cinv = 1.0 / np.sqrt(c)
    Hw = H_f * cinv[None, :, None]
    Yw = Yf * cinv[None, :]
    gram = np.conj(np.swapaxes(Hw, 1, 2)) @ Hw + np.eye(n_tx)[None]
    rhs = np.conj(np.swapaxes(Hw, 1, 2))
    W = np.linalg.solve(gram, rhs)  # (n_sc, n_tx, n_rx)
    xhat = np.einsum("ktr,kr->kt", W, Yw)
    mu = np.real(np.einsum("ktr,krt->kt", W, Hw))
    mu = np.clip(mu, 1e-15, 1.0 - 1e-15)
    z = xhat / mu
    nu = (1.0 - mu) / mu
    return _maxlog(z, nu, cst), z, nu


def _maxlog(z, nu, cst: Constellation) -> np.ndarray:
    pts = cst.antenna_points
    b = cst.bits_per_antenna
    labels = ((np.arange(pts.size)[:, None] >> np.arange(b - 1, -1, -1)[None, :]) & 1).astype(bool)
    d = np.abs(z[:, :, None] - pts[None, None, :]) ** 2  # (n_sc, n_tx, P)
    out = np.empty(z.shape + (b,))
    for j in range(b):
        d1 = np.min(np.where(labels[None, None, :, j], d, np.inf), axis=2)
        d0 = np.min(np.where(~labels[None, None, :, j], d, np.inf), axis=2)
        out[..., j] = (d1 - d0) / np.maximum(nu, 1e-300)
    return np.clip(out.reshape(-1), -LLR_CLAMP, LLR_CLAMP)


def _ops(n_sc: int, n_rx: int, extra: int = 0) -> int:
    return int(n_sc * n_rx * (np.log2(n_sc) + extra))


def ofdm_mmse_llrs(y_time, channel: ChannelTaps, sigma2: float, cst: Constellation, n_sc: int | None = None, f_tx_bb=None) -> LlrFrame:
    """LMMSE detection that treats the (possibly quantized) samples as unquantized."""
    n_sc = n_sc or (np.asarray(y_time).shape[0] - 2 * max(channel.length - 1, 0))
    frame = OfdmFrame.build(channel, n_sc, sigma2, f_tx_bb)
    Yf = ofdm_demodulate(y_time, n_sc, frame.cp)
    llr, _, _ = lmmse_llrs(Yf, frame.H_f, np.full(channel.n_rx, frame.noise_var), cst)
    return LlrFrame(llr, cst.M, {"ops": _ops(n_sc, channel.n_rx)})


def ofdm_bussgang_llrs(
    y_time, channel: ChannelTaps, sigma2: float, quant: Quantizer, cst: Constellation,
    n_sc: int | None = None, f_tx_bb=None,
) -> LlrFrame:
    """LMMSE on the Bussgang-linearized model ``y = G r + d``."""
    n_sc = n_sc or (np.asarray(y_time).shape[0] - 2 * max(channel.length - 1, 0))
    frame = OfdmFrame.build(channel, n_sc, sigma2, f_tx_bb)
    ch = channel.scaled(f_tx_bb)
    rx_power = np.zeros(ch.n_rx)
    for h in ch.taps.values():
        rx_power += np.sum(np.abs(h) ** 2, axis=1)
    rx_power += frame.noise_var
    gd = [bussgang_gain(quant, p) for p in rx_power]
    g = np.array([a for a, _ in gd])
    dvar = np.array([b for _, b in gd])
    Yf = ofdm_demodulate(y_time, n_sc, frame.cp)
    Hg = frame.H_f * g[None, :, None]
    llr, _, _ = lmmse_llrs(Yf, Hg, g**2 * frame.noise_var + dvar, cst)
    return LlrFrame(llr, cst.M, {"ops": _ops(n_sc, channel.n_rx, 2)})
