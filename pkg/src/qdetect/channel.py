"""Sparse frequency-selective MIMO channels and their time-domain propagation."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

import numpy as np

from .core import ParameterError, RngStream, draw_cgauss

PRUNE_REL = 1e-12
PULSE_SPAN = 8  # raised-cosine truncation, in symbol durations


@dataclass(frozen=True)
class ChannelTaps:
    """Sparse tap map ``delay -> H[delay]`` (complex ``n_rx x n_tx``).

    Zero taps are never stored, so the key set is the channel support.
    """

    n_rx: int
    n_tx: int
    taps: Mapping[int, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        clean = {}
        for d, h in sorted(self.taps.items()):
            d = int(d)
            if d < 0:
                raise ParameterError(f"negative delay {d}")
            h = np.array(h, dtype=complex).reshape(self.n_rx, self.n_tx)
            if np.any(h != 0):
                h.setflags(write=False)
                clean[d] = h
        object.__setattr__(self, "taps", clean)

    @property
    def support(self) -> list[int]:
        return sorted(self.taps)

    @property
    def length(self) -> int:
        """L = largest stored delay + 1 (0 for an empty channel)."""
        return max(self.taps) + 1 if self.taps else 0

    def tap(self, delay: int) -> np.ndarray:
        h = self.taps.get(delay)
        return np.zeros((self.n_rx, self.n_tx), complex) if h is None else h

    def dense(self) -> np.ndarray:
        """Taps stacked as an ``(L, n_rx, n_tx)`` array, zeros filled in."""
        out = np.zeros((self.length, self.n_rx, self.n_tx), complex)
        for d, h in self.taps.items():
            out[d] = h
        return out

    def scaled(self, f_tx_bb: np.ndarray | None) -> "ChannelTaps":
        """Channel seen through a transmit baseband precoder."""
        if f_tx_bb is None:
            return self
        f = np.asarray(f_tx_bb, complex)
        return ChannelTaps(self.n_rx, self.n_tx, {d: h @ f for d, h in self.taps.items()})

    @classmethod
    def from_dense(cls, taps: np.ndarray) -> "ChannelTaps":
        taps = np.asarray(taps, complex)
        return cls(taps.shape[1], taps.shape[2], {d: taps[d] for d in range(taps.shape[0])})

    # -- serialization -----------------------------------------------------

    def to_json(self) -> str:
        doc = {
            "n_rx": self.n_rx,
            "n_tx": self.n_tx,
            "taps": [
                {
                    "delay": d,
                    "matrix": [[float(z.real), float(z.imag)] for z in h.ravel()],
                }
                for d, h in sorted(self.taps.items())
            ],
        }
        return json.dumps(doc, indent=1)

    @classmethod
    def from_json(cls, text: str) -> "ChannelTaps":
        doc = json.loads(text)
        n_rx, n_tx = int(doc["n_rx"]), int(doc["n_tx"])
        taps = {}
        for t in doc["taps"]:
            m = np.array(t["matrix"], dtype=float)
            if m.shape != (n_rx * n_tx, 2):
                raise ParameterError(f"tap {t['delay']}: matrix has shape {m.shape}")
            taps[int(t["delay"])] = (m[:, 0] + 1j * m[:, 1]).reshape(n_rx, n_tx)
        return cls(n_rx, n_tx, taps)

    def save(self, path) -> None:
        Path(path).write_text(self.to_json())

    @classmethod
    def load(cls, path) -> "ChannelTaps":
        return cls.from_json(Path(path).read_text())


def support(ch: ChannelTaps) -> list[int]:
    return ch.support


def exp_pdp_powers(n_taps: int, decay: float) -> np.ndarray:
    if n_taps < 1:
        raise ParameterError("n_taps must be >= 1")
    if decay <= 0:
        raise ParameterError("decay must be positive")
    p = np.exp(-decay * np.arange(n_taps))
    return p / p.sum()


def gen_exp_pdp(n_taps: int, decay: float, n_rx: int, n_tx: int, rng) -> ChannelTaps:
    """Independent Rayleigh taps with an exponentially decaying power profile.

    Per-entry variance of tap ``l`` is ``exp(-l*decay)`` normalized to unit total.
    """
    p = exp_pdp_powers(n_taps, decay)
    gen = rng.generator() if isinstance(rng, RngStream) else rng
    h = draw_cgauss(gen, 0, 1.0, size=(n_taps, n_rx, n_tx)) * np.sqrt(p)[:, None, None]
    return ChannelTaps(n_rx, n_tx, {d: h[d] for d in range(n_taps)})


# -- geometric cluster model ----------------------------------------------


@dataclass(frozen=True)
class Subpath:
    gain: complex
    delay: float  # seconds
    aod: tuple[float, float] = (0.0, math.pi / 2)  # (azimuth, elevation) in radians
    aoa: tuple[float, float] = (0.0, math.pi / 2)


@dataclass(frozen=True)
class Upa:
    rows: int = 1
    cols: int = 1
    spacing: float = 0.5  # wavelengths

    @property
    def size(self) -> int:
        return self.rows * self.cols

    def response(self, azimuth: float, elevation: float) -> np.ndarray:
        """Unit-norm steering vector, element (m, n) at row m, column n.

        Elevation is measured from the array normal axis (z), so broadside is
        ``elevation = pi/2, azimuth = 0`` and gives the all-ones vector.
        """
        m = np.arange(self.rows)[:, None]
        n = np.arange(self.cols)[None, :]
        phase = 2 * np.pi * self.spacing * (
            m * np.sin(azimuth) * np.sin(elevation) + n * np.cos(elevation)
        )
        return np.exp(1j * phase).ravel() / np.sqrt(self.size)


@dataclass(frozen=True)
class ClusterSpec:
    subpaths: tuple[Subpath, ...]
    symbol_time: float
    rolloff: float = 0.0
    tx_array: Upa = Upa()
    rx_array: Upa = Upa()
    f_tx_rf: np.ndarray | None = None
    f_rx_rf: np.ndarray | None = None
    n_tx: int | None = None
    n_rx: int | None = None

    def tx_bf(self) -> np.ndarray:
        return _bf_matrix(self.f_tx_rf, self.tx_array.size, self.n_tx)

    def rx_bf(self) -> np.ndarray:
        return _bf_matrix(self.f_rx_rf, self.rx_array.size, self.n_rx)

    @classmethod
    def from_dict(cls, doc: dict) -> "ClusterSpec":
        paths = tuple(
            Subpath(
                gain=complex(*p["gain"]) if isinstance(p["gain"], (list, tuple)) else complex(p["gain"]),
                delay=float(p["delay"]),
                aod=tuple(p.get("aod", (0.0, math.pi / 2))),
                aoa=tuple(p.get("aoa", (0.0, math.pi / 2))),
            )
            for p in doc["subpaths"]
        )
        arr = lambda d: Upa(**d) if d else Upa()  # noqa: E731
        mat = lambda m: None if m is None else np.array(m, float)[..., 0] + 1j * np.array(m, float)[..., 1]  # noqa: E731
        return cls(
            subpaths=paths,
            symbol_time=float(doc["symbol_time"]),
            rolloff=float(doc.get("rolloff", 0.0)),
            tx_array=arr(doc.get("tx_array")),
            rx_array=arr(doc.get("rx_array")),
            f_tx_rf=mat(doc.get("f_tx_rf")),
            f_rx_rf=mat(doc.get("f_rx_rf")),
            n_tx=doc.get("n_tx"),
            n_rx=doc.get("n_rx"),
        )


def _bf_matrix(f, n_ant: int, n_rf: int | None) -> np.ndarray:
    if f is None:
        n_rf = n_ant if n_rf is None else n_rf
        if n_rf > n_ant:
            raise ParameterError("more RF chains than antennas")
        return np.eye(n_ant, n_rf, dtype=complex)
    f = np.asarray(f, complex)
    if f.shape[0] != n_ant or (n_rf is not None and f.shape[1] != n_rf):
        raise ParameterError(f"BF matrix shape {f.shape} does not match array of {n_ant}")
    return f


def raised_cosine(t, rolloff: float) -> np.ndarray:
    """Raised-cosine pulse with t in symbol durations, zero beyond +-PULSE_SPAN."""
    t = np.asarray(t, float)
    out = np.sinc(t)
    if rolloff > 0:
        den = 1.0 - (2.0 * rolloff * t) ** 2
        sing = np.isclose(den, 0.0, atol=1e-12)
        safe = np.where(sing, 1.0, den)
        out = np.where(sing, np.pi / 4 * np.sinc(1.0 / (2 * rolloff)), out * np.cos(np.pi * rolloff * t) / safe)
    return np.where(np.abs(t) <= PULSE_SPAN, out, 0.0)


def gen_geometric(spec: ClusterSpec, max_L: int) -> ChannelTaps:
    """Sample the cluster model at integer delays and apply the analog beamformers.

    Taps run from 0 to ``round(tau_max/T_s) + PULSE_SPAN`` so pulse tails are
    kept; taps below ``PRUNE_REL`` of the strongest tap are dropped.
    """
    if not spec.subpaths:
        raise ParameterError("at least one subpath is required")
    ts = spec.symbol_time
    delays = np.array([p.delay for p in spec.subpaths])
    if np.any(delays < 0):
        raise ParameterError("subpath delays must be nonnegative")
    tau_max = delays.max()
    if tau_max > max_L * ts:
        raise ParameterError(f"max delay {tau_max / ts:.3f} T_s exceeds max_L={max_L}")
    if max_L < math.floor(tau_max / ts + 0.5):
        raise ParameterError("max_L below the rounded maximum delay")

    n_taps = math.floor(tau_max / ts + 0.5) + PULSE_SPAN + 1
    ell = np.arange(n_taps)
    a = np.zeros((n_taps, spec.rx_array.size, spec.tx_array.size), complex)
    for p in spec.subpaths:
        outer = np.outer(spec.rx_array.response(*p.aoa), spec.tx_array.response(*p.aod).conj())
        pulse = raised_cosine(ell - p.delay / ts, spec.rolloff)
        a += p.gain * pulse[:, None, None] * outer[None]

    f_rx, f_tx = spec.rx_bf(), spec.tx_bf()
    h = np.einsum("ai,lab,bj->lij", f_rx.conj(), a, f_tx)
    norms = np.linalg.norm(h, axis=(1, 2))
    keep = norms >= PRUNE_REL * norms.max()
    return ChannelTaps(f_rx.shape[1], f_tx.shape[1], {int(d): h[d] for d in ell[keep]})


# -- propagation --------------------------------------------------------------


def convolve(ch: ChannelTaps, x_seq: np.ndarray) -> np.ndarray:
    """Noiseless MIMO convolution; output length ``N_d + L - 1``."""
    x = np.asarray(x_seq, complex)
    if x.ndim != 2 or x.shape[1] != ch.n_tx:
        raise ParameterError(f"symbol sequence must be (N_d, {ch.n_tx}), got {x.shape}")
    n_d = x.shape[0]
    out = np.zeros((n_d + max(ch.length, 1) - 1, ch.n_rx), complex)
    for d, h in ch.taps.items():
        out[d : d + n_d] += x @ h.T
    return out


def propagate(ch: ChannelTaps, x_seq, f_tx_bb=None, sigma2: float = 0.0, rng=None) -> np.ndarray:
    """Received sequence ``r[n] = sum_l H[l] F x[n-l] + v[n]`` for n = 1..N_d+L-1.

    Returned as an ``(N_d + L - 1, n_rx)`` array (row ``i`` is slot ``i+1``).
    """
    x = np.asarray(x_seq, complex)
    if f_tx_bb is not None:
        f = np.asarray(f_tx_bb, complex)
        if f.shape != (ch.n_tx, ch.n_tx):
            raise ParameterError(f"precoder must be {ch.n_tx}x{ch.n_tx}")
        x = x @ f.T
    r = convolve(ch, x)
    if sigma2 > 0:
        if rng is None:
            raise ParameterError("an RNG is required when sigma2 > 0")
        r = r + draw_cgauss(rng, 0, sigma2, size=r.shape)
    elif sigma2 < 0:
        raise ParameterError("sigma2 must be nonnegative")
    return r
