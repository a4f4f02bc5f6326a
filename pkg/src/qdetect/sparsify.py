"""Extremely sparse ISI model: dominant/weak tap split, conditional PMFs, tap selection.

Weak taps are folded into per-antenna Gaussian noise. The per-slot noise
variance only counts weak taps whose symbol lies inside the frame, while the
selection criterion uses the full weak power.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .channel import ChannelTaps
from .core import ParameterError, normal_interval_prob
from .quantizer import Quantizer


def interval_prob(lo, hi, mu, scale):
    """P(lo < mu + scale*Z <= hi), elementwise; ``scale == 0`` is a point mass."""
    lo, hi, mu, scale = np.broadcast_arrays(*(np.asarray(a, float) for a in (lo, hi, mu, scale)))
    with np.errstate(divide="ignore", invalid="ignore"):
        p = normal_interval_prob((lo - mu) / scale, (hi - mu) / scale)
    point = scale == 0
    if np.any(point):
        p = np.where(point, ((lo < mu) & (mu <= hi)).astype(float), p)
    return p


@dataclass(frozen=True)
class SparseIsiModel:
    """Dominant taps ``D`` kept explicitly, weak taps ``W`` treated as noise.

    ``taps_D`` / ``taps_W`` are ``(|D|, n_rx, n_tx)`` stacks in ascending delay
    order and already include the transmit precoder.
    """

    D: tuple[int, ...]
    W: tuple[int, ...]
    taps_D: np.ndarray
    taps_W: np.ndarray
    sigma2: float
    n_rx: int = field(init=False)
    n_tx: int = field(init=False)

    def __post_init__(self):
        if set(self.D) & set(self.W):
            raise ParameterError("D and W must be disjoint")
        if list(self.D) != sorted(self.D) or list(self.W) != sorted(self.W):
            raise ParameterError("delay sets must be sorted ascending")
        ref = self.taps_D if len(self.D) else self.taps_W
        object.__setattr__(self, "n_rx", ref.shape[1])
        object.__setattr__(self, "n_tx", ref.shape[2])

    @classmethod
    def from_channel(cls, ch: ChannelTaps, D, sigma2: float, f_tx_bb=None) -> "SparseIsiModel":
        ch = ch.scaled(f_tx_bb)
        S = ch.support
        D = tuple(sorted(int(d) for d in D))
        if not set(D) <= set(S):
            raise ParameterError(f"dominant set {D} not contained in support {S}")
        W = tuple(d for d in S if d not in D)
        stack = lambda ds: (  # noqa: E731
            np.array([ch.taps[d] for d in ds]) if ds else np.zeros((0, ch.n_rx, ch.n_tx), complex)
        )
        return cls(D, W, stack(D), stack(W), float(sigma2))

    @property
    def L_D(self) -> int:
        return max(self.D) + 1 if self.D else 0

    @property
    def H_D(self) -> np.ndarray:
        """Stacked ``n_rx x (|D| n_tx)`` matrix ``[H[d_1] ... H[d_|D|]]``."""
        return np.concatenate(list(self.taps_D), axis=1) if self.D else np.zeros((self.n_rx, 0))

    @property
    def H_W(self) -> np.ndarray:
        return np.concatenate(list(self.taps_W), axis=1) if self.W else np.zeros((self.n_rx, 0))

    @property
    def weak_power(self) -> np.ndarray:
        """Per-antenna ``||h_{W,r}||^2`` over all weak taps."""
        return np.sum(np.abs(self.taps_W) ** 2, axis=(0, 2))

    @property
    def dominant_power(self) -> np.ndarray:
        return np.sum(np.abs(self.taps_D) ** 2, axis=(0, 2))

    def window(self, n: int, n_d: int) -> "EdgeWindow":
        return EdgeWindow.build(self, n, n_d)


@dataclass(frozen=True)
class EdgeWindow:
    """Taps valid at slot ``n``: those whose symbol index ``n - l`` is in 1..N_d."""

    n: int
    D_n: tuple[int, ...]
    D_pos: tuple[int, ...]  # positions of D_n inside model.D
    weak_power: np.ndarray

    @classmethod
    def build(cls, model: SparseIsiModel, n: int, n_d: int) -> "EdgeWindow":
        dpos = tuple(i for i, d in enumerate(model.D) if 1 <= n - d <= n_d)
        wmask = np.array([1 <= n - w <= n_d for w in model.W], dtype=bool)
        if wmask.any():
            pw = np.sum(np.abs(model.taps_W[wmask]) ** 2, axis=(0, 2))
        else:
            pw = np.zeros(model.n_rx)
        return cls(n, tuple(model.D[i] for i in dpos), dpos, pw)


def effective_noise_vars(model: SparseIsiModel, n: int, n_d: int) -> np.ndarray:
    """Per-antenna variance of weak-tap ISI plus thermal noise at slot ``n``."""
    if not 1 <= n <= n_d + max(model.L_D, 1) - 1 + (max(model.W) if model.W else 0):
        raise ParameterError(f"slot {n} outside the observation window")
    return model.sigma2 + EdgeWindow.build(model, n, n_d).weak_power


def _level_bounds(quant: Quantizer, y_part: np.ndarray):
    idx = quant.level_index(y_part)
    if not np.allclose(quant.levels[idx], y_part, atol=1e-9):
        raise ParameterError("observation contains values outside the quantizer alphabet")
    return quant.bounds_by_index(idx)


def _quantized_likelihood(y_n, mu, var, quant: Quantizer) -> float:
    y_n = np.asarray(y_n, complex)
    s = np.sqrt(np.asarray(var, float) / 2.0)
    lo_re, hi_re = _level_bounds(quant, y_n.real)
    lo_im, hi_im = _level_bounds(quant, y_n.imag)
    p = interval_prob(lo_re, hi_re, mu.real, s) * interval_prob(lo_im, hi_im, mu.imag, s)
    return float(np.prod(p))


def cond_pmf_sparse(y_n, x_D, model: SparseIsiModel, window: EdgeWindow, quant: Quantizer) -> float:
    """Approximate PMF of ``y[n]`` given the windowed dominant symbols.

    ``x_D`` stacks ``x[n - d]`` for ``d`` in ``window.D_n`` (ascending).
    """
    x = np.asarray(x_D, complex).ravel()
    if x.size != len(window.D_n) * model.n_tx:
        raise ParameterError(f"x_D has {x.size} entries, expected {len(window.D_n) * model.n_tx}")
    mu = np.zeros(model.n_rx, complex)
    for j, pos in enumerate(window.D_pos):
        mu += model.taps_D[pos] @ x[j * model.n_tx : (j + 1) * model.n_tx]
    return _quantized_likelihood(y_n, mu, model.sigma2 + window.weak_power, quant)


def cond_pmf_true(y_n, x_D, x_W, H_D, H_W, sigma2: float, quant: Quantizer) -> float:
    """Exact PMF of ``y[n]`` with both dominant and weak contributions in the mean."""
    H_D = np.atleast_2d(np.asarray(H_D, complex))
    H_W = np.asarray(H_W, complex)
    x_D = np.asarray(x_D, complex).ravel()
    x_W = np.asarray(x_W, complex).ravel()
    if H_D.shape[1] != x_D.size or (x_W.size and H_W.shape[1] != x_W.size):
        raise ParameterError("channel / symbol dimension mismatch")
    mu = H_D @ x_D
    if x_W.size:
        mu = mu + H_W @ x_W
    return _quantized_likelihood(y_n, mu, np.full(H_D.shape[0], sigma2), quant)


# -- NMSE criterion and greedy selection --------------------------------------


def row_powers(ch: ChannelTaps, delays) -> np.ndarray:
    """Per-antenna power summed over the given taps."""
    out = np.zeros(ch.n_rx)
    for d in delays:
        out += np.sum(np.abs(ch.taps[d]) ** 2, axis=1)
    return out


def _nmse_from_powers(p_d: np.ndarray, p_w: np.ndarray, sigma2: float, quant: Quantizer) -> float:
    b2 = quant.finite_boundaries[None, :] ** 2
    p_d = p_d[:, None]
    p_w = p_w[:, None]
    ratio = (sigma2 + p_w) / sigma2
    first = (1.0 - np.sqrt(sigma2 / (sigma2 + p_w))) ** 2
    den = 2.0 * b2 + p_d
    with np.errstate(divide="ignore", invalid="ignore"):
        second = np.where(p_w == 0, 0.0, p_w / den)
    return float(np.sum(ratio * (first + second)))


def nmse(candidate_D, ch: ChannelTaps, sigma2: float, quant: Quantizer) -> float:
    """Closed-form NMSE between true and approximate PMF arguments.

    Uses full (unwindowed) per-antenna powers. Returns ``inf`` when a boundary
    at zero meets an empty dominant set.
    """
    S = set(ch.support)
    D = set(int(d) for d in candidate_D)
    if not D <= S:
        raise ParameterError(f"candidate {sorted(D)} not contained in support {sorted(S)}")
    if sigma2 <= 0:
        raise ParameterError("sigma2 must be positive")
    return _nmse_from_powers(row_powers(ch, D), row_powers(ch, S - D), sigma2, quant)


@dataclass
class Selection:
    D: tuple[int, ...]
    W: tuple[int, ...]
    trace: list[tuple[int, float]]  # (delay added, NMSE after adding); first entry (-1, NMSE(empty))

    @property
    def final_nmse(self) -> float:
        return self.trace[-1][1]


def select_dominant_taps(
    ch: ChannelTaps, sigma2: float, quant: Quantizer, eps_th: float = 0.1, D_max: int = 8
) -> Selection:
    """Greedy dominant-tap selection driven by the closed-form NMSE.

    Adds, one at a time, the weak tap whose promotion minimises the NMSE;
    ties go to the smallest delay. Stops once the NMSE is at most ``eps_th``,
    ``D_max`` taps are chosen, or no weak taps remain.
    """
    if not ch.support:
        raise ParameterError("channel has empty support")
    if eps_th < 0 or D_max < 1:
        raise ParameterError("need eps_th >= 0 and D_max >= 1")
    D: list[int] = []
    W: list[int] = list(ch.support)
    cur = nmse(D, ch, sigma2, quant)
    trace = [(-1, cur)]
    while cur > eps_th and len(D) < D_max and W:
        best, best_val = None, np.inf
        for l in W:
            v = nmse(D + [l], ch, sigma2, quant)
            if best is None or v < best_val:
                best, best_val = l, v
        D.append(best)
        W.remove(best)
        cur = best_val
        trace.append((best, cur))
    return Selection(tuple(sorted(D)), tuple(W), trace)


def largest_taps(ch: ChannelTaps, D_max: int) -> tuple[int, ...]:
    """Baseline selector: the ``D_max`` taps with largest Frobenius power."""
    powers = sorted(ch.support, key=lambda d: (-np.sum(np.abs(ch.taps[d]) ** 2), d))
    return tuple(sorted(powers[: min(D_max, len(powers))]))
