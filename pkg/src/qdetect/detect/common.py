"""Pieces shared by the detectors: LLR frames and per-slot observation likelihoods."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..coding.mapping import Constellation
from ..core import LLR_CLAMP, PROB_FLOOR, ParameterError
from ..quantizer import Quantizer
from ..sparsify import SparseIsiModel, interval_prob

# Above this many levels the per-level likelihood table costs more than it saves.
_TABLE_MAX_LEVELS = 16


@dataclass
class LlrFrame:
    """Coded-bit LLRs; bit ``i`` (1-based) belongs to slot ``ceil(i/M)``, position ``i - M(n_i - 1)``."""

    llrs: np.ndarray
    M: int
    counters: dict = field(default_factory=dict)

    def __len__(self):
        return self.llrs.size

    @property
    def n_d(self) -> int:
        return self.llrs.size // self.M

    def slot_of(self, i: int) -> int:
        return -(-i // self.M)

    def position_of(self, i: int) -> int:
        return i - self.M * (self.slot_of(i) - 1)

    @property
    def ops(self) -> int:
        return int(self.counters.get("ops", 0))


def llrs_from_marginals(marg: np.ndarray, cst: Constellation, log_domain: bool = False):
    """Bit LLRs from per-slot symbol marginals ``(N_d, 2**M)``.

    Returns ``(llrs, degenerate)`` where ``degenerate`` counts bits whose
    numerator and denominator both vanished (their LLR is set to 0).
    """
    marg = np.asarray(marg, float)
    bt = cst.bit_table.astype(bool)  # (K, M)
    if log_domain:
        lm = marg
        mx = np.max(lm, axis=1, keepdims=True)
        mx = np.where(np.isfinite(mx), mx, 0.0)
        marg = np.exp(lm - mx)
    num = marg @ (~bt).astype(float)  # (N_d, M)
    den = marg @ bt.astype(float)
    dead = (num <= 0) & (den <= 0)
    llr = np.log(np.maximum(num, PROB_FLOOR)) - np.log(np.maximum(den, PROB_FLOOR))
    llr = np.where(dead, 0.0, llr)
    llr = np.clip(llr, -LLR_CLAMP, LLR_CLAMP)
    return llr.reshape(-1), int(dead.sum())


def hypothesis_digits(n_digits: int, base: int) -> np.ndarray:
    """``(base**n, n)`` table of base-``base`` digits, most significant first."""
    idx = np.arange(base**n_digits)[:, None]
    pw = base ** np.arange(n_digits - 1, -1, -1)[None, :]
    return (idx // pw) % base


class SlotLikelihood:
    """Log-likelihoods ``log P(y[n] | x_D[n])`` for every windowed hypothesis.

    Hypothesis ``h`` over ``J = |D_n|`` taps encodes the symbol indices of
    ``x[n - d]``, ``d`` in ``D_n`` ascending, as base-|X| digits (first tap
    most significant). Tables are cached per (window, noise) and reused
    across slots that share them.
    """

    def __init__(self, Y, model: SparseIsiModel, quant: Quantizer, cst: Constellation, n_d: int):
        Y = np.asarray(Y, complex)
        if Y.ndim != 2 or Y.shape[1] != model.n_rx:
            raise ParameterError(f"Y must be (slots, {model.n_rx})")
        self.Y = Y
        self.model = model
        self.quant = quant
        self.cst = cst
        self.n_d = n_d
        # contributions of each dominant tap for every symbol: (|D|, K, n_rx)
        self._contrib = np.einsum("drt,kt->dkr", model.taps_D, cst.points)
        self._means: dict = {}
        self._tables: dict = {}
        self.pmf_evals = 0
        Yi = quant.level_index(Y.real), quant.level_index(Y.imag)
        self._lvl = np.stack(Yi, axis=2)  # (slots, n_rx, 2)

    def window(self, n: int):
        return self.model.window(n, self.n_d)

    def means(self, dpos: tuple[int, ...]) -> np.ndarray:
        mu = self._means.get(dpos)
        if mu is None:
            K = self.cst.size
            dig = hypothesis_digits(len(dpos), K)
            mu = np.zeros((K ** len(dpos), self.model.n_rx), complex)
            for j, p in enumerate(dpos):
                mu += self._contrib[p][dig[:, j]]
            self._means[dpos] = mu
        return mu

    def loglik(self, n: int):
        """Return ``(window, ll)`` with ``ll`` over the ``|X|**|D_n|`` hypotheses."""
        win = self.window(n)
        mu = self.means(win.D_pos)
        var = self.model.sigma2 + win.weak_power
        self.pmf_evals += mu.shape[0]
        lvl = self._lvl[n - 1]
        q = self.quant
        if q.n_levels <= _TABLE_MAX_LEVELS:
            key = (win.D_pos, tuple(np.round(var, 15)))
            tab = self._tables.get(key)
            if tab is None:
                tab = self._level_table(mu, var)
                self._tables[key] = tab
            r = np.arange(self.model.n_rx)
            ll = tab[r, 0, lvl[:, 0]].sum(axis=0) + tab[r, 1, lvl[:, 1]].sum(axis=0)
            return win, ll
        s = np.sqrt(var / 2.0)[None, :]
        lo_re, hi_re = q.bounds_by_index(lvl[:, 0])
        lo_im, hi_im = q.bounds_by_index(lvl[:, 1])
        p_re = interval_prob(lo_re[None], hi_re[None], mu.real, s)
        p_im = interval_prob(lo_im[None], hi_im[None], mu.imag, s)
        ll = np.sum(np.log(np.maximum(p_re, PROB_FLOOR)) + np.log(np.maximum(p_im, PROB_FLOOR)), axis=1)
        return win, ll

    def _level_table(self, mu, var):
        """``(n_rx, 2, levels, H)`` log-probabilities of each quantizer level."""
        q = self.quant
        s = np.sqrt(var / 2.0)[:, None, None]
        lo = q.boundaries[:-1][None, :, None]
        hi = q.boundaries[1:][None, :, None]
        out = np.empty((self.model.n_rx, 2, q.n_levels, mu.shape[0]))
        for part, m in enumerate((mu.real, mu.imag)):
            p = interval_prob(lo, hi, m.T[:, None, :], s)
            out[:, part] = np.log(np.maximum(p, PROB_FLOOR))
        return out


class GaussianSlotLikelihood:
    """Unquantized counterpart of :class:`SlotLikelihood` (complex Gaussian density)."""

    def __init__(self, R, model: SparseIsiModel, cst: Constellation, n_d: int):
        self.Y = np.asarray(R, complex)
        self.model = model
        self.cst = cst
        self.n_d = n_d
        self._contrib = np.einsum("drt,kt->dkr", model.taps_D, cst.points)
        self._means: dict = {}
        self.pmf_evals = 0
        if model.sigma2 <= 0:
            raise ParameterError("unquantized likelihood needs sigma2 > 0")

    window = SlotLikelihood.window
    means = SlotLikelihood.means

    def loglik(self, n: int):
        win = self.window(n)
        mu = self.means(win.D_pos)
        var = self.model.sigma2 + win.weak_power
        self.pmf_evals += mu.shape[0]
        d = np.abs(self.Y[n - 1][None, :] - mu) ** 2
        ll = -np.sum(d / var[None, :] + np.log(np.pi * var)[None, :], axis=1)
        return win, ll
