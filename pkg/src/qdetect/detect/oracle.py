"""Exhaustive marginalization over all symbol sequences (reference detector)."""

from __future__ import annotations

import itertools

import numpy as np

from ..channel import ChannelTaps, convolve
from ..coding.mapping import Constellation
from ..core import PROB_FLOOR, ParameterError
from ..quantizer import Quantizer
from ..sparsify import interval_prob
from .common import LlrFrame, llrs_from_marginals

MAX_SEQUENCES = 10**6


def bruteforce_marginals(Y, channel: ChannelTaps, quant: Quantizer, sigma2: float, cst: Constellation, n_d: int, f_tx_bb=None):
    """``log P(x[n] = x_k, Y)`` for every slot and symbol, by full enumeration.

    Every received slot ``1..N_d+L-1`` contributes the true conditional PMF
    of the complete channel; the prior is uniform over sequences.
    """
    K = cst.size
    if K**n_d > MAX_SEQUENCES:
        raise ParameterError(f"{K}^{n_d} sequences exceed the oracle budget of {MAX_SEQUENCES}")
    ch = channel.scaled(f_tx_bb)
    n_obs = n_d + ch.length - 1
    Y = np.asarray(Y, complex)[:n_obs]
    if Y.shape[0] < n_obs:
        raise ParameterError(f"need {n_obs} observation slots")
    lo_re, hi_re = quant.bounds_by_index(quant.level_index(Y.real))
    lo_im, hi_im = quant.bounds_by_index(quant.level_index(Y.imag))
    s = np.sqrt(sigma2 / 2.0)
    seqs = np.array(list(itertools.product(range(K), repeat=n_d)))  # (Ns, n_d)
    logp = np.empty(len(seqs))
    for i, seq in enumerate(seqs):
        mu = convolve(ch, cst.points[seq])
        p = interval_prob(lo_re, hi_re, mu.real, s) * interval_prob(lo_im, hi_im, mu.imag, s)
        logp[i] = np.sum(np.log(np.maximum(p, PROB_FLOOR))) - n_d * np.log(K)
    out = np.full((n_d, K), -np.inf)
    for n in range(n_d):
        for k in range(K):
            sel = logp[seqs[:, n] == k]
            m = sel.max()
            out[n, k] = m + np.log(np.sum(np.exp(sel - m)))
    return out


def bruteforce_llrs(Y, channel: ChannelTaps, quant: Quantizer, sigma2: float, cst: Constellation, n_d: int, f_tx_bb=None) -> LlrFrame:
    logm = bruteforce_marginals(Y, channel, quant, sigma2, cst, n_d, f_tx_bb)
    llr, dead = llrs_from_marginals(logm, cst, log_domain=True)
    return LlrFrame(llr, cst.M, {"sequences": cst.size**n_d, "ops": cst.size**n_d, "degenerate": dead})
