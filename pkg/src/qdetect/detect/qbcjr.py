"""Forward-backward soft detection on the reduced trellis (quantized and unquantized)."""

from __future__ import annotations

import numpy as np

from ..channel import ChannelTaps
from ..coding.mapping import Constellation
from ..core import ParameterError
from ..quantizer import Quantizer
from ..sparsify import SparseIsiModel
from .common import GaussianSlotLikelihood, LlrFrame, SlotLikelihood, llrs_from_marginals
from .trellis import DEFAULT_MAX_TRANSITIONS, Trellis, build_trellis


def forward_backward(lik, trellis: Trellis, cst: Constellation, n_d: int, normalize: bool = True):
    """Symbol marginals ``P(x[n] = x_k, Y~)`` for n = 1..N_d plus operation counters.

    ``lik`` supplies per-slot hypothesis log-likelihoods. With ``normalize``
    the branch metrics of each slot are rescaled by their maximum and alpha
    and beta are normalized to unit sum; none of this changes the LLRs.
    """
    K, Ns, L_D = trellis.K, trellis.n_states, trellis.L_D
    n_end = n_d + L_D - 1
    if lik.Y.shape[0] < n_end:
        raise ParameterError(f"need at least {n_end} observation slots, got {lik.Y.shape[0]}")
    prior = 1.0 / K
    gammas = [None] * (n_end + 1)
    branches = np.zeros(n_end + 1, dtype=np.int64)
    hmaps: dict = {}
    for n in range(1, n_end + 1):
        win, ll = lik.loglik(n)
        hmap = hmaps.get(win.D_n)
        if hmap is None:
            hmap = hmaps[win.D_n] = trellis.hypothesis_map(tuple(d for d in win.D_n))
        if normalize:
            ll = ll - ll.max()
        mask = trellis.branch_mask(n)
        g = np.exp(ll)[hmap] * mask
        if n <= n_d:
            g *= prior
        gammas[n] = g.reshape(K, Ns)
        branches[n] = int(mask.sum())

    alpha = [None] * (n_end + 1)
    a = np.zeros(Ns)
    a[0] = 1.0
    alpha[0] = a
    for n in range(1, n_d):
        g = gammas[n]
        a = (g * alpha[n - 1][None, :]).reshape(Ns, K).sum(axis=1)
        if normalize:
            a = a / a.sum()
        alpha[n] = a

    beta = [None] * (n_end + 1)
    b = np.zeros(Ns)
    b[0] = 1.0
    beta[n_end] = b
    for n in range(n_end, 1, -1):
        g = gammas[n]
        b_next = np.repeat(beta[n], K).reshape(K, Ns)
        b = (g * b_next).sum(axis=0)
        if normalize:
            b = b / b.sum()
        beta[n - 1] = b

    marg = np.empty((n_d, K))
    for n in range(1, n_d + 1):
        b_next = np.repeat(beta[n], K).reshape(K, Ns)
        marg[n - 1] = (gammas[n] * alpha[n - 1][None, :] * b_next).sum(axis=1)

    counters = {
        "pmf_evals": int(lik.pmf_evals),
        "gamma_evals": int(branches[1:].sum()),
        "forward_terms": int(branches[1:n_d].sum()),
        "backward_terms": int(branches[2:].sum()),
        "marginal_terms": int(branches[1 : n_d + 1].sum()),
    }
    counters["ops"] = counters["forward_terms"] + counters["backward_terms"] + counters["marginal_terms"]
    return marg, counters


def qbcjr_llrs(
    Y,
    model: SparseIsiModel,
    quant: Quantizer,
    cst: Constellation,
    n_d: int,
    trellis: Trellis | None = None,
    normalize: bool = True,
    max_transitions: int = DEFAULT_MAX_TRANSITIONS,
    return_marginals: bool = False,
):
    """Quantized BCJR on the sparse ISI model.

    Only the first ``N_d + L_D - 1`` slots of ``Y`` are used.
    """
    if trellis is None:
        trellis = build_trellis(model.D, cst.size, n_d, max_transitions)
    lik = SlotLikelihood(Y, model, quant, cst, n_d)
    marg, counters = forward_backward(lik, trellis, cst, n_d, normalize)
    llr, dead = llrs_from_marginals(marg, cst)
    counters["degenerate"] = dead
    frame = LlrFrame(llr, cst.M, counters)
    return (frame, marg) if return_marginals else frame


def bcjr_unquantized_llrs(
    r,
    channel: ChannelTaps,
    sigma2: float,
    cst: Constellation,
    n_d: int,
    f_tx_bb=None,
    normalize: bool = True,
    max_transitions: int = DEFAULT_MAX_TRANSITIONS,
) -> LlrFrame:
    """Classical BCJR over the full channel support with Gaussian likelihoods."""
    model = SparseIsiModel.from_channel(channel, channel.support, sigma2, f_tx_bb)
    trellis = build_trellis(model.D, cst.size, n_d, max_transitions)
    lik = GaussianSlotLikelihood(r, model, cst, n_d)
    marg, counters = forward_backward(lik, trellis, cst, n_d, normalize)
    llr, dead = llrs_from_marginals(marg, cst)
    counters["degenerate"] = dead
    return LlrFrame(llr, cst.M, counters)
