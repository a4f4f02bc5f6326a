"""Belief propagation on the sparse factor graph (flooding schedule).

Variable node ``v`` (symbol ``x[v]``) is joined to check node ``v + l`` for
every dominant delay ``l``. Check ``n`` only sees delays in ``D_n``, i.e.
those whose symbol index falls inside the frame.
"""

from __future__ import annotations

import string

import numpy as np

from ..coding.mapping import Constellation
from ..core import PROB_FLOOR, ParameterError
from ..quantizer import Quantizer
from ..sparsify import SparseIsiModel
from .common import LlrFrame, SlotLikelihood, llrs_from_marginals

_AX = string.ascii_letters


def _contract_except(P: np.ndarray, msgs: np.ndarray, keep: int) -> np.ndarray:
    """Batched sum of ``P[c]`` against ``msgs[c, i]`` on every axis ``i != keep``.

    ``P`` is ``(C, K, ..., K)`` with ``J`` symbol axes, ``msgs`` is ``(C, J, K)``.
    """
    J = P.ndim - 1
    ops = [P]
    subs = ["Z" + _AX[:J]]
    for i in range(J):
        if i != keep:
            ops.append(msgs[:, i])
            subs.append("Z" + _AX[i])
    return np.einsum(",".join(subs) + "->Z" + _AX[keep], *ops, optimize=J > 2)


def qbp_llrs(
    Y,
    model: SparseIsiModel,
    quant: Quantizer,
    cst: Constellation,
    n_d: int,
    n_it: int = 3,
    return_messages: bool = False,
    likelihood=None,
):
    """Quantized BP detector; returns an :class:`LlrFrame`.

    ``return_messages`` additionally returns the final ``T`` tables
    ``(N_d, |D|, K)`` and the per-iteration list of ``T`` snapshots.
    """
    if n_it < 1:
        raise ParameterError("n_it must be >= 1")
    if not model.D:
        raise ParameterError("at least one dominant tap is required")
    K = cst.size
    D = model.D
    nD = len(D)
    L_D = model.L_D
    n_end = n_d + L_D - 1
    lik = likelihood or SlotLikelihood(Y, model, quant, cst, n_d)
    if lik.Y.shape[0] < n_end:
        raise ParameterError(f"need at least {n_end} observation slots")

    # check-node PMF tables, computed once and reused by every iteration;
    # checks sharing the same dominant-tap window are batched together
    groups: dict[tuple[int, ...], list] = {}
    for n in range(1, n_end + 1):
        win, ll = lik.loglik(n)
        if win.D_pos:
            groups.setdefault(win.D_pos, []).append((n, ll))
    batches = []
    for dpos, items in groups.items():
        J = len(dpos)
        ns = np.array([n for n, _ in items])
        ll = np.stack([l for _, l in items])
        P = np.exp(ll - ll.max(axis=1, keepdims=True)).reshape((len(items),) + (K,) * J)
        # variable index (0-based) per check and edge
        var = ns[:, None] - 1 - np.array([D[p] for p in dpos])[None, :]
        batches.append((dpos, var, P))

    T = np.full((n_d, nD, K), 1.0 / K)  # T[v-1, j] = T_v^{v+D[j]}
    Rin = np.ones((n_d, nD, K)) / K  # Rin[v-1, j] = R_{v+D[j]}^{v}
    message_terms = 0
    underflows = 0
    snapshots = []
    for _ in range(n_it):
        newR = np.ones((n_d, nD, K)) / K
        for dpos, var, P in batches:
            J = len(dpos)
            C = var.shape[0]
            message_terms += C * J * K**J
            msgs = np.stack([T[var[:, i], p] for i, p in enumerate(dpos)], axis=1)  # (C, J, K)
            for j, p in enumerate(dpos):
                r = _contract_except(P, msgs, j) if J > 1 else P.reshape(C, K).copy()
                tot = r.sum(axis=1, keepdims=True)
                bad = ~(tot[:, 0] > 0)
                if bad.any():
                    underflows += int(bad.sum())
                    r[bad] = 1.0 / K
                    tot[bad] = 1.0
                newR[var[:, j], p] = r / tot
        Rin = newR
        logR = np.log(np.maximum(Rin, PROB_FLOOR))
        ext = logR.sum(axis=1, keepdims=True) - logR
        ext -= ext.max(axis=2, keepdims=True)
        T = np.exp(ext)
        T /= T.sum(axis=2, keepdims=True)
        if return_messages:
            snapshots.append(T.copy())

    logm = np.log(np.maximum(Rin, PROB_FLOOR)).sum(axis=1)
    llr, dead = llrs_from_marginals(logm, cst, log_domain=True)
    counters = {
        "pmf_evals": int(lik.pmf_evals),
        "message_terms": int(message_terms),
        "underflows": underflows,
        "degenerate": dead,
        "ops": int(message_terms),
    }
    frame = LlrFrame(llr, cst.M, counters)
    if return_messages:
        return frame, T, snapshots
    return frame
