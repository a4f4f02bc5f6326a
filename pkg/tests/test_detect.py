import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from qdetect.channel import ChannelTaps, gen_exp_pdp, propagate
from qdetect.coding.mapping import Constellation
from qdetect.core import ComplexityBudgetError, ParameterError
from qdetect.detect import (
    LlrFrame,
    bcjr_unquantized_llrs,
    bruteforce_llrs,
    bruteforce_marginals,
    build_trellis,
    forward_backward,
    qbcjr_llrs,
    qbp_llrs,
)
from qdetect.detect.common import SlotLikelihood
from qdetect.quantizer import make_uniform, quantize_seq
from qdetect.sparsify import SparseIsiModel, cond_pmf_sparse

BPSK = Constellation(1, "bpsk")


def _instance(seed, n_d=6, n_taps=3, n_rx=2, n_tx=1, bits=1, sigma2=0.5, mod="bpsk"):
    g = np.random.default_rng(seed)
    cst = Constellation(n_tx, mod)
    ch = gen_exp_pdp(n_taps, 0.5, n_rx, n_tx, g)
    q = make_uniform(bits)
    idx = g.integers(0, cst.size, n_d)
    r = propagate(ch, cst.points[idx], None, sigma2, g)
    return ch, q, cst, quantize_seq(q, r), r, idx


def _rel(a, b):
    return np.max(np.abs(a - b) / np.maximum(np.abs(b), 1.0))


# -- trellis -------------------------------------------------------------------


def test_trellis_memoryless():
    t = build_trellis([0], 2, 5)
    assert t.n_states == 1
    assert len(t.transitions(3)) == 2


def test_trellis_bpsk_two_taps():
    t = build_trellis([0, 1], 2, 6)
    assert t.n_states == 2
    assert len(t.transitions(3)) == 4


def test_trellis_two_antennas_sparse():
    t = build_trellis([0, 3], 4, 10)
    assert t.L_D == 4 and t.n_states == 64
    assert len(t.transitions(5)) == 256


def test_trellis_boundaries_and_shift():
    K, n_d = 2, 5
    t = build_trellis([0, 2], K, n_d)
    assert t.state_set(0).tolist() == [0]
    assert t.state_set(n_d + t.L_D - 1).tolist() == [0]
    for n in range(1, n_d + t.L_D):
        for sp, s, k in t.transitions(n):
            # new state: newest symbol k, then the older digits of s'
            digits_sp = [(sp // K**j) % K for j in range(t.L_D - 2, -1, -1)]
            digits_s = [(s // K**j) % K for j in range(t.L_D - 2, -1, -1)]
            assert digits_s == [k] + digits_sp[:-1]
            assert sp in t.state_set(n - 1) and s in t.state_set(n)
        if t.L_D <= n <= n_d:
            assert len(t.transitions(n)) == K**t.L_D


def test_trellis_budget():
    with pytest.raises(ComplexityBudgetError):
        build_trellis([0, 9], 4, 10, max_transitions=1000)
    with pytest.raises(ParameterError):
        build_trellis([], 2, 5)


# -- Q-BCJR --------------------------------------------------------------------


@pytest.mark.parametrize("seed", range(5))
def test_qbcjr_matches_oracle_small(seed):
    ch, q, cst, Y, _, _ = _instance(seed, n_d=4, n_taps=2, bits=1)
    m = SparseIsiModel.from_channel(ch, [0, 1], 0.5)
    a = qbcjr_llrs(Y, m, q, cst, 4).llrs
    b = bruteforce_llrs(Y, ch, q, 0.5, cst, 4).llrs
    assert _rel(a, b) <= 1e-8


def test_qbcjr_qpsk_two_antennas_matches_oracle():
    ch, q, cst, Y, _, _ = _instance(11, n_d=3, n_taps=2, n_rx=2, n_tx=2, bits=2, mod="qpsk")
    m = SparseIsiModel.from_channel(ch, ch.support, 0.5)
    assert _rel(qbcjr_llrs(Y, m, q, cst, 3).llrs, bruteforce_llrs(Y, ch, q, 0.5, cst, 3).llrs) <= 1e-8


def test_qbcjr_sign_symmetry():
    ch, q, cst, Y, _, _ = _instance(3, bits=2)
    m = SparseIsiModel.from_channel(ch, [0, 2], 0.5)
    a = qbcjr_llrs(Y, m, q, cst, 6).llrs
    b = qbcjr_llrs(-Y, m, q, cst, 6).llrs
    assert np.allclose(a, -b, atol=1e-12)


def test_qbcjr_marginal_sums_constant():
    ch, q, cst, Y, _, _ = _instance(4, bits=2)
    m = SparseIsiModel.from_channel(ch, ch.support, 0.5)
    lik = SlotLikelihood(Y, m, q, cst, 6)
    marg, _ = forward_backward(lik, build_trellis(m.D, 2, 6), cst, 6, normalize=False)
    tot = marg.sum(axis=1)
    assert np.max(np.abs(tot / tot[0] - 1)) < 1e-12


def test_qbcjr_normalization_invariant():
    for seed in range(4):
        ch, q, cst, Y, _, _ = _instance(seed, bits=2)
        m = SparseIsiModel.from_channel(ch, [0, 1], 0.5)
        a = qbcjr_llrs(Y, m, q, cst, 6, normalize=True).llrs
        b = qbcjr_llrs(Y, m, q, cst, 6, normalize=False).llrs
        assert np.max(np.abs(a - b)) < 1e-10


def test_qbcjr_ignores_extra_slots():
    ch, q, cst, Y, _, _ = _instance(5, bits=2)
    m = SparseIsiModel.from_channel(ch, [0, 1], 0.5)  # L_D = 2 < L = 3
    a = qbcjr_llrs(Y, m, q, cst, 6).llrs
    b = qbcjr_llrs(Y[: 6 + 1], m, q, cst, 6).llrs
    assert np.array_equal(a, b)
    with pytest.raises(ParameterError):
        qbcjr_llrs(Y[:5], m, q, cst, 6)


def test_qbcjr_llrs_clamped():
    ch = ChannelTaps(1, 1, {0: [[1.0]]})
    q = make_uniform(2)
    Y = quantize_seq(q, np.array([[1.0], [-1.0]], complex))
    m = SparseIsiModel.from_channel(ch, [0], 1e-4)
    llr = qbcjr_llrs(Y, m, q, BPSK, 2).llrs
    assert np.all(np.abs(llr) <= 50) and np.all(np.isfinite(llr))


# -- oracle --------------------------------------------------------------------


def test_oracle_single_slot_ratio():
    ch = ChannelTaps(1, 1, {0: [[0.8 + 0.1j]]})
    q = make_uniform(2)
    s2 = 0.4
    Y = quantize_seq(q, np.array([[0.5 - 0.2j]]))
    m = SparseIsiModel.from_channel(ch, [0], s2)
    w = m.window(1, 1)
    ratio = np.log(cond_pmf_sparse(Y[0], [1.0], m, w, q) / cond_pmf_sparse(Y[0], [-1.0], m, w, q))
    assert abs(bruteforce_llrs(Y, ch, q, s2, BPSK, 1).llrs[0] - ratio) < 1e-12


def test_oracle_marginal_identity():
    ch, q, cst, Y, _, _ = _instance(8, n_d=5, bits=2)
    logm = bruteforce_marginals(Y, ch, q, 0.5, cst, 5)
    llr = bruteforce_llrs(Y, ch, q, 0.5, cst, 5).llrs
    num, den = np.exp(logm[:, 0]), np.exp(logm[:, 1])
    assert np.allclose(np.exp(llr) * den, num, rtol=1e-12, atol=0)


def test_oracle_budget():
    ch, q, cst, Y, _, _ = _instance(1, n_d=6)
    with pytest.raises(ParameterError):
        bruteforce_llrs(np.zeros((30, 2)), ch, q, 0.5, cst, 25)


def test_llr_assembly_matches_definition():
    # two-antenna BPSK: M = 2 bits per slot, assembled via the K_m(u) partition
    ch, q, cst, Y, _, _ = _instance(9, n_d=3, n_taps=2, n_tx=2, bits=2)
    logm = bruteforce_marginals(Y, ch, q, 0.5, cst, 3)
    frame = bruteforce_llrs(Y, ch, q, 0.5, cst, 3)
    for i in range(1, len(frame) + 1):
        n, m = frame.slot_of(i), frame.position_of(i)
        assert n == -(-i // 2) and m == i - 2 * (n - 1)
        num = np.logaddexp.reduce(logm[n - 1, cst.K(m, 0)])
        den = np.logaddexp.reduce(logm[n - 1, cst.K(m, 1)])
        assert abs(frame.llrs[i - 1] - (num - den)) < 1e-12


def test_llr_frame_maps():
    f = LlrFrame(np.zeros(12), 3)
    assert f.n_d == 4
    assert [f.slot_of(i) for i in (1, 3, 4, 12)] == [1, 1, 2, 4]
    assert [f.position_of(i) for i in (1, 3, 4, 12)] == [1, 3, 1, 3]


# -- Q-BP ----------------------------------------------------------------------


def test_qbp_memoryless_exact():
    ch, q, cst, Y, _, _ = _instance(2, n_taps=1, bits=2)
    m = SparseIsiModel.from_channel(ch, [0], 0.5)
    llr = qbp_llrs(Y, m, q, cst, 6, n_it=1).llrs
    for n in range(1, 7):
        w = m.window(n, 6)
        p0 = cond_pmf_sparse(Y[n - 1], [1.0], m, w, q)
        p1 = cond_pmf_sparse(Y[n - 1], [-1.0], m, w, q)
        assert abs(llr[n - 1] - np.log(p0 / p1)) < 1e-10


@pytest.mark.parametrize("seed", range(4))
def test_qbp_tree_matches_qbcjr(seed):
    ch, q, cst, Y, _, _ = _instance(seed, n_d=2, n_taps=2, bits=2)
    m = SparseIsiModel.from_channel(ch, [0, 1], 0.5)
    a = qbp_llrs(Y, m, q, cst, 2, n_it=3).llrs
    b = qbcjr_llrs(Y, m, q, cst, 2).llrs
    assert np.max(np.abs(a - b)) < 1e-8


@given(st.integers(0, 5000), st.integers(1, 4))
def test_qbp_messages_normalized(seed, n_it):
    ch, q, cst, Y, _, _ = _instance(seed, n_d=5, n_taps=3, bits=2)
    m = SparseIsiModel.from_channel(ch, [0, 2], 0.5)
    _, T, snaps = qbp_llrs(Y, m, q, cst, 5, n_it=n_it, return_messages=True)
    assert len(snaps) == n_it
    for t in snaps:
        assert np.all(t >= 0) and np.allclose(t.sum(axis=2), 1.0, atol=1e-12)


def test_qbp_errors():
    ch, q, cst, Y, _, _ = _instance(1)
    m = SparseIsiModel.from_channel(ch, [0], 0.5)
    with pytest.raises(ParameterError):
        qbp_llrs(Y, m, q, cst, 6, n_it=0)


# -- unquantized BCJR ----------------------------------------------------------


def test_bcjr_matched_filter():
    g = np.random.default_rng(1)
    ch = ChannelTaps(1, 1, {0: [[1.0]]})
    s2 = 0.7
    r = propagate(ch, BPSK.points[g.integers(0, 2, 8)], None, s2, g)
    llr = bcjr_unquantized_llrs(r, ch, s2, BPSK, 8).llrs
    ref = np.clip(4 * r[:, 0].real / s2, -50, 50)
    assert np.allclose(llr, ref, atol=1e-10)


def test_bcjr_fine_quantization_limit():
    # the 8-bit grid spans about +-1.5, so instances that clip are skipped
    s2 = 0.5
    for seed in range(5):
        g = np.random.default_rng(100 + seed)
        ch = gen_exp_pdp(2, 0.5, 2, 1, g).scaled(np.array([[0.3]]))
        q = make_uniform(8)
        r = propagate(ch, BPSK.points[g.integers(0, 2, 5)], None, s2, g)
        if np.max(np.abs(np.r_[r.real.ravel(), r.imag.ravel()])) > 1.4:
            continue
        m = SparseIsiModel.from_channel(ch, ch.support, s2)
        a = qbcjr_llrs(quantize_seq(q, r), m, q, BPSK, 5).llrs
        b = bcjr_unquantized_llrs(r, ch, s2, BPSK, 5).llrs
        assert np.max(np.abs(a - b)) < 0.05


def test_bcjr_equal_taps_symmetric():
    ch = ChannelTaps(1, 1, {0: [[1.0]], 1: [[1.0]]})
    r = np.array([[0.3], [0.9], [0.3]], complex)  # mirror-symmetric: swapping x1, x2 leaves it unchanged
    frame = bcjr_unquantized_llrs(r, ch, 0.5, BPSK, 2)
    assert abs(frame.llrs[0] - frame.llrs[1]) < 1e-12
