"""Acceptance gate: one test per criterion, each reporting a pass/fail line.

The ``report`` fixture records the criterion number and a short detail string;
``conftest.pytest_terminal_summary`` prints them at the end of the run.
"""

import math
import time

import numpy as np
import pytest
from scipy.stats import binomtest

from qdetect.chanest import estimation_nmse, gen_pilots, ls_estimate, transmit_pilots
from qdetect.channel import gen_exp_pdp, propagate
from qdetect.coding.mapping import Constellation
from qdetect.detect import bcjr_unquantized_llrs, bruteforce_llrs, qbcjr_llrs, qbp_llrs
from qdetect.harness.cli import main, oracle_check
from qdetect.harness.config import SimConfig
from qdetect.harness.sim import run_fer
from qdetect.quantizer import make_uniform, quantize_seq
from qdetect.sparsify import SparseIsiModel, cond_pmf_sparse, cond_pmf_true, nmse, select_dominant_taps

from .helpers import all_observations, channel_from_powers


@pytest.fixture
def report(record_property):
    def _report(criterion: int, ok: bool, detail: str):
        record_property("criterion", criterion)
        record_property("detail", detail)
        print(f"criterion {criterion}: {'PASS' if ok else 'FAIL'}  {detail}")
        return ok

    return _report


# 1 ---------------------------------------------------------------------------


def test_1_oracle_equivalence(report):
    t0 = time.perf_counter()
    worst = oracle_check(n_instances=200, seed=0, bits=(1, 2))
    dt = time.perf_counter() - t0
    ok = worst <= 1e-8 and dt < 60
    assert report(1, ok, f"max rel LLR deviation {worst:.2e} over 200 instances in {dt:.1f}s")


# 2 ---------------------------------------------------------------------------


def test_2_pmf_normalization(report):
    worst = 0.0
    for i in range(100):
        g = np.random.default_rng(1000 + i)
        n_rx = int(g.integers(1, 3))
        n_tx = int(g.integers(1, 3))
        bits = int(g.integers(1, 3))
        n_taps = int(g.integers(2, 5))
        q = make_uniform(bits)
        ch = gen_exp_pdp(n_taps, float(g.uniform(0.2, 2.0)), n_rx, n_tx, g)
        k = int(g.integers(1, n_taps))
        D = sorted(g.choice(n_taps, k, replace=False).tolist())
        s2 = float(g.uniform(0.05, 2.0))
        m = SparseIsiModel.from_channel(ch, D, s2)
        n_d = 8
        n = int(g.integers(1, n_d + n_taps))
        w = m.window(n, n_d)
        pts = np.array([1, -1, 1j, -1j]) if g.integers(2) else np.array([1.0, -1.0])
        x_D = g.choice(pts, len(w.D_n) * n_tx)
        x_W = g.choice(pts, len(m.W) * n_tx)
        s_sparse = sum(cond_pmf_sparse(y, x_D, m, w, q) for y in all_observations(q, n_rx))
        x_full = g.choice(pts, len(D) * n_tx)
        s_true = sum(cond_pmf_true(y, x_full, x_W, m.H_D, m.H_W, s2, q) for y in all_observations(q, n_rx))
        worst = max(worst, abs(s_sparse - 1), abs(s_true - 1))
    assert report(2, worst <= 1e-12, f"max |sum - 1| = {worst:.1e} over 100 models")


# 3 ---------------------------------------------------------------------------


def _nmse_monte_carlo(ch, D, s2, q, n_samples, g):
    """Sample the defining expectation with x_D, x_W ~ CN(0, I)."""
    W = [d for d in ch.support if d not in D]
    hD = np.concatenate([ch.taps[d] for d in D], axis=1)  # (n_rx, |D| n_tx)
    hW = np.concatenate([ch.taps[d] for d in W], axis=1) if W else np.zeros((ch.n_rx, 0))
    cn = lambda n: (g.standard_normal((n_samples, n)) + 1j * g.standard_normal((n_samples, n))) / np.sqrt(2)  # noqa: E731
    a = cn(hD.shape[1]) @ hD.T  # (samples, n_rx)
    w = cn(hW.shape[1]) @ hW.T if W else np.zeros_like(a)
    pw = np.sum(np.abs(hW) ** 2, axis=1)
    s_true = np.sqrt(s2 / 2)
    s_hat = np.sqrt((s2 + pw) / 2)
    total = 0.0
    for part in (np.real, np.imag):
        ad, aw = part(a), part(w)
        for b in q.finite_boundaries:
            phi = (b - ad - aw) / s_true
            phi_hat = (b - ad) / s_hat[None, :]
            total += 0.5 * np.sum(np.mean((phi - phi_hat) ** 2, axis=0) / np.mean(phi_hat**2, axis=0))
    return total


def test_3_nmse_closed_form(report):
    t0 = time.perf_counter()
    worst = 0.0
    for i in range(50):
        g = np.random.default_rng(2000 + i)
        n_taps = int(g.integers(2, 6))
        ch = gen_exp_pdp(n_taps, float(g.uniform(0.2, 2.0)), int(g.integers(1, 4)), int(g.integers(1, 3)), g)
        q = make_uniform(int(g.integers(1, 4)))
        D = sorted(g.choice(n_taps, int(g.integers(1, n_taps)), replace=False).tolist())
        s2 = float(g.uniform(0.05, 2.0))
        closed = nmse(D, ch, s2, q)
        mc = _nmse_monte_carlo(ch, D, s2, q, 10**6, g)
        worst = max(worst, abs(mc - closed) / closed)
    dt = time.perf_counter() - t0
    ok = worst <= 0.02 and dt < 120
    assert report(3, ok, f"max relative deviation {worst:.2%} over 50 instances in {dt:.1f}s")


# 4 ---------------------------------------------------------------------------


def test_4_bp_tree_exact(report):
    worst = 0.0
    for i in range(20):
        g = np.random.default_rng(3000 + i)
        n_tx = 1 + i % 2
        cst = Constellation(n_tx, "bpsk" if i % 4 < 2 else "qpsk")
        q = make_uniform(1 + (i // 2) % 2)
        s2 = float(g.uniform(0.1, 1.0))
        for n_taps, n_d in ((1, 6 if cst.size <= 4 else 3), (2, 2)):
            ch = gen_exp_pdp(n_taps, 0.5, 2, n_tx, g)
            idx = g.integers(0, cst.size, n_d)
            Y = quantize_seq(q, propagate(ch, cst.points[idx], None, s2, g))
            m = SparseIsiModel.from_channel(ch, ch.support, s2)
            a = qbp_llrs(Y, m, q, cst, n_d, n_it=3).llrs
            b = bruteforce_llrs(Y, ch, q, s2, cst, n_d).llrs
            worst = max(worst, float(np.max(np.abs(a - b))))
    assert report(4, worst <= 1e-8, f"max |LLR - exact| = {worst:.1e} on tree-shaped graphs")


# 5 ---------------------------------------------------------------------------


def _in_frame(i, n_d):
    return 1 <= i <= n_d


def _qbcjr_expected(D, K, n_d):
    L_D = max(D) + 1
    n_end = n_d + L_D - 1
    br = {n: math.prod(K if _in_frame(n - j, n_d) else 1 for j in range(L_D)) for n in range(1, n_end + 1)}
    pmf = sum(K ** sum(_in_frame(n - d, n_d) for d in D) for n in range(1, n_end + 1))
    return {
        "forward_terms": sum(br[n] for n in range(1, n_d)),
        "backward_terms": sum(br[n] for n in range(2, n_end + 1)),
        "marginal_terms": sum(br[n] for n in range(1, n_d + 1)),
        "pmf_evals": pmf,
    }


def _qbp_expected(D, K, n_d, n_it):
    n_end = n_d + max(D)
    per_it = 0
    for n in range(1, n_end + 1):
        j = sum(_in_frame(n - d, n_d) for d in D)
        per_it += j * K**j
    return n_it * per_it


def test_5_complexity_counters(report):
    n_d = 9
    bad = []
    cases = 0
    g = np.random.default_rng(5)
    for cst in (Constellation(1, "bpsk"), Constellation(2, "bpsk")):
        K = cst.size
        q = make_uniform(2)
        for D in ([0, 1], [0, 2], [1, 2], [0, 3], [0, 1, 3], [0, 1, 2, 3], [0], [2], [0, 2], [0, 1, 2]):
            ch = gen_exp_pdp(max(D) + 2, 0.5, 2, cst.n_tx, g)
            Y = quantize_seq(q, propagate(ch, cst.points[g.integers(0, K, n_d)], None, 0.3, g))
            m = SparseIsiModel.from_channel(ch, D, 0.3)
            c = qbcjr_llrs(Y, m, q, cst, n_d).counters
            exp = _qbcjr_expected(D, K, n_d)
            if any(c[k] != v for k, v in exp.items()):
                bad.append(("qbcjr", D, K))
            for n_it in (1, 3):
                cp = qbp_llrs(Y, m, q, cst, n_d, n_it).counters
                if cp["message_terms"] != _qbp_expected(D, K, n_d, n_it):
                    bad.append(("qbp", D, K, n_it))
            cases += 1
    assert report(5, not bad, f"{cases} (D, |X|) cases, mismatches: {bad or 'none'}")


# 6 ---------------------------------------------------------------------------


def _ci(errors, frames):
    return binomtest(errors, frames).proportion_ci(0.95)


def test_6_fer_ordering(report):
    cfg = SimConfig(
        n_tx=2, n_rx=4, modulation="bpsk", adc_bits=2, csir="perfect",
        detectors=("qbcjr", "qbp", "bcjr", "ofdm_mmse", "ofdm_bussgang"),
        ebn0_db=(0.0, 2.0, 4.0), frames=300, stop_errors=None, seed=0,
    )
    res = run_fer(cfg)
    f = {d: res.get(d, 2.0).fer for d in cfg.detectors}
    checks = [
        f["qbcjr"] <= f["qbp"] + 0.05,
        f["qbp"] < f["ofdm_bussgang"] < f["ofdm_mmse"],
        abs(f["qbcjr"] - f["bcjr"]) <= 0.1,
    ]
    for e in cfg.ebn0_db:
        detail = " ".join(f"{d}={res.get(d, e).errors}/{res.get(d, e).frames}" for d in cfg.detectors)
        print(f"  {e:+.0f} dB: {detail}")
    fer = ", ".join(f"{d}={v:.3f}" for d, v in f.items())
    assert report(6, all(checks), f"FER at 2 dB: {fer}")


# 7 ---------------------------------------------------------------------------


def test_7_fine_quantization(report):
    cst = Constellation(1, "bpsk")
    q = make_uniform(8)
    s2, worst, used, seed = 0.5, 0.0, 0, 0
    while used < 50:
        g = np.random.default_rng(7000 + seed)
        seed += 1
        # gain 0.3 keeps the samples inside the fixed ADC range
        ch = gen_exp_pdp(2, 0.5, 2, 1, g).scaled(np.array([[0.3]]))
        r = propagate(ch, cst.points[g.integers(0, 2, 6)], None, s2, g)
        if np.max(np.abs(np.r_[r.real.ravel(), r.imag.ravel()])) > 1.4:
            continue
        used += 1
        m = SparseIsiModel.from_channel(ch, ch.support, s2)
        a = qbcjr_llrs(quantize_seq(q, r), m, q, cst, 6).llrs
        b = bcjr_unquantized_llrs(r, ch, s2, cst, 6).llrs
        worst = max(worst, float(np.max(np.abs(a - b))))

    cfg = SimConfig(adc_bits=8, detectors=("ofdm_mmse", "ofdm_bussgang"), ebn0_db=(-6.0,), frames=300, stop_errors=None)
    res = run_fer(cfg)
    mm, bg = res.get("ofdm_mmse", -6.0), res.get("ofdm_bussgang", -6.0)
    ci_m, ci_b = _ci(mm.errors, mm.frames), _ci(bg.errors, bg.frames)
    overlap = ci_m.low <= ci_b.high and ci_b.low <= ci_m.high
    ok = worst <= 0.05 and overlap
    detail = (
        f"max |dLLR| {worst:.4f} on 50 instances; FER at -6 dB mmse={mm.fer:.3f} "
        f"[{ci_m.low:.3f},{ci_m.high:.3f}] bussgang={bg.fer:.3f} [{ci_b.low:.3f},{ci_b.high:.3f}]"
    )
    assert report(7, ok, detail)


# 8 ---------------------------------------------------------------------------


def _crossing(ebn0, fer, target=0.1):
    """Eb/N0 where the FER curve first falls to ``target`` (log-FER interpolation)."""
    for i, (e, f) in enumerate(zip(ebn0, fer)):
        if f <= target:
            if i == 0:
                return e
            e0, f0 = ebn0[i - 1], fer[i - 1]
            if f <= 0:
                return e0 + (e - e0) * (f0 - target) / (f0 - f)
            return e0 + (e - e0) * (math.log(f0) - math.log(target)) / (math.log(f0) - math.log(f))
    return math.inf


def test_8_ls_estimation(report):
    worst = 0.0
    for i in range(20):
        g = np.random.default_rng(8000 + i)
        ch = gen_exp_pdp(6, 1.0, 4, 2, g)
        pb = gen_pilots(12, 2, 6, g)
        est = ls_estimate(transmit_pilots(ch, pb, 0.0, None), pb)
        worst = max(worst, math.sqrt(estimation_nmse(est, ch, 6)))

    grid = tuple(float(e) for e in range(-8, 11, 2))
    base = dict(adc_bits=2, detectors=("qbp",), ebn0_db=grid, frames=100, stop_errors=50)
    perfect = run_fer(SimConfig(**base, csir="perfect"))
    ls = run_fer(SimConfig(**base, csir="ls:12"))
    fp = [perfect.get("qbp", e).fer for e in grid]
    fl = [ls.get("qbp", e).fer for e in grid]
    gap = _crossing(grid, fl) - _crossing(grid, fp)
    print("  perfect:", " ".join(f"{e:+.0f}:{v:.2f}" for e, v in zip(grid, fp)))
    print("  ls:12  :", " ".join(f"{e:+.0f}:{v:.2f}" for e, v in zip(grid, fl)))
    ok = worst <= 1e-6 and gap < 1.5
    assert report(8, ok, f"noiseless rel error {worst:.1e}; Q-BP gap at FER 0.1 (T_p=2L) = {gap:.2f} dB")


# 9 ---------------------------------------------------------------------------


def test_9_tap_selection(report):
    ch = channel_from_powers([1.0, 0.5, 1e-4, 1e-4])
    results = []
    for bits in (1, 2, 3):
        q = make_uniform(bits)
        results.append(select_dominant_taps(ch, 0.1, q, eps_th=0.1, D_max=2).D == (0, 1))
        results.append(select_dominant_taps(ch, 0.1, q, eps_th=math.inf, D_max=2).D == ())
        for d_max in (4, 6):
            results.append(select_dominant_taps(ch, 0.1, q, eps_th=0.0, D_max=d_max).D == (0, 1, 2, 3))
    assert report(9, all(results), f"{sum(results)}/{len(results)} selection checks")


# 10 --------------------------------------------------------------------------


def test_10_determinism(report, tmp_path):
    cfg = tmp_path / "c.yaml"
    cfg.write_text(
        "n_tx: 1\nn_rx: 2\nchannel: {n_taps: 3}\n"
        "detectors: [qbcjr, qbp, bcjr, ofdm_mmse, ofdm_bussgang, oracle]\n"
        "estimation: {csir: 'ls:8'}\n"
        "sweep: {ebn0_db: [-2, 2], frames: 4}\n"
    )
    outs = []
    for k in range(2):
        out = tmp_path / f"run{k}.csv"
        main(["sweep", "--config", str(cfg), "--seed", "3", "--out", str(out)])
        outs.append(out.read_bytes())
    same = outs[0] == outs[1] and len(outs[0].splitlines()) == 13
    assert report(10, same, f"two sweeps, {len(outs[0])} bytes each, identical={outs[0] == outs[1]}")
