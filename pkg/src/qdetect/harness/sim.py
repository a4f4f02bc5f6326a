"""Monte-Carlo FER simulation over an Eb/N0 grid."""

from __future__ import annotations

import csv
import logging
import math
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from ..chanest import gen_pilots, ls_estimate, transmit_pilots
from ..channel import ChannelTaps, ClusterSpec, gen_exp_pdp, gen_geometric, propagate
from ..coding.ldpc import LdpcCode, ieee80211ad_r12
from ..coding.mapping import map_indices
from ..core import ComplexityBudgetError, RngStream
from ..detect import bcjr_unquantized_llrs, bruteforce_llrs, qbcjr_llrs, qbp_llrs
from ..detect.oracle import MAX_SEQUENCES
from ..detect.trellis import build_trellis
from ..ofdm import ofdm_bussgang_llrs, ofdm_mmse_llrs, ofdm_transmit
from ..quantizer import make_uniform, quantize_seq
from ..sparsify import SparseIsiModel, select_dominant_taps
from .config import SimConfig

log = logging.getLogger(__name__)

CSV_HEADER = ("detector", "ebn0_db", "frames", "errors", "fer", "mean_ops", "seconds")

# sub-stream ids inside one frame's RngStream
_S_CHANNEL, _S_INFO, _S_PILOT, _S_NOISE, _S_OFDM = range(5)


def eb_n0_to_sigma2(eb_n0_db: float, n_tx: int, M: int) -> float:
    """Noise variance for unit-power antennas: ``N_tx / (M 10^(Eb/N0 / 10))``."""
    if M < 1:
        raise ValueError("M must be >= 1")
    return n_tx / (M * 10.0 ** (eb_n0_db / 10.0))


@dataclass
class FerRow:
    detector: str
    ebn0_db: float
    frames: int = 0
    errors: int = 0
    ops: int = 0
    seconds: float = 0.0
    skipped: str | None = None

    @property
    def fer(self) -> float:
        return self.errors / self.frames if self.frames else math.nan

    @property
    def mean_ops(self) -> float:
        return self.ops / self.frames if self.frames else math.nan

    def merge(self, other: "FerRow") -> "FerRow":
        return FerRow(
            self.detector, self.ebn0_db, self.frames + other.frames, self.errors + other.errors,
            self.ops + other.ops, self.seconds + other.seconds, self.skipped or other.skipped,
        )


@dataclass
class FerResult:
    rows: list[FerRow] = field(default_factory=list)

    def get(self, detector: str, ebn0_db: float) -> FerRow:
        for r in self.rows:
            if r.detector == detector and r.ebn0_db == ebn0_db:
                return r
        raise KeyError((detector, ebn0_db))

    def table(self) -> list[tuple]:
        return [(r.detector, r.ebn0_db, r.frames, r.errors, r.fer, r.mean_ops, r.seconds) for r in self.rows]


# -- per-frame pipeline ---------------------------------------------------------


def draw_channel(cfg: SimConfig, gen) -> ChannelTaps:
    c = cfg.channel
    if c.model == "exp_pdp":
        return gen_exp_pdp(c.n_taps, c.decay, cfg.n_rx, cfg.n_tx, gen)
    if c.model == "snapshot":
        return ChannelTaps.load(c.file)
    spec = ClusterSpec.from_dict(yaml.safe_load(Path(c.file).read_text()))
    return gen_geometric(spec, c.max_L)


@dataclass
class FrameInputs:
    """Everything the detectors of one frame share."""

    channel: ChannelTaps  # true channel
    ch_rx: ChannelTaps  # receiver's channel knowledge
    model: SparseIsiModel | None
    info: np.ndarray
    symbols: np.ndarray  # (N_d, n_tx)
    r: np.ndarray  # unquantized single-carrier samples
    Y: np.ndarray
    y_ofdm: np.ndarray  # quantized OFDM samples
    sigma2: float


def prepare_frame(cfg: SimConfig, frame: int, snr_idx: int, sigma2: float, code: LdpcCode, fixed=None) -> FrameInputs:
    stream = RngStream(cfg.seed, frame)
    cst = cfg.constellation
    quant = make_uniform(cfg.adc_bits)
    ch = fixed if fixed is not None else draw_channel(cfg, stream.generator(_S_CHANNEL))

    T_p = cfg.pilot_length
    if T_p is None:
        ch_rx = ch
    else:
        g = stream.generator(_S_PILOT, snr_idx)
        pilots = gen_pilots(T_p, cfg.n_tx, ch.length, g, cfg.pilot_norm)
        ch_rx = ls_estimate(transmit_pilots(ch, pilots, sigma2, g, quant), pilots)

    info = stream.generator(_S_INFO).integers(0, 2, code.k)
    coded = code.encode(info)
    idx = map_indices(coded, cst)
    x = cst.points[idx]
    r = propagate(ch, x, None, sigma2, stream.generator(_S_NOISE, snr_idx))
    y_ofdm = None
    if any(d.startswith("ofdm") for d in cfg.detectors):
        y_ofdm, _ = ofdm_transmit(ch, x, sigma2, stream.generator(_S_OFDM, snr_idx), quant)

    model = None
    if any(d in ("qbcjr", "qbp") for d in cfg.detectors):
        sel = select_dominant_taps(ch_rx, sigma2, quant, cfg.eps_th, cfg.d_max)
        model = SparseIsiModel.from_channel(ch_rx, sel.D, sigma2)
    return FrameInputs(ch, ch_rx, model, info, x, r, quantize_seq(quant, r), y_ofdm, sigma2)


def detect(name: str, fi: FrameInputs, cfg: SimConfig):
    cst = cfg.constellation
    quant = make_uniform(cfg.adc_bits)
    n_d = cfg.n_d
    if name == "qbcjr":
        trellis = build_trellis(fi.model.D, cst.size, n_d, cfg.max_transitions)
        return qbcjr_llrs(fi.Y, fi.model, quant, cst, n_d, trellis=trellis)
    if name == "qbp":
        return qbp_llrs(fi.Y, fi.model, quant, cst, n_d, cfg.n_it)
    if name == "bcjr":
        return bcjr_unquantized_llrs(fi.r, fi.ch_rx, fi.sigma2, cst, n_d, max_transitions=cfg.max_transitions)
    if name == "ofdm_mmse":
        return ofdm_mmse_llrs(fi.y_ofdm, fi.ch_rx, fi.sigma2, cst, n_d)
    if name == "ofdm_bussgang":
        return ofdm_bussgang_llrs(fi.y_ofdm, fi.ch_rx, fi.sigma2, quant, cst, n_d)
    if name == "oracle":
        if cst.size**n_d > MAX_SEQUENCES:
            raise ComplexityBudgetError(f"oracle needs {cst.size}^{n_d} sequences")
        return bruteforce_llrs(fi.Y, fi.ch_rx, quant, fi.sigma2, cst, n_d)
    raise ValueError(f"unknown detector {name!r}")


def run_point(cfg: SimConfig, snr_idx: int, code: LdpcCode | None = None, fixed=None) -> list[FerRow]:
    """All requested detectors at one Eb/N0 point, sharing every frame."""
    code = code or ieee80211ad_r12()
    ebn0 = cfg.ebn0_db[snr_idx]
    sigma2 = eb_n0_to_sigma2(ebn0, cfg.n_tx, cfg.constellation.M)
    rows = {d: FerRow(d, ebn0) for d in cfg.detectors}
    for frame in range(cfg.frames):
        active = [
            d for d, row in rows.items()
            if row.skipped is None and (cfg.stop_errors is None or row.errors < cfg.stop_errors)
        ]
        if not active:
            break
        fi = prepare_frame(cfg, frame, snr_idx, sigma2, code, fixed)
        for d in active:
            row = rows[d]
            t0 = time.perf_counter()
            try:
                llr = detect(d, fi, cfg)
            except ComplexityBudgetError as exc:
                row.skipped = str(exc)
                log.warning("skipping %s at %.2f dB: %s", d, ebn0, exc)
                continue
            bits, _, _ = code.decode(llr.llrs, cfg.decoder_iters)
            row.frames += 1
            row.errors += int(np.any(bits != fi.info))
            row.ops += llr.ops
            if cfg.report_timing:
                row.seconds += time.perf_counter() - t0
    return list(rows.values())


def run_fer(cfg: SimConfig, code: LdpcCode | None = None) -> FerResult:
    code = code or ieee80211ad_r12()
    fixed = ChannelTaps.load(cfg.channel.file) if cfg.channel.model == "snapshot" else None
    if cfg.channel.model == "geometric":
        fixed = draw_channel(cfg, None)
    rows = []
    for j, ebn0 in enumerate(cfg.ebn0_db):
        pt = run_point(cfg, j, code, fixed)
        for r in pt:
            log.info("%s %.2f dB: %d/%d frame errors", r.detector, ebn0, r.errors, r.frames)
        rows.extend(pt)
    return FerResult(rows)


# -- CSV ------------------------------------------------------------------------


def _fmt(v) -> str:
    return repr(float(v)) if isinstance(v, float) else str(v)


def write_csv(result: FerResult, out) -> None:
    """Write the table to a path or an open text stream."""
    if hasattr(out, "write"):
        _write_rows(result, out)
        return
    with open(out, "w", newline="") as fh:
        _write_rows(result, fh)


def _write_rows(result: FerResult, fh) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for row in result.table():
        w.writerow([_fmt(v) for v in row])


def read_csv(path) -> FerResult:
    rows = []
    with open(path, newline="") as fh:
        rd = csv.DictReader(fh)
        if tuple(rd.fieldnames or ()) != CSV_HEADER:
            raise ValueError(f"unexpected CSV header {rd.fieldnames}")
        for rec in rd:
            frames = int(rec["frames"])
            mean_ops = float(rec["mean_ops"])
            rows.append(FerRow(
                rec["detector"], float(rec["ebn0_db"]), frames, int(rec["errors"]),
                int(round(mean_ops * frames)) if frames else 0, float(rec["seconds"]),
            ))
    return FerResult(rows)


def sweep_csv(cfg: SimConfig, out_path) -> FerResult:
    result = run_fer(cfg)
    write_csv(result, out_path)
    return result
