"""Simulation configuration: YAML document with nested sections, CLI overrides on top."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import yaml

from ..chanest import NORMALIZATIONS
from ..coding.mapping import Constellation
from ..core import ParameterError

DETECTORS = ("qbcjr", "qbp", "bcjr", "ofdm_mmse", "ofdm_bussgang", "oracle")
CHANNEL_MODELS = ("exp_pdp", "geometric", "snapshot")
I_CODE = 672


@dataclass(frozen=True)
class ChannelConfig:
    model: str = "exp_pdp"
    n_taps: int = 6
    decay: float = 1.0
    file: str | None = None  # cluster file (geometric) or tap snapshot
    max_L: int = 64


@dataclass(frozen=True)
class SimConfig:
    channel: ChannelConfig = field(default_factory=ChannelConfig)
    n_tx: int = 2
    n_rx: int = 4
    modulation: str = "bpsk"
    adc_bits: int = 2
    detectors: tuple[str, ...] = ("qbcjr", "qbp", "bcjr", "ofdm_mmse", "ofdm_bussgang")
    eps_th: float = 0.1
    d_max: int = 8
    n_it: int = 3
    csir: str = "perfect"  # or "ls:<T_p>"
    pilot_norm: str = "sqrt"
    decoder_iters: int = 50
    max_transitions: int = 1 << 16
    ebn0_db: tuple[float, ...] = (0.0, 2.0, 4.0)
    frames: int = 300
    stop_errors: int | None = 100
    seed: int = 0
    report_timing: bool = False

    def __post_init__(self):
        bad = [d for d in self.detectors if d not in DETECTORS]
        if bad:
            raise ParameterError(f"unknown detectors {bad}; choose from {DETECTORS}")
        if self.channel.model not in CHANNEL_MODELS:
            raise ParameterError(f"channel model must be one of {CHANNEL_MODELS}")
        if self.channel.model != "exp_pdp" and not self.channel.file:
            raise ParameterError(f"channel model {self.channel.model!r} needs a file")
        if not 1 <= self.adc_bits <= 16:
            raise ParameterError("adc_bits must be in 1..16")
        if self.n_tx < 1 or self.n_rx < 1:
            raise ParameterError("antenna counts must be >= 1")
        if self.frames < 1:
            raise ParameterError("frames must be >= 1")
        if self.stop_errors is not None and self.stop_errors < 1:
            raise ParameterError("stop_errors must be >= 1")
        if self.n_it < 1 or self.d_max < 1 or self.eps_th < 0:
            raise ParameterError("n_it and d_max must be >= 1, eps_th >= 0")
        if self.pilot_norm not in NORMALIZATIONS:
            raise ParameterError(f"pilot_norm must be one of {NORMALIZATIONS}")
        self.pilot_length  # validates csir
        if I_CODE % self.constellation.M:
            raise ParameterError(f"I_code={I_CODE} not divisible by M={self.constellation.M}")

    @property
    def constellation(self) -> Constellation:
        return Constellation(self.n_tx, self.modulation)

    @property
    def n_d(self) -> int:
        return I_CODE // self.constellation.M

    @property
    def pilot_length(self) -> int | None:
        """``T_p`` for LS estimation, ``None`` for perfect CSIR."""
        if self.csir == "perfect":
            return None
        if self.csir.startswith("ls:"):
            try:
                t = int(self.csir[3:])
            except ValueError:
                pass
            else:
                if t >= 1:
                    return t
        raise ParameterError(f"csir must be 'perfect' or 'ls:<T_p>', got {self.csir!r}")

    # -- I/O -------------------------------------------------------------------

    @classmethod
    def from_dict(cls, doc: dict | None) -> "SimConfig":
        doc = dict(doc or {})
        flat = {}
        ch = doc.pop("channel", None) or {}
        flat["channel"] = ChannelConfig(**ch)
        for section in ("selection", "qbp", "estimation", "decoder", "sweep"):
            flat.update(doc.pop(section, None) or {})
        flat.update(doc)
        known = set(cls.__dataclass_fields__)
        unknown = set(flat) - known
        if unknown:
            raise ParameterError(f"unknown config keys: {sorted(unknown)}")
        if "detectors" in flat:
            flat["detectors"] = tuple(flat["detectors"] or ())
        if "ebn0_db" in flat:
            flat["ebn0_db"] = tuple(float(v) for v in flat["ebn0_db"])
        return cls(**flat)

    @classmethod
    def load(cls, path) -> "SimConfig":
        cfg = cls.from_dict(yaml.safe_load(Path(path).read_text()))
        # relative channel files resolve against the config's directory
        f = cfg.channel.file
        if f and not Path(f).is_absolute():
            cfg = replace(cfg, channel=replace(cfg.channel, file=str(Path(path).parent / f)))
        return cfg

    def to_dict(self) -> dict:
        d = asdict(self)
        d["detectors"] = list(self.detectors)
        d["ebn0_db"] = list(self.ebn0_db)
        return d

    def override(self, **kw) -> "SimConfig":
        """Copy with every non-``None`` keyword applied."""
        return replace(self, **{k: v for k, v in kw.items() if v is not None})
