"""Soft-output detectors over the sparse ISI model."""

from .common import LlrFrame, llrs_from_marginals
from .oracle import bruteforce_llrs, bruteforce_marginals
from .qbcjr import bcjr_unquantized_llrs, forward_backward, qbcjr_llrs
from .qbp import qbp_llrs
from .trellis import Trellis, build_trellis

__all__ = [
    "LlrFrame",
    "Trellis",
    "bcjr_unquantized_llrs",
    "bruteforce_llrs",
    "bruteforce_marginals",
    "build_trellis",
    "forward_backward",
    "llrs_from_marginals",
    "qbcjr_llrs",
    "qbp_llrs",
]
