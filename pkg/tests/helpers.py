"""Shared builders for tests."""

import itertools

import numpy as np

from qdetect.channel import ChannelTaps, gen_exp_pdp
from qdetect.quantizer import Quantizer


def all_observations(quant: Quantizer, n_rx: int):
    """Every possible quantized vector y (complex, length n_rx)."""
    lv = quant.levels
    for combo in itertools.product(lv, repeat=2 * n_rx):
        c = np.array(combo)
        yield c[:n_rx] + 1j * c[n_rx:]


def channel_from_powers(powers, n_rx=1, n_tx=1, phases=None):
    """Channel whose tap ``l`` has Frobenius power ``powers[l]`` spread evenly."""
    taps = {}
    for l, p in enumerate(powers):
        if p == 0:
            continue
        ph = 1.0 if phases is None else np.exp(1j * phases[l])
        taps[l] = np.full((n_rx, n_tx), np.sqrt(p / (n_rx * n_tx)) * ph)
    return ChannelTaps(n_rx, n_tx, taps)


def random_channel(g, n_taps=3, n_rx=2, n_tx=1, decay=0.5):
    return gen_exp_pdp(n_taps, decay, n_rx, n_tx, g)
