"""Shared numerics: normal CDF, seeded random streams, log-domain helpers."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import erfc

PROB_FLOOR = 1e-300
LLR_CLAMP = 50.0

_SQRT1_2 = np.sqrt(0.5)


class ParameterError(ValueError):
    """Raised when an argument violates an operation's preconditions."""


class ComplexityBudgetError(RuntimeError):
    """Raised when a detector would exceed its configured complexity budget."""


def stdnormal_cdf(x):
    """Standard normal CDF, evaluated through erfc so both tails keep precision.

    Accepts scalars or arrays; +-inf map to 1 and 0. NaN input raises.
    """
    x = np.asarray(x, dtype=float)
    if np.isnan(x).any():
        raise ParameterError("stdnormal_cdf: NaN input")
    out = 0.5 * erfc(-x * _SQRT1_2)
    return out if out.ndim else float(out)


def stdnormal_sf(x):
    """Upper tail 1 - Phi(x), accurate for large positive x."""
    x = np.asarray(x, dtype=float)
    out = 0.5 * erfc(x * _SQRT1_2)
    return out if out.ndim else float(out)


def normal_interval_prob(lo, hi):
    """P(lo < Z <= hi) for standard normal Z, without cancellation in the tails.

    When both ends sit in the upper tail the difference is taken between upper
    tail probabilities; symmetric for the lower tail.
    """
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    upper = lo > 0
    # erfc(+x/sqrt2)/2 is the upper tail; use it for intervals right of zero,
    # and the mirrored form for everything else.
    p_up = 0.5 * (erfc(lo * _SQRT1_2) - erfc(hi * _SQRT1_2))
    p_lo = 0.5 * (erfc(-hi * _SQRT1_2) - erfc(-lo * _SQRT1_2))
    out = np.where(upper, p_up, p_lo)
    return np.maximum(out, 0.0)


def safe_log(p):
    return np.log(np.maximum(p, PROB_FLOOR))


def logsumexp(a, axis=None):
    a = np.asarray(a, dtype=float)
    m = np.max(a, axis=axis, keepdims=True)
    m = np.where(np.isfinite(m), m, 0.0)
    s = np.log(np.sum(np.exp(a - m), axis=axis, keepdims=True)) + m
    if axis is None:
        return float(s.reshape(()))
    return np.squeeze(s, axis=axis)


@dataclass(frozen=True)
class RngStream:
    """A reproducible random stream identified by ``(seed, stream_id)``.

    Streams with distinct ids are derived through ``numpy.random.SeedSequence``
    spawn keys, so they are independent for practical purposes.
    """

    seed: int
    stream_id: int = 0

    def generator(self, *sub: int) -> np.random.Generator:
        ss = np.random.SeedSequence(self.seed, spawn_key=(self.stream_id, *sub))
        return np.random.Generator(np.random.PCG64(ss))


def draw_cgauss(rng, n, var: float, size=None) -> np.ndarray:
    """Draw circularly-symmetric complex Gaussian samples with E|z|^2 = var.

    ``rng`` may be an :class:`RngStream` or a ``numpy.random.Generator``.
    ``size`` overrides ``n`` when a multi-dimensional shape is needed.
    """
    if var < 0:
        raise ParameterError(f"variance must be nonnegative, got {var}")
    gen = rng.generator() if isinstance(rng, RngStream) else rng
    shape = (n,) if size is None else size
    z = gen.standard_normal(shape) + 1j * gen.standard_normal(shape)
    return z * np.sqrt(var / 2.0)
