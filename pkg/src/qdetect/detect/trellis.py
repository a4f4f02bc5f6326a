"""Reduced trellis over the dominant-tap memory.

The state at slot ``n`` holds ``x[n], ..., x[n-L_D+2]`` as base-|X| digits with
the newest symbol most significant, so a transition on symbol ``k`` from
state ``s'`` lands in ``(k * Ns + s') // |X|`` with ``Ns = |X|**(L_D-1)``.
Digit value 0 doubles as the zero vector for slots outside 1..N_d; such
states are simply unreachable with any other digit.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from ..core import ComplexityBudgetError, ParameterError
from .common import hypothesis_digits

DEFAULT_MAX_TRANSITIONS = 1 << 16


@dataclass(frozen=True)
class Trellis:
    L_D: int
    K: int  # |X|
    n_d: int

    @property
    def n_states(self) -> int:
        return self.K ** (self.L_D - 1)

    @property
    def n_branches(self) -> int:
        return self.K**self.L_D

    @cached_property
    def digits(self) -> np.ndarray:
        """``(K**L_D, L_D)``: digit ``j`` of branch ``c = k*Ns + s'`` is the symbol x[n-j]."""
        return hypothesis_digits(self.L_D, self.K)

    def next_state(self, k, s_prev):
        return (np.asarray(k) * self.n_states + np.asarray(s_prev)) // self.K

    def in_frame(self, idx: int) -> bool:
        return 1 <= idx <= self.n_d

    def branch_mask(self, n: int) -> np.ndarray:
        """Valid branches (s', k) at slot ``n`` as a flat mask over ``c = k*Ns + s'``."""
        bad = [j for j in range(self.L_D) if not self.in_frame(n - j)]
        if not bad:
            return np.ones(self.n_branches, dtype=bool)
        return np.all(self.digits[:, bad] == 0, axis=1)

    def state_set(self, n: int) -> np.ndarray:
        """Indices of valid states at slot ``n``."""
        if self.L_D == 1:
            return np.array([0])
        dig = hypothesis_digits(self.L_D - 1, self.K)
        bad = [j for j in range(self.L_D - 1) if not self.in_frame(n - j)]
        ok = np.all(dig[:, bad] == 0, axis=1) if bad else np.ones(len(dig), bool)
        return np.flatnonzero(ok)

    def transitions(self, n: int) -> list[tuple[int, int, int]]:
        """The (s', s, k) triples of all branches at slot ``n``."""
        c = np.flatnonzero(self.branch_mask(n))
        k = c // self.n_states
        sp = c % self.n_states
        return list(zip(sp.tolist(), self.next_state(k, sp).tolist(), k.tolist()))

    def hypothesis_map(self, delays: tuple[int, ...]) -> np.ndarray:
        """Map each branch to the windowed hypothesis index over ``delays``."""
        if not delays:
            return np.zeros(self.n_branches, dtype=np.int64)
        w = self.K ** np.arange(len(delays) - 1, -1, -1)
        return self.digits[:, list(delays)] @ w


def build_trellis(D, K: int, n_d: int, max_transitions: int = DEFAULT_MAX_TRANSITIONS) -> Trellis:
    """Trellis for dominant delays ``D`` over an alphabet of ``K`` symbol vectors."""
    D = sorted(int(d) for d in D)
    if not D:
        raise ParameterError("at least one dominant tap is required")
    if n_d < 1:
        raise ParameterError("N_d must be >= 1")
    L_D = D[-1] + 1
    if K**L_D > max_transitions:
        raise ComplexityBudgetError(
            f"|X|^L_D = {K}^{L_D} exceeds the budget of {max_transitions} transitions"
        )
    return Trellis(L_D, K, n_d)
