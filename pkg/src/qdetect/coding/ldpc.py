"""Binary LDPC code: alist I/O, systematic GF(2) encoder, sum-product decoder."""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources
from pathlib import Path

import numpy as np

from ..core import ParameterError

LLR_MAX = 50.0
_DATA = "qdetect.coding.data"
DEFAULT_ALIST = "ieee80211ad_r12.alist"


# -- alist ------------------------------------------------------------------


def read_alist(text: str) -> np.ndarray:
    """Parse an alist document into a dense 0/1 ``(M, N)`` matrix."""
    tok = [int(t) for t in text.split()]
    n, m = tok[0], tok[1]
    # tok[2:4] are max degrees; then N column degrees, M row degrees.
    pos = 4
    col_deg = tok[pos : pos + n]
    pos += n + m
    h = np.zeros((m, n), dtype=np.uint8)
    max_col = tok[2]
    for j in range(n):
        rows = tok[pos : pos + max_col]
        pos += max_col
        for r in rows[: col_deg[j]]:
            if r > 0:
                h[r - 1, j] = 1
    return h


def write_alist(h: np.ndarray) -> str:
    h = np.asarray(h, dtype=np.uint8)
    m, n = h.shape
    col_idx = [np.flatnonzero(h[:, j]) + 1 for j in range(n)]
    row_idx = [np.flatnonzero(h[i]) + 1 for i in range(m)]
    max_c = max(len(c) for c in col_idx)
    max_r = max(len(r) for r in row_idx)
    pad = lambda v, w: " ".join(str(x) for x in list(v) + [0] * (w - len(v)))  # noqa: E731
    lines = [
        f"{n} {m}",
        f"{max_c} {max_r}",
        " ".join(str(len(c)) for c in col_idx),
        " ".join(str(len(r)) for r in row_idx),
    ]
    lines += [pad(c, max_c) for c in col_idx]
    lines += [pad(r, max_r) for r in row_idx]
    return "\n".join(lines) + "\n"


def expand_prototype(base: np.ndarray, z: int) -> np.ndarray:
    """Lift a prototype matrix of cyclic shifts (-1 = zero block)."""
    base = np.asarray(base)
    mb, nb = base.shape
    h = np.zeros((mb * z, nb * z), dtype=np.uint8)
    eye = np.eye(z, dtype=np.uint8)
    for i in range(mb):
        for j in range(nb):
            p = base[i, j]
            if p >= 0:
                h[i * z : (i + 1) * z, j * z : (j + 1) * z] = np.roll(eye, p, axis=1)
    return h


def load_base_matrix() -> np.ndarray:
    text = resources.files(_DATA).joinpath("ieee80211ad_r12_base.txt").read_text()
    rows = [line.split() for line in text.splitlines() if line.strip() and not line.startswith("#")]
    return np.array(rows, dtype=int)


# -- GF(2) encoder ------------------------------------------------------------


def _gf2_rref_from_right(h: np.ndarray):
    """Row-reduce over GF(2), choosing pivot columns from the right.

    Returns the reduced matrix (rank rows) and the pivot columns.
    """
    a = h.copy().astype(np.uint8)
    m, n = a.shape
    pivots = []
    row = 0
    for col in range(n - 1, -1, -1):
        if row == m:
            break
        nz = np.flatnonzero(a[row:, col]) + row
        if nz.size == 0:
            continue
        p = nz[0]
        if p != row:
            a[[row, p]] = a[[p, row]]
        others = np.flatnonzero(a[:, col])
        others = others[others != row]
        a[others] ^= a[row]
        pivots.append(col)
        row += 1
    return a[:row], np.array(pivots)


@dataclass(frozen=True)
class LdpcCode:
    """LDPC code defined by a parity-check matrix ``H`` with a systematic encoder.

    Information bits occupy ``info_pos`` of the codeword; for the bundled
    802.11ad code these are the first 336 positions.
    """

    H: np.ndarray
    info_pos: np.ndarray = field(init=False)
    parity_pos: np.ndarray = field(init=False)
    _P: np.ndarray = field(init=False, repr=False)
    _edges: tuple = field(init=False, repr=False)

    def __post_init__(self):
        h = np.asarray(self.H, dtype=np.uint8)
        rref, piv = _gf2_rref_from_right(h)
        info = np.setdiff1d(np.arange(h.shape[1]), piv)
        # rref[:, piv] is a permuted identity: row i has its pivot at piv[i].
        P = rref[:, info]
        object.__setattr__(self, "H", h)
        object.__setattr__(self, "info_pos", info)
        object.__setattr__(self, "parity_pos", piv)
        object.__setattr__(self, "_P", P)
        chk, var = np.nonzero(h)  # row-major => sorted by check
        object.__setattr__(self, "_edges", (chk, var))

    @property
    def n(self) -> int:
        return self.H.shape[1]

    @property
    def k(self) -> int:
        return self.info_pos.size

    @property
    def rate(self) -> float:
        return self.k / self.n

    def syndrome(self, c) -> np.ndarray:
        return (self.H.astype(np.int64) @ np.asarray(c, dtype=np.int64)) % 2

    def encode(self, info) -> np.ndarray:
        u = np.asarray(info, dtype=np.int64).ravel()
        if u.size != self.k:
            raise ParameterError(f"expected {self.k} info bits, got {u.size}")
        c = np.zeros(self.n, dtype=np.int8)
        c[self.info_pos] = u
        c[self.parity_pos] = (self._P.astype(np.int64) @ u) % 2
        return c

    def decode(self, llrs, max_iters: int = 50):
        """Sum-product decoding; positive LLR favours bit 0.

        Returns ``(info_bits, converged, iterations)``.
        """
        llr = np.clip(np.asarray(llrs, dtype=float).ravel(), -LLR_MAX, LLR_MAX)
        if llr.size != self.n:
            raise ParameterError(f"expected {self.n} LLRs, got {llr.size}")
        chk, var = self._edges
        starts = np.flatnonzero(np.r_[True, chk[1:] != chk[:-1]])
        r = np.zeros(chk.size)
        hard = (llr < 0).astype(np.int8)
        if not self.syndrome(hard).any():
            return hard[self.info_pos], True, 0
        it = 0
        for it in range(1, max_iters + 1):
            total = llr + np.bincount(var, weights=r, minlength=self.n)
            q = np.clip(total[var] - r, -LLR_MAX, LLR_MAX)
            # check update in the sign / log-tanh domain
            mag = np.abs(q)
            phi = -np.log(np.tanh(np.maximum(mag, 1e-12) / 2))
            neg = (q < 0).astype(np.int64)
            phi_sum = np.add.reduceat(phi, starts)
            neg_sum = np.add.reduceat(neg, starts)
            ext = np.maximum(phi_sum[chk] - phi, 1e-12)
            sign = 1 - 2 * ((neg_sum[chk] - neg) % 2)
            r = sign * np.clip(-np.log(np.tanh(ext / 2)), 0, LLR_MAX)
            total = llr + np.bincount(var, weights=r, minlength=self.n)
            hard = (total < 0).astype(np.int8)
            if not self.syndrome(hard).any():
                return hard[self.info_pos], True, it
        return hard[self.info_pos], False, it


@lru_cache(maxsize=None)
def ieee80211ad_r12() -> LdpcCode:
    """The bundled rate-1/2, length-672 802.11ad code."""
    text = resources.files(_DATA).joinpath(DEFAULT_ALIST).read_text()
    return LdpcCode(read_alist(text))


def load_code(path: str | Path | None = None) -> LdpcCode:
    if path is None:
        return ieee80211ad_r12()
    return LdpcCode(read_alist(Path(path).read_text()))


def ldpc_encode(info, code: LdpcCode | None = None) -> np.ndarray:
    return (code or ieee80211ad_r12()).encode(info)


def ldpc_decode(llrs, max_iters: int = 50, code: LdpcCode | None = None):
    bits, ok, _ = (code or ieee80211ad_r12()).decode(llrs, max_iters)
    return bits, ok
