"""Secure strict sign test: shares of 1{signed(v) > 0} over Z_2.

Two backends:

* ``ideal`` reconstructs inside the functionality and reshares the bit,
  charging 2 rounds and 2 bits per element.
* ``chunked`` realizes the millionaires-style digit decomposition. With
  a = server share, b = client share and v = a + b, let a' = a - 1,
  x = low ell-1 bits of a', y = 2^(ell-1) - 1 - (low ell-1 bits of b) and
  h = 1 xor msb(a') xor msb(b). Then

      signed(v) > 0  ==  h xor [x > y] xor (h and [x == y])

  x and y are split into q = ell/m digits (the top digit is m-1 bits wide,
  so the client's top index has a spare bit that carries msb(b)). Each
  digit is a 1-out-of-2^m OT of 2-bit (gt, eq) payloads; q-1 AND steps
  fold the digits, each one 1-out-of-2 OT of 2-bit payloads.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

import numpy as np

from .ot import ot_batch
from .parties import PartyRngs
from .ring import ConfigMismatch, FixedPointConfig, SharedVector
from .transport import Channel

DEFAULT_CHUNK_BITS = 4


@dataclass(frozen=True)
class CompareBackend:
    kind: Literal["ideal", "chunked"] = "chunked"
    chunk_bits: int = DEFAULT_CHUNK_BITS

    def __post_init__(self):
        if self.kind not in ("ideal", "chunked"):
            raise ValueError(f"unknown backend {self.kind!r}")
        if self.chunk_bits < 1:
            raise ValueError("chunk_bits must be >= 1")

    def chunks(self, cfg: FixedPointConfig) -> int:
        if cfg.ell % self.chunk_bits:
            raise ValueError(f"chunk_bits={self.chunk_bits} does not divide ell={cfg.ell}")
        return cfg.ell // self.chunk_bits


IDEAL = CompareBackend("ideal")
CHUNKED = CompareBackend("chunked")


def chunked_bits_per_element(ell: int, m: int) -> int:
    q = ell // m
    return q * (2**m * 2 + m) + (q - 1) * (2 * 2 + 1)


def chunked_rounds(ell: int, m: int) -> int:
    return 2 * (ell // m)


def f_less(client: SharedVector, server: SharedVector, backend: CompareBackend,
           channel: Channel, rngs: PartyRngs, phase: str = "compare") -> tuple[np.ndarray, np.ndarray]:
    """Return (client_bits, server_bits), uint8 arrays XOR-ing to signed(v) > 0."""
    if client.cfg != server.cfg:
        raise ConfigMismatch(f"{client.cfg} vs {server.cfg}")
    if client.party != "client" or server.party != "server":
        raise ValueError("expected (client, server) shares")
    if client.values.shape != server.values.shape:
        raise ValueError("share shapes differ")
    cfg = client.cfg
    shape = client.values.shape
    a = server.values.ravel()
    b = client.values.ravel()
    if backend.kind == "ideal":
        c, s = _ideal(a, b, cfg, channel, rngs, phase)
    else:
        c, s = _chunked(a, b, cfg, backend.chunks(cfg), backend.chunk_bits, channel, rngs, phase)
    return c.reshape(shape), s.reshape(shape)


def _ideal(a, b, cfg, channel, rngs, phase):
    n = a.size
    v = (a + b) & np.uint64(cfg.mask)
    bit = ((v != 0) & ((v >> np.uint64(cfg.ell - 1)) == 0)).astype(np.uint8)
    c = rngs.dealer.integers(0, 2, size=n, dtype=np.uint8)
    channel.barrier()
    channel.send("client", None, n, phase, functionality=True)
    channel.send("server", None, n, phase, functionality=True)
    channel.barrier()
    return c, bit ^ c


def _digits(x: np.ndarray, q: int, m: int) -> np.ndarray:
    shifts = np.arange(q, dtype=np.uint64) * np.uint64(m)
    return ((x[:, None] >> shifts[None, :]) & np.uint64((1 << m) - 1)).astype(np.int64)


def _pack(hi, lo):
    return (hi.astype(np.uint64) << np.uint64(1)) | lo.astype(np.uint64)


def _bits(v):
    return (v >> np.uint64(1)) & np.uint64(1), v & np.uint64(1)


def _fold(hi, lo):
    g_hi, f_hi = _bits(hi)
    g_lo, f_lo = _bits(lo)
    return _pack(g_hi ^ (f_hi & g_lo), f_hi & f_lo)


def _top(hi, lo):
    a, e = _bits(hi)
    g, f = _bits(lo)
    return _pack(a ^ (e & g) ^ (a & e & f), np.zeros_like(a))


def _and_step(gate, hi_c, hi_s, lo_c, lo_s, channel, rngs, phase):
    """One AND step, shaped as a 1-out-of-2 OT of 2-bit strings.

    The client chooses with its share of the eq bit of ``hi``. A single OT
    cannot carry both cross terms of a two-sided AND, so the table entries
    are filled by the dealer, which sees both parties' shares.
    """
    n = hi_c.size
    s_out = rngs.server.integers(0, 4, size=n, dtype=np.uint64)
    lo = lo_c ^ lo_s
    table = np.empty((n, 2), dtype=np.uint64)
    for c in (0, 1):
        hi_c_guess = (hi_c & np.uint64(2)) | np.uint64(c)
        table[:, c] = gate(hi_c_guess ^ hi_s, lo) ^ s_out
    choice = (hi_c & np.uint64(1)).astype(np.int64)
    return ot_batch(table, choice, 2, channel, phase), s_out


def _chunked(a, b, cfg, q, m, channel, rngs, phase):
    n = a.size
    nb = cfg.ell - 1
    low = np.uint64((1 << nb) - 1)
    ap = (a - np.uint64(1)) & np.uint64(cfg.mask)
    x, alpha = ap & low, ap >> np.uint64(nb)
    y, beta = low - (b & low), b >> np.uint64(nb)

    xd, yd = _digits(x, q, m), _digits(y, q, m)
    idx = yd.copy()
    idx[:, q - 1] |= beta.astype(np.int64) << (m - 1)

    cand = np.arange(1 << m, dtype=np.int64)
    gt = (xd[:, :, None] > cand).astype(np.uint64)
    eq = (xd[:, :, None] == cand).astype(np.uint64)
    # top digit: candidates carry msb(b) in their high bit
    top_y = cand & ((1 << (m - 1)) - 1)
    h = np.uint64(1) ^ alpha[:, None] ^ (cand >> (m - 1)).astype(np.uint64)[None, :]
    x_top = xd[:, q - 1][:, None]
    gt[:, q - 1] = h ^ (x_top > top_y).astype(np.uint64)
    eq[:, q - 1] = (x_top == top_y).astype(np.uint64)
    if q == 1:
        gt[:, 0] &= eq[:, 0] ^ np.uint64(1)
        eq[:, 0] = 0
    leaf = _pack(gt, eq)

    s_mask = rngs.server.integers(0, 4, size=(n, q), dtype=np.uint64)
    table = (leaf ^ s_mask[:, :, None]).reshape(n * q, 1 << m)
    t = ot_batch(table, idx.reshape(-1), 2, channel, phase).reshape(n, q)

    if q == 1:
        res_c, res_s = t[:, 0], s_mask[:, 0]
    else:
        acc_c, acc_s = t[:, q - 2], s_mask[:, q - 2]
        for j in range(q - 3, -1, -1):
            acc_c, acc_s = _and_step(_fold, acc_c, acc_s, t[:, j], s_mask[:, j], channel, rngs, phase)
        res_c, res_s = _and_step(_top, t[:, q - 1], s_mask[:, q - 1], acc_c, acc_s, channel, rngs, phase)
    c = ((res_c >> np.uint64(1)) & np.uint64(1)).astype(np.uint8)
    s = ((res_s >> np.uint64(1)) & np.uint64(1)).astype(np.uint8)
    return c, s
