"""Ideal 1-out-of-k oblivious transfer with exact cost charging.

Each invocation costs k*bitlen + ceil(log2 k) bits over two rounds. The
choice index goes to the functionality, never to the sender: the sender's
inbox only receives a fixed-size request notice with no payload.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .transport import Channel, OtRecord


@dataclass(frozen=True)
class OtInstance:
    k: int
    bitlen: int

    def __post_init__(self):
        if self.k < 2:
            raise ValueError("1-out-of-k OT needs k >= 2")
        if self.bitlen < 1:
            raise ValueError("bitlen must be >= 1")

    @property
    def choice_bits(self) -> int:
        return (self.k - 1).bit_length()

    @property
    def cost_bits(self) -> int:
        return self.k * self.bitlen + self.choice_bits


def ot_cost_bits(k: int, bitlen: int) -> int:
    return OtInstance(k, bitlen).cost_bits


def _other(party: str) -> str:
    return "server" if party == "client" else "client"


def _charge(channel: Channel, inst: OtInstance, count: int, receiver: str, phase: str, payload) -> None:
    sender = _other(receiver)
    channel.barrier()
    # round 1: choices to the functionality; the sender only learns that a request arrived
    channel.send(receiver, None, count * inst.choice_bits, phase, functionality=True)
    # round 2: sender strings through the functionality; receiver gets its selection
    channel.send(sender, payload, count * inst.k * inst.bitlen, phase, functionality=True)
    channel.barrier()
    ledger = channel.ledger
    ledger.ot_invocations += count
    ledger.phases[phase].ot_calls += count
    ledger.ot_log.append(OtRecord(inst.k, inst.bitlen, count, count * inst.cost_bits, 2, phase))


def ot_choose(strings: list[bytes], index: int, channel: Channel, phase: str = "ot",
              bitlen: int | None = None, receiver: str = "client") -> bytes:
    """Receiver obtains ``strings[index]``.

    ``bitlen`` defaults to the byte length of the strings; pass it explicitly
    for payloads that are not byte aligned.
    """
    if len({len(s) for s in strings}) != 1:
        raise ValueError("all OT strings must have the same length")
    if bitlen is None:
        bitlen = 8 * len(strings[0])
    elif bitlen > 8 * len(strings[0]):
        raise ValueError("bitlen larger than the strings")
    inst = OtInstance(len(strings), bitlen)
    if not 0 <= index < inst.k:
        raise IndexError(f"choice {index} outside [0, {inst.k})")
    out = bytes(strings[index])
    _charge(channel, inst, 1, receiver, phase, out)
    return out


def ot_batch(table: np.ndarray, indices: np.ndarray, elem_bits: int, channel: Channel,
             phase: str = "ot", receiver: str = "client") -> np.ndarray:
    """Run ``n`` parallel OTs sharing one pair of rounds.

    ``table`` has shape (n, k) or (n, k, w); each string is ``w`` elements of
    ``elem_bits`` bits, so bitlen = w * elem_bits. Returns shape (n,) or (n, w).
    """
    table = np.asarray(table, dtype=np.uint64)
    indices = np.asarray(indices, dtype=np.int64)
    if table.ndim not in (2, 3) or indices.shape != table.shape[:1]:
        raise ValueError(f"bad OT batch shapes {table.shape} / {indices.shape}")
    n, k = table.shape[:2]
    width = 1 if table.ndim == 2 else table.shape[2]
    if elem_bits < 64 and np.any(table >> np.uint64(elem_bits)):
        raise ValueError(f"OT string wider than {elem_bits} bits per element")
    if n and (indices.min() < 0 or indices.max() >= k):
        raise IndexError(f"choice outside [0, {k})")
    inst = OtInstance(k, width * elem_bits)
    out = table[np.arange(n), indices]
    if n:
        _charge(channel, inst, n, receiver, phase, out)
    return out
