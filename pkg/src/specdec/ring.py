"""Fixed-point encoding into Z_{2^ell} and two-party additive sharing.

Scalars are carried as ``RingValue``; the protocol code works on ``uint64``
numpy arrays masked to ``ell`` bits, which wrap the same way.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

import numpy as np

Party = Literal["client", "server"]


class ConfigMismatch(ValueError):
    pass


@dataclass(frozen=True)
class FixedPointConfig:
    ell: int = 32
    frac: int = 12

    def __post_init__(self):
        if not (2 <= self.frac < self.ell <= 64):
            raise ValueError(f"need 2 <= frac < ell <= 64, got ell={self.ell} frac={self.frac}")

    @property
    def modulus(self) -> int:
        return 1 << self.ell

    @property
    def mask(self) -> int:
        return (1 << self.ell) - 1

    @property
    def scale(self) -> int:
        return 1 << self.frac

    @property
    def bound(self) -> float:
        """Largest magnitude (exclusive) that encodes without sign overflow."""
        return float(1 << (self.ell - self.frac - 1))

    @property
    def resolution(self) -> float:
        return 2.0 ** -self.frac


DEFAULT_CFG = FixedPointConfig()


@dataclass(frozen=True)
class RingValue:
    raw: int
    cfg: FixedPointConfig = DEFAULT_CFG

    def __post_init__(self):
        object.__setattr__(self, "raw", int(self.raw) & self.cfg.mask)

    def _check(self, other: RingValue) -> None:
        if other.cfg != self.cfg:
            raise ConfigMismatch(f"{self.cfg} vs {other.cfg}")

    def __add__(self, other: RingValue) -> RingValue:
        self._check(other)
        return RingValue(self.raw + other.raw, self.cfg)

    def __sub__(self, other: RingValue) -> RingValue:
        self._check(other)
        return RingValue(self.raw - other.raw, self.cfg)

    def __neg__(self) -> RingValue:
        return RingValue(-self.raw, self.cfg)

    @property
    def signed(self) -> int:
        return to_signed(self.raw, self.cfg)


def to_signed(raw, cfg: FixedPointConfig = DEFAULT_CFG):
    """Two's-complement view: raw >= 2^(ell-1) maps to raw - 2^ell."""
    if isinstance(raw, np.ndarray):
        signed = raw.astype(np.uint64).view(np.int64)
        if cfg.ell == 64:
            return signed.copy()
        half = np.int64(1 << (cfg.ell - 1))
        return np.where(signed >= half, signed - np.int64(1 << cfg.ell), signed)
    raw = int(raw) & cfg.mask
    return raw - cfg.modulus if raw >> (cfg.ell - 1) else raw


def _round_half_away(x: np.ndarray) -> np.ndarray:
    return np.sign(x) * np.floor(np.abs(x) + 0.5)


def encode_array(x, cfg: FixedPointConfig = DEFAULT_CFG) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if not np.all(np.isfinite(x)) or np.any(np.abs(x) >= cfg.bound):
        raise OverflowError(f"value outside (-{cfg.bound}, {cfg.bound}) for {cfg}")
    scaled = _round_half_away(x * cfg.scale).astype(np.int64)
    return scaled.astype(np.uint64) & np.uint64(cfg.mask)


def decode_array(raw: np.ndarray, cfg: FixedPointConfig = DEFAULT_CFG) -> np.ndarray:
    return to_signed(np.asarray(raw, dtype=np.uint64), cfg).astype(np.float64) / cfg.scale


def encode_fixed(x: float, cfg: FixedPointConfig = DEFAULT_CFG) -> RingValue:
    """Encode ``x`` as round(x * 2^frac) mod 2^ell.

    >>> encode_fixed(0.5).raw
    2048
    """
    return RingValue(int(encode_array(x, cfg)), cfg)


def decode_fixed(v: RingValue) -> float:
    return v.signed / v.cfg.scale


def random_ring(rng: np.random.Generator, shape, cfg: FixedPointConfig = DEFAULT_CFG) -> np.ndarray:
    return rng.integers(0, cfg.mask, size=shape, dtype=np.uint64, endpoint=True)


def make_shares(v: RingValue, rng: np.random.Generator) -> tuple[RingValue, RingValue]:
    client = RingValue(int(random_ring(rng, None, v.cfg)), v.cfg)
    return client, v - client


def reconstruct(a: RingValue, b: RingValue) -> RingValue:
    return a + b


def share_array(raw: np.ndarray, rng: np.random.Generator,
                cfg: FixedPointConfig = DEFAULT_CFG) -> tuple[np.ndarray, np.ndarray]:
    """Split ``raw`` into (client, server) shares; the client share is uniform."""
    raw = np.asarray(raw, dtype=np.uint64)
    client = random_ring(rng, raw.shape, cfg)
    server = (raw - client) & np.uint64(cfg.mask)
    return client, server


def reconstruct_array(a: np.ndarray, b: np.ndarray, cfg: FixedPointConfig = DEFAULT_CFG) -> np.ndarray:
    return (np.asarray(a, dtype=np.uint64) + np.asarray(b, dtype=np.uint64)) & np.uint64(cfg.mask)


@dataclass
class SharedVector:
    """One party's additive share of a vector over Z_{2^ell}."""

    party: Party
    values: np.ndarray
    cfg: FixedPointConfig = DEFAULT_CFG

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.uint64) & np.uint64(self.cfg.mask)

    def __len__(self) -> int:
        return len(self.values)

    def __getitem__(self, i: int) -> RingValue:
        return RingValue(int(self.values[i]), self.cfg)


def share_vector(x, rng: np.random.Generator,
                 cfg: FixedPointConfig = DEFAULT_CFG) -> tuple[SharedVector, SharedVector]:
    client, server = share_array(encode_array(x, cfg), rng, cfg)
    return SharedVector("client", client, cfg), SharedVector("server", server, cfg)


def reconstruct_vector(a: SharedVector, b: SharedVector) -> np.ndarray:
    if a.cfg != b.cfg:
        raise ConfigMismatch(f"{a.cfg} vs {b.cfg}")
    if len(a) != len(b):
        raise ValueError("share length mismatch")
    return reconstruct_array(a.values, b.values, a.cfg)
