"""Plaintext speculative sampling; the reference the secure protocol is checked against."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

PROB_ATOL = 1e-9


class DegenerateResidual(ValueError):
    """max(0, p - q) is identically zero, i.e. p == q."""


def validate_probs(p, atol: float = PROB_ATOL) -> np.ndarray:
    p = np.asarray(p, dtype=np.float64)
    if p.ndim != 1 or p.size == 0:
        raise ValueError("probability vector must be 1-d and non-empty")
    if np.any(p < 0) or not np.all(np.isfinite(p)):
        raise ValueError("probabilities must be finite and nonnegative")
    if abs(p.sum() - 1.0) > atol:
        raise ValueError(f"probabilities sum to {p.sum():.12g}, not 1")
    return p


@dataclass
class DraftBatch:
    tokens: list[int]
    q_dists: np.ndarray  # (gamma, V)

    def __post_init__(self):
        self.q_dists = np.atleast_2d(np.asarray(self.q_dists, dtype=np.float64))
        if len(self.tokens) != len(self.q_dists):
            raise ValueError("one q distribution per draft token")
        for i, t in enumerate(self.tokens):
            if not self.q_dists[i, t] > 0:
                raise ValueError(f"draft token {t} at position {i} has zero draft probability")

    @property
    def gamma(self) -> int:
        return len(self.tokens)


@dataclass
class VerifyOutcome:
    k: int
    p_k: np.ndarray
    accepted: list[int] = field(default_factory=list)
    final_token: int | None = None

    @property
    def emitted(self) -> list[int]:
        return [*self.accepted, self.final_token]


def rejection_prob(p_i: float, q_i: float) -> float:
    if q_i <= 0:
        raise ValueError("draft probability must be positive")
    if p_i < 0:
        raise ValueError("target probability must be nonnegative")
    return max(0.0, 1.0 - p_i / q_i)


def refactored_reject(p_i, q_i, r):
    """Division-free test: reject iff r * q > p (ties accept). Works on arrays."""
    return r * q_i > p_i


def residual_distribution(p, q) -> np.ndarray:
    res = np.maximum(0.0, np.asarray(p, dtype=np.float64) - np.asarray(q, dtype=np.float64))
    total = res.sum()
    if total <= 0:
        raise DegenerateResidual("residual max(0, p - q) is all zero")
    return res / total


def sample(p: np.ndarray, rng: np.random.Generator) -> int:
    cdf = np.cumsum(p)
    i = int(np.searchsorted(cdf, rng.random() * cdf[-1], side="right"))
    return min(i, len(p) - 1)


def finalize(k: int, gamma: int, p_k: np.ndarray, q_k: np.ndarray | None, rng: np.random.Generator) -> int:
    """Sample the token that closes a step: residual on rejection, bonus otherwise."""
    if k < gamma:
        if q_k is None:
            raise ValueError("rejection at k < gamma needs the draft distribution q_k")
        try:
            return sample(residual_distribution(p_k, q_k), rng)
        except DegenerateResidual:
            return sample(p_k, rng)
    return sample(p_k, rng)


def first_rejection(p_dists: np.ndarray, batch: DraftBatch, uniforms: np.ndarray) -> int:
    idx = np.arange(batch.gamma)
    toks = np.asarray(batch.tokens)
    rejected = refactored_reject(p_dists[idx, toks], batch.q_dists[idx, toks], uniforms)
    hits = np.flatnonzero(rejected)
    return int(hits[0]) if hits.size else batch.gamma


def speculative_step_plaintext(p_dists, batch: DraftBatch, rng: np.random.Generator,
                               uniforms: np.ndarray | None = None) -> VerifyOutcome:
    """One verification step in the clear.

    ``uniforms`` (one per draft token) lets a caller replay the exact random
    stream used by the secure protocol.
    """
    p_dists = np.asarray(p_dists, dtype=np.float64)
    gamma = batch.gamma
    if len(p_dists) != gamma + 1:
        raise ValueError(f"need gamma+1={gamma + 1} target distributions, got {len(p_dists)}")
    if uniforms is None:
        uniforms = rng.random(gamma)
    k = first_rejection(p_dists, batch, uniforms)
    q_k = batch.q_dists[k] if k < gamma else None
    final = finalize(k, gamma, p_dists[k], q_k, rng)
    return VerifyOutcome(k, p_dists[k], list(batch.tokens[:k]), final)
