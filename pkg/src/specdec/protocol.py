"""Two-party secure verification of draft tokens and the full decoding step.

Client-held and server-held values live in separately prefixed locals
(``c_*`` / ``s_*``); every value that crosses over goes through the channel
or an OT. Phases charged by one verification: select, compare, open,
retrieve (naive: compare, select, retrieve).
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .compare import CHUNKED, CompareBackend, f_less
from .models import DistributionTrace, LanguageModel, TracePlayback
from .ot import ot_batch
from .parties import PartyRngs
from .perf import DEFAULT_FORWARD_PROFILE, ForwardCostProfile
from .ring import DEFAULT_CFG, FixedPointConfig, SharedVector, decode_array, encode_array, random_ring, share_array
from .sampling import DraftBatch, finalize, sample
from .transport import Channel, CostLedger

VERIFY_PHASES = ("select", "compare", "open", "retrieve")


@dataclass
class SharedDistributions:
    """Both parties' shares of the gamma+1 target distributions, shape (gamma+1, V)."""

    client: np.ndarray
    server: np.ndarray
    cfg: FixedPointConfig = DEFAULT_CFG

    def row(self, i: int) -> tuple[SharedVector, SharedVector]:
        return SharedVector("client", self.client[i], self.cfg), SharedVector("server", self.server[i], self.cfg)

    def reconstruct(self) -> np.ndarray:
        return decode_array((self.client + self.server) & np.uint64(self.cfg.mask), self.cfg)


def draft_tokens(public_model: LanguageModel, prefix: Sequence[int], gamma: int,
                 rng: np.random.Generator) -> DraftBatch:
    if gamma < 1:
        raise ValueError("gamma must be >= 1")
    seq = list(prefix)
    tokens, dists = [], []
    for _ in range(gamma):
        q = public_model.next_distribution(seq)
        t = sample(q, rng)
        tokens.append(t)
        dists.append(q)
        seq.append(t)
    return DraftBatch(tokens, np.array(dists))


def secure_forward_stub(private_model: LanguageModel, prefix: Sequence[int], drafts: Sequence[int],
                        channel: Channel, rngs: PartyRngs, cfg: FixedPointConfig = DEFAULT_CFG,
                        cost_profile: ForwardCostProfile | None = DEFAULT_FORWARD_PROFILE,
                        phase: str = "forward") -> SharedDistributions:
    """Stand-in for the secure forward pass over prefix + drafts.

    Evaluates the model in the clear, encodes and shares the len(drafts)+1
    distributions, and charges the ledger from ``cost_profile`` at input
    length len(drafts)+1 (traffic split evenly between directions).
    """
    seq = list(prefix)
    dists = []
    for t in [*drafts, None]:
        dists.append(private_model.next_distribution(seq))
        if t is not None:
            seq.append(t)
    c_share, s_share = share_array(encode_array(np.array(dists), cfg), rngs.dealer, cfg)
    if cost_profile is not None:
        rounds, bits, compute = cost_profile.cost(len(drafts) + 1)
        ledger = channel.ledger
        ledger.charge_round(phase, rounds)
        half = int(round(bits)) // 2
        ledger.charge_bits("c2s", half, phase)
        ledger.charge_bits("s2c", int(round(bits)) - half, phase)
        ledger.compute_seconds += compute
    return SharedDistributions(c_share, s_share, cfg)


def _check(batch: DraftBatch, shared: SharedDistributions):
    gamma = batch.gamma
    if shared.client.shape != shared.server.shape or shared.client.shape[0] != gamma + 1:
        raise ValueError(f"need {gamma + 1} shared distributions, got {shared.client.shape[0]}")
    if shared.client.shape[1] != batch.q_dists.shape[1]:
        raise ValueError("vocabulary size mismatch between drafts and shared distributions")


def _retrieve(k: int, shared: SharedDistributions, channel: Channel, cfg: FixedPointConfig) -> np.ndarray:
    # line 11: client picks the server's share of row k by 1-of-(gamma+1) OT of V*ell-bit strings
    s_rows = shared.server[None, :, :]
    c_row_s = ot_batch(s_rows, np.array([k]), cfg.ell, channel, "retrieve")[0]
    return decode_array((shared.client[k] + c_row_s) & np.uint64(cfg.mask), cfg)


def secure_verify(batch: DraftBatch, shared: SharedDistributions, backend: CompareBackend,
                  channel: Channel, rngs: PartyRngs, r_mul: np.ndarray | None = None) -> tuple[int, np.ndarray]:
    """Privately reject draft tokens; the client learns k and p_k.

    ``r_mul`` are the client's uniforms (gamma x V); drawn from the client's
    generator when not given.
    """
    _check(batch, shared)
    cfg = shared.cfg
    mask = np.uint64(cfg.mask)
    gamma, V = batch.gamma, shared.client.shape[1]
    rows = np.arange(gamma)
    c_tokens = np.asarray(batch.tokens)

    # lines 2-3: client-local scores, S = Q*R_mul - P
    if r_mul is None:
        r_mul = rngs.client.random((gamma, V))
    c_S = (encode_array(batch.q_dists * r_mul, cfg) - shared.client[:gamma]) & mask
    s_S = (np.uint64(0) - shared.server[:gamma]) & mask

    # lines 4-7: one mask per row, client fetches the one masked share it needs
    s_r = random_ring(rngs.server, gamma, cfg)
    s_S_hat = (s_S - s_r[:, None]) & mask
    c_sel = ot_batch(s_S_hat, c_tokens, cfg.ell, channel, "select")
    c_s = (c_S[rows, c_tokens] + c_sel) & mask

    # line 8: shares of n = 1{s > 0}, opened to the client
    c_n, s_n = f_less(SharedVector("client", c_s, cfg), SharedVector("server", s_r, cfg),
                      backend, channel, rngs, "compare")
    channel.barrier()
    c_n = c_n ^ channel.send("server", s_n, gamma, "open")
    channel.barrier()

    # lines 9-10
    hits = np.flatnonzero(c_n)
    k = int(hits[0]) if hits.size else gamma
    return k, _retrieve(k, shared, channel, cfg)


def naive_verify(batch: DraftBatch, shared: SharedDistributions, backend: CompareBackend,
                 channel: Channel, rngs: PartyRngs, r_mul: np.ndarray | None = None) -> tuple[int, np.ndarray]:
    """Baseline ordering: compare all V scores of every row, then select one boolean."""
    _check(batch, shared)
    cfg = shared.cfg
    mask = np.uint64(cfg.mask)
    gamma, V = batch.gamma, shared.client.shape[1]
    c_tokens = np.asarray(batch.tokens)

    if r_mul is None:
        r_mul = rngs.client.random((gamma, V))
    c_S = (encode_array(batch.q_dists * r_mul, cfg) - shared.client[:gamma]) & mask
    s_S = (np.uint64(0) - shared.server[:gamma]) & mask

    c_n, s_n = f_less(SharedVector("client", c_S, cfg), SharedVector("server", s_S, cfg),
                      backend, channel, rngs, "compare")
    c_sel = ot_batch(s_n.astype(np.uint64), c_tokens, 1, channel, "select")
    c_bits = c_n[np.arange(gamma), c_tokens] ^ c_sel.astype(np.uint8)

    hits = np.flatnonzero(c_bits)
    k = int(hits[0]) if hits.size else gamma
    return k, _retrieve(k, shared, channel, cfg)


def clean_distribution(p: np.ndarray) -> np.ndarray:
    """Clip fixed-point noise below zero and renormalize."""
    p = np.maximum(np.asarray(p, dtype=np.float64), 0.0)
    total = p.sum()
    if total <= 0:
        raise ValueError("reconstructed distribution has no mass")
    return p / total


def finalize_token(k: int, p_k: np.ndarray, q_k: np.ndarray | None, gamma: int, rng: np.random.Generator) -> int:
    return finalize(k, gamma, clean_distribution(p_k), q_k, rng)


@dataclass
class StepResult:
    k: int
    accepted: list[int]
    final_token: int
    p_k: np.ndarray
    ledger: CostLedger
    channel: Channel

    @property
    def new_tokens(self) -> list[int]:
        return [*self.accepted, self.final_token]


def verify_step(batch: DraftBatch, shared: SharedDistributions, backend: CompareBackend,
                channel: Channel, rngs: PartyRngs, verifier: str = "optimized") -> tuple[int, np.ndarray, int]:
    verify = secure_verify if verifier == "optimized" else naive_verify
    k, p_k = verify(batch, shared, backend, channel, rngs)
    q_k = batch.q_dists[k] if k < batch.gamma else None
    return k, p_k, finalize_token(k, p_k, q_k, batch.gamma, rngs.client)


def run_step(public_model: LanguageModel, private_model: LanguageModel, prefix: Sequence[int], gamma: int,
             backend: CompareBackend = CHUNKED, rng=None, cfg: FixedPointConfig = DEFAULT_CFG,
             cost_profile: ForwardCostProfile | None = DEFAULT_FORWARD_PROFILE,
             verifier: str = "optimized", batch: DraftBatch | None = None) -> StepResult:
    """One decoding step on a fresh ledger. ``batch`` bypasses drafting (trace replay)."""
    rngs = PartyRngs.from_seed(rng)
    ledger = CostLedger()
    channel = Channel(ledger)
    if batch is None:
        batch = draft_tokens(public_model, prefix, gamma, rngs.client)
    shared = secure_forward_stub(private_model, prefix, batch.tokens, channel, rngs, cfg, cost_profile)
    k, p_k, token = verify_step(batch, shared, backend, channel, rngs, verifier)
    return StepResult(k, list(batch.tokens[:k]), token, p_k, ledger, channel)


def decode_step(public_model: LanguageModel, private_model: LanguageModel, prefix: Sequence[int], gamma: int,
                backend: CompareBackend = CHUNKED, ledger: CostLedger | None = None, rng=None,
                cfg: FixedPointConfig = DEFAULT_CFG,
                cost_profile: ForwardCostProfile | None = DEFAULT_FORWARD_PROFILE,
                verifier: str = "optimized", trace: list | None = None) -> list[int]:
    """Draft, securely verify and finalize; returns prefix plus k+1 new tokens."""
    res = run_step(public_model, private_model, prefix, gamma, backend, rng, cfg, cost_profile, verifier)
    if ledger is not None:
        ledger.merge(res.ledger)
    if trace is not None:
        trace.extend(trace_records(res, len(prefix)))
    return [*prefix, *res.new_tokens]


def trace_records(res: StepResult, position: int) -> list[dict]:
    return [
        {
            "position": position,
            "phase": name,
            "rounds": p.rounds,
            "bits_c2s": p.bits_c2s,
            "bits_s2c": p.bits_s2c,
            "ot_calls": p.ot_calls,
            "k": res.k,
            "tokens": res.new_tokens,
        }
        for name, p in res.ledger.phases.items()
    ]


def replay_trace(trace: DistributionTrace, gamma: int, backend: CompareBackend = CHUNKED, rng=None,
                 cfg: FixedPointConfig = DEFAULT_CFG, verifier: str = "optimized") -> list[StepResult]:
    """Run the protocol on recorded (p, q) pairs with the recorded drafts.

    Steps use disjoint windows of gamma+1 consecutive positions: gamma
    drafted tokens plus the position holding the bonus distribution.
    """
    by_pos = {r.position: r for r in trace}
    public, private = TracePlayback.from_trace(trace, "q"), TracePlayback.from_trace(trace, "p")
    rngs = PartyRngs.from_seed(rng)
    results = []
    start = min(by_pos)
    while all(start + i in by_pos for i in range(gamma + 1)):
        recs = [by_pos[start + i] for i in range(gamma)]
        batch = DraftBatch([r.drafted_token for r in recs], np.array([r.q for r in recs]))
        prefix = [0] * start  # only its length matters to the playback models
        results.append(run_step(public, private, prefix, gamma, backend, rngs, cfg, None, verifier, batch))
        start += gamma + 1
    return results


def write_trace(path, records: list[dict]) -> None:
    with open(path, "w") as f:
        for rec in records:
            f.write(json.dumps(rec, sort_keys=True) + "\n")
