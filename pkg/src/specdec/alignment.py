"""Distilling the public draft model toward the private target from top-K outputs,
and measuring the resulting acceptance ratio."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .models import LanguageModel, NgramModel, SoftmaxModel, ngram_fit, sample_sequence, softmax
from .sampling import DraftBatch, sample, speculative_step_plaintext

Q_FLOOR = 1e-12
DEFAULT_TOP_K = 5


class DivergenceError(FloatingPointError):
    """Training loss became NaN or infinite."""


@dataclass
class DistillationSample:
    prompt: list[int]
    response: list[int]
    topk: list[list[tuple[int, float]]]  # one list per response position, descending

    def __post_init__(self):
        if len(self.topk) != len(self.response):
            raise ValueError("one top-K list per response position")
        for row in self.topk:
            probs = [p for _, p in row]
            if any(not 0 < p <= 1 for p in probs):
                raise ValueError("top-K probabilities must lie in (0, 1]")
            if any(a < b for a, b in zip(probs, probs[1:])):
                raise ValueError("top-K probabilities must be descending")

    def contexts(self) -> list[list[int]]:
        """Prefix seen before each response position."""
        seq = list(self.prompt)
        out = []
        for tok in self.response:
            out.append(list(seq))
            seq.append(tok)
        return out

    def to_json(self) -> str:
        return json.dumps({
            "prompt": self.prompt,
            "response": self.response,
            "topk": [[[int(t), float(p)] for t, p in row] for row in self.topk],
        })

    @classmethod
    def from_json(cls, line: str) -> DistillationSample:
        d = json.loads(line)
        return cls(d["prompt"], d["response"], [[(int(t), float(p)) for t, p in row] for row in d["topk"]])


def top_k(p: np.ndarray, k: int) -> list[tuple[int, float]]:
    # stable sort so ties keep the lower index first
    order = np.argsort(-p, kind="stable")[:k]
    return [(int(i), float(p[i])) for i in order if p[i] > 0]


def collect_distillation_set(target: LanguageModel, prompts: Sequence[Sequence[int]], length: int,
                             rng: np.random.Generator, k: int = DEFAULT_TOP_K) -> list[DistillationSample]:
    """Decode ``length`` tokens from each prompt, keeping the target's top-K at every step."""
    if k < 1:
        raise ValueError("K must be >= 1")
    data = []
    for prompt in prompts:
        seq = list(prompt)
        response, rows = [], []
        for _ in range(length):
            p = target.next_distribution(seq)
            rows.append(top_k(p, k))
            tok = sample(p, rng)
            response.append(tok)
            seq.append(tok)
        data.append(DistillationSample(list(prompt), response, rows))
    return data


def _weights(row, renormalize: bool) -> list[tuple[int, float]]:
    if not renormalize:
        return row
    total = sum(p for _, p in row)
    return [(t, p / total) for t, p in row]


def distill_loss(sample_: DistillationSample, public: LanguageModel, renormalize: bool = False) -> float:
    """Truncated cross entropy sum_t sum_{j in topK} p_j * -log q_j."""
    loss = 0.0
    for ctx, row in zip(sample_.contexts(), sample_.topk):
        q = public.next_distribution(ctx)
        for tok, p in _weights(row, renormalize):
            loss -= p * np.log(max(q[tok], Q_FLOOR))
    return float(loss)


def dataset_loss(data: Sequence[DistillationSample], public: LanguageModel, renormalize: bool = False) -> float:
    return float(np.mean([distill_loss(s, public, renormalize) for s in data]))


def target_matrix(data: Sequence[DistillationSample], model: SoftmaxModel, renormalize: bool = False) -> np.ndarray:
    """Top-K mass summed per softmax context, divided by the number of samples.

    The mean loss is then -sum(T * log Q) over the (V+1, V) context grid.
    """
    T = np.zeros((model.vocab_size + 1, model.vocab_size))
    for s in data:
        for ctx, row in zip(s.contexts(), s.topk):
            c = model.context_id(ctx)
            for tok, p in _weights(row, renormalize):
                T[c, tok] += p
    return T / max(len(data), 1)


def _loss_and_grad(model: SoftmaxModel, T: np.ndarray) -> tuple[float, np.ndarray]:
    Q = softmax(model.emb @ model.out + model.bias)
    loss = float(-(T * np.log(np.maximum(Q, Q_FLOOR))).sum())
    dZ = T.sum(axis=1, keepdims=True) * Q - T
    grad = np.concatenate([(dZ @ model.out.T).ravel(), (model.emb.T @ dZ).ravel(), dZ.sum(axis=0)])
    return loss, grad


def distill_grad(data: Sequence[DistillationSample], model: SoftmaxModel,
                 renormalize: bool = False) -> tuple[float, np.ndarray]:
    """Mean loss over ``data`` and its gradient w.r.t. ``model.params()``.

    Exact wherever no draft probability on the top-K support sits below the floor.
    """
    return _loss_and_grad(model, target_matrix(data, model, renormalize))


@dataclass
class TrainLog:
    losses: list[float] = field(default_factory=list)


def train_align(model: SoftmaxModel, data: Sequence[DistillationSample], epochs: int = 200,
                lr: float = 0.01, renormalize: bool = False, log: TrainLog | None = None) -> SoftmaxModel:
    """Full-batch gradient descent on the mean distillation loss."""
    if epochs < 0:
        raise ValueError("epochs must be >= 0")
    T = target_matrix(data, model, renormalize)
    theta = model.params()
    for _ in range(epochs):
        with np.errstate(over="ignore", invalid="ignore"):
            loss, grad = _loss_and_grad(model.with_params(theta), T)
        if not np.isfinite(loss) or not np.all(np.isfinite(grad)):
            raise DivergenceError(f"loss diverged ({loss})")
        if log is not None:
            log.losses.append(loss)
        theta = theta - lr * grad
    final = model.with_params(theta)
    if log is not None:
        loss, _ = _loss_and_grad(final, T)
        if not np.isfinite(loss):
            raise DivergenceError(f"loss diverged ({loss})")
        log.losses.append(loss)
    return final


def fit_softmax(corpus: Sequence[Sequence[int]], model: SoftmaxModel, epochs: int = 200, lr: float = 0.01) -> SoftmaxModel:
    """Plain next-token training on a corpus: distillation with one-hot targets."""
    data = [DistillationSample(s[:1], list(s[1:]), [[(t, 1.0)] for t in s[1:]]) for s in corpus if len(s) > 1]
    return train_align(model, data, epochs, lr)


# ------------------------------------------------------------ acceptance ratio


@dataclass
class AcceptanceEstimate:
    alpha: float
    samples: int
    stderr: float

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError("alpha must lie in [0, 1]")


def _prompt_rng(seed: int, prompt: Sequence[int]) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, len(prompt), *map(int, prompt)]))


def estimate_acceptance(target: LanguageModel, public: LanguageModel, prompts: Sequence[Sequence[int]],
                        gamma: int, runs: int, seed: int = 0) -> AcceptanceEstimate:
    """Per-token acceptance rate from plaintext speculative steps.

    Each step evaluates drafts up to and including the first rejection, so
    alpha = accepted / evaluated, with evaluated = min(k + 1, gamma) per step.
    Every prompt gets its own generator keyed by (seed, prompt).
    """
    if runs < 1:
        raise ValueError("runs must be >= 1")
    accepted = evaluated = 0
    for prompt in prompts:
        rng = _prompt_rng(seed, prompt)
        for _ in range(runs):
            seq = list(prompt)
            toks, qs, ps = [], [], []
            for _ in range(gamma):
                q = public.next_distribution(seq)
                ps.append(target.next_distribution(seq))
                t = sample(q, rng)
                toks.append(t)
                qs.append(q)
                seq.append(t)
            ps.append(target.next_distribution(seq))
            out = speculative_step_plaintext(np.array(ps), DraftBatch(toks, np.array(qs)), rng)
            accepted += out.k
            evaluated += min(out.k + 1, gamma)
    alpha = accepted / evaluated
    return AcceptanceEstimate(alpha, evaluated, float(np.sqrt(alpha * (1 - alpha) / evaluated)))


def measured_tokens_per_step(target: LanguageModel, public: LanguageModel, prompt: Sequence[int],
                             gamma: int, steps: int, seed: int = 0) -> float:
    """Mean number of tokens emitted by one plaintext speculative step."""
    rng = np.random.default_rng(seed)
    total = 0
    for _ in range(steps):
        seq = list(prompt)
        toks, qs, ps = [], [], []
        for _ in range(gamma):
            q = public.next_distribution(seq)
            ps.append(target.next_distribution(seq))
            toks.append(sample(q, rng))
            qs.append(q)
            seq.append(toks[-1])
        ps.append(target.next_distribution(seq))
        total += speculative_step_plaintext(np.array(ps), DraftBatch(toks, np.array(qs)), rng).k + 1
    return total / steps


# ---------------------------------------------------------- synthetic task


@dataclass
class SyntheticTask:
    target: NgramModel
    public: SoftmaxModel
    prompts: list[list[int]]


def synthetic_task(vocab_size: int = 16, dim: int = 8, corpus_size: int = 400, length: int = 24,
                   seed: int = 0, pretrain_epochs: int = 300) -> SyntheticTask:
    """Target: smoothed bigram fitted on one corpus. Public: softmax model
    pre-trained on a second corpus drawn from an unrelated source."""
    rng = np.random.default_rng(seed)
    src_a = NgramModel.random(vocab_size, 1, rng, concentration=0.3)
    src_b = NgramModel.random(vocab_size, 1, rng, concentration=0.3)
    corpus_a = [sample_sequence(src_a, [], length, rng) for _ in range(corpus_size)]
    corpus_b = [sample_sequence(src_b, [], length, rng) for _ in range(corpus_size)]
    target = ngram_fit(corpus_a, 1, vocab_size, delta=0.1)
    public = fit_softmax(corpus_b, SoftmaxModel.init(vocab_size, dim, rng), pretrain_epochs)
    prompts = [[int(t)] for t in range(vocab_size)]
    return SyntheticTask(target, public, prompts)


# ------------------------------------------------------------------- file I/O


def save_dataset(path, data: Sequence[DistillationSample]) -> None:
    Path(path).write_text("".join(s.to_json() + "\n" for s in data))


def load_dataset(path) -> list[DistillationSample]:
    return [DistillationSample.from_json(line) for line in Path(path).read_text().splitlines() if line.strip()]
