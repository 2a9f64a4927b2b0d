"""Toy generative models that stand in for the public and private LMs.

Anything with ``vocab_size`` and ``next_distribution(prefix)`` can be used
as a model by the protocol and the alignment code.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from pathlib import Path
from typing import Protocol, Sequence

import numpy as np

from .sampling import sample, validate_probs


class LanguageModel(Protocol):
    vocab_size: int

    def next_distribution(self, prefix: Sequence[int]) -> np.ndarray: ...


@dataclass
class NgramModel:
    order: int
    vocab_size: int
    table: dict[tuple[int, ...], np.ndarray]
    unigram: np.ndarray
    delta: float = 0.01

    def next_distribution(self, prefix: Sequence[int]) -> np.ndarray:
        if self.order == 0 or len(prefix) < self.order:
            return self.unigram
        return self.table.get(tuple(prefix[-self.order:]), self.unigram)

    @classmethod
    def random(cls, vocab_size: int, order: int, rng: np.random.Generator,
               concentration: float = 0.5, smoothing: float = 0.05) -> NgramModel:
        """Dirichlet rows over every context, mixed with ``smoothing`` of uniform mass."""
        def row():
            d = rng.dirichlet(np.full(vocab_size, concentration))
            return (1 - smoothing) * d + smoothing / vocab_size

        table = {ctx: row() for ctx in itertools.product(range(vocab_size), repeat=order)}
        return cls(order, vocab_size, table, row(), delta=smoothing)


def ngram_fit(corpus: Sequence[Sequence[int]], order: int, vocab_size: int, delta: float = 0.01) -> NgramModel:
    """Add-delta maximum likelihood; contexts never seen fall back to the unigram."""
    if vocab_size < 2:
        raise ValueError("vocab_size must be >= 2")
    if delta <= 0:
        raise ValueError("delta must be positive")
    if not corpus or not any(len(s) for s in corpus):
        raise ValueError("empty corpus")
    uni = np.zeros(vocab_size)
    counts: dict[tuple[int, ...], np.ndarray] = {}
    for seq in corpus:
        for i, tok in enumerate(seq):
            if not 0 <= tok < vocab_size:
                raise ValueError(f"token {tok} outside vocabulary of size {vocab_size}")
            uni[tok] += 1
            if order and i >= order:
                ctx = tuple(seq[i - order:i])
                counts.setdefault(ctx, np.zeros(vocab_size))[tok] += 1
    unigram = (uni + delta) / (uni.sum() + vocab_size * delta)
    table = {ctx: (c + delta) / (c.sum() + vocab_size * delta) for ctx, c in sorted(counts.items())}
    return NgramModel(order, vocab_size, table, unigram, delta)


def softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


@dataclass
class SoftmaxModel:
    """Bigram model with factorized logits: emb[last token] @ out + bias.

    Row ``vocab_size`` of ``emb`` is the start-of-sequence context.
    """

    emb: np.ndarray  # (V + 1, d)
    out: np.ndarray  # (d, V)
    bias: np.ndarray  # (V,)
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def vocab_size(self) -> int:
        return self.out.shape[1]

    @property
    def dim(self) -> int:
        return self.out.shape[0]

    @classmethod
    def init(cls, vocab_size: int, dim: int, rng: np.random.Generator, scale: float = 0.1) -> SoftmaxModel:
        return cls(
            rng.normal(0, scale, (vocab_size + 1, dim)),
            rng.normal(0, scale, (dim, vocab_size)),
            np.zeros(vocab_size),
        )

    def context_id(self, prefix: Sequence[int]) -> int:
        return int(prefix[-1]) if len(prefix) else self.vocab_size

    def all_distributions(self) -> np.ndarray:
        if "probs" not in self._cache:
            self._cache["probs"] = softmax(self.emb @ self.out + self.bias)
        return self._cache["probs"]

    def next_distribution(self, prefix: Sequence[int]) -> np.ndarray:
        return self.all_distributions()[self.context_id(prefix)]

    def params(self) -> np.ndarray:
        return np.concatenate([self.emb.ravel(), self.out.ravel(), self.bias])

    def with_params(self, theta: np.ndarray) -> SoftmaxModel:
        V, d = self.vocab_size, self.dim
        n_emb, n_out = (V + 1) * d, d * V
        theta = np.asarray(theta, dtype=np.float64)
        return SoftmaxModel(
            theta[:n_emb].reshape(V + 1, d).copy(),
            theta[n_emb:n_emb + n_out].reshape(d, V).copy(),
            theta[n_emb + n_out:].copy(),
        )


# ---------------------------------------------------------------- file formats


class TraceFormatError(ValueError):
    def __init__(self, line: int, msg: str):
        super().__init__(f"line {line}: {msg}")
        self.line = line


@dataclass
class TraceRecord:
    position: int
    drafted_token: int
    p: np.ndarray
    q: np.ndarray


DistributionTrace = list[TraceRecord]


@dataclass
class TracePlayback:
    """Replays recorded distributions; the prefix length selects the record."""

    dists: dict[int, np.ndarray]
    vocab_size: int

    @classmethod
    def from_trace(cls, trace: DistributionTrace, side: str) -> TracePlayback:
        if side not in ("p", "q"):
            raise ValueError("side must be 'p' or 'q'")
        return cls({r.position: getattr(r, side) for r in trace}, len(trace[0].p))

    def next_distribution(self, prefix: Sequence[int]) -> np.ndarray:
        try:
            return self.dists[len(prefix)]
        except KeyError:
            raise KeyError(f"trace has no record at position {len(prefix)}") from None


def save_trace(path, trace: DistributionTrace) -> None:
    with open(path, "w") as f:
        for rec in trace:
            vals = [str(rec.position), str(rec.drafted_token)]
            vals += [repr(float(x)) for x in rec.p] + [repr(float(x)) for x in rec.q]
            f.write(",".join(vals) + "\n")


def load_trace(path) -> DistributionTrace:
    """Read ``position,drafted_token,p[0..V),q[0..V)`` lines."""
    trace = []
    vocab = None
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        fields = [x.strip() for x in line.split(",")]
        if len(fields) < 6 or (len(fields) - 2) % 2:
            raise TraceFormatError(lineno, f"expected 2 + 2V fields, got {len(fields)}")
        try:
            pos, tok = int(fields[0]), int(fields[1])
            nums = np.array([float(x) for x in fields[2:]])
        except ValueError as e:
            raise TraceFormatError(lineno, str(e)) from None
        V = len(nums) // 2
        if vocab is not None and V != vocab:
            raise TraceFormatError(lineno, f"vocabulary size {V} differs from earlier rows ({vocab})")
        vocab = V
        p, q = nums[:V], nums[V:]
        for name, d in (("p", p), ("q", q)):
            try:
                validate_probs(d, atol=1e-6)
            except ValueError as e:
                raise TraceFormatError(lineno, f"{name}: {e}") from None
        if not 0 <= tok < V:
            raise TraceFormatError(lineno, f"drafted token {tok} outside vocabulary")
        if q[tok] <= 0:
            raise TraceFormatError(lineno, f"drafted token {tok} has zero draft probability")
        trace.append(TraceRecord(pos, tok, p, q))
    return trace


def load_corpus(path) -> list[list[int]]:
    return [[int(t) for t in line.split()] for line in Path(path).read_text().splitlines() if line.strip()]


def save_corpus(path, corpus: Sequence[Sequence[int]]) -> None:
    Path(path).write_text("".join(" ".join(map(str, s)) + "\n" for s in corpus))


def save_model(path, model) -> None:
    """Flat text checkpoint: a header line, then one row of numbers per line."""
    with open(path, "w") as f:
        if isinstance(model, SoftmaxModel):
            f.write(f"softmax {model.vocab_size} {model.dim}\n")
            f.write(" ".join(repr(float(x)) for x in model.params()) + "\n")
        elif isinstance(model, NgramModel):
            f.write(f"ngram {model.vocab_size} {model.order} {model.delta!r}\n")
            f.write(" ".join(repr(float(x)) for x in model.unigram) + "\n")
            for ctx, row in model.table.items():
                f.write(" ".join(map(str, ctx)) + " | " + " ".join(repr(float(x)) for x in row) + "\n")
        else:
            raise TypeError(f"cannot checkpoint {type(model).__name__}")


def load_model(path):
    lines = Path(path).read_text().splitlines()
    head = lines[0].split()
    if head[0] == "softmax":
        V, d = int(head[1]), int(head[2])
        theta = np.array([float(x) for x in lines[1].split()])
        if theta.size != (V + 1) * d + d * V + V:
            raise ValueError(f"{path}: parameter count does not match header")
        return SoftmaxModel(np.zeros((V + 1, d)), np.zeros((d, V)), np.zeros(V)).with_params(theta)
    if head[0] == "ngram":
        V, order, delta = int(head[1]), int(head[2]), float(head[3])
        unigram = np.array([float(x) for x in lines[1].split()])
        table = {}
        for line in lines[2:]:
            ctx, row = line.split("|")
            table[tuple(int(t) for t in ctx.split())] = np.array([float(x) for x in row.split()])
        return NgramModel(order, V, table, unigram, delta)
    raise ValueError(f"{path}: unknown checkpoint kind {head[0]!r}")


def sample_sequence(model: LanguageModel, prefix: Sequence[int], length: int, rng: np.random.Generator) -> list[int]:
    seq = list(prefix)
    for _ in range(length):
        seq.append(sample(model.next_distribution(seq), rng))
    return seq

