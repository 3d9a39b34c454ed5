"""A tiny log-linear language model that can be sampled, scored and differentiated exactly.

The next-token distribution is ``softmax(phi(context) @ W)`` where ``phi``
concatenates a positional one-hot of the last ``K`` context tokens, a
presence bag over the whole context, and a bias feature.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .base import ChatPrompt, Generation, GenerationSettings, Policy, ScoredSequence

UNK = "<unk>"
EOS = "<eos>"
CHECKPOINT_FORMAT = "persuade_sdg.toy_policy"
CHECKPOINT_VERSION = 1


class Tokenizer:
    """Lowercased whitespace tokenizer over a closed vocabulary."""

    def __init__(self, vocab):
        vocab = tuple(vocab)
        if vocab[:2] != (UNK, EOS):
            raise ValueError(f"vocabulary must start with {UNK!r}, {EOS!r}")
        if len(set(vocab)) != len(vocab):
            raise ValueError("duplicate vocabulary entries")
        self.vocab = vocab
        self.unk, self.eos = 0, 1
        self._index = {w: i for i, w in enumerate(vocab)}

    def __len__(self):
        return len(self.vocab)

    def tokenize(self, text: str) -> list[int]:
        ids = [self._index.get(w, self.unk) for w in text.lower().split()]
        return [self.unk if i == self.eos else i for i in ids]

    def detokenize(self, ids) -> str:
        return " ".join(self.vocab[i] for i in ids if i != self.eos)


@dataclass
class ToyPolicyParams:
    vocab: tuple[str, ...]
    weights: np.ndarray = field(repr=False)
    context_window: int = 4

    def __post_init__(self):
        self.vocab = tuple(self.vocab)
        self.weights = np.asarray(self.weights, dtype=np.float64)
        if self.weights.shape != (self.n_features, self.V):
            raise ValueError(f"weights must have shape {(self.n_features, self.V)}")
        if not np.all(np.isfinite(self.weights)):
            raise ValueError("weights must be finite")

    @property
    def V(self) -> int:
        return len(self.vocab)

    @property
    def n_features(self) -> int:
        return (self.context_window + 1) * len(self.vocab) + 1

    @property
    def bag_offset(self) -> int:
        return self.context_window * self.V

    def feature_index(self, *, position: int | None = None, token: int | str | None = None,
                      bag: bool = False, bias: bool = False) -> int:
        """Row of ``weights`` for a feature; ``position`` 0 is the most recent token."""
        if bias:
            return self.n_features - 1
        tok = self.vocab.index(token) if isinstance(token, str) else int(token)
        if bag:
            return self.bag_offset + tok
        return position * self.V + tok

    @classmethod
    def zeros(cls, vocab, context_window: int = 4) -> ToyPolicyParams:
        V = len(vocab)
        return cls(tuple(vocab), np.zeros(((context_window + 1) * V + 1, V)), context_window)

    @classmethod
    def random(cls, vocab, rng: np.random.Generator, scale: float = 1.0,
               context_window: int = 4) -> ToyPolicyParams:
        p = cls.zeros(vocab, context_window)
        p.weights = rng.normal(0.0, scale, p.weights.shape)
        return p

    def copy(self) -> ToyPolicyParams:
        return ToyPolicyParams(self.vocab, self.weights.copy(), self.context_window)

    @property
    def tokenizer(self) -> Tokenizer:
        return Tokenizer(self.vocab)

    def to_dict(self) -> dict:
        return {
            "vocabulary": list(self.vocab),
            "feature_map": {"kind": "last_k_onehot+context_bag+bias",
                            "context_window": self.context_window},
            "weights": self.weights.tolist(),
        }

    @classmethod
    def from_dict(cls, d) -> ToyPolicyParams:
        return cls(tuple(d["vocabulary"]), np.array(d["weights"], dtype=np.float64),
                   int(d["feature_map"]["context_window"]))


def step_features(params: ToyPolicyParams, context: list[int], target: list[int]) -> np.ndarray:
    """Feature rows for predicting each target token after ``context``.

    Row ``j`` describes ``context + target[:j]``; with an empty target a
    single row for the bare context is returned.
    """
    K, V = params.context_window, params.V
    seq = list(context) + list(target)
    n_rows = max(len(target), 1)
    phi = np.zeros((n_rows, params.n_features))
    bag = np.zeros(V)
    if context:
        bag[np.unique(np.asarray(context, dtype=int))] = 1.0
    for j in range(n_rows):
        end = len(context) + j
        for pos, tok in enumerate(reversed(seq[max(0, end - K):end])):
            phi[j, pos * V + tok] = 1.0
        phi[j, K * V:K * V + V] = bag
        phi[j, -1] = 1.0
        if j < len(target):
            bag[target[j]] = 1.0
    return phi


def _log_softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=-1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=-1, keepdims=True))


def next_token_distribution(params: ToyPolicyParams, context) -> np.ndarray:
    phi = step_features(params, list(context), [])[0]
    return np.exp(_log_softmax(phi @ params.weights))


def score_tokens(params: ToyPolicyParams, context: list[int], target: list[int]) -> ScoredSequence:
    if not target:
        return ScoredSequence.from_logprobs((), np.zeros(0))
    phi = step_features(params, context, target)
    logp = _log_softmax(phi @ params.weights)
    return ScoredSequence.from_logprobs(target, logp[np.arange(len(target)), target])


def logprob_gradient_tokens(params: ToyPolicyParams, context: list[int], target: list[int]) -> np.ndarray:
    """d/dW of sum_j log p(target_j | context, target_<j)."""
    if not target:
        return np.zeros_like(params.weights)
    phi = step_features(params, context, target)
    probs = np.exp(_log_softmax(phi @ params.weights))
    resid = -probs
    resid[np.arange(len(target)), target] += 1.0
    return phi.T @ resid


class ToyPolicy(Policy):
    """Trainable, exactly scorable stand-in for the refiner and the measurer."""

    can_score = True
    emits_labels = False

    def __init__(self, params: ToyPolicyParams, name: str = "toy"):
        self.params = params
        self.name = name
        self.tokenizer = params.tokenizer

    def context_ids(self, prompt: ChatPrompt) -> list[int]:
        ids: list[int] = []
        for m in prompt.messages:
            ids.extend(self.tokenizer.tokenize(m.text))
        return ids

    def score(self, prompt: ChatPrompt, target: str) -> ScoredSequence:
        return score_tokens(self.params, self.context_ids(prompt), self.tokenizer.tokenize(target))

    def logprob_gradient(self, prompt: ChatPrompt, target: str) -> np.ndarray:
        return logprob_gradient_tokens(self.params, self.context_ids(prompt),
                                       self.tokenizer.tokenize(target))

    def sample_tokens(self, context: list[int], max_tokens: int, rng: np.random.Generator,
                      temperature: float = 1.0, stop_at_eos: bool = True) -> list[int]:
        out: list[int] = []
        W = self.params.weights
        for _ in range(max_tokens):
            z = step_features(self.params, context + out, [])[0] @ W
            p = np.exp(_log_softmax(z / temperature))
            tok = int(np.searchsorted(np.cumsum(p), rng.random() * p.sum(), side="right"))
            tok = min(tok, len(p) - 1)
            out.append(tok)
            if stop_at_eos and tok == self.tokenizer.eos:
                break
        return out

    def generate(self, prompt: ChatPrompt, settings: GenerationSettings) -> Generation:
        toks = self.sample_tokens(self.context_ids(prompt), settings.max_tokens,
                                  settings.stream(), settings.temperature)
        ended = bool(toks) and toks[-1] == self.tokenizer.eos
        body = [t for t in toks if t != self.tokenizer.eos]
        return Generation(self.tokenizer.detokenize(body), truncated=not ended, tokens=tuple(body))


def save_checkpoint(path, params: ToyPolicyParams, config: dict | None = None) -> None:
    doc = {"format": CHECKPOINT_FORMAT, "version": CHECKPOINT_VERSION, **params.to_dict(),
           "config": config or {}}
    Path(path).write_text(json.dumps(doc))


def load_checkpoint(path) -> tuple[ToyPolicyParams, dict]:
    doc = json.loads(Path(path).read_text())
    if doc.get("format") != CHECKPOINT_FORMAT:
        raise ValueError(f"{path} is not a toy policy checkpoint")
    if doc.get("version") != CHECKPOINT_VERSION:
        raise ValueError(f"unsupported checkpoint version {doc.get('version')!r}")
    return ToyPolicyParams.from_dict(doc), doc.get("config", {})
