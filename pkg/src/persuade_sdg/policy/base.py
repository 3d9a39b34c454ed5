from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Literal

import numpy as np

Source = Literal["system", "user", "assistant"]


class PolicyError(Exception):
    pass


class UnsupportedCapability(PolicyError):
    """Raised when a generation-only policy is asked to score text."""


@dataclass(frozen=True)
class ChatMessage:
    source: Source
    text: str

    def __post_init__(self):
        if self.source not in ("system", "user", "assistant"):
            raise ValueError(f"bad message source {self.source!r}")


@dataclass(frozen=True)
class ChatPrompt:
    messages: tuple[ChatMessage, ...]

    def __post_init__(self):
        if not self.messages:
            raise ValueError("a prompt needs at least one message")

    @classmethod
    def of(cls, *pairs: tuple[Source, str]) -> ChatPrompt:
        return cls(tuple(ChatMessage(s, t) for s, t in pairs))

    def flat_text(self) -> str:
        return "\n".join(m.text for m in self.messages)

    def to_messages(self) -> list[dict]:
        return [{"role": m.source, "content": m.text} for m in self.messages]

    def with_message(self, source: Source, text: str) -> ChatPrompt:
        return ChatPrompt(self.messages + (ChatMessage(source, text),))


@dataclass
class GenerationSettings:
    temperature: float = 1.0
    max_tokens: int = 64
    rng: np.random.Generator | None = None

    def __post_init__(self):
        if not self.temperature > 0:
            raise ValueError("temperature must be positive")
        if self.max_tokens < 1:
            raise ValueError("max_tokens must be at least 1")

    def stream(self) -> np.random.Generator:
        if self.rng is None:
            self.rng = np.random.default_rng(0)
        return self.rng


@dataclass(frozen=True)
class Generation:
    text: str
    truncated: bool = False
    tokens: tuple[int, ...] = ()


@dataclass(frozen=True)
class ScoredSequence:
    tokens: tuple[int, ...]
    logprobs: np.ndarray = field(repr=False)
    total: float

    @classmethod
    def from_logprobs(cls, tokens: Iterable[int], logprobs) -> ScoredSequence:
        lp = np.asarray(logprobs, dtype=np.float64)
        return cls(tuple(int(t) for t in tokens), lp, float(lp.sum()))


class Policy:
    """Text generator, optionally able to score a continuation token by token."""

    name = "policy"
    can_score = False
    # True when replies follow the labeled-field formats; False when the reply
    # is the bare field value continuing an assistant prefix.
    emits_labels = True

    def generate(self, prompt: ChatPrompt, settings: GenerationSettings) -> Generation:
        raise NotImplementedError

    def score(self, prompt: ChatPrompt, target: str) -> ScoredSequence:
        raise UnsupportedCapability(f"{self.name} cannot score text")
