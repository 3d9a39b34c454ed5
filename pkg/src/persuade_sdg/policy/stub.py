"""Offline backends: canned replies and a small rule-based stand-in for an API model."""
from __future__ import annotations

import hashlib
import re
from typing import Callable, Sequence

import numpy as np

from .base import ChatPrompt, Generation, GenerationSettings, Policy

_SELF = re.compile(r"Your are (Player \d+)")
_NEXT = re.compile(r"next player \((Player \d+)\)")
_PLAYER = re.compile(r"Player \d+")

_OPENERS = [
    "I have been watching the votes closely.",
    "Let us slow down and look at what we know.",
    "Something about the last round bothers me.",
    "I want to share how I read the table.",
]
_CLAIMS = [
    "{x} has been too quiet and I do not trust that.",
    "{x} keeps steering us away from the real question.",
    "I think {x} is on our side, their story is consistent.",
    "we should vote for {x} unless someone explains it.",
]
_PUSHES = [
    "{n}, what is your read on this?",
    "{n}, I would like to hear whether you agree.",
    "Please back this up, {n}, you saw the same thing.",
]


class CannedPolicy(Policy):
    """Returns replies from a fixed list in order (cycling), or from a callable."""

    def __init__(self, replies: Sequence[str] | Callable[[ChatPrompt], str], name: str = "canned"):
        self.name = name
        self._replies = replies
        self.calls: list[ChatPrompt] = []

    def generate(self, prompt: ChatPrompt, settings: GenerationSettings) -> Generation:
        self.calls.append(prompt)
        if callable(self._replies):
            return Generation(self._replies(prompt))
        return Generation(self._replies[(len(self.calls) - 1) % len(self._replies)])


class StubBackend(Policy):
    """Deterministic rule-based replies in the labeled formats the prompts ask for.

    Draws come from ``settings.rng`` when given, otherwise from a stream seeded
    by the backend name and the prompt text.
    """

    def __init__(self, name: str = "stub"):
        self.name = name

    def _rng(self, prompt: ChatPrompt, settings: GenerationSettings) -> np.random.Generator:
        if settings.rng is not None:
            return settings.rng
        digest = hashlib.sha256((self.name + "\x00" + prompt.flat_text()).encode()).digest()
        return np.random.default_rng(int.from_bytes(digest[:8], "little"))

    def generate(self, prompt: ChatPrompt, settings: GenerationSettings) -> Generation:
        text = prompt.flat_text()
        rng = self._rng(prompt, settings)
        me = (_SELF.search(text) or [None, "Player 1"])[1]
        nxt = (_NEXT.search(text) or [None, "everyone"])[1]
        others = sorted({p for p in _PLAYER.findall(text) if p not in (me, nxt)}) or ["someone"]
        x = others[int(rng.integers(len(others)))]

        def pick(bank):
            return bank[int(rng.integers(len(bank)))]

        if "Most Desired Response:" in text:
            return Generation(
                f"Strategic Analysis: As {me} ({self.name}) I need {nxt} to move the table toward {x}.\n"
                f"Most Desired Response: I agree, we should look hard at {x}.\n"
                f"Most Undesired Response: I think {me} is the one we should suspect."
            )
        if "Base utterance:" in text:
            base = text.split("Base utterance:", 1)[1].strip().splitlines()[0]
            return Generation(f"Analysis: make it firmer.\nResponse: {base} {pick(_PUSHES).format(n=nxt)}")
        claim = pick(_CLAIMS).format(x=x)
        return Generation(f"Response: {pick(_OPENERS)} {claim[0].upper()}{claim[1:]}")
