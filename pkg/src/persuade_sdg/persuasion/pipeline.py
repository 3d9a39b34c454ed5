"""Leader-side speaking pipeline: intent, base utterance, refinement, and the follower reward."""
from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, field
from typing import Sequence

from ..core import DialogueHistory, PublicState, player_name
from ..policy.base import ChatPrompt, GenerationSettings, Policy, UnsupportedCapability
from .prompts import assistant_prefix, load_template, parse_fields

logger = logging.getLogger(__name__)

MAX_REPROMPTS = 3


class PersuasionError(Exception):
    pass


class _ParseError(PersuasionError):
    def __init__(self, message: str, raw: str):
        super().__init__(message)
        self.raw = raw


class IntentParseError(_ParseError):
    pass


class BaseParseError(_ParseError):
    pass


class RefineParseError(_ParseError):
    pass


class GroupSampleError(PersuasionError):
    pass


class MissingFollowerRole(PersuasionError):
    """Reward measurement needs the follower's true role."""


class RewardMode(str, enum.Enum):
    FULL = "full"
    POSITIVE = "positive"
    NEGATIVE = "negative"


@dataclass
class SpeakingContext:
    rules: str
    public_state: PublicState
    dialogue: DialogueHistory
    speaker: int
    speaker_role: str
    next_speaker: int
    next_role: str | None = None
    private_knowledge: str = ""

    def __post_init__(self):
        if self.next_speaker == self.speaker:
            raise ValueError("the next speaker must differ from the speaker")

    @property
    def is_training(self) -> bool:
        return self.next_role is not None

    def game_state(self) -> str:
        state = self.public_state.render()
        return state + ("\n" + self.private_knowledge if self.private_knowledge else "")

    def bindings(self) -> dict[str, str]:
        return {
            "game_rules": self.rules,
            "player_name": player_name(self.speaker),
            "player_role": self.speaker_role,
            "game_state": self.game_state(),
            "dialog_history": self.dialogue.render(),
            "next_player_name": player_name(self.next_speaker),
        }

    def follower_bindings(self, candidate: str) -> dict[str, str]:
        """The follower's view one turn later: the candidate appended to the
        dialogue, public state left as it is now."""
        if self.next_role is None:
            raise MissingFollowerRole("the follower's role is only known in training instances")
        return {
            "game_rules": self.rules,
            "player_name": player_name(self.next_speaker),
            "player_role": self.next_role,
            "game_state": self.public_state.render(),
            "dialog_history": self.dialogue.extended(self.speaker, candidate).render(),
        }


@dataclass(frozen=True)
class Intent:
    desired: str
    undesired: str
    analysis: str = ""

    def __post_init__(self):
        if not self.desired.strip() or not self.undesired.strip():
            raise ValueError("both intent responses must be non-empty")


@dataclass
class CandidateGroup:
    base: str
    candidates: list[str]
    rewards: list[float] | None = None
    mode: RewardMode = RewardMode.FULL
    truncated: list[bool] = field(default_factory=list)

    def __post_init__(self):
        if len(self.candidates) < 2:
            raise ValueError("a group needs at least two candidates")
        if not all(c.strip() for c in self.candidates):
            raise ValueError("empty candidate")
        if self.rewards is not None and len(self.rewards) != len(self.candidates):
            raise ValueError("one reward per candidate")

    @property
    def n(self) -> int:
        return len(self.candidates)


def _settings(settings: GenerationSettings | None) -> GenerationSettings:
    return settings if settings is not None else GenerationSettings()


def _ask(policy: Policy, prompt: ChatPrompt, settings: GenerationSettings, labels,
         attempts: int) -> tuple[dict[str, str] | None, str]:
    raw = ""
    for _ in range(attempts):
        raw = policy.generate(prompt, settings).text
        fields = parse_fields(raw, labels)
        if all(l in fields for l in labels):
            return fields, raw
    return None, raw


def identify_intent(ctx: SpeakingContext, backend: Policy, settings: GenerationSettings | None = None,
                    reprompts: int = MAX_REPROMPTS) -> Intent:
    """Ask the backend which follower replies would help or hurt the speaker most."""
    prompt = load_template("intent").render(ctx.bindings())
    labels = ("Strategic Analysis", "Most Desired Response", "Most Undesired Response")
    raw = ""
    for _ in range(reprompts + 1):
        fields, raw = _ask(backend, prompt, _settings(settings), labels, 1)
        if fields and fields[labels[1]] != fields[labels[2]]:
            return Intent(fields[labels[1]], fields[labels[2]], fields[labels[0]])
    raise IntentParseError("could not parse an intent from the backend reply", raw)


def generate_base(ctx: SpeakingContext, backend: Policy, settings: GenerationSettings | None = None,
                  reprompts: int = MAX_REPROMPTS) -> str:
    prompt = load_template("base").render(ctx.bindings())
    fields, raw = _ask(backend, prompt, _settings(settings), ("Response",), reprompts + 1)
    if fields is None:
        raise BaseParseError("no Response field in the backend reply", raw)
    return fields["Response"]


def refine_prompt(ctx: SpeakingContext, base: str, refiner: Policy) -> ChatPrompt:
    """Refinement prompt; for policies that continue text rather than emit labels
    an assistant prefix ending at the response is appended."""
    if not base.strip():
        raise ValueError("base utterance must be non-empty")
    prompt = load_template("refine").render({**ctx.bindings(), "base_utterance": base})
    if not refiner.emits_labels:
        prompt = prompt.with_message("assistant", assistant_prefix())
    return prompt


def _refine_once(prompt: ChatPrompt, refiner: Policy, settings: GenerationSettings):
    gen = refiner.generate(prompt, settings)
    if refiner.emits_labels:
        text = parse_fields(gen.text, ("Analysis", "Response")).get("Response", "")
    else:
        text = gen.text.strip()
    return text, gen


def refine(ctx: SpeakingContext, base: str, refiner: Policy, settings: GenerationSettings | None = None,
           *, fallback: bool = True, reprompts: int = MAX_REPROMPTS) -> str:
    prompt = refine_prompt(ctx, base, refiner)
    raw = ""
    for _ in range(reprompts + 1):
        text, gen = _refine_once(prompt, refiner, _settings(settings))
        if text:
            return text
        raw = gen.text
    if fallback:
        logger.info("refinement unparseable for %s, using the base utterance",
                    player_name(ctx.speaker))
        return base
    raise RefineParseError("no Response field in the refiner reply", raw)


def sample_group(ctx: SpeakingContext, base: str, refiner: Policy, n: int,
                 settings: GenerationSettings | None = None,
                 reprompts: int = MAX_REPROMPTS) -> CandidateGroup:
    """Draw ``n`` refinements of ``base`` from the same prompt, in order."""
    if n < 2:
        raise ValueError("group sampling needs n >= 2")
    settings = _settings(settings)
    prompt = refine_prompt(ctx, base, refiner)
    candidates, truncated = [], []
    for slot in range(n):
        for _ in range(reprompts + 1):
            text, gen = _refine_once(prompt, refiner, settings)
            if text:
                candidates.append(text)
                truncated.append(gen.truncated)
                break
        else:
            raise GroupSampleError(f"slot {slot} failed to parse after {reprompts + 1} attempts")
    return CandidateGroup(base, candidates, truncated=truncated)


def measurement_prompt(ctx: SpeakingContext, candidate: str) -> ChatPrompt:
    return load_template("measure").render(ctx.follower_bindings(candidate), upto="target_response")


def follower_logprobs(candidate: str, intent: Intent, ctx: SpeakingContext,
                      measurer: Policy) -> tuple[float, float]:
    """log P_F(desired) and log P_F(undesired) after the candidate is spoken."""
    if not measurer.can_score:
        raise UnsupportedCapability(f"{measurer.name} cannot score text")
    prompt = measurement_prompt(ctx, candidate)
    return measurer.score(prompt, intent.desired).total, measurer.score(prompt, intent.undesired).total


def combine(lp_desired: float, lp_undesired: float, mode: RewardMode | str) -> float:
    mode = RewardMode(mode)
    if mode is RewardMode.FULL:
        return lp_desired - lp_undesired
    if mode is RewardMode.POSITIVE:
        return lp_desired
    return -lp_undesired


def measure_reward(candidate: str, intent: Intent, ctx: SpeakingContext, measurer: Policy,
                   mode: RewardMode | str = RewardMode.FULL) -> float:
    mode = RewardMode(mode)
    if not measurer.can_score:
        raise UnsupportedCapability(f"{measurer.name} cannot score text")
    prompt = measurement_prompt(ctx, candidate)
    pos = measurer.score(prompt, intent.desired).total if mode is not RewardMode.NEGATIVE else 0.0
    neg = measurer.score(prompt, intent.undesired).total if mode is not RewardMode.POSITIVE else 0.0
    return combine(pos, neg, mode)


def measure_group(group: CandidateGroup, intent: Intent, ctx: SpeakingContext, measurer: Policy,
                  mode: RewardMode | str = RewardMode.FULL) -> CandidateGroup:
    group.mode = RewardMode(mode)
    group.rewards = [measure_reward(c, intent, ctx, measurer, mode) for c in group.candidates]
    return group


def all_modes(candidate: str, intent: Intent, ctx: SpeakingContext, measurer: Policy) -> dict[str, float]:
    pos, neg = follower_logprobs(candidate, intent, ctx, measurer)
    return {m.value: combine(pos, neg, m) for m in RewardMode}


__all__: Sequence[str] = [
    "PersuasionError", "IntentParseError", "BaseParseError", "RefineParseError", "GroupSampleError",
    "MissingFollowerRole", "RewardMode", "SpeakingContext", "Intent", "CandidateGroup",
    "identify_intent", "generate_base", "refine_prompt", "refine", "sample_group",
    "measurement_prompt", "follower_logprobs", "combine", "measure_reward", "measure_group",
    "all_modes",
]
