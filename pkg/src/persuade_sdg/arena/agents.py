"""Agent specifications and the per-match agents built from them."""
from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Mapping, Sequence

import numpy as np

from ..core import View, player_name
from ..persuasion import (
    Intent,
    IntentParseError,
    SpeakingContext,
    generate_base,
    identify_intent,
    refine,
)
from ..policy import (
    GenerationSettings,
    Policy,
    RemoteChatPolicy,
    RemoteEndpoint,
    StubBackend,
    ToyPolicy,
    load_checkpoint,
)


class Framework(str, enum.Enum):
    SCRIPTED = "scripted"
    RANDOM = "random"
    VANILLA = "vanilla"
    REFINED = "refined"


class AgentError(Exception):
    pass


# Scripted decision tables: each maps (kind, options, view) to one option.
def _first(kind, options, view):
    return options[0]


def _last(kind, options, view):
    return options[-1]


SCRIPTS: dict[str, Callable] = {"first": _first, "last": _last}


@dataclass(frozen=True)
class AgentSpec:
    """One entry of an agent pool.

    ``backend`` and ``refiner`` are bindings such as ``{"kind": "stub", "name": "a"}``,
    ``{"kind": "remote", "base_url": ..., "model": ...}`` or
    ``{"kind": "toy", "checkpoint": "refiner.json"}``.
    """

    id: str
    framework: Framework = Framework.SCRIPTED
    backend: Mapping[str, Any] | None = None
    refiner: Mapping[str, Any] | None = None
    script: str | Callable | None = None
    temperature: float = 1.0
    max_tokens: int = 48

    def __post_init__(self):
        object.__setattr__(self, "framework", Framework(self.framework))
        if self.framework is Framework.REFINED and self.refiner is None:
            raise ValueError(f"agent {self.id!r}: the refined framework needs a refiner")
        if self.framework in (Framework.VANILLA, Framework.REFINED) and self.backend is None:
            raise ValueError(f"agent {self.id!r}: a language agent needs a backend")
        if self.framework is Framework.SCRIPTED:
            script = self.script or "first"
            if isinstance(script, str) and script not in SCRIPTS:
                raise ValueError(f"agent {self.id!r}: unknown script {script!r}")
            object.__setattr__(self, "script", script)

    def to_dict(self) -> dict:
        if callable(self.script):
            raise ValueError(f"agent {self.id!r} has a code script and cannot be serialized")
        d = {"id": self.id, "framework": self.framework.value}
        for k in ("backend", "refiner", "script"):
            if getattr(self, k) is not None:
                d[k] = dict(getattr(self, k)) if isinstance(getattr(self, k), Mapping) else getattr(self, k)
        if self.framework in (Framework.VANILLA, Framework.REFINED):
            d["temperature"] = self.temperature
            d["max_tokens"] = self.max_tokens
        return d

    @classmethod
    def from_dict(cls, d: Mapping) -> AgentSpec:
        allowed = {"id", "framework", "backend", "refiner", "script", "temperature", "max_tokens"}
        extra = set(d) - allowed
        if extra:
            raise ValueError(f"unknown agent fields: {sorted(extra)}")
        return cls(**dict(d))


def load_pool(path) -> list[AgentSpec]:
    doc = json.loads(Path(path).read_text())
    items = doc["agents"] if isinstance(doc, Mapping) else doc
    pool = [AgentSpec.from_dict(d) for d in items]
    if not pool:
        raise ValueError("agent pool is empty")
    if len({a.id for a in pool}) != len(pool):
        raise ValueError("agent ids must be unique")
    return pool


def save_pool(path, pool: Sequence[AgentSpec]):
    Path(path).write_text(json.dumps({"agents": [a.to_dict() for a in pool]}, indent=2))


def build_policy(binding: Mapping[str, Any]) -> Policy:
    kind = binding.get("kind")
    if kind == "stub":
        return StubBackend(binding.get("name", "stub"))
    if kind == "remote":
        ep = RemoteEndpoint(binding["base_url"], binding["model"],
                            api_key_env=binding.get("api_key_env", "SDG_API_KEY"),
                            max_retries=int(binding.get("max_retries", 3)),
                            backoff=float(binding.get("backoff", 1.0)),
                            audit_path=binding.get("audit_path"))
        return RemoteChatPolicy(ep, binding.get("name"))
    if kind == "toy":
        params, _ = load_checkpoint(binding["checkpoint"])
        return ToyPolicy(params, binding.get("name", Path(binding["checkpoint"]).stem))
    raise ValueError(f"unknown policy binding {binding!r}")


@dataclass
class Speech:
    text: str
    base: str | None = None
    intent: Intent | None = None


class Agent:
    """Plays one seat for one match."""

    def __init__(self, spec: AgentSpec, seat: int, rng: np.random.Generator):
        self.spec = spec
        self.seat = seat
        self.rng = rng

    def decide(self, kind: str, options: Sequence, view: View):
        raise NotImplementedError

    def speak(self, ctx: SpeakingContext, *, want_intent: bool = False) -> Speech:
        raise NotImplementedError


class ScriptedAgent(Agent):
    def __init__(self, spec, seat, rng):
        super().__init__(spec, seat, rng)
        self.table = spec.script if callable(spec.script) else SCRIPTS[spec.script]

    def decide(self, kind, options, view):
        return self.table(kind, list(options), view)

    def speak(self, ctx, *, want_intent=False):
        return Speech(f"I am {player_name(self.seat)} and I will follow the plan.")


class RandomAgent(Agent):
    """Uniform over legal options; says a fixed line."""

    def decide(self, kind, options, view):
        return options[int(self.rng.integers(len(options)))]

    def speak(self, ctx, *, want_intent=False):
        return Speech(f"I am {player_name(self.seat)} and I am still thinking.")


class LanguageAgent(RandomAgent):
    """Speaks through the backend (and refiner, when bound); acts uniformly at random."""

    def __init__(self, spec, seat, rng, backend: Policy, refiner: Policy | None = None):
        super().__init__(spec, seat, rng)
        self.backend = backend
        self.refiner = refiner

    def _settings(self):
        return GenerationSettings(self.spec.temperature, self.spec.max_tokens, self.rng)

    def speak(self, ctx, *, want_intent=False):
        intent = None
        if want_intent:
            try:
                intent = identify_intent(ctx, self.backend, self._settings())
            except IntentParseError:
                intent = None
        base = generate_base(ctx, self.backend, self._settings())
        text = base
        if self.refiner is not None:
            text = refine(ctx, base, self.refiner, self._settings())
        return Speech(text, base, intent)


@dataclass
class PolicyCache:
    """Shares built policies across the seats of a match (policies are read-only)."""

    built: dict = field(default_factory=dict)

    def get(self, binding: Mapping) -> Policy:
        key = json.dumps(dict(binding), sort_keys=True)
        if key not in self.built:
            self.built[key] = build_policy(binding)
        return self.built[key]


def make_agent(spec: AgentSpec, seat: int, rng: np.random.Generator,
               cache: PolicyCache | None = None) -> Agent:
    cache = cache or PolicyCache()
    if spec.framework is Framework.SCRIPTED:
        return ScriptedAgent(spec, seat, rng)
    if spec.framework is Framework.RANDOM:
        return RandomAgent(spec, seat, rng)
    backend = cache.get(spec.backend)
    refiner = cache.get(spec.refiner) if spec.framework is Framework.REFINED else None
    return LanguageAgent(spec, seat, rng, backend, refiner)
