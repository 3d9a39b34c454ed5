"""Shared game abstractions: players, teams, dialogue, events, views and outcomes.

Every engine is event sourced. State changes happen only inside ``_apply``,
which consumes :class:`GameEvent` records, so a match can be rebuilt from its
event log with :meth:`GameEngine.from_events`.
"""
from __future__ import annotations

import copy
import enum
from dataclasses import dataclass, field
from typing import Any, ClassVar, Iterable, Iterator, Mapping, Sequence

import numpy as np

ROUND_CAP = 20


class GameError(Exception):
    """Base class for rule violations raised by the engines."""


class IllegalTarget(GameError):
    pass


class IllegalBallot(GameError):
    pass


class IllegalProposal(GameError):
    pass


class IllegalPhase(GameError):
    pass


class UnknownPlayer(GameError):
    pass


class Team(str, enum.Enum):
    VILLAGE = "village"
    WEREWOLF = "werewolf"
    GOOD = "good"
    EVIL = "evil"


class OutcomeReason(str, enum.Enum):
    WIN_CONDITION = "win_condition"
    ROUND_CAP_ABORT = "round_cap_abort"


@dataclass(frozen=True)
class GameOutcome:
    winner: Team | None
    rounds: int
    reason: OutcomeReason = OutcomeReason.WIN_CONDITION

    def __post_init__(self):
        if self.reason is OutcomeReason.WIN_CONDITION and self.winner is None:
            raise ValueError("a decided game needs a winner")

    def to_dict(self) -> dict:
        return {
            "winner": self.winner.value if self.winner else None,
            "rounds": self.rounds,
            "reason": self.reason.value,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> GameOutcome:
        winner = Team(d["winner"]) if d.get("winner") else None
        return cls(winner, int(d["rounds"]), OutcomeReason(d["reason"]))


def new_rng(seed: int) -> np.random.Generator:
    """Per-match random stream. Identical seeds give identical draws."""
    return np.random.Generator(np.random.PCG64(int(seed) & (2**64 - 1)))


def choose(rng: np.random.Generator, options: Sequence):
    """Uniform choice that keeps the element's Python type."""
    if not options:
        raise ValueError("cannot choose from an empty sequence")
    return options[int(rng.integers(len(options)))]


def player_name(pid: int) -> str:
    return f"Player {pid}"


@dataclass(frozen=True)
class Utterance:
    speaker: int
    text: str
    turn: int

    def __post_init__(self):
        if not self.text:
            raise ValueError("utterance text must be non-empty")
        if self.turn < 1:
            raise ValueError("turns are numbered from 1")


class DialogueHistory:
    """Append-only sequence of utterances with contiguous turn numbers."""

    def __init__(self, entries: Iterable[Utterance | tuple[int, str]] = ()):
        self._entries: list[Utterance] = []
        for e in entries:
            if isinstance(e, Utterance):
                self.append(e.speaker, e.text)
            else:
                self.append(*e)

    def append(self, speaker: int, text: str) -> Utterance:
        u = Utterance(speaker, text, len(self._entries) + 1)
        self._entries.append(u)
        return u

    @property
    def entries(self) -> tuple[Utterance, ...]:
        return tuple(self._entries)

    def __len__(self) -> int:
        return len(self._entries)

    def __iter__(self) -> Iterator[Utterance]:
        return iter(tuple(self._entries))

    def __getitem__(self, i):
        return self._entries[i]

    def __eq__(self, other) -> bool:
        return isinstance(other, DialogueHistory) and self._entries == other._entries

    def prefix(self, n: int) -> DialogueHistory:
        return DialogueHistory(self._entries[:n])

    def extended(self, speaker: int, text: str) -> DialogueHistory:
        out = DialogueHistory(self._entries)
        out.append(speaker, text)
        return out

    def render(self) -> str:
        return "\n".join(f"{player_name(u.speaker)}: {u.text}" for u in self._entries)

    def to_list(self) -> list[dict]:
        return [{"speaker": u.speaker, "text": u.text} for u in self._entries]

    @classmethod
    def from_list(cls, items: Iterable[Mapping]) -> DialogueHistory:
        return cls((int(d["speaker"]), d["text"]) for d in items)


@dataclass(frozen=True)
class GameEvent:
    """One entry of the match log.

    ``visible_to`` is ``None`` for public events, otherwise the ids that may
    see the event (an empty tuple hides it from every player).
    """

    seq: int
    round: int
    phase: str
    kind: str
    actor: int | None = None
    payload: Mapping[str, Any] = field(default_factory=dict)
    visible_to: tuple[int, ...] | None = None

    @property
    def public(self) -> bool:
        return self.visible_to is None

    def visible(self, viewer: int) -> bool:
        return self.visible_to is None or viewer in self.visible_to

    def to_dict(self) -> dict:
        return {
            "seq": self.seq,
            "round": self.round,
            "phase": self.phase,
            "kind": self.kind,
            "actor": self.actor,
            "payload": _jsonable(self.payload),
            "visible_to": None if self.visible_to is None else list(self.visible_to),
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> GameEvent:
        vis = d.get("visible_to")
        return cls(
            seq=int(d["seq"]),
            round=int(d["round"]),
            phase=d["phase"],
            kind=d["kind"],
            actor=d.get("actor"),
            payload=copy.deepcopy(dict(d.get("payload", {}))),
            visible_to=None if vis is None else tuple(vis),
        )


def _jsonable(x):
    if isinstance(x, enum.Enum):
        return x.value
    if isinstance(x, Mapping):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    return x


# Event kinds that are part of the public record but not of the dialogue.
_NON_STATE_KINDS = {"speech", "deal", "discussion", "nightfall"}


@dataclass
class PublicState:
    """What every player can observe: alive set, phase and public outcomes."""

    game: str
    round: int
    phase: str
    alive: tuple[int, ...]
    revealed: list[dict] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "game": self.game,
            "round": self.round,
            "phase": self.phase,
            "alive": list(self.alive),
            "revealed": _jsonable(self.revealed),
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> PublicState:
        return cls(d["game"], int(d["round"]), d["phase"], tuple(d["alive"]),
                   copy.deepcopy(list(d.get("revealed", []))))

    def render(self) -> str:
        lines = [
            f"Round {self.round}, phase: {self.phase.replace('_', ' ')}.",
            "Alive: " + ", ".join(player_name(p) for p in self.alive) + ".",
        ]
        for rec in self.revealed:
            lines.append(_render_public_record(rec))
        return "\n".join(lines)


def _render_public_record(rec: Mapping) -> str:
    body = ", ".join(f"{k}={v}" for k, v in rec.get("payload", {}).items())
    return f"[round {rec['round']}] {rec['kind']}: {body}"


@dataclass
class View:
    """A single player's observation: public state plus role-granted knowledge."""

    viewer: int
    role: str
    public: PublicState
    knowledge: dict
    private_events: list[dict]

    def to_dict(self) -> dict:
        return {
            "viewer": self.viewer,
            "role": self.role,
            "public": self.public.to_dict(),
            "knowledge": _jsonable(self.knowledge),
            "private_events": self.private_events,
        }

    def render_private(self) -> str:
        lines = []
        for pid, role in sorted(self.knowledge.get("known_roles", {}).items()):
            if pid != self.viewer:
                lines.append(f"You know {player_name(pid)} is a {role}.")
        for pid, team in sorted(self.knowledge.get("known_alignments", {}).items()):
            if pid != self.viewer:
                lines.append(f"You know {player_name(pid)} is {_jsonable(team)}.")
        lines.extend(self.knowledge.get("notes", []))
        return "\n".join(lines)

    def render(self) -> str:
        private = self.render_private()
        return self.public.render() + ("\n" + private if private else "")


class GameEngine:
    """Common machinery for the three engines.

    Subclasses define ``game``, ``n_players``, ``_reset`` (blank state),
    ``_deal`` (role assignment from the rng) and ``_apply`` (event fold).
    """

    game: ClassVar[str]
    n_players: ClassVar[int]
    speech_phases: ClassVar[tuple[str, ...]] = ()

    def __init__(self, seed: int = 0, *, roles: Mapping[int, Any] | None = None, **config):
        self.seed = int(seed)
        self.rng = new_rng(self.seed)
        self.config = self._check_config(config)
        self._blank()
        deal = self._deal() if roles is None else self._deal_from(roles)
        self._record("deal", payload=deal, visible_to=())

    # --- construction ---------------------------------------------------------------
    def _check_config(self, config: Mapping) -> dict:
        if config:
            raise TypeError(f"unexpected engine options: {sorted(config)}")
        return {}

    def _blank(self):
        self.events: list[GameEvent] = []
        self.dialogue = DialogueHistory()
        self.round = 1
        self.phase = "setup"
        self.outcome: GameOutcome | None = None
        self.alive: set[int] = set(self.players)
        self._discussion: list[int] = []
        self._reset()

    @classmethod
    def from_events(cls, events: Iterable[GameEvent | Mapping], seed: int = 0, **config):
        """Rebuild the state by folding a recorded event log.

        The rebuilt engine's rng starts fresh; recorded events already carry
        every random outcome, so the fold itself draws nothing.
        """
        obj = cls.__new__(cls)
        obj.seed = int(seed)
        obj.rng = new_rng(obj.seed)
        obj.config = obj._check_config(config)
        obj._blank()
        for ev in events:
            if not isinstance(ev, GameEvent):
                ev = GameEvent.from_dict(ev)
            obj.events.append(ev)
            obj._apply(ev)
        return obj

    @property
    def players(self) -> tuple[int, ...]:
        return tuple(range(1, self.n_players + 1))

    def _record(self, kind: str, *, payload: Mapping | None = None, actor: int | None = None,
                visible_to: Iterable[int] | None = None) -> GameEvent:
        ev = GameEvent(
            seq=len(self.events),
            round=self.round,
            phase=self.phase,
            kind=kind,
            actor=actor,
            payload=_jsonable(dict(payload or {})),
            visible_to=None if visible_to is None else tuple(sorted(visible_to)),
        )
        self.events.append(ev)
        self._apply(ev)
        return ev

    def _apply(self, ev: GameEvent):
        if ev.kind == "speech":
            self.dialogue.append(ev.actor, ev.payload["text"])
            if self._discussion and self._discussion[0] == ev.actor:
                self._discussion.pop(0)
        elif ev.kind == "discussion":
            self._discussion = list(ev.payload["order"])
        elif ev.kind == "victory":
            self.outcome = GameOutcome.from_dict(ev.payload)
            self.phase = "over"
        else:
            raise ValueError(f"unknown event kind {ev.kind!r}")

    # --- queries --------------------------------------------------------------------
    @property
    def over(self) -> bool:
        return self.outcome is not None

    def _check_player(self, pid: int):
        if pid not in self.players:
            raise UnknownPlayer(f"no such player: {pid!r}")

    def role_of(self, pid: int):
        """True hidden role (the current card in games where roles move)."""
        raise NotImplementedError

    def believed_role(self, pid: int):
        """The role this player would state for themselves."""
        return self.role_of(pid)

    def team_of_player(self, pid: int) -> Team:
        raise NotImplementedError

    def knowledge(self, viewer: int) -> dict:
        raise NotImplementedError

    def public_state(self) -> PublicState:
        revealed = [
            {"round": e.round, "kind": e.kind, "payload": dict(e.payload)}
            for e in self.events
            if e.public and e.kind not in _NON_STATE_KINDS
        ]
        return PublicState(self.game, self.round, self.phase, tuple(sorted(self.alive)), revealed)

    def public_view(self, viewer: int) -> View:
        self._check_player(viewer)
        private = [
            e.to_dict() for e in self.events
            if not e.public and e.visible(viewer)
        ]
        return View(viewer, _jsonable(self.believed_role(viewer)), self.public_state(),
                    self.knowledge(viewer), private)

    # --- discussion -----------------------------------------------------------------
    def discussion_order(self) -> list[int]:
        if not self.alive:
            raise IllegalPhase("no surviving players to speak")
        return sorted(self.alive)

    def begin_discussion(self) -> list[int]:
        if self.over:
            raise IllegalPhase("game is over")
        if self.phase not in self.speech_phases:
            raise IllegalPhase(f"no discussion during phase {self.phase!r}")
        order = self.discussion_order()
        self._record("discussion", payload={"order": order})
        return order

    @property
    def pending_speakers(self) -> list[int]:
        return list(self._discussion)

    def speak(self, pid: int, text: str) -> Utterance:
        self._check_player(pid)
        if self.over:
            raise IllegalPhase("game is over")
        if pid not in self.alive:
            raise IllegalPhase(f"{player_name(pid)} is not alive")
        if self.phase not in self.speech_phases:
            raise IllegalPhase(f"no speeches during phase {self.phase!r}")
        if self._discussion and self._discussion[0] != pid:
            raise IllegalPhase(f"it is {player_name(self._discussion[0])}'s turn to speak")
        if not text:
            raise ValueError("empty utterance")
        self._record("speech", actor=pid, payload={"text": text})
        return self.dialogue[-1]

    def abort_round_cap(self) -> GameOutcome:
        """End the match without a winner; such matches are left out of win rates."""
        if self.over:
            raise IllegalPhase("game is over")
        outcome = GameOutcome(None, self.round, OutcomeReason.ROUND_CAP_ABORT)
        self._record("victory", payload=outcome.to_dict())
        return self.outcome

    def _finish(self, winner: Team):
        outcome = GameOutcome(winner, self.round)
        self._record("victory", payload=outcome.to_dict())
        return self.outcome

    def event_log(self) -> list[dict]:
        return [e.to_dict() for e in self.events]
