"""Five-player One Night Ultimate Werewolf with a two-card center."""
from __future__ import annotations

import enum
from collections import Counter
from typing import Mapping

from .core import (
    GameEngine,
    GameEvent,
    GameOutcome,
    IllegalBallot,
    IllegalPhase,
    IllegalTarget,
    Team,
    player_name,
)


class OnuwRole(str, enum.Enum):
    WEREWOLF = "Werewolf"
    VILLAGER = "Villager"
    SEER = "Seer"
    ROBBER = "Robber"
    TROUBLEMAKER = "Troublemaker"
    INSOMNIAC = "Insomniac"


DECK = [OnuwRole.WEREWOLF, OnuwRole.VILLAGER, OnuwRole.VILLAGER, OnuwRole.SEER,
        OnuwRole.ROBBER, OnuwRole.TROUBLEMAKER, OnuwRole.INSOMNIAC]
NIGHT_ORDER = [OnuwRole.WEREWOLF, OnuwRole.SEER, OnuwRole.ROBBER,
               OnuwRole.TROUBLEMAKER, OnuwRole.INSOMNIAC]
CENTER = "center"

RULES = """\
One Night Ultimate Werewolf, five players. The seven cards are one Werewolf, two Villagers, a Seer, a Robber, \
a Troublemaker and an Insomniac; five are dealt and two stay face down in the center. The Werewolf card is always dealt to a player.
Night, in this order, each acting on the card they were dealt: the Werewolf wakes and sees that no other Werewolf is present; \
the Seer may look at another player's card or at both center cards; the Robber may swap cards with another player and look at the new card; \
the Troublemaker swaps the cards of two other players without looking; the Insomniac looks at their own card at the end of the night.
Your team is decided by the card you hold at dawn: the Werewolf card is Team Werewolf, every other card is Team Village.
Day: each player speaks once in ascending id order, then everyone votes for another player. \
Every player tied for the most votes is eliminated and reveals their card. \
Team Village wins if the Werewolf is eliminated; otherwise Team Werewolf wins."""


def team_of(role: OnuwRole | str) -> Team:
    return Team.WEREWOLF if OnuwRole(role) is OnuwRole.WEREWOLF else Team.VILLAGE


class OnuwGame(GameEngine):
    game = "onuw"
    n_players = 5
    speech_phases = ("day_discussion",)

    def _check_config(self, config):
        config = dict(config)
        standard_tie = bool(config.pop("standard_tie", False))
        if config:
            raise TypeError(f"unexpected engine options: {sorted(config)}")
        return {"standard_tie": standard_tie}

    def _reset(self):
        self.initial: dict[int, OnuwRole] = {}
        self.current: dict[int, OnuwRole] = {}
        self.center: list[OnuwRole] = []
        self._night_queue: list[OnuwRole] = []
        self._believed: dict[int, OnuwRole] = {}
        self._notes: dict[int, list[str]] = {}
        self._seen: dict[int, dict] = {}
        self.eliminated: list[int] = []

    def _deal(self):
        wolf_seat = int(self.rng.integers(self.n_players)) + 1
        rest = [r for r in DECK]
        rest.remove(OnuwRole.WEREWOLF)
        order = self.rng.permutation(len(rest))
        cards = [rest[i] for i in order]
        others = [p for p in self.players if p != wolf_seat]
        initial = {wolf_seat: OnuwRole.WEREWOLF.value}
        initial.update({p: cards[i].value for i, p in enumerate(others)})
        return {"initial": dict(sorted(initial.items())),
                "center": [c.value for c in cards[len(others):]]}

    def _deal_from(self, roles: Mapping):
        initial = {int(p): OnuwRole(r).value for p, r in roles["initial"].items()}
        center = [OnuwRole(r).value for r in roles["center"]]
        if sorted(initial) != list(self.players) or len(center) != 2:
            raise ValueError("deal needs five player cards and two center cards")
        if sorted(list(initial.values()) + center) != sorted(r.value for r in DECK):
            raise ValueError("deal must use the standard seven-card deck")
        if OnuwRole.WEREWOLF.value in center:
            raise ValueError("the Werewolf card must be dealt to a player")
        return {"initial": initial, "center": center}

    def _apply(self, ev: GameEvent):
        p = ev.payload
        if ev.kind == "deal":
            self.initial = {int(k): OnuwRole(v) for k, v in p["initial"].items()}
            self.current = dict(self.initial)
            self._believed = dict(self.initial)
            self.center = [OnuwRole(c) for c in p["center"]]
            present = set(self.initial.values())
            self._night_queue = [r for r in NIGHT_ORDER if r in present]
            self._notes = {pid: [] for pid in self.players}
            self.phase = "night"
        elif ev.kind == "night_action":
            role = OnuwRole(p["role"])
            self._night_queue.remove(role)
            actor = ev.actor
            if role is OnuwRole.SEER and p.get("seen"):
                self._seen[actor] = dict(p["seen"])
            elif role is OnuwRole.ROBBER and p.get("target") is not None:
                t = p["target"]
                self.current[actor], self.current[t] = self.current[t], self.current[actor]
                self._believed[actor] = self.current[actor]
            elif role is OnuwRole.TROUBLEMAKER and p.get("a") is not None:
                a, b = p["a"], p["b"]
                self.current[a], self.current[b] = self.current[b], self.current[a]
            elif role is OnuwRole.INSOMNIAC:
                self._believed[actor] = OnuwRole(p["current"])
            self._notes[actor].append(p["note"])
            if not self._night_queue:
                self.phase = "day_discussion"
        elif ev.kind == "vote":
            self._discussion = []
            self.eliminated = list(p["eliminated"])
            self.alive -= set(self.eliminated)
        elif ev.kind == "reveal":
            pass
        else:
            super()._apply(ev)

    # --- queries --------------------------------------------------------------------
    def role_of(self, pid: int) -> OnuwRole:
        self._check_player(pid)
        return self.current[pid]

    def believed_role(self, pid: int) -> OnuwRole:
        self._check_player(pid)
        return self._believed[pid]

    def team_of_player(self, pid: int) -> Team:
        return team_of(self.role_of(pid))

    def holder(self, role: OnuwRole | str, *, initial: bool = False) -> int | None:
        role = OnuwRole(role)
        board = self.initial if initial else self.current
        return next((p for p in self.players if board[p] is role), None)

    def cards(self) -> list[OnuwRole]:
        return [self.current[p] for p in self.players] + list(self.center)

    @property
    def next_night_role(self) -> OnuwRole | None:
        return self._night_queue[0] if self._night_queue else None

    def knowledge(self, viewer: int) -> dict:
        known = {viewer: self._believed[viewer].value}
        for k, v in self._seen.get(viewer, {}).items():
            if k != CENTER:
                known[int(k)] = v
        return {"known_roles": known, "known_alignments": {},
                "notes": list(self._notes[viewer])}

    # --- night ----------------------------------------------------------------------
    def _night_turn(self, role: OnuwRole) -> int:
        if self.over or self.phase != "night":
            raise IllegalPhase("night actions are over")
        if role not in self.initial.values():
            raise IllegalPhase(f"no player was dealt the {role.value}")
        if self.next_night_role is not role:
            done = role not in self._night_queue
            raise IllegalPhase(f"{role.value} already acted" if done
                               else f"it is the {self.next_night_role.value}'s turn")
        return self.holder(role, initial=True)

    def _other(self, actor: int, target: int):
        if target not in self.players:
            raise IllegalTarget(f"no such player: {target!r}")
        if target == actor:
            raise IllegalTarget("must choose another player")

    def night_werewolf(self) -> dict:
        actor = self._night_turn(OnuwRole.WEREWOLF)
        self._record("night_action", actor=actor, visible_to=(actor,), payload={
            "role": OnuwRole.WEREWOLF.value, "alone": True,
            "note": "You are the only Werewolf among the players.",
        })
        return {"alone": True}

    def night_seer(self, player: int | None = None, *, center: bool = False) -> dict:
        actor = self._night_turn(OnuwRole.SEER)
        if player is not None and center:
            raise IllegalTarget("look at one player or at the center, not both")
        if player is not None:
            self._other(actor, player)
            seen = {player: self.current[player].value}
            note = f"You looked at {player_name(player)} and saw the {seen[player]}."
        elif center:
            seen = {CENTER: [c.value for c in self.center]}
            note = "You looked at the center and saw the " + " and the ".join(seen[CENTER]) + "."
        else:
            seen, note = {}, "You chose not to look at any card."
        self._record("night_action", actor=actor, visible_to=(actor,), payload={
            "role": OnuwRole.SEER.value, "target": CENTER if center else player,
            "seen": seen, "note": note,
        })
        return dict(seen)

    def night_robber(self, target: int | None = None) -> dict:
        actor = self._night_turn(OnuwRole.ROBBER)
        if target is None:
            self._record("night_action", actor=actor, visible_to=(actor,), payload={
                "role": OnuwRole.ROBBER.value, "target": None, "note": "You chose not to rob.",
            })
            return {}
        self._other(actor, target)
        new_role = self.current[target].value
        self._record("night_action", actor=actor, visible_to=(actor,), payload={
            "role": OnuwRole.ROBBER.value, "target": target, "new_role": new_role,
            "note": f"You swapped cards with {player_name(target)}; you are now the {new_role}.",
        })
        return {"new_role": new_role}

    def night_troublemaker(self, a: int, b: int) -> dict:
        actor = self._night_turn(OnuwRole.TROUBLEMAKER)
        self._other(actor, a)
        self._other(actor, b)
        if a == b:
            raise IllegalTarget("must swap two different players")
        self._record("night_action", actor=actor, visible_to=(actor,), payload={
            "role": OnuwRole.TROUBLEMAKER.value, "a": a, "b": b,
            "note": f"You swapped the cards of {player_name(a)} and {player_name(b)}.",
        })
        return {}

    def night_insomniac(self) -> dict:
        actor = self._night_turn(OnuwRole.INSOMNIAC)
        now = self.current[actor].value
        self._record("night_action", actor=actor, visible_to=(actor,), payload={
            "role": OnuwRole.INSOMNIAC.value, "current": now,
            "note": f"At the end of the night your card is the {now}.",
        })
        return {"current": now}

    # --- day ------------------------------------------------------------------------
    def resolve_vote(self, ballots: Mapping[int, int]) -> GameOutcome:
        if self.over or self.phase != "day_discussion":
            raise IllegalPhase("voting happens after the night")
        if self._discussion:
            raise IllegalPhase("discussion is still in progress")
        if sorted(ballots) != list(self.players):
            raise IllegalBallot("every player must vote")
        for voter, choice in ballots.items():
            if choice == voter:
                raise IllegalBallot("self-votes are not allowed")
            if choice not in self.players:
                raise IllegalBallot(f"no such player: {choice!r}")
        tallies = Counter(ballots.values())
        top = max(tallies.values())
        out = sorted(p for p, n in tallies.items() if n == top)
        if self.config["standard_tie"] and top == 1:
            out = []
        self._record("vote", payload={
            "ballots": {v: ballots[v] for v in self.players},
            "tallies": {p: tallies[p] for p in sorted(tallies)},
            "eliminated": out,
        })
        for p in out:
            self._record("reveal", payload={"player": p, "role": self.current[p].value})
        return self._finish(self.check_victory().winner)

    def check_victory(self) -> GameOutcome | None:
        if self.phase != "day_discussion" and not self.over:
            return None
        wolf = self.holder(OnuwRole.WEREWOLF)
        winner = Team.VILLAGE if wolf in self.eliminated else Team.WEREWOLF
        return GameOutcome(winner, self.round)


def final_roles_line(initial: Mapping[int, str], current: Mapping[int, str]) -> str:
    parts = []
    for pid in sorted(initial):
        a, b = str(getattr(initial[pid], "value", initial[pid])), str(getattr(current[pid], "value", current[pid]))
        parts.append(f"Player {pid} ({b})" if a == b else f"Player {pid} (now {b})")
    return ", ".join(parts) + "."


def narrate(events, roles=None) -> list[str]:
    lines = []
    initial: dict[int, str] = {}
    board: dict[int, str] = {}
    for e in events:
        if not isinstance(e, GameEvent):
            e = GameEvent.from_dict(e)
        p = e.payload
        if e.kind == "deal":
            initial = {int(k): v for k, v in p["initial"].items()}
            board = dict(initial)
        elif e.kind == "night_action":
            who = e.actor
            role = p["role"]
            if role == "Seer" and p.get("seen"):
                if p["target"] == CENTER:
                    a, b = p["seen"][CENTER]
                    lines.append(f"Player {who} (Seer) examines the center, sees {a} and {b}.")
                else:
                    t = p["target"]
                    lines.append(f"Player {who} (Seer) examines Player {t}, sees {p['seen'][str(t)]} role.")
            elif role == "Robber" and p.get("target") is not None:
                t = p["target"]
                lines.append(f"Player {who} (Robber) swaps their Robber role with "
                             f"Player {t}'s {board[t]} role.")
                board[who], board[t] = board[t], board[who]
                lines.append(f"Player {who} views their new role: {p['new_role']}.")
            elif role == "Troublemaker":
                a, b = p["a"], p["b"]

                def tag(x):
                    return f" (now {board[x]})" if board[x] != initial[x] else ""
                lines.append(f"Player {who} (Troublemaker) swaps Player {a}'s role{tag(a)} "
                             f"with Player {b}'s role{tag(b)}.")
                board[a], board[b] = board[b], board[a]
            elif role == "Insomniac":
                lines.append(f"Player {who} (Insomniac) wakes and sees: {p['current']}.")
        elif e.kind == "reveal":
            lines.append(f"Player {p['player']} is eliminated and reveals: {p['role']}.")
        elif e.kind == "victory":
            lines.append(f"Game over: {p['winner']} wins.")
    return lines
