"""Seven-player Werewolf: night kill/protect/probe, announcement, one speech each, day vote."""
from __future__ import annotations

import enum
from collections import Counter
from dataclasses import dataclass
from typing import Mapping

from .core import (
    GameEngine,
    GameEvent,
    GameOutcome,
    IllegalBallot,
    IllegalPhase,
    IllegalTarget,
    Team,
    choose,
    player_name,
)


class WerewolfRole(str, enum.Enum):
    WEREWOLF = "Werewolf"
    SEER = "Seer"
    GUARDIAN = "Guardian"
    VILLAGER = "Villager"


ROLE_DECK = (
    [WerewolfRole.WEREWOLF] * 2
    + [WerewolfRole.SEER, WerewolfRole.GUARDIAN]
    + [WerewolfRole.VILLAGER] * 3
)

TIE_RULES = ("random", "no-elimination")

RULES = """\
Werewolf, seven players: two Werewolves, one Seer, one Guardian and three Villagers.
Werewolves know each other; everyone else knows only their own role.
Night: the Werewolves pick a living non-Werewolf to eliminate (with two alive, the lower id proposes and the higher id decides). \
The Seer checks one other living player and learns only whether that player is a Werewolf. \
The Guardian protects any living player, possibly themselves; a protected target survives.
Day: the night result is announced, then every survivor speaks once in ascending id order, \
then everyone votes for another player or abstains. The most-voted player is eliminated and their role stays secret.
The Village wins when both Werewolves are eliminated. The Werewolves win once they are at least as many as the other survivors."""


@dataclass(frozen=True)
class NightResolution:
    target: int
    protection: int | None
    probe: tuple[int, bool] | None
    eliminated: int | None


class WerewolfGame(GameEngine):
    game = "werewolf"
    n_players = 7
    speech_phases = ("day_discussion",)

    def _check_config(self, config):
        config = dict(config)
        tie_rule = config.pop("tie_rule", "random")
        if tie_rule not in TIE_RULES:
            raise ValueError(f"tie_rule must be one of {TIE_RULES}")
        if config:
            raise TypeError(f"unexpected engine options: {sorted(config)}")
        return {"tie_rule": tie_rule}

    def _reset(self):
        self.roles: dict[int, WerewolfRole] = {}
        self.seer_results: dict[int, bool] = {}
        self._proposal: int | None = None
        self._target: int | None = None

    def _deal(self):
        perm = self.rng.permutation(len(ROLE_DECK))
        return {"roles": {pid: ROLE_DECK[i].value for pid, i in zip(self.players, perm)}}

    def _deal_from(self, roles: Mapping[int, str]):
        got = sorted(WerewolfRole(r).value for r in roles.values())
        if sorted(roles) != list(self.players) or got != sorted(r.value for r in ROLE_DECK):
            raise ValueError("role assignment must use the standard seven-card deck")
        return {"roles": {int(p): WerewolfRole(r).value for p, r in roles.items()}}

    # --- event fold -----------------------------------------------------------------
    def _apply(self, ev: GameEvent):
        p = ev.payload
        if ev.kind == "deal":
            self.roles = {int(k): WerewolfRole(v) for k, v in p["roles"].items()}
            self.phase = "night"
        elif ev.kind == "night_target":
            if p["stage"] == "propose":
                self._proposal = p["target"]
            else:
                self._target = p["target"]
        elif ev.kind == "night_probe":
            self.seer_results[p["target"]] = p["is_werewolf"]
        elif ev.kind == "night_protect":
            pass
        elif ev.kind == "announcement":
            self._proposal = self._target = None
            self.phase = "day_discussion"
        elif ev.kind == "elimination":
            self.alive.discard(p["player"])
        elif ev.kind == "vote":
            self._discussion = []
        elif ev.kind == "nightfall":
            self.round += 1
            self.phase = "night"
        elif ev.kind == "discussion":
            super()._apply(ev)
            self.phase = "day_discussion"
        else:
            super()._apply(ev)
            if ev.kind == "victory":
                self._discussion = []

    # --- queries --------------------------------------------------------------------
    def role_of(self, pid: int) -> WerewolfRole:
        self._check_player(pid)
        return self.roles[pid]

    def team_of_player(self, pid: int) -> Team:
        return Team.WEREWOLF if self.role_of(pid) is WerewolfRole.WEREWOLF else Team.VILLAGE

    def holders(self, role: WerewolfRole | str, alive_only: bool = True) -> list[int]:
        role = WerewolfRole(role)
        pool = self.alive if alive_only else self.players
        return sorted(p for p in pool if self.roles[p] is role)

    @property
    def living_wolves(self) -> list[int]:
        return self.holders(WerewolfRole.WEREWOLF)

    def knowledge(self, viewer: int) -> dict:
        role = self.role_of(viewer)
        known = {viewer: role.value}
        notes = []
        if role is WerewolfRole.WEREWOLF:
            for w in self.holders(WerewolfRole.WEREWOLF, alive_only=False):
                known[w] = WerewolfRole.WEREWOLF.value
        out = {"known_roles": known, "known_alignments": {}, "notes": notes}
        if role is WerewolfRole.SEER:
            out["seer_results"] = dict(self.seer_results)
            for pid, wolf in sorted(self.seer_results.items()):
                verdict = "IS" if wolf else "is NOT"
                notes.append(f"Your check: {player_name(pid)} {verdict} a Werewolf.")
        return out

    def legal_wolf_targets(self) -> list[int]:
        return sorted(p for p in self.alive if self.roles[p] is not WerewolfRole.WEREWOLF)

    def legal_probes(self) -> list[int]:
        seers = self.holders(WerewolfRole.SEER)
        return sorted(p for p in self.alive if p not in seers)

    def legal_protections(self) -> list[int]:
        return sorted(self.alive)

    def legal_ballots(self, voter: int) -> list[int | None]:
        return [None] + sorted(p for p in self.alive if p != voter)

    # --- night ----------------------------------------------------------------------
    def _require_phase(self, *phases):
        if self.over:
            raise IllegalPhase("game is over")
        if self.phase not in phases:
            raise IllegalPhase(f"expected phase {phases}, got {self.phase!r}")

    def _check_wolf_target(self, wolf: int, target: int):
        if target not in self.alive:
            raise IllegalTarget(f"{player_name(target)} is not a living player")
        if target == wolf:
            raise IllegalTarget("a werewolf cannot target themselves")
        if self.roles[target] is WerewolfRole.WEREWOLF:
            raise IllegalTarget("a werewolf cannot target their teammate")

    def resolve_werewolf_target(self, proposals: Mapping[int, int]) -> int:
        """Settle the wolves' target.

        ``proposals`` maps each living wolf to its named target. With two
        wolves the lower id proposes and the higher id's choice is final.
        """
        self._require_phase("night")
        if self._target is not None:
            raise IllegalPhase("the werewolves already chose a target tonight")
        wolves = self.living_wolves
        if sorted(proposals) != wolves:
            raise IllegalTarget(f"expected one choice from each living werewolf {wolves}")
        for w, t in proposals.items():
            self._check_wolf_target(w, t)
        visible = self.holders(WerewolfRole.WEREWOLF, alive_only=False)
        if len(wolves) == 2:
            self._record("night_target", actor=wolves[0], visible_to=visible,
                         payload={"stage": "propose", "target": proposals[wolves[0]]})
        self._record("night_target", actor=wolves[-1], visible_to=visible,
                     payload={"stage": "decide", "target": proposals[wolves[-1]]})
        return self._target

    def resolve_night(self, target: int, protection: int | None, probe: int | None) -> NightResolution:
        self._require_phase("night")
        wolves = self.living_wolves
        if self._target is None:
            self._check_wolf_target(wolves[-1], target)
            self._record("night_target", actor=wolves[-1],
                         visible_to=self.holders(WerewolfRole.WEREWOLF, alive_only=False),
                         payload={"stage": "decide", "target": target})
        elif target != self._target:
            raise IllegalTarget("target differs from the werewolves' decision")

        seers = self.holders(WerewolfRole.SEER)
        guardians = self.holders(WerewolfRole.GUARDIAN)
        if seers:
            if probe is None or probe not in self.alive or probe == seers[0]:
                raise IllegalTarget("the seer must probe another living player")
        elif probe is not None:
            raise IllegalTarget("no living seer")
        if guardians:
            if protection is None or protection not in self.alive:
                raise IllegalTarget("the guardian must protect a living player")
        elif protection is not None:
            raise IllegalTarget("no living guardian")

        probe_result = None
        if seers:
            is_wolf = self.roles[probe] is WerewolfRole.WEREWOLF
            self._record("night_probe", actor=seers[0], visible_to=seers,
                         payload={"target": probe, "is_werewolf": is_wolf})
            probe_result = (probe, is_wolf)
        if guardians:
            self._record("night_protect", actor=guardians[0], visible_to=guardians,
                         payload={"target": protection})

        eliminated = None if protection == target else target
        self._record("announcement", payload={"eliminated": eliminated})
        if eliminated is not None:
            self._record("elimination", payload={"player": eliminated, "cause": "night"})
        self._settle()
        return NightResolution(target, protection, probe_result, eliminated)

    # --- day ------------------------------------------------------------------------
    def resolve_day_vote(self, ballots: Mapping[int, int | None], rng=None) -> int | None:
        """Plurality vote; abstentions are ``None``. Returns the eliminated id, if any."""
        self._require_phase("day_discussion")
        if self._discussion:
            raise IllegalPhase("discussion is still in progress")
        for voter, choice in ballots.items():
            if voter not in self.alive:
                raise IllegalBallot(f"{player_name(voter)} cannot vote")
            if choice is not None:
                if choice == voter:
                    raise IllegalBallot("self-votes are not allowed")
                if choice not in self.alive:
                    raise IllegalBallot(f"{player_name(choice)} is not a living player")
        missing = self.alive - set(ballots)
        if missing:
            raise IllegalBallot(f"missing ballots from {sorted(missing)}")

        tallies = Counter(c for c in ballots.values() if c is not None)
        eliminated = None
        tied: list[int] = []
        if tallies:
            top = max(tallies.values())
            leaders = sorted(p for p, n in tallies.items() if n == top)
            if len(leaders) == 1:
                eliminated = leaders[0]
            else:
                tied = leaders
                if self.config["tie_rule"] == "random":
                    eliminated = choose(rng if rng is not None else self.rng, leaders)
        self._record("vote", payload={
            "ballots": {v: ballots[v] for v in sorted(ballots)},
            "tallies": {p: tallies[p] for p in sorted(tallies)},
            "tied": tied,
            "eliminated": eliminated,
        })
        if eliminated is not None:
            self._record("elimination", payload={"player": eliminated, "cause": "vote"})
        if not self._settle():
            self._record("nightfall")
        return eliminated

    def check_victory(self) -> GameOutcome | None:
        wolves = len(self.living_wolves)
        others = len(self.alive) - wolves
        if wolves == 0:
            return GameOutcome(Team.VILLAGE, self.round)
        if wolves >= others:
            return GameOutcome(Team.WEREWOLF, self.round)
        return None

    def _settle(self) -> bool:
        out = self.check_victory()
        if out is not None:
            self._finish(out.winner)
            return True
        return False


def narrate(events, roles: Mapping[int, str]) -> list[str]:
    """Omniscient transcript lines for the structural (non-speech) events."""
    lines = []
    roles = {int(k): str(getattr(v, "value", v)) for k, v in roles.items()}
    for e in events:
        if not isinstance(e, GameEvent):
            e = GameEvent.from_dict(e)
        p = e.payload
        if e.kind == "night_target":
            verb = "proposes" if p["stage"] == "propose" else "confirms"
            lines.append(f"Werewolf Player {e.actor} {verb} target: Player {p['target']}.")
        elif e.kind == "night_probe":
            t = p["target"]
            if p["is_werewolf"]:
                res = "discovers they ARE a Werewolf."
            else:
                res = f"discovers they are NOT a Werewolf ({roles[t]})."
            lines.append(f"Seer (Player {e.actor}) investigates Player {t}, {res}")
        elif e.kind == "night_protect":
            lines.append(f"Guardian (Player {e.actor}) chooses to protect Player {p['target']}.")
        elif e.kind == "announcement":
            if p["eliminated"] is None:
                lines.append("No player was eliminated during the night.")
            else:
                x = p["eliminated"]
                lines.append(f"Player {x} ({roles[x]}) was eliminated during the night.")
        elif e.kind == "vote":
            for voter, choice in p["ballots"].items():
                who = "Abstain" if choice is None else f"Player {choice}"
                lines.append(f"Player {voter} votes for: {who}.")
            if p["tied"] and p["eliminated"] is None:
                lines.append("Voting results in a tie, so no daytime elimination occurs.")
            elif p["eliminated"] is None:
                lines.append("Nobody received a vote, so no daytime elimination occurs.")
            else:
                lines.append(f"Player {p['eliminated']} was eliminated by vote.")
        elif e.kind == "victory":
            lines.append(f"Game over: {p['winner']} wins after round {p['rounds']}.")
    return lines
