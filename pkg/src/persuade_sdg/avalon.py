"""Five-player Avalon: team proposal, team vote, quest, discussion and assassination."""
from __future__ import annotations

import enum
import itertools
from typing import Mapping

from .core import (
    GameEngine,
    GameEvent,
    GameOutcome,
    IllegalBallot,
    IllegalPhase,
    IllegalProposal,
    Team,
    player_name,
)


class AvalonRole(str, enum.Enum):
    SERVANT = "Servant"
    MINION = "Minion"
    MERLIN = "Merlin"
    ASSASSIN = "Assassin"


GOOD_ROLES = frozenset({AvalonRole.SERVANT, AvalonRole.MERLIN})
ROLE_DECK = [AvalonRole.SERVANT, AvalonRole.SERVANT, AvalonRole.MINION,
             AvalonRole.MERLIN, AvalonRole.ASSASSIN]
TEAM_SIZES = (2, 3, 2, 3, 3)
MAX_REJECTIONS = 4


class TeamVoteResult(str, enum.Enum):
    APPROVED = "approved"
    REJECTED = "rejected"
    FORCED_APPROVED = "forced_approved"


class QuestVote(str, enum.Enum):
    PASS = "Pass"
    FAIL = "Fail"


RULES = """\
Avalon, five players: two Servants and Merlin are good; the Minion and the Assassin are evil.
Merlin knows which players are evil. The evil players know each other's identity but not each other's role.
Each mission: the leader proposes a team (sizes 2, 3, 2, 3, 3 for missions one to five) and everyone votes to approve or reject. \
Three or more approvals send the team on the quest; otherwise leadership passes to the next player. \
After four rejections in a row the fifth proposed team goes on the quest automatically.
On a quest each member secretly plays Pass or Fail; good players always play Pass. Only the counts are revealed, \
and a single Fail fails the mission. Leadership passes to the next player after every quest.
Players discuss once before each team vote and once after each quest result: the leader speaks first, \
then the others in ascending id order.
Three failed missions win the game for evil. After three successful missions the Assassin names one player: \
naming Merlin wins for evil, anything else wins for good."""


class AvalonGame(GameEngine):
    game = "avalon"
    n_players = 5
    speech_phases = ("team_selection", "team_vote")

    def _reset(self):
        self.roles: dict[int, AvalonRole] = {}
        self.leader = 1
        self.mission = 1
        self.rejections = 0
        self.results: list[bool] = []
        self.pending_team: tuple[int, ...] | None = None

    def _deal(self):
        perm = self.rng.permutation(len(ROLE_DECK))
        return {"roles": {pid: ROLE_DECK[i].value for pid, i in zip(self.players, perm)}}

    def _deal_from(self, roles: Mapping[int, str]):
        got = sorted(AvalonRole(r).value for r in roles.values())
        if sorted(roles) != list(self.players) or got != sorted(r.value for r in ROLE_DECK):
            raise ValueError("role assignment must use the standard five-card deck")
        return {"roles": {int(p): AvalonRole(r).value for p, r in roles.items()}}

    def _rotate(self):
        self.leader = self.leader % self.n_players + 1

    def _apply(self, ev: GameEvent):
        p = ev.payload
        if ev.kind == "deal":
            self.roles = {int(k): AvalonRole(v) for k, v in p["roles"].items()}
            self.phase = "team_selection"
        elif ev.kind == "propose":
            self.pending_team = tuple(p["members"])
            self.phase = "team_vote"
            self._discussion = []
        elif ev.kind == "team_vote":
            self._discussion = []
            if p["result"] == TeamVoteResult.REJECTED.value:
                self.rejections += 1
                self.pending_team = None
                self._rotate()
                self.phase = "team_selection"
            else:
                self.rejections = 0
                self.phase = "quest"
        elif ev.kind == "quest_ballot":
            pass
        elif ev.kind == "quest_vote":
            self.results.append(p["success"])
            self.pending_team = None
            self._rotate()
            if self.failures >= 3:
                self.phase = "quest"  # a victory event follows immediately
            elif self.successes >= 3:
                self.phase = "assassination"
            else:
                self.mission += 1
                self.round = self.mission
                self.phase = "team_selection"
        elif ev.kind == "assassination":
            pass
        else:
            super()._apply(ev)

    # --- queries --------------------------------------------------------------------
    @property
    def successes(self) -> int:
        return sum(self.results)

    @property
    def failures(self) -> int:
        return len(self.results) - self.successes

    @property
    def team_size(self) -> int:
        return TEAM_SIZES[self.mission - 1]

    def role_of(self, pid: int) -> AvalonRole:
        self._check_player(pid)
        return self.roles[pid]

    def is_good(self, pid: int) -> bool:
        return self.role_of(pid) in GOOD_ROLES

    def team_of_player(self, pid: int) -> Team:
        return Team.GOOD if self.is_good(pid) else Team.EVIL

    def holder(self, role: AvalonRole | str) -> int:
        role = AvalonRole(role)
        return next(p for p in self.players if self.roles[p] is role)

    @property
    def evil_players(self) -> list[int]:
        return [p for p in self.players if not self.is_good(p)]

    def knowledge(self, viewer: int) -> dict:
        role = self.role_of(viewer)
        align: dict[int, str] = {}
        notes = []
        if role is AvalonRole.MERLIN:
            align = {p: self.team_of_player(p).value for p in self.players}
            evil = ", ".join(player_name(p) for p in self.evil_players)
            notes.append(f"You see that {evil} are evil.")
        elif role not in GOOD_ROLES:
            align = {p: Team.EVIL.value for p in self.evil_players}
        return {"known_roles": {viewer: role.value}, "known_alignments": align, "notes": notes}

    def discussion_order(self) -> list[int]:
        return [self.leader] + sorted(p for p in self.alive if p != self.leader)

    def legal_teams(self) -> list[tuple[int, ...]]:
        return list(itertools.combinations(self.players, self.team_size))

    def legal_quest_votes(self, member: int) -> list[QuestVote]:
        if self.is_good(member):
            return [QuestVote.PASS]
        return [QuestVote.PASS, QuestVote.FAIL]

    # --- actions --------------------------------------------------------------------
    def _require_phase(self, *phases):
        if self.over:
            raise IllegalPhase("game is over")
        if self.phase not in phases:
            raise IllegalPhase(f"expected phase {phases}, got {self.phase!r}")

    def propose_team(self, leader: int, members) -> tuple[int, ...]:
        self._require_phase("team_selection")
        if self._discussion:
            raise IllegalPhase("discussion is still in progress")
        if leader != self.leader:
            raise IllegalProposal(f"{player_name(leader)} is not the leader")
        team = tuple(sorted(set(members)))
        if len(team) != len(list(members)) or any(m not in self.players for m in team):
            raise IllegalProposal("team members must be distinct players")
        if len(team) != self.team_size:
            raise IllegalProposal(f"mission {self.mission} needs a team of {self.team_size}")
        self._record("propose", actor=leader, payload={
            "mission": self.mission, "leader": leader, "members": list(team), "size": len(team),
        })
        return team

    def resolve_team_vote(self, ballots: Mapping[int, bool]) -> TeamVoteResult:
        self._require_phase("team_vote")
        if self._discussion:
            raise IllegalPhase("discussion is still in progress")
        if sorted(ballots) != list(self.players):
            raise IllegalBallot("every player must vote on the team")
        approve = sum(bool(b) for b in ballots.values())
        if approve * 2 > self.n_players:
            result = TeamVoteResult.APPROVED
        elif self.rejections >= MAX_REJECTIONS:
            result = TeamVoteResult.FORCED_APPROVED
        else:
            result = TeamVoteResult.REJECTED
        self._record("team_vote", payload={
            "mission": self.mission,
            "ballots": {p: bool(ballots[p]) for p in self.players},
            "approve": approve,
            "reject": self.n_players - approve,
            "result": result.value,
        })
        return result

    def resolve_quest(self, ballots: Mapping[int, QuestVote | str]) -> dict:
        self._require_phase("quest")
        team = self.pending_team
        if sorted(ballots) != list(team):
            raise IllegalBallot("exactly the team members vote on the quest")
        votes = {m: QuestVote(ballots[m]) for m in team}
        for m, v in votes.items():
            if v is QuestVote.FAIL and self.is_good(m):
                raise IllegalBallot(f"{player_name(m)} is good and must play Pass")
        for m in team:
            self._record("quest_ballot", actor=m, visible_to=(m,), payload={"vote": votes[m].value})
        fails = sum(v is QuestVote.FAIL for v in votes.values())
        result = {
            "mission": self.mission,
            "passes": len(team) - fails,
            "fails": fails,
            "success": fails == 0,
        }
        self._record("quest_vote", payload=result)
        out = self.check_victory()
        if out is not None:
            self._finish(out.winner)
        return {"passCount": result["passes"], "failCount": fails, "success": fails == 0}

    def resolve_assassination(self, target: int) -> GameOutcome:
        if self.over or self.phase != "assassination":
            raise IllegalPhase("assassination only follows three successful missions")
        self._check_player(target)
        hit = self.roles[target] is AvalonRole.MERLIN
        self._record("assassination", actor=self.holder(AvalonRole.ASSASSIN),
                     payload={"target": target, "hit": hit})
        return self._finish(Team.EVIL if hit else Team.GOOD)

    def check_victory(self) -> GameOutcome | None:
        """Three failures end the game; three successes only open the assassination."""
        if self.failures >= 3:
            return GameOutcome(Team.EVIL, self.round)
        return None


def narrate(events, roles: Mapping[int, str] | None = None) -> list[str]:
    lines = []
    for e in events:
        if not isinstance(e, GameEvent):
            e = GameEvent.from_dict(e)
        p = e.payload
        if e.kind == "propose":
            members = ", ".join(f"Player {m}" for m in p["members"])
            lines.append(f"Leader Player {p['leader']} proposes team of {p['size']}: {members}.")
        elif e.kind == "team_vote":
            for voter, ok in p["ballots"].items():
                lines.append(f"Player {voter} votes: {'Approve' if ok else 'Reject'}.")
            counts = f"{p['approve']} Approve"
            if p["reject"]:
                counts += f", {p['reject']} Reject"
            verdict = {
                "approved": "Team approved",
                "rejected": "Team rejected",
                "forced_approved": "Team rejected, but the fifth team proceeds",
            }[p["result"]]
            lines.append(f"Vote result: {counts} - {verdict}.")
        elif e.kind == "quest_ballot":
            lines.append(f"Player {e.actor} votes: {p['vote']}.")
        elif e.kind == "quest_vote":
            verdict = "Mission succeeds" if p["success"] else "Mission fails"
            lines.append(f"Quest result: {p['passes']} Pass, {p['fails']} Fail - {verdict}.")
        elif e.kind == "assassination":
            lines.append(f"The Assassin names Player {p['target']}: "
                         + ("Merlin is found." if p["hit"] else "Merlin survives."))
        elif e.kind == "victory":
            lines.append(f"Game over: {p['winner']} wins.")
    return lines
