"""Tournaments over agent pools and same-team ablation runs."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence

import numpy as np

from ..core import Team
from .agents import AgentSpec
from .match import TEAMS, MatchPlan, engine_class
from .selfplay import run_plans

DEFAULT_MATCHES = 500
DEFAULT_TEAM_EVAL_MATCHES = 50

_TEAM_LABELS = {
    Team.VILLAGE: "Team Village", Team.WEREWOLF: "Team Werewolf",
    Team.GOOD: "Good Side", Team.EVIL: "Evil Side",
}


@dataclass
class TeamStats:
    participation: int = 0
    wins: int = 0

    @property
    def win_rate(self) -> float:
        return self.wins / self.participation if self.participation else 0.0

    def to_dict(self) -> dict:
        return {"participation": self.participation, "wins": self.wins, "win_rate": self.win_rate}


@dataclass
class TournamentReport:
    game: str
    seed: int
    matches: int
    aborted: int
    agents: list[str]
    stats: dict[str, dict[str, TeamStats]]
    aborted_ids: list[str] = field(default_factory=list)
    config: dict = field(default_factory=dict)

    @property
    def teams(self) -> tuple[Team, Team]:
        return TEAMS[self.game]

    def overall(self, agent: str) -> TeamStats:
        s = TeamStats()
        for t in self.stats[agent].values():
            s.participation += t.participation
            s.wins += t.wins
        return s

    def total_participation(self) -> int:
        return sum(self.overall(a).participation for a in self.agents)

    def to_dict(self) -> dict:
        return {
            "game": self.game,
            "seed": self.seed,
            "matches": self.matches,
            "aborted": self.aborted,
            "aborted_ids": list(self.aborted_ids),
            "config": self.config,
            "agents": {
                a: {
                    "teams": {t: s.to_dict() for t, s in self.stats[a].items()},
                    "overall": self.overall(a).to_dict(),
                }
                for a in self.agents
            },
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> TournamentReport:
        stats = {
            a: {t: TeamStats(s["participation"], s["wins"]) for t, s in v["teams"].items()}
            for a, v in d["agents"].items()
        }
        return cls(d["game"], d["seed"], d["matches"], d["aborted"], list(d["agents"]), stats,
                   list(d.get("aborted_ids", [])), dict(d.get("config", {})))

    def render(self) -> str:
        """Plain-text table: participation and win rate per team, then overall."""
        t1, t2 = self.teams
        head1 = f"{self.game.upper():<16} | {_TEAM_LABELS[t1]:^26} | {_TEAM_LABELS[t2]:^26} | {'Overall':^12}"
        head2 = (f"{'Agent':<16} | {'Participation':>13} {'Win Rate (%)':>12} "
                 f"| {'Participation':>13} {'Win Rate (%)':>12} | {'Win Rate (%)':>12}")
        rule = "-" * len(head2)
        rows = [head1, head2, rule]
        for a in self.agents:
            s1, s2 = self.stats[a][t1.value], self.stats[a][t2.value]
            rows.append(f"{a:<16} | {s1.participation:>13} {100 * s1.win_rate:>12.1f} "
                        f"| {s2.participation:>13} {100 * s2.win_rate:>12.1f} "
                        f"| {100 * self.overall(a).win_rate:>12.1f}")
        rows.append(rule)
        rows.append(f"{self.matches} matches, seed {self.seed}, {self.aborted} aborted and excluded")
        return "\n".join(rows)


def tally(game: str, agents: Sequence[str], logs: Iterable[Mapping], seed: int = 0,
          config: Mapping | None = None) -> TournamentReport:
    """Fold match logs into a report; aborted matches are counted, not scored."""
    teams = [t.value for t in TEAMS[game]]
    stats = {a: {t: TeamStats() for t in teams} for a in agents}
    matches = aborted = 0
    aborted_ids = []
    for log in logs:
        if log["aborted"]:
            aborted += 1
            aborted_ids.append(log["match_id"])
            continue
        matches += 1
        winner = log["outcome"]["winner"]
        for p in log["players"]:
            s = stats[p["agent"]][p["team"]]
            s.participation += 1
            s.wins += p["team"] == winner
    return TournamentReport(game, seed, matches, aborted, list(agents), stats, aborted_ids,
                            dict(config or {}))


def plan_tournament(pool: Sequence[AgentSpec], game: str, matches: int, seed: int,
                    config: Mapping[str, Any] | None = None) -> list[MatchPlan]:
    """Seats are filled uniformly with replacement from the pool, after the
    engine deals roles from the match seed."""
    if not pool:
        raise ValueError("agent pool is empty")
    n = engine_class(game).n_players
    rng = np.random.default_rng(seed)
    plans = []
    for k in range(matches):
        picks = rng.integers(len(pool), size=n)
        plans.append(MatchPlan(game, tuple(pool[i] for i in picks), int(rng.integers(2**31 - 1)),
                               dict(config or {}), match_id=f"{game}-t{seed}-{k}"))
    return plans


def run_tournament(pool: Sequence[AgentSpec], game: str, matches: int = DEFAULT_MATCHES, seed: int = 0,
                   config: Mapping[str, Any] | None = None, workers: int = 1,
                   logs_out: list | None = None) -> TournamentReport:
    plans = plan_tournament(pool, game, matches, seed, config)
    logs = run_plans(plans, workers)
    if logs_out is not None:
        logs_out.extend(logs)
    return tally(game, [a.id for a in pool], logs, seed, config)


@dataclass
class TeamEvalResult:
    game: str
    side: str
    variant: str
    opponent: str
    matches: int
    aborted: int
    wins: int
    participation: dict

    @property
    def win_rate(self) -> float:
        return self.wins / self.matches if self.matches else 0.0

    def to_dict(self) -> dict:
        return {"game": self.game, "side": self.side, "variant": self.variant,
                "opponent": self.opponent, "matches": self.matches, "aborted": self.aborted,
                "wins": self.wins, "win_rate": self.win_rate, "participation": self.participation}


def run_team_eval(variant: AgentSpec, opponent: AgentSpec, game: str, side: str | Team,
                  matches: int = DEFAULT_TEAM_EVAL_MATCHES, seed: int = 0,
                  config: Mapping[str, Any] | None = None, workers: int = 1) -> TeamEvalResult:
    """Every seat on ``side`` plays the variant, every other seat the opponent.

    Roles come from the match seed, so the seat assignment is made after a
    dry deal of the same seed.
    """
    side = Team(side)
    if side not in TEAMS[game]:
        raise ValueError(f"{game} has no side {side.value!r}")
    cls = engine_class(game)
    rng = np.random.default_rng(seed)
    plans, on_side = [], []
    for k in range(matches):
        match_seed = int(rng.integers(2**31 - 1))
        dealt = cls(match_seed, **dict(config or {}))
        mask = [dealt.team_of_player(p) is side for p in dealt.players]
        seats = tuple(variant if m else opponent for m in mask)
        plans.append(MatchPlan(game, seats, match_seed, dict(config or {}),
                               match_id=f"{game}-team{seed}-{k}"))
        on_side.append(mask)
    logs = run_plans(plans, workers)
    wins = 0
    part = {"variant": 0, "opponent": 0}
    done = 0
    for log, mask in zip(logs, on_side):
        if log["aborted"]:
            continue
        done += 1
        wins += log["outcome"]["winner"] == side.value
        part["variant"] += sum(mask)
        part["opponent"] += len(mask) - sum(mask)
    return TeamEvalResult(game, side.value, variant.id, opponent.id, done, len(logs) - done, wins, part)


def write_report(path, report: TournamentReport):
    Path(path).write_text(json.dumps({**report.to_dict(), "table": report.render()}, indent=2))


def read_report(path) -> TournamentReport:
    return TournamentReport.from_dict(json.loads(Path(path).read_text()))
