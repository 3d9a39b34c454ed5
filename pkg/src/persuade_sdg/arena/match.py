"""Drive one match: seat agents, run the engine's phase loop, keep a full log."""
from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field
from typing import Any, Mapping, Sequence

import numpy as np

from .. import avalon, onuw, werewolf
from ..core import ROUND_CAP, GameEngine, GameError, Team
from ..persuasion import SpeakingContext
from .agents import Agent, AgentError, AgentSpec, PolicyCache, make_agent

logger = logging.getLogger(__name__)

ENGINES: dict[str, type[GameEngine]] = {
    "werewolf": werewolf.WerewolfGame,
    "avalon": avalon.AvalonGame,
    "onuw": onuw.OnuwGame,
}
RULES = {"werewolf": werewolf.RULES, "avalon": avalon.RULES, "onuw": onuw.RULES}
TEAMS = {
    "werewolf": (Team.VILLAGE, Team.WEREWOLF),
    "avalon": (Team.GOOD, Team.EVIL),
    "onuw": (Team.VILLAGE, Team.WEREWOLF),
}
# Bound on engine actions per match; far above any legal game length.
_STEP_LIMIT = 10_000


class UnknownGame(ValueError):
    pass


def engine_class(game: str) -> type[GameEngine]:
    try:
        return ENGINES[game]
    except KeyError:
        raise UnknownGame(f"unknown game {game!r}; choose from {sorted(ENGINES)}") from None


def seats(game: str) -> int:
    return engine_class(game).n_players


@dataclass(frozen=True)
class MatchPlan:
    game: str
    agents: tuple[AgentSpec, ...]
    seed: int
    config: Mapping[str, Any] = field(default_factory=dict)
    match_id: str = ""
    record_intents: bool = False

    def __post_init__(self):
        cls = engine_class(self.game)
        if len(self.agents) != cls.n_players:
            raise ValueError(f"{self.game} needs {cls.n_players} seats, got {len(self.agents)}")


class _Driver:
    def __init__(self, plan: MatchPlan, cache: PolicyCache | None = None):
        self.plan = plan
        self.game = engine_class(plan.game)(plan.seed, **dict(plan.config))
        # agents draw from their own stream so engine randomness stays independent
        rng = np.random.default_rng([plan.seed, 1])
        cache = cache or PolicyCache()
        self.agents: dict[int, Agent] = {
            seat: make_agent(spec, seat, rng, cache)
            for seat, spec in zip(self.game.players, plan.agents)
        }
        self.turns: list[dict] = []
        self.steps = 0

    def tick(self):
        self.steps += 1
        if self.steps > _STEP_LIMIT:
            raise AgentError("match exceeded the action limit")

    def decide(self, seat: int, kind: str, options: Sequence):
        self.tick()
        options = list(options)
        if not options:
            raise AgentError(f"no legal options for {kind}")
        try:
            choice = self.agents[seat].decide(kind, options, self.game.public_view(seat))
        except Exception as exc:
            raise AgentError(f"seat {seat} failed to decide {kind}: {exc!r}") from exc
        if choice not in options:
            raise AgentError(f"seat {seat} chose an illegal {kind}: {choice!r}")
        return choice

    def discussion(self):
        g = self.game
        order = g.begin_discussion()
        for i, seat in enumerate(order):
            self.tick()
            nxt = order[i + 1] if i + 1 < len(order) else None
            view = g.public_view(seat)
            ctx_dialogue = g.dialogue.prefix(len(g.dialogue))
            public = g.public_state()
            speaker_role = str(view.role)
            # the last speaker has no follower; their prompt names the round's first speaker
            follower = nxt if nxt is not None else (order[0] if order[0] != seat else seat % g.n_players + 1)
            ctx = SpeakingContext(RULES[self.plan.game], public, ctx_dialogue, seat,
                                  speaker_role, follower, None, view.render_private())
            try:
                speech = self.agents[seat].speak(ctx, want_intent=self.plan.record_intents and nxt is not None)
            except Exception as exc:
                raise AgentError(f"seat {seat} failed to speak: {exc!r}") from exc
            g.speak(seat, speech.text)
            self.turns.append({
                "t": len(g.dialogue),
                "round": public.round,
                "phase": public.phase,
                "speaker": seat,
                "speaker_agent": self.plan.agents[seat - 1].id,
                "speaker_role": speaker_role,
                "next_speaker": nxt,
                "next_role": None if nxt is None else str(_value(g.believed_role(nxt))),
                "rules": RULES[self.plan.game],
                "public_state": public.to_dict(),
                "private_knowledge": view.render_private(),
                "dialogue": ctx_dialogue.to_list(),
                "u_base": speech.base,
                "u_final": speech.text,
                "intent": None if speech.intent is None else {
                    "desired": speech.intent.desired,
                    "undesired": speech.intent.undesired,
                    "analysis": speech.intent.analysis,
                },
            })

    # --- per-game loops -----------------------------------------------------------
    def play_werewolf(self):
        g: werewolf.WerewolfGame = self.game
        while not g.over:
            if g.round > ROUND_CAP:
                g.abort_round_cap()
                return
            targets = g.legal_wolf_targets()
            proposals = {w: self.decide(w, "wolf_target", targets) for w in g.living_wolves}
            target = g.resolve_werewolf_target(proposals)
            seers = g.holders(werewolf.WerewolfRole.SEER)
            guards = g.holders(werewolf.WerewolfRole.GUARDIAN)
            probe = self.decide(seers[0], "seer_probe", g.legal_probes()) if seers else None
            protect = self.decide(guards[0], "guard_protect", g.legal_protections()) if guards else None
            g.resolve_night(target, protect, probe)
            if g.over:
                return
            self.discussion()
            ballots = {v: self.decide(v, "day_vote", [p for p in sorted(g.alive) if p != v])
                       for v in sorted(g.alive)}
            g.resolve_day_vote(ballots)

    def play_avalon(self):
        g: avalon.AvalonGame = self.game
        after_quest = False
        while not g.over:
            if g.phase == "team_selection":
                if after_quest:
                    self.discussion()
                    after_quest = False
                team = self.decide(g.leader, "team", g.legal_teams())
                g.propose_team(g.leader, team)
                self.discussion()
                g.resolve_team_vote({p: self.decide(p, "team_vote", [True, False]) for p in g.players})
            elif g.phase == "quest":
                g.resolve_quest({m: self.decide(m, "quest_vote", g.legal_quest_votes(m))
                                 for m in g.pending_team})
                after_quest = True
            elif g.phase == "assassination":
                assassin = g.holder(avalon.AvalonRole.ASSASSIN)
                known_evil = {int(p) for p in g.knowledge(assassin)["known_alignments"]}
                options = [p for p in g.players if p not in known_evil]
                g.resolve_assassination(self.decide(assassin, "assassinate", options))
            else:
                raise AgentError(f"unexpected phase {g.phase!r}")

    def play_onuw(self):
        g: onuw.OnuwGame = self.game
        R = onuw.OnuwRole
        while g.phase == "night":
            role = g.next_night_role
            actor = g.holder(role, initial=True)
            others = [p for p in g.players if p != actor]
            if role is R.WEREWOLF:
                g.night_werewolf()
            elif role is R.SEER:
                pick = self.decide(actor, "seer", [("player", p) for p in others] + [("center", None)])
                if pick[0] == "center":
                    g.night_seer(center=True)
                else:
                    g.night_seer(pick[1])
            elif role is R.ROBBER:
                g.night_robber(self.decide(actor, "robber", others))
            elif role is R.TROUBLEMAKER:
                a, b = self.decide(actor, "troublemaker", list(itertools.combinations(others, 2)))
                g.night_troublemaker(a, b)
            elif role is R.INSOMNIAC:
                g.night_insomniac()
        self.discussion()
        g.resolve_vote({v: self.decide(v, "vote", [p for p in g.players if p != v]) for v in g.players})


def _value(x):
    return getattr(x, "value", x)


def _initial_roles(game: GameEngine) -> dict[int, str]:
    if isinstance(game, onuw.OnuwGame):
        return {p: game.initial[p].value for p in game.players}
    return {p: _value(game.role_of(p)) for p in game.players}


def run_match(plan: MatchPlan, cache: PolicyCache | None = None) -> dict:
    """Play one match. Agent, engine-rule or policy failures abort the match and
    the returned log is flagged; the exception does not propagate."""
    driver = _Driver(plan, cache)
    g = driver.game
    error = None
    try:
        getattr(driver, f"play_{plan.game}")()
    except (AgentError, GameError) as exc:
        logger.warning("match %s aborted: %s", plan.match_id or plan.seed, exc)
        error = f"{type(exc).__name__}: {exc}"
    outcome = g.outcome.to_dict() if g.outcome is not None else None
    aborted = error is not None or (outcome is not None and outcome["winner"] is None)
    initial = _initial_roles(g)
    players = []
    for seat, spec in zip(g.players, plan.agents):
        players.append({
            "id": seat,
            "role": initial[seat],
            "agent": spec.id,
            "framework": spec.framework.value,
            "backend": None if spec.backend is None else dict(spec.backend),
            "final_role": str(_value(g.role_of(seat))),
            "team": g.team_of_player(seat).value,
        })
    return {
        "match_id": plan.match_id or f"{plan.game}-{plan.seed}",
        "game": plan.game,
        "seed": plan.seed,
        "players": players,
        "events": g.event_log(),
        "turns": driver.turns,
        "outcome": outcome,
        "aborted": aborted,
        "error": error,
        "config": dict(plan.config),
    }
