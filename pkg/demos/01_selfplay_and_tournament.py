"""
Self-play and a small tournament
================================

Play a few games with offline stub agents, look at what a log records, then
pit a scripted pool against itself.
"""

import json

from persuade_sdg.arena import (
    AgentSpec,
    Framework,
    MatchPlan,
    extract_dataset,
    generate_selfplay,
    run_match,
    run_tournament,
)

STUBS = [{"kind": "stub", "name": n} for n in ("alpha", "beta", "gamma")]

# One Avalon match, every seat a refined stub agent.
spec = AgentSpec("stub", Framework.REFINED, backend=STUBS[0], refiner=STUBS[1])
log = run_match(MatchPlan("avalon", (spec,) * 5, seed=7, record_intents=True))
print(log["outcome"])
for p in log["players"]:
    print(p["id"], p["role"])

# Each turn keeps the base utterance, the refined one and the speaker's intent.
turn = log["turns"][0]
print(json.dumps({k: turn[k] for k in ("speaker", "u_base", "u_final", "intent")}, indent=1))

# %%
# Self-play over a backend pool, then sample training instances.
logs = generate_selfplay("werewolf", 6, STUBS, seed=1)
data = extract_dataset(logs, 20, seed=0)
print(len(logs), "logs ->", len(data), "instances")
print(data[0].base, "|", data[0].intent.desired, "|", data[0].intent.undesired)

# %%
# Scripted agents make tournaments cheap. Win rates are per team.
pool = [AgentSpec("first", script="first"), AgentSpec("last", script="last"),
        AgentSpec("random", Framework.RANDOM)]
report = run_tournament(pool, "onuw", matches=60, seed=3)
print(report.render())
