"""
Measuring persuasion
====================

The reward of a candidate utterance is how much it shifts a follower model
toward the leader's desired response and away from the undesired one.
"""

import numpy as np

from persuade_sdg.core import DialogueHistory, PublicState
from persuade_sdg.grpo import advantages
from persuade_sdg.persuasion import Intent, RewardMode, SpeakingContext, measure_reward, measurement_prompt
from persuade_sdg.policy import ToyPolicy, ToyPolicyParams

vocab = ("<unk>", "<eos>", "vote", "player", "three", "yes", "no", "trust", "me", "we")
ctx = SpeakingContext("Talk, then pick someone to remove.", PublicState("werewolf", 2, "day_discussion", (1, 2, 3, 5)),
                      DialogueHistory([(1, "I think player three is lying"), (2, "agreed")]),
                      3, "Villager", 5, "Seer")
intent = Intent("yes", "no")

# The follower sees public state, the dialogue so far and the candidate.
print(measurement_prompt(ctx, "we vote player three").messages[-1].text[-200:])

# %%
# A measurer that likes "yes" after "vote".
p = ToyPolicyParams.zeros(vocab)
p.weights[p.feature_index(token="vote", bag=True), vocab.index("yes")] = 1.5
m = ToyPolicy(p, "measurer")

for cand in ("we vote player three", "trust me", "no"):
    full, pos, neg = (measure_reward(cand, intent, ctx, m, mode) for mode in RewardMode)
    print(f"{cand!r:26} full {full:+.3f} = pos {pos:+.3f} + neg {neg:+.3f}")

# %%
# Random measurers: the decomposition holds exactly, not approximately.
rng = np.random.default_rng(0)
gaps = []
for _ in range(200):
    rm = ToyPolicy(ToyPolicyParams.random(vocab, rng, scale=1.0))
    vals = [measure_reward("we vote player three", intent, ctx, rm, mode) for mode in RewardMode]
    gaps.append(vals[0] == vals[1] + vals[2])
print("full == pos + neg in", sum(gaps), "of", len(gaps), "cases")

# %%
# Rewards inside a group become advantages: centered, unit population std.
group = advantages([1.2, 0.3, 0.3, -0.5])
print(group.advantages.round(4), group.advantages.mean(), group.advantages.std())
