"""
GRPO on a keyword environment
=============================

The measurer answers "yes" whenever the word "vote" appears, so the reward is
2 with the keyword and 0 without. A refiner that starts uniform should learn
to say it.
"""

import numpy as np

from persuade_sdg.core import DialogueHistory, PublicState
from persuade_sdg.grpo import TrainerConfig, train
from persuade_sdg.persuasion import Intent, SpeakingContext, TrainingInstance
from persuade_sdg.policy import ToyPolicy, ToyPolicyParams

vocab = ("<unk>", "<eos>", "vote", "yes", "no", "maybe", "trust", "him", "now", "we")

p = ToyPolicyParams.zeros(vocab)
p.weights[p.feature_index(token="vote", bag=True), vocab.index("yes")] = 2.0
measurer = ToyPolicy(p, "measurer")

ctx = SpeakingContext("Talk then decide.", PublicState("werewolf", 1, "day_discussion", (1, 2, 3)),
                      DialogueHistory([(1, "hello")]), 2, "Villager", 3, "Seer")
inst = TrainingInstance("werewolf", 0, 2, ctx, "we trust him", Intent("yes", "no"))

cfg = TrainerConfig(n=8, epsilon=0.2, beta=0.04, lr=0.2, max_steps=200, epochs=10_000, seed=0, max_tokens=4)
res = train([inst], measurer, ToyPolicyParams.zeros(vocab), cfg)

r = np.array([s["mean_reward"] for s in res.trace])
for lo in range(0, 200, 40):
    print(f"steps {lo:3d}-{lo + 39:3d}  mean reward {r[lo:lo + 40].mean():.3f}  kl {res.trace[lo + 39]['kl']:.4f}")

# %%
# What the trained refiner says now.
from persuade_sdg.policy import GenerationSettings, generate
from persuade_sdg.persuasion import refine_prompt

refiner = ToyPolicy(res.params, "refiner")
prompt = refine_prompt(ctx, inst.base, refiner)
settings = GenerationSettings(max_tokens=4, rng=np.random.default_rng(1))
for _ in range(5):
    print(generate(refiner, prompt, settings).text)
