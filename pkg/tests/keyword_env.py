"""A one-instance environment where saying "vote" makes the follower answer "yes".

The measurer's only non-zero weight ties the presence of "vote" in its context
to the token "yes": a candidate containing the keyword earns a Full reward of
exactly 2.0 and every other candidate earns 0.0.
"""
from persuade_sdg.core import DialogueHistory, PublicState
from persuade_sdg.persuasion import Intent, SpeakingContext, TrainingInstance
from persuade_sdg.policy import ToyPolicy, ToyPolicyParams

VOCAB = ("<unk>", "<eos>", "vote", "yes", "no", "maybe", "trust", "him", "now", "we")
KEYWORD_REWARD = 2.0


def measurer() -> ToyPolicy:
    p = ToyPolicyParams.zeros(VOCAB)
    p.weights[p.feature_index(token="vote", bag=True), VOCAB.index("yes")] = KEYWORD_REWARD
    return ToyPolicy(p, "measurer")


def instance() -> TrainingInstance:
    ctx = SpeakingContext("Talk then decide.", PublicState("werewolf", 1, "day_discussion", (1, 2, 3)),
                          DialogueHistory([(1, "hello")]), 2, "Villager", 3, "Seer")
    return TrainingInstance("werewolf", 0, 2, ctx, "we trust him", Intent("yes", "no"))


def refiner() -> ToyPolicyParams:
    return ToyPolicyParams.zeros(VOCAB)
