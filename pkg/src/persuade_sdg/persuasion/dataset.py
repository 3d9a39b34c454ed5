"""Training instances cut from recorded turns, and their line-delimited JSON file format."""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping

from ..core import DialogueHistory, PublicState
from .pipeline import Intent, SpeakingContext


class InstanceSkipped(Exception):
    """A turn that cannot become a training instance (no follower, role or intent)."""


@dataclass
class TrainingInstance:
    game: str
    seed: int
    turn: int
    context: SpeakingContext
    base: str
    intent: Intent

    def to_dict(self) -> dict:
        c = self.context
        return {
            "game": self.game,
            "seed": self.seed,
            "turn": self.turn,
            "rules": c.rules,
            "public_state": c.public_state.to_dict(),
            "dialogue": c.dialogue.to_list(),
            "speaker": c.speaker,
            "speaker_role": c.speaker_role,
            "private_knowledge": c.private_knowledge,
            "next_speaker": c.next_speaker,
            "next_role": c.next_role,
            "base": self.base,
            "desired": self.intent.desired,
            "undesired": self.intent.undesired,
            "analysis": self.intent.analysis,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> TrainingInstance:
        ctx = SpeakingContext(
            rules=d["rules"],
            public_state=PublicState.from_dict(d["public_state"]),
            dialogue=DialogueHistory.from_list(d["dialogue"]),
            speaker=int(d["speaker"]),
            speaker_role=d["speaker_role"],
            next_speaker=int(d["next_speaker"]),
            next_role=d["next_role"],
            private_knowledge=d.get("private_knowledge", ""),
        )
        return cls(d["game"], int(d["seed"]), int(d["turn"]), ctx, d["base"],
                   Intent(d["desired"], d["undesired"], d.get("analysis", "")))


def build_training_instance(turn: Mapping, *, game: str, seed: int) -> TrainingInstance:
    """Rebuild the speaking context of one recorded turn, with the follower's true role."""
    t = turn.get("t")
    if turn.get("next_speaker") is None:
        raise InstanceSkipped(f"turn {t}: no next speaker in this discussion")
    if not turn.get("next_role"):
        raise InstanceSkipped(f"turn {t}: next speaker's role was not recorded")
    intent = turn.get("intent")
    if not intent:
        raise InstanceSkipped(f"turn {t}: no intent recorded")
    if not turn.get("u_base"):
        raise InstanceSkipped(f"turn {t}: no base utterance recorded")
    ctx = SpeakingContext(
        rules=turn["rules"],
        public_state=PublicState.from_dict(turn["public_state"]),
        dialogue=DialogueHistory.from_list(turn["dialogue"]),
        speaker=int(turn["speaker"]),
        speaker_role=turn["speaker_role"],
        next_speaker=int(turn["next_speaker"]),
        next_role=turn["next_role"],
        private_knowledge=turn.get("private_knowledge", ""),
    )
    return TrainingInstance(game, int(seed), int(t), ctx, turn["u_base"],
                            Intent(intent["desired"], intent["undesired"], intent.get("analysis", "")))


def instances_from_log(log: Mapping) -> tuple[list[TrainingInstance], int]:
    """All instances of one game log and the number of skipped turns."""
    out, skipped = [], 0
    for turn in log.get("turns", []):
        try:
            out.append(build_training_instance(turn, game=log["game"], seed=log["seed"]))
        except InstanceSkipped:
            skipped += 1
    return out, skipped


def write_dataset(path, instances: Iterable[TrainingInstance]) -> int:
    n = 0
    with Path(path).open("w", encoding="utf-8") as fh:
        for inst in instances:
            fh.write(json.dumps(inst.to_dict(), ensure_ascii=False) + "\n")
            n += 1
    return n


def read_dataset(path) -> list[TrainingInstance]:
    with Path(path).open(encoding="utf-8") as fh:
        return [TrainingInstance.from_dict(json.loads(line)) for line in fh if line.strip()]
