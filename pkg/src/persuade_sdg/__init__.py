"""Game engines, a leader-to-follower persuasion reward and a GRPO trainer for
social deduction games."""
from .avalon import AvalonGame
from .core import DialogueHistory, GameEngine, GameEvent, GameOutcome, PublicState, Team
from .onuw import OnuwGame
from .werewolf import WerewolfGame

__version__ = "0.1.0"

__all__ = [
    "AvalonGame", "DialogueHistory", "GameEngine", "GameEvent", "GameOutcome", "OnuwGame",
    "PublicState", "Team", "WerewolfGame", "__version__",
]
