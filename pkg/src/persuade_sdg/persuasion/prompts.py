"""Prompt templates shipped as text assets, and the labeled-field reply parser."""
from __future__ import annotations

import re
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from typing import Mapping

from ..policy.base import ChatPrompt

PLACEHOLDERS = (
    "game_rules", "player_name", "player_role", "game_state", "dialog_history",
    "next_player_name", "base_utterance", "target_response",
)
_SLOT = re.compile(r"\{(" + "|".join(PLACEHOLDERS) + r")\}")
_SOURCES = ("system", "user", "assistant")

# Labels each template asks the model to fill in, in order.
OUTPUT_FIELDS = {
    "intent": ("Strategic Analysis", "Most Desired Response", "Most Undesired Response"),
    "base": ("Response",),
    "refine": ("Analysis", "Response"),
    "measure": ("Response",),
}


class TemplateError(ValueError):
    pass


@dataclass(frozen=True)
class PromptTemplate:
    template_id: str
    parts: tuple[tuple[str, str], ...]
    output_fields: tuple[str, ...]

    @property
    def placeholders(self) -> set[str]:
        return {m for _, body in self.parts for m in _SLOT.findall(body)}

    def render(self, bindings: Mapping[str, str], *, upto: str | None = None) -> ChatPrompt:
        """Fill every placeholder. With ``upto`` the last part is cut just before
        that placeholder, which leaves an assistant prefix to continue from."""
        missing = self.placeholders - set(bindings)
        if upto is not None:
            missing.discard(upto)
        if missing:
            raise TemplateError(f"{self.template_id}: unbound placeholders {sorted(missing)}")
        out = []
        for source, body in self.parts:
            if upto is not None and "{" + upto + "}" in body:
                body = body.split("{" + upto + "}", 1)[0]
                out.append((source, _SLOT.sub(lambda m: str(bindings[m.group(1)]), body)))
                break
            out.append((source, _SLOT.sub(lambda m: str(bindings[m.group(1)]), body)))
        return ChatPrompt.of(*out)


@lru_cache(maxsize=None)
def load_template(template_id: str) -> PromptTemplate:
    if template_id not in OUTPUT_FIELDS:
        raise TemplateError(f"unknown template {template_id!r}")
    root = resources.files(__package__) / "templates"
    parts = []
    for source in _SOURCES:
        f = root / f"{template_id}.{source}.txt"
        if f.is_file():
            parts.append((source, f.read_text(encoding="utf-8")))
    return PromptTemplate(template_id, tuple(parts), OUTPUT_FIELDS[template_id])


def assistant_prefix() -> str:
    """Text the measurement reply opens with before the scored response."""
    tpl = load_template("measure")
    body = dict(tpl.parts)["assistant"]
    return body.split("{target_response}", 1)[0]


_FENCE = re.compile(r"^\s*```[\w-]*\s*$")


def parse_fields(text: str, labels) -> dict[str, str]:
    """Pull ``Label: value`` fields out of a reply.

    A value runs until the next known label or the end of the reply. Code
    fence lines are ignored. Missing or empty fields are left out.
    """
    lines = [ln for ln in text.splitlines() if not _FENCE.match(ln)]
    body = "\n".join(lines)
    pattern = re.compile(
        r"^[ \t>*#-]*\**(" + "|".join(re.escape(l) for l in labels) + r")\**\s*:\**[ \t]*",
        re.MULTILINE,
    )
    hits = list(pattern.finditer(body))
    out: dict[str, str] = {}
    for i, m in enumerate(hits):
        end = hits[i + 1].start() if i + 1 < len(hits) else len(body)
        value = body[m.end():end].strip()
        if value.startswith("[") and value.endswith("]"):
            value = value[1:-1].strip()
        if value and m.group(1) not in out:
            out[m.group(1)] = value
    return out
