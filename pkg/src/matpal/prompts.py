"""Prompt templates for concept training and texture generation."""
from __future__ import annotations

import dataclasses

TOKEN = "{token}"

# Shipped training template (single placeholder for the learned token).
TRAIN_TEMPLATE = "an object with {token} texture"

# Shipped generation templates; index 3 is the default (best distribution
# match in our ranking experiments).
GEN_TEMPLATES = (
    "a photo of a {token}",
    "a {token} material",
    "a {token} texture",
    "realistic {token} texture in top view",
    "high resolution realistic {token} texture in top view",
)
DEFAULT_GEN_TEMPLATE = GEN_TEMPLATES[3]


@dataclasses.dataclass(frozen=True)
class PromptTemplate:
    template: str
    role: str  # "train" or "generate"

    def __post_init__(self):
        if self.role not in ("train", "generate"):
            raise ValueError("role must be 'train' or 'generate'")
        if self.template.count(TOKEN) != 1:
            raise ValueError("template must contain exactly one {token} placeholder")

    def format(self, token: str) -> str:
        return self.template.format(token=token)


def train_prompt(token: str = "S*") -> str:
    return PromptTemplate(TRAIN_TEMPLATE, "train").format(token)


def generation_prompt(token: str, template: str = DEFAULT_GEN_TEMPLATE) -> str:
    return PromptTemplate(template, "generate").format(token)
