"""Prompt templates with named ``{placeholder}`` slots.

Substitution is single-pass, so text inserted into a slot is never scanned
for further placeholders. ``{{`` and ``}}`` produce literal braces.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Mapping, Optional

from ehc.errors import ConfigError

_SLOT_RE = re.compile(r"\{\{|\}\}|\{([A-Za-z_][A-Za-z0-9_]*)\}")

LABEL_SLOTS = frozenset({"task", "categories"})
TRAJECTORY_SLOTS = frozenset({"task", "history", "reflections"})
REFLECTION_SLOTS = frozenset({"task", "history", "trajectory", "reflections"})
INSIGHT_SLOTS = frozenset({"category", "insights", "pairs", "groups"})
INFERENCE_SLOTS = frozenset({"task", "insights", "exemplars"})


def placeholders(template: str) -> set[str]:
    return {m.group(1) for m in _SLOT_RE.finditer(template) if m.group(1)}


def check_template(template: str, allowed: frozenset[str], name: str = "template") -> None:
    unknown = placeholders(template) - allowed
    if unknown:
        raise ConfigError(
            f"{name}: unknown placeholder(s) {sorted(unknown)}; allowed: {sorted(allowed)}"
        )


def render(template: str, values: Mapping[str, str], allowed: Optional[frozenset[str]] = None) -> str:
    if allowed is not None:
        check_template(template, allowed)

    def sub(m: re.Match) -> str:
        tok = m.group(0)
        if tok == "{{":
            return "{"
        if tok == "}}":
            return "}"
        try:
            return values[m.group(1)]
        except KeyError:
            raise ConfigError(f"no value supplied for placeholder {{{m.group(1)}}}") from None

    return _SLOT_RE.sub(sub, template)


def default_template(name: str) -> str:
    return resources.files("ehc").joinpath("data", "templates", f"{name}.txt").read_text("utf-8")


def load_template(path: Optional[str | Path], default_name: str) -> str:
    if path is None or path == "":
        return default_template(default_name)
    try:
        return Path(path).read_text("utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read template {path}: {exc}") from exc


@dataclass
class Templates:
    label: str
    trajectory: str
    reflection: str
    insight: str
    inference: str

    def __post_init__(self) -> None:
        check_template(self.label, LABEL_SLOTS, "label template")
        check_template(self.trajectory, TRAJECTORY_SLOTS, "trajectory template")
        check_template(self.reflection, REFLECTION_SLOTS, "reflection template")
        check_template(self.insight, INSIGHT_SLOTS, "insight template")
        check_template(self.inference, INFERENCE_SLOTS, "inference template")

    @classmethod
    def load(cls, paths: Optional[Mapping[str, Optional[str]]] = None) -> "Templates":
        paths = paths or {}
        return cls(**{
            name: load_template(paths.get(name), name)
            for name in ("label", "trajectory", "reflection", "insight", "inference")
        })
