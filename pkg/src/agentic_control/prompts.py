"""Role/goal/task prompt templates with ``{placeholder}`` substitution."""

from __future__ import annotations

import string
from dataclasses import dataclass, fields
from functools import lru_cache
from importlib import resources
from numbers import Integral, Real
from pathlib import Path
from typing import Any, Mapping

import yaml

SYSTEM_FIELDS = ("role", "goal", "backstory", "skills")
USER_FIELDS = ("task", "description", "note", "expected_output")


class UnboundPlaceholder(KeyError):
    def __init__(self, key: str):
        super().__init__(key)
        self.key = key

    def __str__(self) -> str:
        return f"unbound placeholder {self.key!r}"


@dataclass(frozen=True)
class PromptTemplate:
    name: str
    agent: str = ""
    role: str = ""
    goal: str = ""
    backstory: str = ""
    skills: str = ""
    task: str = ""
    description: str = ""
    note: str = ""
    expected_output: str = ""

    @property
    def placeholders(self) -> tuple[str, ...]:
        seen: dict[str, None] = {}
        for f in SYSTEM_FIELDS + USER_FIELDS:
            for _, key, _, _ in string.Formatter().parse(getattr(self, f)):
                if key:
                    seen.setdefault(key, None)
        return tuple(seen)

    @classmethod
    def from_mapping(cls, name: str, data: Mapping[str, Any]) -> "PromptTemplate":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"template {name!r}: unknown fields {sorted(unknown)}")
        clean = {k: str(v).strip() for k, v in data.items()}
        return cls(name=name, **{k: v for k, v in clean.items() if k != "name"})


def format_value(value: Any) -> str:
    """Numbers get 6 significant digits; everything else uses ``str``."""
    if isinstance(value, bool):
        return str(value)
    if isinstance(value, Integral):
        return str(int(value))
    if isinstance(value, Real):
        return format(float(value), ".6g")
    return str(value)


def _substitute(text: str, bindings: Mapping[str, Any]) -> str:
    out = []
    for literal, key, spec, conv in string.Formatter().parse(text):
        out.append(literal)
        if key is None:
            continue
        if key not in bindings:
            raise UnboundPlaceholder(key)
        out.append(format_value(bindings[key]))
    return "".join(out)


def _join(template: PromptTemplate, names, bindings, labels: bool) -> str:
    parts = []
    for f in names:
        text = getattr(template, f)
        if not text:
            continue
        text = _substitute(text, bindings)
        if labels:
            text = f"{f.replace('_', ' ').capitalize()}: {text}"
        parts.append(text)
    return "\n\n".join(parts)


def _check_bound(template: PromptTemplate, names, bindings: Mapping[str, Any]) -> None:
    for f in names:
        for _, key, _, _ in string.Formatter().parse(getattr(template, f)):
            if key and key not in bindings:
                raise UnboundPlaceholder(key)


def render_prompt(template: PromptTemplate, bindings: Mapping[str, Any] | None = None) -> str:
    """Render the task side of ``template`` (task, description, note, output)."""
    bindings = bindings or {}
    _check_bound(template, USER_FIELDS, bindings)
    labels = sum(bool(getattr(template, f)) for f in USER_FIELDS) > 1
    return _join(template, USER_FIELDS, bindings, labels)


def render_system(template: PromptTemplate, bindings: Mapping[str, Any] | None = None) -> str:
    """Render the agent persona (role, goal, backstory, skills)."""
    bindings = bindings or {}
    _check_bound(template, SYSTEM_FIELDS, bindings)
    return _join(template, SYSTEM_FIELDS, bindings, labels=True)


def load_templates(path: str | Path) -> dict[str, PromptTemplate]:
    data = yaml.safe_load(Path(path).read_text()) or {}
    return {name: PromptTemplate.from_mapping(name, body) for name, body in data.items()}


@lru_cache(maxsize=None)
def bundled_templates() -> dict[str, PromptTemplate]:
    """Templates shipped with the package, keyed by name."""
    out: dict[str, PromptTemplate] = {}
    root = resources.files("agentic_control") / "templates"
    for entry in sorted(root.iterdir(), key=lambda p: p.name):
        if entry.name.endswith(".yaml"):
            data = yaml.safe_load(entry.read_text()) or {}
            for name, body in data.items():
                out[name] = PromptTemplate.from_mapping(name, body)
    return out


def get_template(name: str) -> PromptTemplate:
    try:
        return bundled_templates()[name]
    except KeyError:
        raise KeyError(f"no bundled template {name!r}") from None
