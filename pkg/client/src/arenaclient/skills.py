"""Skill library store: structured strategy skills kept as JSON files.

A skill names an activation condition, a strategic objective, and a list
of decision principles.  The store answers activate_skill calls during
play and absorbs newly distilled skills between rounds.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional, Union

from arenaclient.state import atomic_write_json, confine, read_json, slug

_INDEX = "index.json"


@dataclass
class Skill:
    name: str
    activation: str = ""
    objective: str = ""
    principles: list[str] = field(default_factory=list)

    def guidance(self, resource: Optional[str] = None) -> str:
        lines = [f"skill {self.name}"]
        if self.activation:
            lines.append(f"when: {self.activation}")
        if self.objective:
            lines.append(f"objective: {self.objective}")
        for principle in self.principles:
            lines.append(f"- {principle}")
        if resource:
            lines.append(f"(requested resource {resource!r} has no extra material)")
        return "\n".join(lines)


class SkillStore:
    def __init__(self, state_dir: Union[str, Path]):
        self.root = Path(state_dir)
        self.dir = self.root / "skills"

    def _index_path(self) -> Path:
        return self.dir / _INDEX

    def names(self) -> list[str]:
        index = read_json(self._index_path(), default={"skills": {}})
        return sorted(index.get("skills", {}))

    def load(self, name: str) -> Optional[Skill]:
        index = read_json(self._index_path(), default={"skills": {}})
        entry = index.get("skills", {}).get(name)
        if entry is None:
            return None
        payload = read_json(confine(self.root, "skills", entry["file"]))
        if not isinstance(payload, dict):
            return None
        return Skill(
            name=payload.get("name", name),
            activation=payload.get("activation", ""),
            objective=payload.get("objective", ""),
            principles=list(payload.get("principles", [])),
        )

    def save(self, skill: Skill, round_index: int) -> Path:
        filename = f"{slug(skill.name)}.json"
        path = confine(self.root, "skills", filename)
        atomic_write_json(path, asdict(skill))
        index = read_json(self._index_path(), default={"skills": {}})
        skills = index.setdefault("skills", {})
        skills[skill.name] = {"file": filename, "round": round_index}
        atomic_write_json(self._index_path(), index)
        return path

    def activate(self, name: str, resource: Optional[str] = None) -> str:
        skill = self.load(name)
        if skill is None:
            known = ", ".join(self.names()) or "none stored yet"
            return f"no skill named {name!r} (stored skills: {known})"
        return skill.guidance(resource)

    def listing(self) -> str:
        """One line per skill for the system prompt."""
        lines = []
        for name in self.names():
            skill = self.load(name)
            if skill is not None:
                lines.append(f"- {skill.name}: {skill.activation or 'general guidance'}")
        return "\n".join(lines)


def parse_skills(text: str) -> list[Skill]:
    """Skills from a model reply: a JSON array, possibly fenced in prose."""
    candidates = [text]
    start, end = text.find("["), text.rfind("]")
    if 0 <= start < end:
        candidates.append(text[start : end + 1])
    for candidate in candidates:
        try:
            payload = json.loads(candidate)
        except json.JSONDecodeError:
            continue
        if isinstance(payload, dict):
            payload = [payload]
        if not isinstance(payload, list):
            continue
        skills = []
        for entry in payload:
            if isinstance(entry, dict) and isinstance(entry.get("name"), str):
                skills.append(
                    Skill(
                        name=entry["name"],
                        activation=str(entry.get("activation", "")),
                        objective=str(entry.get("objective", "")),
                        principles=[str(p) for p in entry.get("principles", [])],
                    )
                )
        if skills:
            return skills
    return []
