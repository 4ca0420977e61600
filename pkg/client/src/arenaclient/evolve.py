"""Between-round evolution: turn a round's trajectories into state.

Each mechanism converts finished games into a different persistent form:
per-game reflections, distilled lessons, retrievable episode memories, a
revised strategy prompt, or structured skills.  All model output for a
round is collected before anything is written, so a model failure leaves
the previous state fully intact and is reported as an evolve error.

The trajectory digesting, retrieval scoring, summarization cadence, and
artifact formats here are this package's own constructions; upstream
work describes the mechanisms only qualitatively.
"""
from __future__ import annotations

import json
from pathlib import Path
from typing import Optional

from arenaclient.config import ClientConfig, ConfigError, Mechanism
from arenaclient.model import ModelClient, ModelError, build_model
from arenaclient.protocol import evolve_error, evolve_ok
from arenaclient.skills import SkillStore, parse_skills
from arenaclient.state import append_line, atomic_write_json, atomic_write_text, confine, read_json, read_text, slug
from arenaclient.trajectories import TrajectoryDigest, parse_trajectory, render_digest

# Episode compression cadence for the memory mechanism.
_SUMMARIZE_EVERY = 4

_REFLEXION_SYSTEM = (
    "You are reviewing one finished trading-card game you played. Write a "
    "short reflection: key mistakes, missed opportunities, and one or two "
    "strategic lessons for the next game. Be concrete about cards and turns."
)

_EXPEL_SYSTEM = (
    "You distill finished trading-card games into reusable strategic "
    "lessons. Merge the prior lessons with what this round's games show. "
    "Return the complete revised lesson list as short imperative bullets, "
    "most valuable first. Drop lessons the new games contradict."
)

_MEMORY_SYSTEM = (
    "Summarize this finished trading-card game in two or three sentences "
    "a future player could act on: the plan, the turning point, the result."
)

_MEMORY_NOTES_SYSTEM = (
    "Compress these episodic game summaries into a compact set of "
    "higher-level strategic notes. Keep only what transfers across games."
)

_PROMPT_SYSTEM = (
    "You maintain the strategy section of a trading-card agent's "
    "instructions. Given the current strategy text and this round's game "
    "summaries, identify recurring failure modes and return the full "
    "revised strategy text. Keep it under thirty lines."
)

_SKILLS_SYSTEM = (
    "You maintain a library of trading-card strategy skills. From this "
    "round's games, distill zero or more new or revised skills. Reply "
    "with a JSON array; each element has the keys name, activation, "
    "objective, and principles (a list of strings)."
)


def _complete_text(model: ModelClient, system: str, user: str) -> str:
    reply = model.complete(
        [
            {"role": "system", "content": system},
            {"role": "user", "content": user},
        ]
    )
    return reply.text or ""


def _digest_block(digests: list[TrajectoryDigest]) -> str:
    return "\n\n".join(render_digest(d) for d in digests) or "(no games this round)"


def _evolve_reflexion(
    root: Path, round_index: int, digests: list[TrajectoryDigest], model: ModelClient
) -> None:
    # one artifact per game, written only after every call succeeded
    artifacts = []
    for digest in digests:
        text = _complete_text(model, _REFLEXION_SYSTEM, render_digest(digest))
        path = confine(
            root, "reflections", f"round_{round_index:02d}_{slug(digest.match_id)}.md"
        )
        artifacts.append((path, f"# Reflection on {digest.match_id}\n\n{text.strip()}\n"))
    for path, text in artifacts:
        atomic_write_text(path, text)


def _evolve_expel(
    root: Path, round_index: int, digests: list[TrajectoryDigest], model: ModelClient
) -> None:
    previous = read_text(root / "lessons.md").strip() or "(none yet)"
    user = f"Current lessons:\n{previous}\n\nThis round's games:\n{_digest_block(digests)}"
    lessons = _complete_text(model, _EXPEL_SYSTEM, user).strip() + "\n"
    atomic_write_text(confine(root, "lessons", f"round_{round_index:02d}.md"), lessons)
    atomic_write_text(confine(root, "lessons.md"), lessons)


def _evolve_memory(
    root: Path, round_index: int, digests: list[TrajectoryDigest], model: ModelClient
) -> None:
    episodes = []
    for digest in digests:
        summary = _complete_text(model, _MEMORY_SYSTEM, render_digest(digest)).strip()
        episodes.append(
            {"round": round_index, "match_id": digest.match_id, "summary": summary}
        )
    notes: Optional[str] = None
    if round_index > 0 and round_index % _SUMMARIZE_EVERY == 0:
        stored = read_text(root / "memory" / "episodes.jsonl")
        prior_notes = read_text(root / "memory" / "notes.md").strip()
        user = f"Existing notes:\n{prior_notes or '(none)'}\n\nEpisodes:\n{stored}"
        notes = _complete_text(model, _MEMORY_NOTES_SYSTEM, user).strip() + "\n"

    path = confine(root, "memory", "episodes.jsonl")
    for episode in episodes:
        append_line(path, json.dumps(episode, sort_keys=True))
    index_path = confine(root, "memory", "index.json")
    index = read_json(index_path, default={"episodes": 0, "rounds": []})
    index["episodes"] = index.get("episodes", 0) + len(episodes)
    rounds = index.setdefault("rounds", [])
    if round_index not in rounds:
        rounds.append(round_index)
    atomic_write_json(index_path, index)
    if notes is not None:
        atomic_write_text(confine(root, "memory", "notes.md"), notes)


def _evolve_prompt(
    root: Path, round_index: int, digests: list[TrajectoryDigest], model: ModelClient
) -> None:
    current = read_text(root / "prompt" / "strategy.md").strip() or "(none yet)"
    user = f"Current strategy:\n{current}\n\nThis round's games:\n{_digest_block(digests)}"
    revised = _complete_text(model, _PROMPT_SYSTEM, user).strip() + "\n"
    atomic_write_text(confine(root, "prompt", f"round_{round_index:02d}.md"), revised)
    atomic_write_text(confine(root, "prompt", "strategy.md"), revised)


def _evolve_skills(
    root: Path, round_index: int, digests: list[TrajectoryDigest], model: ModelClient
) -> None:
    store = SkillStore(root)
    existing = store.listing() or "(empty)"
    user = f"Stored skills:\n{existing}\n\nThis round's games:\n{_digest_block(digests)}"
    text = _complete_text(model, _SKILLS_SYSTEM, user)
    for skill in parse_skills(text):
        store.save(skill, round_index)


_MECHANISM_STEPS = {
    Mechanism.REFLEXION: _evolve_reflexion,
    Mechanism.EXPEL: _evolve_expel,
    Mechanism.MEMORY: _evolve_memory,
    Mechanism.PROMPT_EVOLUTION: _evolve_prompt,
    Mechanism.SKILL_LIBRARY: _evolve_skills,
}


def evolve(
    message: dict,
    config: ClientConfig,
    model: Optional[ModelClient] = None,
) -> dict:
    """Serve one evolve request, returning `{"status": ...}`."""
    mechanism = config.mechanism
    if mechanism is Mechanism.NONE:
        return evolve_ok()
    state_dir = message.get("state_dir") or config.state_dir
    if not state_dir:
        return evolve_error("no state dir assigned")
    root = Path(state_dir)
    root.mkdir(parents=True, exist_ok=True)
    round_index = message.get("round", 0)
    round_index = round_index if isinstance(round_index, int) else 0

    if mechanism is Mechanism.SCRIPTED_STUB:
        append_line(root / "stub.log", f"stub marker round={round_index:02d}")
        return evolve_ok()

    digests = []
    for path in message.get("trajectories") or []:
        if not isinstance(path, str):
            continue
        try:
            digests.append(parse_trajectory(path))
        except OSError as exc:
            return evolve_error(f"cannot read trajectory {path}: {exc}")
    if model is None:
        try:
            model = build_model(config)
        except ConfigError as exc:
            return evolve_error(str(exc))
    try:
        _MECHANISM_STEPS[mechanism](root, round_index, digests, model)
    except ModelError as exc:
        return evolve_error(f"model call failed: {exc}")
    except ValueError as exc:
        return evolve_error(str(exc))
    return evolve_ok()
