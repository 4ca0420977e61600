"""One decision step: request in, exactly one schema-valid tool reply out.

Two paths share the entry point.  The scripted stub answers without any
model: the first listed legal action, deterministically.  Every other
mechanism runs a small ReAct loop against the model, serving
activate_skill calls from client state in between, until the model
produces an engine-facing tool call.  Whatever goes wrong, the reply is
schema-valid and echoes the request's step_id; failures become an
`error` tool record the harness books as an invalid attempt.
"""
from __future__ import annotations

import json
from pathlib import Path
from typing import Optional

from arenaclient.config import ClientConfig, ConfigError, Mechanism
from arenaclient.model import ModelClient, ModelError, build_model
from arenaclient.prompts import TOOL_SCHEMAS, render_messages
from arenaclient.protocol import action_reply, error_reply
from arenaclient.skills import SkillStore
from arenaclient.state import read_text

_MEMORY_CONTEXT_EPISODES = 3


def _stub_reply(step_id, request: dict) -> dict:
    """First legal action; with no mask, resolve prompts minimally."""
    observation = request.get("observation") or {}
    actions = observation.get("available_actions")
    if isinstance(actions, list):
        for action in actions:
            if isinstance(action, dict) and isinstance(action.get("tool"), str):
                arguments = action.get("arguments")
                return action_reply(
                    step_id,
                    action["tool"],
                    arguments if isinstance(arguments, dict) else {},
                )
    if request.get("choosing_card"):
        choice = (observation.get("global") or {}).get("choice") or {}
        candidates = choice.get("candidates") or []
        take = choice.get("min_count", 1)
        take = take if isinstance(take, int) and take >= 0 else 1
        if candidates:
            return action_reply(
                step_id, "choose_card", {"chosen_cards": sorted(candidates)[:take]}
            )
    return action_reply(step_id, "pass_turn", {})


def _recent_reflections(root: Path, limit: int = 3) -> str:
    directory = root / "reflections"
    if not directory.is_dir():
        return ""
    files = sorted(p for p in directory.iterdir() if p.suffix == ".md")
    parts = [read_text(p).strip() for p in files[-limit:]]
    return "\n\n".join(p for p in parts if p)


def _observation_tokens(request: dict) -> set[str]:
    rendered = request.get("rendered")
    text = rendered if isinstance(rendered, str) else json.dumps(request.get("observation", {}))
    return {token for token in "".join(
        c.lower() if c.isalnum() else " " for c in text
    ).split() if len(token) > 2}


def _retrieved_memories(root: Path, request: dict) -> str:
    """Episodes scoring highest on token overlap with the observation."""
    episodes = []
    path = root / "memory" / "episodes.jsonl"
    try:
        with open(path) as handle:
            for line in handle:
                try:
                    row = json.loads(line)
                except json.JSONDecodeError:
                    continue
                if isinstance(row, dict) and isinstance(row.get("summary"), str):
                    episodes.append(row)
    except OSError:
        pass
    parts = []
    notes = read_text(root / "memory" / "notes.md").strip()
    if notes:
        parts.append(notes)
    if episodes:
        context = _observation_tokens(request)

        def score(row):
            words = {w for w in row["summary"].lower().split() if len(w) > 2}
            return (len(words & context), str(row.get("match_id", "")))

        best = sorted(episodes, key=score, reverse=True)[:_MEMORY_CONTEXT_EPISODES]
        parts.extend(
            f"[{row.get('match_id', 'game')}] {row['summary']}" for row in best
        )
    return "\n\n".join(parts)


def decision_context(
    config: ClientConfig,
    request: dict,
    skills: Optional[SkillStore] = None,
) -> list[tuple[str, str]]:
    """Mechanism-specific prompt sections read from the state dir."""
    if config.state_dir is None:
        return []
    root = Path(config.state_dir)
    mechanism = config.mechanism
    if mechanism is Mechanism.REFLEXION:
        text = _recent_reflections(root)
        return [("Reflections from recent games", text)] if text else []
    if mechanism is Mechanism.EXPEL:
        text = read_text(root / "lessons.md").strip()
        return [("Strategic lessons from earlier rounds", text)] if text else []
    if mechanism is Mechanism.MEMORY:
        text = _retrieved_memories(root, request)
        return [("Retrieved memories of past games", text)] if text else []
    if mechanism is Mechanism.PROMPT_EVOLUTION:
        text = read_text(root / "prompt" / "strategy.md").strip()
        return [("Evolved strategy", text)] if text else []
    if mechanism is Mechanism.SKILL_LIBRARY:
        store = skills or SkillStore(root)
        listing = store.listing()
        if listing:
            return [
                (
                    "Skill library (call activate_skill with a name for details)",
                    listing,
                )
            ]
    return []


def _serve_skill(config: ClientConfig, skills: Optional[SkillStore], arguments: dict) -> str:
    if config.mechanism is not Mechanism.SKILL_LIBRARY:
        return "skill retrieval is not available in this configuration"
    if skills is None:
        return "no skill library state dir is assigned"
    name = arguments.get("name")
    if not isinstance(name, str) or not name:
        return "activate_skill needs a skill name"
    resource = arguments.get("resource")
    return skills.activate(name, resource if isinstance(resource, str) else None)


def react_step(
    request: dict,
    config: ClientConfig,
    model: Optional[ModelClient] = None,
    skills: Optional[SkillStore] = None,
) -> dict:
    """Serve one decide request, returning the reply payload."""
    step_id = request.get("step_id")
    if config.mechanism is Mechanism.SCRIPTED_STUB:
        return _stub_reply(step_id, request)
    if model is None:
        try:
            model = build_model(config)
        except ConfigError as exc:
            return error_reply(step_id, str(exc))
    if skills is None and config.state_dir is not None:
        skills = SkillStore(config.state_dir)

    extras = decision_context(config, request, skills)
    messages = render_messages(request, config.prompt_template, extras)
    for inner in range(config.max_inner_steps):
        try:
            reply = model.complete(messages, tools=TOOL_SCHEMAS)
        except ModelError as exc:
            return error_reply(step_id, f"model call failed: {exc}")
        call = reply.tool_call
        if call is None:
            messages.append({"role": "assistant", "content": reply.text or ""})
            messages.append(
                {"role": "user", "content": "Reply with exactly one tool call."}
            )
            continue
        arguments = call.arguments if isinstance(call.arguments, dict) else None
        call_id = f"call_{inner}"
        assistant = {
            "role": "assistant",
            "content": reply.text or None,
            "tool_calls": [
                {
                    "id": call_id,
                    "type": "function",
                    "function": {
                        "name": call.tool,
                        "arguments": json.dumps(arguments or {}),
                    },
                }
            ],
        }
        if arguments is None:
            messages.append(assistant)
            messages.append(_tool_result(call_id, "tool arguments must be a JSON object"))
            continue
        if call.tool == "activate_skill":
            messages.append(assistant)
            messages.append(_tool_result(call_id, _serve_skill(config, skills, arguments)))
            continue
        if request.get("choosing_card") and call.tool != "choose_card":
            messages.append(assistant)
            messages.append(
                _tool_result(
                    call_id,
                    "rejected: a card selection is pending, respond with choose_card",
                )
            )
            continue
        return action_reply(step_id, call.tool, arguments)
    return error_reply(
        step_id, f"no usable tool call after {config.max_inner_steps} model turns"
    )


def _tool_result(call_id: str, content: str) -> dict:
    return {"role": "tool", "tool_call_id": call_id, "content": content}
