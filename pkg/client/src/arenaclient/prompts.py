"""Prompt templates and request-to-messages rendering for the ReAct loop."""
from __future__ import annotations

import json
from typing import Optional

_REACT_BATTLE_V1 = """\
Role.
You are a trading-card battle agent playing a Pokemon-style two-player game
using the ReAct pattern. At each decision step, analyze the current game
state and then call exactly one tool.

Objective.
Win the game by taking all of your Prize cards, knocking out all of the
opponent's Pokemon in play, or leaving the opponent unable to draw at the
start of their turn.

Turn structure.
Each turn consists of drawing a card, taking legal in-turn actions, and
optionally attacking. Legal in-turn actions include playing Basic Pokemon,
evolving eligible Pokemon, attaching one Energy card, playing Trainer
cards, using Abilities, retreating the Active Pokemon, and passing the
turn. Attacking ends the turn after damage, effects, knockouts,
prize-taking, and win checks resolve.

Rules reminders.
- A Pokemon cannot evolve the turn it entered play, and nothing evolves on
  either player's first turn.
- The player who goes first can neither attack nor play a Supporter on
  their first turn.
- One Energy attachment, one Supporter, and one Stadium per turn; Items
  are unrestricted.
- Retreating costs attached Energy equal to the retreat cost and happens
  at most once per turn.
- Damage lands in multiples of 10; Weakness doubles attack damage.
- Special Conditions (Asleep, Paralyzed, Confused, Poisoned, Burned)
  affect only the Active Pokemon and are checked between turns.
- A Pokemon with damage at or above its HP is knocked out: it goes to the
  discard pile with everything attached, and the opponent takes prizes.

Observation reading.
The current game state arrives as a structured observation. The field
`available_actions`, when present, is authoritative: choose only actions
listed there. If `choosing_card` is true, resolve that selection prompt
with the choose_card tool before anything else. Use
`opponent_last_turn_actions` to infer what changed. Your hand is visible;
the opponent's hand and both decks stay hidden.

Decision pattern.
Before acting, weigh HP and damage, Energy attachments, available attacks,
prize counts, immediate threats, and possible win conditions. Then call
the appropriate tool. A full game turn usually takes several decision
steps because each game action executes separately.

Action discipline.
Call at most one game-action tool in each response. Copy card names,
attack names, targets, and indices exactly from the observation or
`available_actions`. Never invent actions, targets, card names, or attack
names. If an intended action is not listed in `available_actions`, it is
not currently legal. If an action fails, inspect the updated observation
and query the relevant cards before trying again.

Tools.
Use query tools (query_card, query_discard) when card text, discard
contents, attack effects, or retreat costs are uncertain. Use game-action
tools (attack, play_pokemon, evolve_pokemon, attach_energy, use_supporter,
use_item, use_tool, put_stadium, discard_stadium, use_stadium,
use_ability, retreat, choose_card, pass_turn) only when the corresponding
action is legal in the current observation.
"""

TEMPLATES: dict[str, str] = {
    "react-battle-v1": _REACT_BATTLE_V1,
}


def _fn(name: str, description: str, required: dict, optional: dict = ()) -> dict:
    properties = dict(required)
    properties.update(optional or {})
    return {
        "type": "function",
        "function": {
            "name": name,
            "description": description,
            "parameters": {
                "type": "object",
                "properties": properties,
                "required": sorted(required),
            },
        },
    }


_STR = {"type": "string"}

# Chat-API tool declarations mirroring the engine's argument table.
TOOL_SCHEMAS: list[dict] = [
    _fn("attack", "Use the Active Pokemon's attack; ends the turn.",
        {"source_card": _STR, "attack_name": _STR}),
    _fn("play_pokemon", "Play a Basic Pokemon to the active spot or bench.",
        {"source_card": _STR, "position": {"type": "string", "enum": ["active", "bench"]}}),
    _fn("evolve_pokemon", "Evolve a Pokemon in play.",
        {"source_card": _STR, "target_card": _STR},
        {"target_index": {"type": "integer"}}),
    _fn("attach_energy", "Attach one Energy card from hand.",
        {"source_card": _STR, "target_card": _STR},
        {"target_index": {"type": "integer"}}),
    _fn("use_supporter", "Play a Supporter card.", {"source_card": _STR}),
    _fn("use_item", "Play an Item card.", {"source_card": _STR}),
    _fn("use_tool", "Attach a Tool card to a Pokemon.",
        {"source_card": _STR, "target_card": _STR},
        {"target_index": {"type": "integer"}}),
    _fn("put_stadium", "Play a Stadium card.", {"source_card": _STR}),
    _fn("discard_stadium", "Discard the Stadium in play.", {"source_card": _STR}),
    _fn("use_stadium", "Activate the Stadium's effect.", {"source_card": _STR}),
    _fn("use_ability", "Activate a Pokemon Ability.",
        {"source_card": _STR},
        {"ability_name": _STR, "target_index": {"type": "integer"}}),
    _fn("retreat", "Retreat the Active Pokemon.", {"source_card": _STR}),
    _fn("choose_card", "Resolve a pending card-selection prompt.",
        {"chosen_cards": {"type": "array", "items": _STR}}),
    _fn("pass_turn", "End the current turn without further action.", {}),
    _fn("query_card", "Query exact card text and metadata.", {"card_id": _STR}),
    _fn("query_discard", "Inspect a player's discard pile.",
        {"player": {"type": "integer", "enum": [0, 1]}}),
    _fn("activate_skill", "Load stored skill guidance by name.",
        {"name": _STR}, {"resource": _STR}),
]


def _history_lines(history: list) -> list[str]:
    lines = []
    for entry in history or []:
        if not isinstance(entry, dict):
            continue
        mark = " (fallback)" if entry.get("fallback") else ""
        err = entry.get("last_error")
        note = f" [rejected: {err}]" if entry.get("invalid_attempts") and err else ""
        lines.append(
            f"step {entry.get('step_id')} turn {entry.get('turn')}: "
            f"{entry.get('tool')} {json.dumps(entry.get('arguments', {}), sort_keys=True)}"
            f"{mark}{note}"
        )
    return lines


def render_messages(
    request: dict,
    template_id: str,
    extras: Optional[list[tuple[str, str]]] = None,
) -> list[dict]:
    """System + user messages for one decision step.

    `extras` are mechanism-provided context sections (reflections,
    lessons, retrieved memories, an evolved strategy, skill listings),
    appended to the system prompt under their own headers.
    """
    system = TEMPLATES[template_id]
    for title, body in extras or []:
        body = body.strip()
        if body:
            system += f"\n{title}.\n{body}\n"

    parts: list[str] = []
    rendered = request.get("rendered")
    if isinstance(rendered, str) and rendered:
        parts.append(f"Observation:\n{rendered}")
    else:
        parts.append(
            "Observation:\n"
            + json.dumps(request.get("observation", {}), indent=2, sort_keys=True)
        )
    history = _history_lines(request.get("history") or [])
    if history:
        parts.append("Recent steps this game:\n" + "\n".join(history))
    answers = request.get("query_answers") or []
    if answers:
        blocks = [
            json.dumps(a, indent=2, sort_keys=True) for a in answers
        ]
        parts.append("Answers to your queries this step:\n" + "\n".join(blocks))
    last_error = request.get("last_error")
    if last_error:
        parts.append(
            f"Your previous reply for this step failed: {last_error}\n"
            "Pick an action listed in available_actions."
        )
    if request.get("choosing_card"):
        parts.append(
            "A card selection is pending: respond with the choose_card tool, "
            "copying tokens from the choice candidates."
        )
    parts.append("Call exactly one tool now.")
    return [
        {"role": "system", "content": system},
        {"role": "user", "content": "\n\n".join(parts)},
    ]
