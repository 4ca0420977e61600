"""Per-player observations and their text renderings.

An observation is a plain dict holding exactly what one seat may see:
the full records of their own hand, public board state for both sides,
redacted summaries of the opponent's last turn, and (optionally) the
legal action set.  Hidden zones appear only as counts.

Two renderings exist for the same payload: a structured JSON form and a
flat key=value form.  They carry identical facts; which one an agent
receives is a harness configuration choice.
"""
from __future__ import annotations

import json
from typing import Any, Optional

from .engine import Engine, card_record
from .model import CardKind, GameState, Phase, PokemonInPlay

__all__ = [
    "build_observation",
    "render_structured",
    "render_raw",
    "flatten_observation",
]


def _pip_view(engine: Engine, state: GameState, pip: PokemonInPlay) -> dict:
    card = engine.pool.card(pip.top)
    hp_remaining = card.hp - pip.damage * 10
    return {
        "name": card.name,
        "field_index": pip.field_index,
        "stage": card.stage.value,
        "types": [t.value for t in card.types],
        "hp": card.hp,
        "damage": pip.damage * 10,
        "hp_remaining": hp_remaining,
        "conditions": sorted(c.value for c in pip.conditions),
        "energy": sorted(engine.pool.card(cid).name for cid in pip.energy),
        "tool": engine.pool.card(pip.tool).name if pip.tool else None,
        "ability": card.ability.name if card.ability else None,
        "attacks": [
            {"name": a.name, "cost": [t.value for t in a.cost], "damage": a.damage}
            for a in card.attacks
        ],
        "modifiers": [
            {"mode": m.mode, "delta": m.delta, "until_turn": m.until_turn}
            for m in pip.modifiers
            if m.until_turn >= state.turn_number
        ],
    }


def _side_view(engine: Engine, state: GameState, seat: int) -> dict:
    player = state.players[seat]
    return {
        "active": _pip_view(engine, state, player.active) if player.active else None,
        "bench": [_pip_view(engine, state, p) for p in player.bench],
        "hand_count": len(player.hand),
        "deck_count": len(player.deck),
        "discard": sorted(engine.pool.card(cid).name for cid in player.discard),
        "prizes_remaining": len(player.prizes),
        "prizes_taken": player.prizes_taken(),
    }


def build_observation(
    engine: Engine,
    state: GameState,
    viewer: int,
    masking: bool = True,
) -> dict:
    """The full observation payload for one seat.

    With `masking`, and only when the viewer owes the next decision,
    the payload carries `available_actions`: the exact legal set.  In
    every other case the key is absent entirely, so an unmasked
    observation never hints at the legal set and a bystander's
    observation never exposes the decider's options.
    """
    player = state.players[viewer]
    opp = 1 - viewer
    decider = state.decider() if state.phase is not Phase.FINISHED else None
    pending = state.pending_choice

    obs: dict[str, Any] = {
        "viewer": viewer,
        "private": {
            "hand": [card_record(engine.pool.card(cid)) for cid in sorted(player.hand)],
            "deck_count": len(player.deck),
            "prizes_remaining": len(player.prizes),
        },
        "public": {
            "you": _side_view(engine, state, viewer),
            "opponent": _side_view(engine, state, opp),
            "stadium": (
                {
                    "name": engine.pool.card(state.stadium).name,
                    "owner": "you" if state.stadium_owner == viewer else "opponent",
                }
                if state.stadium is not None
                else None
            ),
        },
        "global": {
            "turn": state.turn_number,
            "phase": state.phase.value,
            "active_player": "you" if state.active_player == viewer else "opponent",
            "you_went_first": state.first_player == viewer,
            "you_are_deciding": decider == viewer,
            "choosing_card": bool(pending) and decider == viewer,
            "choice": (
                {
                    "reason": pending.reason,
                    "candidates": sorted(pending.candidates),
                    "min_count": pending.min_count,
                    "max_count": pending.max_count,
                }
                if pending is not None and pending.chooser == viewer
                else None
            ),
        },
        "opponent_last_turn_actions": list(state.prev_turn_summaries[opp]),
    }
    if masking and decider == viewer:
        obs["available_actions"] = [a.to_payload() for a in engine.legal_actions(state)]
    return obs


def render_structured(obs: dict) -> str:
    """Structured rendering: indented JSON with stable key order."""
    return json.dumps(obs, indent=2, sort_keys=True)


def flatten_observation(obs: dict) -> dict[str, Any]:
    """Flatten a payload to dotted-path keys with scalar leaf values."""
    out: dict[str, Any] = {}

    def walk(prefix: str, value: Any) -> None:
        if isinstance(value, dict):
            if not value:
                out[prefix] = "{}"
                return
            for k in sorted(value):
                walk(f"{prefix}.{k}" if prefix else str(k), value[k])
        elif isinstance(value, list):
            if not value:
                out[prefix] = "[]"
                return
            for i, item in enumerate(value):
                walk(f"{prefix}[{i}]", item)
        else:
            out[prefix] = value

    walk("", obs)
    return out


def render_raw(obs: dict) -> str:
    """Flat rendering: one `path=value` line per leaf fact."""
    flat = flatten_observation(obs)
    lines = [f"{path}={json.dumps(value)}" for path, value in sorted(flat.items())]
    return "\n".join(lines)
