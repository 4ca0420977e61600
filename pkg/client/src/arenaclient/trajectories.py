"""Reader for the harness's line-delimited trajectory logs.

A log is one header row, then action and event rows, then one result
row; all are JSON objects with a `kind` field.  The digests built here
feed the evolution prompts, so they stay compact: tool calls with their
arguments, notable events, and the terminal result.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Union


@dataclass
class TrajectoryDigest:
    match_id: str = "unknown"
    seed: Optional[int] = None
    deck_labels: list = field(default_factory=list)
    turns: Optional[int] = None
    winner: Optional[int] = None
    reason: Optional[str] = None
    actions: list[str] = field(default_factory=list)
    events: list[str] = field(default_factory=list)

    @property
    def outcome(self) -> str:
        if self.winner is None and self.reason is None:
            return "unknown result"
        if self.winner is None:
            return f"draw ({self.reason}) after {self.turns} turns"
        return f"player {self.winner} wins by {self.reason} after {self.turns} turns"


def parse_trajectory(path: Union[str, Path]) -> TrajectoryDigest:
    """Digest one log; tolerant of rows it does not recognize."""
    digest = TrajectoryDigest()
    with open(path) as handle:
        for raw in handle:
            raw = raw.strip()
            if not raw:
                continue
            try:
                row = json.loads(raw)
            except json.JSONDecodeError:
                continue
            if not isinstance(row, dict):
                continue
            kind = row.get("kind")
            if kind == "header":
                digest.match_id = row.get("match_id", digest.match_id)
                digest.seed = row.get("seed")
                labels = row.get("deck_labels")
                if isinstance(labels, list):
                    digest.deck_labels = labels
            elif kind == "action":
                payload = row.get("payload", {})
                digest.actions.append(
                    f"turn {row.get('turn')} player {row.get('actor')}: "
                    f"{payload.get('tool')} "
                    f"{json.dumps(payload.get('arguments', {}), sort_keys=True)}"
                )
            elif kind == "event":
                payload = row.get("payload", {})
                name = payload.get("event", "event")
                detail = {k: v for k, v in payload.items() if k != "event"}
                digest.events.append(
                    f"turn {row.get('turn')}: {name} {json.dumps(detail, sort_keys=True)}"
                )
            elif kind == "result":
                digest.winner = row.get("winner")
                digest.reason = row.get("reason")
                digest.turns = row.get("turns")
    return digest


def render_digest(digest: TrajectoryDigest, max_actions: int = 40) -> str:
    """Prompt-sized text: the opening, the closing stretch, the outcome."""
    lines = [f"game {digest.match_id}: {digest.outcome}"]
    if digest.deck_labels:
        lines.append(f"decks: {' vs '.join(str(d) for d in digest.deck_labels)}")
    actions = digest.actions
    if len(actions) > max_actions:
        head = actions[: max_actions // 2]
        tail = actions[-(max_actions - len(head)):]
        actions = head + [f"... {len(digest.actions) - max_actions} steps elided ..."] + tail
    lines.extend(actions)
    knockouts = [e for e in digest.events if "knock_out" in e]
    if knockouts:
        lines.append("knockouts:")
        lines.extend(knockouts[-6:])
    return "\n".join(lines)
