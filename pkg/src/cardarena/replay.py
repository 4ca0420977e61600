"""Trajectory logs: line-delimited JSON game records.

A trajectory file holds one header line, then one line per action and
engine event in execution order (each stamped with the post-action
state hash), and a final result line.  Verification replays the actions
from the header's decks and seed and requires every row, hash included,
to reproduce exactly.
"""
from __future__ import annotations

import json
from pathlib import Path
from typing import Optional, TextIO, Union

from .engine import Engine, IllegalAction
from .model import ActionRequest, GameState, Phase, state_hash
from .pool import CardPool, load_pool

__all__ = [
    "ReplayError",
    "TrajectoryWriter",
    "read_trajectory",
    "verify_trajectory",
    "render_trajectory",
]

FORMAT_VERSION = 1


class ReplayError(Exception):
    """A trajectory file is malformed or fails re-execution."""

    def __init__(self, line: int, message: str):
        self.line = line
        super().__init__(f"line {line}: {message}")


class TrajectoryWriter:
    """Streams one game's rows to a JSONL file."""

    def __init__(
        self,
        path: Union[str, Path, TextIO],
        match_id: str,
        seed: int,
        decks: tuple[list[str], list[str]],
        deck_labels: tuple[str, str],
        harness_config: dict,
        pool_version: int,
    ):
        if hasattr(path, "write"):
            self._fh: TextIO = path
            self._owns = False
        else:
            self._fh = open(path, "w")
            self._owns = True
        self._write(
            {
                "kind": "header",
                "format_version": FORMAT_VERSION,
                "match_id": match_id,
                "seed": seed,
                "deck_labels": list(deck_labels),
                "decks": [list(decks[0]), list(decks[1])],
                "harness_config": harness_config,
                "pool_version": pool_version,
            }
        )

    def _write(self, row: dict) -> None:
        self._fh.write(json.dumps(row, sort_keys=True) + "\n")

    def append_rows(self, state: GameState, rows: list[dict]) -> None:
        """Write log rows sharing the current post-action state hash."""
        if not rows:
            return
        post = state_hash(state)
        for row in rows:
            self._write(
                {
                    "kind": row["kind"],
                    "turn": row["turn"],
                    "actor": row["actor"],
                    "payload": row["payload"],
                    "post_state_hash": post,
                }
            )

    def finish(self, record) -> None:
        self._write(
            {
                "kind": "result",
                "winner": record.result.winner,
                "reason": record.result.reason.value,
                "turns": record.turns,
            }
        )
        self._fh.flush()
        if self._owns:
            self._fh.close()


def read_trajectory(path: Union[str, Path]) -> tuple[dict, list[dict], Optional[dict]]:
    """Parse a trajectory file into (header, rows, result)."""
    header: Optional[dict] = None
    rows: list[dict] = []
    result: Optional[dict] = None
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                row = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ReplayError(lineno, f"bad JSON: {exc}")
            kind = row.get("kind")
            if kind == "header":
                if header is not None:
                    raise ReplayError(lineno, "duplicate header")
                header = row
            elif kind == "result":
                if result is not None:
                    raise ReplayError(lineno, "duplicate result")
                result = row
            elif kind in ("action", "event"):
                if header is None:
                    raise ReplayError(lineno, "row before header")
                if result is not None:
                    raise ReplayError(lineno, "row after result")
                rows.append(row)
            else:
                raise ReplayError(lineno, f"unknown row kind: {kind!r}")
    if header is None:
        raise ReplayError(0, "missing header")
    return header, rows, result


def verify_trajectory(path: Union[str, Path], pool: Optional[CardPool] = None) -> dict:
    """Re-execute a trajectory and require byte-identical rows.

    Returns summary stats on success; raises ReplayError on the first
    divergence (row content or post-action state hash).
    """
    header, rows, result = read_trajectory(path)
    if pool is None:
        pool = load_pool()
    if header["pool_version"] != pool.version:
        raise ReplayError(1, f"pool version mismatch: file has {header['pool_version']}, pool is {pool.version}")
    engine = Engine(pool)
    decks = (list(header["decks"][0]), list(header["decks"][1]))
    state = engine.setup_game(decks[0], decks[1], header["seed"])

    expected: list[dict] = []

    def emit(log_rows: list[dict]) -> None:
        post = state_hash(state)
        for row in log_rows:
            expected.append(
                {
                    "kind": row["kind"],
                    "turn": row["turn"],
                    "actor": row["actor"],
                    "payload": row["payload"],
                    "post_state_hash": post,
                }
            )

    emit(state.action_log)
    actions = 0
    for index, row in enumerate(rows):
        if row["kind"] != "action":
            continue
        line = index + 2  # 1-based, after the header line
        if state.phase is Phase.FINISHED:
            raise ReplayError(line, "trajectory has actions after the game finished")
        payload = row["payload"]
        cursor = len(state.action_log)
        try:
            engine.apply_action(state, ActionRequest(payload["tool"], dict(payload["arguments"])))
        except (IllegalAction, KeyError, TypeError) as exc:
            raise ReplayError(line, f"action does not replay: {exc}")
        emit(state.action_log[cursor:])
        actions += 1

    if len(expected) != len(rows):
        raise ReplayError(0, f"row count mismatch: file has {len(rows)}, replay produced {len(expected)}")
    for i, (got, want) in enumerate(zip(rows, expected)):
        for key in ("kind", "turn", "actor", "payload", "post_state_hash"):
            if got.get(key) != want[key]:
                raise ReplayError(
                    i + 2,  # 1-based, after the header line
                    f"mismatch at row {i}: {key} differs (file {got.get(key)!r}, replay {want[key]!r})",
                )
    if result is None:
        raise ReplayError(0, "missing result row")
    if state.result is None:
        raise ReplayError(0, "replay did not finish the game")
    if result["winner"] != state.result.winner or result["reason"] != state.result.reason.value:
        raise ReplayError(0, f"result mismatch: file {result!r}, replay {state.result!r}")
    if result["turns"] != state.turn_number:
        raise ReplayError(0, f"turn count mismatch: file {result['turns']}, replay {state.turn_number}")
    return {
        "match_id": header["match_id"],
        "actions": actions,
        "rows": len(rows),
        "turns": state.turn_number,
        "winner": state.result.winner,
        "reason": state.result.reason.value,
    }


def render_trajectory(path: Union[str, Path]) -> str:
    """Human-readable rendering of a trajectory, grouped by turn."""
    header, rows, result = read_trajectory(path)
    out = [
        f"match {header['match_id']}  seed {header['seed']}  "
        f"decks {header['deck_labels'][0]} vs {header['deck_labels'][1]}",
    ]
    for row in rows:
        payload = row["payload"]
        if row["kind"] == "event" and payload.get("event") == "turn_began":
            out.append(f"-- turn {payload['turn']} (player {payload['player']}) --")
            continue
        if row["kind"] == "action":
            args = payload.get("arguments", {})
            arg_s = " " + json.dumps(args, sort_keys=True) if args else ""
            out.append(f"P{row['actor']} {payload['tool']}{arg_s}")
        else:
            bits = {k: v for k, v in payload.items() if k != "event"}
            detail = " " + json.dumps(bits, sort_keys=True) if bits else ""
            out.append(f"    [{payload.get('event')}]{detail}")
    if result is not None:
        if result["winner"] is None:
            out.append(f"result: draw ({result['reason']}) after {result['turns']} turns")
        else:
            out.append(
                f"result: player {result['winner']} wins by {result['reason']} after {result['turns']} turns"
            )
    return "\n".join(out)
