"""Wire protocol: line-delimited JSON requests in, one reply line out.

The harness sends one JSON object per line.  Decide requests carry the
observation and expect `{step_id, tool, arguments}` back; evolve requests
carry a round's trajectory paths and expect `{status: "ok"}`.  A client
must never crash on a malformed line: it answers with a protocol-level
error record and keeps reading.
"""
from __future__ import annotations

import json
from typing import Any, Optional

PROTOCOL_VERSION = 1

# Reply tool name for protocol-level failures.  The engine rejects it
# like any unknown tool, so the harness books the step as invalid.
ERROR_TOOL = "error"


class ProtocolError(ValueError):
    """A request line that cannot be served as sent."""


def parse_request(line: str) -> dict:
    """Parse and structurally validate one request line."""
    try:
        request = json.loads(line)
    except json.JSONDecodeError as exc:
        raise ProtocolError(f"request is not valid JSON: {exc}")
    if not isinstance(request, dict):
        raise ProtocolError("request must be a JSON object")
    version = request.get("v", PROTOCOL_VERSION)
    if version != PROTOCOL_VERSION:
        raise ProtocolError(f"unsupported protocol version: {version!r}")
    phase = request.get("phase")
    if phase == "decide":
        if "step_id" not in request:
            raise ProtocolError("decide request is missing step_id")
        if not isinstance(request.get("observation"), dict):
            raise ProtocolError("decide request is missing an observation object")
    elif phase == "evolve":
        if not isinstance(request.get("round"), int):
            raise ProtocolError("evolve request is missing an integer round")
        if not isinstance(request.get("trajectories"), list):
            raise ProtocolError("evolve request is missing a trajectories list")
        if not isinstance(request.get("state_dir"), str):
            raise ProtocolError("evolve request is missing a state_dir")
    else:
        raise ProtocolError(f"unknown phase: {phase!r}")
    return request


def action_reply(step_id: Any, tool: str, arguments: Optional[dict] = None) -> dict:
    return {
        "v": PROTOCOL_VERSION,
        "step_id": step_id,
        "tool": tool,
        "arguments": dict(arguments or {}),
    }


def error_reply(step_id: Any, message: str) -> dict:
    """Schema-valid reply recording a client-side failure for this step."""
    return action_reply(step_id, ERROR_TOOL, {"message": message})


def evolve_ok() -> dict:
    return {"status": "ok"}


def evolve_error(message: str) -> dict:
    return {"status": "error", "message": message}


def dump_line(payload: dict) -> str:
    """One reply per line; key order fixed so logs diff cleanly."""
    return json.dumps(payload, sort_keys=True)
