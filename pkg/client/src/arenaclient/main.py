"""Process entry point: a stdio server speaking the wire protocol.

Reads one JSON request per stdin line, writes one JSON reply per stdout
line, and never crashes on bad input; a request it cannot serve gets a
protocol-level error reply instead.  EOF on stdin is the shutdown signal.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Optional, TextIO

from arenaclient.config import ClientConfig, ConfigError, Mechanism, load_config
from arenaclient.evolve import evolve
from arenaclient.model import ModelClient, build_model
from arenaclient.protocol import ProtocolError, dump_line, error_reply, evolve_error, parse_request
from arenaclient.react import react_step
from arenaclient.skills import SkillStore
from arenaclient.state import append_line


class ClientSession:
    """One seat's serving state: config, lazy model, skill store."""

    def __init__(self, config: ClientConfig, model: Optional[ModelClient] = None):
        self.config = config
        self._model = model
        self.skills = (
            SkillStore(config.state_dir) if config.state_dir is not None else None
        )

    def _get_model(self) -> ModelClient:
        if self._model is None:
            self._model = build_model(self.config)
        return self._model

    def handle_line(self, line: str) -> dict:
        try:
            request = parse_request(line)
        except ProtocolError as exc:
            return error_reply(_salvage_step_id(line), str(exc))
        if request["phase"] == "evolve":
            return self._handle_evolve(request)
        return self._handle_decide(request)

    def _handle_decide(self, request: dict) -> dict:
        step_id = request.get("step_id")
        model = None
        if self.config.mechanism is not Mechanism.SCRIPTED_STUB:
            try:
                model = self._get_model()
            except ConfigError as exc:
                return error_reply(step_id, str(exc))
        try:
            return react_step(request, self.config, model=model, skills=self.skills)
        except Exception as exc:  # a reply must go out no matter what
            return error_reply(step_id, f"client failure: {exc}")

    def _handle_evolve(self, request: dict) -> dict:
        model = None
        if self.config.mechanism not in (Mechanism.NONE, Mechanism.SCRIPTED_STUB):
            try:
                model = self._get_model()
            except ConfigError as exc:
                return evolve_error(str(exc))
        try:
            return evolve(request, self.config, model=model)
        except Exception as exc:
            return evolve_error(f"client failure: {exc}")


def _salvage_step_id(line: str):
    try:
        payload = json.loads(line)
    except json.JSONDecodeError:
        return None
    if isinstance(payload, dict):
        return payload.get("step_id")
    return None


def serve(
    config: ClientConfig,
    model: Optional[ModelClient] = None,
    stdin: Optional[TextIO] = None,
    stdout: Optional[TextIO] = None,
) -> int:
    session = ClientSession(config, model=model)
    stdin = stdin if stdin is not None else sys.stdin
    stdout = stdout if stdout is not None else sys.stdout
    log_path = Path(config.message_log) if config.message_log else None
    try:
        for line in stdin:
            line = line.strip()
            if not line:
                continue
            if log_path:
                append_line(log_path, json.dumps({"dir": "recv", "line": line}))
            reply = dump_line(session.handle_line(line))
            if log_path:
                append_line(log_path, json.dumps({"dir": "send", "line": reply}))
            stdout.write(reply + "\n")
            stdout.flush()
    except (BrokenPipeError, KeyboardInterrupt):
        pass
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="arenaclient",
        description="External card-game agent speaking line-delimited JSON on stdio.",
    )
    parser.add_argument("--config", help="JSON config file; flags override its fields")
    parser.add_argument(
        "--mechanism",
        choices=[m.value for m in Mechanism],
        help="evolution mechanism (default: none)",
    )
    parser.add_argument("--state-dir", help="persistent state directory")
    parser.add_argument("--model-endpoint", help="chat-completions endpoint URL")
    parser.add_argument("--model-name", help="model identifier sent to the endpoint")
    parser.add_argument("--temperature", type=float, help="sampling temperature")
    parser.add_argument("--max-output-tokens", type=int, help="output token budget")
    parser.add_argument("--prompt-template", help="prompt template id")
    parser.add_argument("--api-key-env", help="env var holding the API key")
    parser.add_argument("--timeout-s", type=float, help="model request timeout seconds")
    parser.add_argument("--message-log", help="append every request/reply line here")
    return parser


_FLAG_FIELDS = {
    "mechanism": "mechanism",
    "state_dir": "state_dir",
    "model_endpoint": "model_endpoint",
    "model_name": "model_name",
    "temperature": "temperature",
    "max_output_tokens": "max_output_tokens",
    "prompt_template": "prompt_template",
    "api_key_env": "api_key_env",
    "timeout_s": "request_timeout_s",
    "message_log": "message_log",
}


def config_from_args(args: argparse.Namespace) -> ClientConfig:
    base = load_config(args.config).to_payload() if args.config else {}
    for attr, field_name in _FLAG_FIELDS.items():
        value = getattr(args, attr, None)
        if value is not None:
            base[field_name] = value
    return load_config(base)


def main(argv: Optional[list[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = config_from_args(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    return serve(config)


if __name__ == "__main__":
    raise SystemExit(main())
