"""Single model-call interface: one HTTP implementation, one mock.

Everything model-shaped goes through `ModelClient.complete` so the rest
of the client never touches a network library and the test suite can run
entirely on `MockModelClient`.
"""
from __future__ import annotations

import json
import os
import urllib.error
import urllib.request
from dataclasses import dataclass, field
from typing import Callable, Optional, Protocol, Sequence, Union

from arenaclient.config import ClientConfig, ConfigError


class ModelError(Exception):
    """Any failure to obtain a usable model reply (transport or payload)."""


@dataclass
class ToolCall:
    tool: str
    arguments: dict = field(default_factory=dict)


@dataclass
class ModelReply:
    """One assistant turn: free text, optionally with a single tool call."""

    text: str = ""
    tool_call: Optional[ToolCall] = None


class ModelClient(Protocol):
    def complete(self, messages: list[dict], tools: Optional[list[dict]] = None) -> ModelReply:
        ...


class HttpModelClient:
    """Chat-completions client for an OpenAI-style endpoint."""

    def __init__(
        self,
        endpoint: str,
        model: Optional[str],
        temperature: float = 0.7,
        max_output_tokens: int = 2048,
        api_key: Optional[str] = None,
        timeout_s: float = 60.0,
    ):
        self.endpoint = endpoint
        self.model = model
        self.temperature = temperature
        self.max_output_tokens = max_output_tokens
        self.api_key = api_key
        self.timeout_s = timeout_s

    def complete(self, messages: list[dict], tools: Optional[list[dict]] = None) -> ModelReply:
        body: dict = {
            "messages": messages,
            "temperature": self.temperature,
            "max_tokens": self.max_output_tokens,
        }
        if self.model:
            body["model"] = self.model
        if tools:
            body["tools"] = tools
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        request = urllib.request.Request(
            self.endpoint, data=json.dumps(body).encode(), headers=headers
        )
        try:
            with urllib.request.urlopen(request, timeout=self.timeout_s) as resp:
                payload = json.loads(resp.read().decode())
        except (urllib.error.URLError, OSError, ValueError) as exc:
            raise ModelError(f"model request failed: {exc}")
        return _parse_chat_payload(payload)


def _parse_chat_payload(payload: dict) -> ModelReply:
    try:
        message = payload["choices"][0]["message"]
    except (KeyError, IndexError, TypeError):
        raise ModelError("model reply has no choices[0].message")
    text = message.get("content") or ""
    calls = message.get("tool_calls") or []
    if not calls:
        return ModelReply(text=text)
    fn = calls[0].get("function", {})
    name = fn.get("name")
    if not isinstance(name, str):
        raise ModelError("model tool call has no function name")
    raw_args = fn.get("arguments", "{}")
    try:
        arguments = json.loads(raw_args) if isinstance(raw_args, str) else dict(raw_args)
    except (json.JSONDecodeError, TypeError, ValueError) as exc:
        raise ModelError(f"model tool call arguments are not an object: {exc}")
    if not isinstance(arguments, dict):
        raise ModelError("model tool call arguments are not an object")
    return ModelReply(text=text, tool_call=ToolCall(name, arguments))


ReplyLike = Union[ModelReply, ToolCall, str, Exception, Callable[[list[dict]], "ReplyLike"]]


class MockModelClient:
    """Scripted model for tests: replays a fixed sequence of replies.

    Accepts plain strings (text-only turns), ToolCall objects, exceptions
    to raise, or callables receiving the messages.  Every call is
    recorded on `.calls` for prompt assertions.
    """

    def __init__(self, replies: Sequence[ReplyLike]):
        self._replies = list(replies)
        self.calls: list[dict] = []

    def complete(self, messages: list[dict], tools: Optional[list[dict]] = None) -> ModelReply:
        self.calls.append({"messages": messages, "tools": tools})
        if not self._replies:
            raise ModelError("mock model ran out of scripted replies")
        reply = self._replies.pop(0)
        while callable(reply) and not isinstance(reply, Exception):
            reply = reply(messages)
        if isinstance(reply, Exception):
            raise reply
        if isinstance(reply, ToolCall):
            return ModelReply(tool_call=reply)
        if isinstance(reply, str):
            return ModelReply(text=reply)
        return reply


def build_model(config: ClientConfig) -> HttpModelClient:
    """The configured HTTP client; configs without an endpoint get none."""
    if not config.model_endpoint:
        raise ConfigError(
            "this configuration needs a model endpoint "
            "(set model_endpoint, or use mechanism scripted_stub)"
        )
    api_key = os.environ.get(config.api_key_env) or None
    return HttpModelClient(
        endpoint=config.model_endpoint,
        model=config.model_name,
        temperature=config.temperature,
        max_output_tokens=config.max_output_tokens,
        api_key=api_key,
        timeout_s=config.request_timeout_s,
    )
