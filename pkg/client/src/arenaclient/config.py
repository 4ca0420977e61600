"""Client configuration: transport, model endpoint, mechanism, state dir."""
from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Optional, Union


class ConfigError(ValueError):
    """Raised for an invalid or inconsistent client configuration."""


class Mechanism(str, Enum):
    """How finished games are converted into persistent decision state."""

    NONE = "none"
    REFLEXION = "reflexion"
    EXPEL = "expel"
    MEMORY = "memory"
    PROMPT_EVOLUTION = "prompt_evolution"
    SKILL_LIBRARY = "skill_library"
    SCRIPTED_STUB = "scripted_stub"


# Mechanisms whose evolve phase calls the model.  `none` is a no-op and
# the stub writes a fixed marker, so both stay model-free there.
MODEL_EVOLVED = frozenset(
    {
        Mechanism.REFLEXION,
        Mechanism.EXPEL,
        Mechanism.MEMORY,
        Mechanism.PROMPT_EVOLUTION,
        Mechanism.SKILL_LIBRARY,
    }
)


@dataclass
class ClientConfig:
    """Everything one client process needs to serve a seat.

    Decoding defaults (temperature 0.7, 2048 output tokens) match the
    reference agent configuration; the scripted stub ignores them and
    must not be pointed at a model endpoint at all.
    """

    transport: str = "stdio"
    model_endpoint: Optional[str] = None
    model_name: Optional[str] = None
    api_key_env: str = "ARENACLIENT_API_KEY"
    temperature: float = 0.7
    max_output_tokens: int = 2048
    request_timeout_s: float = 60.0
    prompt_template: str = "react-battle-v1"
    mechanism: Mechanism = Mechanism.NONE
    state_dir: Optional[str] = None
    message_log: Optional[str] = None
    max_inner_steps: int = 6

    def __post_init__(self):
        if self.transport != "stdio":
            raise ConfigError(f"unsupported transport: {self.transport!r}")
        if isinstance(self.mechanism, str) and not isinstance(self.mechanism, Mechanism):
            try:
                self.mechanism = Mechanism(self.mechanism)
            except ValueError:
                names = ", ".join(m.value for m in Mechanism)
                raise ConfigError(
                    f"unknown mechanism {self.mechanism!r} (expected one of: {names})"
                ) from None
        if self.mechanism is Mechanism.SCRIPTED_STUB and self.model_endpoint is not None:
            raise ConfigError("scripted_stub is model-free and takes no model endpoint")
        if self.temperature < 0.0:
            raise ConfigError("temperature must be >= 0")
        if self.max_output_tokens < 1:
            raise ConfigError("max_output_tokens must be >= 1")
        if self.request_timeout_s <= 0.0:
            raise ConfigError("request_timeout_s must be > 0")
        if self.max_inner_steps < 1:
            raise ConfigError("max_inner_steps must be >= 1")
        from arenaclient.prompts import TEMPLATES  # config stays import-light

        if self.prompt_template not in TEMPLATES:
            known = ", ".join(sorted(TEMPLATES))
            raise ConfigError(
                f"unknown prompt template {self.prompt_template!r} (known: {known})"
            )

    def to_payload(self) -> dict:
        payload = dataclasses.asdict(self)
        payload["mechanism"] = self.mechanism.value
        return payload


_FIELDS = {f.name for f in dataclasses.fields(ClientConfig)}


def load_config(source: Union[str, Path, dict]) -> ClientConfig:
    """Build a config from a JSON file path or an already-parsed mapping."""
    if isinstance(source, (str, Path)):
        try:
            raw = json.loads(Path(source).read_text())
        except OSError as exc:
            raise ConfigError(f"cannot read config file: {exc}")
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file is not valid JSON: {exc}")
    else:
        raw = source
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    unknown = sorted(set(raw) - _FIELDS)
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
    return ClientConfig(**raw)
