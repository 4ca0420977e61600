"""Reference external agent for the cardarena wire protocol.

Speaks line-delimited JSON on stdio: one `decide` request per decision
step, answered by exactly one tool call, plus between-round `evolve`
messages that update a persistent state directory.  The decision loop is
either a deterministic scripted stub (for protocol tests) or a ReAct
tool-calling loop against a chat-completion endpoint, extended by one of
several self-evolution mechanisms that convert finished games into
persistent guidance.
"""
from arenaclient.config import ClientConfig, Mechanism, load_config
from arenaclient.model import MockModelClient, ModelError, ModelReply, ToolCall
from arenaclient.react import react_step
from arenaclient.evolve import evolve

__all__ = [
    "ClientConfig",
    "Mechanism",
    "MockModelClient",
    "ModelError",
    "ModelReply",
    "ToolCall",
    "evolve",
    "load_config",
    "react_step",
]
