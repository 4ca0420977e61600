"""Built-in agents and the external-process agent.

Built-in agents read the privileged `legal_actions` field of the
decision request, so they stay functional under every harness ablation.
External agents communicate over stdin/stdout with one JSON object per
line and only ever see the observation payload (README documents the
protocol); protocol failures surface as AgentError so the harness can
count them as invalid attempts and eventually fall back.
"""
from __future__ import annotations

import json
import queue
import random
import subprocess
import threading
from typing import Optional, Sequence, Union

from .harness import AgentError, DecisionRequest
from .model import ActionRequest

__all__ = [
    "BaseAgent",
    "RandomAgent",
    "HeuristicAgent",
    "ScriptedAgent",
    "FaultyAgent",
    "ExternalAgent",
    "DEFAULT_HEURISTIC_WEIGHTS",
    "heuristic_variant_weights",
    "builtin_agent_names",
    "make_agent",
    "PROTOCOL_VERSION",
]

PROTOCOL_VERSION = 1

DEFAULT_HEURISTIC_WEIGHTS: dict[str, float] = {
    "attack": 14.0,
    "evolve_pokemon": 6.0,
    "attach_energy": 5.0,
    "use_supporter": 4.0,
    "use_item": 4.0,
    "use_tool": 4.0,
    "put_stadium": 4.0,
    "use_stadium": 4.0,
    "play_pokemon": 4.0,
    "use_ability": 4.0,
    "retreat": 0.5,
    "discard_stadium": 0.25,
    "pass_turn": 0.25,
}

# With this little deck left, card-drawing trainers hasten our own
# deck-out, so their classes get throttled to this weight.
_LOW_DECK_THRESHOLD = 8
_LOW_DECK_WEIGHT = 0.2

# Prompt reasons where grabbing as much as possible is the greedy move;
# everywhere else the heuristic keeps selections minimal.
_MAXIMIZE_REASONS = frozenset(
    {"search-deck", "search-discard", "move-cards", "attach-pick-card", "required-choice"}
)


class BaseAgent:
    """Common plumbing: every agent owns a seeded RNG after bind()."""

    name = "agent"

    def __init__(self):
        self.rng = random.Random(0)

    def bind(self, seed: int) -> None:
        self.rng = random.Random(seed)

    def decide(self, request: DecisionRequest) -> ActionRequest:
        raise NotImplementedError

    def close(self) -> None:
        pass


class RandomAgent(BaseAgent):
    """Uniform choice over the legal action set."""

    name = "random"

    def decide(self, request: DecisionRequest) -> ActionRequest:
        return self.rng.choice(request.legal_actions)


class HeuristicAgent(BaseAgent):
    """Two-stage weighted policy over the legal set.

    Samples a tool class proportionally to its weight (throttling
    card-drawing classes once its own deck runs thin), then picks
    within the class: the highest-damage attack, energy onto the
    active when possible, otherwise uniform.  Card choices are
    deterministic: size preference by prompt reason (grab the most on
    searches, spend the least on costs), hit-point-aware picks for
    board prompts, then lexicographic by chosen tokens.
    """

    def __init__(self, weights: Optional[dict[str, float]] = None, name: str = "heuristic"):
        super().__init__()
        self.name = name
        self.weights = dict(DEFAULT_HEURISTIC_WEIGHTS)
        if weights:
            self.weights.update(weights)

    def decide(self, request: DecisionRequest) -> ActionRequest:
        legal = request.legal_actions
        if request.choosing_card:
            return self._choose_cards(request, legal)
        by_tool: dict[str, list[ActionRequest]] = {}
        for a in legal:
            by_tool.setdefault(a.tool, []).append(a)
        weights = self.weights
        if request.observation["private"]["deck_count"] <= _LOW_DECK_THRESHOLD:
            weights = dict(weights)
            for t in ("use_supporter", "use_item", "use_stadium"):
                weights[t] = min(weights.get(t, 1.0), _LOW_DECK_WEIGHT)
        tools = sorted(by_tool)
        tool = self.rng.choices(tools, weights=[weights.get(t, 1.0) for t in tools], k=1)[0]
        group = by_tool[tool]
        if tool == "attack":
            return self._best_attack(request, group)
        if tool == "attach_energy":
            active = request.observation["public"]["you"]["active"]
            if active is not None:
                on_active = [
                    a
                    for a in group
                    if a.arguments.get("target_card") == active["name"]
                    and a.arguments.get("target_index") == active["field_index"]
                ]
                if on_active:
                    group = on_active
        return self.rng.choice(group)

    def _best_attack(self, request: DecisionRequest, group: Sequence[ActionRequest]) -> ActionRequest:
        active = request.observation["public"]["you"]["active"] or {}
        damage = {a["name"]: a["damage"] for a in active.get("attacks", [])}
        return max(
            group,
            key=lambda a: (damage.get(a.arguments.get("attack_name"), 0), a.arguments.get("attack_name", "")),
        )

    @staticmethod
    def _board_hp(request: DecisionRequest) -> tuple[dict[str, int], dict[str, int]]:
        """Remaining hit points per board token, own side and opponent's."""
        out: list[dict[str, int]] = []
        for side in ("you", "opponent"):
            view = request.observation["public"][side]
            pips = ([view["active"]] if view["active"] else []) + view["bench"]
            out.append({f"{p['name']}#{p['field_index']}": p["hp_remaining"] for p in pips})
        return out[0], out[1]

    def _choose_cards(self, request: DecisionRequest, legal: Sequence[ActionRequest]) -> ActionRequest:
        choice = request.observation["global"]["choice"] or {}
        reason = choice.get("reason", "")
        own_hp, opp_hp = self._board_hp(request)

        def rank(action: ActionRequest):
            sel = tuple(action.arguments["chosen_cards"])
            size = -len(sel) if reason in _MAXIMIZE_REASONS else len(sel)
            hp = 0
            if sel and all(tok in own_hp for tok in sel):
                # Keep the sturdiest of our own: negate so min() favors high HP.
                hp = -sum(own_hp[tok] for tok in sel)
            elif sel and all(tok in opp_hp for tok in sel):
                # Drag out the opponent's frailest.
                hp = sum(opp_hp[tok] for tok in sel)
            return (size, hp, sel)

        return min(legal, key=rank)


class ScriptedAgent(BaseAgent):
    """Plays a fixed move list, then falls back to uniform random."""

    def __init__(self, moves: Sequence[Union[ActionRequest, dict]], name: str = "scripted"):
        super().__init__()
        self.name = name
        self._moves: list[ActionRequest] = []
        for m in moves:
            if isinstance(m, ActionRequest):
                self._moves.append(m)
            else:
                self._moves.append(ActionRequest(m["tool"], dict(m.get("arguments", {}))))
        self._cursor = 0

    def decide(self, request: DecisionRequest) -> ActionRequest:
        if self._cursor < len(self._moves):
            move = self._moves[self._cursor]
            self._cursor += 1
            return move
        return self.rng.choice(request.legal_actions)


class FaultyAgent(BaseAgent):
    """Wraps another agent; every `period`-th reply is a known-bad action.

    The bad reply carries an argument no tool accepts, so it is invalid
    in every state and the harness retry path always triggers.
    """

    def __init__(self, inner: BaseAgent, period: int = 10):
        super().__init__()
        if period < 2:
            raise ValueError("period must be at least 2")
        self.inner = inner
        self.period = period
        self.name = f"faulty-{inner.name}"
        self._replies = 0

    def bind(self, seed: int) -> None:
        # The reply counter deliberately survives binds so the invalid
        # rate converges to exactly 1/period across a session of games.
        super().bind(seed)
        self.inner.bind(seed)

    def decide(self, request: DecisionRequest) -> ActionRequest:
        self._replies += 1
        if self._replies % self.period == 0:
            return ActionRequest("pass_turn", {"bogus": "value"})
        return self.inner.decide(request)

    def close(self) -> None:
        self.inner.close()


class ExternalAgent(BaseAgent):
    """Subprocess agent speaking line-delimited JSON on stdio.

    One request object per line; the reply must echo step_id and name a
    tool.  EOF on our side is the shutdown signal.  Timeouts, dead
    processes and malformed replies raise AgentError.
    """

    def __init__(
        self,
        cmd: Union[str, Sequence[str]],
        name: str = "external",
        default_deadline_ms: int = 10_000,
        evolve_deadline_ms: int = 120_000,
        cwd: Optional[str] = None,
    ):
        super().__init__()
        self.name = name
        self.default_deadline_ms = default_deadline_ms
        self.evolve_deadline_ms = evolve_deadline_ms
        self._seed: Optional[int] = None
        self._proc = subprocess.Popen(
            cmd,
            shell=isinstance(cmd, str),
            stdin=subprocess.PIPE,
            stdout=subprocess.PIPE,
            text=True,
            bufsize=1,
            cwd=cwd,
        )
        self._lines: queue.Queue = queue.Queue()
        self._reader = threading.Thread(target=self._pump, daemon=True)
        self._reader.start()

    def _pump(self) -> None:
        try:
            for line in self._proc.stdout:
                self._lines.put(line)
        finally:
            self._lines.put(None)  # EOF sentinel

    def bind(self, seed: int) -> None:
        super().bind(seed)
        self._seed = seed

    def _send(self, payload: dict) -> None:
        if self._proc.poll() is not None:
            raise AgentError(f"external agent process exited with {self._proc.returncode}")
        try:
            self._proc.stdin.write(json.dumps(payload) + "\n")
            self._proc.stdin.flush()
        except (BrokenPipeError, ValueError, OSError) as exc:
            raise AgentError(f"cannot write to external agent: {exc}")

    def _recv(self, deadline_ms: int) -> dict:
        try:
            line = self._lines.get(timeout=deadline_ms / 1000.0)
        except queue.Empty:
            raise AgentError(f"external agent reply timed out after {deadline_ms} ms")
        if line is None:
            raise AgentError("external agent closed its output")
        try:
            reply = json.loads(line)
        except json.JSONDecodeError as exc:
            raise AgentError(f"malformed reply JSON: {exc}")
        if not isinstance(reply, dict):
            raise AgentError("reply must be a JSON object")
        return reply

    def decide(self, request: DecisionRequest) -> ActionRequest:
        deadline = request.deadline_ms or self.default_deadline_ms
        self._send(
            {
                "v": PROTOCOL_VERSION,
                "phase": "decide",
                "match_id": request.match_id,
                "step_id": request.step_id,
                "seat": request.seat,
                "agent_seed": self._seed,
                "observation": request.observation,
                "rendered": request.rendered,
                "history": request.history,
                "choosing_card": request.choosing_card,
                "deadline_ms": deadline,
                "last_error": request.last_error,
                "query_answers": request.query_answers,
            }
        )
        reply = self._recv(deadline)
        if reply.get("step_id") != request.step_id:
            raise AgentError(
                f"reply step_id {reply.get('step_id')!r} does not echo request {request.step_id}"
            )
        tool = reply.get("tool")
        if not isinstance(tool, str):
            raise AgentError("reply is missing a tool name")
        arguments = reply.get("arguments", {})
        if not isinstance(arguments, dict):
            raise AgentError("reply arguments must be an object")
        return ActionRequest(tool, arguments)

    def evolve(self, round_index: int, trajectories: list[str], state_dir: str) -> None:
        """Between-round self-improvement hook for longitudinal runs."""
        self._send(
            {
                "v": PROTOCOL_VERSION,
                "phase": "evolve",
                "round": round_index,
                "trajectories": trajectories,
                "state_dir": state_dir,
            }
        )
        reply = self._recv(self.evolve_deadline_ms)
        if reply.get("status") != "ok":
            raise AgentError(f"evolve failed: {reply!r}")

    def close(self) -> None:
        try:
            if self._proc.stdin and not self._proc.stdin.closed:
                self._proc.stdin.close()
            self._proc.wait(timeout=5)
        except Exception:
            self._proc.kill()


def heuristic_variant_weights(k: int) -> dict[str, float]:
    """Weight set for the k-th built-in heuristic variant (1-based).

    Variants differ along one axis, attack aggression, which spreads
    their strength enough to exercise ratings.
    """
    weights = dict(DEFAULT_HEURISTIC_WEIGHTS)
    weights["attack"] = 2.0 + k
    return weights


def builtin_agent_names() -> list[str]:
    return ["random", "heuristic"] + [f"heuristic-v{k}" for k in range(1, 11)]


def make_agent(name: str) -> BaseAgent:
    """Construct a built-in agent by roster name."""
    if name == "random":
        return RandomAgent()
    if name == "heuristic":
        return HeuristicAgent()
    if name.startswith("heuristic-v"):
        try:
            k = int(name.removeprefix("heuristic-v"))
        except ValueError:
            raise ValueError(f"unknown agent name: {name!r}")
        if not 1 <= k <= 10:
            raise ValueError(f"unknown agent name: {name!r}")
        return HeuristicAgent(weights=heuristic_variant_weights(k), name=name)
    raise ValueError(f"unknown agent name: {name!r}")
