"""Decision harness: runs games between agents against the engine.

The harness owns everything around the rules: building per-seat
observations, rendering them, bookkeeping the interaction history,
answering query tools, retrying after invalid actions and falling back
to a uniform random legal action when an agent exhausts its retries.

Invariant maintained per seat: invalid_attempts <= action_attempts <=
tool_calls (queries count as tool calls but not as action attempts, and
a fallback execution is not an attempt).
"""
from __future__ import annotations

import hashlib
import json
import random
from dataclasses import dataclass, field
from typing import Optional, Protocol, Sequence

from .engine import Engine, IllegalAction, QUERY_TOOLS
from .model import ActionRequest, GameResult, GameState, Phase
from .observation import build_observation, render_raw, render_structured
from .replay import TrajectoryWriter

__all__ = [
    "AgentError",
    "HarnessConfig",
    "DecisionAccounting",
    "DecisionRequest",
    "GameRecord",
    "Agent",
    "derive_seed",
    "play_game",
    "merge_accounting",
    "QUERY_LIMIT_PER_DECISION",
]

# Hard cap on query tool calls within one decision so a query loop
# cannot stall the game.  Queries past the cap count as invalid attempts.
QUERY_LIMIT_PER_DECISION = 16

FALLBACK_POLICIES = ("uniform_random_legal",)


def derive_seed(master: int, *tags: str) -> int:
    """Stable sub-seed from a master seed and string tags."""
    blob = ":".join([str(master), *tags]).encode()
    return int.from_bytes(hashlib.sha256(blob).digest()[:8], "big")


class AgentError(Exception):
    """An agent failed to produce a reply (protocol error, timeout, crash)."""


@dataclass(frozen=True)
class HarnessConfig:
    """Ablation switches and limits for the decision loop."""

    structured_observation: bool = True
    legal_action_masking: bool = True
    history_enabled: bool = True
    history_budget: int = 40
    retry_limit: int = 3
    fallback: str = "uniform_random_legal"
    decision_deadline_ms: Optional[int] = None

    def __post_init__(self):
        if self.fallback not in FALLBACK_POLICIES:
            raise ValueError(f"unknown fallback policy: {self.fallback!r}")
        if self.retry_limit < 0:
            raise ValueError("retry_limit must be >= 0")
        if self.history_budget < 0:
            raise ValueError("history_budget must be >= 0")

    def to_payload(self) -> dict:
        return {
            "structured_observation": self.structured_observation,
            "legal_action_masking": self.legal_action_masking,
            "history_enabled": self.history_enabled,
            "history_budget": self.history_budget,
            "retry_limit": self.retry_limit,
            "fallback": self.fallback,
            "decision_deadline_ms": self.decision_deadline_ms,
        }


@dataclass
class DecisionAccounting:
    decisions: int = 0
    tool_calls: int = 0
    action_attempts: int = 0
    invalid_attempts: int = 0
    fallbacks: int = 0
    agent_failures: int = 0

    @property
    def invalid_rate(self) -> float:
        if self.action_attempts == 0:
            return 0.0
        return self.invalid_attempts / self.action_attempts

    def check_invariant(self) -> bool:
        return 0 <= self.invalid_attempts <= self.action_attempts <= self.tool_calls


def merge_accounting(parts: Sequence[DecisionAccounting]) -> DecisionAccounting:
    total = DecisionAccounting()
    for p in parts:
        total.decisions += p.decisions
        total.tool_calls += p.tool_calls
        total.action_attempts += p.action_attempts
        total.invalid_attempts += p.invalid_attempts
        total.fallbacks += p.fallbacks
        total.agent_failures += p.agent_failures
    return total


@dataclass
class DecisionRequest:
    """Everything an agent receives for one decision.

    `legal_actions` is a privileged engine-side field for in-process
    agents; it is never serialized to external agents, which see the
    legal set only through the observation's available_actions (and
    only when masking is enabled).
    """

    match_id: str
    step_id: int
    seat: int
    observation: dict
    rendered: str
    history: list[dict]
    choosing_card: bool
    deadline_ms: Optional[int]
    last_error: Optional[str]
    query_answers: list[dict]
    legal_actions: list[ActionRequest]


class Agent(Protocol):
    name: str

    def bind(self, seed: int) -> None: ...

    def decide(self, request: DecisionRequest) -> ActionRequest: ...

    def close(self) -> None: ...


@dataclass
class GameRecord:
    match_id: str
    seed: int
    result: GameResult
    turns: int
    accounting: tuple[DecisionAccounting, DecisionAccounting]

    def scores(self) -> tuple[float, float]:
        return self.result.scores()


def play_game(
    engine: Engine,
    decks: tuple[list[str], list[str]],
    agents: Sequence,
    seed: int,
    config: Optional[HarnessConfig] = None,
    match_id: str = "game",
    trajectory_path=None,
    deck_labels: Optional[tuple[str, str]] = None,
    decision_log_path=None,
) -> GameRecord:
    """Play one full game and return its record.

    Deterministic given (decks, agent implementations, seed, config):
    the engine RNG, both agents' RNGs and the fallback RNG all derive
    from the seed.  `decision_log_path` additionally captures every
    observation exactly as the deciding agent received it, one JSON
    line per decision.
    """
    config = config or HarnessConfig()
    state = engine.setup_game(decks[0], decks[1], seed)
    accounting = (DecisionAccounting(), DecisionAccounting())
    histories: tuple[list[dict], list[dict]] = ([], [])
    fallback_rng = random.Random(derive_seed(seed, match_id, "fallback"))
    for seat, agent in enumerate(agents):
        agent.bind(derive_seed(seed, match_id, f"agent-{seat}"))

    writer = None
    if trajectory_path is not None:
        writer = TrajectoryWriter(
            trajectory_path,
            match_id=match_id,
            seed=seed,
            decks=decks,
            deck_labels=deck_labels or ("deck-0", "deck-1"),
            harness_config=config.to_payload(),
            pool_version=engine.pool.version,
        )
        writer.append_rows(state, state.action_log)

    decision_log = None
    if decision_log_path is not None:
        decision_log = open(decision_log_path, "w", encoding="utf-8")

    try:
        step_id = 0
        while state.phase is not Phase.FINISHED:
            seat = state.decider()
            cursor = len(state.action_log)
            _run_decision(
                engine, state, seat, agents[seat], accounting[seat], histories[seat],
                config, match_id, step_id, fallback_rng, decision_log,
            )
            if writer is not None:
                writer.append_rows(state, state.action_log[cursor:])
            step_id += 1
    finally:
        if decision_log is not None:
            decision_log.close()

    record = GameRecord(
        match_id=match_id,
        seed=seed,
        result=state.result,
        turns=state.turn_number,
        accounting=accounting,
    )
    if writer is not None:
        writer.finish(record)
    return record


def _run_decision(
    engine: Engine,
    state: GameState,
    seat: int,
    agent,
    acct: DecisionAccounting,
    history: list[dict],
    config: HarnessConfig,
    match_id: str,
    step_id: int,
    fallback_rng: random.Random,
    decision_log=None,
) -> None:
    obs = build_observation(engine, state, seat, masking=config.legal_action_masking)
    rendered = render_structured(obs) if config.structured_observation else render_raw(obs)
    legal = engine.legal_actions(state)
    choosing = bool(state.choice_queue)
    acct.decisions += 1
    if decision_log is not None:
        row = {"step_id": step_id, "turn": state.turn_number, "seat": seat, "observation": obs}
        decision_log.write(json.dumps(row, sort_keys=True) + "\n")

    query_answers: list[dict] = []
    last_error: Optional[str] = None
    attempts = 0
    invalid_this_decision = 0

    while True:
        request = DecisionRequest(
            match_id=match_id,
            step_id=step_id,
            seat=seat,
            observation=obs,
            rendered=rendered,
            history=list(history) if config.history_enabled else [],
            choosing_card=choosing,
            deadline_ms=config.decision_deadline_ms,
            last_error=last_error,
            query_answers=list(query_answers),
            legal_actions=legal,
        )
        try:
            reply = agent.decide(request)
        except AgentError as exc:
            acct.agent_failures += 1
            acct.tool_calls += 1
            acct.action_attempts += 1
            acct.invalid_attempts += 1
            invalid_this_decision += 1
            attempts += 1
            last_error = f"agent error: {exc}"
            if attempts > config.retry_limit:
                self_action = _fallback(engine, state, acct, fallback_rng)
                _append_history(history, config, state, step_id, self_action, True, last_error, invalid_this_decision)
                return
            continue

        acct.tool_calls += 1
        if isinstance(reply, ActionRequest) and reply.tool in QUERY_TOOLS:
            if len(query_answers) < QUERY_LIMIT_PER_DECISION:
                answer = engine.answer_query(state, seat, reply)
                query_answers.append({"query": reply.to_payload(), "answer": answer})
                continue
            last_error = "query limit reached for this decision"
            acct.action_attempts += 1
            acct.invalid_attempts += 1
            invalid_this_decision += 1
            attempts += 1
            if attempts > config.retry_limit:
                action = _fallback(engine, state, acct, fallback_rng)
                _append_history(history, config, state, step_id, action, True, last_error, invalid_this_decision)
                return
            continue

        acct.action_attempts += 1
        attempts += 1
        try:
            engine.apply_action(state, reply)
            _append_history(history, config, state, step_id, reply, False, None, invalid_this_decision)
            return
        except IllegalAction as exc:
            acct.invalid_attempts += 1
            invalid_this_decision += 1
            last_error = exc.reason
            if attempts > config.retry_limit:
                action = _fallback(engine, state, acct, fallback_rng)
                _append_history(history, config, state, step_id, action, True, last_error, invalid_this_decision)
                return


def _fallback(
    engine: Engine, state: GameState, acct: DecisionAccounting, rng: random.Random
) -> ActionRequest:
    """Execute a uniform random legal action; not counted as an attempt."""
    action = rng.choice(engine.legal_actions(state))
    engine.apply_action(state, action)
    acct.fallbacks += 1
    return action


def _append_history(
    history: list[dict],
    config: HarnessConfig,
    state: GameState,
    step_id: int,
    action: ActionRequest,
    was_fallback: bool,
    last_error: Optional[str],
    invalid_attempts: int,
) -> None:
    if not config.history_enabled:
        return
    history.append(
        {
            "step_id": step_id,
            "turn": state.turn_number,
            "tool": action.tool,
            "arguments": dict(action.arguments),
            "fallback": was_fallback,
            "invalid_attempts": invalid_attempts,
            "last_error": last_error,
        }
    )
    # FIFO eviction keeps the newest entries within budget.
    while len(history) > config.history_budget:
        history.pop(0)
