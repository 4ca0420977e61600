"""Decision loop: accounting, retries, fallbacks, ablations, agents."""
from __future__ import annotations

import json
import sys
import textwrap
import time

import pytest

from cardarena.agents import (
    ExternalAgent,
    FaultyAgent,
    HeuristicAgent,
    RandomAgent,
    ScriptedAgent,
    builtin_agent_names,
    make_agent,
)
from cardarena.harness import (
    QUERY_LIMIT_PER_DECISION,
    AgentError,
    DecisionAccounting,
    DecisionRequest,
    HarnessConfig,
    derive_seed,
    merge_accounting,
    play_game,
)
from cardarena.model import ActionRequest


def first_deck(decks) -> list[str]:
    return decks[sorted(decks)[0]]


def run(engine, decks, agents, seed, config=None, **kw):
    deck = first_deck(decks)
    return play_game(engine, (deck, deck), agents, seed, config=config, **kw)


class TestSeedDerivation:
    def test_frozen_values(self):
        assert derive_seed(42, "a", "b") == 2247581638255303345
        assert derive_seed(0, "game-0", "agent-0") == 9256457947934683265
        assert derive_seed(0, "game-0", "agent-1") == 13587380163337367248

    def test_tag_order_and_master_both_matter(self):
        assert derive_seed(1, "x", "y") != derive_seed(1, "y", "x")
        assert derive_seed(1, "x") != derive_seed(2, "x")
        assert derive_seed(3, "x") == derive_seed(3, "x")

    def test_range_is_64_bit(self):
        for s in range(50):
            assert 0 <= derive_seed(s, "t") < 2**64


class TestConfig:
    def test_rejects_unknown_fallback(self):
        with pytest.raises(ValueError, match="unknown fallback policy"):
            HarnessConfig(fallback="best_effort")

    def test_rejects_negative_limits(self):
        with pytest.raises(ValueError):
            HarnessConfig(retry_limit=-1)
        with pytest.raises(ValueError):
            HarnessConfig(history_budget=-1)

    def test_payload_roundtrip(self):
        cfg = HarnessConfig(structured_observation=False, history_budget=7)
        payload = cfg.to_payload()
        assert payload["structured_observation"] is False
        assert payload["history_budget"] == 7
        assert HarnessConfig(**payload) == cfg


class TestAccounting:
    def test_merge_sums_fields(self):
        a = DecisionAccounting(decisions=2, tool_calls=5, action_attempts=4,
                               invalid_attempts=1, fallbacks=1, agent_failures=0)
        b = DecisionAccounting(decisions=3, tool_calls=3, action_attempts=3)
        total = merge_accounting([a, b])
        assert total == DecisionAccounting(5, 8, 7, 1, 1, 0)

    def test_invalid_rate(self):
        assert DecisionAccounting().invalid_rate == 0.0
        assert DecisionAccounting(action_attempts=8, invalid_attempts=2).invalid_rate == 0.25

    def test_clean_game_accounting(self, engine, decks):
        record = run(engine, decks, [RandomAgent(), RandomAgent()], 11)
        assert record.result is not None
        for acct in record.accounting:
            assert acct.check_invariant()
            assert acct.invalid_attempts == 0
            assert acct.fallbacks == 0
            assert acct.tool_calls == acct.action_attempts == acct.decisions
        assert sum(record.scores()) == 1.0

    def test_faulty_agent_exact_counts(self, engine, decks):
        # the reply counter persists across games, so totals stay exact
        faulty = FaultyAgent(RandomAgent(), period=10)
        totals = []
        for game_index in range(3):
            record = run(engine, decks, [faulty, RandomAgent()], 100 + game_index)
            totals.append(record.accounting[0])
        acct = merge_accounting(totals)
        assert acct.action_attempts == faulty._replies
        assert acct.invalid_attempts == faulty._replies // 10
        assert acct.tool_calls == acct.action_attempts
        assert acct.fallbacks == 0
        assert acct.check_invariant()
        assert abs(acct.invalid_rate - 0.1) < 0.01

    def test_faulty_period_validation(self):
        with pytest.raises(ValueError, match="period must be at least 2"):
            FaultyAgent(RandomAgent(), period=1)


class QueryingAgent(RandomAgent):
    """Issues a fixed number of queries per decision before acting."""

    def __init__(self, per_decision: int):
        super().__init__()
        self.per_decision = per_decision
        self.queries_sent = 0
        self.answers_seen = 0

    def decide(self, request: DecisionRequest) -> ActionRequest:
        done = len(request.query_answers)
        self.answers_seen = max(self.answers_seen, done)
        if done < self.per_decision:
            self.queries_sent += 1
            if done % 2 == 0:
                return ActionRequest("query_discard", {"player": request.seat})
            return ActionRequest("query_card", {"card_id": "no-such-card"})
        for entry in request.query_answers:
            assert set(entry) == {"query", "answer"}
        return super().decide(request)


class TestQueries:
    def test_tool_calls_split_between_queries_and_attempts(self, engine, decks):
        agent = QueryingAgent(per_decision=2)
        record = run(engine, decks, [agent, RandomAgent()], 21)
        acct = record.accounting[0]
        assert acct.tool_calls == acct.action_attempts + agent.queries_sent
        assert acct.invalid_attempts == 0
        assert agent.queries_sent == 2 * acct.decisions
        assert agent.answers_seen == 2

    def test_query_cap_counts_as_invalid_then_falls_back(self, engine, decks):
        agent = QueryingAgent(per_decision=10_000)
        errors = []
        original = agent.decide

        def spy(request):
            if request.last_error is not None:
                errors.append(request.last_error)
            return original(request)

        agent.decide = spy
        record = run(engine, decks, [agent, RandomAgent()], 22,
                     config=HarnessConfig(retry_limit=0))
        acct = record.accounting[0]
        n = acct.decisions
        assert acct.tool_calls == n * (QUERY_LIMIT_PER_DECISION + 1)
        assert acct.action_attempts == acct.invalid_attempts == n
        assert acct.fallbacks == n
        assert acct.check_invariant()
        # the cap is reported to the agent on the retry that never comes
        # here (retry_limit=0), so errors only appear via history checks
        assert record.result is not None


class StubbornAgent(RandomAgent):
    """Always replies with the same illegal action."""

    def __init__(self):
        super().__init__()
        self.errors_seen: list[str] = []

    def decide(self, request: DecisionRequest) -> ActionRequest:
        if request.last_error is not None:
            self.errors_seen.append(request.last_error)
        return ActionRequest("pass_turn", {"bogus": "value"})


class CrashingAgent(RandomAgent):
    def decide(self, request: DecisionRequest) -> ActionRequest:
        raise AgentError("synthetic failure")


class TestRetriesAndFallback:
    def test_retry_then_fallback_counts(self, engine, decks):
        agent = StubbornAgent()
        record = run(engine, decks, [agent, RandomAgent()], 31,
                     config=HarnessConfig(retry_limit=3))
        acct = record.accounting[0]
        n = acct.decisions
        assert n > 0
        assert acct.action_attempts == 4 * n
        assert acct.invalid_attempts == 4 * n
        assert acct.fallbacks == n
        assert acct.invalid_rate == 1.0
        assert acct.check_invariant()
        assert record.result is not None
        assert agent.errors_seen
        assert all(e == "unexpected argument: 'bogus'" for e in agent.errors_seen)

    def test_agent_errors_count_and_fall_back(self, engine, decks):
        record = run(engine, decks, [CrashingAgent(), RandomAgent()], 32,
                     config=HarnessConfig(retry_limit=1))
        acct = record.accounting[0]
        n = acct.decisions
        assert acct.agent_failures == 2 * n
        assert acct.action_attempts == acct.invalid_attempts == 2 * n
        assert acct.tool_calls == 2 * n
        assert acct.fallbacks == n
        assert acct.check_invariant()

    def test_agent_error_message_surfaces_on_retry(self, engine, decks):
        seen = []

        class OneCrash(RandomAgent):
            def decide(self, request):
                if request.last_error is not None:
                    seen.append(request.last_error)
                    return super().decide(request)
                raise AgentError("boom")

        run(engine, decks, [OneCrash(), RandomAgent()], 33,
            config=HarnessConfig(retry_limit=2))
        assert seen
        assert all(e == "agent error: boom" for e in seen)


class HistoryProbe(RandomAgent):
    def __init__(self):
        super().__init__()
        self.lengths: list[int] = []
        self.snapshots: list[list[dict]] = []

    def decide(self, request: DecisionRequest) -> ActionRequest:
        self.lengths.append(len(request.history))
        self.snapshots.append(request.history)
        return super().decide(request)


class TestHistory:
    def test_budget_keeps_newest_entries(self, engine, decks):
        probe = HistoryProbe()
        run(engine, decks, [probe, RandomAgent()], 41,
            config=HarnessConfig(history_budget=5))
        assert max(probe.lengths) == 5
        last = probe.snapshots[-1]
        steps = [h["step_id"] for h in last]
        assert steps == sorted(steps)
        assert set(last[0]) == {
            "step_id", "turn", "tool", "arguments", "fallback",
            "invalid_attempts", "last_error",
        }
        # growth is one entry per own decision until the cap
        assert probe.lengths[:6] == [0, 1, 2, 3, 4, 5]

    def test_disabled_history_always_empty(self, engine, decks):
        probe = HistoryProbe()
        run(engine, decks, [probe, RandomAgent()], 42,
            config=HarnessConfig(history_enabled=False))
        assert set(probe.lengths) == {0}


class TestAblations:
    def test_masking_off_hides_available_actions(self, engine, decks, tmp_path):
        log = tmp_path / "decisions.jsonl"
        run(engine, decks, [RandomAgent(), RandomAgent()], 51,
            config=HarnessConfig(legal_action_masking=False), decision_log_path=log)
        rows = [json.loads(line) for line in log.read_text().splitlines()]
        assert rows
        assert all("available_actions" not in row["observation"] for row in rows)

    def test_masking_on_logs_available_actions(self, engine, decks, tmp_path):
        log = tmp_path / "decisions.jsonl"
        run(engine, decks, [RandomAgent(), RandomAgent()], 51, decision_log_path=log)
        rows = [json.loads(line) for line in log.read_text().splitlines()]
        assert rows
        assert all("available_actions" in row["observation"] for row in rows)
        assert [row["step_id"] for row in rows] == list(range(len(rows)))
        assert all(set(row) == {"step_id", "turn", "seat", "observation"} for row in rows)

    def test_raw_rendering_ablation(self, engine, decks):
        rendered = []

        class RenderProbe(RandomAgent):
            def decide(self, request):
                rendered.append(request.rendered)
                return super().decide(request)

        run(engine, decks, [RenderProbe(), RenderProbe()], 52,
            config=HarnessConfig(structured_observation=False))
        assert rendered
        assert all(not r.startswith("{") for r in rendered)
        assert all("global.turn=" in r for r in rendered)

    def test_structured_rendering_parses_as_json(self, engine, decks):
        rendered = []

        class RenderProbe(RandomAgent):
            def decide(self, request):
                rendered.append(request.rendered)
                return super().decide(request)

        run(engine, decks, [RenderProbe(), RandomAgent()], 52)
        assert all(json.loads(r) == s for r, s in zip(rendered, map(json.loads, rendered)))


class TestDeterminism:
    def test_same_seed_same_record(self, engine, decks):
        records = [
            run(engine, decks, [RandomAgent(), RandomAgent()], 61, match_id="m")
            for _ in range(2)
        ]
        assert records[0].result == records[1].result
        assert records[0].turns == records[1].turns
        assert records[0].accounting == records[1].accounting

    def test_different_seeds_diverge(self, engine, decks):
        outcomes = {
            run(engine, decks, [RandomAgent(), RandomAgent()], s).turns
            for s in range(65, 75)
        }
        assert len(outcomes) > 1


class TestBuiltinAgents:
    def test_roster_constructs(self):
        names = builtin_agent_names()
        assert names[0] == "random"
        assert len(names) == 12
        for n in names:
            agent = make_agent(n)
            assert agent.name == n

    def test_unknown_names_rejected(self):
        for bad in ["llm", "heuristic-v0", "heuristic-v11", "heuristic-vx"]:
            with pytest.raises(ValueError, match="unknown agent name"):
                make_agent(bad)

    def test_scripted_agent_plays_script_then_random(self, engine_t):
        from boards import board
        state = board(engine_t, {"active": "torchfox", "hand": ["fire-te"]},
                      {"active": "mindhoot"})
        legal = engine_t.legal_actions(state)
        moves = [{"tool": "pass_turn"}, ActionRequest("attack", {"source_card": "X", "attack_name": "Y"})]
        agent = ScriptedAgent(moves)
        agent.bind(7)
        req = DecisionRequest("m", 0, 0, {}, "", [], False, None, None, [], legal)
        assert agent.decide(req) == ActionRequest("pass_turn", {})
        assert agent.decide(req).tool == "attack"
        assert agent.decide(req) in legal

    def test_heuristic_picks_highest_damage_attack(self, engine_t):
        from boards import board
        state = board(
            engine_t,
            {"active": ("torchfox", {"energy": ["fire-te", "fire-te"]})},
            {"active": "grandtitan"},
        )
        from cardarena.observation import build_observation
        obs = build_observation(engine_t, state, 0)
        legal = [a for a in engine_t.legal_actions(state) if a.tool == "attack"]
        assert len(legal) == 2
        agent = HeuristicAgent()
        agent.bind(1)
        req = DecisionRequest("m", 0, 0, obs, "", [], False, None, None, [], legal)
        assert agent.decide(req).arguments["attack_name"] == "Blast"

    def test_heuristic_spends_least_on_costs_and_takes_most_on_searches(self):
        take = [ActionRequest("choose_card", {"chosen_cards": c})
                for c in ([], ["Torchfox"], ["Torchfox", "Mindhoot"])]
        obs = {"global": {"choice": {"reason": "search-deck"}},
               "public": {"you": {"active": None, "bench": []},
                          "opponent": {"active": None, "bench": []}}}
        agent = HeuristicAgent()
        agent.bind(1)
        req = DecisionRequest("m", 0, 0, obs, "", [], True, None, None, [], take)
        assert agent.decide(req).arguments["chosen_cards"] == ["Torchfox", "Mindhoot"]
        obs["global"]["choice"]["reason"] = "retreat-cost"
        req = DecisionRequest("m", 0, 0, obs, "", [], True, None, None, [], take)
        assert agent.decide(req).arguments["chosen_cards"] == []

    def test_heuristic_beats_random_smoke(self, engine, decks):
        deck = first_deck(decks)
        points = 0.0
        for g in range(24):
            agents = [HeuristicAgent(), RandomAgent()]
            if g % 2:
                agents.reverse()
            record = play_game(engine, (deck, deck), agents, 9000 + g)
            scores = record.scores()
            points += scores[0] if g % 2 == 0 else scores[1]
        assert points / 24 > 0.5


EXTERNAL_OK = textwrap.dedent(
    """
    import json, sys
    for line in sys.stdin:
        req = json.loads(line)
        if req["phase"] == "evolve":
            print(json.dumps({"status": "ok"}), flush=True)
            continue
        acts = req["observation"].get("available_actions") or [{"tool": "pass_turn", "arguments": {}}]
        act = acts[0]
        print(json.dumps({"step_id": req["step_id"], "tool": act["tool"],
                          "arguments": act["arguments"]}), flush=True)
    """
)


def write_script(tmp_path, body, name="agent.py"):
    path = tmp_path / name
    path.write_text(body)
    return [sys.executable, str(path)]


def dummy_request(step_id=0):
    return DecisionRequest("m", step_id, 0, {"available_actions": []}, "", [],
                           False, None, None, [], [])


class TestExternalAgent:
    def test_full_game_over_the_wire(self, engine, decks, tmp_path):
        deck = first_deck(decks)
        agents = [ExternalAgent(write_script(tmp_path, EXTERNAL_OK), name="ext"),
                  RandomAgent()]
        try:
            record = play_game(engine, (deck, deck), agents, 71)
        finally:
            agents[0].close()
        acct = record.accounting[0]
        assert record.result is not None
        assert acct.invalid_attempts == 0
        assert acct.fallbacks == 0
        assert acct.decisions > 0

    def test_wrong_step_id_echo_is_protocol_error(self, tmp_path):
        body = textwrap.dedent(
            """
            import json, sys
            for line in sys.stdin:
                req = json.loads(line)
                print(json.dumps({"step_id": -1, "tool": "pass_turn"}), flush=True)
            """
        )
        agent = ExternalAgent(write_script(tmp_path, body))
        try:
            with pytest.raises(AgentError, match="does not echo"):
                agent.decide(dummy_request(step_id=5))
        finally:
            agent.close()

    def test_malformed_json_is_protocol_error(self, tmp_path):
        body = textwrap.dedent(
            """
            import sys
            for line in sys.stdin:
                print("this is not json", flush=True)
            """
        )
        agent = ExternalAgent(write_script(tmp_path, body))
        try:
            with pytest.raises(AgentError, match="malformed reply JSON"):
                agent.decide(dummy_request())
        finally:
            agent.close()

    def test_missing_tool_is_protocol_error(self, tmp_path):
        body = textwrap.dedent(
            """
            import json, sys
            for line in sys.stdin:
                req = json.loads(line)
                print(json.dumps({"step_id": req["step_id"]}), flush=True)
            """
        )
        agent = ExternalAgent(write_script(tmp_path, body))
        try:
            with pytest.raises(AgentError, match="missing a tool name"):
                agent.decide(dummy_request())
        finally:
            agent.close()

    def test_timeout_is_protocol_error(self, tmp_path):
        body = textwrap.dedent(
            """
            import sys, time
            sys.stdin.readline()
            time.sleep(30)
            """
        )
        agent = ExternalAgent(write_script(tmp_path, body), default_deadline_ms=300)
        try:
            with pytest.raises(AgentError, match="timed out"):
                agent.decide(dummy_request())
        finally:
            agent.close()

    def test_dead_process_is_protocol_error(self, tmp_path):
        agent = ExternalAgent(write_script(tmp_path, "import sys; sys.exit(3)"))
        time.sleep(0.3)
        try:
            with pytest.raises(AgentError):
                agent.decide(dummy_request())
        finally:
            agent.close()

    def test_evolve_handshake(self, tmp_path):
        agent = ExternalAgent(write_script(tmp_path, EXTERNAL_OK))
        try:
            agent.evolve(1, ["t.jsonl"], "state")
        finally:
            agent.close()

    def test_evolve_failure_raises(self, tmp_path):
        body = textwrap.dedent(
            """
            import json, sys
            for line in sys.stdin:
                print(json.dumps({"status": "no"}), flush=True)
            """
        )
        agent = ExternalAgent(write_script(tmp_path, body))
        try:
            with pytest.raises(AgentError, match="evolve failed"):
                agent.evolve(1, [], "state")
        finally:
            agent.close()
