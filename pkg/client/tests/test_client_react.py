from __future__ import annotations

import pytest

from arenaclient.config import ClientConfig
from arenaclient.model import MockModelClient, ModelError, ToolCall
from arenaclient.prompts import TEMPLATES, TOOL_SCHEMAS, render_messages
from arenaclient.react import react_step
from arenaclient.skills import Skill, SkillStore

from clienthelpers import make_request, stub_config

ATTACK = {"tool": "attack",
          "arguments": {"source_card": "Torchfox", "attack_name": "Scorch"}}
PASS = {"tool": "pass_turn", "arguments": {}}


class TestScriptedStub:
    def test_first_listed_action(self):
        request = make_request(step_id=5, actions=[ATTACK, PASS])
        reply = react_step(request, stub_config())
        assert reply == {"v": 1, "step_id": 5, **ATTACK}

    def test_deterministic_across_calls(self):
        request = make_request(step_id=5, actions=[ATTACK, PASS])
        first = react_step(request, stub_config())
        assert all(react_step(request, stub_config()) == first for _ in range(10))

    def test_choosing_card_request_answers_choose_card(self):
        actions = [
            {"tool": "choose_card", "arguments": {"chosen_cards": ["Sparkit"]}},
            {"tool": "choose_card", "arguments": {"chosen_cards": ["Torchfox"]}},
        ]
        request = make_request(step_id=1, actions=actions, choosing=True,
                               candidates=["Torchfox", "Sparkit"])
        reply = react_step(request, stub_config())
        assert reply["tool"] == "choose_card"
        assert reply["arguments"] == {"chosen_cards": ["Sparkit"]}

    def test_masked_off_choice_uses_prompt_candidates(self):
        # no available_actions at all, only the choice block
        request = make_request(step_id=2, actions=None, choosing=True,
                               candidates=["Voltcub", "Ashling"], min_count=1)
        reply = react_step(request, stub_config())
        assert reply["tool"] == "choose_card"
        assert reply["arguments"] == {"chosen_cards": ["Ashling"]}

    def test_masked_off_plain_turn_passes(self):
        request = make_request(step_id=3, actions=None)
        assert react_step(request, stub_config())["tool"] == "pass_turn"

    def test_empty_action_list_passes(self):
        request = make_request(step_id=4, actions=[])
        assert react_step(request, stub_config())["tool"] == "pass_turn"

    def test_ignores_malformed_action_entries(self):
        request = make_request(step_id=6, actions=["garbage", {"no": "tool"}, PASS])
        assert react_step(request, stub_config())["tool"] == "pass_turn"


def model_config(mechanism="none", **kwargs) -> ClientConfig:
    return ClientConfig(mechanism=mechanism, **kwargs)


class TestReactLoop:
    def test_single_tool_call_becomes_reply(self):
        model = MockModelClient([ToolCall("attack", ATTACK["arguments"])])
        request = make_request(step_id=8, actions=[ATTACK, PASS])
        reply = react_step(request, model_config(), model=model)
        assert reply == {"v": 1, "step_id": 8, **ATTACK}
        messages = model.calls[0]["messages"]
        assert messages[0]["role"] == "system"
        assert "available_actions" in messages[0]["content"]
        assert model.calls[0]["tools"] is TOOL_SCHEMAS

    def test_text_only_reply_is_nudged_once(self):
        model = MockModelClient(["thinking out loud", ToolCall("pass_turn")])
        request = make_request(step_id=0, actions=[PASS])
        reply = react_step(request, model_config(), model=model)
        assert reply["tool"] == "pass_turn"
        nudge = model.calls[1]["messages"][-1]
        assert nudge == {"role": "user", "content": "Reply with exactly one tool call."}

    def test_model_failure_returns_error_record(self):
        model = MockModelClient([ModelError("socket closed")])
        request = make_request(step_id=7, actions=[PASS])
        reply = react_step(request, model_config(), model=model)
        assert reply["tool"] == "error"
        assert reply["step_id"] == 7
        assert "socket closed" in reply["arguments"]["message"]

    def test_missing_endpoint_is_error_record_not_crash(self):
        request = make_request(step_id=1, actions=[PASS])
        reply = react_step(request, model_config())
        assert reply["tool"] == "error"
        assert "model endpoint" in reply["arguments"]["message"]

    def test_choosing_card_bounce_then_choose(self):
        choose = ToolCall("choose_card", {"chosen_cards": ["Sparkit"]})
        model = MockModelClient([ToolCall("attack", ATTACK["arguments"]), choose])
        request = make_request(step_id=2, choosing=True, candidates=["Sparkit"],
                               actions=[{"tool": "choose_card",
                                         "arguments": {"chosen_cards": ["Sparkit"]}}])
        reply = react_step(request, model_config(), model=model)
        assert reply["tool"] == "choose_card"
        bounce = model.calls[1]["messages"][-1]
        assert bounce["role"] == "tool"
        assert "choose_card" in bounce["content"]

    def test_inner_step_budget_exhaustion(self):
        model = MockModelClient(["mm"] * 3)
        request = make_request(step_id=9, actions=[PASS])
        config = model_config(max_inner_steps=3)
        reply = react_step(request, config, model=model)
        assert reply["tool"] == "error"
        assert "3 model turns" in reply["arguments"]["message"]

    def test_bad_arguments_object_is_retried(self):
        model = MockModelClient([ToolCall("attack", "not a dict"), ToolCall("pass_turn")])
        request = make_request(step_id=3, actions=[PASS])
        reply = react_step(request, model_config(), model=model)
        assert reply["tool"] == "pass_turn"

    def test_query_reply_passes_through(self):
        model = MockModelClient([ToolCall("query_card", {"card_id": "torchfox"})])
        request = make_request(step_id=4, actions=[PASS])
        reply = react_step(request, model_config(), model=model)
        assert reply["tool"] == "query_card"


class TestSkillServing:
    def test_skill_library_serves_from_store(self, tmp_path):
        store = SkillStore(tmp_path)
        store.save(Skill("tempo", activation="behind on prizes",
                         objective="stabilize", principles=["bench a backup"]),
                   round_index=0)
        model = MockModelClient([ToolCall("activate_skill", {"name": "tempo"}),
                                 ToolCall("pass_turn")])
        config = model_config("skill_library", state_dir=str(tmp_path))
        request = make_request(step_id=0, actions=[PASS])
        reply = react_step(request, config, model=model)
        assert reply["tool"] == "pass_turn"
        served = model.calls[1]["messages"][-1]
        assert served["role"] == "tool"
        assert "behind on prizes" in served["content"]
        # the system prompt lists the stored skill
        assert "tempo" in model.calls[0]["messages"][0]["content"]

    def test_unknown_skill_names_known_ones(self, tmp_path):
        store = SkillStore(tmp_path)
        store.save(Skill("tempo"), round_index=0)
        model = MockModelClient([ToolCall("activate_skill", {"name": "zugzwang"}),
                                 ToolCall("pass_turn")])
        config = model_config("skill_library", state_dir=str(tmp_path))
        react_step(make_request(step_id=0, actions=[PASS]), config, model=model)
        served = model.calls[1]["messages"][-1]["content"]
        assert "no skill named 'zugzwang'" in served
        assert "tempo" in served

    def test_other_mechanisms_report_unavailable(self, tmp_path):
        model = MockModelClient([ToolCall("activate_skill", {"name": "tempo"}),
                                 ToolCall("pass_turn")])
        config = model_config("reflexion", state_dir=str(tmp_path))
        react_step(make_request(step_id=0, actions=[PASS]), config, model=model)
        served = model.calls[1]["messages"][-1]["content"]
        assert served == "skill retrieval is not available in this configuration"


class TestPromptRendering:
    def test_template_registry(self):
        assert "react-battle-v1" in TEMPLATES
        text = TEMPLATES["react-battle-v1"]
        assert "exactly one tool" in text
        assert "available_actions" in text

    def test_request_blocks_rendered(self):
        request = make_request(step_id=1, actions=[PASS])
        request["history"] = [
            {"step_id": 0, "turn": 1, "tool": "attach_energy",
             "arguments": {"source_card": "Blaze Energy"},
             "fallback": False, "invalid_attempts": 1,
             "last_error": "no such card in hand"},
        ]
        request["query_answers"] = [{"query": {"tool": "query_card"},
                                     "answer": {"name": "Torchfox"}}]
        request["last_error"] = "not a legal action right now"
        messages = render_messages(request, "react-battle-v1")
        user = messages[-1]["content"]
        assert "attach_energy" in user
        assert "[rejected: no such card in hand]" in user
        assert "Torchfox" in user
        assert "not a legal action right now" in user

    def test_extras_append_to_system_prompt(self):
        request = make_request(step_id=1, actions=[PASS])
        messages = render_messages(request, "react-battle-v1",
                                   extras=[("Strategic lessons", "- go second")])
        assert "Strategic lessons.\n- go second" in messages[0]["content"]

    def test_choosing_card_reminder(self):
        request = make_request(step_id=1, choosing=True, candidates=["Sparkit"])
        user = render_messages(request, "react-battle-v1")[-1]["content"]
        assert "choose_card" in user

    def test_tool_schemas_cover_engine_tools(self):
        names = {t["function"]["name"] for t in TOOL_SCHEMAS}
        assert names == {
            "attack", "play_pokemon", "evolve_pokemon", "attach_energy",
            "use_supporter", "use_item", "use_tool", "put_stadium",
            "discard_stadium", "use_stadium", "use_ability", "retreat",
            "choose_card", "pass_turn", "query_card", "query_discard",
            "activate_skill",
        }

    @pytest.mark.parametrize("name,required", [
        ("attack", ["attack_name", "source_card"]),
        ("choose_card", ["chosen_cards"]),
        ("pass_turn", []),
        ("activate_skill", ["name"]),
    ])
    def test_required_arguments_schema(self, name, required):
        schema = next(t for t in TOOL_SCHEMAS if t["function"]["name"] == name)
        assert schema["function"]["parameters"]["required"] == required
