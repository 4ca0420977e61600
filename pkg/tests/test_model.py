"""State container invariants: hashing, snapshots, conservation, action keys."""
from __future__ import annotations

import pytest

from cardarena import ActionRequest, card_conservation_check, restore, snapshot, state_hash
from cardarena.model import Phase

from conftest import play_random_game


def test_state_hash_is_stable_and_pure(engine, decks):
    state = engine.setup_game(decks["emberline"], decks["emberline"], 31)
    h1 = state_hash(state)
    assert h1 == state_hash(state), "hashing must not mutate state"
    # The action log is excluded: logging noise must not change identity.
    state.action_log.append({"kind": "event", "turn": 0, "actor": None, "payload": {"x": 1}})
    assert state_hash(state) == h1
    # Any substantive field change must change the digest.
    state.players[0].hand.append(state.players[0].deck.pop())
    assert state_hash(state) != h1


def test_equal_setups_hash_equal(engine, decks):
    a = engine.setup_game(decks["voltrush"], decks["mindweave"], 77)
    b = engine.setup_game(decks["voltrush"], decks["mindweave"], 77)
    assert state_hash(a) == state_hash(b)
    c = engine.setup_game(decks["voltrush"], decks["mindweave"], 78)
    assert state_hash(c) != state_hash(a)


def test_snapshot_restore_roundtrip(engine, decks):
    state = play_random_game(engine, decks["gildhoard"], seed=5)
    snap = snapshot(state)
    clone = restore(snap)
    assert state_hash(clone) == state_hash(state)
    assert clone.phase is Phase.FINISHED
    assert clone.result == state.result
    # Restoring is value-typed: mutating the clone leaves the original alone.
    clone.players[0].discard.append("phantom")
    assert state_hash(clone) != state_hash(state)


def test_snapshot_roundtrip_mid_game(engine, decks):
    captured = []

    def grab(state, legal, action):
        if len(captured) < 3 and state.turn_number >= 2:
            captured.append(snapshot(state))

    play_random_game(engine, decks["stormwing"], seed=12, on_step=grab)
    assert captured
    for snap in captured:
        clone = restore(snap)
        assert snapshot(clone) == snap


def test_conservation_on_fresh_and_finished_states(engine, decks):
    state = engine.setup_game(decks["emberline"], decks["voltrush"], 3)
    assert card_conservation_check(state)
    done = play_random_game(engine, decks["emberline"], seed=8)
    assert card_conservation_check(done)
    # Destroying a card breaks the invariant.
    done.players[0].discard.pop()
    assert not card_conservation_check(done)


class TestActionRequestKey:
    def test_key_ignores_argument_order(self):
        a = ActionRequest("attach_energy", {"source_card": "x", "target": "y"})
        b = ActionRequest("attach_energy", {"target": "y", "source_card": "x"})
        assert a.key() == b.key()

    def test_key_sorts_chosen_card_lists(self):
        a = ActionRequest("choose_cards", {"chosen_cards": ["b", "a"]})
        b = ActionRequest("choose_cards", {"chosen_cards": ["a", "b"]})
        assert a.key() == b.key()

    def test_distinct_tools_have_distinct_keys(self):
        assert ActionRequest("pass_turn", {}).key() != ActionRequest("retreat", {}).key()

    def test_payload_roundtrip(self):
        a = ActionRequest("use_item", {"source_card": "Card Name"})
        payload = a.to_payload()
        assert payload == {"tool": "use_item", "arguments": {"source_card": "Card Name"}}
        assert ActionRequest(payload["tool"], payload["arguments"]).key() == a.key()


def test_decider_is_chooser_during_choices(engine, decks):
    seen = {"choice": False}

    def check(state, legal, action):
        if state.pending_choice is not None:
            seen["choice"] = True
            assert state.decider() == state.pending_choice.chooser

    play_random_game(engine, decks["mindweave"], seed=4, on_step=check)
    assert seen["choice"], "expected at least one choice prompt in a full game"


def test_result_scores():
    from cardarena.model import GameResult, WinReason

    win = GameResult(winner=0, reason=WinReason.ALL_PRIZES)
    assert win.scores() == (1.0, 0.0)
    win_b = GameResult(winner=1, reason=WinReason.NO_POKEMON)
    assert win_b.scores() == (0.0, 1.0)
    draw = GameResult(winner=None, reason=WinReason.TURN_CAP)
    assert draw.scores() == (0.5, 0.5)
