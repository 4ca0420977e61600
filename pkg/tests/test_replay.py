"""Trajectory files: write, re-execute byte-exactly, flag any tampering."""
from __future__ import annotations

import json

import pytest

from cardarena.agents import RandomAgent
from cardarena.harness import play_game
from cardarena.replay import (
    ReplayError,
    read_trajectory,
    render_trajectory,
    verify_trajectory,
)


@pytest.fixture(scope="module")
def trajectory(engine, decks, tmp_path_factory):
    path = tmp_path_factory.mktemp("replay") / "base.jsonl"
    deck = decks["emberline"]
    record = play_game(engine, (deck, deck), [RandomAgent(), RandomAgent()], 78,
                       trajectory_path=path, match_id="base-game",
                       deck_labels=("emberline", "emberline"))
    return path, record


def tampered(path, tmp_path, mutate):
    """Copy the trajectory with one mutation; mutate(rows) edits in place
    and returns the 1-based line number it touched."""
    lines = path.read_text().splitlines()
    rows = [json.loads(l) for l in lines]
    line = mutate(rows)
    out = tmp_path / "tampered.jsonl"
    out.write_text("".join(json.dumps(r, sort_keys=True) + "\n" for r in rows))
    return out, line


def action_line_numbers(rows):
    """1-based file line numbers of action rows (header is line 1)."""
    return [i + 1 for i, r in enumerate(rows) if r.get("kind") == "action"]


class TestVerify:
    def test_clean_file_verifies(self, trajectory, pool):
        path, record = trajectory
        stats = verify_trajectory(path, pool)
        assert stats["match_id"] == "base-game"
        assert stats["turns"] == record.turns
        assert stats["winner"] == record.result.winner
        assert stats["reason"] == record.result.reason.value
        header, rows, result = read_trajectory(path)
        assert stats["rows"] == len(rows)
        assert stats["actions"] == sum(1 for r in rows if r["kind"] == "action")
        assert result is not None

    def test_tampered_action_reported_with_line_number(self, trajectory, pool, tmp_path):
        path, _ = trajectory

        def mutate(rows):
            line = action_line_numbers(rows)[4]
            rows[line - 1]["payload"]["arguments"]["bogus"] = "x"
            return line

        bad, line = tampered(path, tmp_path, mutate)
        with pytest.raises(ReplayError, match="does not replay") as err:
            verify_trajectory(bad, pool)
        assert err.value.line == line
        assert f"line {line}:" in str(err.value)

    def test_tampered_hash_reported_with_line_number(self, trajectory, pool, tmp_path):
        path, _ = trajectory

        def mutate(rows):
            line = action_line_numbers(rows)[2]
            rows[line - 1]["post_state_hash"] = "0" * 16
            return line

        bad, line = tampered(path, tmp_path, mutate)
        with pytest.raises(ReplayError, match="post_state_hash differs") as err:
            verify_trajectory(bad, pool)
        assert err.value.line == line

    def test_tampered_event_payload_detected(self, trajectory, pool, tmp_path):
        path, _ = trajectory

        def mutate(rows):
            for i, r in enumerate(rows):
                if r.get("kind") == "event":
                    r["payload"] = dict(r["payload"], forged=True)
                    return i + 1
            raise AssertionError("no event row")

        bad, line = tampered(path, tmp_path, mutate)
        with pytest.raises(ReplayError, match="payload differs") as err:
            verify_trajectory(bad, pool)
        assert err.value.line == line

    def test_tampered_result_detected(self, trajectory, pool, tmp_path):
        path, record = trajectory

        def mutate(rows):
            rows[-1]["winner"] = 1 - record.result.winner
            return len(rows)

        bad, _ = tampered(path, tmp_path, mutate)
        with pytest.raises(ReplayError, match="result mismatch"):
            verify_trajectory(bad, pool)

        def mutate_turns(rows):
            rows[-1]["turns"] += 1
            return len(rows)

        bad, _ = tampered(path, tmp_path, mutate_turns)
        with pytest.raises(ReplayError, match="turn count mismatch"):
            verify_trajectory(bad, pool)

    def test_pool_version_mismatch(self, trajectory, pool, tmp_path):
        path, _ = trajectory

        def mutate(rows):
            rows[0]["pool_version"] = 999
            return 1

        bad, _ = tampered(path, tmp_path, mutate)
        with pytest.raises(ReplayError, match="pool version mismatch") as err:
            verify_trajectory(bad, pool)
        assert err.value.line == 1

    def test_dropped_row_detected(self, trajectory, pool, tmp_path):
        path, _ = trajectory

        def mutate(rows):
            del rows[action_line_numbers(rows)[1] - 1]
            return 0

        bad, _ = tampered(path, tmp_path, mutate)
        with pytest.raises(ReplayError):
            verify_trajectory(bad, pool)

    def test_action_after_finish_detected(self, trajectory, pool, tmp_path):
        path, _ = trajectory

        def mutate(rows):
            extra = dict(rows[action_line_numbers(rows)[0] - 1])
            rows.insert(len(rows) - 1, extra)
            return len(rows) - 1

        bad, line = tampered(path, tmp_path, mutate)
        with pytest.raises(ReplayError, match="after the game finished") as err:
            verify_trajectory(bad, pool)
        assert err.value.line == line

    def test_missing_result_detected(self, trajectory, pool, tmp_path):
        path, _ = trajectory

        def mutate(rows):
            del rows[-1]
            return 0

        bad, _ = tampered(path, tmp_path, mutate)
        with pytest.raises(ReplayError, match="missing result row"):
            verify_trajectory(bad, pool)


class TestReadErrors:
    def test_bad_json_line(self, tmp_path):
        path = tmp_path / "bad.jsonl"
        path.write_text('{"kind": "header", "pool_version": 1}\nnot json\n')
        with pytest.raises(ReplayError, match="bad JSON") as err:
            read_trajectory(path)
        assert err.value.line == 2

    def test_duplicate_header(self, tmp_path):
        path = tmp_path / "dup.jsonl"
        path.write_text('{"kind": "header"}\n{"kind": "header"}\n')
        with pytest.raises(ReplayError, match="duplicate header") as err:
            read_trajectory(path)
        assert err.value.line == 2

    def test_row_before_header(self, tmp_path):
        path = tmp_path / "early.jsonl"
        path.write_text('{"kind": "action"}\n')
        with pytest.raises(ReplayError, match="row before header"):
            read_trajectory(path)

    def test_row_after_result(self, tmp_path):
        path = tmp_path / "late.jsonl"
        path.write_text('{"kind": "header"}\n{"kind": "result"}\n{"kind": "event"}\n')
        with pytest.raises(ReplayError, match="row after result") as err:
            read_trajectory(path)
        assert err.value.line == 3

    def test_unknown_kind(self, tmp_path):
        path = tmp_path / "kind.jsonl"
        path.write_text('{"kind": "header"}\n{"kind": "banana"}\n')
        with pytest.raises(ReplayError, match="unknown row kind"):
            read_trajectory(path)

    def test_missing_header(self, tmp_path):
        path = tmp_path / "empty.jsonl"
        path.write_text("\n")
        with pytest.raises(ReplayError, match="missing header"):
            read_trajectory(path)


class TestRender:
    def test_rendering_structure(self, trajectory):
        path, record = trajectory
        text = render_trajectory(path)
        lines = text.splitlines()
        assert lines[0] == "match base-game  seed 78  decks emberline vs emberline"
        markers = [l for l in lines if l.startswith("-- turn ")]
        assert len(markers) == record.turns
        assert markers[0].startswith("-- turn 1 (player ")
        assert any(l.startswith("P0 ") for l in lines)
        assert any(l.startswith("P1 ") for l in lines)
        assert any(l.lstrip().startswith("[") for l in lines)
        winner = record.result.winner
        assert lines[-1] == (
            f"result: player {winner} wins by {record.result.reason.value} "
            f"after {record.turns} turns"
        )

    def test_rendering_draw_result(self, tmp_path):
        path = tmp_path / "draw.jsonl"
        rows = [
            {"kind": "header", "match_id": "m", "seed": 1, "deck_labels": ["a", "b"]},
            {"kind": "result", "winner": None, "reason": "turn_cap", "turns": 200},
        ]
        path.write_text("".join(json.dumps(r) + "\n" for r in rows))
        text = render_trajectory(path)
        assert text.splitlines()[-1] == "result: draw (turn_cap) after 200 turns"
