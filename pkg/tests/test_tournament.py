"""Schedulers and tournament runners: structure, determinism, bookkeeping."""
from __future__ import annotations

import json
from itertools import combinations

import pytest

from cardarena.agents import HeuristicAgent, RandomAgent
from cardarena.harness import GameRecord, HarnessConfig, DecisionAccounting
from cardarena.model import GameResult, WinReason
from cardarena.rating import Rating
from cardarena.tournament import (
    DEFAULT_ANCHOR_RATING,
    ScheduledGame,
    aggregate_metrics,
    run_anchored,
    run_round_robin,
    schedule_round_robin,
)

DECKS = ["emberline", "gildhoard", "mindweave", "stormwing", "voltrush"]


class TestSchedule:
    def test_twelve_agents_five_cycles_is_330_games(self):
        names = [f"agent-{i:02d}" for i in range(12)]
        games = schedule_round_robin(names, 5, 7, DECKS)
        assert len(games) == 330
        assert len({g.game_id for g in games}) == 330
        assert len({g.seed for g in games}) == 330

    def test_every_pair_meets_once_per_cycle(self):
        names = ["a", "b", "c", "d"]
        games = schedule_round_robin(names, 3, 1, DECKS)
        for cycle in range(3):
            pairs = {frozenset(g.seats) for g in games if g.period == cycle}
            assert pairs == {frozenset(p) for p in combinations(names, 2)}

    def test_seats_alternate_with_ceiling_split(self):
        names = ["a", "b", "c"]
        games = schedule_round_robin(names, 5, 1, DECKS)
        for pair in combinations(names, 2):
            seats = [g.seats for g in games if frozenset(g.seats) == frozenset(pair)]
            assert len(seats) == 5
            assert seats.count(pair) == 3
            assert seats.count((pair[1], pair[0])) == 2

    def test_games_are_deck_mirrored_and_rotate(self):
        games = schedule_round_robin(["a", "b", "c"], 5, 1, DECKS)
        assert all(g.deck_ids[0] == g.deck_ids[1] for g in games)
        assert {g.deck_ids[0] for g in games} == set(DECKS)

    def test_schedule_is_deterministic_and_sorted(self):
        names = [f"p{i}" for i in range(6)]
        a = schedule_round_robin(names, 4, 99, DECKS)
        b = schedule_round_robin(names, 4, 99, DECKS)
        assert a == b
        assert [g.game_id for g in a] == sorted(g.game_id for g in a)
        c = schedule_round_robin(names, 4, 100, DECKS)
        assert [g.seed for g in a] != [g.seed for g in c]
        assert [g.game_id for g in a] == [g.game_id for g in c]

    def test_validation(self):
        with pytest.raises(ValueError, match="unique"):
            schedule_round_robin(["a", "a"], 1, 0, DECKS)
        with pytest.raises(ValueError, match="cycles"):
            schedule_round_robin(["a", "b"], 0, 0, DECKS)


def fake_record(scores, invalid=(0, 0)):
    if scores == (1.0, 0.0):
        result = GameResult(winner=0, reason=WinReason.ALL_PRIZES)
    elif scores == (0.0, 1.0):
        result = GameResult(winner=1, reason=WinReason.ALL_PRIZES)
    else:
        result = GameResult(winner=None, reason=WinReason.TURN_CAP)
    acct = tuple(
        DecisionAccounting(decisions=4, tool_calls=5, action_attempts=5, invalid_attempts=k)
        for k in invalid
    )
    return GameRecord(match_id="m", seed=0, result=result, turns=9, accounting=acct)


class TestAggregateMetrics:
    def test_counts_and_scores(self):
        games = [
            ScheduledGame("g1", 0, ("a", "b"), ("d", "d"), 1),
            ScheduledGame("g2", 0, ("b", "a"), ("d", "d"), 2),
            ScheduledGame("g3", 0, ("a", "b"), ("d", "d"), 3),
        ]
        played = [
            (games[0], fake_record((1.0, 0.0))),
            (games[1], fake_record((0.5, 0.5), invalid=(2, 0))),
            (games[2], fake_record((0.0, 1.0))),
        ]
        m = aggregate_metrics(played)
        assert m["a"].games == 3 and m["b"].games == 3
        assert (m["a"].wins, m["a"].draws, m["a"].losses) == (1, 1, 1)
        assert m["a"].score == 1.5 and m["b"].score == 1.5
        assert m["b"].accounting.invalid_attempts == 2
        assert m["b"].accounting.decisions == 12
        payload = m["a"].to_payload()
        assert payload["invalid_rate"] == 0.0
        assert payload["games"] == 3


@pytest.fixture(scope="module")
def rr_result(engine):
    agents = {"rando-1": RandomAgent(), "rando-2": RandomAgent(), "heur": HeuristicAgent()}
    return run_round_robin(engine, agents, cycles=2, master_seed=404,
                           deck_ids=["emberline", "voltrush"])


class TestRoundRobin:
    def test_structure(self, rr_result, engine):
        assert len(rr_result.records) == 6
        assert rr_result.agent_names == ["heur", "rando-1", "rando-2"]
        assert len(rr_result.ratings_history) == 3
        assert all(r == Rating() for r in rr_result.ratings_history[0].values())
        assert rr_result.pool_version == engine.pool.version
        ids = [g.game_id for g, _ in rr_result.records]
        assert ids == sorted(ids)

    def test_metrics_conservation(self, rr_result):
        metrics = rr_result.metrics
        assert set(metrics) == {"heur", "rando-1", "rando-2"}
        total_score = sum(m.score for m in metrics.values())
        total_games = sum(m.games for m in metrics.values())
        assert total_games == 12  # two seats per game
        assert total_score == 6.0  # one point per game
        for m in metrics.values():
            assert m.games == 4
            assert m.wins + m.draws + m.losses == m.games
            assert m.accounting.check_invariant()

    def test_ratings_cover_roster_every_period(self, rr_result):
        for period in rr_result.ratings_history:
            assert set(period) == {"heur", "rando-1", "rando-2"}
        moved = [
            n for n, r in rr_result.final_ratings.items()
            if r.rating != 1500.0 or r.deviation != 350.0
        ]
        assert set(moved) == {"heur", "rando-1", "rando-2"}

    def test_manifest_round_trips_as_json(self, rr_result):
        manifest = rr_result.manifest()
        text = json.dumps(manifest, sort_keys=True)
        parsed = json.loads(text)
        assert parsed["kind"] == "round_robin"
        assert parsed["games"] == 6
        assert len(parsed["results"]) == 6
        assert set(parsed["final_ratings"]) == {"heur", "rando-1", "rando-2"}
        for row in parsed["results"]:
            assert set(row) == {"game_id", "period", "seats", "deck_ids", "seed",
                                "winner", "reason", "turns", "scores"}

    def test_reruns_are_identical(self, rr_result, engine):
        again = run_round_robin(
            engine,
            {"rando-1": RandomAgent(), "rando-2": RandomAgent(), "heur": HeuristicAgent()},
            cycles=2, master_seed=404, deck_ids=["emberline", "voltrush"],
        )
        assert json.dumps(again.manifest(), sort_keys=True) == json.dumps(
            rr_result.manifest(), sort_keys=True
        )

    def test_trajectories_written_per_game(self, engine, tmp_path):
        agents = {"x": RandomAgent(), "y": RandomAgent()}
        result = run_round_robin(engine, agents, cycles=1, master_seed=5,
                                 deck_ids=["emberline"], trajectory_dir=tmp_path / "t")
        files = sorted(p.name for p in (tmp_path / "t").glob("*.jsonl"))
        assert files == [f"{g.game_id}.jsonl" for g, _ in result.records]


class RecordingEvolver(HeuristicAgent):
    """Candidate whose evolve hook writes into the live state dir."""

    def __init__(self, fail_rounds=()):
        super().__init__(name="cand")
        self.fail_rounds = set(fail_rounds)
        self.calls: list[tuple[int, int]] = []

    def evolve(self, round_index, trajectories, state_dir):
        self.calls.append((round_index, len(trajectories)))
        from pathlib import Path
        Path(state_dir, f"marker_r{round_index}").write_text("x")
        if round_index in self.fail_rounds:
            raise RuntimeError("synthetic evolve crash")


class TestAnchored:
    def test_structure_and_frozen_anchors(self, engine, tmp_path):
        candidate = RecordingEvolver()
        anchors = {"anchor-r": RandomAgent(), "anchor-h": HeuristicAgent()}
        result = run_anchored(
            engine, candidate, anchors, master_seed=11, state_root=tmp_path,
            rounds=3, deck_ids=["emberline", "voltrush"],
        )
        assert len(result.records) == 12  # 2 anchors x 2 seats x 3 rounds
        assert len(result.candidate_history) == 4
        assert result.candidate_history[0] == Rating()
        assert result.anchor_ratings == {
            "anchor-r": DEFAULT_ANCHOR_RATING,
            "anchor-h": DEFAULT_ANCHOR_RATING,
        }
        assert all(r.frozen for r in result.anchor_ratings.values())
        assert result.metrics["cand"].games == 12
        assert result.evolve_failures == []
        # each round: 2 games per anchor, candidate once per seat
        for rnd in range(3):
            round_games = [g for g, _ in result.records if g.period == rnd]
            assert len(round_games) == 4
            assert all("cand" in g.seats for g in round_games)
            seat0 = sum(1 for g in round_games if g.seats[0] == "cand")
            assert seat0 == 2

    def test_state_trail_and_evolve_calls(self, engine, tmp_path):
        candidate = RecordingEvolver()
        anchors = {"a0": RandomAgent()}
        result = run_anchored(engine, candidate, anchors, master_seed=12,
                              state_root=tmp_path, rounds=3, deck_ids=["emberline"])
        assert [d.rsplit("/", 1)[-1] for d in result.state_dirs] == [
            "state_r0", "state_r1", "state_r2", "state_r3",
        ]
        assert candidate.calls == [(0, 2), (1, 2), (2, 2)]
        assert not (tmp_path / "state_r0" / "marker_r0").exists()
        assert (tmp_path / "state_r1" / "marker_r0").exists()
        assert (tmp_path / "state_r3" / "marker_r2").exists()
        for rnd in range(3):
            files = list((tmp_path / "trajectories" / f"round_{rnd:02d}").glob("*.jsonl"))
            assert len(files) == 2

    def test_failed_evolve_rolls_back_live_state(self, engine, tmp_path):
        candidate = RecordingEvolver(fail_rounds={1})
        result = run_anchored(engine, candidate, anchors={"a0": RandomAgent()},
                              master_seed=13, state_root=tmp_path, rounds=3,
                              deck_ids=["emberline"])
        assert [f["round"] for f in result.evolve_failures] == [1]
        assert "synthetic evolve crash" in result.evolve_failures[0]["error"]
        # round 1's write was rolled back, so its marker never reaches a snapshot
        assert (tmp_path / "state_r2" / "marker_r0").exists()
        assert not (tmp_path / "state_r2" / "marker_r1").exists()
        live = sorted(p.name for p in (tmp_path / "live").glob("marker_*"))
        assert live == ["marker_r0", "marker_r2"]

    def test_candidate_rating_moves_anchors_do_not(self, engine, tmp_path):
        result = run_anchored(engine, HeuristicAgent(name="cand"),
                              anchors={"a0": RandomAgent(), "a1": RandomAgent()},
                              master_seed=14, state_root=tmp_path, rounds=2,
                              deck_ids=["stormwing"])
        final = result.candidate_history[-1]
        assert final.rating != 1500.0
        assert final.deviation < 350.0
        manifest = result.manifest()
        assert all(row == {"rating": 1500.0, "deviation": 50.0, "volatility": 0.06,
                           "frozen": True}
                   for row in manifest["anchor_ratings"].values())

    def test_custom_anchor_ratings_are_frozen_on_entry(self, engine, tmp_path):
        result = run_anchored(
            engine, RandomAgent(), anchors={"a0": RandomAgent()},
            master_seed=15, state_root=tmp_path, rounds=1, deck_ids=["emberline"],
            candidate_name="cand",
            anchor_ratings={"a0": Rating(1650.0, 80.0, 0.06, frozen=False)},
        )
        got = result.anchor_ratings["a0"]
        assert got.frozen is True
        assert got.rating == 1650.0 and got.deviation == 80.0

    def test_validation(self, engine, tmp_path):
        with pytest.raises(ValueError, match="collides"):
            run_anchored(engine, RandomAgent(), {"cand": RandomAgent()},
                         master_seed=1, state_root=tmp_path, rounds=1,
                         candidate_name="cand", deck_ids=["emberline"])
        with pytest.raises(ValueError, match="rounds"):
            run_anchored(engine, RandomAgent(), {"a": RandomAgent()},
                         master_seed=1, state_root=tmp_path, rounds=0,
                         candidate_name="cand", deck_ids=["emberline"])
