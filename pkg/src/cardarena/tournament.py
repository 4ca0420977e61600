"""Tournament runners: round-robin evaluation and anchored longitudinal runs.

Both runners are fully deterministic from a master seed: every game's
seed derives from the master seed plus stable tags, schedules are
sorted by game id, and rating updates happen in simultaneous periods
(one per round-robin cycle, one per anchored round).

The anchored protocol plays an evolving candidate against a fixed,
frozen-rating anchor roster.  The candidate's mutable state lives in
`<state_root>/live`; after every round its evolve hook (if any) runs
and the live directory is snapshotted to `state_r<k>`, so the run
leaves a versioned trail `state_r0 .. state_r<rounds>`.  A failing
evolve hook rolls the live state back to the last good snapshot.
"""
from __future__ import annotations

import shutil
from dataclasses import dataclass, field
from itertools import combinations
from pathlib import Path
from typing import Callable, Optional, Sequence

from .engine import Engine
from .harness import DecisionAccounting, GameRecord, HarnessConfig, derive_seed, merge_accounting, play_game
from .pool import builtin_deck_ids, load_builtin_deck
from .rating import Rating, rate_period

__all__ = [
    "ScheduledGame",
    "AgentMetrics",
    "RoundRobinResult",
    "AnchoredResult",
    "schedule_round_robin",
    "run_round_robin",
    "run_anchored",
    "aggregate_metrics",
    "DEFAULT_ANCHOR_RATING",
]

# Anchors are measurement sticks: a tight deviation keeps them from
# absorbing information while still spreading expected scores.
DEFAULT_ANCHOR_RATING = Rating(rating=1500.0, deviation=50.0, volatility=0.06, frozen=True)


@dataclass(frozen=True)
class ScheduledGame:
    game_id: str
    period: int
    seats: tuple[str, str]
    deck_ids: tuple[str, str]
    seed: int


@dataclass
class AgentMetrics:
    games: int = 0
    wins: int = 0
    draws: int = 0
    losses: int = 0
    score: float = 0.0
    accounting: DecisionAccounting = field(default_factory=DecisionAccounting)

    @property
    def invalid_rate(self) -> float:
        return self.accounting.invalid_rate

    def to_payload(self) -> dict:
        return {
            "games": self.games,
            "wins": self.wins,
            "draws": self.draws,
            "losses": self.losses,
            "score": self.score,
            "decisions": self.accounting.decisions,
            "tool_calls": self.accounting.tool_calls,
            "action_attempts": self.accounting.action_attempts,
            "invalid_attempts": self.accounting.invalid_attempts,
            "invalid_rate": self.invalid_rate,
            "fallbacks": self.accounting.fallbacks,
            "agent_failures": self.accounting.agent_failures,
        }


def schedule_round_robin(
    names: Sequence[str],
    cycles: int,
    master_seed: int,
    deck_ids: Sequence[str],
) -> list[ScheduledGame]:
    """Every unordered pair once per cycle, with alternating seats.

    Over M cycles a pair sits one way ceil(M/2) times and the other way
    floor(M/2) times.  Both seats play the same (mirrored) deck, which
    rotates through `deck_ids` so agent strength is isolated from deck
    strength.  Game ids are unique and sort in play order.
    """
    if len(set(names)) != len(names):
        raise ValueError("agent names must be unique")
    if cycles < 1:
        raise ValueError("cycles must be >= 1")
    games: list[ScheduledGame] = []
    pairs = list(combinations(names, 2))
    for cycle in range(cycles):
        for pair_index, (a, b) in enumerate(pairs):
            seats = (a, b) if cycle % 2 == 0 else (b, a)
            deck = deck_ids[(cycle + pair_index) % len(deck_ids)]
            games.append(
                ScheduledGame(
                    game_id=f"rr-c{cycle:03d}-{a}--{b}",
                    period=cycle,
                    seats=seats,
                    deck_ids=(deck, deck),
                    seed=derive_seed(master_seed, "round-robin", str(cycle), a, b),
                )
            )
    games.sort(key=lambda g: g.game_id)
    return games


def aggregate_metrics(
    played: Sequence[tuple[ScheduledGame, GameRecord]]
) -> dict[str, AgentMetrics]:
    metrics: dict[str, AgentMetrics] = {}
    for game, record in played:
        scores = record.scores()
        for seat, name in enumerate(game.seats):
            m = metrics.setdefault(name, AgentMetrics())
            m.games += 1
            m.score += scores[seat]
            if scores[seat] == 1.0:
                m.wins += 1
            elif scores[seat] == 0.0:
                m.losses += 1
            else:
                m.draws += 1
            m.accounting = merge_accounting([m.accounting, record.accounting[seat]])
    return metrics


def _resolve_decks(engine: Engine, deck_ids: Optional[Sequence[str]]) -> dict[str, list[str]]:
    ids = list(deck_ids) if deck_ids else builtin_deck_ids()
    return {d: load_builtin_deck(d, engine.pool).expand() for d in ids}


@dataclass
class RoundRobinResult:
    master_seed: int
    cycles: int
    agent_names: list[str]
    deck_ids: list[str]
    harness_config: HarnessConfig
    pool_version: int
    schedule: list[ScheduledGame]
    records: list[tuple[ScheduledGame, GameRecord]]
    ratings_history: list[dict[str, Rating]]
    metrics: dict[str, AgentMetrics]

    @property
    def final_ratings(self) -> dict[str, Rating]:
        return self.ratings_history[-1]

    def manifest(self) -> dict:
        return {
            "kind": "round_robin",
            "master_seed": self.master_seed,
            "cycles": self.cycles,
            "agents": list(self.agent_names),
            "deck_ids": list(self.deck_ids),
            "pool_version": self.pool_version,
            "harness_config": self.harness_config.to_payload(),
            "games": len(self.records),
            "results": [_result_row(g, r) for g, r in self.records],
            "final_ratings": {n: _rating_row(r) for n, r in sorted(self.final_ratings.items())},
            "metrics": {n: m.to_payload() for n, m in sorted(self.metrics.items())},
        }


def run_round_robin(
    engine: Engine,
    agents: dict[str, object],
    cycles: int,
    master_seed: int,
    config: Optional[HarnessConfig] = None,
    deck_ids: Optional[Sequence[str]] = None,
    trajectory_dir: Optional[Path] = None,
    progress: Optional[Callable[[ScheduledGame, GameRecord], None]] = None,
) -> RoundRobinResult:
    """All-play-all over M cycles; each cycle is one rating period."""
    config = config or HarnessConfig()
    names = sorted(agents)
    decks = _resolve_decks(engine, deck_ids)
    schedule = schedule_round_robin(names, cycles, master_seed, sorted(decks))
    ratings = {n: Rating() for n in names}
    history = [dict(ratings)]
    records: list[tuple[ScheduledGame, GameRecord]] = []

    for cycle in range(cycles):
        period_results: list[tuple[str, str, float]] = []
        for game in (g for g in schedule if g.period == cycle):
            record = _play_scheduled(engine, agents, decks, game, config, trajectory_dir)
            records.append((game, record))
            period_results.append((game.seats[0], game.seats[1], record.scores()[0]))
            if progress is not None:
                progress(game, record)
        ratings = rate_period(ratings, period_results)
        history.append(dict(ratings))

    records.sort(key=lambda pair: pair[0].game_id)
    return RoundRobinResult(
        master_seed=master_seed,
        cycles=cycles,
        agent_names=names,
        deck_ids=sorted(decks),
        harness_config=config,
        pool_version=engine.pool.version,
        schedule=schedule,
        records=records,
        ratings_history=history,
        metrics=aggregate_metrics(records),
    )


def _play_scheduled(
    engine: Engine,
    agents: dict[str, object],
    decks: dict[str, list[str]],
    game: ScheduledGame,
    config: HarnessConfig,
    trajectory_dir: Optional[Path],
) -> GameRecord:
    trajectory_path = None
    if trajectory_dir is not None:
        trajectory_dir = Path(trajectory_dir)
        trajectory_dir.mkdir(parents=True, exist_ok=True)
        trajectory_path = trajectory_dir / f"{game.game_id}.jsonl"
    return play_game(
        engine,
        (decks[game.deck_ids[0]], decks[game.deck_ids[1]]),
        (agents[game.seats[0]], agents[game.seats[1]]),
        seed=game.seed,
        config=config,
        match_id=game.game_id,
        trajectory_path=trajectory_path,
        deck_labels=game.deck_ids,
    )


@dataclass
class AnchoredResult:
    candidate_name: str
    rounds: int
    master_seed: int
    anchor_names: list[str]
    deck_ids: list[str]
    harness_config: HarnessConfig
    pool_version: int
    records: list[tuple[ScheduledGame, GameRecord]]
    candidate_history: list[Rating]
    anchor_ratings: dict[str, Rating]
    metrics: dict[str, AgentMetrics]
    state_dirs: list[str]
    evolve_failures: list[dict]

    def manifest(self) -> dict:
        return {
            "kind": "anchored",
            "candidate": self.candidate_name,
            "rounds": self.rounds,
            "master_seed": self.master_seed,
            "anchors": list(self.anchor_names),
            "deck_ids": list(self.deck_ids),
            "pool_version": self.pool_version,
            "harness_config": self.harness_config.to_payload(),
            "games": len(self.records),
            "results": [_result_row(g, r) for g, r in self.records],
            "candidate_ratings": [_rating_row(r) for r in self.candidate_history],
            "anchor_ratings": {n: _rating_row(r) for n, r in sorted(self.anchor_ratings.items())},
            "metrics": {n: m.to_payload() for n, m in sorted(self.metrics.items())},
            "state_dirs": list(self.state_dirs),
            "evolve_failures": list(self.evolve_failures),
        }


def run_anchored(
    engine: Engine,
    candidate: object,
    anchors: dict[str, object],
    master_seed: int,
    state_root: Path,
    rounds: int = 8,
    config: Optional[HarnessConfig] = None,
    deck_ids: Optional[Sequence[str]] = None,
    candidate_name: Optional[str] = None,
    anchor_ratings: Optional[dict[str, Rating]] = None,
    progress: Optional[Callable[[ScheduledGame, GameRecord], None]] = None,
) -> AnchoredResult:
    """Longitudinal protocol: rounds of games against frozen anchors.

    Each round the candidate plays every anchor twice (once per seat),
    the round's games form one rating period (anchors never move), the
    candidate's evolve hook runs on the round's trajectories, and the
    live state directory is snapshotted.
    """
    config = config or HarnessConfig()
    cand = candidate_name or getattr(candidate, "name", "candidate")
    if cand in anchors:
        raise ValueError(f"candidate name {cand!r} collides with an anchor")
    if rounds < 1:
        raise ValueError("rounds must be >= 1")
    anchor_names = sorted(anchors)
    decks = _resolve_decks(engine, deck_ids)
    deck_list = sorted(decks)

    state_root = Path(state_root)
    live = state_root / "live"
    live.mkdir(parents=True, exist_ok=True)
    state_dirs: list[str] = []

    def snapshot(k: int) -> None:
        target = state_root / f"state_r{k}"
        if target.exists():
            shutil.rmtree(target)
        shutil.copytree(live, target)
        state_dirs.append(str(target))

    snapshot(0)

    ratings: dict[str, Rating] = {cand: Rating()}
    for name in anchor_names:
        r = (anchor_ratings or {}).get(name, DEFAULT_ANCHOR_RATING)
        ratings[name] = r if r.frozen else Rating(r.rating, r.deviation, r.volatility, frozen=True)
    candidate_history = [ratings[cand]]
    records: list[tuple[ScheduledGame, GameRecord]] = []
    evolve_failures: list[dict] = []

    agents = dict(anchors)
    agents[cand] = candidate
    evolve_hook = getattr(candidate, "evolve", None)

    for rnd in range(rounds):
        period_results: list[tuple[str, str, float]] = []
        round_trajectories: list[str] = []
        trajectory_dir = state_root / "trajectories" / f"round_{rnd:02d}"
        trajectory_dir.mkdir(parents=True, exist_ok=True)
        for anchor_index, anchor in enumerate(anchor_names):
            for side in (0, 1):
                seats = (cand, anchor) if side == 0 else (anchor, cand)
                deck = deck_list[(rnd + anchor_index) % len(deck_list)]
                game = ScheduledGame(
                    game_id=f"an-r{rnd:02d}-{anchor}-s{side}",
                    period=rnd,
                    seats=seats,
                    deck_ids=(deck, deck),
                    seed=derive_seed(master_seed, "anchored", str(rnd), anchor, str(side)),
                )
                record = _play_scheduled(engine, agents, decks, game, config, trajectory_dir)
                records.append((game, record))
                round_trajectories.append(str(trajectory_dir / f"{game.game_id}.jsonl"))
                period_results.append((game.seats[0], game.seats[1], record.scores()[0]))
                if progress is not None:
                    progress(game, record)
        ratings = rate_period(ratings, period_results)
        candidate_history.append(ratings[cand])

        if evolve_hook is not None:
            try:
                evolve_hook(rnd, round_trajectories, str(live))
            except Exception as exc:
                # Roll the live state back to the last good snapshot.
                evolve_failures.append({"round": rnd, "error": str(exc)})
                shutil.rmtree(live)
                shutil.copytree(state_root / f"state_r{rnd}", live)
        snapshot(rnd + 1)

    records.sort(key=lambda pair: pair[0].game_id)
    return AnchoredResult(
        candidate_name=cand,
        rounds=rounds,
        master_seed=master_seed,
        anchor_names=anchor_names,
        deck_ids=deck_list,
        harness_config=config,
        pool_version=engine.pool.version,
        records=records,
        candidate_history=candidate_history,
        anchor_ratings={n: ratings[n] for n in anchor_names},
        metrics=aggregate_metrics(records),
        state_dirs=state_dirs,
        evolve_failures=evolve_failures,
    )


def _result_row(game: ScheduledGame, record: GameRecord) -> dict:
    return {
        "game_id": game.game_id,
        "period": game.period,
        "seats": list(game.seats),
        "deck_ids": list(game.deck_ids),
        "seed": game.seed,
        "winner": record.result.winner,
        "reason": record.result.reason.value,
        "turns": record.turns,
        "scores": list(record.scores()),
    }


def _rating_row(r: Rating) -> dict:
    return {
        "rating": round(r.rating, 4),
        "deviation": round(r.deviation, 4),
        "volatility": round(r.volatility, 6),
        "frozen": r.frozen,
    }
