"""Operator command line: play games, run tournaments, validate pools, replay logs.

Exit codes: 0 success, 2 configuration or input error, 3 verification
failure.  Every command is reproducible from its flags or manifest plus
the seed it names.
"""
from __future__ import annotations

import json
import os
import shlex
from pathlib import Path
from typing import Optional

import click

from .agents import ExternalAgent, FaultyAgent, ScriptedAgent, builtin_agent_names, make_agent
from .engine import Engine
from .harness import FALLBACK_POLICIES, HarnessConfig, play_game
from .pool import PoolError, builtin_deck_ids, load_builtin_deck, load_decklist, load_pool, pool_op_coverage
from .rating import Rating
from .replay import ReplayError, read_trajectory, render_trajectory, verify_trajectory
from .tournament import run_anchored, run_round_robin

__all__ = ["main"]


class ConfigError(click.ClickException):
    exit_code = 2


class VerificationFailure(click.ClickException):
    exit_code = 3


def _load_pool_arg(path: Optional[str]):
    try:
        return load_pool(path)
    except (PoolError, OSError) as exc:
        raise ConfigError(f"card pool: {exc}")


def _load_deck(spec: str, pool) -> list[str]:
    """A deck spec is a built-in deck id or a path to a decklist file."""
    try:
        if spec in builtin_deck_ids():
            return load_builtin_deck(spec, pool).expand()
        if not Path(spec).exists():
            raise ConfigError(
                f"deck {spec!r} is neither a built-in deck id {builtin_deck_ids()} nor an existing file"
            )
        return load_decklist(spec, pool).expand()
    except PoolError as exc:
        raise ConfigError(f"deck {spec!r}: {exc}")


def _make_agent(spec: str):
    """An agent spec is a built-in roster name or a prefixed recipe.

    Recipes: `external:<command line>` launches a subprocess speaking
    the line-delimited JSON protocol; `faulty:<period>:<inner>` wraps a
    built-in so every period-th reply is invalid; `scripted:<t1,t2,..>`
    plays the named tools in order, then random.
    """
    try:
        if spec.startswith("external:"):
            cmd = spec[len("external:"):].strip()
            if not cmd:
                raise ValueError("external agent needs a command line")
            return ExternalAgent(shlex.split(cmd))
        if spec.startswith("faulty:"):
            _, period, inner = spec.split(":", 2)
            return FaultyAgent(make_agent(inner), period=int(period))
        if spec.startswith("scripted:"):
            tools = [t for t in spec[len("scripted:"):].split(",") if t]
            return ScriptedAgent([{"tool": t} for t in tools])
        return make_agent(spec)
    except ValueError as exc:
        raise ConfigError(f"agent {spec!r}: {exc}")


def _harness_from_flags(structured, masking, history, history_budget, retry_limit, fallback) -> HarnessConfig:
    try:
        return HarnessConfig(
            structured_observation=structured,
            legal_action_masking=masking,
            history_enabled=history,
            history_budget=history_budget,
            retry_limit=retry_limit,
            fallback=fallback,
        )
    except ValueError as exc:
        raise ConfigError(str(exc))


def _write_json_atomic(path: Path, payload: dict) -> None:
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    os.replace(tmp, path)


harness_flags = [
    click.option("--no-structured-obs", "structured", flag_value=False, default=True,
                 help="Render observations as a flat key=value dump instead of nested JSON."),
    click.option("--no-action-mask", "masking", flag_value=False, default=True,
                 help="Omit the legal action list from observations."),
    click.option("--no-history", "history", flag_value=False, default=True,
                 help="Do not feed agents their own decision history."),
    click.option("--history-budget", default=40, show_default=True, type=int,
                 help="Max history entries retained per seat."),
    click.option("--retry-limit", default=3, show_default=True, type=int,
                 help="Invalid attempts tolerated per decision before fallback."),
    click.option("--fallback", default="uniform_random_legal", show_default=True,
                 type=click.Choice(FALLBACK_POLICIES),
                 help="Policy applied when the retry limit is exhausted."),
]


def _with_harness_flags(cmd):
    for flag in reversed(harness_flags):
        cmd = flag(cmd)
    return cmd


@click.group()
def main() -> None:
    """Deterministic trading-card-game engine and agent evaluation harness."""


@main.command("play")
@click.argument("deck_a")
@click.argument("deck_b")
@click.option("--agent-a", default="random", show_default=True, help="Seat 0 agent spec.")
@click.option("--agent-b", default="random", show_default=True, help="Seat 1 agent spec.")
@click.option("--seed", default=0, show_default=True, type=int)
@click.option("--pool", "pool_path", default=None, type=click.Path(), help="Card pool file (default: built-in pool).")
@click.option("--out", "out_path", default=None, type=click.Path(), help="Trajectory log path (JSONL).")
@click.option("--decision-log", default=None, type=click.Path(),
              help="Also log every observation given to the agents (JSONL).")
@click.option("--match-id", default="cli-game", show_default=True)
@_with_harness_flags
def cmd_play(deck_a, deck_b, agent_a, agent_b, seed, pool_path, out_path, decision_log,
             match_id, structured, masking, history, history_budget, retry_limit, fallback):
    """Play one game between two agents and print a result line."""
    pool = _load_pool_arg(pool_path)
    engine = Engine(pool)
    decks = (_load_deck(deck_a, pool), _load_deck(deck_b, pool))
    agents = (_make_agent(agent_a), _make_agent(agent_b))
    config = _harness_from_flags(structured, masking, history, history_budget, retry_limit, fallback)
    try:
        record = play_game(
            engine, decks, agents, seed=seed, config=config, match_id=match_id,
            trajectory_path=out_path, deck_labels=(deck_a, deck_b),
            decision_log_path=decision_log,
        )
    finally:
        for agent in agents:
            agent.close()
    click.echo(json.dumps({
        "winner": record.result.winner,
        "reason": record.result.reason.value,
        "turns": record.turns,
        "invalid_rate": [round(a.invalid_rate, 4) for a in record.accounting],
        "tool_calls": [a.tool_calls for a in record.accounting],
        "fallbacks": [a.fallbacks for a in record.accounting],
    }, sort_keys=True))


_ROUND_ROBIN_KEYS = {
    "kind", "master_seed", "cycles", "agents", "deck_ids", "pool", "harness",
    "output_dir", "save_trajectories", "workers",
}
_ANCHORED_KEYS = {
    "kind", "master_seed", "rounds", "candidate", "candidate_name", "anchors",
    "anchor_rating", "deck_ids", "pool", "harness", "output_dir", "workers",
}


def _load_manifest(path: Path) -> dict:
    import yaml

    try:
        raw = yaml.safe_load(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"manifest: {exc}")
    except yaml.YAMLError as exc:
        raise ConfigError(f"manifest {path}: not valid YAML/JSON: {exc}")
    if not isinstance(raw, dict):
        raise ConfigError(f"manifest {path}: expected a mapping")
    kind = raw.get("kind")
    if kind not in ("round_robin", "anchored"):
        raise ConfigError(f"manifest kind must be 'round_robin' or 'anchored', got {kind!r}")
    allowed = _ROUND_ROBIN_KEYS if kind == "round_robin" else _ANCHORED_KEYS
    unknown = sorted(set(raw) - allowed)
    if unknown:
        raise ConfigError(f"manifest: unknown keys {unknown} for kind {kind!r}")
    workers = raw.get("workers", 1)
    if not isinstance(workers, int) or workers < 1:
        raise ConfigError("manifest: workers must be a positive integer")
    return raw


def _harness_from_manifest(section) -> HarnessConfig:
    if section is None:
        return HarnessConfig()
    if not isinstance(section, dict):
        raise ConfigError("manifest: harness must be a mapping")
    allowed = set(HarnessConfig().to_payload())
    unknown = sorted(set(section) - allowed)
    if unknown:
        raise ConfigError(f"manifest: unknown harness keys {unknown}")
    try:
        return HarnessConfig(**section)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"manifest: harness: {exc}")


def _agent_map(section, default_names) -> dict:
    """Resolve a manifest agent section: mapping name -> spec, list of specs, or None."""
    if section is None:
        return {name: _make_agent(name) for name in default_names}
    if isinstance(section, list):
        section = {spec: spec for spec in section}
    if not isinstance(section, dict):
        raise ConfigError("manifest: agents/anchors must be a mapping or list")
    if not section:
        raise ConfigError("manifest: agents/anchors must not be empty")
    return {str(name): _make_agent(str(spec)) for name, spec in section.items()}


@main.command("tournament")
@click.argument("manifest_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--output-dir", default=None, type=click.Path(),
              help="Override the manifest's output directory.")
def cmd_tournament(manifest_path, output_dir):
    """Run the tournament described by a YAML/JSON manifest."""
    manifest_path = Path(manifest_path)
    manifest = _load_manifest(manifest_path)
    out_dir = Path(output_dir or manifest.get("output_dir") or manifest_path.with_suffix(""))
    out_dir.mkdir(parents=True, exist_ok=True)

    pool = _load_pool_arg(manifest.get("pool"))
    engine = Engine(pool)
    config = _harness_from_manifest(manifest.get("harness"))
    deck_ids = manifest.get("deck_ids")
    if deck_ids is not None and (not isinstance(deck_ids, list) or not deck_ids):
        raise ConfigError("manifest: deck_ids must be a non-empty list")
    master_seed = manifest.get("master_seed", 0)
    if not isinstance(master_seed, int):
        raise ConfigError("manifest: master_seed must be an integer")

    agents: dict = {}
    try:
        if manifest["kind"] == "round_robin":
            cycles = manifest.get("cycles", 5)
            if not isinstance(cycles, int) or cycles < 1:
                raise ConfigError("manifest: cycles must be a positive integer")
            agents = _agent_map(manifest.get("agents"), builtin_agent_names())
            trajectory_dir = out_dir / "trajectories" if manifest.get("save_trajectories") else None
            result = run_round_robin(
                engine, agents, cycles=cycles, master_seed=master_seed,
                config=config, deck_ids=deck_ids, trajectory_dir=trajectory_dir,
            )
        else:
            rounds = manifest.get("rounds", 8)
            if not isinstance(rounds, int) or rounds < 1:
                raise ConfigError("manifest: rounds must be a positive integer")
            if "candidate" not in manifest:
                raise ConfigError("manifest: anchored runs need a candidate agent spec")
            candidate = _make_agent(str(manifest["candidate"]))
            anchors = _agent_map(manifest.get("anchors"), builtin_agent_names())
            agents = dict(anchors)
            agents["__candidate__"] = candidate
            anchor_rating = None
            if "anchor_rating" in manifest:
                spec = manifest["anchor_rating"]
                if not isinstance(spec, dict) or not set(spec) <= {"rating", "deviation", "volatility"}:
                    raise ConfigError("manifest: anchor_rating must map rating/deviation/volatility")
                base = Rating(frozen=True)
                r = Rating(
                    rating=float(spec.get("rating", base.rating)),
                    deviation=float(spec.get("deviation", base.deviation)),
                    volatility=float(spec.get("volatility", base.volatility)),
                    frozen=True,
                )
                anchor_rating = {name: r for name in anchors}
            result = run_anchored(
                engine, candidate, anchors, master_seed=master_seed,
                state_root=out_dir, rounds=rounds, config=config, deck_ids=deck_ids,
                candidate_name=manifest.get("candidate_name"),
                anchor_ratings=anchor_rating,
            )
    except ValueError as exc:
        raise ConfigError(str(exc))
    finally:
        for agent in agents.values():
            agent.close()

    payload = result.manifest()
    payload["score_matrix"] = _score_matrix(result.records)
    _write_json_atomic(out_dir / "results.json", payload)
    click.echo(json.dumps({
        "kind": manifest["kind"],
        "games": payload["games"],
        "output_dir": str(out_dir),
        "results": str(out_dir / "results.json"),
    }, sort_keys=True))


def _score_matrix(records) -> dict:
    matrix: dict[str, dict[str, float]] = {}
    for game, record in records:
        scores = record.scores()
        for seat, name in enumerate(game.seats):
            row = matrix.setdefault(name, {})
            row[game.seats[1 - seat]] = row.get(game.seats[1 - seat], 0.0) + scores[seat]
    return matrix


@main.command("replay")
@click.argument("log_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--mode", default="verify", show_default=True, type=click.Choice(["verify", "pretty"]))
@click.option("--pool", "pool_path", default=None, type=click.Path(),
              help="Card pool the log was produced with (default: built-in pool).")
def cmd_replay(log_path, mode, pool_path):
    """Verify a trajectory log by re-execution, or pretty-print it."""
    pool = _load_pool_arg(pool_path)
    if mode == "pretty":
        try:
            click.echo(render_trajectory(log_path))
        except ReplayError as exc:
            raise ConfigError(f"{log_path}: {exc}")
        return
    try:
        summary = verify_trajectory(log_path, pool)
    except ReplayError as exc:
        raise VerificationFailure(f"{log_path}: {exc}")
    click.echo(json.dumps({"verified": True, **summary}, sort_keys=True))


@main.command("validate")
@click.option("--pool", "pool_path", default=None, type=click.Path(),
              help="Card pool file to validate (default: built-in pool).")
@click.option("--deck", "decks", multiple=True,
              help="Deck id or decklist path to validate against the pool; repeatable.")
def cmd_validate(pool_path, decks):
    """Validate a card pool (and optionally decklists) without playing."""
    pool = _load_pool_arg(pool_path)
    coverage = pool_op_coverage(pool)
    deck_names = list(decks) or builtin_deck_ids()
    for spec in deck_names:
        _load_deck(spec, pool)
    click.echo(json.dumps({
        "pool_version": pool.version,
        "cards": len(pool.cards),
        "effect_op_coverage": coverage,
        "decks_ok": deck_names,
    }, sort_keys=True))


if __name__ == "__main__":
    main()
