"""Deterministic two-player card game engine with an agent evaluation harness."""
from __future__ import annotations

from .model import (
    ActionRequest,
    GameConfig,
    GameResult,
    GameState,
    card_conservation_check,
    restore,
    snapshot,
    state_hash,
)
from .engine import Engine, IllegalAction
from .pool import CardPool, DeckList, load_builtin_deck, load_decklist, load_pool
from .observation import build_observation, render_raw, render_structured
from .harness import HarnessConfig, GameRecord, derive_seed, play_game
from .agents import builtin_agent_names, make_agent
from .rating import Rating, expected_score, rate_period, update_rating
from .replay import read_trajectory, render_trajectory, verify_trajectory
from .tournament import run_anchored, run_round_robin, schedule_round_robin

__version__ = "0.1.0"

__all__ = [
    "ActionRequest",
    "CardPool",
    "DeckList",
    "Engine",
    "GameConfig",
    "GameRecord",
    "GameResult",
    "GameState",
    "HarnessConfig",
    "IllegalAction",
    "Rating",
    "build_observation",
    "builtin_agent_names",
    "card_conservation_check",
    "derive_seed",
    "expected_score",
    "load_builtin_deck",
    "load_decklist",
    "load_pool",
    "make_agent",
    "play_game",
    "rate_period",
    "read_trajectory",
    "render_raw",
    "render_structured",
    "render_trajectory",
    "restore",
    "run_anchored",
    "run_round_robin",
    "schedule_round_robin",
    "snapshot",
    "state_hash",
    "update_rating",
    "verify_trajectory",
    "__version__",
]
