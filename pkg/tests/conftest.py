from __future__ import annotations

import random

import pytest
import yaml

from cardarena import Engine, load_builtin_deck, load_pool
from cardarena.pool import builtin_deck_ids


@pytest.fixture(scope="session")
def pool():
    return load_pool()


@pytest.fixture(scope="session")
def engine(pool):
    return Engine(pool)


@pytest.fixture(scope="session")
def decks(pool):
    return {d: load_builtin_deck(d, pool).expand() for d in builtin_deck_ids()}


@pytest.fixture(scope="session")
def pool_t(tmp_path_factory):
    """The small rule-oracle pool from tests/boards.py."""
    from boards import TEST_POOL

    path = tmp_path_factory.mktemp("pool") / "test_pool.yaml"
    path.write_text(yaml.safe_dump(TEST_POOL))
    return load_pool(path)


@pytest.fixture(scope="session")
def engine_t(pool_t):
    return Engine(pool_t)


def play_random_game(engine, deck, seed, on_step=None, max_steps=20_000, deck_b=None):
    """Drive one game with a uniform random policy straight at the engine.

    `on_step(state, legal, action)` is called before each apply.  Returns
    the finished state.
    """
    from cardarena.model import Phase

    state = engine.setup_game(deck, deck_b if deck_b is not None else deck, seed)
    rng = random.Random(seed ^ 0x5EED)
    steps = 0
    while state.phase is not Phase.FINISHED:
        legal = engine.legal_actions(state)
        assert legal, "a live game must always offer at least one action"
        action = rng.choice(legal)
        if on_step is not None:
            on_step(state, legal, action)
        engine.apply_action(state, action)
        steps += 1
        assert steps < max_steps, "game exceeded the step safety limit"
    return state
