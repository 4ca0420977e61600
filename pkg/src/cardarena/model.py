"""Core state model for the card game.

Everything here is plain data: card definitions, per-player zones, the
full game state, and the canonical serialization used for hashing and
replay.  Zones hold card ids (strings); definitions live in a CardPool
and are never copied into the state.  Rules live in the engine module.
"""
from __future__ import annotations

import hashlib
import json
import random
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Optional

__all__ = [
    "EnergyType",
    "CardKind",
    "Stage",
    "TrainerType",
    "EnergyKind",
    "Condition",
    "Phase",
    "WinReason",
    "Op",
    "AttackDef",
    "AbilityDef",
    "CardDef",
    "Modifier",
    "PokemonInPlay",
    "PerTurnFlags",
    "PlayerState",
    "ChoicePrompt",
    "PendingChoice",
    "GameResult",
    "GameConfig",
    "GameState",
    "ActionRequest",
    "snapshot",
    "state_hash",
    "restore",
    "card_conservation_check",
]


class EnergyType(str, Enum):
    FIRE = "fire"
    WATER = "water"
    LIGHTNING = "lightning"
    PSYCHIC = "psychic"
    FIGHTING = "fighting"
    DARKNESS = "darkness"
    METAL = "metal"
    COLORLESS = "colorless"


class CardKind(str, Enum):
    POKEMON = "pokemon"
    TRAINER = "trainer"
    ENERGY = "energy"


class Stage(str, Enum):
    BASIC = "basic"
    STAGE1 = "stage1"
    STAGE2 = "stage2"


class TrainerType(str, Enum):
    ITEM = "item"
    SUPPORTER = "supporter"
    TOOL = "tool"
    STADIUM = "stadium"


class EnergyKind(str, Enum):
    BASIC = "basic"
    SPECIAL = "special"


class Condition(str, Enum):
    ASLEEP = "asleep"
    PARALYZED = "paralyzed"
    CONFUSED = "confused"
    POISONED = "poisoned"
    BURNED = "burned"


class Phase(str, Enum):
    SETUP = "setup"
    TURN_MAIN = "turn_main"
    BETWEEN_TURNS = "between_turns"
    FINISHED = "finished"


class WinReason(str, Enum):
    ALL_PRIZES = "all_prizes"
    NO_POKEMON = "no_pokemon"
    DECK_OUT = "deck_out"
    TURN_CAP = "turn_cap"


@dataclass
class Op:
    """One compiled effect instruction.

    Programs are flat op lists; coin flips compile to a conditional jump
    so a suspended program resumes from a plain integer counter.
    """

    kind: str
    args: dict[str, Any] = field(default_factory=dict)


@dataclass(frozen=True)
class AttackDef:
    name: str
    cost: tuple[EnergyType, ...]
    damage: int
    effect: tuple[Op, ...] = ()


@dataclass(frozen=True)
class AbilityDef:
    name: str
    effect: tuple[Op, ...]


@dataclass
class CardDef:
    """Immutable definition of one printed card.

    For Energy cards `types` lists the units the card provides when
    attached, so a two-unit special energy simply lists two entries.
    """

    card_id: str
    name: str
    kind: CardKind
    stage: Optional[Stage] = None
    evolves_from: Optional[str] = None
    hp: Optional[int] = None
    types: tuple[EnergyType, ...] = ()
    weakness: Optional[EnergyType] = None
    retreat_cost: int = 0
    attacks: tuple[AttackDef, ...] = ()
    ability: Optional[AbilityDef] = None
    trainer_type: Optional[TrainerType] = None
    energy_kind: Optional[EnergyKind] = None
    effect: tuple[Op, ...] = ()
    static: dict[str, int] = field(default_factory=dict)
    rules_text: str = ""
    prize_value: int = 1

    @property
    def subkind(self) -> str:
        if self.kind is CardKind.POKEMON:
            return self.stage.value
        if self.kind is CardKind.TRAINER:
            return self.trainer_type.value
        return f"{self.energy_kind.value}-energy"

    @property
    def is_basic_pokemon(self) -> bool:
        return self.kind is CardKind.POKEMON and self.stage is Stage.BASIC


@dataclass
class Modifier:
    """Temporary damage adjustment attached to one Pokemon in play."""

    mode: str  # "dealt" or "taken"
    delta: int
    until_turn: int  # active while turn_number <= until_turn


@dataclass
class PokemonInPlay:
    """A Pokemon on the field: its evolution stack plus attachments.

    `stack` is bottom-to-top card ids; the top id is the current stage.
    Damage is stored in counters of 10.
    """

    stack: list[str]
    field_index: int
    entered_turn: int
    damage: int = 0
    energy: list[str] = field(default_factory=list)
    tool: Optional[str] = None
    conditions: set[Condition] = field(default_factory=set)
    evolved_this_turn: bool = False
    ability_used: bool = False
    modifiers: list[Modifier] = field(default_factory=list)

    @property
    def top(self) -> str:
        return self.stack[-1]

    def all_card_ids(self) -> list[str]:
        ids = list(self.stack)
        ids.extend(self.energy)
        if self.tool is not None:
            ids.append(self.tool)
        return ids


@dataclass
class PerTurnFlags:
    energy_attached: bool = False
    supporter_played: bool = False
    stadium_played: bool = False
    stadium_used: bool = False
    retreated: bool = False

    def reset(self) -> None:
        self.energy_attached = False
        self.supporter_played = False
        self.stadium_played = False
        self.stadium_used = False
        self.retreated = False


@dataclass
class PlayerState:
    registered: tuple[str, ...]
    deck: list[str]
    hand: list[str] = field(default_factory=list)
    discard: list[str] = field(default_factory=list)
    prizes: list[str] = field(default_factory=list)
    active: Optional[PokemonInPlay] = None
    bench: list[PokemonInPlay] = field(default_factory=list)
    flags: PerTurnFlags = field(default_factory=PerTurnFlags)
    setup_done: bool = False
    mulligans: int = 0
    next_field_index: int = 1

    def in_play(self) -> list[PokemonInPlay]:
        out = []
        if self.active is not None:
            out.append(self.active)
        out.extend(self.bench)
        return out

    def prizes_taken(self) -> int:
        return 6 - len(self.prizes)


@dataclass
class ChoicePrompt:
    """A pending card selection owed by one player.

    Candidates are tokens; duplicates convey multiplicity.  A legal
    answer is a sub-multiset whose size lies in [min_count, max_count]
    (some prompt kinds apply further validation, e.g. retreat cost).
    """

    chooser: int
    candidates: list[str]
    min_count: int
    max_count: int
    reason: str


@dataclass
class PendingChoice:
    prompt: ChoicePrompt
    kind: str
    data: dict[str, Any] = field(default_factory=dict)


@dataclass(frozen=True)
class GameResult:
    winner: Optional[int]
    reason: WinReason

    def scores(self) -> tuple[float, float]:
        if self.winner is None:
            return (0.5, 0.5)
        return (1.0, 0.0) if self.winner == 0 else (0.0, 1.0)


@dataclass(frozen=True)
class GameConfig:
    turn_cap: int = 200
    bench_limit: int = 5
    hand_size: int = 7
    prize_count: int = 6


@dataclass
class GameState:
    config: GameConfig
    players: list[PlayerState]
    rng: random.Random
    pool_version: int
    turn_number: int = 0
    active_player: int = 0
    first_player: int = 0
    phase: Phase = Phase.SETUP
    stadium: Optional[str] = None
    stadium_owner: Optional[int] = None
    choice_queue: list[PendingChoice] = field(default_factory=list)
    result: Optional[GameResult] = None
    turn_ending: bool = False
    upkeep_done: bool = False
    ko_sweep: bool = False
    pending_no_pokemon: Optional[list[int]] = None
    # Public one-line summaries bucketed by turn owner, for the
    # opponent_last_turn_actions observation field.
    cur_turn_summaries: list[list[str]] = field(default_factory=lambda: [[], []])
    prev_turn_summaries: list[list[str]] = field(default_factory=lambda: [[], []])
    action_log: list[dict] = field(default_factory=list)

    @property
    def pending_choice(self) -> Optional[ChoicePrompt]:
        return self.choice_queue[0].prompt if self.choice_queue else None

    def decider(self) -> int:
        """Seat that owes the next decision."""
        if self.choice_queue:
            return self.choice_queue[0].prompt.chooser
        if self.phase is Phase.SETUP:
            order = [self.first_player, 1 - self.first_player]
            for seat in order:
                if self.players[seat].active is None:
                    return seat
            for seat in order:
                if not self.players[seat].setup_done:
                    return seat
        return self.active_player

    def opponent(self, seat: int) -> int:
        return 1 - seat


@dataclass(frozen=True)
class ActionRequest:
    """One tool call: an action or a query addressed to the engine."""

    tool: str
    arguments: dict[str, Any] = field(default_factory=dict)

    def key(self) -> tuple:
        items = []
        for k in sorted(self.arguments):
            v = self.arguments[k]
            if isinstance(v, list):
                v = tuple(sorted(v))
            items.append((k, v))
        return (self.tool, tuple(items))

    def to_payload(self) -> dict:
        return {"tool": self.tool, "arguments": dict(self.arguments)}


# --- canonical serialization -------------------------------------------------

def _pip_snapshot(pip: PokemonInPlay) -> dict:
    return {
        "stack": list(pip.stack),
        "field_index": pip.field_index,
        "entered_turn": pip.entered_turn,
        "damage": pip.damage,
        "energy": list(pip.energy),
        "tool": pip.tool,
        "conditions": sorted(c.value for c in pip.conditions),
        "evolved_this_turn": pip.evolved_this_turn,
        "ability_used": pip.ability_used,
        "modifiers": [[m.mode, m.delta, m.until_turn] for m in pip.modifiers],
    }


def _player_snapshot(p: PlayerState) -> dict:
    return {
        "registered": list(p.registered),
        "deck": list(p.deck),
        "hand": list(p.hand),
        "discard": list(p.discard),
        "prizes": list(p.prizes),
        "active": _pip_snapshot(p.active) if p.active else None,
        "bench": [_pip_snapshot(b) for b in p.bench],
        "flags": {
            "energy_attached": p.flags.energy_attached,
            "supporter_played": p.flags.supporter_played,
            "stadium_played": p.flags.stadium_played,
            "stadium_used": p.flags.stadium_used,
            "retreated": p.flags.retreated,
        },
        "setup_done": p.setup_done,
        "mulligans": p.mulligans,
        "next_field_index": p.next_field_index,
    }


def _choice_snapshot(c: PendingChoice) -> dict:
    return {
        "kind": c.kind,
        "prompt": {
            "chooser": c.prompt.chooser,
            "candidates": list(c.prompt.candidates),
            "min_count": c.prompt.min_count,
            "max_count": c.prompt.max_count,
            "reason": c.prompt.reason,
        },
        "data": c.data,
    }


def snapshot(state: GameState) -> dict:
    """Canonical structured form of the full state, minus the action log.

    Deck order, hand order, prize order and the RNG internals are all
    part of the state proper and are included.
    """
    rng_state = state.rng.getstate()
    return {
        "config": {
            "turn_cap": state.config.turn_cap,
            "bench_limit": state.config.bench_limit,
            "hand_size": state.config.hand_size,
            "prize_count": state.config.prize_count,
        },
        "pool_version": state.pool_version,
        "turn_number": state.turn_number,
        "active_player": state.active_player,
        "first_player": state.first_player,
        "phase": state.phase.value,
        "stadium": state.stadium,
        "stadium_owner": state.stadium_owner,
        "choices": [_choice_snapshot(c) for c in state.choice_queue],
        "result": (
            None
            if state.result is None
            else {"winner": state.result.winner, "reason": state.result.reason.value}
        ),
        "turn_ending": state.turn_ending,
        "upkeep_done": state.upkeep_done,
        "ko_sweep": state.ko_sweep,
        "pending_no_pokemon": state.pending_no_pokemon,
        "cur_turn_summaries": [list(s) for s in state.cur_turn_summaries],
        "prev_turn_summaries": [list(s) for s in state.prev_turn_summaries],
        "players": [_player_snapshot(p) for p in state.players],
        "rng": [rng_state[0], list(rng_state[1]), rng_state[2]],
    }


def state_hash(state: GameState) -> str:
    """64-bit-wide hex digest of the canonical serialization."""
    blob = json.dumps(snapshot(state), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def _pip_restore(d: dict) -> PokemonInPlay:
    return PokemonInPlay(
        stack=list(d["stack"]),
        field_index=d["field_index"],
        entered_turn=d["entered_turn"],
        damage=d["damage"],
        energy=list(d["energy"]),
        tool=d["tool"],
        conditions={Condition(c) for c in d["conditions"]},
        evolved_this_turn=d["evolved_this_turn"],
        ability_used=d["ability_used"],
        modifiers=[Modifier(m[0], m[1], m[2]) for m in d["modifiers"]],
    )


def _player_restore(d: dict) -> PlayerState:
    flags = PerTurnFlags(**d["flags"])
    return PlayerState(
        registered=tuple(d["registered"]),
        deck=list(d["deck"]),
        hand=list(d["hand"]),
        discard=list(d["discard"]),
        prizes=list(d["prizes"]),
        active=_pip_restore(d["active"]) if d["active"] else None,
        bench=[_pip_restore(b) for b in d["bench"]],
        flags=flags,
        setup_done=d["setup_done"],
        mulligans=d["mulligans"],
        next_field_index=d["next_field_index"],
    )


def restore(snap: dict) -> GameState:
    """Rebuild a GameState from `snapshot` output."""
    rng = random.Random()
    rng.setstate((snap["rng"][0], tuple(snap["rng"][1]), snap["rng"][2]))
    result = None
    if snap["result"] is not None:
        result = GameResult(snap["result"]["winner"], WinReason(snap["result"]["reason"]))
    choices = []
    for c in snap["choices"]:
        prompt = ChoicePrompt(
            chooser=c["prompt"]["chooser"],
            candidates=list(c["prompt"]["candidates"]),
            min_count=c["prompt"]["min_count"],
            max_count=c["prompt"]["max_count"],
            reason=c["prompt"]["reason"],
        )
        choices.append(PendingChoice(prompt=prompt, kind=c["kind"], data=dict(c["data"])))
    return GameState(
        config=GameConfig(**snap["config"]),
        players=[_player_restore(p) for p in snap["players"]],
        rng=rng,
        pool_version=snap["pool_version"],
        turn_number=snap["turn_number"],
        active_player=snap["active_player"],
        first_player=snap["first_player"],
        phase=Phase(snap["phase"]),
        stadium=snap["stadium"],
        stadium_owner=snap["stadium_owner"],
        choice_queue=choices,
        result=result,
        turn_ending=snap["turn_ending"],
        upkeep_done=snap["upkeep_done"],
        ko_sweep=snap["ko_sweep"],
        pending_no_pokemon=snap["pending_no_pokemon"],
        cur_turn_summaries=[list(s) for s in snap["cur_turn_summaries"]],
        prev_turn_summaries=[list(s) for s in snap["prev_turn_summaries"]],
    )


def card_conservation_check(state: GameState) -> bool:
    """True when every player's card multiset still matches their decklist.

    Counts deck, hand, discard, prizes, the full evolution stacks with
    attachments, and a stadium in play (owned by whoever played it).
    """
    for seat, player in enumerate(state.players):
        counts: dict[str, int] = {}
        for cid in player.deck:
            counts[cid] = counts.get(cid, 0) + 1
        for cid in player.hand:
            counts[cid] = counts.get(cid, 0) + 1
        for cid in player.discard:
            counts[cid] = counts.get(cid, 0) + 1
        for cid in player.prizes:
            counts[cid] = counts.get(cid, 0) + 1
        for pip in player.in_play():
            for cid in pip.all_card_ids():
                counts[cid] = counts.get(cid, 0) + 1
        if state.stadium is not None and state.stadium_owner == seat:
            counts[state.stadium] = counts.get(state.stadium, 0) + 1
        registered: dict[str, int] = {}
        for cid in player.registered:
            registered[cid] = registered.get(cid, 0) + 1
        if counts != registered:
            return False
    return True
