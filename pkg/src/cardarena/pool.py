"""Card pool and decklist loading.

The pool is a versioned YAML file of card definitions; decklists are
small YAML files referencing pool ids.  Both formats are documented in
the README.  Loading validates structure eagerly so a bad pool fails at
startup with the offending card and rule named.
"""
from __future__ import annotations

import importlib.resources
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Union

import yaml

from .effects import PoolError, compile_program, program_op_kinds
from .model import (
    AbilityDef,
    AttackDef,
    CardDef,
    CardKind,
    EnergyKind,
    EnergyType,
    Stage,
    TrainerType,
)

__all__ = [
    "CardPool",
    "DeckList",
    "load_pool",
    "load_decklist",
    "builtin_deck_ids",
    "load_builtin_deck",
    "pool_op_coverage",
    "ARCHETYPES",
]

ARCHETYPES = frozenset(
    {"aggro-scaling", "control-recursion", "fast-aggro", "combo-burst", "attrition-toolbox"}
)

MAX_COPIES = 4
DECK_SIZE = 60


@dataclass
class CardPool:
    version: int
    cards: dict[str, CardDef]
    by_name: dict[str, CardDef]

    def card(self, card_id: str) -> CardDef:
        return self.cards[card_id]

    def resolve_name(self, name: str) -> Optional[CardDef]:
        return self.by_name.get(name)


@dataclass
class DeckList:
    deck_id: str
    archetype: str
    entries: list[tuple[str, int]]

    def expand(self) -> list[str]:
        out: list[str] = []
        for card_id, count in self.entries:
            out.extend([card_id] * count)
        return out


def _data_path(*parts: str) -> Path:
    return Path(importlib.resources.files("cardarena").joinpath("data", *parts))


def _require(entry: dict, key: str, where: str):
    if key not in entry:
        raise PoolError(where, f"missing required field {key!r}")
    return entry[key]


def _parse_energy_list(raw, where: str) -> tuple[EnergyType, ...]:
    if not isinstance(raw, list):
        raise PoolError(where, "expected a list of energy types")
    out = []
    for item in raw:
        try:
            out.append(EnergyType(item))
        except ValueError:
            raise PoolError(where, f"unknown energy type: {item!r}")
    return tuple(out)


def _parse_attack(raw: dict, where: str) -> AttackDef:
    name = _require(raw, "name", where)
    cost = _parse_energy_list(_require(raw, "cost", where), f"{where}.cost")
    damage = raw.get("damage", 0)
    if not isinstance(damage, int) or damage < 0 or damage % 10 != 0:
        raise PoolError(where, f"attack damage must be a nonnegative multiple of 10, got {damage!r}")
    effect = compile_program(raw.get("effect", []) or [], f"{where}.effect")
    unknown = set(raw) - {"name", "cost", "damage", "effect"}
    if unknown:
        raise PoolError(where, f"unknown attack fields: {sorted(unknown)!r}")
    return AttackDef(name=name, cost=cost, damage=damage, effect=effect)


def _parse_card(raw: dict) -> CardDef:
    card_id = raw.get("id")
    if not isinstance(card_id, str) or not card_id:
        raise PoolError("pool", f"card entry missing string id: {raw!r}")
    where = f"card {card_id!r}"
    name = _require(raw, "name", where)
    try:
        kind = CardKind(_require(raw, "kind", where))
    except ValueError:
        raise PoolError(where, f"unknown kind: {raw.get('kind')!r}")

    common = {"id", "name", "kind", "text"}
    prize_value = raw.get("prize_value", 1)
    if not isinstance(prize_value, int) or prize_value < 1:
        raise PoolError(where, f"prize_value must be a positive integer, got {prize_value!r}")

    if kind is CardKind.POKEMON:
        allowed = common | {"stage", "evolves_from", "hp", "types", "weakness", "retreat", "attacks", "ability", "prize_value"}
        unknown = set(raw) - allowed
        if unknown:
            raise PoolError(where, f"unknown fields: {sorted(unknown)!r}")
        try:
            stage = Stage(_require(raw, "stage", where))
        except ValueError:
            raise PoolError(where, f"unknown stage: {raw.get('stage')!r}")
        hp = _require(raw, "hp", where)
        if not isinstance(hp, int) or hp <= 0 or hp % 10 != 0:
            raise PoolError(where, f"hp must be a positive multiple of 10, got {hp!r}")
        types = _parse_energy_list(_require(raw, "types", where), f"{where}.types")
        if not types:
            raise PoolError(where, "pokemon needs at least one type")
        weakness = None
        if raw.get("weakness") is not None:
            try:
                weakness = EnergyType(raw["weakness"])
            except ValueError:
                raise PoolError(where, f"unknown weakness type: {raw['weakness']!r}")
        retreat = raw.get("retreat", 0)
        if not isinstance(retreat, int) or retreat < 0:
            raise PoolError(where, f"retreat cost must be a nonnegative integer, got {retreat!r}")
        attacks_raw = raw.get("attacks", []) or []
        attacks = tuple(
            _parse_attack(a, f"{where}.attacks[{i}]") for i, a in enumerate(attacks_raw)
        )
        evolves_from = raw.get("evolves_from")
        if stage is Stage.BASIC and evolves_from is not None:
            raise PoolError(where, "basic pokemon cannot have evolves_from")
        if stage is not Stage.BASIC and not evolves_from:
            raise PoolError(where, "evolution pokemon needs evolves_from")
        ability = None
        if raw.get("ability") is not None:
            ab = raw["ability"]
            ab_where = f"{where}.ability"
            ab_name = _require(ab, "name", ab_where)
            ab_effect = compile_program(_require(ab, "effect", ab_where), f"{ab_where}.effect")
            unknown = set(ab) - {"name", "effect"}
            if unknown:
                raise PoolError(ab_where, f"unknown ability fields: {sorted(unknown)!r}")
            ability = AbilityDef(name=ab_name, effect=ab_effect)
        return CardDef(
            card_id=card_id,
            name=name,
            kind=kind,
            stage=stage,
            evolves_from=evolves_from,
            hp=hp,
            types=types,
            weakness=weakness,
            retreat_cost=retreat,
            attacks=attacks,
            ability=ability,
            rules_text=raw.get("text", ""),
            prize_value=prize_value,
        )

    if kind is CardKind.TRAINER:
        allowed = common | {"trainer_type", "effect", "static"}
        unknown = set(raw) - allowed
        if unknown:
            raise PoolError(where, f"unknown fields: {sorted(unknown)!r}")
        try:
            trainer_type = TrainerType(_require(raw, "trainer_type", where))
        except ValueError:
            raise PoolError(where, f"unknown trainer_type: {raw.get('trainer_type')!r}")
        effect = compile_program(raw.get("effect", []) or [], f"{where}.effect")
        static = raw.get("static", {}) or {}
        if static:
            if trainer_type is not TrainerType.TOOL:
                raise PoolError(where, "static modifiers are only valid on tools")
            unknown = set(static) - {"dealt", "taken"}
            if unknown:
                raise PoolError(where, f"unknown static keys: {sorted(unknown)!r}")
            for k, v in static.items():
                if not isinstance(v, int) or v % 10 != 0:
                    raise PoolError(where, f"static {k} must be a multiple of 10, got {v!r}")
        if trainer_type is TrainerType.TOOL:
            if effect:
                raise PoolError(where, "tools carry static modifiers, not effect programs")
            if not static:
                raise PoolError(where, "tool needs a static modifier")
        elif not effect:
            raise PoolError(where, f"{trainer_type.value} needs an effect program")
        return CardDef(
            card_id=card_id,
            name=name,
            kind=kind,
            trainer_type=trainer_type,
            effect=effect,
            static=dict(static),
            rules_text=raw.get("text", ""),
        )

    # energy
    allowed = common | {"energy_kind", "provides"}
    unknown = set(raw) - allowed
    if unknown:
        raise PoolError(where, f"unknown fields: {sorted(unknown)!r}")
    try:
        energy_kind = EnergyKind(_require(raw, "energy_kind", where))
    except ValueError:
        raise PoolError(where, f"unknown energy_kind: {raw.get('energy_kind')!r}")
    provides = _parse_energy_list(_require(raw, "provides", where), f"{where}.provides")
    if not provides:
        raise PoolError(where, "energy must provide at least one unit")
    if energy_kind is EnergyKind.BASIC and len(provides) != 1:
        raise PoolError(where, "basic energy provides exactly one unit")
    return CardDef(
        card_id=card_id,
        name=name,
        kind=kind,
        energy_kind=energy_kind,
        types=provides,
        rules_text=raw.get("text", ""),
    )


def load_pool(path: Optional[Union[str, Path]] = None) -> CardPool:
    """Load and validate a card pool file (the packaged pool by default)."""
    if path is None:
        path = _data_path("pool.yaml")
    path = Path(path)
    try:
        raw = yaml.safe_load(path.read_text())
    except yaml.YAMLError as exc:
        raise PoolError(str(path), f"YAML syntax error: {exc}")
    if not isinstance(raw, dict):
        raise PoolError(str(path), "pool file must be a mapping")
    version = raw.get("pool_version")
    if not isinstance(version, int):
        raise PoolError(str(path), "pool_version must be an integer")
    entries = raw.get("cards")
    if not isinstance(entries, list) or not entries:
        raise PoolError(str(path), "cards must be a nonempty list")

    cards: dict[str, CardDef] = {}
    by_name: dict[str, CardDef] = {}
    for entry in entries:
        if not isinstance(entry, dict):
            raise PoolError(str(path), f"card entry must be a mapping, got {type(entry).__name__}")
        card = _parse_card(entry)
        if card.card_id in cards:
            raise PoolError(f"card {card.card_id!r}", "duplicate card id")
        if card.name in by_name:
            raise PoolError(f"card {card.card_id!r}", f"duplicate card name {card.name!r}")
        cards[card.card_id] = card
        by_name[card.name] = card

    # Cross-references resolve only after every card is parsed.
    for card in cards.values():
        # Scaling damage folds into an attack's damage step, so it has no
        # meaning in trainer or ability programs.
        for slot, program in (("effect", card.effect), ("ability", card.ability.effect if card.ability else ())):
            if any(op.kind == "damage_per" for op in program):
                raise PoolError(f"card {card.card_id!r}", f"damage_per is only valid in attacks, found in {slot}")
        if card.kind is CardKind.POKEMON and card.evolves_from is not None:
            base = cards.get(card.evolves_from)
            if base is None:
                raise PoolError(f"card {card.card_id!r}", f"evolves_from unknown card {card.evolves_from!r}")
            if base.kind is not CardKind.POKEMON:
                raise PoolError(f"card {card.card_id!r}", "evolves_from must name a pokemon")
            expected = Stage.BASIC if card.stage is Stage.STAGE1 else Stage.STAGE1
            if base.stage is not expected:
                raise PoolError(
                    f"card {card.card_id!r}",
                    f"stage mismatch: {card.stage.value} evolves from {base.stage.value}",
                )
    return CardPool(version=version, cards=cards, by_name=by_name)


def load_decklist(source: Union[str, Path, dict], pool: CardPool) -> DeckList:
    """Load a decklist and validate it against the pool.

    Rules: exactly 60 cards, at most four copies per name except basic
    energy, and at least one basic pokemon.
    """
    if isinstance(source, (str, Path)):
        where = str(source)
        try:
            raw = yaml.safe_load(Path(source).read_text())
        except yaml.YAMLError as exc:
            raise PoolError(where, f"YAML syntax error: {exc}")
    else:
        raw = source
        where = str(raw.get("deck_id", "decklist"))
    if not isinstance(raw, dict):
        raise PoolError(where, "decklist must be a mapping")
    deck_id = raw.get("deck_id")
    if not isinstance(deck_id, str) or not deck_id:
        raise PoolError(where, "deck_id must be a nonempty string")
    archetype = raw.get("archetype")
    if archetype not in ARCHETYPES:
        raise PoolError(where, f"unknown archetype: {archetype!r}")
    entries_raw = raw.get("entries")
    if not isinstance(entries_raw, list) or not entries_raw:
        raise PoolError(where, "entries must be a nonempty list")

    entries: list[tuple[str, int]] = []
    seen: set[str] = set()
    total = 0
    has_basic = False
    for item in entries_raw:
        if not (isinstance(item, list) and len(item) == 2):
            raise PoolError(where, f"entry must be [card-id, count], got {item!r}")
        card_id, count = item
        if card_id not in pool.cards:
            raise PoolError(where, f"unknown card id: {card_id!r}")
        if card_id in seen:
            raise PoolError(where, f"duplicate entry for {card_id!r}")
        seen.add(card_id)
        if not isinstance(count, int) or count < 1:
            raise PoolError(where, f"count for {card_id!r} must be a positive integer")
        card = pool.card(card_id)
        is_basic_energy = card.kind is CardKind.ENERGY and card.energy_kind is EnergyKind.BASIC
        if count > MAX_COPIES and not is_basic_energy:
            raise PoolError(where, f"more than {MAX_COPIES} copies of {card_id!r}")
        if card.is_basic_pokemon:
            has_basic = True
        entries.append((card_id, count))
        total += count
    if total != DECK_SIZE:
        raise PoolError(where, f"deck must contain exactly {DECK_SIZE} cards, got {total}")
    if not has_basic:
        raise PoolError(where, "deck needs at least one basic pokemon")
    return DeckList(deck_id=deck_id, archetype=archetype, entries=entries)


def builtin_deck_ids() -> list[str]:
    deck_dir = _data_path("decks")
    return sorted(p.stem for p in deck_dir.glob("*.yaml"))


def load_builtin_deck(deck_id: str, pool: Optional[CardPool] = None) -> DeckList:
    if pool is None:
        pool = load_pool()
    path = _data_path("decks", f"{deck_id}.yaml")
    if not path.exists():
        raise PoolError(deck_id, f"no packaged deck named {deck_id!r}")
    return load_decklist(path, pool)


def pool_op_coverage(pool: CardPool) -> dict[str, int]:
    """Count how many cards use each effect op kind, across all programs."""
    counts: dict[str, int] = {}
    for card in pool.cards.values():
        kinds: set[str] = set()
        kinds |= program_op_kinds(card.effect)
        if card.ability is not None:
            kinds |= program_op_kinds(card.ability.effect)
        for attack in card.attacks:
            kinds |= program_op_kinds(attack.effect)
        for k in kinds:
            counts[k] = counts.get(k, 0) + 1
    return counts
