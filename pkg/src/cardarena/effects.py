"""Effect programs: the card-text op grammar and its compiler.

Card effects are written in the pool file as short op strings, e.g.
``draw 3`` or ``search deck pokemon:basic upto 1 to bench reveal``.
A coin flip is a mapping with ``heads``/``tails`` branches.  Programs
compile to a flat op list where branches become conditional jumps, so a
suspended program is fully described by its card, slot and an integer
program counter.  Execution lives in the engine module.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Optional

from .model import (
    CardDef,
    CardKind,
    Condition,
    EnergyKind,
    EnergyType,
    Op,
    Stage,
    TrainerType,
)

__all__ = [
    "PoolError",
    "CardFilter",
    "parse_filter",
    "compile_program",
    "program_op_kinds",
    "OP_KINDS",
]

# Declared op vocabulary.  "flip" compiles from coin_flip entries and
# "jump" is a compiler artifact, so coverage reporting maps them back.
OP_KINDS = frozenset(
    {
        "draw",
        "draw_to",
        "search",
        "move",
        "attach_from",
        "damage",
        "damage_per",
        "heal",
        "discard",
        "condition",
        "switch_active",
        "shuffle",
        "coin_flip",
        "modify_damage",
        "require_choice",
        "end",
    }
)

TARGETS = frozenset(
    {"self", "defender", "own_active", "opp_active", "own_bench", "opp_bench", "own_any", "opp_any"}
)
SIDES = frozenset({"self", "opponent"})
COUNTERS = frozenset(
    {
        "own_bench_count",
        "opp_bench_count",
        "energy_on_self",
        "energy_on_defender",
        "damage_on_self",
        "opp_prizes_taken",
        "own_discard_energy",
    }
)
VERBS = frozenset({"to_hand", "to_deck", "to_discard"})
DURATIONS = frozenset({"this_turn", "next_turn"})
SEARCH_ZONES = frozenset({"deck", "discard"})
DESTS = frozenset({"hand", "bench", "discard", "deck"})


class PoolError(ValueError):
    """Raised for malformed pool entries, with the offending location."""

    def __init__(self, where: str, message: str):
        self.where = where
        super().__init__(f"{where}: {message}")


@dataclass(frozen=True)
class CardFilter:
    """Predicate over card definitions, parsed from filter syntax.

    Syntax: ``any`` or ``kind[:sub]`` with optional ``&type=x`` and
    ``&name=card-id`` clauses, e.g. ``energy:basic&type=fire``.
    """

    kind: Optional[CardKind] = None
    stage: Optional[Stage] = None
    evolution_only: bool = False
    trainer_type: Optional[TrainerType] = None
    energy_kind: Optional[EnergyKind] = None
    energy_type: Optional[EnergyType] = None
    name_id: Optional[str] = None

    def matches(self, card: CardDef) -> bool:
        if self.kind is not None and card.kind is not self.kind:
            return False
        if self.stage is not None and card.stage is not self.stage:
            return False
        if self.evolution_only and card.stage not in (Stage.STAGE1, Stage.STAGE2):
            return False
        if self.trainer_type is not None and card.trainer_type is not self.trainer_type:
            return False
        if self.energy_kind is not None and card.energy_kind is not self.energy_kind:
            return False
        if self.energy_type is not None and self.energy_type not in card.types:
            return False
        if self.name_id is not None and card.card_id != self.name_id:
            return False
        return True


def parse_filter(text: str, where: str) -> CardFilter:
    if text == "any":
        return CardFilter()
    kwargs: dict[str, Any] = {}
    clauses = text.split("&")
    head = clauses[0]
    if head and head != "any":
        if ":" in head:
            kind_s, sub = head.split(":", 1)
        else:
            kind_s, sub = head, None
        try:
            kind = CardKind(kind_s)
        except ValueError:
            raise PoolError(where, f"unknown card kind in filter: {kind_s!r}")
        kwargs["kind"] = kind
        if sub is not None:
            if kind is CardKind.POKEMON:
                if sub == "evolution":
                    kwargs["evolution_only"] = True
                else:
                    try:
                        kwargs["stage"] = Stage(sub)
                    except ValueError:
                        raise PoolError(where, f"unknown stage in filter: {sub!r}")
            elif kind is CardKind.TRAINER:
                try:
                    kwargs["trainer_type"] = TrainerType(sub)
                except ValueError:
                    raise PoolError(where, f"unknown trainer type in filter: {sub!r}")
            else:
                try:
                    kwargs["energy_kind"] = EnergyKind(sub)
                except ValueError:
                    raise PoolError(where, f"unknown energy kind in filter: {sub!r}")
    for clause in clauses[1:]:
        if "=" not in clause:
            raise PoolError(where, f"bad filter clause: {clause!r}")
        key, value = clause.split("=", 1)
        if key == "type":
            try:
                kwargs["energy_type"] = EnergyType(value)
            except ValueError:
                raise PoolError(where, f"unknown energy type in filter: {value!r}")
        elif key == "name":
            kwargs["name_id"] = value
        else:
            raise PoolError(where, f"unknown filter clause key: {key!r}")
    return CardFilter(**kwargs)


def _parse_range(token: str, where: str) -> tuple[int, int]:
    if ".." not in token:
        raise PoolError(where, f"expected M..N range, got {token!r}")
    lo_s, hi_s = token.split("..", 1)
    try:
        lo, hi = int(lo_s), int(hi_s)
    except ValueError:
        raise PoolError(where, f"bad range bounds: {token!r}")
    if lo < 0 or hi < lo:
        raise PoolError(where, f"invalid range: {token!r}")
    return lo, hi


def _parse_int(token: str, where: str) -> int:
    try:
        return int(token)
    except ValueError:
        raise PoolError(where, f"expected integer, got {token!r}")


def _expect(cond: bool, where: str, message: str) -> None:
    if not cond:
        raise PoolError(where, message)


def _parse_op_string(text: str, where: str) -> Op:
    tokens = text.split()
    _expect(bool(tokens), where, "empty op")
    head, rest = tokens[0], tokens[1:]

    if head == "draw":
        _expect(len(rest) == 1, where, f"draw takes one count: {text!r}")
        n = _parse_int(rest[0], where)
        _expect(n > 0, where, "draw count must be positive")
        return Op("draw", {"n": n})

    if head == "draw_to":
        _expect(len(rest) == 1, where, f"draw_to takes one count: {text!r}")
        n = _parse_int(rest[0], where)
        _expect(n > 0, where, "draw_to target must be positive")
        return Op("draw_to", {"n": n})

    if head == "search":
        # search ZONE FILTER upto N to DEST [reveal]
        _expect(len(rest) in (6, 7), where, f"bad search op: {text!r}")
        zone, filt_s, kw_upto, n_s, kw_to, dest = rest[:6]
        _expect(zone in SEARCH_ZONES, where, f"bad search zone: {zone!r}")
        _expect(kw_upto == "upto", where, f"expected 'upto' in search: {text!r}")
        _expect(kw_to == "to", where, f"expected 'to' in search: {text!r}")
        _expect(dest in DESTS, where, f"bad search destination: {dest!r}")
        reveal = False
        if len(rest) == 7:
            _expect(rest[6] == "reveal", where, f"unknown search flag: {rest[6]!r}")
            reveal = True
        n = _parse_int(n_s, where)
        _expect(n > 0, where, "search count must be positive")
        filt = parse_filter(filt_s, where)
        return Op("search", {"zone": zone, "filter": filt_s, "count": n, "dest": dest, "reveal": reveal, "_filter": filt})

    if head == "move":
        # move SRC to DEST all | move SRC to DEST first N | move SRC to DEST choose M..N FILTER
        _expect(len(rest) >= 4 and rest[1] == "to", where, f"bad move op: {text!r}")
        src, dest, mode = rest[0], rest[2], rest[3]
        _expect(src in ("deck", "discard", "hand"), where, f"bad move source: {src!r}")
        _expect(dest in DESTS, where, f"bad move destination: {dest!r}")
        _expect(src != dest, where, "move source equals destination")
        if mode == "all":
            _expect(len(rest) == 4, where, f"bad move op: {text!r}")
            return Op("move", {"src": src, "dest": dest, "mode": "all"})
        if mode == "first":
            _expect(len(rest) == 5, where, f"bad move op: {text!r}")
            n = _parse_int(rest[4], where)
            _expect(n > 0, where, "move first count must be positive")
            return Op("move", {"src": src, "dest": dest, "mode": "first", "n": n})
        if mode == "choose":
            _expect(len(rest) == 6, where, f"bad move op: {text!r}")
            lo, hi = _parse_range(rest[4], where)
            filt = parse_filter(rest[5], where)
            return Op(
                "move",
                {"src": src, "dest": dest, "mode": "choose", "min": lo, "max": hi, "filter": rest[5], "_filter": filt},
            )
        raise PoolError(where, f"bad move mode: {mode!r}")

    if head == "attach_from":
        # attach_from ZONE FILTER to TARGET
        _expect(len(rest) == 4 and rest[2] == "to", where, f"bad attach_from op: {text!r}")
        zone, filt_s, target = rest[0], rest[1], rest[3]
        _expect(zone in ("discard", "deck", "hand"), where, f"bad attach_from zone: {zone!r}")
        _expect(target in TARGETS, where, f"bad attach_from target: {target!r}")
        filt = parse_filter(filt_s, where)
        return Op("attach_from", {"zone": zone, "filter": filt_s, "target": target, "_filter": filt})

    if head == "damage":
        _expect(len(rest) == 3 and rest[1] == "to", where, f"bad damage op: {text!r}")
        n = _parse_int(rest[0], where)
        _expect(n > 0 and n % 10 == 0, where, "damage must be a positive multiple of 10")
        _expect(rest[2] in TARGETS, where, f"bad damage target: {rest[2]!r}")
        return Op("damage", {"n": n, "target": rest[2]})

    if head == "damage_per":
        _expect(len(rest) == 2, where, f"bad damage_per op: {text!r}")
        unit = _parse_int(rest[0], where)
        _expect(unit > 0 and unit % 10 == 0, where, "damage_per unit must be a positive multiple of 10")
        _expect(rest[1] in COUNTERS, where, f"unknown counter: {rest[1]!r}")
        return Op("damage_per", {"unit": unit, "counter": rest[1]})

    if head == "heal":
        _expect(len(rest) == 2, where, f"bad heal op: {text!r}")
        n = _parse_int(rest[0], where)
        _expect(n > 0 and n % 10 == 0, where, "heal must be a positive multiple of 10")
        _expect(rest[1] in TARGETS, where, f"bad heal target: {rest[1]!r}")
        return Op("heal", {"n": n, "target": rest[1]})

    if head == "discard":
        # discard hand all | discard ZONE choose M..N FILTER
        _expect(len(rest) >= 2, where, f"bad discard op: {text!r}")
        zone, mode = rest[0], rest[1]
        _expect(zone in ("hand", "self_energy"), where, f"bad discard zone: {zone!r}")
        if mode == "all":
            _expect(len(rest) == 2, where, f"bad discard op: {text!r}")
            return Op("discard", {"zone": zone, "mode": "all"})
        if mode == "choose":
            _expect(len(rest) == 4, where, f"bad discard op: {text!r}")
            lo, hi = _parse_range(rest[2], where)
            filt = parse_filter(rest[3], where)
            return Op(
                "discard",
                {"zone": zone, "mode": "choose", "min": lo, "max": hi, "filter": rest[3], "_filter": filt},
            )
        raise PoolError(where, f"bad discard mode: {mode!r}")

    if head == "condition":
        _expect(len(rest) == 3 and rest[1] == "to", where, f"bad condition op: {text!r}")
        try:
            cond = Condition(rest[0])
        except ValueError:
            raise PoolError(where, f"unknown condition: {rest[0]!r}")
        _expect(rest[2] in TARGETS, where, f"bad condition target: {rest[2]!r}")
        return Op("condition", {"condition": cond.value, "target": rest[2]})

    if head == "switch_active":
        _expect(len(rest) == 1 and rest[0] in SIDES, where, f"bad switch_active op: {text!r}")
        return Op("switch_active", {"side": rest[0]})

    if head == "shuffle":
        _expect(len(rest) == 1 and rest[0] == "deck", where, f"bad shuffle op: {text!r}")
        return Op("shuffle", {"zone": "deck"})

    if head == "modify_damage":
        # modify_damage dealt|taken DELTA DURATION TARGET
        _expect(len(rest) == 4, where, f"bad modify_damage op: {text!r}")
        mode = rest[0]
        _expect(mode in ("dealt", "taken"), where, f"bad modify_damage mode: {mode!r}")
        delta = _parse_int(rest[1], where)
        _expect(delta != 0 and delta % 10 == 0, where, "modify_damage delta must be a nonzero multiple of 10")
        _expect(rest[2] in DURATIONS, where, f"bad duration: {rest[2]!r}")
        _expect(rest[3] in TARGETS, where, f"bad modify_damage target: {rest[3]!r}")
        return Op("modify_damage", {"mode": mode, "delta": delta, "duration": rest[2], "target": rest[3]})

    if head == "require_choice":
        # require_choice ZONE FILTER M..N VERB
        _expect(len(rest) == 4, where, f"bad require_choice op: {text!r}")
        zone = rest[0]
        _expect(zone in ("hand", "discard"), where, f"bad require_choice zone: {zone!r}")
        filt = parse_filter(rest[1], where)
        lo, hi = _parse_range(rest[2], where)
        _expect(rest[3] in VERBS, where, f"bad require_choice verb: {rest[3]!r}")
        return Op(
            "require_choice",
            {"zone": zone, "filter": rest[1], "min": lo, "max": hi, "verb": rest[3], "_filter": filt},
        )

    if head == "end":
        _expect(len(rest) == 0, where, "end takes no arguments")
        return Op("end")

    raise PoolError(where, f"unknown op: {head!r}")


def compile_program(raw: list, where: str) -> tuple[Op, ...]:
    """Compile a pool-file effect list to a flat op tuple.

    Coin flips flatten to ``flip`` (jump on tails) and ``jump`` ops so
    that a resumable program counter is a plain integer.
    """
    if not isinstance(raw, list):
        raise PoolError(where, "effect must be a list of ops")
    ops: list[Op] = []
    _compile_into(raw, ops, where)
    return tuple(ops)


def _compile_into(raw: list, ops: list[Op], where: str) -> None:
    for i, entry in enumerate(raw):
        loc = f"{where}[{i}]"
        if isinstance(entry, str):
            ops.append(_parse_op_string(entry, loc))
        elif isinstance(entry, dict):
            if set(entry) == {"coin_flip"} and isinstance(entry["coin_flip"], dict):
                branches = entry["coin_flip"]
            elif set(entry) <= {"heads", "tails"} and entry:
                branches = entry
            else:
                raise PoolError(loc, f"unknown op mapping: {sorted(entry)!r}")
            unknown = set(branches) - {"heads", "tails"}
            if unknown:
                raise PoolError(loc, f"coin_flip branches must be heads/tails, got {sorted(unknown)!r}")
            heads = branches.get("heads", []) or []
            tails = branches.get("tails", []) or []
            flip = Op("flip", {"tails_pc": -1})
            ops.append(flip)
            _compile_into(heads, ops, f"{loc}.heads")
            jump = Op("jump", {"pc": -1})
            ops.append(jump)
            flip.args["tails_pc"] = len(ops)
            _compile_into(tails, ops, f"{loc}.tails")
            jump.args["pc"] = len(ops)
        else:
            raise PoolError(loc, f"op must be a string or coin_flip mapping, got {type(entry).__name__}")


def program_op_kinds(program: tuple[Op, ...]) -> set[str]:
    """Declared op kinds used by a compiled program (compiler artifacts folded)."""
    kinds = set()
    for op in program:
        if op.kind == "flip":
            kinds.add("coin_flip")
        elif op.kind == "jump":
            continue
        else:
            kinds.add(op.kind)
    return kinds
