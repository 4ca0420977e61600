"""Effect op grammar: parsing, filters, and coin-flip compilation layout."""
from __future__ import annotations

import pytest

from cardarena.effects import (
    CardFilter,
    OP_KINDS,
    PoolError,
    compile_program,
    parse_filter,
    program_op_kinds,
)
from cardarena.model import CardKind, EnergyKind, EnergyType, Stage, TrainerType


class TestFilterParsing:
    def test_any_matches_everything(self, pool):
        filt = parse_filter("any", "t")
        assert all(filt.matches(c) for c in pool.cards.values())

    def test_kind_filters(self, pool):
        filt = parse_filter("pokemon", "t")
        hits = [c for c in pool.cards.values() if filt.matches(c)]
        assert hits and all(c.kind is CardKind.POKEMON for c in hits)

    def test_subkind_and_type_clause(self, pool):
        filt = parse_filter("pokemon:basic&type=fire", "t")
        hits = [c for c in pool.cards.values() if filt.matches(c)]
        assert hits
        for c in hits:
            assert c.stage is Stage.BASIC
            assert EnergyType.FIRE in c.types

    def test_evolution_pseudo_stage(self, pool):
        filt = parse_filter("pokemon:evolution", "t")
        hits = [c for c in pool.cards.values() if filt.matches(c)]
        assert hits and all(c.stage in (Stage.STAGE1, Stage.STAGE2) for c in hits)

    def test_trainer_and_energy_subkinds(self):
        assert parse_filter("trainer:item", "t").trainer_type is TrainerType.ITEM
        assert parse_filter("energy:basic", "t").energy_kind is EnergyKind.BASIC

    def test_name_clause_pins_one_card(self, pool):
        some_id = sorted(pool.cards)[0]
        filt = parse_filter(f"any&name={some_id}", "t")
        hits = [c for c in pool.cards.values() if filt.matches(c)]
        assert [c.card_id for c in hits] == [some_id]

    @pytest.mark.parametrize(
        "text",
        ["ghost", "pokemon:mega", "trainer:weapon", "energy:prism", "any&level=9", "pokemon&type=shadow"],
    )
    def test_bad_filters_rejected(self, text):
        with pytest.raises(PoolError):
            parse_filter(text, "t")


class TestOpParsing:
    def _one(self, text):
        program = compile_program([text], "t")
        assert len(program) == 1
        return program[0]

    def test_draw(self):
        op = self._one("draw 3")
        assert (op.kind, op.args["n"]) == ("draw", 3)

    def test_draw_to(self):
        assert self._one("draw_to 5").args["n"] == 5

    def test_search(self):
        op = self._one("search deck pokemon:basic upto 2 to bench reveal")
        assert op.kind == "search"
        assert op.args["zone"] == "deck"
        assert op.args["count"] == 2
        assert op.args["dest"] == "bench"
        assert op.args["reveal"] is True
        assert isinstance(op.args["_filter"], CardFilter)

    def test_move_modes(self):
        assert self._one("move discard to deck all").args["mode"] == "all"
        op = self._one("move deck to hand first 2")
        assert (op.args["mode"], op.args["n"]) == ("first", 2)
        op = self._one("move hand to deck choose 1..2 any")
        assert (op.args["min"], op.args["max"]) == (1, 2)

    def test_attach_from(self):
        op = self._one("attach_from discard energy:basic&type=fire to own_any")
        assert op.kind == "attach_from"
        assert op.args["target"] == "own_any"

    def test_damage_and_heal(self):
        assert self._one("damage 30 to opp_active").args["n"] == 30
        assert self._one("heal 20 self").args["n"] == 20

    def test_damage_per(self):
        op = self._one("damage_per 20 own_bench_count")
        assert (op.args["unit"], op.args["counter"]) == (20, "own_bench_count")

    def test_condition(self):
        op = self._one("condition poisoned to defender")
        assert op.args["condition"] == "poisoned"

    def test_modify_damage(self):
        op = self._one("modify_damage taken -20 next_turn self")
        assert (op.args["mode"], op.args["delta"], op.args["duration"]) == ("taken", -20, "next_turn")

    def test_require_choice(self):
        op = self._one("require_choice hand any 1..1 to_deck")
        assert (op.args["min"], op.args["max"], op.args["verb"]) == (1, 1, "to_deck")

    @pytest.mark.parametrize(
        "text",
        [
            "draw 0",
            "draw x",
            "damage 25 to opp_active",
            "damage 30 to nobody",
            "damage_per 20 own_hand_count",
            "move deck to deck all",
            "heal -10 self",
            "search deck any upto 0 to hand",
            "modify_damage dealt 0 this_turn self",
            "require_choice hand any 2..1 to_hand",
            "condition sleepy to defender",
            "frobnicate 3",
            "",
        ],
    )
    def test_bad_ops_rejected(self, text):
        with pytest.raises(PoolError):
            compile_program([text], "t")


class TestCoinFlipCompilation:
    def test_flat_layout_with_jump_targets(self):
        program = compile_program(
            [
                "draw 1",
                {"coin_flip": {"heads": ["damage 30 to opp_active"], "tails": ["heal 10 self"]}},
                "shuffle deck",
            ],
            "t",
        )
        kinds = [op.kind for op in program]
        assert kinds == ["draw", "flip", "damage", "jump", "heal", "shuffle"]
        flip, jump = program[1], program[3]
        # Tails lands on the heal op, the jump skips straight past it.
        assert flip.args["tails_pc"] == 4
        assert jump.args["pc"] == 5

    def test_single_branch_flip(self):
        program = compile_program([{"heads": ["draw 2"]}], "t")
        kinds = [op.kind for op in program]
        assert kinds == ["flip", "draw", "jump"]
        assert program[0].args["tails_pc"] == 3
        assert program[2].args["pc"] == 3

    def test_nested_flips_compile(self):
        program = compile_program(
            [{"heads": [{"heads": ["draw 1"], "tails": ["draw 2"]}], "tails": ["end"]}],
            "t",
        )
        kinds = [op.kind for op in program]
        assert kinds == ["flip", "flip", "draw", "jump", "draw", "jump", "end"]
        # Outer tails branch starts after the whole heads subtree.
        assert program[0].args["tails_pc"] == 6

    def test_bad_mappings_rejected(self):
        with pytest.raises(PoolError):
            compile_program([{"coin_flip": {"sideways": ["draw 1"]}}], "t")
        with pytest.raises(PoolError):
            compile_program([{"not_an_op": []}], "t")
        with pytest.raises(PoolError):
            compile_program([42], "t")
        with pytest.raises(PoolError):
            compile_program("draw 1", "t")


def test_program_op_kinds_folds_compiler_artifacts():
    program = compile_program(
        ["draw 1", {"coin_flip": {"heads": ["damage 10 to opp_active"]}}],
        "t",
    )
    kinds = program_op_kinds(program)
    assert kinds == {"draw", "coin_flip", "damage"}
    assert kinds <= OP_KINDS
