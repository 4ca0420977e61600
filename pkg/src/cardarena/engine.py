"""Rules engine: setup, legal actions, action application, win checks.

The engine is stateless across games; all game data lives in GameState.
`apply_action` validates against the enumerated legal set before any
mutation, so a rejected action leaves the state untouched.  Effect
programs run through a resumable interpreter: when an op needs a card
selection it queues a ChoicePrompt and the matching `choose_card`
action resumes the program at the recorded counter.
"""
from __future__ import annotations

import itertools
import random
from collections import Counter
from typing import Any, Optional

from .model import (
    ActionRequest,
    CardDef,
    CardKind,
    ChoicePrompt,
    Condition,
    EnergyKind,
    EnergyType,
    GameConfig,
    GameResult,
    GameState,
    PendingChoice,
    PerTurnFlags,
    Phase,
    PlayerState,
    PokemonInPlay,
    Modifier,
    Stage,
    TrainerType,
    WinReason,
)
from .pool import CardPool

__all__ = ["Engine", "IllegalAction", "GAME_TOOLS", "QUERY_TOOLS", "card_record"]

_SUSPENDED = object()
_BREAK = object()

# Required and optional argument names per tool.
_ARG_SPECS: dict[str, tuple[frozenset, frozenset]] = {
    "attack": (frozenset({"source_card", "attack_name"}), frozenset()),
    "play_pokemon": (frozenset({"source_card", "position"}), frozenset()),
    "evolve_pokemon": (frozenset({"source_card", "target_card"}), frozenset({"target_index"})),
    "attach_energy": (frozenset({"source_card", "target_card"}), frozenset({"target_index"})),
    "use_supporter": (frozenset({"source_card"}), frozenset()),
    "use_item": (frozenset({"source_card"}), frozenset()),
    "use_tool": (frozenset({"source_card", "target_card"}), frozenset({"target_index"})),
    "put_stadium": (frozenset({"source_card"}), frozenset()),
    "discard_stadium": (frozenset({"source_card"}), frozenset()),
    "use_stadium": (frozenset({"source_card"}), frozenset()),
    "use_ability": (frozenset({"source_card"}), frozenset({"ability_name", "target_index"})),
    "retreat": (frozenset({"source_card"}), frozenset()),
    "choose_card": (frozenset({"chosen_cards"}), frozenset()),
    "pass_turn": (frozenset(), frozenset()),
    "query_card": (frozenset({"card_id"}), frozenset()),
    "query_discard": (frozenset({"player"}), frozenset()),
}

GAME_TOOLS = frozenset(k for k in _ARG_SPECS if not k.startswith("query_"))
QUERY_TOOLS = frozenset({"query_card", "query_discard"})


class IllegalAction(Exception):
    """Raised when an action is rejected; names the violated rule."""

    def __init__(self, reason: str):
        self.reason = reason
        super().__init__(reason)


class Engine:
    def __init__(self, pool: CardPool, config: Optional[GameConfig] = None):
        self.pool = pool
        self.config = config or GameConfig()

    # --- setup ----------------------------------------------------------------

    def setup_game(self, deck_a: list[str], deck_b: list[str], seed: int) -> GameState:
        """Deal opening hands (with mulligan redraws) and prizes.

        The returned state is in the Setup phase: players still choose
        their starting Active and Bench through normal decision steps.
        """
        for deck in (deck_a, deck_b):
            if len(deck) != 60:
                raise ValueError(f"deck must contain 60 cards, got {len(deck)}")
            if not any(self.pool.card(cid).is_basic_pokemon for cid in deck):
                raise ValueError("deck contains no basic pokemon")
        rng = random.Random(seed)
        players = [
            PlayerState(registered=tuple(deck_a), deck=list(deck_a)),
            PlayerState(registered=tuple(deck_b), deck=list(deck_b)),
        ]
        state = GameState(
            config=self.config, players=players, rng=rng, pool_version=self.pool.version
        )
        ev: list[dict] = []
        for seat, player in enumerate(players):
            rng.shuffle(player.deck)
            self._deal_hand(state, seat, ev)
        # Each mulligan by one side grants the other side one extra draw.
        for seat in (0, 1):
            bonus = players[1 - seat].mulligans
            if bonus:
                drawn = self._draw(state, seat, bonus, ev)
                self._event(state, ev, {"event": "mulligan_bonus_draw", "player": seat, "count": drawn})
        for seat, player in enumerate(players):
            for _ in range(self.config.prize_count):
                player.prizes.append(player.deck.pop())
        first = 0 if rng.random() < 0.5 else 1
        state.first_player = first
        state.active_player = first
        self._event(state, ev, {"event": "coin_flip_first_player", "first_player": first})
        self._commit_events(state, ev)
        return state

    def _deal_hand(self, state: GameState, seat: int, ev: list[dict]) -> None:
        player = state.players[seat]
        while True:
            for _ in range(self.config.hand_size):
                player.hand.append(player.deck.pop())
            if any(self.pool.card(cid).is_basic_pokemon for cid in player.hand):
                return
            player.mulligans += 1
            self._event(state, ev, {"event": "mulligan", "player": seat})
            self._summary(state, seat, "mulligan: redrew opening hand")
            player.deck.extend(player.hand)
            player.hand.clear()
            state.rng.shuffle(player.deck)

    # --- queries ----------------------------------------------------------------

    def answer_query(self, state: GameState, viewer: int, action: ActionRequest) -> dict:
        """Answer a query tool without advancing state."""
        if action.tool == "query_card":
            ident = action.arguments.get("card_id")
            card = self.pool.cards.get(ident) or self.pool.resolve_name(str(ident))
            if card is None:
                return {"error": f"unknown card: {ident!r}"}
            return card_record(card)
        if action.tool == "query_discard":
            target = action.arguments.get("player")
            if isinstance(target, bool) or target not in (0, 1):
                return {"error": f"player must be 0 or 1, got {target!r}"}
            return {
                "player": target,
                "discard": [self.pool.card(cid).name for cid in state.players[target].discard],
            }
        return {"error": f"unknown query tool: {action.tool!r}"}

    # --- legal actions ----------------------------------------------------------

    def legal_actions(self, state: GameState) -> list[ActionRequest]:
        cache = getattr(state, "_legal_cache", None)
        mut = getattr(state, "_mut", 0)
        if cache is not None and cache[0] == mut:
            return cache[1]
        actions = self._legal_actions_uncached(state)
        state._legal_cache = (mut, actions, {a.key() for a in actions})
        return actions

    def _legal_keys(self, state: GameState) -> set:
        self.legal_actions(state)
        return state._legal_cache[2]

    def _legal_actions_uncached(self, state: GameState) -> list[ActionRequest]:
        if state.phase is Phase.FINISHED:
            return []
        if state.choice_queue:
            pending = state.choice_queue[0]
            return [
                ActionRequest("choose_card", {"chosen_cards": list(sel)})
                for sel in self._selections_for(state, pending)
            ]
        if state.phase is Phase.SETUP:
            return self._setup_actions(state)
        return self._main_actions(state)

    def _setup_actions(self, state: GameState) -> list[ActionRequest]:
        seat = state.decider()
        player = state.players[seat]
        actions: list[ActionRequest] = []
        position = "active" if player.active is None else "bench"
        if position == "bench" and len(player.bench) >= self.config.bench_limit:
            basics: list[str] = []
        else:
            basics = _unique_in_order(
                cid for cid in player.hand if self.pool.card(cid).is_basic_pokemon
            )
        for cid in basics:
            actions.append(
                ActionRequest(
                    "play_pokemon",
                    {"source_card": self.pool.card(cid).name, "position": position},
                )
            )
        if player.active is not None:
            actions.append(ActionRequest("pass_turn", {}))
        return actions

    def _main_actions(self, state: GameState) -> list[ActionRequest]:
        seat = state.active_player
        player = state.players[seat]
        pool = self.pool
        actions: list[ActionRequest] = [ActionRequest("pass_turn", {})]
        active = player.active
        in_play = player.in_play()
        hand_unique = _unique_in_order(player.hand)
        first_turn_for_first_player = (
            state.turn_number == 1 and seat == state.first_player
        )

        blocked = active is not None and (
            Condition.ASLEEP in active.conditions or Condition.PARALYZED in active.conditions
        )
        if active is not None and not blocked and not first_turn_for_first_player:
            top = pool.card(active.top)
            for attack in top.attacks:
                if self._cost_payable(active, attack.cost):
                    actions.append(
                        ActionRequest(
                            "attack", {"source_card": top.name, "attack_name": attack.name}
                        )
                    )

        bench_space = len(player.bench) < self.config.bench_limit
        for cid in hand_unique:
            card = pool.card(cid)
            if card.kind is CardKind.POKEMON:
                if card.stage is Stage.BASIC:
                    if bench_space:
                        actions.append(
                            ActionRequest(
                                "play_pokemon", {"source_card": card.name, "position": "bench"}
                            )
                        )
                elif state.turn_number >= 3:
                    for pip in in_play:
                        target = pool.card(pip.top)
                        if (
                            target.card_id == card.evolves_from
                            and pip.entered_turn < state.turn_number
                            and not pip.evolved_this_turn
                        ):
                            actions.append(
                                ActionRequest(
                                    "evolve_pokemon",
                                    {
                                        "source_card": card.name,
                                        "target_card": target.name,
                                        "target_index": pip.field_index,
                                    },
                                )
                            )
            elif card.kind is CardKind.ENERGY:
                if not player.flags.energy_attached:
                    for pip in in_play:
                        actions.append(
                            ActionRequest(
                                "attach_energy",
                                {
                                    "source_card": card.name,
                                    "target_card": pool.card(pip.top).name,
                                    "target_index": pip.field_index,
                                },
                            )
                        )
            else:
                tt = card.trainer_type
                if tt is TrainerType.SUPPORTER:
                    if not player.flags.supporter_played and not first_turn_for_first_player:
                        actions.append(ActionRequest("use_supporter", {"source_card": card.name}))
                elif tt is TrainerType.ITEM:
                    actions.append(ActionRequest("use_item", {"source_card": card.name}))
                elif tt is TrainerType.TOOL:
                    for pip in in_play:
                        if pip.tool is None:
                            actions.append(
                                ActionRequest(
                                    "use_tool",
                                    {
                                        "source_card": card.name,
                                        "target_card": pool.card(pip.top).name,
                                        "target_index": pip.field_index,
                                    },
                                )
                            )
                elif tt is TrainerType.STADIUM:
                    if not player.flags.stadium_played and (
                        state.stadium is None or pool.card(state.stadium).name != card.name
                    ):
                        actions.append(ActionRequest("put_stadium", {"source_card": card.name}))

        if state.stadium is not None:
            stadium_card = pool.card(state.stadium)
            if not player.flags.stadium_used:
                actions.append(ActionRequest("use_stadium", {"source_card": stadium_card.name}))
            if state.stadium_owner == seat:
                actions.append(ActionRequest("discard_stadium", {"source_card": stadium_card.name}))

        for pip in in_play:
            card = pool.card(pip.top)
            if card.ability is not None and not pip.ability_used:
                actions.append(
                    ActionRequest(
                        "use_ability",
                        {
                            "source_card": card.name,
                            "ability_name": card.ability.name,
                            "target_index": pip.field_index,
                        },
                    )
                )

        if (
            active is not None
            and not player.flags.retreated
            and player.bench
            and not blocked
            and self._energy_units(active) >= pool.card(active.top).retreat_cost
        ):
            actions.append(ActionRequest("retreat", {"source_card": pool.card(active.top).name}))
        return actions

    # --- choice selections --------------------------------------------------------

    def _selections_for(self, state: GameState, pending: PendingChoice) -> list[tuple[str, ...]]:
        prompt = pending.prompt
        if pending.kind == "retreat_pay":
            return self._retreat_covers(state, pending)
        out: set[tuple[str, ...]] = set()
        candidates = sorted(prompt.candidates)
        for n in range(prompt.min_count, prompt.max_count + 1):
            for combo in itertools.combinations(candidates, n):
                out.add(combo)
        return sorted(out)

    def _retreat_covers(self, state: GameState, pending: PendingChoice) -> list[tuple[str, ...]]:
        """Minimal multisets of attached energy cards covering the retreat cost."""
        cost = pending.data["cost"]
        names = sorted(pending.prompt.candidates)
        units = {name: len(self.pool.by_name[name].types) for name in set(names)}
        covers: set[tuple[str, ...]] = set()
        for n in range(1, len(names) + 1):
            for combo in set(itertools.combinations(names, n)):
                total = sum(units[name] for name in combo)
                if total < cost:
                    continue
                # minimal: dropping any single card falls below the cost
                if all(total - units[name] < cost for name in set(combo)):
                    covers.add(combo)
        return sorted(covers)

    # --- validation + application ---------------------------------------------------

    def apply_action(self, state: GameState, action: ActionRequest) -> list[dict]:
        """Validate and execute one action; returns the emitted events.

        Raises IllegalAction (state unchanged) when the action is not in
        the legal set.  Query tools are not actions; use answer_query.
        """
        canonical = self._canonicalize(state, action)
        if canonical.key() not in self._legal_keys(state):
            raise IllegalAction(self._rejection_reason(state, canonical))
        state._mut = getattr(state, "_mut", 0) + 1
        ev: list[dict] = []
        seat = state.decider()
        self._log(state, {"turn": state.turn_number, "actor": seat, "kind": "action", "payload": canonical.to_payload()})
        handler = getattr(self, f"_do_{canonical.tool}")
        handler(state, seat, canonical, ev)
        self._advance(state, ev)
        self._commit_events(state, ev)
        return ev

    def _canonicalize(self, state: GameState, action: ActionRequest) -> ActionRequest:
        if not isinstance(action, ActionRequest):
            raise IllegalAction("action must be an ActionRequest")
        tool = action.tool
        if tool in QUERY_TOOLS:
            raise IllegalAction(f"{tool} is a query tool, not a game action")
        if tool not in _ARG_SPECS:
            raise IllegalAction(f"unknown tool: {tool!r}")
        required, optional = _ARG_SPECS[tool]
        args = action.arguments
        if not isinstance(args, dict):
            raise IllegalAction("arguments must be a mapping")
        missing = required - set(args)
        if missing:
            raise IllegalAction(f"missing argument: {sorted(missing)[0]!r}")
        extra = set(args) - required - optional
        if extra:
            raise IllegalAction(f"unexpected argument: {sorted(extra)[0]!r}")
        for k, v in args.items():
            if k == "chosen_cards":
                continue
            if not isinstance(v, (str, int)) or isinstance(v, bool):
                raise IllegalAction(f"argument {k!r} must be a string or integer")

        if tool == "choose_card":
            chosen = args["chosen_cards"]
            if not isinstance(chosen, list) or not all(isinstance(c, str) for c in chosen):
                raise IllegalAction("chosen_cards must be a list of tokens")
            return ActionRequest(tool, {"chosen_cards": sorted(chosen)})
        if tool == "pass_turn":
            return ActionRequest(tool, {})

        seat = state.decider()
        player = state.players[seat]
        out = dict(args)
        if "source_card" in args and self.pool.resolve_name(str(args["source_card"])) is None:
            raise IllegalAction(f"unknown card reference: {args['source_card']!r}")
        if tool in ("evolve_pokemon", "attach_energy", "use_tool"):
            out["target_index"] = self._resolve_board_index(
                player, str(args["target_card"]), args.get("target_index")
            )
        if tool == "use_ability":
            name = str(args["source_card"])
            idx = self._resolve_board_index(player, name, args.get("target_index"))
            out["target_index"] = idx
            card = self.pool.resolve_name(name)
            if card.ability is not None:
                declared = args.get("ability_name", card.ability.name)
                if declared != card.ability.name:
                    raise IllegalAction(f"unknown ability: {declared!r}")
                out["ability_name"] = card.ability.name
        return ActionRequest(tool, out)

    def _resolve_board_index(self, player: PlayerState, name: str, index) -> int:
        matches = [
            pip
            for pip in player.in_play()
            if self.pool.card(pip.top).name == name
        ]
        if not matches:
            raise IllegalAction(f"unknown card reference: no {name!r} in play")
        if index is not None:
            if not isinstance(index, int):
                raise IllegalAction("target_index must be an integer")
            for pip in matches:
                if pip.field_index == index:
                    return index
            raise IllegalAction(f"unknown card reference: {name!r} with index {index}")
        if len(matches) > 1:
            raise IllegalAction(f"ambiguous reference: multiple {name!r} in play, pass target_index")
        return matches[0].field_index

    def _rejection_reason(self, state: GameState, action: ActionRequest) -> str:
        """Name the violated rule for a structurally valid but illegal action."""
        seat = state.decider()
        player = state.players[seat]
        tool = action.tool
        if state.phase is Phase.FINISHED:
            return "game is finished"
        if state.choice_queue:
            if tool != "choose_card":
                return "a card choice is pending; only choose_card is legal"
            return "chosen_cards is not a valid selection for the pending choice"
        if tool == "choose_card":
            return "no card choice is pending"
        if state.phase is Phase.SETUP:
            return "only basic pokemon placement is allowed during setup"
        first_turn_first = state.turn_number == 1 and seat == state.first_player
        if tool == "attack":
            if first_turn_first:
                return "the first player cannot attack on turn 1"
            active = player.active
            if active is not None and (
                Condition.ASLEEP in active.conditions or Condition.PARALYZED in active.conditions
            ):
                return "active is asleep or paralyzed"
            return "attack unavailable (wrong attacker, unknown attack, or unpaid cost)"
        if tool == "attach_energy" and player.flags.energy_attached:
            return "energy already attached this turn"
        if tool == "use_supporter":
            if first_turn_first:
                return "the first player cannot play a supporter on turn 1"
            if player.flags.supporter_played:
                return "supporter already played this turn"
        if tool == "put_stadium" and player.flags.stadium_played:
            return "stadium already played this turn"
        if tool == "use_stadium" and player.flags.stadium_used:
            return "stadium already used this turn"
        if tool == "retreat":
            if player.flags.retreated:
                return "already retreated this turn"
            return "retreat unavailable (cost unpayable, empty bench, or condition)"
        if tool == "evolve_pokemon":
            if state.turn_number < 3:
                return "no evolution on either player's first turn"
            return "evolution target invalid (entry turn, already evolved, or wrong line)"
        return f"{tool} is not legal in this state"

    # --- executors -------------------------------------------------------------------

    def _do_pass_turn(self, state: GameState, seat: int, action: ActionRequest, ev: list[dict]) -> None:
        if state.phase is Phase.SETUP:
            state.players[seat].setup_done = True
            self._summary(state, seat, "finished setup")
            return
        self._summary(state, seat, "passed")
        state.turn_ending = True

    def _do_play_pokemon(self, state: GameState, seat: int, action: ActionRequest, ev: list[dict]) -> None:
        player = state.players[seat]
        card = self.pool.resolve_name(action.arguments["source_card"])
        player.hand.remove(card.card_id)
        pip = PokemonInPlay(
            stack=[card.card_id],
            field_index=player.next_field_index,
            entered_turn=state.turn_number,
        )
        player.next_field_index += 1
        if action.arguments["position"] == "active":
            player.active = pip
            self._summary(state, seat, f"played {card.name} as active")
        else:
            player.bench.append(pip)
            self._summary(state, seat, f"played {card.name} to bench")
        self._event(state, ev, {"event": "pokemon_played", "player": seat, "card": card.name, "field_index": pip.field_index})

    def _do_evolve_pokemon(self, state: GameState, seat: int, action: ActionRequest, ev: list[dict]) -> None:
        player = state.players[seat]
        card = self.pool.resolve_name(action.arguments["source_card"])
        pip = self._pip_by_index(player, action.arguments["target_index"])
        old_name = self.pool.card(pip.top).name
        player.hand.remove(card.card_id)
        pip.stack.append(card.card_id)
        pip.evolved_this_turn = True
        pip.ability_used = False
        # Evolving cures special conditions.
        pip.conditions.clear()
        self._summary(state, seat, f"evolved {old_name}#{pip.field_index} into {card.name}")
        self._event(state, ev, {"event": "evolved", "player": seat, "from": old_name, "into": card.name, "field_index": pip.field_index})

    def _do_attach_energy(self, state: GameState, seat: int, action: ActionRequest, ev: list[dict]) -> None:
        player = state.players[seat]
        card = self.pool.resolve_name(action.arguments["source_card"])
        pip = self._pip_by_index(player, action.arguments["target_index"])
        player.hand.remove(card.card_id)
        pip.energy.append(card.card_id)
        player.flags.energy_attached = True
        target_name = self.pool.card(pip.top).name
        self._summary(state, seat, f"attached {card.name} to {target_name}#{pip.field_index}")
        self._event(state, ev, {"event": "energy_attached", "player": seat, "card": card.name, "target": target_name, "field_index": pip.field_index})

    def _do_use_supporter(self, state: GameState, seat: int, action: ActionRequest, ev: list[dict]) -> None:
        player = state.players[seat]
        card = self.pool.resolve_name(action.arguments["source_card"])
        player.hand.remove(card.card_id)
        player.discard.append(card.card_id)
        player.flags.supporter_played = True
        self._summary(state, seat, f"played supporter {card.name}")
        self._event(state, ev, {"event": "trainer_played", "player": seat, "card": card.name})
        self._run_program(state, card.card_id, "effect", 0, seat, ("trainer",), {}, ev)

    def _do_use_item(self, state: GameState, seat: int, action: ActionRequest, ev: list[dict]) -> None:
        player = state.players[seat]
        card = self.pool.resolve_name(action.arguments["source_card"])
        player.hand.remove(card.card_id)
        player.discard.append(card.card_id)
        self._summary(state, seat, f"played item {card.name}")
        self._event(state, ev, {"event": "trainer_played", "player": seat, "card": card.name})
        self._run_program(state, card.card_id, "effect", 0, seat, ("trainer",), {}, ev)

    def _do_use_tool(self, state: GameState, seat: int, action: ActionRequest, ev: list[dict]) -> None:
        player = state.players[seat]
        card = self.pool.resolve_name(action.arguments["source_card"])
        pip = self._pip_by_index(player, action.arguments["target_index"])
        player.hand.remove(card.card_id)
        pip.tool = card.card_id
        target_name = self.pool.card(pip.top).name
        self._summary(state, seat, f"attached tool {card.name} to {target_name}#{pip.field_index}")
        self._event(state, ev, {"event": "tool_attached", "player": seat, "card": card.name, "target": target_name, "field_index": pip.field_index})

    def _do_put_stadium(self, state: GameState, seat: int, action: ActionRequest, ev: list[dict]) -> None:
        player = state.players[seat]
        card = self.pool.resolve_name(action.arguments["source_card"])
        self._discard_stadium_in_play(state, ev)
        player.hand.remove(card.card_id)
        state.stadium = card.card_id
        state.stadium_owner = seat
        player.flags.stadium_played = True
        self._summary(state, seat, f"played stadium {card.name}")
        self._event(state, ev, {"event": "stadium_played", "player": seat, "card": card.name})

    def _do_discard_stadium(self, state: GameState, seat: int, action: ActionRequest, ev: list[dict]) -> None:
        name = self.pool.card(state.stadium).name
        self._discard_stadium_in_play(state, ev)
        self._summary(state, seat, f"discarded stadium {name}")

    def _do_use_stadium(self, state: GameState, seat: int, action: ActionRequest, ev: list[dict]) -> None:
        player = state.players[seat]
        card = self.pool.card(state.stadium)
        player.flags.stadium_used = True
        self._summary(state, seat, f"used stadium {card.name}")
        self._event(state, ev, {"event": "stadium_used", "player": seat, "card": card.name})
        self._run_program(state, card.card_id, "effect", 0, seat, ("stadium",), {}, ev)

    def _do_use_ability(self, state: GameState, seat: int, action: ActionRequest, ev: list[dict]) -> None:
        player = state.players[seat]
        pip = self._pip_by_index(player, action.arguments["target_index"])
        card = self.pool.card(pip.top)
        pip.ability_used = True
        self._summary(state, seat, f"used ability {card.ability.name} of {card.name}#{pip.field_index}")
        self._event(state, ev, {"event": "ability_used", "player": seat, "card": card.name, "ability": card.ability.name})
        self._run_program(
            state, card.card_id, "ability", 0, seat, ("board", seat, pip.field_index), {}, ev
        )

    def _do_retreat(self, state: GameState, seat: int, action: ActionRequest, ev: list[dict]) -> None:
        player = state.players[seat]
        player.flags.retreated = True
        cost = self.pool.card(player.active.top).retreat_cost
        if cost > 0:
            candidates = [self.pool.card(cid).name for cid in player.active.energy]
            self._push_choice(
                state,
                ev,
                PendingChoice(
                    prompt=ChoicePrompt(
                        chooser=seat,
                        candidates=candidates,
                        min_count=1,
                        max_count=len(candidates),
                        reason="retreat-cost",
                    ),
                    kind="retreat_pay",
                    data={"cost": cost},
                ),
            )
        else:
            self._push_bench_switch(state, seat, "retreat_switch", ev)

    def _do_attack(self, state: GameState, seat: int, action: ActionRequest, ev: list[dict]) -> None:
        player = state.players[seat]
        opp = state.players[1 - seat]
        attacker = player.active
        card = self.pool.card(attacker.top)
        attack = next(a for a in card.attacks if a.name == action.arguments["attack_name"])
        state.turn_ending = True
        state.ko_sweep = True
        self._summary(state, seat, f"attacked with {attack.name}")

        if Condition.CONFUSED in attacker.conditions:
            heads = self._flip(state, ev)
            if not heads:
                attacker.damage += 3
                self._event(state, ev, {"event": "confusion_fumble", "player": seat, "self_damage": 30})
                self._summary(state, seat, "confusion fumble: 30 damage to own active")
                return

        total = self._attack_damage(state, seat, attacker, opp.active, attack)
        if total > 0:
            opp.active.damage += total // 10
            self._event(
                state,
                ev,
                {"event": "attack_damage", "player": seat, "attack": attack.name, "damage": total},
            )
        if attack.effect:
            self._run_program(
                state,
                card.card_id,
                f"attack:{attack.name}",
                0,
                seat,
                ("board", seat, attacker.field_index),
                {},
                ev,
            )

    def _do_choose_card(self, state: GameState, seat: int, action: ActionRequest, ev: list[dict]) -> None:
        self._resolve_choice(state, action.arguments["chosen_cards"], ev)

    # --- damage ------------------------------------------------------------------

    def _attack_damage(
        self,
        state: GameState,
        seat: int,
        attacker: PokemonInPlay,
        defender: PokemonInPlay,
        attack,
    ) -> int:
        """Main attack damage: base, scaling ops, modifiers, then weakness."""
        base = attack.damage
        scaling = 0
        for op in attack.effect:
            if op.kind == "damage_per":
                scaling += op.args["unit"] * self._counter_value(state, seat, attacker, defender, op.args["counter"])
        if base + scaling <= 0:
            return 0
        dealt = base + scaling
        dealt += self._static_mod(attacker, "dealt")
        dealt += sum(
            m.delta for m in attacker.modifiers if m.mode == "dealt" and state.turn_number <= m.until_turn
        )
        if dealt < 0:
            dealt = 0
        defender_card = self.pool.card(defender.top)
        attacker_card = self.pool.card(attacker.top)
        if defender_card.weakness is not None and defender_card.weakness in attacker_card.types:
            dealt *= 2
        dealt += self._static_mod(defender, "taken")
        dealt += sum(
            m.delta for m in defender.modifiers if m.mode == "taken" and state.turn_number <= m.until_turn
        )
        return max(dealt, 0)

    def _static_mod(self, pip: PokemonInPlay, mode: str) -> int:
        if pip.tool is None:
            return 0
        return self.pool.card(pip.tool).static.get(mode, 0)

    def _counter_value(
        self,
        state: GameState,
        seat: int,
        source: Optional[PokemonInPlay],
        defender: Optional[PokemonInPlay],
        counter: str,
    ) -> int:
        player = state.players[seat]
        opp = state.players[1 - seat]
        if counter == "own_bench_count":
            return len(player.bench)
        if counter == "opp_bench_count":
            return len(opp.bench)
        if counter == "energy_on_self":
            return self._energy_units(source) if source else 0
        if counter == "energy_on_defender":
            return self._energy_units(defender) if defender else 0
        if counter == "damage_on_self":
            return source.damage if source else 0
        if counter == "opp_prizes_taken":
            return opp.prizes_taken()
        if counter == "own_discard_energy":
            return sum(1 for cid in player.discard if self.pool.card(cid).kind is CardKind.ENERGY)
        raise ValueError(f"unknown counter: {counter!r}")

    def _energy_units(self, pip: PokemonInPlay) -> int:
        return sum(len(self.pool.card(cid).types) for cid in pip.energy)

    def _cost_payable(self, pip: PokemonInPlay, cost: tuple[EnergyType, ...]) -> bool:
        if not cost:
            return True
        units = Counter()
        total = 0
        for cid in pip.energy:
            for t in self.pool.card(cid).types:
                units[t] += 1
                total += 1
        colorless_need = 0
        for t in cost:
            if t is EnergyType.COLORLESS:
                colorless_need += 1
        typed = Counter(t for t in cost if t is not EnergyType.COLORLESS)
        for t, need in typed.items():
            if units[t] < need:
                return False
        return total - sum(typed.values()) >= colorless_need

    # --- effect interpreter ---------------------------------------------------------

    def _program(self, card_id: str, slot: str) -> tuple:
        card = self.pool.card(card_id)
        if slot == "effect":
            return card.effect
        if slot == "ability":
            return card.ability.effect
        if slot.startswith("attack:"):
            name = slot.split(":", 1)[1]
            for attack in card.attacks:
                if attack.name == name:
                    return attack.effect
        raise ValueError(f"no program {slot!r} on card {card_id!r}")

    def _run_program(
        self,
        state: GameState,
        card_id: str,
        slot: str,
        pc: int,
        controller: int,
        source: tuple,
        data: dict,
        ev: list[dict],
    ) -> None:
        prog = self._program(card_id, slot)
        while pc < len(prog):
            op = prog[pc]
            result = self._exec_op(state, op, card_id, slot, pc, controller, source, data, ev)
            if result is _SUSPENDED:
                return
            if result is _BREAK:
                return
            if isinstance(result, int):
                pc = result
            else:
                pc += 1
            data = {}

    def _source_pip(self, state: GameState, source: tuple) -> Optional[PokemonInPlay]:
        if source[0] == "board":
            player = state.players[source[1]]
            for pip in player.in_play():
                if pip.field_index == source[2]:
                    return pip
            return None
        return None

    def _exec_op(
        self,
        state: GameState,
        op,
        card_id: str,
        slot: str,
        pc: int,
        c: int,
        source: tuple,
        data: dict,
        ev: list[dict],
    ):
        kind = op.kind
        player = state.players[c]
        opp = state.players[1 - c]

        if kind == "draw":
            n = self._draw(state, c, op.args["n"], ev)
            if n:
                self._summary(state, c, f"drew {n} card{'s' if n != 1 else ''}")
            return None

        if kind == "draw_to":
            n = 0
            while len(player.hand) < op.args["n"] and player.deck:
                player.hand.append(player.deck.pop())
                n += 1
            if n:
                self._event(state, ev, {"event": "draw", "player": c, "count": n})
                self._summary(state, c, f"drew {n} card{'s' if n != 1 else ''}")
            return None

        if kind == "jump":
            return op.args["pc"]

        if kind == "flip":
            heads = self._flip(state, ev)
            return None if heads else op.args["tails_pc"]

        if kind == "end":
            return _BREAK

        if kind == "shuffle":
            state.rng.shuffle(player.deck)
            self._event(state, ev, {"event": "shuffle", "player": c})
            return None

        if kind == "damage_per":
            # Scaling ops fold into the main attack damage; no-op here.
            return None

        if kind == "damage":
            return self._op_with_board_target(
                state, op, c, source, data, ev,
                reason="effect-damage-target",
                apply=lambda pip, side: self._effect_damage(state, ev, side, pip, op.args["n"]),
                card_id=card_id, slot=slot, pc=pc,
            )

        if kind == "heal":
            return self._op_with_board_target(
                state, op, c, source, data, ev,
                reason="heal-target",
                apply=lambda pip, side: self._heal(state, ev, side, pip, op.args["n"]),
                card_id=card_id, slot=slot, pc=pc,
            )

        if kind == "condition":
            cond = Condition(op.args["condition"])
            return self._op_with_board_target(
                state, op, c, source, data, ev,
                reason="condition-target",
                apply=lambda pip, side: self._apply_condition(state, ev, side, pip, cond),
                card_id=card_id, slot=slot, pc=pc,
            )

        if kind == "modify_damage":
            until = state.turn_number + (1 if op.args["duration"] == "next_turn" else 0)

            def apply_mod(pip, side, _until=until):
                pip.modifiers.append(Modifier(op.args["mode"], op.args["delta"], _until))
                self._event(state, ev, {
                    "event": "damage_modifier", "player": side, "mode": op.args["mode"],
                    "delta": op.args["delta"], "until_turn": _until,
                })

            return self._op_with_board_target(
                state, op, c, source, data, ev,
                reason="modifier-target", apply=apply_mod,
                card_id=card_id, slot=slot, pc=pc,
            )

        if kind == "switch_active":
            side = c if op.args["side"] == "self" else 1 - c
            target_player = state.players[side]
            if not target_player.bench or target_player.active is None:
                return None
            picked = data.get("picked")
            if picked is None:
                tokens = [
                    f"{self.pool.card(p.top).name}#{p.field_index}" for p in target_player.bench
                ]
                return self._suspend_effect(
                    state, card_id, slot, pc, c, source, ev,
                    candidates=tokens, min_count=1, max_count=1,
                    reason="switch-target", extra={"side": side},
                )
            pip = self._pip_by_token(target_player, picked[0])
            self._switch_active(state, side, pip, ev)
            return None

        if kind == "discard":
            zone = op.args["zone"]
            if zone == "hand":
                if op.args["mode"] == "all":
                    n = len(player.hand)
                    player.discard.extend(player.hand)
                    player.hand.clear()
                    if n:
                        self._event(state, ev, {"event": "hand_discarded", "player": c, "count": n})
                        self._summary(state, c, f"discarded hand ({n} cards)")
                    return None
                return self._op_zone_choice(
                    state, op, card_id, slot, pc, c, source, data, ev,
                    zone="hand", verb="to_discard", reason="discard-from-hand",
                )
            # self_energy
            pip = self._source_pip(state, source) or player.active
            if pip is None or not pip.energy:
                return None
            picked = data.get("picked")
            filt = op.args["_filter"]
            matching = [cid for cid in pip.energy if filt.matches(self.pool.card(cid))]
            if not matching:
                return None
            if picked is None:
                lo = min(op.args["min"], len(matching))
                hi = min(op.args["max"], len(matching))
                return self._suspend_effect(
                    state, card_id, slot, pc, c, source, ev,
                    candidates=[self.pool.card(cid).name for cid in matching],
                    min_count=lo, max_count=hi, reason="discard-attached-energy",
                )
            for name in picked:
                cid = next(x for x in pip.energy if self.pool.card(x).name == name)
                pip.energy.remove(cid)
                player.discard.append(cid)
            if picked:
                self._event(state, ev, {"event": "energy_discarded", "player": c, "cards": sorted(picked)})
                self._summary(state, c, f"discarded {len(picked)} attached energy")
            return None

        if kind == "require_choice":
            return self._op_zone_choice(
                state, op, card_id, slot, pc, c, source, data, ev,
                zone=op.args["zone"], verb=op.args["verb"], reason="required-choice",
            )

        if kind == "move":
            src_zone, dest = op.args["src"], op.args["dest"]
            mode = op.args["mode"]
            src = getattr(player, src_zone)
            if mode == "all":
                moved = list(src)
                src.clear()
                self._deliver_cards(state, c, moved, dest, ev, hidden_source=src_zone == "deck")
                return None
            if mode == "first":
                n = min(op.args["n"], len(src))
                moved = [src.pop() for _ in range(n)] if src_zone == "deck" else src[:n]
                if src_zone != "deck":
                    del src[:n]
                self._deliver_cards(state, c, moved, dest, ev, hidden_source=src_zone == "deck")
                return None
            return self._op_zone_choice(
                state, op, card_id, slot, pc, c, source, data, ev,
                zone=src_zone, verb=f"to_{dest}", reason="move-cards",
            )

        if kind == "search":
            zone_name = op.args["zone"]
            zone = getattr(player, zone_name)
            filt = op.args["_filter"]
            dest = op.args["dest"]
            matching = [cid for cid in zone if filt.matches(self.pool.card(cid))]
            if dest == "bench":
                matching = [cid for cid in matching if self.pool.card(cid).is_basic_pokemon]
                space = self.config.bench_limit - len(player.bench)
            else:
                space = len(matching)
            hi = min(op.args["count"], len(matching), space)
            if hi <= 0:
                return None
            picked = data.get("picked")
            if picked is None:
                return self._suspend_effect(
                    state, card_id, slot, pc, c, source, ev,
                    candidates=[self.pool.card(cid).name for cid in matching],
                    min_count=0, max_count=hi,
                    reason=f"search-{zone_name}", extra={"reveal": op.args["reveal"]},
                )
            ids = self._take_named(zone, picked)
            self._deliver_cards(
                state, c, ids, dest, ev,
                hidden_source=True, reveal=op.args["reveal"],
            )
            return None

        if kind == "attach_from":
            zone_name = op.args["zone"]
            zone = getattr(player, zone_name)
            filt = op.args["_filter"]
            matching = [
                cid
                for cid in zone
                if self.pool.card(cid).kind is CardKind.ENERGY and filt.matches(self.pool.card(cid))
            ]
            if not matching:
                return None
            targets = self._target_set(state, op.args["target"], c, source)
            if not targets:
                return None
            picked_card = data.get("picked_card")
            if isinstance(picked_card, list):
                picked_card = picked_card[0]
            if picked_card is None:
                names = sorted({self.pool.card(cid).name for cid in matching})
                if len(names) == 1:
                    picked_card = names[0]
                else:
                    return self._suspend_effect(
                        state, card_id, slot, pc, c, source, ev,
                        candidates=names, min_count=1, max_count=1,
                        reason="attach-pick-card", stage_key="picked_card",
                    )
            picked_target = data.get("picked")
            if picked_target is None and len(targets) > 1:
                tokens = [
                    f"{self.pool.card(p.top).name}#{p.field_index}" for _, p in targets
                ]
                return self._suspend_effect(
                    state, card_id, slot, pc, c, source, ev,
                    candidates=tokens, min_count=1, max_count=1,
                    reason="attach-pick-target", extra={"picked_card": picked_card},
                )
            if picked_target is not None:
                side, pip = next(
                    (s, p) for s, p in targets
                    if f"{self.pool.card(p.top).name}#{p.field_index}" == picked_target[0]
                )
            else:
                side, pip = targets[0]
            cid = next(x for x in zone if self.pool.card(x).name == picked_card)
            zone.remove(cid)
            pip.energy.append(cid)
            tname = self.pool.card(pip.top).name
            self._event(state, ev, {
                "event": "energy_attached_effect", "player": c, "card": picked_card,
                "target": tname, "field_index": pip.field_index, "from": zone_name,
            })
            self._summary(state, c, f"attached {picked_card} from {zone_name} to {tname}#{pip.field_index}")
            if zone_name == "deck":
                state.rng.shuffle(player.deck)
            return None

        raise ValueError(f"unknown op kind: {kind!r}")

    # Helper for ops whose target selector may need a board choice.
    def _op_with_board_target(
        self, state, op, c, source, data, ev, reason, apply, card_id, slot, pc
    ):
        targets = self._target_set(state, op.args["target"], c, source)
        if not targets:
            return None
        picked = data.get("picked")
        if picked is None and len(targets) > 1:
            tokens = [f"{self.pool.card(p.top).name}#{p.field_index}" for _, p in targets]
            return self._suspend_effect(
                state, card_id, slot, pc, c, source, ev,
                candidates=tokens, min_count=1, max_count=1, reason=reason,
            )
        if picked is not None:
            side, pip = next(
                (s, p) for s, p in targets
                if f"{self.pool.card(p.top).name}#{p.field_index}" == picked[0]
            )
        else:
            side, pip = targets[0]
        apply(pip, side)
        return None

    def _op_zone_choice(
        self, state, op, card_id, slot, pc, c, source, data, ev, zone, verb, reason
    ):
        """Shared body for choose-from-zone ops (move/discard/require_choice)."""
        player = state.players[c]
        src = getattr(player, zone)
        filt = op.args.get("_filter")
        matching = [cid for cid in src if filt is None or filt.matches(self.pool.card(cid))]
        lo = min(op.args["min"], len(matching))
        hi = min(op.args["max"], len(matching))
        if hi == 0:
            return None
        picked = data.get("picked")
        if picked is None:
            return self._suspend_effect(
                state, card_id, slot, pc, c, source, ev,
                candidates=[self.pool.card(cid).name for cid in matching],
                min_count=lo, max_count=hi, reason=reason, extra={"verb": verb},
            )
        ids = self._take_named(src, picked)
        dest = verb.removeprefix("to_")
        self._deliver_cards(state, c, ids, dest, ev, hidden_source=zone == "deck")
        return None

    def _take_named(self, zone: list[str], names: list[str]) -> list[str]:
        ids = []
        for name in names:
            cid = next(x for x in zone if self.pool.card(x).name == name)
            zone.remove(cid)
            ids.append(cid)
        return ids

    def _deliver_cards(
        self,
        state: GameState,
        seat: int,
        ids: list[str],
        dest: str,
        ev: list[dict],
        hidden_source: bool = False,
        reveal: bool = False,
    ) -> None:
        if not ids:
            return
        player = state.players[seat]
        names = sorted(self.pool.card(cid).name for cid in ids)
        if dest == "hand":
            player.hand.extend(ids)
            if reveal or not hidden_source:
                shown = ", ".join(names)
                self._summary(state, seat, f"put {shown} into hand")
            else:
                self._summary(state, seat, f"put {len(ids)} card{'s' if len(ids) != 1 else ''} into hand (hidden)")
        elif dest == "discard":
            player.discard.extend(ids)
            self._summary(state, seat, f"discarded {', '.join(names)}")
        elif dest == "deck":
            player.deck.extend(ids)
            self._summary(state, seat, f"returned {len(ids)} card{'s' if len(ids) != 1 else ''} to deck")
        elif dest == "bench":
            for cid in ids:
                pip = PokemonInPlay(
                    stack=[cid],
                    field_index=player.next_field_index,
                    entered_turn=state.turn_number,
                )
                player.next_field_index += 1
                player.bench.append(pip)
                self._summary(state, seat, f"put {self.pool.card(cid).name} onto bench")
        self._event(state, ev, {
            "event": "cards_moved", "player": seat, "count": len(ids), "dest": dest,
            "cards": names if (reveal or dest in ("discard", "bench")) else None,
        })

    def _target_set(self, state: GameState, target: str, c: int, source: tuple):
        """Resolve a target selector to [(side, pip)] in stable order."""
        player = state.players[c]
        opp = state.players[1 - c]
        if target == "self":
            pip = self._source_pip(state, source) or player.active
            return [(c, pip)] if pip is not None else []
        if target == "defender":
            return [(1 - c, opp.active)] if opp.active is not None else []
        if target == "own_active":
            return [(c, player.active)] if player.active is not None else []
        if target == "opp_active":
            return [(1 - c, opp.active)] if opp.active is not None else []
        if target == "own_bench":
            return [(c, p) for p in player.bench]
        if target == "opp_bench":
            return [(1 - c, p) for p in opp.bench]
        if target == "own_any":
            return [(c, p) for p in player.in_play()]
        if target == "opp_any":
            return [(1 - c, p) for p in opp.in_play()]
        raise ValueError(f"unknown target selector: {target!r}")

    def _suspend_effect(
        self,
        state: GameState,
        card_id: str,
        slot: str,
        pc: int,
        c: int,
        source: tuple,
        ev: list[dict],
        candidates: list[str],
        min_count: int,
        max_count: int,
        reason: str,
        extra: Optional[dict] = None,
        stage_key: str = "picked",
    ):
        data = {
            "card": card_id,
            "slot": slot,
            "pc": pc,
            "controller": c,
            "source": list(source),
            "stage_key": stage_key,
        }
        if extra:
            data.update(extra)
        self._push_choice(
            state,
            ev,
            PendingChoice(
                prompt=ChoicePrompt(
                    chooser=c,
                    candidates=sorted(candidates),
                    min_count=min_count,
                    max_count=max_count,
                    reason=reason,
                ),
                kind="effect",
                data=data,
            ),
        )
        return _SUSPENDED

    # --- choices -----------------------------------------------------------------

    def _push_choice(self, state: GameState, ev: list[dict], pending: PendingChoice) -> None:
        """Queue a prompt; selections with a single legal answer resolve inline."""
        state.choice_queue.append(pending)
        sels = self._selections_for(state, pending)
        if not sels:
            state.choice_queue.remove(pending)
            return
        if len(sels) == 1:
            # Deterministic: resolve without surfacing a prompt.
            state.choice_queue.remove(pending)
            self._apply_selection(state, pending, list(sels[0]), ev)

    def _resolve_choice(self, state: GameState, chosen: list[str], ev: list[dict]) -> None:
        pending = state.choice_queue.pop(0)
        self._apply_selection(state, pending, chosen, ev)

    def _apply_selection(
        self, state: GameState, pending: PendingChoice, chosen: list[str], ev: list[dict]
    ) -> None:
        kind = pending.kind
        if kind == "effect":
            data = dict(pending.data)
            stage_key = data.pop("stage_key", "picked")
            card_id = data.pop("card")
            slot = data.pop("slot")
            pc = data.pop("pc")
            c = data.pop("controller")
            source = tuple(data.pop("source"))
            data[stage_key] = chosen
            self._run_program(state, card_id, slot, pc, c, source, data, ev)
            return
        if kind == "prize":
            taker = pending.data["taker"]
            player = state.players[taker]
            indices = sorted((int(tok.split("-")[1]) - 1 for tok in chosen), reverse=True)
            for i in indices:
                player.hand.append(player.prizes.pop(i))
            self._event(state, ev, {"event": "prizes_taken", "player": taker, "count": len(chosen)})
            self._summary(state, taker, f"took {len(chosen)} prize{'s' if len(chosen) != 1 else ''}")
            if not player.prizes:
                self._finish(state, ev, taker, WinReason.ALL_PRIZES)
            return
        if kind == "promote":
            side = pending.data["side"]
            player = state.players[side]
            pip = self._pip_by_token(player, chosen[0])
            player.bench.remove(pip)
            player.active = pip
            name = self.pool.card(pip.top).name
            self._event(state, ev, {"event": "promoted", "player": side, "card": name, "field_index": pip.field_index})
            self._summary(state, side, f"promoted {name}#{pip.field_index}")
            return
        if kind == "retreat_pay":
            seat = pending.prompt.chooser
            player = state.players[seat]
            pip = player.active
            for name in chosen:
                cid = next(x for x in pip.energy if self.pool.card(x).name == name)
                pip.energy.remove(cid)
                player.discard.append(cid)
            self._event(state, ev, {"event": "retreat_cost_paid", "player": seat, "cards": sorted(chosen)})
            self._push_bench_switch(state, seat, "retreat_switch", ev)
            return
        if kind == "retreat_switch":
            seat = pending.prompt.chooser
            player = state.players[seat]
            pip = self._pip_by_token(player, chosen[0])
            self._switch_active(state, seat, pip, ev)
            self._summary(state, seat, f"retreated: {self.pool.card(pip.top).name}#{pip.field_index} is now active")
            return
        raise ValueError(f"unknown pending choice kind: {kind!r}")

    def _push_bench_switch(self, state: GameState, seat: int, kind: str, ev: list[dict]) -> None:
        player = state.players[seat]
        tokens = [f"{self.pool.card(p.top).name}#{p.field_index}" for p in player.bench]
        self._push_choice(
            state,
            ev,
            PendingChoice(
                prompt=ChoicePrompt(
                    chooser=seat,
                    candidates=tokens,
                    min_count=1,
                    max_count=1,
                    reason="new-active",
                ),
                kind=kind,
            ),
        )

    def _switch_active(self, state: GameState, side: int, incoming: PokemonInPlay, ev: list[dict]) -> None:
        """Swap the side's active with the given benched one.

        Leaving the active spot clears special conditions and lingering
        damage modifiers on the outgoing card.
        """
        player = state.players[side]
        outgoing = player.active
        player.bench.remove(incoming)
        outgoing.conditions.clear()
        outgoing.modifiers.clear()
        player.bench.append(outgoing)
        player.active = incoming
        self._event(state, ev, {
            "event": "switched_active", "player": side,
            "card": self.pool.card(incoming.top).name, "field_index": incoming.field_index,
        })
        self._summary(state, side, f"{self.pool.card(incoming.top).name}#{incoming.field_index} switched to active")

    def _pip_by_token(self, player: PlayerState, token: str) -> PokemonInPlay:
        name, _, idx = token.rpartition("#")
        for pip in player.in_play():
            if pip.field_index == int(idx) and self.pool.card(pip.top).name == name:
                return pip
        raise ValueError(f"no pokemon in play for token {token!r}")

    def _pip_by_index(self, player: PlayerState, index: int) -> PokemonInPlay:
        for pip in player.in_play():
            if pip.field_index == index:
                return pip
        raise ValueError(f"no pokemon in play with index {index}")

    # --- status effects ------------------------------------------------------------

    def _apply_condition(self, state: GameState, ev: list[dict], side: int, pip: PokemonInPlay, cond: Condition) -> None:
        exclusive = {Condition.ASLEEP, Condition.PARALYZED, Condition.CONFUSED}
        if cond in exclusive:
            pip.conditions -= exclusive
        pip.conditions.add(cond)
        name = self.pool.card(pip.top).name
        self._event(state, ev, {"event": "condition_applied", "player": side, "card": name, "condition": cond.value})
        self._summary(state, side, f"{name}#{pip.field_index} is now {cond.value}")

    def _effect_damage(self, state: GameState, ev: list[dict], side: int, pip: PokemonInPlay, amount: int) -> None:
        pip.damage += amount // 10
        name = self.pool.card(pip.top).name
        self._event(state, ev, {"event": "effect_damage", "player": side, "card": name, "field_index": pip.field_index, "damage": amount})
        self._summary(state, side, f"{name}#{pip.field_index} took {amount} effect damage")

    def _heal(self, state: GameState, ev: list[dict], side: int, pip: PokemonInPlay, amount: int) -> None:
        healed = min(pip.damage, amount // 10)
        if healed <= 0:
            return
        pip.damage -= healed
        name = self.pool.card(pip.top).name
        self._event(state, ev, {"event": "healed", "player": side, "card": name, "amount": healed * 10})
        self._summary(state, side, f"healed {healed * 10} from {name}#{pip.field_index}")

    # --- turn pipeline ---------------------------------------------------------------

    def _advance(self, state: GameState, ev: list[dict]) -> None:
        while state.phase is not Phase.FINISHED:
            if state.choice_queue:
                return
            if state.ko_sweep:
                state.ko_sweep = False
                self._sweep_knockouts(state, ev)
                continue
            if state.pending_no_pokemon:
                losers = state.pending_no_pokemon
                state.pending_no_pokemon = None
                if len(losers) == 2:
                    self._finish(state, ev, None, WinReason.NO_POKEMON)
                else:
                    self._finish(state, ev, 1 - losers[0], WinReason.NO_POKEMON)
                continue
            if state.phase is Phase.SETUP:
                players = state.players
                if all(p.active is not None and p.setup_done for p in players):
                    self._begin_turn(state, ev)
                    continue
                return
            if state.turn_ending:
                if not state.upkeep_done:
                    state.phase = Phase.BETWEEN_TURNS
                    self._between_turns(state, ev)
                    state.upkeep_done = True
                    state.ko_sweep = True
                    continue
                state.turn_ending = False
                state.upkeep_done = False
                self._begin_turn(state, ev)
                continue
            return

    def _sweep_knockouts(self, state: GameState, ev: list[dict]) -> None:
        prize_owed = [0, 0]
        for side in (state.active_player, 1 - state.active_player):
            player = state.players[side]
            for pip in list(player.in_play()):
                card = self.pool.card(pip.top)
                if pip.damage * 10 < card.hp:
                    continue
                for cid in pip.all_card_ids():
                    player.discard.append(cid)
                if player.active is pip:
                    player.active = None
                else:
                    player.bench.remove(pip)
                prize_owed[1 - side] += card.prize_value
                self._event(state, ev, {"event": "knock_out", "player": side, "card": card.name, "field_index": pip.field_index, "prize_value": card.prize_value})
                self._summary(state, side, f"{card.name}#{pip.field_index} was knocked out")
        for taker in (state.active_player, 1 - state.active_player):
            owed = prize_owed[taker]
            if owed <= 0:
                continue
            prizes = state.players[taker].prizes
            k = min(owed, len(prizes))
            if k <= 0:
                continue
            tokens = [f"prize-{i + 1}" for i in range(len(prizes))]
            self._push_choice(
                state,
                ev,
                PendingChoice(
                    prompt=ChoicePrompt(
                        chooser=taker, candidates=tokens, min_count=k, max_count=k,
                        reason="take-prizes",
                    ),
                    kind="prize",
                    data={"taker": taker},
                ),
            )
        if state.phase is Phase.FINISHED:
            return
        no_pokemon = [
            side
            for side in (0, 1)
            if state.players[side].active is None and not state.players[side].bench
            and state.phase is not Phase.SETUP
        ]
        if no_pokemon:
            state.pending_no_pokemon = no_pokemon
            return
        for side in (0, 1):
            player = state.players[side]
            if player.active is None and player.bench:
                self._push_choice(
                    state,
                    ev,
                    PendingChoice(
                        prompt=ChoicePrompt(
                            chooser=side,
                            candidates=[
                                f"{self.pool.card(p.top).name}#{p.field_index}" for p in player.bench
                            ],
                            min_count=1,
                            max_count=1,
                            reason="promote-active",
                        ),
                        kind="promote",
                        data={"side": side},
                    ),
                )

    def _between_turns(self, state: GameState, ev: list[dict]) -> None:
        ending = state.active_player
        for side in (ending, 1 - ending):
            player = state.players[side]
            pip = player.active
            if pip is None:
                continue
            name = self.pool.card(pip.top).name
            if Condition.POISONED in pip.conditions:
                pip.damage += 1
                self._event(state, ev, {"event": "poison_damage", "player": side, "card": name, "damage": 10})
                self._summary(state, side, f"{name}#{pip.field_index} took 10 poison damage")
            if Condition.BURNED in pip.conditions:
                pip.damage += 2
                self._event(state, ev, {"event": "burn_damage", "player": side, "card": name, "damage": 20})
                self._summary(state, side, f"{name}#{pip.field_index} took 20 burn damage")
                if self._flip(state, ev):
                    pip.conditions.discard(Condition.BURNED)
                    self._event(state, ev, {"event": "burn_cured", "player": side, "card": name})
            if Condition.ASLEEP in pip.conditions:
                if self._flip(state, ev):
                    pip.conditions.discard(Condition.ASLEEP)
                    self._event(state, ev, {"event": "woke_up", "player": side, "card": name})
                    self._summary(state, side, f"{name}#{pip.field_index} woke up")
            if side == ending and Condition.PARALYZED in pip.conditions:
                pip.conditions.discard(Condition.PARALYZED)
                self._event(state, ev, {"event": "paralysis_cured", "player": side, "card": name})

    def _begin_turn(self, state: GameState, ev: list[dict]) -> None:
        next_turn = state.turn_number + 1
        if next_turn > self.config.turn_cap:
            self._finish(state, ev, None, WinReason.TURN_CAP)
            return
        if state.phase is Phase.SETUP:
            seat = state.first_player
        else:
            seat = 1 - state.active_player
            ending = state.active_player
            state.prev_turn_summaries[ending] = state.cur_turn_summaries[ending]
            state.cur_turn_summaries[ending] = []
        state.turn_number = next_turn
        state.active_player = seat
        state.phase = Phase.TURN_MAIN
        player = state.players[seat]
        player.flags.reset()
        for side in (0, 1):
            for pip in state.players[side].in_play():
                if side == seat:
                    pip.ability_used = False
                    pip.evolved_this_turn = False
                if pip.modifiers:
                    pip.modifiers = [m for m in pip.modifiers if m.until_turn >= next_turn]
        self._event(state, ev, {"event": "turn_began", "turn": next_turn, "player": seat})
        if not player.deck:
            self._finish(state, ev, 1 - seat, WinReason.DECK_OUT)
            return
        drawn = self._draw(state, seat, 1, ev)
        if drawn:
            self._summary(state, seat, "drew a card")

    def _finish(self, state: GameState, ev: list[dict], winner: Optional[int], reason: WinReason) -> None:
        state.result = GameResult(winner=winner, reason=reason)
        state.phase = Phase.FINISHED
        state.choice_queue.clear()
        state.turn_ending = False
        state.ko_sweep = False
        state.pending_no_pokemon = None
        self._event(state, ev, {"event": "game_over", "winner": winner, "reason": reason.value})

    # --- small helpers ----------------------------------------------------------------

    def _draw(self, state: GameState, seat: int, n: int, ev: list[dict]) -> int:
        player = state.players[seat]
        drawn = 0
        while drawn < n and player.deck:
            player.hand.append(player.deck.pop())
            drawn += 1
        if drawn:
            self._event(state, ev, {"event": "draw", "player": seat, "count": drawn})
        return drawn

    def _flip(self, state: GameState, ev: list[dict]) -> bool:
        heads = state.rng.random() < 0.5
        self._event(state, ev, {"event": "coin_flip", "result": "heads" if heads else "tails"})
        return heads

    def _discard_stadium_in_play(self, state: GameState, ev: list[dict]) -> None:
        if state.stadium is None:
            return
        owner = state.players[state.stadium_owner]
        owner.discard.append(state.stadium)
        self._event(state, ev, {"event": "stadium_discarded", "card": self.pool.card(state.stadium).name})
        state.stadium = None
        state.stadium_owner = None

    def _event(self, state: GameState, ev: list[dict], payload: dict) -> None:
        ev.append(payload)

    def _commit_events(self, state: GameState, ev: list[dict]) -> None:
        for payload in ev:
            self._log(state, {
                "turn": state.turn_number,
                "actor": state.active_player,
                "kind": "event",
                "payload": payload,
            })

    def _log(self, state: GameState, row: dict) -> None:
        state.action_log.append(row)

    def _summary(self, state: GameState, seat: int, text: str) -> None:
        state.cur_turn_summaries[seat].append(text)


def _unique_in_order(ids) -> list[str]:
    seen = set()
    out = []
    for cid in ids:
        if cid not in seen:
            seen.add(cid)
            out.append(cid)
    return out


def card_record(card: CardDef) -> dict:
    """Public, rules-complete description of a card definition."""
    rec: dict[str, Any] = {
        "card_id": card.card_id,
        "name": card.name,
        "kind": card.kind.value,
        "subkind": card.subkind,
        "text": card.rules_text,
    }
    if card.kind is CardKind.POKEMON:
        rec.update(
            {
                "hp": card.hp,
                "types": [t.value for t in card.types],
                "weakness": card.weakness.value if card.weakness else None,
                "retreat_cost": card.retreat_cost,
                "evolves_from": card.evolves_from,
                "prize_value": card.prize_value,
                "attacks": [
                    {
                        "name": a.name,
                        "cost": [t.value for t in a.cost],
                        "damage": a.damage,
                    }
                    for a in card.attacks
                ],
                "ability": card.ability.name if card.ability else None,
            }
        )
    elif card.kind is CardKind.ENERGY:
        rec["provides"] = [t.value for t in card.types]
    return rec
