"""Glicko-2 ratings with simultaneous period updates and frozen anchors.

Straight implementation of Glickman's published algorithm: ratings live
on the display scale (1500/350) and convert through the 173.7178 scale
factor internally.  All games of one rating period update from the
period-start ratings; a frozen rating serves as an opponent but never
moves, which is what anchors in longitudinal evaluation need.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Iterable, Sequence

__all__ = [
    "Rating",
    "GameOutcome",
    "update_rating",
    "rate_period",
    "expected_score",
    "GLICKO2_SCALE",
    "DEFAULT_TAU",
]

GLICKO2_SCALE = 173.7178
DEFAULT_RATING = 1500.0
DEFAULT_DEVIATION = 350.0
DEFAULT_VOLATILITY = 0.06
DEFAULT_TAU = 0.5
CONVERGENCE_TOL = 1e-6


@dataclass(frozen=True)
class Rating:
    rating: float = DEFAULT_RATING
    deviation: float = DEFAULT_DEVIATION
    volatility: float = DEFAULT_VOLATILITY
    frozen: bool = False

    @property
    def mu(self) -> float:
        return (self.rating - DEFAULT_RATING) / GLICKO2_SCALE

    @property
    def phi(self) -> float:
        return self.deviation / GLICKO2_SCALE


@dataclass(frozen=True)
class GameOutcome:
    """One game from the rated player's perspective: opponent and score."""

    opponent: Rating
    score: float  # 1 win, 0.5 draw, 0 loss


def _g(phi: float) -> float:
    return 1.0 / math.sqrt(1.0 + 3.0 * phi * phi / math.pi**2)


def _e(mu: float, mu_j: float, phi_j: float) -> float:
    return 1.0 / (1.0 + math.exp(-_g(phi_j) * (mu - mu_j)))


def expected_score(player: Rating, opponent: Rating) -> float:
    """Win expectancy of `player` against `opponent` (opponent's
    deviation discounts the spread, per the rating formulas)."""
    return _e(player.mu, opponent.mu, opponent.phi)


def _new_volatility(phi: float, v: float, delta: float, sigma: float, tau: float) -> float:
    """Illinois-method iteration for the volatility update."""
    a = math.log(sigma * sigma)
    phi2 = phi * phi
    delta2 = delta * delta

    def f(x: float) -> float:
        ex = math.exp(x)
        num = ex * (delta2 - phi2 - v - ex)
        den = 2.0 * (phi2 + v + ex) ** 2
        return num / den - (x - a) / (tau * tau)

    big_a = a
    if delta2 > phi2 + v:
        big_b = math.log(delta2 - phi2 - v)
    else:
        k = 1
        while f(a - k * tau) < 0:
            k += 1
        big_b = a - k * tau
    f_a, f_b = f(big_a), f(big_b)
    while abs(big_b - big_a) > CONVERGENCE_TOL:
        big_c = big_a + (big_a - big_b) * f_a / (f_b - f_a)
        f_c = f(big_c)
        if f_c * f_b <= 0:
            big_a, f_a = big_b, f_b
        else:
            f_a /= 2.0
        big_b, f_b = big_c, f_c
    return math.exp(big_a / 2.0)


def update_rating(player: Rating, outcomes: Sequence[GameOutcome], tau: float = DEFAULT_TAU) -> Rating:
    """One rating-period update for a single player.

    With no games the rating stays put and the deviation grows by the
    volatility; a frozen rating is returned unchanged either way.
    """
    if player.frozen:
        return player
    mu, phi, sigma = player.mu, player.phi, player.volatility
    if not outcomes:
        phi_star = math.sqrt(phi * phi + sigma * sigma)
        return replace(player, deviation=phi_star * GLICKO2_SCALE)

    v_inv = 0.0
    delta_sum = 0.0
    for outcome in outcomes:
        mu_j, phi_j = outcome.opponent.mu, outcome.opponent.phi
        g_j = _g(phi_j)
        e_j = _e(mu, mu_j, phi_j)
        v_inv += g_j * g_j * e_j * (1.0 - e_j)
        delta_sum += g_j * (outcome.score - e_j)
    v = 1.0 / v_inv
    delta = v * delta_sum

    sigma_new = _new_volatility(phi, v, delta, sigma, tau)
    phi_star = math.sqrt(phi * phi + sigma_new * sigma_new)
    phi_new = 1.0 / math.sqrt(1.0 / (phi_star * phi_star) + 1.0 / v)
    mu_new = mu + phi_new * phi_new * delta_sum
    return Rating(
        rating=mu_new * GLICKO2_SCALE + DEFAULT_RATING,
        deviation=phi_new * GLICKO2_SCALE,
        volatility=sigma_new,
        frozen=False,
    )


def rate_period(
    ratings: dict[str, Rating],
    results: Iterable[tuple[str, str, float]],
    tau: float = DEFAULT_TAU,
) -> dict[str, Rating]:
    """Update every named rating from one period's results.

    `results` rows are (player_a, player_b, score_a).  Every update
    reads the period-start ratings, so result order cannot matter.
    Players with no games decay; frozen ratings never move.
    """
    outcomes: dict[str, list[GameOutcome]] = {name: [] for name in ratings}
    for a, b, score_a in results:
        if a not in ratings or b not in ratings:
            raise KeyError(f"result references unknown player: {a!r} vs {b!r}")
        if not 0.0 <= score_a <= 1.0:
            raise ValueError(f"score must be within [0, 1], got {score_a!r}")
        outcomes[a].append(GameOutcome(opponent=ratings[b], score=score_a))
        outcomes[b].append(GameOutcome(opponent=ratings[a], score=1.0 - score_a))
    return {name: update_rating(r, outcomes[name], tau=tau) for name, r in ratings.items()}
