"""Finite normal-form games: best response and pure-strategy Nash equilibrium.

Equilibria are found by full enumeration of joint action profiles. Among
multiple equilibria the one with the highest payoff sum wins, then the
lexicographically smallest profile. When no pure equilibrium exists the
solver falls back to iterated best response from the all-first-action
profile (capped at 10 sweeps) and flags the result approximate.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import EnumerationBudgetExceeded

ENUMERATION_BOUND = 10**6
IBR_SWEEPS = 10


@dataclass
class NormalFormGame:
    n_players: int
    actions_per_player: Sequence[int]
    payoff: Callable[[tuple[int, ...]], Sequence[float]]

    def __post_init__(self):
        if self.n_players < 1 or len(self.actions_per_player) != self.n_players:
            raise ValueError("inconsistent player/action counts")

    def payoff_table(self) -> np.ndarray:
        """Dense table of shape (*actions_per_player, n_players)."""
        shape = tuple(self.actions_per_player)
        table = np.empty(shape + (self.n_players,), dtype=float)
        for profile in itertools.product(*[range(k) for k in shape]):
            table[profile] = np.asarray(self.payoff(profile), dtype=float)
        return table


def game_from_table(table: np.ndarray) -> NormalFormGame:
    """Wrap a dense payoff table (``(*n_actions, n_players)``) as a game."""
    table = np.asarray(table, dtype=float)
    n_players = table.shape[-1]
    actions = table.shape[:-1]
    return NormalFormGame(n_players, list(actions), lambda p: table[tuple(p)])


@dataclass(frozen=True)
class NashResult:
    profile: tuple[int, ...]
    approximate: bool
    payoffs: tuple[float, ...]


def best_response(game: NormalFormGame, player: int, others_profile: Sequence[int]) -> int:
    """Payoff-maximizing action for `player`; ties break to the lowest index."""
    others = list(others_profile)
    best_idx = 0
    best_val = -np.inf
    for a in range(game.actions_per_player[player]):
        profile = tuple(others[:player]) + (a,) + tuple(others[player:])
        val = float(game.payoff(profile)[player])
        if val > best_val:
            best_val = val
            best_idx = a
    return best_idx


def _equilibrium_mask(table: np.ndarray) -> np.ndarray:
    """Boolean mask over joint profiles satisfying the no-deviation condition."""
    n_players = table.shape[-1]
    mask = np.ones(table.shape[:-1], dtype=bool)
    for p in range(n_players):
        own = table[..., p]
        best = own.max(axis=p, keepdims=True)
        mask &= own >= best - 0.0  # exact: no strictly improving deviation
    return mask


def pure_nash(game: NormalFormGame) -> NashResult:
    """Pure-strategy equilibrium under the max-sum / lexicographic selection rule."""
    total = 1
    for k in game.actions_per_player:
        total *= k
    if total > ENUMERATION_BOUND:
        raise EnumerationBudgetExceeded(f"{total} joint profiles exceed {ENUMERATION_BOUND}")

    table = game.payoff_table()
    mask = _equilibrium_mask(table)
    idx = np.argwhere(mask)
    if idx.shape[0] > 0:
        sums = table[mask].sum(axis=1)
        best_sum = sums.max()
        tied = idx[sums >= best_sum]
        order = np.lexsort(tuple(tied[:, c] for c in range(tied.shape[1] - 1, -1, -1)))
        profile = tuple(int(v) for v in tied[order[0]])
        return NashResult(profile, False, tuple(float(v) for v in table[profile]))

    # no pure equilibrium: iterated best response from the all-first profile
    profile = [0] * game.n_players
    for _ in range(IBR_SWEEPS):
        changed = False
        for p in range(game.n_players):
            others = profile[:p] + profile[p + 1 :]
            br = best_response(game, p, others)
            if br != profile[p]:
                profile[p] = br
                changed = True
        if not changed:
            break
    prof = tuple(profile)
    return NashResult(prof, True, tuple(float(v) for v in table[prof]))
