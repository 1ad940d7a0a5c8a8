"""GR(1) realizability by the three-nested fixpoint.

    Z = nu Z. /\\_j mu Y. \\/_i nu X. (J_j & cpre(Z)) | cpre(Y) | (!E_i & cpre(X))

``J_j`` are the system goals, ``E_i`` the environment goals. The
controllable predecessor quantifies over admissible environment inputs
only, so an input that breaks the environment safety assumption ends the
play in the system's favour, and a node whose admissible input has no
allowed reply is lost. That is strict realizability: the system may not
break a guarantee before the environment breaks an assumption.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from .game import GameStructure


@dataclass
class GoalIterates:
    """Least-fixpoint iterates for one system goal.

    ``ys[r]`` is the set reached after ``r + 1`` rounds; ``xs[r][i]`` is the
    inner greatest fixpoint for environment goal ``i`` in that round.
    """
    ys: List[np.ndarray]
    xs: List[List[np.ndarray]]
    rank: np.ndarray   # 1-based round of first membership, 0 outside
    sub: np.ndarray    # smallest env-goal index whose inner set holds the node


@dataclass
class SynthesisResult:
    realizable: bool
    winning: np.ndarray
    game: GameStructure
    iterates: List[GoalIterates] = field(default_factory=list)
    stats: dict = field(default_factory=dict)
    strategy: Optional[object] = None

    @property
    def winning_region(self) -> set:
        """Winning nodes as ``(env index, sys index, flag)`` triples."""
        return {tuple(int(v) for v in self.game.nodes[i]) for i in np.flatnonzero(self.winning)}

    def winning_valuations(self) -> List[dict]:
        return [self.game.valuation(i) for i in np.flatnonzero(self.winning)]


class Cpre:
    """Controllable predecessor over a game's CSR transition arrays."""

    def __init__(self, game: GameStructure):
        self.n = game.num_nodes
        self.m = len(game.move_env)
        self.edge_move = game.edge_move
        self.edge_dst = game.edge_dst
        self.move_src = game.move_src
        self.calls = 0

    def __call__(self, target: np.ndarray) -> np.ndarray:
        self.calls += 1
        hit = np.bincount(self.edge_move, weights=target[self.edge_dst], minlength=self.m) > 0
        bad = np.bincount(self.move_src, weights=~hit, minlength=self.n) > 0
        return ~bad


def _goal_fixpoint(cpre, z, goal, env_goals, keep=False):
    n = len(z)
    start = goal & cpre(z)
    y = np.zeros(n, dtype=bool)
    ys, xs = [], []
    while True:
        base = start | cpre(y)
        new_y = np.zeros(n, dtype=bool)
        round_xs = []
        for eg in env_goals:
            x = np.ones(n, dtype=bool)
            while True:
                nx = base | (~eg & cpre(x))
                if np.array_equal(nx, x):
                    break
                x = nx
            round_xs.append(x)
            new_y |= x
        if np.array_equal(new_y, y):
            break
        y = new_y
        if keep:
            ys.append(y)
            xs.append(round_xs)
    return y, ys, xs


def solve(game: GameStructure) -> SynthesisResult:
    """Compute the winning region and decide realizability."""
    t0 = time.perf_counter()
    cpre = Cpre(game)
    n = game.num_nodes
    z = np.ones(n, dtype=bool)
    rounds = 0
    while True:
        rounds += 1
        z_old = z
        for j, goal in enumerate(game.sys_goals):
            z, _, _ = _goal_fixpoint(cpre, z, goal, game.env_goals)
        if np.array_equal(z, z_old):
            break

    iterates = []
    for goal in game.sys_goals:
        _, ys, xs = _goal_fixpoint(cpre, z, goal, game.env_goals, keep=True)
        rank = np.zeros(n, dtype=np.int64)
        sub = np.full(n, -1, dtype=np.int64)
        for r in range(len(ys) - 1, -1, -1):
            rank[ys[r]] = r + 1
        for r in range(len(ys)):
            at = rank == r + 1
            for i in range(len(xs[r]) - 1, -1, -1):
                sub[at & xs[r][i]] = i
        iterates.append(GoalIterates(ys, xs, rank, sub))

    realizable = all(bool(z[ids].any()) for ids in game.init_nodes)
    stats = dict(game.stats)
    stats.update({
        "winning_states": int(z.sum()),
        "outer_iterations": rounds,
        "cpre_calls": cpre.calls,
        "wall_time_s": time.perf_counter() - t0,
    })
    return SynthesisResult(realizable, z, game, iterates, stats)
