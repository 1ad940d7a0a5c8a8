"""Explicit-state two-player game built from a GR(1) specification.

Valuations of the environment (system) variables are enumerated in
lexicographic order of value indices, first declared variable most
significant, so index order equals lexicographic valuation order. Game
nodes are triples ``(env index, sys index, flag)``; the flag records a
past system violation and is only used for non-strict semantics.

Only nodes reachable from the initial pairs are materialised. Transitions
are stored in CSR form: every node owns a run of *moves* (admissible
environment inputs) and every move owns a run of *edges* (allowed system
replies).
"""
from __future__ import annotations

import itertools
import os
from dataclasses import dataclass, field
from typing import Dict, List, Optional

import numpy as np

from . import expr as E
from .spec import GR1Spec, validate_spec

DEFAULT_STATE_CAP = 2 ** 22
# elements per vectorised formula evaluation
_CHUNK = 1 << 21


class GameError(ValueError):
    pass


class StateCapExceeded(GameError):
    pass


class NoInitialState(GameError):
    pass


def state_cap_from_env() -> int:
    raw = os.environ.get("GR1_STATE_CAP")
    return int(raw) if raw else DEFAULT_STATE_CAP


def enumerate_valuations(decls) -> np.ndarray:
    sizes = [len(d.domain) for d in decls]
    if not sizes:
        return np.zeros((1, 0), dtype=np.int16)
    rows = list(itertools.product(*(range(n) for n in sizes)))
    return np.array(rows, dtype=np.int16).reshape(len(rows), len(sizes))


@dataclass
class GameStructure:
    spec: GR1Spec
    strict: bool
    env_names: List[str]
    sys_names: List[str]
    env_vals: np.ndarray
    sys_vals: np.ndarray
    nodes: np.ndarray           # (N, 3): env index, sys index, violation flag
    init_env: np.ndarray        # env indices satisfying the env initial condition
    init_nodes: List[np.ndarray]  # per entry of init_env, candidate initial nodes
    move_ptr: np.ndarray        # (N + 1,)
    move_env: np.ndarray        # (M,) env index of each move
    edge_ptr: np.ndarray        # (M + 1,)
    edge_dst: np.ndarray        # (E,) destination node of each edge
    sys_goals: List[np.ndarray]
    env_goals: List[np.ndarray]
    stats: Dict[str, int] = field(default_factory=dict)

    @property
    def num_nodes(self) -> int:
        return len(self.nodes)

    @property
    def move_src(self) -> np.ndarray:
        return np.repeat(np.arange(self.num_nodes), np.diff(self.move_ptr))

    @property
    def edge_move(self) -> np.ndarray:
        return np.repeat(np.arange(len(self.move_env)), np.diff(self.edge_ptr))

    def env_valuation(self, x: int) -> dict:
        dom = self.spec.domains
        return {n: dom[n][v] for n, v in zip(self.env_names, self.env_vals[x])}

    def sys_valuation(self, y: int) -> dict:
        dom = self.spec.domains
        return {n: dom[n][v] for n, v in zip(self.sys_names, self.sys_vals[y])}

    def valuation(self, node: int) -> dict:
        x, y, _ = self.nodes[node]
        return {**self.env_valuation(x), **self.sys_valuation(y)}

    def env_index(self, valuation: dict) -> int:
        return _index(self.spec.domains, self.env_names, valuation)

    def sys_index(self, valuation: dict) -> int:
        return _index(self.spec.domains, self.sys_names, valuation)


def _index(domains, names, valuation) -> int:
    idx = 0
    for n in names:
        dom = domains[n]
        idx = idx * len(dom) + dom.index(E._norm(valuation[n]))
    return idx


def _columns(names, vals, rows, shape_axis):
    """Map variable names to value-index arrays shaped for broadcasting."""
    out = {}
    for k, n in enumerate(names):
        col = vals[rows, k] if rows is not None else vals[:, k]
        out[n] = col.reshape(shape_axis)
    return out


def build_game(spec: GR1Spec, strict: bool = True, state_cap: Optional[int] = None,
               prune: bool = True) -> GameStructure:
    """Enumerate the game of ``spec``.

    With ``prune`` (the default) only nodes reachable from the initial
    pairs are built; otherwise every joint valuation is a node.
    """
    problems = validate_spec(spec)
    if problems:
        raise GameError("; ".join(str(p) for p in problems))
    if state_cap is None:
        state_cap = state_cap_from_env()
    env_decls, sys_decls = spec.env_vars, spec.sys_vars
    env_names = [d.name for d in env_decls]
    sys_names = [d.name for d in sys_decls]
    n_env = int(np.prod([len(d.domain) for d in env_decls])) if env_decls else 1
    n_sys = int(np.prod([len(d.domain) for d in sys_decls])) if sys_decls else 1
    total = n_env * n_sys * (1 if strict else 2)
    if total > state_cap:
        raise StateCapExceeded(f"{total} joint states exceed the cap of {state_cap}")
    env_vals = enumerate_valuations(env_decls)
    sys_vals = enumerate_valuations(sys_decls)
    domains = spec.domains

    env_safe = [E.compile_array(f, domains) for f in spec.env_safety]
    sys_safe = [E.compile_array(f, domains) for f in spec.sys_safety]

    def all_of(fs, now, nxt, shape):
        out = np.ones(shape, dtype=bool)
        for f in fs:
            out &= np.broadcast_to(f(now, nxt), shape)
        return out

    # initial pairs
    env_cols = _columns(env_names, env_vals, None, (-1,))
    theta_e = np.broadcast_to(E.compile_array(spec.theta_env, domains)(env_cols, {}), (n_env,))
    init_env = np.flatnonzero(theta_e)
    if len(init_env) == 0:
        raise NoInitialState("no environment valuation satisfies the environment initial condition")
    theta_s_f = E.compile_array(spec.theta_sys, domains)
    now = {**_columns(env_names, env_vals, init_env, (-1, 1)),
           **_columns(sys_names, sys_vals, None, (1, -1))}
    theta_s = np.broadcast_to(theta_s_f(now, {}), (len(init_env), n_sys))

    node_id: Dict[tuple, int] = {}
    nodes: List[tuple] = []

    def intern(key) -> int:
        nid = node_id.get(key)
        if nid is None:
            nid = len(nodes)
            node_id[key] = nid
            nodes.append(key)
        return nid

    init_nodes = []
    for row, x in enumerate(init_env):
        if strict:
            ids = [intern((int(x), int(y), 0)) for y in np.flatnonzero(theta_s[row])]
        else:
            ids = [intern((int(x), y, int(not theta_s[row, y]))) for y in range(n_sys)]
        init_nodes.append(np.array(ids, dtype=np.int64))

    if not prune:
        for x in range(n_env):
            for y in range(n_sys):
                for v in ((0,) if strict else (0, 1)):
                    intern((x, y, v))

    moves_of: Dict[int, list] = {}
    done = 0
    while done < len(nodes):
        # nodes appended while expanding join the next batch
        batch = np.arange(done, len(nodes))
        done = len(nodes)
        step = max(1, _CHUNK // max(n_env, 1))
        for lo in range(0, len(batch), step):
            ids = batch[lo:lo + step]
            _expand(ids, nodes, intern, moves_of, env_vals, sys_vals, env_names, sys_names,
                    env_safe, sys_safe, all_of, n_env, n_sys, strict)

    n = len(nodes)
    node_arr = np.array(nodes, dtype=np.int64).reshape(n, 3)
    move_ptr = [0]
    move_env, edge_ptr, edge_dst = [], [0], []
    for nid in range(n):
        for x_next, dsts in moves_of.get(nid, ()):
            move_env.append(x_next)
            edge_dst.extend(dsts)
            edge_ptr.append(len(edge_dst))
        move_ptr.append(len(move_env))

    cols = {**_columns(env_names, env_vals, node_arr[:, 0], (-1,)),
            **_columns(sys_names, sys_vals, node_arr[:, 1], (-1,))}
    clean = node_arr[:, 2] == 0
    sys_goals = [np.broadcast_to(E.compile_array(f, domains)(cols, {}), (n,)) & clean
                 for f in spec.sys_progress]
    env_goals = [np.broadcast_to(E.compile_array(f, domains)(cols, {}), (n,)).copy()
                 for f in spec.env_progress]

    return GameStructure(
        spec=spec, strict=strict, env_names=env_names, sys_names=sys_names,
        env_vals=env_vals, sys_vals=sys_vals, nodes=node_arr,
        init_env=init_env, init_nodes=init_nodes,
        move_ptr=np.array(move_ptr, dtype=np.int64),
        move_env=np.array(move_env, dtype=np.int64),
        edge_ptr=np.array(edge_ptr, dtype=np.int64),
        edge_dst=np.array(edge_dst, dtype=np.int64),
        sys_goals=sys_goals, env_goals=env_goals,
        stats={"joint_states": n, "joint_valuations": n_env * n_sys,
               "env_valuations": n_env, "sys_valuations": n_sys,
               "moves": len(move_env), "edges": len(edge_dst)},
    )


def _expand(ids, nodes, intern, moves_of, env_vals, sys_vals, env_names, sys_names,
            env_safe, sys_safe, all_of, n_env, n_sys, strict):
    keys = np.array([nodes[i] for i in ids], dtype=np.int64).reshape(len(ids), 3)
    xs, ys, flags = keys[:, 0], keys[:, 1], keys[:, 2]
    now = {**_columns(env_names, env_vals, xs, (-1, 1)),
           **_columns(sys_names, sys_vals, ys, (-1, 1))}
    nxt = _columns(env_names, env_vals, None, (1, -1))
    rho_e = all_of(env_safe, now, nxt, (len(ids), n_env))
    pair_b, pair_x = np.nonzero(rho_e)
    if len(pair_b) == 0:
        return
    step = max(1, _CHUNK // max(n_sys, 1))
    replies = []
    for lo in range(0, len(pair_b), step):
        b, xn = pair_b[lo:lo + step], pair_x[lo:lo + step]
        now_p = {**_columns(env_names, env_vals, xs[b], (-1, 1)),
                 **_columns(sys_names, sys_vals, ys[b], (-1, 1))}
        nxt_p = {**_columns(env_names, env_vals, xn, (-1, 1)),
                 **_columns(sys_names, sys_vals, None, (1, -1))}
        replies.append(all_of(sys_safe, now_p, nxt_p, (len(b), n_sys)))
    rho_s = np.concatenate(replies, axis=0)
    for k in range(len(pair_b)):
        src = int(ids[pair_b[k]])
        x_next = int(pair_x[k])
        if strict:
            dsts = [intern((x_next, int(y), 0)) for y in np.flatnonzero(rho_s[k])]
        else:
            flag = int(flags[pair_b[k]])
            dsts = [intern((x_next, y, int(flag or not rho_s[k, y]))) for y in range(n_sys)]
        moves_of.setdefault(src, []).append((x_next, dsts))
