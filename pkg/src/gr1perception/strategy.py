"""Mealy-machine controllers extracted from a solved game."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np

from . import expr as E
from . import spec as S
from .game import _index, build_game
from .solver import SynthesisResult, solve

FORMAT = "gr1perception.strategy/1"


class NotRealizable(ValueError):
    pass


@dataclass
class Strategy:
    """Enumerated transducer.

    ``states[k]`` is ``(env index, sys index, violation flag, goal)``: the
    joint valuation the machine sits in and the system goal it pursues.
    ``initial`` maps a first environment input to ``(sys index, state)``;
    ``table[k]`` does the same for every admissible input from state ``k``.
    """
    spec: S.GR1Spec
    strict: bool
    states: List[Tuple[int, int, int, int]]
    initial: Dict[int, Tuple[int, int]]
    table: List[Dict[int, Tuple[int, int]]]

    def __post_init__(self):
        self.env_names = [d.name for d in self.spec.env_vars]
        self.sys_names = [d.name for d in self.spec.sys_vars]
        self._domains = self.spec.domains

    @property
    def num_goals(self) -> int:
        return len(self.spec.sys_progress)

    def _decode(self, names, idx: int) -> dict:
        out = {}
        for n in reversed(names):
            dom = self._domains[n]
            idx, r = divmod(idx, len(dom))
            out[n] = dom[r]
        return {n: out[n] for n in names}

    def env_valuation(self, x: int) -> dict:
        return self._decode(self.env_names, x)

    def sys_valuation(self, y: int) -> dict:
        return self._decode(self.sys_names, y)

    def env_index(self, valuation: dict) -> int:
        return _index(self._domains, self.env_names, valuation)

    def sys_index(self, valuation: dict) -> int:
        return _index(self._domains, self.sys_names, valuation)

    def state_valuation(self, k: int) -> dict:
        x, y, _, _ = self.states[k]
        return {**self.env_valuation(x), **self.sys_valuation(y)}

    def start(self, env: dict) -> Optional[Tuple[dict, int]]:
        """React to the first input; ``None`` if it breaks the env initial condition."""
        hit = self.initial.get(self.env_index(env))
        if hit is None:
            return None
        return self.sys_valuation(hit[0]), hit[1]

    def react(self, k: int, env: dict) -> Optional[Tuple[dict, int]]:
        """React to ``env`` from state ``k``; ``None`` if the input is not admissible."""
        hit = self.table[k].get(self.env_index(env))
        if hit is None:
            return None
        return self.sys_valuation(hit[0]), hit[1]

    def minimal_size(self) -> int:
        """States of the smallest machine with the same input/output behaviour."""
        n = len(self.states)
        block = [0] * n
        while True:
            sig = {}
            new = []
            for k in range(n):
                key = (block[k], tuple((x, y, block[to]) for x, (y, to) in sorted(self.table[k].items())))
                new.append(sig.setdefault(key, len(sig)))
            if len(sig) == len(set(block)):
                return len(sig)
            block = new

    # -- export -------------------------------------------------------------

    def to_json(self) -> dict:
        def move(x, reply):
            y, to = reply
            return {"env": self.env_valuation(x), "sys": self.sys_valuation(y), "to": to}

        return {
            "format": FORMAT,
            "strict": self.strict,
            "spec": S.to_json(self.spec),
            "initial": [move(x, r) for x, r in sorted(self.initial.items())],
            "states": [
                {"id": k, "valuation": self.state_valuation(k), "goal": st[3],
                 "violated": bool(st[2]),
                 "next": [move(x, r) for x, r in sorted(self.table[k].items())]}
                for k, st in enumerate(self.states)
            ],
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=1) + "\n"

    @classmethod
    def from_json(cls, d: dict) -> "Strategy":
        if d.get("format") != FORMAT:
            raise ValueError(f"not a strategy document (format {d.get('format')!r})")
        spec = S.from_json(d["spec"])
        proto = cls(spec, d["strict"], [], {}, [])
        initial = {proto.env_index(m["env"]): (proto.sys_index(m["sys"]), m["to"])
                   for m in d["initial"]}
        states, table = [], []
        for st in d["states"]:
            val = st["valuation"]
            states.append((proto.env_index(val), proto.sys_index(val),
                           int(st["violated"]), st["goal"]))
            table.append({proto.env_index(m["env"]): (proto.sys_index(m["sys"]), m["to"])
                          for m in st["next"]})
        return cls(spec, d["strict"], states, initial, table)

    def to_dot(self) -> str:
        bool_vars = {v.name for v in self.spec.vars if v.is_bool}

        def label(val: dict) -> str:
            parts = []
            for n, v in val.items():
                if n in bool_vars:
                    if v == E.TRUE_VALUE:
                        parts.append(n)
                else:
                    parts.append(f"{n}={v}")
            return ",".join(parts) or "-"

        lines = ["digraph strategy {", '  rankdir=LR;', '  init [shape=point];']
        for k, st in enumerate(self.states):
            lines.append(f'  s{k} [label="{k}: {label(self.state_valuation(k))} / g{st[3]}"];')
        for x, (y, to) in sorted(self.initial.items()):
            lines.append(f'  init -> s{to} [label="{label(self.env_valuation(x))}"];')
        for k, row in enumerate(self.table):
            for x, (y, to) in sorted(row.items()):
                lines.append(f'  s{k} -> s{to} [label="{label(self.env_valuation(x))}"];')
        lines.append("}")
        return "\n".join(lines) + "\n"


def extract_strategy(result: SynthesisResult) -> Strategy:
    """Build the deterministic transducer of a realizable result.

    The machine remembers which system goal it pursues and advances it
    (round robin) whenever the current node satisfies that goal. Replies
    minimise (rank, inner index) of the pursued goal, then the system
    valuation in lexicographic order.
    """
    if not result.realizable:
        raise NotRealizable("cannot extract a strategy from an unrealizable result")
    game = result.game
    z = result.winning
    its = result.iterates
    n_goals = len(game.sys_goals)

    def advance(node: int, goal: int) -> int:
        return (goal + 1) % n_goals if game.sys_goals[goal][node] else goal

    def key(node: int, goal: int):
        x, y, flag = game.nodes[node]
        return (int(its[goal].rank[node]), int(its[goal].sub[node]), int(y), int(flag))

    def choose(candidates: np.ndarray, allowed: np.ndarray, goal: int) -> int:
        ok = candidates[allowed[candidates]]
        if len(ok) == 0:
            raise AssertionError("winning node without a winning reply")
        return int(min(ok, key=lambda d: key(int(d), goal)))

    def targets(node: int, goal: int) -> np.ndarray:
        it = its[goal]
        if game.sys_goals[goal][node]:
            return z
        r = int(it.rank[node])
        lower = it.ys[r - 2] if r >= 2 else np.zeros_like(z)
        i = int(it.sub[node])
        return lower | it.xs[r - 1][i]

    index: Dict[Tuple[int, int], int] = {}
    states: List[Tuple[int, int, int, int]] = []
    order: List[Tuple[int, int]] = []

    def intern(node: int, goal: int) -> int:
        k = index.get((node, goal))
        if k is None:
            k = len(states)
            index[(node, goal)] = k
            x, y, flag = game.nodes[node]
            states.append((int(x), int(y), int(flag), goal))
            order.append((node, goal))
        return k

    initial = {}
    for x, cands in zip(game.init_env, game.init_nodes):
        node = choose(cands, z, 0)
        initial[int(x)] = (int(game.nodes[node][1]), intern(node, advance(node, 0)))

    table: List[Dict[int, Tuple[int, int]]] = []
    k = 0
    while k < len(order):
        node, goal = order[k]
        allowed = targets(node, goal)
        row = {}
        for m in range(game.move_ptr[node], game.move_ptr[node + 1]):
            cands = game.edge_dst[game.edge_ptr[m]:game.edge_ptr[m + 1]]
            nxt_node = choose(cands, allowed, goal)
            row[int(game.move_env[m])] = (int(game.nodes[nxt_node][1]),
                                          intern(nxt_node, advance(nxt_node, goal)))
        table.append(row)
        k += 1
    strategy = Strategy(game.spec, game.strict, states, initial, table)
    result.strategy = strategy
    return strategy


def synthesize(spec: S.GR1Spec, strict: bool = True, state_cap: Optional[int] = None) -> SynthesisResult:
    """Build, solve and, when realizable, attach the extracted strategy."""
    result = solve(build_game(spec, strict=strict, state_cap=state_cap))
    if result.realizable:
        result.strategy = extract_strategy(result)
    return result


# -- execution ------------------------------------------------------------------

@dataclass
class Trace:
    """Joint valuations of a run; ``loop_start`` marks a lasso back-edge target."""
    states: List[dict] = field(default_factory=list)
    nodes: List[Optional[int]] = field(default_factory=list)
    env_violation: Optional[int] = None
    loop_start: Optional[int] = None

    def __len__(self) -> int:
        return len(self.states)


def _fallback_reply(spec: S.GR1Spec, now: Optional[dict], env: dict, previous: Optional[dict]):
    names = [d.name for d in spec.sys_vars]
    doms = [d.domain for d in spec.sys_vars]
    import itertools
    for combo in itertools.product(*doms):
        cand = dict(zip(names, combo))
        nxt = {**env, **cand}
        if now is None:
            if E.eval_expr(spec.theta_sys, nxt):
                return cand
        elif all(E.eval_expr(f, now, nxt) for f in spec.sys_safety):
            return cand
    return previous if previous is not None else dict(zip(names, (d[0] for d in doms)))


def closed_loop(strategy: Strategy, env_policy: Callable[[List[dict]], dict], steps: int) -> Trace:
    """Run ``strategy`` against ``env_policy`` for ``steps`` steps.

    The policy receives the joint valuations so far and returns the next
    environment valuation. An input outside the assumptions is recorded in
    ``env_violation`` (first occurrence); from then on the controller falls
    back to the first reply allowed by the system safety formulas.
    """
    trace = Trace()
    node: Optional[int] = None
    for t in range(steps):
        env = {n: E._norm(v) for n, v in env_policy(list(trace.states)).items()}
        reply = None
        if trace.env_violation is None:
            reply = strategy.start(env) if t == 0 else strategy.react(node, env)
        if reply is None:
            if trace.env_violation is None:
                trace.env_violation = t
            prev = trace.states[-1] if trace.states else None
            prev_sys = {n: prev[n] for n in strategy.sys_names} if prev else None
            sys_val, node = _fallback_reply(strategy.spec, prev, env, prev_sys), None
        else:
            sys_val, node = reply
        trace.states.append({**env, **sys_val})
        trace.nodes.append(node)
    return trace
