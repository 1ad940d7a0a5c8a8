"""Trace checking and strategy verification."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Optional

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from . import expr as E
from .spec import GR1Spec
from .strategy import Strategy, Trace


@dataclass(frozen=True)
class Violation:
    step: int
    side: str        # "env" or "sys"
    kind: str        # "init", "safety" or "progress"
    index: int       # position in the spec list, -1 for initial conditions
    formula: str
    after_env_violation: bool = False

    def __str__(self) -> str:
        tag = " (after env violation)" if self.after_env_violation else ""
        return f"step {self.step}: {self.side} {self.kind} [{self.index}] {self.formula}{tag}"


class TraceChecker:
    """Caches safety verdicts per (now, next) pair of a fixed spec."""

    def __init__(self, spec: GR1Spec):
        self.spec = spec
        self.names = [v.name for v in spec.vars]
        bool_vars = {v.name for v in spec.vars if v.is_bool}
        self._text = {
            ("env", i): E.to_text(f, bool_vars) for i, f in enumerate(spec.env_safety)}
        self._text.update({
            ("sys", i): E.to_text(f, bool_vars) for i, f in enumerate(spec.sys_safety)})
        self._text[("env", -1)] = E.to_text(spec.theta_env, bool_vars)
        self._text[("sys", -1)] = E.to_text(spec.theta_sys, bool_vars)
        self._bool_vars = bool_vars
        self._cache: Dict[tuple, tuple] = {}

    def key(self, valuation: dict) -> tuple:
        return tuple(E._norm(valuation[n]) for n in self.names)

    def text(self, side: str, index: int) -> str:
        return self._text[(side, index)]

    def failed_safety(self, now: dict, nxt: dict):
        """Indices of failing env and sys safety formulas on one step."""
        k = (self.key(now), self.key(nxt))
        hit = self._cache.get(k)
        if hit is None:
            env = tuple(i for i, f in enumerate(self.spec.env_safety) if not E.eval_expr(f, now, nxt))
            sys = tuple(i for i, f in enumerate(self.spec.sys_safety) if not E.eval_expr(f, now, nxt))
            hit = (env, sys)
            self._cache[k] = hit
        return hit

    def progress_text(self, side: str, index: int) -> str:
        goals = self.spec.env_progress if side == "env" else self.spec.sys_progress
        return E.to_text(goals[index], self._bool_vars)


def verify_trace(trace: Trace, spec: GR1Spec, checker: Optional[TraceChecker] = None) -> List[Violation]:
    """Every initial, safety and (for lassos) progress failure of ``trace``.

    A step index names the later state of the failing pair. Failures at a
    step after the first environment violation are flagged; a system
    failure at the same step as the environment's still counts.
    """
    checker = checker or TraceChecker(spec)
    states = trace.states
    out: List[Violation] = []
    if not states:
        return out
    first_env: Optional[int] = None

    def add(step, side, kind, index, text):
        out.append(Violation(step, side, kind, index, text,
                             first_env is not None and step > first_env))

    s0 = states[0]
    if not E.eval_expr(spec.theta_env, s0):
        first_env = 0
        add(0, "env", "init", -1, checker.text("env", -1))
    if not E.eval_expr(spec.theta_sys, s0):
        add(0, "sys", "init", -1, checker.text("sys", -1))

    pairs = [(t, t + 1) for t in range(len(states) - 1)]
    if trace.loop_start is not None:
        pairs.append((len(states) - 1, trace.loop_start))
    for k, (a, b) in enumerate(pairs):
        step = k + 1
        env_bad, sys_bad = checker.failed_safety(states[a], states[b])
        if env_bad and first_env is None:
            first_env = step
        for i in env_bad:
            add(step, "env", "safety", i, checker.text("env", i))
        for i in sys_bad:
            add(step, "sys", "safety", i, checker.text("sys", i))

    if trace.loop_start is not None:
        loop = states[trace.loop_start:]
        env_miss = [i for i, g in enumerate(spec.env_progress)
                    if not any(E.eval_expr(g, s) for s in loop)]
        step = len(states)
        for i in env_miss:
            add(step, "env", "progress", i, checker.progress_text("env", i))
        for i, g in enumerate(spec.sys_progress):
            if not any(E.eval_expr(g, s) for s in loop):
                out.append(Violation(step, "sys", "progress", i, checker.progress_text("sys", i),
                                     first_env is not None or bool(env_miss)))
    return out


def sys_failures(violations: List[Violation]) -> List[Violation]:
    """System violations not excused by an earlier environment violation."""
    return [v for v in violations if v.side == "sys" and not v.after_env_violation]


# -- whole-strategy checks ---------------------------------------------------------

@dataclass
class ExploreReport:
    depth: int
    paths: int                      # admissible env behaviours of length ``depth``
    states_reached: int
    steps_checked: int
    violations: List[Violation] = field(default_factory=list)


def explore(strategy: Strategy, depth: int, checker: Optional[TraceChecker] = None) -> ExploreReport:
    """Check every admissible environment behaviour up to ``depth`` steps.

    Outputs depend only on the machine state, so every behaviour of length
    ``depth`` is a walk of the transition table. The walks are covered by
    checking each (state, input) step reachable within ``depth`` once;
    ``paths`` counts the walks themselves.
    """
    checker = checker or TraceChecker(strategy.spec)
    spec = strategy.spec
    violations: List[Violation] = []
    frontier: Dict[int, int] = {}   # state -> number of walks reaching it
    for x, (y, k) in sorted(strategy.initial.items()):
        first = Trace([strategy.state_valuation(k)])
        violations += [v for v in verify_trace(first, spec, checker) if v.side == "sys"]
        frontier[k] = frontier.get(k, 0) + 1
    seen = set(frontier)
    checked = set()
    paths = sum(frontier.values()) if depth >= 1 else 0
    for level in range(1, depth):
        nxt: Dict[int, int] = {}
        for k, count in frontier.items():
            now = strategy.state_valuation(k)
            for x, (y, to) in sorted(strategy.table[k].items()):
                nxt[to] = nxt.get(to, 0) + count
                if (k, x) in checked:
                    continue
                checked.add((k, x))
                step = Trace([now, strategy.state_valuation(to)])
                for v in verify_trace(step, spec, checker):
                    if v.side == "sys" and v.kind == "safety":
                        violations.append(Violation(level, v.side, v.kind, v.index, v.formula))
        frontier = nxt
        seen.update(nxt)
        paths = sum(frontier.values())
    return ExploreReport(depth, paths, len(seen), len(checked), violations)


def strategy_goal_masks(strategy: Strategy):
    """Boolean masks over machine states for every env and sys goal."""
    vals = [strategy.state_valuation(k) for k in range(len(strategy.states))]
    clean = np.array([st[2] == 0 for st in strategy.states], dtype=bool)
    env = [np.array([E.eval_expr(g, v) for v in vals], dtype=bool) for g in strategy.spec.env_progress]
    sys = [np.array([E.eval_expr(g, v) for v in vals], dtype=bool) & clean
           for g in strategy.spec.sys_progress]
    return env, sys


@dataclass
class ModelCheckReport:
    safety: List[str] = field(default_factory=list)
    liveness: List[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.safety and not self.liveness


def model_check(strategy: Strategy) -> ModelCheckReport:
    """Exhaustively verify the guarantees on the machine's state graph.

    Safety: every emitted step satisfies the system safety formulas.
    Liveness: for each system goal, no cycle avoiding it may visit every
    environment goal, found via strongly connected components.
    """
    spec = strategy.spec
    rep = ModelCheckReport()
    checker = TraceChecker(spec)
    n = len(strategy.states)
    vals = [strategy.state_valuation(k) for k in range(n)]
    for x, (y, k) in strategy.initial.items():
        if strategy.strict and not E.eval_expr(spec.theta_sys, vals[k]):
            rep.safety.append(f"initial state {k} violates the system initial condition")
    src, dst = [], []
    for k in range(n):
        for x, (y, to) in strategy.table[k].items():
            src.append(k)
            dst.append(to)
            if strategy.strict:
                _, bad = checker.failed_safety(vals[k], vals[to])
                for i in bad:
                    rep.safety.append(f"{k} -> {to}: {checker.text('sys', i)}")
    env_goals, sys_goals = strategy_goal_masks(strategy)
    src_a = np.array(src, dtype=np.int64)
    dst_a = np.array(dst, dtype=np.int64)
    for j, goal in enumerate(sys_goals):
        keep = ~goal[src_a] & ~goal[dst_a]
        g = csr_matrix((np.ones(int(keep.sum())), (src_a[keep], dst_a[keep])), shape=(n, n))
        _, labels = connected_components(g, directed=True, connection="strong")
        sizes = np.bincount(labels, minlength=n)
        cyclic = sizes[labels] > 1
        self_loop = np.zeros(n, dtype=bool)
        loops = keep & (src_a == dst_a)
        self_loop[src_a[loops]] = True
        cyclic |= self_loop
        cyclic &= ~goal
        for comp in np.unique(labels[cyclic]):
            members = (labels == comp) & cyclic
            if all((members & eg).any() for eg in env_goals):
                rep.liveness.append(
                    f"cycle through states {np.flatnonzero(members).tolist()[:8]} avoids system goal {j}")
    return rep


def random_rollouts(strategy: Strategy, count: int, seed: int, prefix: int = 16,
                    max_steps: int = 400, checker: Optional[TraceChecker] = None):
    """Run ``count`` random admissible environments against ``strategy``.

    Each rollout plays ``prefix`` uniformly random admissible inputs, then
    fixes a random input per machine state so the run closes a lasso. Both
    phases are checked with :func:`verify_trace`. Returns the rollouts that
    reported a system failure as (trace, violations) pairs, and the number
    of lassos closed.
    """
    checker = checker or TraceChecker(strategy.spec)
    root = np.random.SeedSequence(seed)
    bad = []
    lassos = 0
    inputs = sorted(strategy.initial)
    rows = [sorted(r) for r in strategy.table]
    for child in root.spawn(count):
        rng = np.random.Generator(np.random.Philox(child))
        _, k = strategy.initial[inputs[int(rng.integers(len(inputs)))]]
        order = [k]
        for _ in range(prefix):
            keys = rows[k]
            if not keys:
                break
            _, k = strategy.table[k][keys[int(rng.integers(len(keys)))]]
            order.append(k)
        choice: Dict[int, int] = {}
        where = {k: len(order) - 1}
        loop = None
        for _ in range(max_steps):
            keys = rows[k]
            if not keys:
                break
            if k not in choice:
                choice[k] = keys[int(rng.integers(len(keys)))]
            _, k = strategy.table[k][choice[k]]
            if k in where:
                loop = where[k]
                break
            where[k] = len(order)
            order.append(k)
        trace = Trace([strategy.state_valuation(s) for s in order], list(order), None, loop)
        lassos += loop is not None
        fails = sys_failures(verify_trace(trace, strategy.spec, checker))
        if fails:
            bad.append((trace, fails))
    return bad, lassos
