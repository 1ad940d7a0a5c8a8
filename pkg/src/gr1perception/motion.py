"""Weighted transition systems, cell corridors and the reaction-distance metric."""
from __future__ import annotations

import heapq
import json
from dataclasses import dataclass, field
from typing import Dict, FrozenSet, List, Optional, Sequence, Tuple, Union

MOVING = "moving"
STATIONARY = "stationary"


class MotionError(ValueError):
    pass


class NoPath(MotionError):
    pass


@dataclass(frozen=True)
class TransitionSystem:
    """Weighted deterministic transition system.

    ``transitions`` maps ``(a, b)`` to a positive weight; ``labels`` maps a
    state to the propositions true there.
    """
    states: Tuple
    initial: object
    transitions: Dict[tuple, float]
    labels: Dict[object, FrozenSet[str]] = field(default_factory=dict)

    def __post_init__(self):
        known = set(self.states)
        if len(known) != len(self.states):
            raise MotionError("repeated state")
        if self.initial not in known:
            raise MotionError(f"initial state {self.initial!r} is not a state")
        for (a, b), w in self.transitions.items():
            if a not in known or b not in known:
                raise MotionError(f"transition {a!r} -> {b!r} leaves the state set")
            if not w > 0:
                raise MotionError(f"transition {a!r} -> {b!r} has non-positive weight {w}")

    @property
    def propositions(self) -> FrozenSet[str]:
        return frozenset().union(*self.labels.values()) if self.labels else frozenset()

    def successors(self, a) -> List:
        order = {s: i for i, s in enumerate(self.states)}
        return sorted((b for (x, b) in self.transitions if x == a), key=order.__getitem__)

    def label(self, s) -> FrozenSet[str]:
        return self.labels.get(s, frozenset())

    def output_trajectory(self, xs: Sequence) -> List[FrozenSet[str]]:
        return [self.label(x) for x in xs]

    def to_json(self) -> dict:
        return {
            "states": [_jsonable(s) for s in self.states],
            "initial": _jsonable(self.initial),
            "transitions": [[_jsonable(a), _jsonable(b), w] for (a, b), w in self.transitions.items()],
            "labels": [[_jsonable(s), sorted(self.label(s))] for s in self.states],
        }

    @classmethod
    def from_json(cls, d: dict) -> "TransitionSystem":
        conv = lambda s: tuple(s) if isinstance(s, list) else s
        return cls(
            tuple(conv(s) for s in d["states"]), conv(d["initial"]),
            {(conv(a), conv(b)): float(w) for a, b, w in d["transitions"]},
            {conv(s): frozenset(ls) for s, ls in d.get("labels", [])},
        )

    def to_dot(self, name: str = "ts") -> str:
        lines = [f"digraph {name} {{", "  rankdir=LR;"]
        for s in self.states:
            props = ",".join(sorted(self.label(s)))
            shape = "doublecircle" if s == self.initial else "circle"
            lines.append(f'  "{_dot_id(s)}" [shape={shape}, label="{_dot_id(s)}\\n{props}"];')
        for (a, b), w in self.transitions.items():
            lines.append(f'  "{_dot_id(a)}" -> "{_dot_id(b)}" [label="{w:g}"];')
        lines.append("}")
        return "\n".join(lines) + "\n"


def _jsonable(s):
    return list(s) if isinstance(s, tuple) else s


def _dot_id(s) -> str:
    return "|".join(map(str, s)) if isinstance(s, tuple) else str(s)


def trajectory_weight(ts: TransitionSystem, xs: Sequence) -> float:
    """Sum of transition weights along ``xs``; 0 for a single state."""
    if not xs:
        raise MotionError("empty trajectory")
    total = 0.0
    for k, (a, b) in enumerate(zip(xs, xs[1:])):
        w = ts.transitions.get((a, b))
        if w is None:
            raise MotionError(f"{a!r} -> {b!r} at index {k} is not a transition")
        total += w
    return total


def min_weight_path(ts: TransitionSystem, a, b) -> Tuple[list, float]:
    """Cheapest path from ``a`` to ``b`` by Dijkstra.

    Ties go to the lexicographically smallest state sequence, comparing
    states by their position in ``ts.states``.
    """
    order = {s: i for i, s in enumerate(ts.states)}
    for s in (a, b):
        if s not in order:
            raise MotionError(f"{s!r} is not a state")
    out: Dict[int, List[Tuple[int, float]]] = {}
    for (x, y), w in ts.transitions.items():
        out.setdefault(order[x], []).append((order[y], w))
    start, goal = order[a], order[b]
    heap = [(0.0, (start,))]
    done = set()
    while heap:
        d, path = heapq.heappop(heap)
        u = path[-1]
        if u in done:
            continue
        done.add(u)
        if u == goal:
            return [ts.states[i] for i in path], d
        for v, w in out.get(u, ()):
            if v not in done:
                heapq.heappush(heap, (d + w, path + (v,)))
    raise NoPath(f"{b!r} is unreachable from {a!r}")


# -- cell corridors -------------------------------------------------------------------------

@dataclass(frozen=True)
class CellCorridor:
    """One-dimensional ego-frame cell decomposition ``c0 .. c{n-1}``.

    Neighbouring cells are connected both ways and every cell has a
    self-loop (standing still). ``weights[i]`` is the cost of moving
    between ``c{i}`` and ``c{i+1}``; the default is one per cell.
    """
    cells: int
    target: int = 0
    weights: Optional[Tuple[float, ...]] = None
    stay_weight: float = 1.0

    def __post_init__(self):
        if self.cells < 1:
            raise MotionError("a corridor needs at least one cell")
        if not 0 <= self.target < self.cells:
            raise MotionError(f"target index {self.target} outside 0..{self.cells - 1}")
        if self.weights is not None:
            if len(self.weights) != self.cells - 1:
                raise MotionError(f"expected {self.cells - 1} weights, got {len(self.weights)}")
            if any(not w > 0 for w in self.weights):
                raise MotionError("weights must be positive")
            object.__setattr__(self, "weights", tuple(float(w) for w in self.weights))
        if not self.stay_weight > 0:
            raise MotionError("weights must be positive")

    def name(self, i: int) -> str:
        return f"c{i}"

    def index(self, cell: Union[int, str]) -> int:
        if isinstance(cell, str):
            if not cell.startswith("c") or not cell[1:].isdigit():
                raise MotionError(f"bad cell name {cell!r}")
            cell = int(cell[1:])
        if not 0 <= cell < self.cells:
            raise MotionError(f"cell {cell} outside the corridor")
        return cell

    def step_weight(self, i: int) -> float:
        return 1.0 if self.weights is None else self.weights[i]

    def to_ts(self) -> TransitionSystem:
        names = tuple(self.name(i) for i in range(self.cells))
        trans = {}
        for i in range(self.cells):
            trans[(names[i], names[i])] = self.stay_weight
            if i + 1 < self.cells:
                w = self.step_weight(i)
                trans[(names[i], names[i + 1])] = w
                trans[(names[i + 1], names[i])] = w
        labels = {n: frozenset({f"at_{n}"} | ({"target"} if i == self.target else set()))
                  for i, n in enumerate(names)}
        return TransitionSystem(names, names[-1], trans, labels)

    def to_json(self) -> dict:
        d = {"cells": self.cells, "target": self.target, "stay_weight": self.stay_weight}
        if self.weights is not None:
            d["weights"] = list(self.weights)
        return d

    @classmethod
    def from_json(cls, d: dict) -> "CellCorridor":
        w = d.get("weights")
        return cls(int(d["cells"]), int(d.get("target", 0)), tuple(w) if w is not None else None,
                   float(d.get("stay_weight", 1.0)))


def load_corridor(path) -> CellCorridor:
    with open(path) as fh:
        return CellCorridor.from_json(json.load(fh))


def performance(corridor: CellCorridor, detection_cell: Union[int, str]) -> float:
    """Reaction distance: cheapest path weight from the detection cell to the target."""
    i = corridor.index(detection_cell)
    _, w = min_weight_path(corridor.to_ts(), corridor.name(i), corridor.name(corridor.target))
    return w


def movement_abstraction(source: Union[CellCorridor, TransitionSystem]) -> TransitionSystem:
    """Transition system over cell pairs ``(c1, c2)`` with ``c1 -> c2``.

    A pair is labelled ``stationary`` when ``c1 == c2`` and ``moving``
    otherwise, plus the location label of ``c2``. ``(c1, c2)`` steps to
    ``(c2, c3)`` with the weight of ``c2 -> c3``.
    """
    ts = source.to_ts() if isinstance(source, CellCorridor) else source
    order = {s: i for i, s in enumerate(ts.states)}
    pairs = sorted(ts.transitions, key=lambda p: (order[p[0]], order[p[1]]))
    trans = {}
    for (a, b) in pairs:
        for c in ts.successors(b):
            trans[((a, b), (b, c))] = ts.transitions[(b, c)]
    labels = {(a, b): frozenset({STATIONARY if a == b else MOVING}) | ts.label(b) for a, b in pairs}
    initial = (ts.initial, ts.initial) if (ts.initial, ts.initial) in ts.transitions else pairs[0]
    return TransitionSystem(tuple(pairs), initial, trans, labels)
