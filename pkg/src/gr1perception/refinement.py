"""Perception refinement trees and the environment constraints they induce.

A refinement tree orders perception propositions from coarse (the root:
some object is there) to fine (the leaves: the exact object). Leaves are
*ground* variables, internal nodes *derived* ones. Detections persist and
only ever refine toward descendants; the functions below turn that into
environment safety formulas, either for one tracked object with a Boolean
atom per node or for a corridor of perception cells that shift one cell
per step toward the ego vehicle.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

from . import expr as E
from .expr import Atom, Expr

EMPTY = "empty"


class TreeError(ValueError):
    pass


@dataclass(frozen=True)
class RefinementTree:
    nodes: Tuple[str, ...]
    children_of: Tuple[Tuple[str, Tuple[str, ...]], ...]
    root: str

    @property
    def _children(self) -> Dict[str, Tuple[str, ...]]:
        return dict(self.children_of)

    def children(self, v: str) -> Tuple[str, ...]:
        return self._children.get(v, ())

    def parent(self, v: str) -> Optional[str]:
        for p, cs in self.children_of:
            if v in cs:
                return p
        return None

    def is_leaf(self, v: str) -> bool:
        return not self.children(v)

    def path(self, v: str) -> List[str]:
        """Nodes from the root down to ``v``."""
        out = [v]
        while out[-1] != self.root:
            out.append(self.parent(out[-1]))
        return out[::-1]

    def level(self, v: str) -> int:
        return len(self.path(v)) - 1

    @property
    def depth(self) -> int:
        """Number of layers; a lone root has depth 1."""
        return 1 + max(self.level(v) for v in self.nodes)

    def descendants(self, v: str) -> List[str]:
        out, todo = [], list(self.children(v))
        while todo:
            c = todo.pop(0)
            out.append(c)
            todo.extend(self.children(c))
        return out

    def bfs(self) -> List[str]:
        return [self.root] + self.descendants(self.root)

    @property
    def leaves(self) -> List[str]:
        return [v for v in self.bfs() if self.is_leaf(v)]

    @property
    def edges(self) -> List[Tuple[str, str]]:
        return [(p, c) for p in self.bfs() for c in self.children(p)]

    def to_json(self) -> dict:
        return {"nodes": list(self.nodes), "edges": [list(e) for e in self.edges], "root": self.root}

    def to_dot(self, name: str = "refinement") -> str:
        lines = [f"digraph {name} {{", "  node [shape=box];"]
        for v in self.bfs():
            shape = "box" if self.is_leaf(v) else "ellipse"
            lines.append(f'  "{v}" [shape={shape}];')
        for p, c in self.edges:
            lines.append(f'  "{p}" -> "{c}";')
        lines.append("}")
        return "\n".join(lines) + "\n"


def build_tree(nodes: Iterable[str], edges: Iterable[Tuple[str, str]]) -> RefinementTree:
    """Validate ``edges`` (parent, child) over ``nodes`` as a directed tree."""
    nodes = tuple(dict.fromkeys(nodes))
    if not nodes:
        raise TreeError("a tree needs at least one node")
    known = set(nodes)
    parent: Dict[str, str] = {}
    children: Dict[str, List[str]] = {v: [] for v in nodes}
    for p, c in edges:
        for v in (p, c):
            if v not in known:
                raise TreeError(f"edge endpoint {v!r} is not a node")
        if c in parent and parent[c] != p:
            raise TreeError(f"multiple parents: {c!r} has parents {parent[c]!r} and {p!r}")
        if c in parent:
            continue
        parent[c] = p
        children[p].append(c)
    roots = [v for v in nodes if v not in parent]
    reached = set()
    todo = list(roots)
    while todo:
        v = todo.pop()
        reached.add(v)
        todo.extend(children[v])
    cyclic = [v for v in nodes if v not in reached]
    if cyclic:
        raise TreeError(f"cycle detected through {sorted(cyclic)}")
    if len(roots) > 1:
        lonely = [v for v in roots if not children[v]]
        if lonely:
            raise TreeError(f"disconnected node {lonely[0]!r}")
        raise TreeError(f"multiple roots {roots}")
    return RefinementTree(nodes, tuple((v, tuple(children[v])) for v in nodes if children[v]), roots[0])


def tree_from_json(d: dict) -> RefinementTree:
    tree = build_tree(d["nodes"], [tuple(e) for e in d["edges"]])
    if "root" in d and d["root"] != tree.root:
        raise TreeError(f"declared root {d['root']!r} differs from the structural root {tree.root!r}")
    return tree


def load_tree(path) -> RefinementTree:
    with open(path) as fh:
        return tree_from_json(json.load(fh))


def chain(names: Sequence[str]) -> RefinementTree:
    """Linear tree ``names[0] -> names[1] -> ...``."""
    return build_tree(names, zip(names, names[1:]))


@dataclass(frozen=True)
class VariablePartition:
    ground: frozenset
    derived: frozenset


def partition(tree: RefinementTree) -> VariablePartition:
    leaves = frozenset(tree.leaves)
    return VariablePartition(leaves, frozenset(tree.nodes) - leaves)


# -- one tracked object, a Boolean atom per node ----------------------------------------

def compile_persistence(tree: RefinementTree, release: Optional[Expr] = None) -> List[Expr]:
    """Detections persist or refine: ``v -> next(v | children(v))``.

    Ground nodes get ``v -> next(v)``. With ``release`` the obligation is
    lifted on steps where ``release`` holds (``v & !release -> ...``), which
    lets a scenario end once the object has been dealt with.
    """
    out = []
    for v in tree.bfs():
        keep = E.disj([Atom(v, primed=True)] + [Atom(c, primed=True) for c in tree.children(v)])
        guard = Atom(v) if release is None else E.And((Atom(v), E.Not(release)))
        out.append(E.Implies(guard, keep))
    return out


def compile_consistency(tree: RefinementTree, primed: bool = True) -> List[Expr]:
    """A refinement keeps its ancestors asserted: ``child -> parent``."""
    return [E.Implies(Atom(c, primed=primed), Atom(p, primed=primed)) for p, c in tree.edges]


def single_path(tree: RefinementTree, primed: bool = True) -> List[Expr]:
    """Siblings exclude each other, so the true atoms form one root path."""
    out = []
    for p in tree.bfs():
        cs = tree.children(p)
        for i, a in enumerate(cs):
            for b in cs[i + 1:]:
                out.append(E.Not(E.And((Atom(a, primed=primed), Atom(b, primed=primed)))))
    return out


# -- perception cells ------------------------------------------------------------------------

@dataclass(frozen=True)
class PerceptionCell:
    """Perception variable ``o<index>``; index 1 is nearest the ego vehicle."""
    index: int
    domain: Tuple[str, ...]

    @property
    def name(self) -> str:
        return f"o{self.index}"


def sign_cells(tree: RefinementTree, count: int = 7, coarse: int = 2, middle: int = 2) -> List[PerceptionCell]:
    """Cells whose resolution grows toward the ego vehicle.

    The ``coarse`` farthest cells see only the root, the next ``middle``
    cells see the root's children, the rest see ground values. Every cell
    may also be empty.
    """
    levels = {0: [tree.root], 1: list(tree.children(tree.root)), 2: tree.leaves}
    cells = []
    for k in range(count, 0, -1):
        if k > count - coarse:
            lvl = 0
        elif k > count - coarse - middle:
            lvl = 1
        else:
            lvl = 2
        cells.append(PerceptionCell(k, (EMPTY, *levels[lvl])))
    return sorted(cells, key=lambda c: c.index)


def compile_pipeline(cells: Sequence[PerceptionCell], tree: RefinementTree,
                     occlusion: bool = False) -> List[Expr]:
    """Shift-and-refine constraints between neighbouring cells.

    For each cell ``o_i`` (except the nearest) and each value ``v`` of its
    domain: an object seen as ``v`` at ``o_i`` is seen next step at
    ``o_{i-1}`` as ``v`` or one of its descendants, restricted to what
    ``o_{i-1}`` can represent; an empty ``o_i`` stays empty at ``o_{i-1}``.
    With ``occlusion`` the empty rule is dropped, so objects hidden so far
    may appear in any cell.
    """
    cells = sorted(cells, key=lambda c: c.index)
    known = set(tree.nodes)
    for c in cells:
        for v in c.domain:
            if v != EMPTY and v not in known:
                raise TreeError(f"cell {c.name}: value {v!r} is not a tree node")
    out = []
    for near, far in zip(cells, cells[1:]):
        for v in far.domain:
            if v == EMPTY:
                if occlusion:
                    continue
                if EMPTY not in near.domain:
                    raise TreeError(f"cell {near.name} cannot be empty after {far.name}")
                allowed = [EMPTY]
            else:
                reach = {v, *tree.descendants(v)}
                allowed = [u for u in near.domain if u in reach]
                if not allowed:
                    raise TreeError(f"{far.name} = {v} has no refinement in the domain of {near.name}")
            out.append(E.Implies(Atom(far.name, v), E.one_of(near.name, allowed, primed=True)))
    return out
