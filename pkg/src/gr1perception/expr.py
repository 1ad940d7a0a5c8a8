"""Boolean formula AST with a ``next`` operator on atoms.

Formulas are immutable dataclasses. Atoms compare a variable against one
value of its domain, optionally on the next step (``primed``). Disjunction
and implication are kept as first-class nodes; :func:`nnf` rewrites a
formula into negation normal form when a caller needs it.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Optional

import numpy as np

TRUE_VALUE = "true"
FALSE_VALUE = "false"
BOOL_DOMAIN = (FALSE_VALUE, TRUE_VALUE)


class Expr:
    """Base class of formula nodes."""

    __slots__ = ()

    def __and__(self, other: Expr) -> Expr:
        return And((self, other))

    def __or__(self, other: Expr) -> Expr:
        return Or((self, other))

    def __invert__(self) -> Expr:
        return Not(self)

    def __rshift__(self, other: Expr) -> Expr:
        return Implies(self, other)

    def __str__(self) -> str:
        return to_text(self)


@dataclass(frozen=True, repr=False)
class Const(Expr):
    value: bool

    def __repr__(self) -> str:
        return f"Const({self.value})"


TRUE = Const(True)
FALSE = Const(False)


@dataclass(frozen=True, repr=False)
class Atom(Expr):
    var: str
    value: str = TRUE_VALUE
    primed: bool = False

    def __repr__(self) -> str:
        return f"Atom({self.var!r}, {self.value!r}{', primed=True' if self.primed else ''})"


@dataclass(frozen=True, repr=False)
class Not(Expr):
    arg: Expr

    def __repr__(self) -> str:
        return f"Not({self.arg!r})"


@dataclass(frozen=True, repr=False)
class And(Expr):
    args: tuple

    def __repr__(self) -> str:
        return f"And({self.args!r})"


@dataclass(frozen=True, repr=False)
class Or(Expr):
    args: tuple

    def __repr__(self) -> str:
        return f"Or({self.args!r})"


@dataclass(frozen=True, repr=False)
class Implies(Expr):
    left: Expr
    right: Expr

    def __repr__(self) -> str:
        return f"Implies({self.left!r}, {self.right!r})"


class EvalError(ValueError):
    pass


# -- construction helpers -------------------------------------------------

def var(name: str, value: str = TRUE_VALUE) -> Atom:
    return Atom(name, value)


def nxt(e: Expr) -> Expr:
    """Push the next operator down to the atoms of ``e``."""
    if isinstance(e, Const):
        return e
    if isinstance(e, Atom):
        if e.primed:
            raise ValueError(f"nested next on {e.var}")
        return Atom(e.var, e.value, True)
    if isinstance(e, Not):
        return Not(nxt(e.arg))
    if isinstance(e, And):
        return And(tuple(nxt(a) for a in e.args))
    if isinstance(e, Or):
        return Or(tuple(nxt(a) for a in e.args))
    if isinstance(e, Implies):
        return Implies(nxt(e.left), nxt(e.right))
    raise TypeError(e)


def conj(parts) -> Expr:
    parts = tuple(parts)
    if not parts:
        return TRUE
    if len(parts) == 1:
        return parts[0]
    return And(parts)


def disj(parts) -> Expr:
    parts = tuple(parts)
    if not parts:
        return FALSE
    if len(parts) == 1:
        return parts[0]
    return Or(parts)


def one_of(name: str, values, primed: bool = False) -> Expr:
    return disj(Atom(name, v, primed) for v in values)


# -- inspection -------------------------------------------------------------

def atoms(e: Expr):
    """Yield every atom of ``e`` in left-to-right order."""
    if isinstance(e, Atom):
        yield e
    elif isinstance(e, Not):
        yield from atoms(e.arg)
    elif isinstance(e, (And, Or)):
        for a in e.args:
            yield from atoms(a)
    elif isinstance(e, Implies):
        yield from atoms(e.left)
        yield from atoms(e.right)


def support(e: Expr) -> set:
    """Set of ``(var, primed)`` pairs read by ``e``."""
    return {(a.var, a.primed) for a in atoms(e)}


def has_primed(e: Expr) -> bool:
    return any(a.primed for a in atoms(e))


# -- semantics -----------------------------------------------------------------

def _norm(value) -> str:
    if value is True:
        return TRUE_VALUE
    if value is False:
        return FALSE_VALUE
    return value


def eval_expr(e: Expr, now: Mapping, next: Optional[Mapping] = None) -> bool:
    """Evaluate ``e`` classically; primed atoms read from ``next``.

    Valuations map variable names to value symbols. Python booleans are
    accepted for Boolean variables.
    """
    if isinstance(e, Const):
        return e.value
    if isinstance(e, Atom):
        if e.primed:
            if next is None:
                raise EvalError(f"next valuation required for next({e.var})")
            source = next
        else:
            source = now
        try:
            return _norm(source[e.var]) == e.value
        except KeyError:
            raise EvalError(f"variable {e.var!r} missing from valuation") from None
    if isinstance(e, Not):
        return not eval_expr(e.arg, now, next)
    if isinstance(e, And):
        return all(eval_expr(a, now, next) for a in e.args)
    if isinstance(e, Or):
        return any(eval_expr(a, now, next) for a in e.args)
    if isinstance(e, Implies):
        return (not eval_expr(e.left, now, next)) or eval_expr(e.right, now, next)
    raise TypeError(e)


def nnf(e: Expr, negate: bool = False) -> Expr:
    """Negation normal form: implications removed, negations on atoms only."""
    if isinstance(e, Const):
        return Const(e.value != negate)
    if isinstance(e, Atom):
        return Not(e) if negate else e
    if isinstance(e, Not):
        return nnf(e.arg, not negate)
    if isinstance(e, And):
        parts = tuple(nnf(a, negate) for a in e.args)
        return Or(parts) if negate else And(parts)
    if isinstance(e, Or):
        parts = tuple(nnf(a, negate) for a in e.args)
        return And(parts) if negate else Or(parts)
    if isinstance(e, Implies):
        if negate:
            return And((nnf(e.left), nnf(e.right, True)))
        return Or((nnf(e.left, True), nnf(e.right)))
    raise TypeError(e)


def compile_array(e: Expr, domains: Mapping):
    """Return ``f(now, nxt)`` evaluating ``e`` on arrays of value indices.

    ``now`` and ``nxt`` map variable names to integer arrays (value index
    into ``domains[name]``). Arrays are combined with numpy broadcasting,
    so callers can evaluate a formula over a cross product at once.
    """
    if isinstance(e, Const):
        value = e.value
        return lambda now, n: np.bool_(value)
    if isinstance(e, Atom):
        name, idx = e.var, domains[e.var].index(e.value)
        if e.primed:
            return lambda now, n: n[name] == idx
        return lambda now, n: now[name] == idx
    if isinstance(e, Not):
        f = compile_array(e.arg, domains)
        return lambda now, n: ~f(now, n)
    if isinstance(e, (And, Or)):
        fs = [compile_array(a, domains) for a in e.args]
        op = np.logical_and if isinstance(e, And) else np.logical_or

        def combine(now, n):
            out = fs[0](now, n)
            for f in fs[1:]:
                out = op(out, f(now, n))
            return out
        return combine
    if isinstance(e, Implies):
        fl = compile_array(e.left, domains)
        fr = compile_array(e.right, domains)
        return lambda now, n: np.logical_or(~fl(now, n), fr(now, n))
    raise TypeError(e)


# -- concrete syntax -------------------------------------------------------------

_PREC = {Implies: 1, Or: 2, And: 3, Not: 4, Atom: 5, Const: 5}


def _atom_text(a: Atom, bool_vars) -> str:
    if a.var in bool_vars and a.value == TRUE_VALUE:
        body = a.var
    else:
        body = f"{a.var} = {a.value}"
    return f"next({body})" if a.primed else body


def to_text(e: Expr, bool_vars=None) -> str:
    """Render ``e`` in the text syntax read by :mod:`gr1perception.parser`.

    ``bool_vars`` lists the Boolean variables, whose ``= true`` atoms print
    bare. Without it every atom whose value is ``true`` prints bare.
    """
    if bool_vars is None:
        bool_vars = {a.var for a in atoms(e) if a.value == TRUE_VALUE}

    def wrap(child: Expr, parent_prec: int, strict: bool) -> str:
        text = go(child)
        p = _PREC[type(child)]
        if p < parent_prec or (strict and p == parent_prec):
            return f"({text})"
        return text

    def go(x: Expr) -> str:
        if isinstance(x, Const):
            return "true" if x.value else "false"
        if isinstance(x, Atom):
            return _atom_text(x, bool_vars)
        if isinstance(x, Not):
            return "!" + wrap(x.arg, 4, False)
        if isinstance(x, And):
            return " & ".join(wrap(a, 3, True) for a in x.args)
        if isinstance(x, Or):
            return " | ".join(wrap(a, 2, True) for a in x.args)
        if isinstance(x, Implies):
            return f"{wrap(x.left, 1, True)} -> {wrap(x.right, 1, False)}"
        raise TypeError(x)

    return go(e)


def to_json(e: Expr) -> dict:
    if isinstance(e, Const):
        return {"op": "const", "value": e.value}
    if isinstance(e, Atom):
        return {"op": "atom", "var": e.var, "value": e.value, "next": e.primed}
    if isinstance(e, Not):
        return {"op": "not", "arg": to_json(e.arg)}
    if isinstance(e, (And, Or)):
        return {"op": "and" if isinstance(e, And) else "or",
                "args": [to_json(a) for a in e.args]}
    if isinstance(e, Implies):
        return {"op": "implies", "left": to_json(e.left), "right": to_json(e.right)}
    raise TypeError(e)


def from_json(d: dict) -> Expr:
    op = d["op"]
    if op == "const":
        return Const(bool(d["value"]))
    if op == "atom":
        return Atom(d["var"], d["value"], bool(d.get("next", False)))
    if op == "not":
        return Not(from_json(d["arg"]))
    if op == "and":
        return And(tuple(from_json(a) for a in d["args"]))
    if op == "or":
        return Or(tuple(from_json(a) for a in d["args"]))
    if op == "implies":
        return Implies(from_json(d["left"]), from_json(d["right"]))
    raise ValueError(f"unknown op {op!r}")
