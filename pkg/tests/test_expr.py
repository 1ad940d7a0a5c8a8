import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gr1perception import expr as E
from gr1perception.expr import Atom, EvalError, Implies, Not
from gr1perception.parser import parse_expr

NAMES = ("a", "b", "c", "d")


def _py(e):
    """Python source for ``e``, evaluated by the interpreter as the oracle."""
    if isinstance(e, E.Const):
        return repr(e.value)
    if isinstance(e, Atom):
        side = "N" if e.primed else "V"
        return f"({side}[{e.var!r}] == {e.value!r})"
    if isinstance(e, Not):
        return f"(not {_py(e.arg)})"
    if isinstance(e, E.And):
        return "(" + " and ".join(_py(a) for a in e.args) + ")" if e.args else "True"
    if isinstance(e, E.Or):
        return "(" + " or ".join(_py(a) for a in e.args) + ")" if e.args else "False"
    if isinstance(e, Implies):
        return f"((not {_py(e.left)}) or {_py(e.right)})"
    raise TypeError(e)


def _leaves():
    return st.builds(Atom, st.sampled_from(NAMES), st.just("true"), st.booleans()) | \
        st.sampled_from([E.TRUE, E.FALSE])


exprs = st.recursive(
    _leaves(),
    lambda sub: st.one_of(
        st.builds(Not, sub),
        st.builds(lambda xs: E.And(tuple(xs)), st.lists(sub, min_size=2, max_size=3)),
        st.builds(lambda xs: E.Or(tuple(xs)), st.lists(sub, min_size=2, max_size=3)),
        st.builds(Implies, sub, sub),
    ),
    max_leaves=10,
)


def _all_pairs():
    for now in itertools.product(E.BOOL_DOMAIN, repeat=len(NAMES)):
        for nxt in itertools.product(E.BOOL_DOMAIN, repeat=len(NAMES)):
            yield dict(zip(NAMES, now)), dict(zip(NAMES, nxt))


PAIRS = list(_all_pairs())


def test_work_zone_guarantee_truth_table():
    f = Implies(Atom("work_zone", primed=True), Atom("move_slow", primed=True))
    rows = 0
    for wz, ms, wz2, ms2 in itertools.product((False, True), repeat=4):
        now = {"work_zone": wz, "move_slow": ms}
        nxt = {"work_zone": wz2, "move_slow": ms2}
        assert E.eval_expr(f, now, nxt) == (not wz2 or ms2)
        rows += 1
    assert rows == 16


def test_work_zone_example_value():
    f = Implies(Atom("work_zone", primed=True), Atom("move_slow", primed=True))
    assert E.eval_expr(f, {"work_zone": "false", "move_slow": "false"},
                       {"work_zone": "true", "move_slow": "true"})


def test_true_is_true_anywhere():
    assert E.eval_expr(E.TRUE, {})
    assert E.eval_expr(E.TRUE, {"a": "false"}, {"a": "true"})


def test_missing_next_and_missing_variable():
    with pytest.raises(EvalError, match="next valuation"):
        E.eval_expr(Atom("a", primed=True), {"a": "true"})
    with pytest.raises(EvalError, match="missing"):
        E.eval_expr(Atom("zz"), {"a": "true"})


@settings(max_examples=150, deadline=None)
@given(exprs)
def test_eval_matches_python_truth_table(e):
    code = compile(_py(e), "<oracle>", "eval")
    for now, nxt in PAIRS[::7]:
        assert E.eval_expr(e, now, nxt) == eval(code, {"V": now, "N": nxt})


@settings(max_examples=100, deadline=None)
@given(exprs)
def test_nnf_preserves_meaning_and_pushes_negation(e):
    n = E.nnf(e)
    for now, nxt in PAIRS[::13]:
        assert E.eval_expr(n, now, nxt) == E.eval_expr(e, now, nxt)

    def check(x):
        assert not isinstance(x, Implies)
        if isinstance(x, Not):
            assert isinstance(x.arg, Atom)
        for child in getattr(x, "args", ()):
            check(child)
    check(n)


@settings(max_examples=100, deadline=None)
@given(exprs)
def test_compile_array_agrees_with_eval(e):
    domains = {n: E.BOOL_DOMAIN for n in NAMES}
    f = E.compile_array(e, domains)
    sample = PAIRS[::11]
    now = {n: np.array([E.BOOL_DOMAIN.index(p[0][n]) for p in sample]) for n in NAMES}
    nxt = {n: np.array([E.BOOL_DOMAIN.index(p[1][n]) for p in sample]) for n in NAMES}
    got = np.broadcast_to(f(now, nxt), (len(sample),))
    assert got.tolist() == [E.eval_expr(e, a, b) for a, b in sample]


@settings(max_examples=100, deadline=None)
@given(exprs)
def test_text_round_trip(e):
    domains = {n: E.BOOL_DOMAIN for n in NAMES}
    text = E.to_text(e, set(NAMES))
    back = parse_expr(text, domains)
    assert E.to_text(back, set(NAMES)) == text
    for now, nxt in PAIRS[::17]:
        assert E.eval_expr(back, now, nxt) == E.eval_expr(e, now, nxt)


@settings(max_examples=100, deadline=None)
@given(exprs)
def test_json_round_trip(e):
    assert E.from_json(E.to_json(e)) == e


def test_finite_domain_atoms():
    e = E.one_of("o3", ["minor_crossroads", "yield"], primed=True)
    assert E.eval_expr(e, {}, {"o3": "yield"})
    assert not E.eval_expr(e, {}, {"o3": "empty"})
    assert E.support(e) == {("o3", True)}
    assert E.has_primed(e)


def test_nxt_primes_every_atom():
    e = E.nxt(Atom("a") & ~Atom("b"))
    assert all(a.primed for a in E.atoms(e))


def test_python_booleans_accepted():
    assert E.eval_expr(Atom("a"), {"a": True})
    assert not E.eval_expr(Atom("a"), {"a": False})
