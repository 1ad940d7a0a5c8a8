import itertools

import numpy as np
import pytest
from hypothesis import HealthCheck, given, settings, strategies as st

from conftest import fixture_spec, synthesized
from oracles import BudgetExceeded, enumeration_realizable, parity_realizable, random_formula, random_spec
from gr1perception import expr as E
from gr1perception import scenarios
from gr1perception.expr import Atom
from gr1perception.game import NoInitialState, StateCapExceeded, build_game
from gr1perception.solver import Cpre, solve
from gr1perception.spec import from_json, to_json
from gr1perception.strategy import NotRealizable, Strategy, extract_strategy, synthesize


def _reachable_pairs(spec):
    """Reachable joint valuations by breadth-first search with plain formula evaluation."""
    envs = list(itertools.product(*(d.domain for d in spec.env_vars)))
    syss = list(itertools.product(*(d.domain for d in spec.sys_vars)))
    en = [d.name for d in spec.env_vars]
    sn = [d.name for d in spec.sys_vars]
    joint = lambda x, y: {**dict(zip(en, x)), **dict(zip(sn, y))}
    todo = [(x, y) for x in envs for y in syss
            if E.eval_expr(spec.theta_env, dict(zip(en, x))) and E.eval_expr(spec.theta_sys, joint(x, y))]
    seen = set(todo)
    while todo:
        x, y = todo.pop()
        now = joint(x, y)
        for x2 in envs:
            if not all(E.eval_expr(f, now, dict(zip(en, x2))) for f in spec.env_safety):
                continue
            for y2 in syss:
                if all(E.eval_expr(f, now, joint(x2, y2)) for f in spec.sys_safety):
                    if (x2, y2) not in seen:
                        seen.add((x2, y2))
                        todo.append((x2, y2))
    return seen


def test_work_zone_game_and_verdict():
    spec = scenarios.work_zone()
    game = build_game(spec, prune=False)
    assert game.num_nodes == 4
    assert game.stats["joint_valuations"] == 4
    # every environment move is admissible from every state
    assert np.all(np.diff(game.move_ptr) == 2)
    res = solve(game)
    assert res.realizable
    assert res.realizable == parity_realizable(spec) == enumeration_realizable(spec)
    assert len(res.winning_region) == 4


def test_theta_sys_false_is_unrealizable():
    spec = scenarios.theta_false()
    res = synthesize(spec)
    assert not res.realizable and res.strategy is None
    with pytest.raises(NotRealizable):
        extract_strategy(res)


def test_unsatisfiable_env_init():
    spec = scenarios.work_zone()
    spec.theta_env = E.FALSE
    with pytest.raises(NoInitialState):
        build_game(spec)


def test_state_cap(monkeypatch):
    spec = scenarios.stop_sign()
    with pytest.raises(StateCapExceeded):
        build_game(spec, state_cap=100)
    monkeypatch.setenv("GR1_STATE_CAP", "64")
    with pytest.raises(StateCapExceeded):
        build_game(spec)


@pytest.mark.parametrize("env_false, realizable", [(False, False), (True, True)])
def test_sys_safety_false(env_false, realizable):
    spec = scenarios.work_zone()
    spec.sys_safety = [E.FALSE]
    if env_false:
        spec.env_safety = [E.FALSE]
    assert synthesize(spec).realizable is realizable
    assert parity_realizable(spec) is realizable


def test_strictness_fixture_separates_semantics():
    spec = scenarios.strictness()
    assert not synthesize(spec, strict=True).realizable
    assert synthesize(spec, strict=False).realizable
    assert not parity_realizable(spec, strict=True)
    assert parity_realizable(spec, strict=False)


def test_random_specs_agree_with_oracles():
    rng = np.random.default_rng(2024)
    checked = enumerated = 0
    for _ in range(60):
        spec = random_spec(rng, 2, 2)
        for strict in (True, False):
            try:
                got = synthesize(spec, strict=strict).realizable
            except NoInitialState:
                continue
            assert got == parity_realizable(spec, strict=strict)
            checked += 1
            if strict:
                try:
                    assert got == enumeration_realizable(spec, budget=20_000)
                    enumerated += 1
                except BudgetExceeded:
                    pass
    assert checked > 80 and enumerated > 30


def test_stop_sign_state_count_matches_enumeration():
    spec = scenarios.stop_sign()
    game = build_game(spec)
    assert game.stats["joint_states"] == len(_reachable_pairs(spec)) == 5


def test_fixpoint_is_controlled_invariant():
    for name in scenarios.REALIZABLE:
        res = synthesized(name)
        z = res.winning
        assert np.all(Cpre(res.game)(z)[z])


def test_synthesis_is_deterministic():
    a = synthesize(fixture_spec("yield_incremental")).strategy.dumps()
    b = synthesize(fixture_spec("yield_incremental")).strategy.dumps()
    assert a == b


def test_strategy_inputs_are_exactly_the_admissible_ones():
    for name in ("work_zone", "stop_sign", "yield_baseline"):
        strat = synthesized(name).strategy
        spec = strat.spec
        envs = [dict(zip(strat.env_names, c)) for c in itertools.product(*(d.domain for d in spec.env_vars))]
        for k in range(len(strat.states)):
            now = strat.state_valuation(k)
            allowed = {strat.env_index(x) for x in envs
                       if all(E.eval_expr(f, now, x) for f in spec.env_safety)}
            assert set(strat.table[k]) == allowed


def test_goal_counter_advances_on_visits():
    strat = synthesized("stop_sign").strategy
    for k, (x, y, flag, goal) in enumerate(strat.states):
        hit = E.eval_expr(strat.spec.sys_progress[goal], strat.state_valuation(k))
        for _, to in strat.table[k].values():
            expect = (goal + 1) % strat.num_goals if hit else goal
            assert strat.states[to][3] == expect


def test_vacuous_strategy_collapses_to_one_state():
    strat = synthesized("minimal").strategy
    assert strat.minimal_size() == 1
    assert all(len(row) == 2 for row in strat.table)


def test_strategy_json_round_trip():
    strat = synthesized("stop_sign").strategy
    back = Strategy.from_json(strat.to_json())
    assert back.dumps() == strat.dumps()
    assert back.states == strat.states and back.table == strat.table
    assert strat.to_dot().startswith("digraph strategy")


def _extension(seed):
    rng = np.random.default_rng(seed)
    spec = random_spec(rng, 2, 2)
    env = [Atom(d.name) for d in spec.env_vars]
    sys_ = [Atom(d.name) for d in spec.sys_vars]
    envp = [Atom(d.name, primed=True) for d in spec.env_vars]
    sysp = [Atom(d.name, primed=True) for d in spec.sys_vars]
    extra_env = random_formula(rng, env + sys_ + envp, 2)
    extra_sys = random_formula(rng, env + sys_ + envp + sysp, 2)
    return spec, extra_env, extra_sys


def _region(spec):
    return solve(build_game(spec, prune=False)).winning_region


@settings(max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow])
@given(st.integers(0, 2 ** 32 - 1))
def test_winning_region_monotone_in_safety(seed):
    spec, extra_env, extra_sys = _extension(seed)
    try:
        base = _region(spec)
    except NoInitialState:
        return
    more_env = from_json(to_json(spec))
    more_env.env_safety.append(extra_env)
    more_sys = from_json(to_json(spec))
    more_sys.sys_safety.append(extra_sys)
    assert base <= _region(more_env)
    assert _region(more_sys) <= base
