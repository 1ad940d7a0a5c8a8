from conftest import synthesized
from gr1perception import scenarios
from gr1perception.strategy import Trace, closed_loop
from gr1perception.verify import explore, model_check, random_rollouts, sys_failures, verify_trace

LADDER = [
    {},
    {"sign_present"},
    {"sign_present", "sign_red"},
    {"sign_present", "sign_red", "sign_hexagonal"},
    {"sign_present", "sign_red", "sign_hexagonal", "stop_sign"},
    {},
]


def _stop_env(on):
    return {n: n in on for n in scenarios.STOP_TREE}


def _action(state):
    (act,) = [a for a in scenarios.STOP_ACTIONS if state[a] == "true"]
    return act


def test_work_zone_everywhere(work_zone_strategy):
    # the initial condition keeps the first step clear
    policy = lambda hist: {"work_zone": bool(hist)}
    trace = closed_loop(work_zone_strategy, policy, 12)
    assert trace.env_violation is None
    assert [s["move_slow"] for s in trace.states] == ["false"] + ["true"] * 11
    assert verify_trace(trace, work_zone_strategy.spec) == []


def test_zero_steps(work_zone_strategy):
    trace = closed_loop(work_zone_strategy, lambda h: {"work_zone": False}, 0)
    assert len(trace) == 0 and trace.env_violation is None
    assert verify_trace(trace, work_zone_strategy.spec) == []


def test_stop_sign_ladder(stop_sign_strategy):
    trace = closed_loop(stop_sign_strategy, lambda h: _stop_env(LADDER[len(h)]), len(LADDER))
    assert trace.env_violation is None
    assert [_action(s) for s in trace.states] == [
        "move", "attention", "slow_down", "prepare_to_stop", "stop", "move"]
    assert sys_failures(verify_trace(trace, stop_sign_strategy.spec)) == []


def test_env_violation_is_flagged(stop_sign_strategy):
    # a stop sign out of nowhere skips the persistence chain
    script = [set(), {"stop_sign"}, set()]
    trace = closed_loop(stop_sign_strategy, lambda h: _stop_env(script[len(h)]), 3)
    assert trace.env_violation == 1
    vs = verify_trace(trace, stop_sign_strategy.spec)
    assert any(v.side == "env" and v.step == 1 for v in vs)
    assert all(v.after_env_violation for v in vs if v.side == "sys" and v.step > 1)


def test_ignoring_the_work_zone_is_caught():
    spec = scenarios.work_zone()
    trace = Trace([
        {"work_zone": "false", "move_slow": "false"},
        {"work_zone": "false", "move_slow": "false"},
        {"work_zone": "true", "move_slow": "false"},
    ])
    (v,) = verify_trace(trace, spec)
    assert (v.step, v.side, v.kind, v.index) == (2, "sys", "safety", 0)
    assert v.formula == "next(work_zone) -> next(move_slow)"
    assert not v.after_env_violation


def test_lasso_that_never_moves():
    spec = scenarios.stop_sign()
    idle = {**_stop_env(set()), **{a: "false" for a in scenarios.STOP_ACTIONS}}
    idle["stop"] = "true"
    trace = Trace([idle, idle], loop_start=0)
    vs = verify_trace(trace, spec)
    prog = [v for v in vs if v.kind == "progress"]
    assert [(v.side, v.formula) for v in prog] == [("sys", "move")]
    assert not prog[0].after_env_violation


def test_progress_excused_when_env_starves_its_goal():
    spec = scenarios.work_zone()
    busy = {"work_zone": "true", "move_slow": "true"}
    trace = Trace([{"work_zone": "false", "move_slow": "false"}, busy, busy], loop_start=1)
    vs = verify_trace(trace, spec)
    sys_prog = [v for v in vs if v.side == "sys" and v.kind == "progress"]
    assert sys_prog and all(v.after_env_violation for v in sys_prog)
    assert sys_failures(vs) == []


def test_explore_counts_walks(work_zone_strategy):
    rep = explore(work_zone_strategy, 5)
    # one admissible first input, then two per step
    assert rep.paths == 2 ** 4
    assert rep.violations == []


def test_model_check_and_rollouts_on_small_fixtures():
    for name in ("work_zone", "stop_sign", "minimal"):
        strat = synthesized(name).strategy
        assert model_check(strat).ok
        bad, lassos = random_rollouts(strat, 200, seed=3)
        assert bad == [] and lassos == 200


def test_non_strict_strategy_breaks_a_guarantee_first():
    strat = synthesized("strictness", strict=False).strategy
    trace = closed_loop(strat, lambda h: {"x": False}, 3)
    # the controller raises y at once, which breaks both its initial guarantee
    # and the environment's assumption on the next step
    assert trace.states[0]["y"] == "true"
    assert trace.env_violation == 1
