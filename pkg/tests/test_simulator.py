import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import synthesized
from gr1perception import scenarios
from gr1perception.simulator import (BASELINE, INCREMENTAL, INFEASIBLE, NO_EVENT, MismatchError,
                                     ScenarioConfig, ScenarioError, check_strategy, compare,
                                     draw_label, expected_action, load_scenario, reveal,
                                     run_experiment, run_trial, sample_ground_truth, trial_streams)

ARMS = {
    ("yield", BASELINE): "yield_baseline",
    ("yield", INCREMENTAL): "yield_incremental",
    ("traffic_light", BASELINE): "traffic_light_baseline",
    ("traffic_light", INCREMENTAL): "traffic_light_incremental",
}


def strategy_for(config):
    return synthesized(ARMS[(config.event, config.mode)]).strategy


def flat(p, horizon=5):
    return {"derived": [p] * (horizon + 1), "ground": [p] * (horizon + 1)}


# -- ground truth ---------------------------------------------------------------------------

def test_point_mass():
    cfg = ScenarioConfig(ground_truth={"exact_sign": 1.0})
    rng = np.random.default_rng(0)
    assert all(sample_ground_truth(cfg, rng) == "exact_sign" for _ in range(200))
    cfg = ScenarioConfig(ground_truth={"none": 1.0})
    assert sample_ground_truth(cfg, rng) is None


def test_uniform_over_five_signs():
    signs = ["minor_crossroads", "traffic_signals_ahead", "yield", "pedestrian_crossing",
             "pedestrian_zone"]
    rng = np.random.Generator(np.random.Philox(11))
    n = 100_000
    draws = [draw_label({s: 0.2 for s in signs}, rng) for _ in range(n)]
    sigma = np.sqrt(n * 0.2 * 0.8)
    for s in signs:
        assert abs(draws.count(s) - 0.2 * n) < 3 * sigma


def test_streams_are_reproducible():
    a = [g.random(4).tolist() for g in trial_streams(5, 3)]
    b = [g.random(4).tolist() for g in trial_streams(5, 3)]
    c = [g.random(4).tolist() for g in trial_streams(6, 3)]
    assert a == b and a != c
    assert a[0] != a[1]


def test_config_validation():
    with pytest.raises(ScenarioError):
        ScenarioConfig(ground_truth={"exact_sign": 0.5})
    with pytest.raises(ScenarioError):
        ScenarioConfig(horizon=9, corridor_length=8)
    with pytest.raises(ScenarioError):
        ScenarioConfig(mode="both")
    with pytest.raises(ScenarioError):
        ScenarioConfig(schedule={"derived": [1.5] * 6, "ground": [0.0] * 6})
    with pytest.raises(ScenarioError):
        ScenarioConfig(event="roundabout")
    with pytest.raises(ScenarioError):
        ScenarioConfig.from_json({"event": "yield", "colour": "red"})


def test_scenario_files_load():
    for name in ("scenario_yield.json", "scenario_traffic_light.json"):
        cfg = load_scenario(scenarios.FIXTURE_DIR / name)
        assert ScenarioConfig.from_json(json.loads(json.dumps(cfg.to_json()))) == cfg


# -- revelation -------------------------------------------------------------------------------

def test_certain_detection_at_horizon_entry():
    cfg = ScenarioConfig(ground_truth={"exact_sign": 1.0},
                         schedule={"derived": [1.0] * 6, "ground": [0.0] * 6})
    r = run_trial(strategy_for(cfg), cfg, trial_streams(1, 1)[0])
    assert r.detections["sign_present"] == cfg.horizon
    assert r.detections["sign_shape"] == cfg.horizon - 2
    # the exact reading comes only from the ground detector, which never fires here
    assert "exact_sign" not in r.detections
    assert r.action == "yield_in_4" and r.s == 5


def test_nothing_detected_means_infeasible():
    cfg = ScenarioConfig(ground_truth={"exact_sign": 1.0}, schedule=flat(0.0), trials=20)
    hist, results = run_experiment(cfg, strategy_for(cfg))
    assert all(r.detections == {} and r.infeasible and r.s == 0 for r in results)
    assert hist.counts[INFEASIBLE] == 20 and hist.infeasible_rate == 1.0


def test_root_detection_follows_geometric_law():
    """Root first seen at distance d: the first success of a per-step chance."""
    h = 5
    cfg = ScenarioConfig(ground_truth={"exact_sign": 1.0}, schedule=flat(0.5))
    n = 10_000
    counts = np.zeros(h + 2)
    for rng in trial_streams(99, n):
        rng.random(2)                       # truth and traction draws, as in a trial
        known = 0
        first = None
        for k in range(cfg.corridor_length - 1, -1, -1):
            known = reveal(cfg, known, k, rng.random(4))
            if known and first is None:
                first = k
        counts[h + 1 if first is None else h - first] += 1
    # each step within range reveals the root unless both the derived and exact draws miss
    q = 0.5 * 0.5
    expected = np.array([(1 - q) * q ** j for j in range(h + 1)] + [q ** (h + 1)]) * n
    sigma = np.sqrt(expected * (1 - expected / n))
    assert np.all(np.abs(counts - expected) < 4 * sigma)


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 2 ** 32 - 1), st.sampled_from([BASELINE, INCREMENTAL]))
def test_revelation_is_a_growing_root_prefix(seed, mode):
    cfg = ScenarioConfig(ground_truth={"exact_sign": 1.0}, schedule=flat(0.4), mode=mode)
    rng = np.random.default_rng(seed)
    known = 0
    for k in range(cfg.corridor_length - 1, -1, -1):
        after = reveal(cfg, known, k, rng.random(4))
        assert after >= known
        if k > cfg.horizon:
            assert after == 0
        if mode == BASELINE:
            assert after in (0, 4)
        elif after > known:
            # one level at a time, unless the exact detector fires
            assert after == known + 1 or after == 4
        known = after


# -- trials -------------------------------------------------------------------------------------

def test_red_light_seen_four_cells_out():
    sched = {"derived": [1.0 if d <= 4 else 0.0 for d in range(6)], "ground": [0.0] * 6}
    cfg = ScenarioConfig(event="traffic_light", ground_truth={"light_color": 1.0}, schedule=sched)
    r = run_trial(strategy_for(cfg), cfg, trial_streams(0, 1)[0])
    assert r.detections["intersection"] == 4
    assert r.action == "stop_in_4" and r.s == 4


def test_reduced_traction_costs_a_cell():
    sched = {"derived": [1.0 if d <= 4 else 0.0 for d in range(6)], "ground": [0.0] * 6}
    cfg = ScenarioConfig(event="traffic_light", ground_truth={"light_color": 1.0},
                         schedule=sched, reduced_traction=1.0)
    r = run_trial(strategy_for(cfg), cfg, trial_streams(0, 1)[0])
    assert r.reduced_traction and r.action == "stop_in_3"


def test_no_event_no_action():
    cfg = ScenarioConfig(ground_truth={"none": 1.0}, trials=10)
    hist, results = run_experiment(cfg, strategy_for(cfg))
    assert all(r.action == "none" and r.label == NO_EVENT for r in results)
    assert hist.counts[NO_EVENT] == 10 and hist.event_trials == 0


def test_late_baseline_yield():
    sched = {"derived": [0.0] * 6, "ground": [1.0 if d <= 1 else 0.0 for d in range(6)]}
    cfg = ScenarioConfig(ground_truth={"exact_sign": 1.0}, schedule=sched, mode=BASELINE)
    r = run_trial(strategy_for(cfg), cfg, trial_streams(0, 1)[0])
    assert r.label in ("yield_in_1", INFEASIBLE)


def test_one_trial_histogram():
    cfg = ScenarioConfig(trials=1, seed=4)
    hist, (r,) = run_experiment(cfg, strategy_for(cfg))
    assert hist.trials == 1 and hist.counts[r.label] == 1
    assert sum(hist.counts.values()) == 1


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 10_000), st.sampled_from(["yield", "traffic_light"]),
       st.sampled_from([BASELINE, INCREMENTAL]), st.floats(0.0, 1.0))
def test_counts_sum_to_trials_and_actions_match(seed, event, mode, p):
    cfg = ScenarioConfig(event=event, mode=mode, trials=25, seed=seed, schedule=flat(p),
                         reduced_traction=0.5 if event == "traffic_light" else 0.0)
    hist, results = run_experiment(cfg, strategy_for(cfg))
    assert sum(hist.counts.values()) == hist.trials == 25
    assert hist.safety_violations == 0
    for r in results:
        if r.detections:
            assert r.action == expected_action(cfg, r)


def test_experiment_is_reproducible():
    cfg = ScenarioConfig(event="traffic_light", seed=3, reduced_traction=0.25)
    a, _ = run_experiment(cfg, strategy_for(cfg))
    b, _ = run_experiment(cfg, strategy_for(cfg))
    assert a == b and a.to_csv() == b.to_csv()


def test_trial_traces_pass_the_checker():
    cfg = ScenarioConfig(seed=8, trials=30)
    strat = strategy_for(cfg)
    for rng in trial_streams(cfg.seed, cfg.trials):
        r = run_trial(strat, cfg, rng, keep_steps=True)
        assert r.sys_violations == 0
        assert len(r.steps) == cfg.corridor_length + 2


def test_mismatched_strategy():
    cfg = ScenarioConfig(event="traffic_light")
    with pytest.raises(MismatchError):
        check_strategy(synthesized("yield_incremental").strategy, cfg)
    with pytest.raises(MismatchError):
        check_strategy(synthesized("traffic_light_baseline").strategy, cfg)  # cannot see derived levels


# -- comparisons ------------------------------------------------------------------------------

def test_identical_arms_give_zero_deltas():
    cfg = ScenarioConfig(mode=BASELINE, seed=12)
    a, _ = run_experiment(cfg, strategy_for(cfg))
    b, _ = run_experiment(cfg, strategy_for(cfg))
    rep = compare(a, b)
    assert rep.mean_s_delta == 0 and rep.infeasible_rate_delta == 0
    assert set(rep.count_deltas.values()) == {0}
    assert not rep.dominates


def test_certain_full_detection_equalises_the_arms():
    cfg = ScenarioConfig(schedule=flat(1.0), seed=2)
    base, _ = run_experiment(cfg.with_mode(BASELINE), strategy_for(cfg.with_mode(BASELINE)))
    inc, _ = run_experiment(cfg, strategy_for(cfg))
    assert base.counts == inc.counts and base.mean_s == inc.mean_s


def test_incremental_wins_under_default_schedule():
    for event in ("yield", "traffic_light"):
        cfg = ScenarioConfig(event=event, trials=1000, seed=21)
        base, _ = run_experiment(cfg.with_mode(BASELINE), strategy_for(cfg.with_mode(BASELINE)))
        inc, _ = run_experiment(cfg, strategy_for(cfg))
        rep = compare(base, inc)
        assert rep.mean_s_incremental > rep.mean_s_baseline
        assert rep.dominates


@settings(max_examples=12, deadline=None)
@given(st.integers(0, 10_000), st.lists(st.floats(0.0, 1.0), min_size=6, max_size=6),
       st.lists(st.floats(0.0, 1.0), min_size=6, max_size=6))
def test_dominance_whenever_derived_levels_are_easier(seed, a, b):
    derived = [max(x, y) for x, y in zip(a, b)]
    ground = [min(x, y) for x, y in zip(a, b)]
    cfg = ScenarioConfig(trials=40, seed=seed, schedule={"derived": derived, "ground": ground})
    base, rb = run_experiment(cfg.with_mode(BASELINE), strategy_for(cfg.with_mode(BASELINE)))
    inc, ri = run_experiment(cfg, strategy_for(cfg))
    assert inc.mean_s >= base.mean_s
    assert inc.infeasible_rate <= base.infeasible_rate
    # matched streams make the comparison hold trial by trial
    for x, y in zip(rb, ri):
        assert x.truth == y.truth and y.s >= x.s


def test_compare_rejects_mismatches():
    yi = ScenarioConfig(trials=5)
    tl = ScenarioConfig(event="traffic_light", trials=5)
    a, _ = run_experiment(yi, strategy_for(yi))
    b, _ = run_experiment(tl, strategy_for(tl))
    with pytest.raises(MismatchError, match="label"):
        compare(a, b)
    c, _ = run_experiment(ScenarioConfig(trials=6), strategy_for(yi))
    with pytest.raises(MismatchError, match="trial"):
        compare(a, c)
