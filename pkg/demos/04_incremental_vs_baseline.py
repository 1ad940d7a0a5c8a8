"""
Does acting on coarse labels pay off?
=====================================

Two controllers face the same random world: one waits for the exact
label, the other reacts to coarse labels as they arrive. Matched random
streams make the comparison paired, trial by trial.
"""
from gr1perception import ScenarioConfig, compare, run_experiment, scenarios, synthesize
from gr1perception.simulator import BASELINE, INCREMENTAL

for event in ("traffic_light", "yield"):
    config = ScenarioConfig(event=event, mode=BASELINE, trials=500, seed=3)
    arms = {}
    for mode in (BASELINE, INCREMENTAL):
        cfg = config.with_mode(mode)
        strategy = synthesize(scenarios.event_spec(cfg.model, mode == INCREMENTAL)).strategy
        arms[mode], _ = run_experiment(cfg, strategy)

    print(f"\n{event}")
    for lab in arms[BASELINE].labels:
        print(f"  {lab:>12}  {arms[BASELINE].counts[lab]:4d}  {arms[INCREMENTAL].counts[lab]:4d}")
    rep = compare(arms[BASELINE], arms[INCREMENTAL])
    print(f"  mean s        {rep.mean_s_baseline:.2f} -> {rep.mean_s_incremental:.2f}")
    print(f"  infeasible    {rep.infeasible_rate_baseline:.3f} -> {rep.infeasible_rate_incremental:.3f}")
    print("  incremental dominates:", rep.dominates)
