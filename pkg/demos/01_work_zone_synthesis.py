"""
Work zone: from a textual spec to a controller
==============================================

A tiny driving rule: slow down whenever a work zone is seen, and keep
moving infinitely often as long as the zone also clears infinitely often.
"""
from gr1perception import format_spec, parse_spec, synthesize
from gr1perception.scenarios import fixture_text

text = fixture_text("work_zone")
print(text)

spec = parse_spec(text)
result = synthesize(spec)
print("realizable:", result.realizable)
print("stats:", {k: v for k, v in result.stats.items() if k != "wall_time_s"})

# The controller is a finite table keyed by (state, goal, next input).
strategy = result.strategy
print("controller states:", len(strategy.states))

# Drive it with a scripted environment: zone appears for two steps, then leaves.
from gr1perception import closed_loop, verify_trace

script = [False, True, True, False, False]
trace = closed_loop(strategy, lambda h: {"work_zone": script[len(h)]}, len(script))
for t, s in enumerate(trace.states):
    print(t, s)
print("violations:", verify_trace(trace, spec))

# Round trip: the pretty printer gives back an equivalent spec.
assert parse_spec(format_spec(spec)) == spec
