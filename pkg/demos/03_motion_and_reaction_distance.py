"""
Corridors, shortest paths and the reaction distance
===================================================

The vehicle moves along a line of cells. How much room it has left
when something is detected is the weight of the shortest path from
the detection cell to the event.
"""
from gr1perception import CellCorridor, min_weight_path, performance
from gr1perception.motion import movement_abstraction

corridor = CellCorridor(8)
ts = corridor.to_ts()
path, w = min_weight_path(ts, corridor.name(5), corridor.name(0))
print("path:", path, "weight:", w)

for d in range(1, 6):
    print(f"detected at c{d}: s = {performance(corridor, d):g}")

# Non-uniform cell lengths change the metric but not the path.
bumpy = CellCorridor(8, weights=[1, 1, 2, 2, 3, 3, 3])
print([performance(bumpy, d) for d in range(1, 6)])

# Abstract the corridor into stationary and moving states.
moves = movement_abstraction(CellCorridor(3))
for s in moves.states:
    print(s, sorted(moves.label(s)))
