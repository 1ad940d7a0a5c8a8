"""Seeded Monte Carlo harness for the corridor events.

The ego vehicle starts at the far end of a corridor and advances one cell
per step toward the target cell ``c0``, where the event (a red light or a
yield sign) sits if it is present at all. Once the event is within the
perception horizon, detectors fire at random with a probability that
depends on the remaining distance. The synthesized controller sees the
resulting perception cells and commits to a reaction; the trial records
that reaction and how much distance was left when it was made.

Both arms of an experiment draw from identical per-trial random streams:
every step consumes one uniform per refinement level whatever the arm, so
trial ``i`` of the baseline and trial ``i`` of the incremental arm see the
same world and the same detector outcomes.
"""
from __future__ import annotations

import csv
import io
import json
from dataclasses import asdict, dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np

from . import expr as E
from .motion import CellCorridor, performance
from .refinement import EMPTY
from .scenarios import EVENTS, TRACTION, EventModel, action_for, cell_name
from .strategy import Strategy, Trace
from .verify import TraceChecker, sys_failures, verify_trace

BASELINE = "baseline"
INCREMENTAL = "incremental"
NONE = "none"
NO_EVENT = "no_event"
INFEASIBLE = "infeasible"


class ScenarioError(ValueError):
    pass


class MismatchError(ValueError):
    pass


def default_schedule(horizon: int) -> Dict[str, List[float]]:
    """Derived levels are seen readily; the exact reading only up close."""
    return {
        "derived": [0.9] * (horizon + 1),
        "ground": [0.9 if d <= 2 else 0.3 for d in range(horizon + 1)],
    }


@dataclass
class ScenarioConfig:
    event: str = "yield"
    corridor_length: int = 8
    horizon: int = 5
    ground_truth: Optional[Dict[str, float]] = None
    schedule: Optional[Dict[str, List[float]]] = None
    mode: str = INCREMENTAL
    trials: int = 100
    seed: int = 0
    reduced_traction: float = 0.0

    def __post_init__(self):
        if self.event not in EVENTS:
            raise ScenarioError(f"unknown event {self.event!r}; expected one of {sorted(EVENTS)}")
        if self.ground_truth is None:
            self.ground_truth = {self.model.ground: 0.9, NONE: 0.1}
        if self.schedule is None:
            self.schedule = default_schedule(self.horizon)
        self.validate()

    @property
    def model(self) -> EventModel:
        return EVENTS[self.event]

    def validate(self):
        if self.mode not in (BASELINE, INCREMENTAL):
            raise ScenarioError(f"mode must be {BASELINE!r} or {INCREMENTAL!r}")
        if self.corridor_length < 1:
            raise ScenarioError("corridor needs at least one cell")
        if not 0 <= self.horizon <= self.corridor_length:
            raise ScenarioError("horizon must lie between 0 and the corridor length")
        if self.trials < 1:
            raise ScenarioError("at least one trial is required")
        allowed = {self.model.ground, NONE}
        for k, p in self.ground_truth.items():
            if k not in allowed:
                raise ScenarioError(f"ground truth label {k!r} not in {sorted(allowed)}")
            if not 0.0 <= p <= 1.0:
                raise ScenarioError(f"probability of {k!r} outside [0, 1]")
        if abs(sum(self.ground_truth.values()) - 1.0) > 1e-9:
            raise ScenarioError("ground truth distribution must sum to 1")
        for level in ("derived", "ground"):
            row = self.schedule.get(level)
            if row is None or len(row) != self.horizon + 1:
                raise ScenarioError(f"schedule[{level!r}] needs one probability per distance 0..{self.horizon}")
            if any(not 0.0 <= p <= 1.0 for p in row):
                raise ScenarioError(f"schedule[{level!r}] has a probability outside [0, 1]")
        if not 0.0 <= self.reduced_traction <= 1.0:
            raise ScenarioError("reduced_traction probability outside [0, 1]")

    def with_mode(self, mode: str) -> "ScenarioConfig":
        d = self.to_json()
        d["mode"] = mode
        return ScenarioConfig.from_json(d)

    def corridor(self) -> CellCorridor:
        return CellCorridor(self.corridor_length, target=0)

    def to_json(self) -> dict:
        return asdict(self)

    @classmethod
    def from_json(cls, d: dict) -> "ScenarioConfig":
        known = set(cls.__dataclass_fields__)
        extra = set(d) - known
        if extra:
            raise ScenarioError(f"unknown scenario keys {sorted(extra)}")
        return cls(**d)


def load_scenario(path) -> ScenarioConfig:
    with open(path) as fh:
        return ScenarioConfig.from_json(json.load(fh))


def trial_streams(seed: int, trials: int) -> List[np.random.Generator]:
    """Independent counter-based generators, one per trial."""
    return [np.random.Generator(np.random.Philox(s)) for s in np.random.SeedSequence(seed).spawn(trials)]


def draw_label(distribution: Dict[str, float], rng: np.random.Generator) -> str:
    """One categorical draw; labels are scanned in sorted order."""
    labels = sorted(distribution)
    u = rng.random()
    acc = 0.0
    for k in labels:
        acc += distribution[k]
        if u < acc:
            return k
    return [k for k in labels if distribution[k] > 0][-1]   # rounding left u past the total


def sample_ground_truth(config: ScenarioConfig, rng: np.random.Generator) -> Optional[str]:
    """Draw the event of one trial; ``None`` when nothing is there."""
    pick = draw_label(config.ground_truth, rng)
    return None if pick == NONE else pick


def reveal(config: ScenarioConfig, revealed: int, distance: int, draws: np.ndarray) -> int:
    """Number of refinement levels known after one step at ``distance``.

    ``revealed`` levels are known before the step; ``draws`` holds one
    uniform per level. The exact detector (last draw) reveals the whole
    path in both modes. In incremental mode the next unknown level may
    also surface with the derived-level probability. Knowledge never
    shrinks and always forms a root prefix of the path.
    """
    n = len(config.model.levels)
    if distance > config.horizon or revealed == n:
        return revealed
    if draws[n - 1] < config.schedule["ground"][distance]:
        return n
    if config.mode == INCREMENTAL and revealed < n - 1:
        if draws[revealed] < config.schedule["derived"][distance]:
            return revealed + 1
    return revealed


@dataclass
class TrialResult:
    truth: Optional[str]
    reduced_traction: bool
    detections: Dict[str, int]        # level -> distance at which it was first known
    action: str
    s: float
    infeasible: bool
    sys_violations: int = 0
    steps: List[dict] = field(default_factory=list)

    @property
    def label(self) -> str:
        if self.truth is None:
            return NO_EVENT
        return INFEASIBLE if self.infeasible else self.action


def check_strategy(strategy: Strategy, config: ScenarioConfig):
    """Raise :class:`MismatchError` unless ``strategy`` reads this scenario's cells."""
    model = config.model
    dom = strategy.spec.domains
    levels = model.levels if config.mode == INCREMENTAL else model.levels[-1:]
    for d in range(config.horizon + 1):
        name = cell_name(d)
        if name not in strategy.env_names:
            raise MismatchError(f"strategy has no perception cell {name}")
        missing = [v for v in (EMPTY, *levels) if v not in dom[name]]
        if missing:
            raise MismatchError(f"cell {name} cannot report {missing}")
    for a in model.actions:
        if a not in strategy.sys_names:
            raise MismatchError(f"strategy has no action {a!r}")
    if model.traction and TRACTION not in strategy.env_names:
        raise MismatchError(f"strategy has no {TRACTION!r} input")


def run_trial(strategy: Strategy, config: ScenarioConfig, rng: np.random.Generator,
              checker: Optional[TraceChecker] = None, keep_steps: bool = False) -> TrialResult:
    """Drive ``strategy`` through one sampled approach to the target cell."""
    model = config.model
    n_levels = len(model.levels)
    truth = sample_ground_truth(config, rng)
    rt = bool(rng.random() < config.reduced_traction) and model.traction
    cells = [n for n in strategy.env_names if n != TRACTION]

    def frame(distance: Optional[int], known: int) -> dict:
        env = {c: EMPTY for c in cells}
        if distance is not None and known:
            env[cell_name(distance)] = model.levels[known - 1]
        if TRACTION in strategy.env_names:
            env[TRACTION] = E.TRUE_VALUE if rt else E.FALSE_VALUE
        return env

    frames = [frame(None, 0)]           # nothing perceived before the approach starts
    distances: List[Optional[int]] = [None]
    known = 0
    detections: Dict[str, int] = {}
    for k in range(config.corridor_length - 1, -1, -1):
        draws = rng.random(n_levels)
        if truth is not None:
            before = known
            known = reveal(config, known, k, draws)
            for lvl in model.levels[before:known]:
                detections[lvl] = k
        frames.append(frame(k, known if truth is not None else 0))
        distances.append(k)
    frames.append(frame(None, 0))       # target passed

    trace = Trace()
    node = None
    action = None
    for t, env in enumerate(frames):
        reply = strategy.start(env) if t == 0 else strategy.react(node, env)
        if reply is None:
            raise MismatchError(f"step {t}: perception frame outside the strategy's assumptions")
        sys_val, node = reply
        trace.states.append({**env, **sys_val})
        trace.nodes.append(node)
        if action is None:
            on = [a for a in model.actions if sys_val[a] == E.TRUE_VALUE]
            if on:
                action = on[0]
    checker = checker or TraceChecker(strategy.spec)
    fails = sys_failures(verify_trace(trace, strategy.spec, checker))

    first = max(detections.values()) if detections else None
    infeasible = truth is not None and (first is None or first < 1)
    s = 0.0 if first is None or infeasible else performance(config.corridor(), first)
    steps = []
    if keep_steps:
        for dist, st in zip(distances + [None], trace.states):
            steps.append({
                "ego_cell": dist,
                "perceived": {c: st[c] for c in cells if st[c] != EMPTY},
                "actions": [a for a in model.actions if st[a] == E.TRUE_VALUE],
            })
    return TrialResult(truth, rt, detections, action or "none", s, infeasible, len(fails), steps)


@dataclass
class Histogram:
    event: str
    mode: str
    labels: List[str]
    counts: Dict[str, int]
    mean_s_by_label: Dict[str, float]
    trials: int
    event_trials: int
    mean_s: float
    infeasible_rate: float
    safety_violations: int = 0

    def to_json(self) -> dict:
        return asdict(self)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["action", "count", "mean_s"])
        for lab in self.labels:
            w.writerow([lab, self.counts[lab], f"{self.mean_s_by_label[lab]:.6g}"])
        return buf.getvalue()


def histogram_labels(model: EventModel) -> List[str]:
    return list(model.actions[:0:-1]) + [INFEASIBLE, NO_EVENT]


def aggregate(config: ScenarioConfig, results: List[TrialResult]) -> Histogram:
    labels = histogram_labels(config.model)
    counts = {k: 0 for k in labels}
    sums = {k: 0.0 for k in labels}
    for r in results:
        lab = r.label
        if lab not in counts:
            raise MismatchError(f"unexpected outcome {lab!r}")
        counts[lab] += 1
        sums[lab] += r.s
    events = [r for r in results if r.truth is not None]
    n_ev = len(events)
    return Histogram(
        event=config.event,
        mode=config.mode,
        labels=labels,
        counts=counts,
        mean_s_by_label={k: (sums[k] / counts[k] if counts[k] else 0.0) for k in labels},
        trials=len(results),
        event_trials=n_ev,
        mean_s=sum(r.s for r in events) / n_ev if n_ev else 0.0,
        infeasible_rate=sum(r.infeasible for r in events) / n_ev if n_ev else 0.0,
        safety_violations=sum(r.sys_violations for r in results),
    )


def run_experiment(config: ScenarioConfig, strategy: Strategy, keep_steps: bool = False
                   ) -> Tuple[Histogram, List[TrialResult]]:
    """Run ``config.trials`` trials on per-trial sub-streams of ``config.seed``."""
    check_strategy(strategy, config)
    checker = TraceChecker(strategy.spec)
    results = [run_trial(strategy, config, rng, checker, keep_steps)
               for rng in trial_streams(config.seed, config.trials)]
    return aggregate(config, results), results


@dataclass
class ComparisonReport:
    event: str
    trials: int
    mean_s_baseline: float
    mean_s_incremental: float
    mean_s_delta: float
    infeasible_rate_baseline: float
    infeasible_rate_incremental: float
    infeasible_rate_delta: float
    count_deltas: Dict[str, int]

    @property
    def dominates(self) -> bool:
        """Incremental reacts with more room and is never infeasible more often."""
        return self.mean_s_delta > 0 and self.infeasible_rate_delta <= 0

    def to_json(self) -> dict:
        d = asdict(self)
        d["dominates"] = self.dominates
        return d


def compare(baseline: Histogram, incremental: Histogram) -> ComparisonReport:
    """Incremental minus baseline for the mean reaction distance, infeasibility and counts."""
    if baseline.labels != incremental.labels:
        raise MismatchError(f"label sets differ: {baseline.labels} vs {incremental.labels}")
    if baseline.trials != incremental.trials:
        raise MismatchError("histograms cover different trial counts")
    return ComparisonReport(
        event=incremental.event,
        trials=incremental.trials,
        mean_s_baseline=baseline.mean_s,
        mean_s_incremental=incremental.mean_s,
        mean_s_delta=incremental.mean_s - baseline.mean_s,
        infeasible_rate_baseline=baseline.infeasible_rate,
        infeasible_rate_incremental=incremental.infeasible_rate,
        infeasible_rate_delta=incremental.infeasible_rate - baseline.infeasible_rate,
        count_deltas={k: incremental.counts[k] - baseline.counts[k] for k in baseline.labels},
    )


def trace_record(index: int, config: ScenarioConfig, r: TrialResult) -> dict:
    return {
        "trial": index, "arm": config.mode, "event": config.event, "truth": r.truth,
        "reduced_traction": r.reduced_traction, "detections": r.detections,
        "action": r.action, "label": r.label, "s": r.s, "infeasible": r.infeasible,
        "sys_violations": r.sys_violations, "steps": r.steps,
    }


def expected_action(config: ScenarioConfig, r: TrialResult) -> Optional[str]:
    """Reaction the controller should have committed to in ``r``."""
    if not r.detections:
        return None
    return action_for(config.model, max(r.detections.values()), r.reduced_traction)
