"""Specifications of the driving scenarios shipped with the package.

Every builder returns a :class:`GR1Spec`; :data:`FIXTURES` pairs the
builders with the text files under ``fixtures/`` so the two cannot drift.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Dict, List, Tuple

from . import expr as E
from .expr import Atom, Not
from .parser import format_spec
from .refinement import EMPTY, PerceptionCell, RefinementTree, chain, compile_consistency, \
    compile_persistence, compile_pipeline
from .spec import ENV, SYS, GR1Spec, VarDecl

FIXTURE_DIR = Path(__file__).with_name("fixtures")


def _exactly_one(names, primed=True):
    atoms = [Atom(n, primed=primed) for n in names]
    out = [E.disj(atoms)]
    for i, a in enumerate(atoms):
        for b in atoms[i + 1:]:
            out.append(Not(E.And((a, b))))
    return out


def _at_most_one(atoms):
    return [Not(E.And((a, b))) for i, a in enumerate(atoms) for b in atoms[i + 1:]]


# -- work zone -----------------------------------------------------------------------------

def work_zone() -> GR1Spec:
    """Slow down whenever a work zone is encountered."""
    return GR1Spec(
        vars=[VarDecl("work_zone", ENV), VarDecl("move_slow", SYS)],
        theta_env=Not(Atom("work_zone")),
        theta_sys=Not(Atom("move_slow")),
        env_safety=[E.TRUE],
        sys_safety=[E.Implies(Atom("work_zone", primed=True), Atom("move_slow", primed=True))],
        env_progress=[Not(Atom("work_zone"))],
        sys_progress=[Not(Atom("move_slow"))],
    )


# -- stop sign with incremental perception ------------------------------------------------------

STOP_TREE = ("sign_present", "sign_red", "sign_hexagonal", "stop_sign")
STOP_ACTIONS = ("move", "attention", "slow_down", "prepare_to_stop", "stop")


def stop_sign_tree() -> RefinementTree:
    return chain(STOP_TREE)


def stop_sign() -> GR1Spec:
    """Escalate from ``move`` to ``stop`` as the sign is resolved.

    Detections persist and refine until the vehicle has stopped at the
    sign, after which the sign is behind it and the horizon clears.
    """
    tree = stop_sign_tree()
    p, red, hexa, stop_s = (Atom(n, primed=True) for n in STOP_TREE)
    act = {n: Atom(n, primed=True) for n in STOP_ACTIONS}
    env_safety = compile_consistency(tree) + compile_persistence(tree, release=Atom("stop"))
    env_safety.append(E.Implies(E.And((Atom("stop_sign"), Atom("stop"))), Not(p)))
    sys_safety = _exactly_one(STOP_ACTIONS) + [
        E.Implies(Not(p), act["move"]),
        E.Implies(E.And((p, Not(red))), act["attention"]),
        E.Implies(E.And((red, Not(hexa))), act["slow_down"]),
        E.Implies(E.And((hexa, Not(stop_s))), act["prepare_to_stop"]),
        E.Implies(stop_s, act["stop"]),
        E.Implies(Atom("stop_sign"), E.And((Atom("stop"), act["move"]))),
    ]
    return GR1Spec(
        vars=[VarDecl(n, ENV) for n in STOP_TREE] + [VarDecl(n, SYS) for n in STOP_ACTIONS],
        theta_env=E.conj(Not(Atom(n)) for n in STOP_TREE),
        theta_sys=E.conj([Atom("move")] + [Not(Atom(n)) for n in STOP_ACTIONS[1:]]),
        env_safety=env_safety,
        sys_safety=sys_safety,
        env_progress=[Not(Atom("stop_sign")), Not(Atom("sign_present"))],
        sys_progress=[Atom("move")],
    )


# -- corridor events: traffic light and yield sign -----------------------------------------------

@dataclass(frozen=True)
class EventModel:
    """A corridor event seen through perception cells ``o0 .. o<horizon>``.

    ``levels`` is the refinement chain from coarsest to exact. ``actions``
    lists the reactions from least to most distant: ``actions[k]`` means
    "complete within ``k`` cells", with ``actions[0]`` the infeasible
    outcome. ``traction`` adds a reduced-traction input that costs one
    cell of reaction distance.
    """
    name: str
    levels: Tuple[str, ...]
    actions: Tuple[str, ...]
    traction: bool = False

    @property
    def ground(self) -> str:
        return self.levels[-1]

    def tree(self, incremental: bool) -> RefinementTree:
        return chain(self.levels if incremental else self.levels[-1:])


TRAFFIC_LIGHT = EventModel(
    "traffic_light",
    ("intersection", "traffic_light", "light_color"),
    ("infeasible", "hard_stop", "stop_in_2", "stop_in_3", "stop_in_4"),
    traction=True,
)
YIELD_SIGN = EventModel(
    "yield",
    ("sign_present", "sign_type", "sign_shape", "exact_sign"),
    ("infeasible", "yield_in_1", "yield_in_2", "yield_in_3", "yield_in_4"),
)
EVENTS = {m.name: m for m in (TRAFFIC_LIGHT, YIELD_SIGN)}
TRACTION = "reduced_traction"
DEFAULT_HORIZON = 5


def cell_name(d: int) -> str:
    return f"o{d}"


def action_for(model: EventModel, distance: int, reduced_traction: bool = False) -> str:
    """Reaction chosen when the event is first seen ``distance`` cells ahead."""
    k = distance - (1 if reduced_traction else 0)
    return model.actions[max(0, min(k, len(model.actions) - 1))]


def event_spec(model: EventModel, incremental: bool, horizon: int = DEFAULT_HORIZON) -> GR1Spec:
    """React to the first detection of ``model``'s event within ``horizon`` cells.

    Cell ``o<d>`` holds what perception reports ``d`` cells ahead. An
    object advances one cell per step and its reading may only refine.
    Objects can surface in any cell (they were occluded before), at most
    one is tracked, and once it reaches ``o0`` it is passed. The
    controller commits to the reaction matching the distance of the first
    detection, keeps it while the object is tracked and drops it once the
    horizon is clear. The baseline only perceives the exact reading.
    """
    tree = model.tree(incremental)
    values = (EMPTY,) + tuple(tree.bfs())
    cells = [PerceptionCell(d, values) for d in range(horizon + 1)]
    names = [cell_name(d) for d in range(horizon + 1)]
    env_vars = [VarDecl(n, ENV, values) for n in names]
    if model.traction:
        env_vars.append(VarDecl(TRACTION, ENV))
    sys_vars = [VarDecl(a, SYS) for a in model.actions]

    seen_next = [Not(Atom(n, EMPTY, primed=True)) for n in names]
    clear_next = E.conj(Atom(n, EMPTY, primed=True) for n in names)
    env_safety = compile_pipeline(cells, tree, occlusion=True)
    env_safety.append(E.Implies(Not(Atom(names[0], EMPTY)), clear_next))
    env_safety += _at_most_one(seen_next)
    if model.traction:
        env_safety += [E.Implies(Atom(TRACTION), Atom(TRACTION, primed=True)),
                       E.Implies(Not(Atom(TRACTION)), Not(Atom(TRACTION, primed=True)))]

    acting_now = E.disj(Atom(a) for a in model.actions)
    act_next = {a: Atom(a, primed=True) for a in model.actions}
    sys_safety = _at_most_one(list(act_next.values()))
    for d, n in enumerate(names):
        trigger = E.And((seen_next[d], Not(acting_now)))
        if model.traction:
            sys_safety.append(E.Implies(E.And((trigger, Not(Atom(TRACTION, primed=True)))),
                                        act_next[action_for(model, d, False)]))
            sys_safety.append(E.Implies(E.And((trigger, Atom(TRACTION, primed=True))),
                                        act_next[action_for(model, d, True)]))
        else:
            sys_safety.append(E.Implies(trigger, act_next[action_for(model, d)]))
    tracked_next = E.disj(seen_next)
    for a in model.actions:
        sys_safety.append(E.Implies(E.And((Atom(a), tracked_next)), act_next[a]))
    sys_safety.append(E.Implies(clear_next, E.conj(Not(x) for x in act_next.values())))

    return GR1Spec(
        vars=env_vars + sys_vars,
        theta_env=E.conj(Atom(n, EMPTY) for n in names),
        theta_sys=E.conj(Not(Atom(a)) for a in model.actions),
        env_safety=env_safety,
        sys_safety=sys_safety,
        env_progress=[E.conj(Atom(n, EMPTY) for n in names)],
        sys_progress=[E.conj(Not(Atom(a)) for a in model.actions)],
    )


# -- small fixtures for edge cases ---------------------------------------------------------------

def minimal() -> GR1Spec:
    return GR1Spec(vars=[VarDecl("x", ENV), VarDecl("y", SYS)])


def theta_false() -> GR1Spec:
    spec = work_zone()
    spec.theta_sys = E.FALSE
    return spec


def strictness() -> GR1Spec:
    """Winnable only by breaking a guarantee before the environment breaks an assumption.

    The environment promises never to see ``y`` raised; the system may
    never raise ``y`` yet must make ``x`` hold infinitely often, which only
    the environment controls. Under non-strict semantics the system raises
    ``y`` and the environment's assumption is vacuously broken; under
    strict semantics it may not.
    """
    x, y = Atom("x"), Atom("y")
    return GR1Spec(
        vars=[VarDecl("x", ENV), VarDecl("y", SYS)],
        theta_env=E.TRUE,
        theta_sys=Not(y),
        env_safety=[Not(y)],
        sys_safety=[Not(Atom("y", primed=True))],
        env_progress=[E.TRUE],
        sys_progress=[x],
    )


# -- fixture files -------------------------------------------------------------------------------

FIXTURES: Dict[str, Tuple[Callable[[], GR1Spec], str]] = {
    "work_zone": (work_zone, "Slow down whenever a work zone is encountered."),
    "stop_sign": (stop_sign, (
        "Stop sign resolved one refinement level per approached cell.\n"
        "The rule `stop_sign -> stop & next(move)` is encoded literally: the\n"
        "vehicle resumes on the step right after stopping. Reading `next(move)`\n"
        "as an eventual obligation is covered by the progress goal on `move`.")),
    "traffic_light_baseline": (lambda: event_spec(TRAFFIC_LIGHT, False),
                               "Red light ahead, baseline perception (exact reading only)."),
    "traffic_light_incremental": (lambda: event_spec(TRAFFIC_LIGHT, True),
                                  "Red light ahead, incremental perception."),
    "yield_baseline": (lambda: event_spec(YIELD_SIGN, False),
                       "Yield sign ahead, baseline perception (exact reading only)."),
    "yield_incremental": (lambda: event_spec(YIELD_SIGN, True),
                          "Yield sign ahead, incremental perception."),
    "minimal": (minimal, "Vacuous specification."),
    "theta_false": (theta_false, "Work zone with an unsatisfiable system initial condition."),
    "strictness": (strictness, "Realizable only under non-strict semantics."),
}

# realizable under the default strict semantics
REALIZABLE = ("work_zone", "stop_sign", "traffic_light_baseline", "traffic_light_incremental",
              "yield_baseline", "yield_incremental", "minimal")

BAD_ENV_SAFETY = """\
# An environment assumption may not read the next system state.
[env_vars]
work_zone
[sys_vars]
move_slow
[env_safety]
next(move_slow) -> next(work_zone)
"""


def fixture_text(name: str) -> str:
    builder, note = FIXTURES[name]
    header = "".join(f"# {line}\n" if line else "#\n" for line in note.splitlines())
    return header + "\n" + format_spec(builder())


def fixture_path(name: str) -> Path:
    return FIXTURE_DIR / f"{name}.gr1"


def write_fixtures(directory: Path = FIXTURE_DIR) -> List[Path]:
    directory.mkdir(parents=True, exist_ok=True)
    out = []
    for name in FIXTURES:
        path = directory / f"{name}.gr1"
        path.write_text(fixture_text(name))
        out.append(path)
    path = directory / "bad_env_safety.gr1"
    path.write_text(BAD_ENV_SAFETY)
    out.append(path)
    return out
