"""Typed variables and the six-part assume-guarantee specification."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Tuple

from . import expr as E
from .expr import BOOL_DOMAIN, Expr

ENV = "env"
SYS = "sys"


@dataclass(frozen=True)
class VarDecl:
    name: str
    owner: str
    domain: Tuple[str, ...] = BOOL_DOMAIN

    def __post_init__(self):
        if self.owner not in (ENV, SYS):
            raise ValueError(f"owner must be {ENV!r} or {SYS!r}, got {self.owner!r}")
        if len(self.domain) < 2:
            raise ValueError(f"variable {self.name!r} needs at least two values")
        if len(set(self.domain)) != len(self.domain):
            raise ValueError(f"variable {self.name!r} has repeated values")

    @property
    def is_bool(self) -> bool:
        return tuple(self.domain) == BOOL_DOMAIN


@dataclass(frozen=True)
class Diagnostic:
    section: str
    index: int
    rule: str
    message: str

    def __str__(self) -> str:
        where = self.section if self.index < 0 else f"{self.section}[{self.index}]"
        return f"{where}: {self.rule}: {self.message}"


@dataclass
class GR1Spec:
    vars: List[VarDecl]
    theta_env: Expr = E.TRUE
    theta_sys: Expr = E.TRUE
    env_safety: List[Expr] = field(default_factory=list)
    sys_safety: List[Expr] = field(default_factory=list)
    env_progress: List[Expr] = field(default_factory=lambda: [E.TRUE])
    sys_progress: List[Expr] = field(default_factory=lambda: [E.TRUE])

    @property
    def env_vars(self) -> List[VarDecl]:
        return [v for v in self.vars if v.owner == ENV]

    @property
    def sys_vars(self) -> List[VarDecl]:
        return [v for v in self.vars if v.owner == SYS]

    @property
    def domains(self) -> dict:
        return {v.name: tuple(v.domain) for v in self.vars}

    def decl(self, name: str) -> VarDecl:
        for v in self.vars:
            if v.name == name:
                return v
        raise KeyError(name)

    def sections(self):
        """Yield ``(section, index, formula)`` for every formula of the spec."""
        yield "env_init", -1, self.theta_env
        yield "sys_init", -1, self.theta_sys
        for name in ("env_safety", "sys_safety", "env_progress", "sys_progress"):
            for i, f in enumerate(getattr(self, name)):
                yield name, i, f


SHAPE_RULES = {
    "env_init": "unprimed formula over environment variables",
    "sys_init": "unprimed formula over environment and system variables",
    "env_safety": "formula over X, Y and next(X)",
    "sys_safety": "formula over X, Y, next(X) and next(Y)",
    "env_progress": "unprimed formula over X and Y",
    "sys_progress": "unprimed formula over X and Y",
}


def check_formula(section: str, f: Expr, owners: dict, domains: dict) -> List[str]:
    """Return the shape problems of ``f`` placed in ``section``."""
    problems = []
    for a in E.atoms(f):
        if a.var not in owners:
            problems.append(f"undeclared variable {a.var!r}")
            continue
        if a.value not in domains[a.var]:
            problems.append(f"value {a.value!r} outside the domain of {a.var!r}")
        owner = owners[a.var]
        if a.primed and section in ("env_init", "sys_init", "env_progress", "sys_progress"):
            problems.append(f"next({a.var}) not allowed")
        elif a.primed and section == "env_safety" and owner == SYS:
            problems.append(f"next({a.var}) reads a system variable")
        elif section == "env_init" and owner == SYS:
            problems.append(f"system variable {a.var!r} in environment initial condition")
    # one message per distinct problem, in first-seen order
    return list(dict.fromkeys(problems))


def validate_spec(spec: GR1Spec) -> List[Diagnostic]:
    """Check the invariants of ``spec``; an empty list means it is well formed."""
    out: List[Diagnostic] = []
    seen = set()
    for v in spec.vars:
        if v.name in seen:
            out.append(Diagnostic("vars", -1, "unique names", f"variable {v.name!r} declared twice"))
        seen.add(v.name)
    owners = {v.name: v.owner for v in spec.vars}
    domains = spec.domains
    for section, i, f in spec.sections():
        for msg in check_formula(section, f, owners, domains):
            out.append(Diagnostic(section, i, SHAPE_RULES[section], msg))
    for name in ("env_progress", "sys_progress"):
        if not getattr(spec, name):
            out.append(Diagnostic(name, -1, "non-empty progress",
                                  "progress lists must be non-empty (insert `true` to express no goal)"))
    return out


def to_json(spec: GR1Spec) -> dict:
    return {
        "vars": [{"name": v.name, "owner": v.owner, "domain": list(v.domain)} for v in spec.vars],
        "env_init": E.to_json(spec.theta_env),
        "sys_init": E.to_json(spec.theta_sys),
        "env_safety": [E.to_json(f) for f in spec.env_safety],
        "sys_safety": [E.to_json(f) for f in spec.sys_safety],
        "env_progress": [E.to_json(f) for f in spec.env_progress],
        "sys_progress": [E.to_json(f) for f in spec.sys_progress],
    }


def from_json(d: dict) -> GR1Spec:
    return GR1Spec(
        vars=[VarDecl(v["name"], v["owner"], tuple(v["domain"])) for v in d["vars"]],
        theta_env=E.from_json(d["env_init"]),
        theta_sys=E.from_json(d["sys_init"]),
        env_safety=[E.from_json(f) for f in d["env_safety"]],
        sys_safety=[E.from_json(f) for f in d["sys_safety"]],
        env_progress=[E.from_json(f) for f in d["env_progress"]],
        sys_progress=[E.from_json(f) for f in d["sys_progress"]],
    )
