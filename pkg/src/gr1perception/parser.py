"""Sectioned text format for GR(1) specifications.

A document is a sequence of sections::

    [env_vars]
    work_zone
    [sys_vars]
    move_slow
    [env_init]
    !work_zone
    [sys_safety]
    next(work_zone) -> next(move_slow)

Variable lines are ``name`` (Boolean) or ``name : {a, b, c}``. Every other
section holds one formula per line; a formula continues onto the next line
while parentheses are open or the line ends in a binary operator. Initial
sections are conjoined, safety and progress sections are lists. ``#``
starts a comment.
"""
from __future__ import annotations

import re
from typing import List, Optional

from . import expr as E
from .expr import Expr
from .spec import ENV, SYS, GR1Spec, VarDecl, check_formula, validate_spec

SECTIONS = ("env_vars", "sys_vars", "env_init", "sys_init",
            "env_safety", "sys_safety", "env_progress", "sys_progress")


class SpecSyntaxError(ValueError):
    def __init__(self, message: str, line: int, col: int):
        super().__init__(f"line {line}, column {col}: {message}")
        self.line = line
        self.col = col


class SpecShapeError(ValueError):
    """Raised when a parsed document violates the GR(1) shape rules."""

    def __init__(self, diagnostics, messages=None):
        super().__init__("; ".join(messages or [str(d) for d in diagnostics]))
        self.diagnostics = list(diagnostics)


_TOKEN = re.compile(r"\s*(?:(->|!=|[!&|=(){},:])|([A-Za-z0-9_.\-]+))")


def _tokenize(text: str, line: int, col0: int):
    pos = 0
    toks = []
    while pos < len(text):
        if text[pos:].strip() == "":
            break
        m = _TOKEN.match(text, pos)
        if not m or m.end() == pos:
            start = len(text) - len(text[pos:].lstrip())
            raise SpecSyntaxError(f"unexpected character {text[start]!r}", line, col0 + start + 1)
        kind = "op" if m.group(1) else "id"
        tok = m.group(1) or m.group(2)
        toks.append((kind, tok, col0 + m.start(m.lastindex) + 1, line))
        pos = m.end()
    return toks


class _FormulaParser:
    def __init__(self, toks, line, domains, eol_col):
        self.toks = toks
        self.i = 0
        self.line = line
        self.domains = domains
        self.eol_col = eol_col

    def error(self, msg, col=None):
        line = self.line
        if self.i < len(self.toks):
            line = self.toks[self.i][3]
        elif self.toks:
            line = self.toks[-1][3]
        if col is None:
            col = self.toks[self.i][2] if self.i < len(self.toks) else self.eol_col
        raise SpecSyntaxError(msg, line, col)

    def peek(self):
        return self.toks[self.i][1] if self.i < len(self.toks) else None

    def take(self, expected=None):
        if self.i >= len(self.toks):
            self.error(f"expected {expected!r}" if expected else "unexpected end of formula")
        tok = self.toks[self.i]
        if expected is not None and tok[1] != expected:
            self.error(f"expected {expected!r}, found {tok[1]!r}")
        self.i += 1
        return tok

    def parse(self) -> Expr:
        e = self.implication()
        if self.i < len(self.toks):
            self.error(f"unexpected {self.peek()!r}")
        return e

    def implication(self) -> Expr:
        left = self.disjunction()
        if self.peek() == "->":
            self.take()
            return E.Implies(left, self.implication())
        return left

    def disjunction(self) -> Expr:
        parts = [self.conjunction()]
        while self.peek() == "|":
            self.take()
            parts.append(self.conjunction())
        return parts[0] if len(parts) == 1 else E.Or(tuple(parts))

    def conjunction(self) -> Expr:
        parts = [self.unary()]
        while self.peek() == "&":
            self.take()
            parts.append(self.unary())
        return parts[0] if len(parts) == 1 else E.And(tuple(parts))

    def unary(self) -> Expr:
        if self.peek() == "!":
            self.take()
            return E.Not(self.unary())
        return self.primary()

    def primary(self) -> Expr:
        kind, tok, col, _ = self.take()
        if tok == "(":
            e = self.implication()
            self.take(")")
            return e
        if kind != "id":
            self.error(f"unexpected {tok!r}", col)
        if tok == "true":
            return E.TRUE
        if tok == "false":
            return E.FALSE
        if tok == "next" and self.peek() == "(":
            self.take("(")
            inner = self.implication()
            self.take(")")
            try:
                return E.nxt(inner)
            except ValueError as exc:
                self.error(str(exc), col)
        return self.atom(tok, col)

    def atom(self, name, col) -> Expr:
        if name not in self.domains:
            self.error(f"undeclared variable {name!r}", col)
        domain = self.domains[name]
        negate = False
        if self.peek() in ("=", "!="):
            negate = self.take()[1] == "!="
            kind, value, vcol, _ = self.take()
            if kind != "id":
                self.error("expected a value", vcol)
            if value not in domain:
                self.error(f"value {value!r} outside the domain of {name!r}", vcol)
        else:
            if domain != E.BOOL_DOMAIN:
                self.error(f"variable {name!r} is not Boolean; write {name} = <value>", col)
            value = E.TRUE_VALUE
        a = E.Atom(name, value)
        return E.Not(a) if negate else a


def parse_expr(text: str, domains: dict, line: int = 1) -> Expr:
    """Parse a single formula against ``domains`` (name -> value tuple)."""
    toks = _tokenize(text, line, 0)
    return _FormulaParser(toks, line, domains, len(text) + 1).parse()


def _strip_comment(raw: str) -> str:
    return raw.split("#", 1)[0].rstrip()


def _continues(text: str) -> bool:
    depth = text.count("(") - text.count(")")
    stripped = text.rstrip()
    return depth > 0 or stripped.endswith(("&", "|", "->", "!", "="))


def parse_spec(text: str, validate: bool = True) -> GR1Spec:
    """Parse a specification document.

    With ``validate`` (the default) formulas placed in a section whose
    shape they violate raise :class:`SpecShapeError`; pass ``False`` to get
    the raw spec and inspect it with :func:`validate_spec`.
    """
    current: Optional[str] = None
    decls: List[VarDecl] = []
    formulas = {s: [] for s in SECTIONS[2:]}
    pending = None  # (section, start_line, [(line, text), ...])
    seen_sections = set()

    def flush():
        nonlocal pending
        if pending is None:
            return
        section, start, body = pending
        pending = None
        domains = {d.name: tuple(d.domain) for d in decls}
        toks = []
        for ln, chunk in body:
            toks.extend(_tokenize(chunk, ln, 0))
        fp = _FormulaParser(toks, start, domains, len(body[-1][1]) + 1)
        formulas[section].append((start, fp.parse()))

    lines = text.splitlines()
    for lineno, raw in enumerate(lines, start=1):
        stripped = _strip_comment(raw)
        if pending is not None:
            if not stripped.strip():
                continue
            if not stripped.strip().startswith("["):
                pending[2].append((lineno, stripped))
                if not _continues(" ".join(c for _, c in pending[2])):
                    flush()
                continue
            flush()
        if not stripped.strip():
            continue
        s = stripped.strip()
        if s.startswith("["):
            m = re.fullmatch(r"\[\s*([a-z_]+)\s*\]", s)
            if not m or m.group(1) not in SECTIONS:
                raise SpecSyntaxError(f"unknown section header {s!r}", lineno, raw.index("[") + 1)
            current = m.group(1)
            if current in seen_sections:
                raise SpecSyntaxError(f"section [{current}] repeated", lineno, raw.index("[") + 1)
            seen_sections.add(current)
            continue
        if current is None:
            raise SpecSyntaxError("content before the first section header", lineno, 1)
        if current in ("env_vars", "sys_vars"):
            decls.append(_parse_decl(stripped, lineno, ENV if current == "env_vars" else SYS, decls))
            continue
        pending = (current, lineno, [(lineno, stripped)])
        if not _continues(stripped):
            flush()
    if pending is not None:
        if _continues(" ".join(c for _, c in pending[2])):
            ln, chunk = pending[2][-1]
            raise SpecSyntaxError("formula ends unexpectedly", ln, len(chunk) + 1)
        flush()

    spec = GR1Spec(
        vars=decls,
        theta_env=E.conj(f for _, f in formulas["env_init"]),
        theta_sys=E.conj(f for _, f in formulas["sys_init"]),
        env_safety=[f for _, f in formulas["env_safety"]],
        sys_safety=[f for _, f in formulas["sys_safety"]],
        env_progress=[f for _, f in formulas["env_progress"]] or [E.TRUE],
        sys_progress=[f for _, f in formulas["sys_progress"]] or [E.TRUE],
    )
    if validate:
        owners = {d.name: d.owner for d in decls}
        domains = spec.domains
        problems = []
        for section, entries in formulas.items():
            for i, (line, f) in enumerate(entries):
                for msg in check_formula(section, f, owners, domains):
                    problems.append(f"line {line}: [{section}] {msg}")
        if problems:
            raise SpecShapeError(validate_spec(spec), problems)
    return spec


_DECL = re.compile(r"\s*([A-Za-z_][A-Za-z0-9_]*)\s*(?::\s*(.*))?$")


def _parse_decl(text: str, line: int, owner: str, decls) -> VarDecl:
    m = _DECL.match(text)
    if not m:
        raise SpecSyntaxError(f"bad variable declaration {text.strip()!r}", line, 1)
    name, rest = m.group(1), m.group(2)
    if name in ("true", "false", "next"):
        raise SpecSyntaxError(f"{name!r} is reserved", line, text.index(name) + 1)
    if any(d.name == name for d in decls):
        raise SpecSyntaxError(f"variable {name!r} declared twice", line, text.index(name) + 1)
    if rest is None or rest.strip() in ("bool", "boolean"):
        return VarDecl(name, owner)
    m2 = re.fullmatch(r"\{\s*(.*?)\s*\}", rest.strip())
    if not m2:
        raise SpecSyntaxError("expected {value, ...} after ':'", line, text.index(":") + 2)
    values = tuple(v.strip() for v in m2.group(1).split(","))
    if any(not re.fullmatch(r"[A-Za-z0-9_.\-]+", v) for v in values):
        raise SpecSyntaxError(f"bad value list for {name!r}", line, text.index("{") + 1)
    try:
        return VarDecl(name, owner, values)
    except ValueError as exc:
        raise SpecSyntaxError(str(exc), line, 1) from None


def format_spec(spec: GR1Spec) -> str:
    """Deterministic pretty-printer; :func:`parse_spec` reads the result back."""
    bool_vars = {v.name for v in spec.vars if v.is_bool}
    out = []

    def section(name, lines):
        out.append(f"[{name}]")
        out.extend(lines)
        out.append("")

    def decl_line(v: VarDecl):
        return v.name if v.is_bool else f"{v.name} : {{{', '.join(v.domain)}}}"

    def init_lines(theta):
        if theta == E.TRUE:
            return []
        parts = theta.args if isinstance(theta, E.And) else (theta,)
        return [E.to_text(p, bool_vars) for p in parts]

    section("env_vars", [decl_line(v) for v in spec.env_vars])
    section("sys_vars", [decl_line(v) for v in spec.sys_vars])
    section("env_init", init_lines(spec.theta_env))
    section("sys_init", init_lines(spec.theta_sys))
    for name in ("env_safety", "sys_safety", "env_progress", "sys_progress"):
        section(name, [E.to_text(f, bool_vars) for f in getattr(spec, name)])
    return "\n".join(out)
