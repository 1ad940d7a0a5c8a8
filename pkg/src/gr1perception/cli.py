"""Command-line interface: ``gr1p {check,synth,simulate,report,export-dot}``.

Exit status is 0 on success, 1 on a domain failure (invalid spec, or an
unrealizable spec under ``--require-realizable``) and 2 on usage or I/O
errors.
"""
from __future__ import annotations

import argparse
import json
import os
import shutil
import sys
import tempfile
from pathlib import Path
from typing import Dict, Optional

from . import scenarios
from .game import GameError, NoInitialState, StateCapExceeded, build_game
from .motion import MotionError, load_corridor, movement_abstraction
from .parser import SpecShapeError, SpecSyntaxError, parse_spec
from .refinement import TreeError, load_tree
from .simulator import BASELINE, INCREMENTAL, MismatchError, ScenarioConfig, ScenarioError, \
    compare, load_scenario, run_experiment, trace_record
from .solver import solve
from .spec import validate_spec
from .strategy import Strategy, extract_strategy

OK, FAIL, USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _err(msg: str):
    print(msg, file=sys.stderr)


def _read(path: str) -> str:
    try:
        with open(path, encoding="utf-8") as fh:
            return fh.read()
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror}") from None


def _dumps(obj) -> str:
    return json.dumps(obj, indent=1, sort_keys=True) + "\n"


def _publish(out: Path, files: Dict[str, str]):
    """Write ``files`` into ``out`` so readers never see a half-written set."""
    out = Path(out)
    try:
        out.parent.mkdir(parents=True, exist_ok=True)
        tmp = Path(tempfile.mkdtemp(prefix=f".{out.name}.", dir=out.parent))
    except OSError as exc:
        raise UsageError(f"cannot write to {out}: {exc.strerror}") from None
    try:
        for rel, text in files.items():
            p = tmp / rel
            p.parent.mkdir(parents=True, exist_ok=True)
            p.write_text(text)
        if not out.exists():
            os.rename(tmp, out)
            return
        for rel in files:
            dst = out / rel
            dst.parent.mkdir(parents=True, exist_ok=True)
            os.replace(tmp / rel, dst)
    except OSError as exc:
        raise UsageError(f"cannot write to {out}: {exc.strerror}") from None
    finally:
        if tmp.exists():
            shutil.rmtree(tmp, ignore_errors=True)


def _load_spec(path: str):
    text = _read(path)
    return parse_spec(text)


# -- subcommands ---------------------------------------------------------------------------

def cmd_check(args) -> int:
    if not (args.spec or args.tree or args.corridor or args.scenario):
        raise UsageError("check needs --spec, --tree, --corridor or --scenario")
    status = OK
    if args.spec:
        text = _read(args.spec)
        try:
            spec = parse_spec(text, validate=False)
        except SpecSyntaxError as exc:
            _err(f"{args.spec}: {exc}")
            return FAIL
        problems = validate_spec(spec)
        if problems:
            try:
                parse_spec(text)
            except SpecShapeError as exc:
                for msg in str(exc).split("; "):
                    _err(f"{args.spec}: {msg}")
            status = FAIL
        else:
            print(f"{args.spec}: ok ({len(spec.env_vars)} env vars, {len(spec.sys_vars)} sys vars)")
    for path, loader in ((args.tree, load_tree), (args.corridor, load_corridor), (args.scenario, load_scenario)):
        if not path:
            continue
        if not os.path.exists(path):
            raise UsageError(f"cannot read {path}: No such file or directory")
        try:
            loader(path)
            print(f"{path}: ok")
        except (TreeError, MotionError, ScenarioError, KeyError, TypeError, ValueError) as exc:
            _err(f"{path}: {exc}")
            status = FAIL
    return status


def cmd_synth(args) -> int:
    try:
        spec = _load_spec(args.spec)
    except (SpecSyntaxError, SpecShapeError) as exc:
        _err(f"{args.spec}: {exc}")
        return FAIL
    try:
        game = build_game(spec, strict=args.strict)
    except StateCapExceeded as exc:
        _err(f"state cap exceeded: {exc} (raise it with GR1_STATE_CAP)")
        return FAIL
    except NoInitialState as exc:
        _err(str(exc))
        return FAIL
    except GameError as exc:
        _err(str(exc))
        return FAIL
    result = solve(game)
    stats = dict(result.stats)
    if not args.timing:
        stats.pop("wall_time_s", None)
    stats["realizable"] = result.realizable
    stats["strict"] = args.strict
    files = {"stats.json": _dumps(stats)}
    if result.realizable:
        strategy = extract_strategy(result)
        stats["strategy_states"] = len(strategy.states)
        files["stats.json"] = _dumps(stats)
        files["strategy.json"] = strategy.dumps()
        files["strategy.dot"] = strategy.to_dot()
    if args.out:
        _publish(Path(args.out), files)
    print("REALIZABLE" if result.realizable else "UNREALIZABLE")
    if not result.realizable and args.require_realizable:
        return FAIL
    return OK


def _synth_arm(config: ScenarioConfig) -> Strategy:
    spec = scenarios.event_spec(config.model, config.mode == INCREMENTAL, config.horizon)
    result = solve(build_game(spec))
    if not result.realizable:
        raise MismatchError(f"{config.event} {config.mode} specification is unrealizable")
    return extract_strategy(result)


def cmd_simulate(args) -> int:
    if not os.path.exists(args.scenario):
        raise UsageError(f"cannot read {args.scenario}: No such file or directory")
    try:
        base = load_scenario(args.scenario)
    except (ScenarioError, ValueError, TypeError) as exc:
        _err(f"{args.scenario}: {exc}")
        return FAIL
    overrides = {}
    if args.trials is not None:
        overrides["trials"] = args.trials
    if args.seed is not None:
        overrides["seed"] = args.seed
    arms = [BASELINE, INCREMENTAL] if args.arms == "both" else [args.arms or base.mode]
    if args.strategy and len(arms) > 1:
        raise UsageError("--strategy drives a single arm; pick it with --arms")
    files = {}
    hists = {}
    try:
        for arm in arms:
            d = base.to_json()
            d.update(overrides, mode=arm)
            config = ScenarioConfig.from_json(d)
            if args.strategy:
                strategy = Strategy.from_json(json.loads(_read(args.strategy)))
            else:
                strategy = _synth_arm(config)
            hist, results = run_experiment(config, strategy, keep_steps=True)
            hists[arm] = hist
            prefix = f"{arm}/" if len(arms) > 1 else ""
            files[prefix + "histogram.json"] = _dumps(hist.to_json())
            files[prefix + "histogram.csv"] = hist.to_csv()
            files[prefix + "traces.jsonl"] = "".join(
                json.dumps(trace_record(i, config, r), sort_keys=True) + "\n" for i, r in enumerate(results))
            print(f"{arm}: mean s = {hist.mean_s:.3f}, infeasible rate = {hist.infeasible_rate:.3f}, "
                  f"safety violations = {hist.safety_violations}")
        if len(arms) > 1:
            report = compare(hists[BASELINE], hists[INCREMENTAL])
            files["comparison.json"] = _dumps(report.to_json())
            print(f"incremental - baseline: mean s {report.mean_s_delta:+.3f}, "
                  f"infeasible rate {report.infeasible_rate_delta:+.3f}")
    except (ScenarioError, MismatchError) as exc:
        _err(str(exc))
        return FAIL
    except (ValueError, KeyError) as exc:
        _err(f"bad strategy file: {exc}")
        return FAIL
    if args.out:
        _publish(Path(args.out), files)
    return OK


def cmd_report(args) -> int:
    run = Path(args.run)
    if not run.is_dir():
        raise UsageError(f"{run} is not a directory")
    lines = []
    stats = run / "stats.json"
    if stats.exists():
        st = json.loads(stats.read_text())
        verdict = "REALIZABLE" if st.get("realizable") else "UNREALIZABLE"
        lines.append(f"synthesis: {verdict}")
        for k in sorted(st):
            if k != "realizable":
                lines.append(f"  {k}: {st[k]}")
    hist_files = sorted(run.glob("histogram.json")) + sorted(run.glob("*/histogram.json"))
    for hf in hist_files:
        h = json.loads(hf.read_text())
        lines.append(f"{h['event']} / {h['mode']}: {h['trials']} trials, {h['event_trials']} with the event")
        width = max(len(lab) for lab in h["labels"])
        for lab in h["labels"]:
            bar = "#" * h["counts"][lab]
            lines.append(f"  {lab:<{width}} {h['counts'][lab]:4d}  s={h['mean_s_by_label'][lab]:.2f}  {bar}")
        lines.append(f"  mean s {h['mean_s']:.3f}, infeasible rate {h['infeasible_rate']:.3f}")
    comp = run / "comparison.json"
    if comp.exists():
        c = json.loads(comp.read_text())
        lines.append(f"incremental vs baseline: mean s {c['mean_s_incremental']:.3f} vs {c['mean_s_baseline']:.3f}, "
                     f"infeasible {c['infeasible_rate_incremental']:.3f} vs {c['infeasible_rate_baseline']:.3f}, "
                     f"dominates: {c['dominates']}")
    if not lines:
        _err(f"{run}: no synthesis or simulation artifacts found")
        return FAIL
    print("\n".join(lines))
    return OK


def cmd_export_dot(args) -> int:
    chosen = [x for x in (args.tree, args.corridor, args.strategy, args.spec) if x]
    if len(chosen) != 1:
        raise UsageError("export-dot takes exactly one of --tree, --corridor, --strategy, --spec")
    try:
        if args.tree:
            if not os.path.exists(args.tree):
                raise UsageError(f"cannot read {args.tree}: No such file or directory")
            dot = load_tree(args.tree).to_dot()
        elif args.corridor:
            if not os.path.exists(args.corridor):
                raise UsageError(f"cannot read {args.corridor}: No such file or directory")
            corridor = load_corridor(args.corridor)
            ts = movement_abstraction(corridor) if args.movement else corridor.to_ts()
            dot = ts.to_dot("movement" if args.movement else "cells")
        elif args.strategy:
            dot = Strategy.from_json(json.loads(_read(args.strategy))).to_dot()
        else:
            result = solve(build_game(_load_spec(args.spec), strict=args.strict))
            if not result.realizable:
                _err("UNREALIZABLE")
                return FAIL
            dot = extract_strategy(result).to_dot()
    except (TreeError, MotionError, SpecSyntaxError, SpecShapeError, GameError, ValueError, KeyError) as exc:
        _err(str(exc))
        return FAIL
    if args.out:
        try:
            Path(args.out).write_text(dot)
        except OSError as exc:
            raise UsageError(f"cannot write {args.out}: {exc.strerror}") from None
    else:
        sys.stdout.write(dot)
    return OK


# -- argument parsing --------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="gr1p", description="GR(1) synthesis for perception-aware driving rules.")
    sub = p.add_subparsers(dest="command", required=True)

    c = sub.add_parser("check", help="validate a spec, tree, corridor or scenario file")
    c.add_argument("spec_pos", nargs="?", metavar="SPEC")
    c.add_argument("--spec")
    c.add_argument("--tree")
    c.add_argument("--corridor")
    c.add_argument("--scenario")
    c.set_defaults(func=cmd_check)

    def strictness(q):
        g = q.add_mutually_exclusive_group()
        g.add_argument("--strict", dest="strict", action="store_true", default=True,
                       help="system may not break a guarantee first (default)")
        g.add_argument("--non-strict", dest="strict", action="store_false")

    s = sub.add_parser("synth", help="decide realizability and write the controller")
    s.add_argument("spec_pos", nargs="?", metavar="SPEC")
    s.add_argument("--spec")
    s.add_argument("--out", help="output directory for strategy.json, strategy.dot, stats.json")
    s.add_argument("--require-realizable", action="store_true", help="exit 1 when unrealizable")
    s.add_argument("--timing", action="store_true", help="include wall time in stats.json")
    strictness(s)
    s.set_defaults(func=cmd_synth)

    m = sub.add_parser("simulate", help="run the seeded corridor experiment")
    m.add_argument("--scenario", required=True)
    m.add_argument("--strategy", help="strategy.json to drive a single arm (default: synthesize)")
    m.add_argument("--arms", choices=[BASELINE, INCREMENTAL, "both"])
    m.add_argument("--trials", type=int)
    m.add_argument("--seed", type=int)
    m.add_argument("--out")
    m.set_defaults(func=cmd_simulate)

    r = sub.add_parser("report", help="summarise synth or simulate output")
    r.add_argument("run", metavar="DIR")
    r.set_defaults(func=cmd_report)

    d = sub.add_parser("export-dot", help="DOT graph of a tree, corridor, strategy or spec controller")
    d.add_argument("--tree")
    d.add_argument("--corridor")
    d.add_argument("--movement", action="store_true", help="with --corridor: the cell-pair abstraction")
    d.add_argument("--strategy")
    d.add_argument("--spec")
    d.add_argument("--out")
    strictness(d)
    d.set_defaults(func=cmd_export_dot)
    return p


def main(argv: Optional[list] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return USAGE if exc.code else OK
    if getattr(args, "spec_pos", None):
        if args.spec:
            _err("give the spec either positionally or with --spec")
            return USAGE
        args.spec = args.spec_pos
    if args.command == "synth" and not args.spec:
        _err("synth needs a spec")
        return USAGE
    if args.command == "simulate" and args.trials is not None and args.trials < 1:
        _err("--trials must be at least 1")
        return USAGE
    try:
        return args.func(args)
    except UsageError as exc:
        _err(str(exc))
        return USAGE


if __name__ == "__main__":
    sys.exit(main())
