"""Command-line driver: ``fairparts <command> ...``.

Exit codes: 0 when the property holds or the check passes, 1 when it
fails (or is inconclusive), 2 on usage or input errors.
"""
from __future__ import annotations

import argparse
import datetime
import json
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from . import corpus
from .buchi import classify_formula
from .core import FairTransitionSystem, Lasso, Transition, TransitionSystem, dumps, loads
from .frontend import (EXTENSION, GluingMap, derive_mu, enumerate_system, gluing_invariant,
                       load_machine, load_refinement, parse_header)
from .logic import Expr, Not
from .modelcheck import (AUTO, MODES, OracleBudgetExceeded, PartResult,
                         default_workers, demonstrate_naive_unsoundness, oracle_check,
                         verify_by_parts, verify_under_fairness)
from .partition import CLASS, FAIR_CLOSURE, FRONTIER, Part, refinement_parts
from .pltl import formula_text, parse_formula, simplify_fairness_for_part
from .refinement import RefinementRefused, check_refinement, format_verdict

EXIT_OK, EXIT_NEGATIVE, EXIT_USAGE = 0, 1, 2
TEXT, STRUCTURED = "text", "structured"

# Named properties of the bundled protocol.  Q and Q' are the
# fairness-guarded forms of P and P'; the fairness antecedent is supplied
# by the verifier, so they resolve to the bare properties.
ALIASES = {"Q": "P", "Q'": "P'"}


class UsageError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    """What a run was asked to do; echoed in structured reports."""

    command: str
    inputs: tuple[str, ...]
    formula: str | None = None
    fairness_mode: str = AUTO
    strict_initial: bool = False
    workers: int = 1
    oracle_bound: int = 10
    output: str | None = None
    fmt: str = TEXT


@dataclass(frozen=True)
class LoadedPair:
    abstract: FairTransitionSystem
    refined: FairTransitionSystem
    mu: GluingMap


# -- inputs -------------------------------------------------------------------------------


def _bundled(arg: str) -> str | None:
    if Path(arg).exists():
        return None
    name = arg[:-len(EXTENSION)] if arg.endswith(EXTENSION) else arg
    return name if name in ("teg1", "teg1ref") else None


def load_system(arg: str, abstract: str | None = None) -> FairTransitionSystem:
    """An enumerated system from a bundled name, an event-system file or a TS document."""
    bundled = _bundled(arg)
    if bundled is not None:
        pair = corpus.teg1()
        return pair.abstract if bundled == "teg1" else pair.refined
    path = Path(arg)
    if not path.exists():
        raise FileNotFoundError(f"no such file: {arg}")
    text = path.read_text(encoding="utf-8")
    if path.suffix == ".json":
        return loads(text)
    if parse_header(text) is not None:
        aes, res = load_refinement(path, abstract)
        return enumerate_system(res, aes)
    return enumerate_system(load_machine(path))


def load_pair(abstract: str, refined: str) -> LoadedPair:
    """Abstract and refined systems with the gluing map of the refinement's invariant."""
    ba, br = _bundled(abstract), _bundled(refined)
    if (ba, br) == ("teg1", "teg1ref"):
        pair = corpus.teg1()
        return LoadedPair(pair.abstract, pair.refined, pair.mu)
    paths = []
    for arg, bundled in ((abstract, ba), (refined, br)):
        if bundled is not None:
            paths.append(corpus.path(bundled + EXTENSION))
        elif not Path(arg).exists():
            raise FileNotFoundError(f"no such file: {arg}")
        elif Path(arg).suffix == ".json":
            raise UsageError("refinement commands need event-system inputs carrying the gluing invariant")
        else:
            paths.append(Path(arg))
    aes, res = load_refinement(paths[1], paths[0])
    fts1 = enumerate_system(aes)
    fts2 = enumerate_system(res, aes)
    return LoadedPair(fts1, fts2, derive_mu(fts1, fts2, gluing_invariant(res)))


def drop_fairness(fts: FairTransitionSystem, keys: Sequence[str]) -> FairTransitionSystem:
    """Remove constraints given by name, by 0-based position, or by short name (F1', F21, F22)."""
    names = [f.name for f in fts.fairness]
    drop = set()
    for key in keys:
        if key in names:
            drop.add(names.index(key))
        elif key.isdigit() and int(key) < len(names):
            drop.add(int(key))
        elif key in corpus.REFINED_FAIRNESS and len(names) == len(corpus.REFINED_FAIRNESS):
            drop.add(corpus.REFINED_FAIRNESS.index(key))
        else:
            raise UsageError(f"no fairness constraint {key!r}; known: {', '.join(names)}")
    return fts.with_fairness(f for i, f in enumerate(fts.fairness) if i not in drop)


def resolve_formula(text: str | None, path: str | None) -> tuple[str, Expr]:
    if path is not None:
        text = Path(path).read_text(encoding="utf-8").strip()
    if text is None:
        raise UsageError("a formula is required")
    key = text.replace("′", "'").strip()
    key = ALIASES.get(key, key)
    if key in corpus.PROPERTIES:
        return key, parse_formula(corpus.PROPERTIES[key])
    return text, parse_formula(text)


# -- rendering ----------------------------------------------------------------------------


def _names(ts: TransitionSystem, states) -> list[str]:
    return [ts.name(s) for s in sorted(states)]


def _lasso_doc(lasso: Lasso | None, ts: TransitionSystem) -> dict | None:
    if lasso is None:
        return None
    return {"prefix": [[ts.name(s), a] for s, a in lasso.prefix],
            "cycle": [[ts.name(s), a] for s, a in lasso.cycle],
            "text": lasso.render(ts)}


def _clean(stats) -> dict:
    """Verdict statistics without wall-clock fields, so reports are reproducible."""
    return {k: v for k, v in sorted(stats.items()) if k != "wall_time"}


def _part_doc(part: Part, ts2: TransitionSystem, fts2: FairTransitionSystem,
              relevant: Sequence[int] | None = None) -> dict:
    doc = {
        "name": part.name,
        "states": _names(ts2, part.states),
        "class": _names(ts2, part.members(CLASS)),
        "frontier": _names(ts2, part.members(FRONTIER)),
        "fair_closure": _names(ts2, part.members(FAIR_CLOSURE)),
        "initial": _names(ts2, part.initial),
        "transitions": [[ts2.name(t.src), t.action, ts2.name(t.dst)] for t in sorted(part.transitions)],
    }
    if relevant is not None:
        doc["relevant_fairness"] = [fts2.fairness[i].name for i in relevant]
    return doc


def _part_lines(doc: dict) -> list[str]:
    lines = [f"part {doc['name']}: {len(doc['states'])} states, {len(doc['transitions'])} transitions",
             f"  class: {', '.join(doc['class'])}",
             f"  frontier: {', '.join(doc['frontier']) or '-'}",
             f"  fair closure: {', '.join(doc['fair_closure']) or '-'}",
             f"  initial: {', '.join(doc['initial'])}"]
    if "relevant_fairness" in doc:
        lines.append(f"  relevant fairness: {', '.join(doc['relevant_fairness']) or 'none'}")
    return lines


def _fairness_summary(fts: FairTransitionSystem) -> str:
    n = len(fts.fairness)
    sizes = " + ".join(str(len(f.transitions)) for f in fts.fairness)
    word = "constraint" if n == 1 else "constraints"
    noun = "transition" if sizes == "1" else "transitions"
    return f"{n} fairness {word}" + (f" ({sizes} {noun})" if n else "")


# -- commands -----------------------------------------------------------------------------


def cmd_enumerate(args) -> tuple[int, dict, list[str]]:
    fts = load_system(args.input, args.abstract)
    ts = fts.ts
    summary = f"{ts.n_states} states, {len(ts.transitions)} transitions, {_fairness_summary(fts)}"
    doc = {"command": "enumerate", "states": ts.n_states, "transitions": len(ts.transitions),
           "fairness": [{"name": f.name, "transitions": len(f.transitions)} for f in fts.fairness],
           "summary": summary}
    lines = [summary]
    if args.system_output:
        Path(args.system_output).write_text(dumps(fts), encoding="utf-8")
        lines.append(f"written to {args.system_output}")
    else:
        doc["system"] = json.loads(dumps(fts))
    return EXIT_OK, doc, lines


def cmd_check_refinement(args) -> tuple[int, dict, list[str]]:
    pair = load_pair(args.abstract, args.refined)
    fts2 = drop_fairness(pair.refined, args.drop_fairness)
    verdict = check_refinement(pair.abstract, fts2, pair.mu)
    ts1, ts2 = pair.abstract.ts, fts2.ts
    doc = {
        "command": "check-refinement",
        "passed": verdict.passed,
        "clauses": [{"clause": c.clause, "passed": c.passed, "message": c.message,
                     "path": [[ts2.name(t.src), t.action, ts2.name(t.dst)] for t in c.witness],
                     "cycle": [[ts2.name(t.src), t.action, ts2.name(t.dst)] for t in c.cycle]}
                    for c in verdict.clauses],
        "rho": sorted([ts2.name(s2), ts1.name(s1)] for s2, s1 in verdict.witness.rho),
        "sc2": _names(ts2, verdict.witness.sc2),
        "t1": {ts2.name(s2): sorted([ts1.name(t.src), t.action, ts1.name(t.dst)] for t in ts)
               for s2, ts in sorted(verdict.witness.t1.items())},
    }
    lines = format_verdict(verdict, pair.abstract, fts2).splitlines()
    return (EXIT_OK if verdict.passed else EXIT_NEGATIVE), doc, lines


def cmd_partition(args) -> tuple[int, dict, list[str]]:
    pair = load_pair(args.abstract, args.refined)
    parts = refinement_parts(pair.refined, pair.mu, pair.abstract, strict_initial=args.strict_initial)
    docs = [_part_doc(p, pair.refined.ts, pair.refined, simplify_fairness_for_part(p.ts, pair.refined))
            for p in parts]
    lines = [f"{len(parts)} parts"]
    for d in docs:
        lines.extend(_part_lines(d))
    _emit_parts(parts, args.emit_parts, lines)
    return EXIT_OK, {"command": "partition", "parts": docs}, lines


def _emit_parts(parts: Sequence[Part], directory: str | None, lines: list[str]) -> None:
    if not directory:
        return
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    for p in parts:
        target = out / f"part-{p.name}.json"
        target.write_text(p.dumps(), encoding="utf-8")
        lines.append(f"wrote {target}")


def _result_doc(r: PartResult, fts2: FairTransitionSystem) -> dict:
    doc = _part_doc(r.part, fts2.ts, fts2, r.relevant)
    doc["holds"] = r.holds
    doc["counterexample"] = _lasso_doc(r.verdict.counterexample, r.part.ts)
    doc["stats"] = _clean(r.verdict.stats)
    return doc


def cmd_verify(args) -> tuple[int, dict, list[str]]:
    positional = list(args.args)
    if args.formula_file is None:
        if not positional:
            raise UsageError("a formula is required")
        formula_arg = positional.pop()
    else:
        formula_arg = None
    _, formula = resolve_formula(formula_arg, args.formula_file)
    text = formula_text(formula)
    if args.classify_only:
        if positional:
            raise UsageError("--classify-only takes only a formula")
        verdict, automaton = classify_formula(Not(formula))
        doc = {"command": "verify", "mode": "classify-only", "formula": text, "abmod": verdict.member,
               "clause": verdict.clause, "reason": verdict.reason, "witness": list(verdict.witness),
               "automaton_states": automaton.n_states}
        lines = [f"property: {text}", f"negation: {verdict}"]
        return (EXIT_OK if verdict.member else EXIT_NEGATIVE), doc, lines
    if args.global_:
        if len(positional) != 1:
            raise UsageError("--global needs one system and a formula")
        fts = drop_fairness(load_system(positional[0], args.abstract), args.drop_fairness)
        v = verify_under_fairness(fts, formula, args.fairness_mode)
        doc = {"command": "verify", "mode": "global", "formula": text, "holds": v.holds,
               "counterexample": _lasso_doc(v.counterexample, fts.ts), "stats": _clean(v.stats)}
        lines = [f"property: {text}", f"global: {'holds' if v.holds else 'fails'}"]
        if v.counterexample is not None:
            lines.append("counterexample: " + v.counterexample.render(fts.ts))
        return (EXIT_OK if v.holds else EXIT_NEGATIVE), doc, lines
    if len(positional) != 2:
        raise UsageError("--by-parts needs the abstract and refined machines and a formula")
    pair = load_pair(*positional)
    fts2 = drop_fairness(pair.refined, args.drop_fairness)
    report = verify_by_parts(pair.abstract, fts2, pair.mu, formula, args.fairness_mode, args.workers,
                             args.strict_initial)
    results = [_result_doc(r, fts2) for r in report.results]
    doc = {"command": "verify", "mode": "by-parts", "formula": text, "abmod": report.abmod.member,
           "abmod_verdict": str(report.abmod), "parts": results, "aggregate": report.aggregate,
           "failing": list(report.failing)}
    lines = [f"property: {text}", f"negation: {report.abmod}", "refinement: PASS"]
    for r, d in zip(report.results, results):
        lines.extend(_part_lines(d))
        lines.append(f"  verdict: {'holds' if r.holds else 'fails'}")
        if r.verdict.counterexample is not None:
            lines.append("  counterexample: " + r.verdict.counterexample.render(r.part.ts))
    _emit_parts([r.part for r in report.results], args.emit_parts, lines)
    if not report.precondition_met:
        lines.append("note: the negated property is outside ABmod; the aggregate is advisory")
    lines.append(f"aggregate: {report.aggregate}")
    ok = report.aggregate == "holds" and report.precondition_met
    return (EXIT_OK if ok else EXIT_NEGATIVE), doc, lines


def cmd_oracle(args) -> tuple[int, dict, list[str]]:
    fts = drop_fairness(load_system(args.system, args.abstract), args.drop_fairness)
    _, formula = resolve_formula(args.formula, args.formula_file)
    v = oracle_check(fts, formula, args.oracle_bound)
    text = formula_text(formula)
    doc = {"command": "oracle", "formula": text, "bound": args.oracle_bound, "holds": v.holds,
           "lassos": v.stats["lassos"], "counterexample": _lasso_doc(v.counterexample, fts.ts)}
    lines = [f"property: {text}",
             f"oracle (bound {args.oracle_bound}, {v.stats['lassos']} lassos): "
             + ("no fair counterexample" if v.holds else "fails")]
    if v.counterexample is not None:
        lines.append("counterexample: " + v.counterexample.render(fts.ts))
    return (EXIT_OK if v.holds else EXIT_NEGATIVE), doc, lines


def _read_blocks(path: str, ts: TransitionSystem) -> dict[Transition, str]:
    """Block file: a JSON object mapping block names to lists of [src, action, dst].

    Transitions listed nowhere go to the block named ``rest``.
    """
    raw = json.loads(Path(path).read_text(encoding="utf-8"))
    index = {ts.name(s): s for s in ts.states}
    assignment: dict[Transition, str] = {}
    for block, items in sorted(raw.items()):
        for src, action, dst in items:
            if src not in index or dst not in index:
                raise UsageError(f"unknown state in block {block}: {src} -{action}-> {dst}")
            t = Transition(index[src], action, index[dst])
            if t not in ts.transition_set:
                raise UsageError(f"no transition {src} -{action}-> {dst}")
            assignment[t] = block
    for t in ts.transitions:
        assignment.setdefault(t, "rest")
    return assignment


def cmd_demo_unsoundness(args) -> tuple[int, dict, list[str]]:
    system = args.system or "teg1ref"
    fts2 = load_system(system, args.abstract)
    if args.blocks:
        assignment = _read_blocks(args.blocks, fts2.ts)
    elif _bundled(system) == "teg1ref":
        assignment = corpus.naive_assignment()
    else:
        raise UsageError("--blocks is required for systems other than the bundled teg1ref")
    _, formula = resolve_formula(args.formula or ("Q'" if args.formula_file is None else None),
                                     args.formula_file)
    report = demonstrate_naive_unsoundness(fts2, assignment, formula, mode=args.fairness_mode,
                                           workers=args.workers)
    ts2 = fts2.ts
    text = formula_text(formula)
    g = report.global_verdict
    doc = {"command": "demo-unsoundness", "formula": text, "global_holds": g.holds,
           "counterexample": _lasso_doc(g.counterexample, ts2),
           "parts": [{"name": r.part.name, "states": _names(ts2, r.part.states),
                      "initial": _names(ts2, r.part.initial), "holds": r.holds} for r in report.results],
           "paradox": report.paradox}
    lines = [f"property: {text}", f"global: {'holds' if g.holds else 'fails'}"]
    if g.counterexample is not None:
        lines.append("counterexample: " + g.counterexample.render(ts2))
    for d in doc["parts"]:
        lines.append(f"block {d['name']} ({', '.join(d['states'])}): {'holds' if d['holds'] else 'fails'}")
    lines.append("paradox reproduced: every block satisfies the property while the whole system does not"
                 if report.paradox else "no paradox: the block verdicts agree with the global one")
    return (EXIT_OK if report.paradox else EXIT_NEGATIVE), doc, lines


COMMANDS = {
    "enumerate": cmd_enumerate,
    "check-refinement": cmd_check_refinement,
    "partition": cmd_partition,
    "verify": cmd_verify,
    "oracle": cmd_oracle,
    "demo-unsoundness": cmd_demo_unsoundness,
}


# -- argument parsing ---------------------------------------------------------------------


def _positive(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("must be at least 1")
    return value


def _global_options(p: argparse.ArgumentParser, suppress: bool) -> None:
    def d(value):
        return argparse.SUPPRESS if suppress else value
    p.add_argument("--workers", type=_positive, default=d(None),
                   help="parallel part checks (default: $FAIRPARTS_WORKERS or 1)")
    p.add_argument("--fairness-mode", choices=MODES, default=d(AUTO),
                   help="fairness as a formula antecedent, as an algorithmic acceptance "
                        "condition, or formula with a size budget (auto)")
    p.add_argument("--oracle-bound", type=_positive, default=d(10),
                   help="maximal |prefix|+|cycle| of the brute-force oracle")
    p.add_argument("--format", choices=(TEXT, STRUCTURED), default=d(TEXT), dest="fmt")
    p.add_argument("-o", "--output", default=d(None), help="write the report to a file")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fairparts",
                                     description="Verify fair transition systems by refinement-based parts.")
    _global_options(parser, suppress=False)
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")

    def command(name: str, help: str) -> argparse.ArgumentParser:
        p = sub.add_parser(name, help=help, description=help)
        _global_options(p, suppress=True)
        return p

    p = command("enumerate", "enumerate the reachable states of a machine")
    p.add_argument("input", help="event-system file, TS document, or bundled name (teg1, teg1ref)")
    p.add_argument("--abstract", help="abstract machine of a refinement (default: found next to it)")
    p.add_argument("--system-output", metavar="FILE", help="write the enumerated system as a TS document")

    p = command("check-refinement", "check that a refined machine fairly refines an abstract one")
    p.add_argument("abstract")
    p.add_argument("refined")
    p.add_argument("--drop-fairness", action="append", default=[], metavar="KEY",
                   help="remove a refined fairness constraint before checking")

    p = command("partition", "split a refined machine into one part per abstract state")
    p.add_argument("abstract")
    p.add_argument("refined")
    p.add_argument("--strict-initial", action="store_true",
                   help="part initial states are entered by abstract actions only")
    p.add_argument("--emit-parts", metavar="DIR", help="write every part as a TS document")

    p = command("verify", "verify a PLTL property under fairness")
    p.add_argument("args", nargs="*", metavar="arg",
                   help="[abstract refined | system] formula (a formula or a property name)")
    how = p.add_mutually_exclusive_group()
    how.add_argument("--by-parts", action="store_true", help="verify on every part (default)")
    how.add_argument("--global", action="store_true", dest="global_", help="verify on the whole system")
    how.add_argument("--classify-only", action="store_true",
                     help="only decide whether the negated property is in ABmod")
    p.add_argument("--formula-file", metavar="FILE")
    p.add_argument("--abstract", help="abstract machine of a refinement given alone")
    p.add_argument("--drop-fairness", action="append", default=[], metavar="KEY")
    p.add_argument("--strict-initial", action="store_true")
    p.add_argument("--emit-parts", metavar="DIR")

    p = command("oracle", "check a property on every fair lasso up to a bound")
    p.add_argument("system")
    p.add_argument("formula", nargs="?")
    p.add_argument("--formula-file", metavar="FILE")
    p.add_argument("--abstract")
    p.add_argument("--drop-fairness", action="append", default=[], metavar="KEY")

    p = command("demo-unsoundness", "show that verification on arbitrary parts is unsound")
    p.add_argument("system", nargs="?", help="refined system (default: teg1ref)")
    p.add_argument("formula", nargs="?", help="property (default: Q')")
    p.add_argument("--formula-file", metavar="FILE")
    p.add_argument("--abstract")
    p.add_argument("--blocks", metavar="FILE", help="JSON object: block name -> [[src, action, dst], ...]")
    return parser


def run(argv: Sequence[str] | None = None, stdout=None, stderr=None) -> int:
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    if args.workers is None:
        args.workers = default_workers()
    try:
        code, doc, lines = COMMANDS[args.command](args)
    except RefinementRefused as exc:
        print(f"fairparts: {exc}", file=stderr)
        if exc.verdict is not None:
            print(format_verdict(exc.verdict, *_pair_for(args)), file=stderr)
        return EXIT_USAGE
    except (OSError, ValueError, OracleBudgetExceeded) as exc:
        print(f"fairparts: {exc}", file=stderr)
        return EXIT_USAGE
    if args.fmt == STRUCTURED:
        config = config_of(args)
        doc = {**doc, "exit_code": code,
               "config": {"command": config.command, "inputs": list(config.inputs),
                          "fairness_mode": config.fairness_mode, "strict_initial": config.strict_initial,
                          "oracle_bound": config.oracle_bound},
               "timestamp": datetime.datetime.now(datetime.timezone.utc).isoformat(timespec="seconds")}
        text = json.dumps(doc, sort_keys=True, indent=1, ensure_ascii=False) + "\n"
    else:
        text = "\n".join(lines) + "\n"
    if args.output:
        Path(args.output).write_text(text, encoding="utf-8")
    else:
        stdout.write(text)
    return code


def config_of(args) -> RunConfig:
    inputs = [getattr(args, k) for k in ("input", "abstract", "refined", "system") if getattr(args, k, None)]
    inputs += list(getattr(args, "args", ()) or ())
    return RunConfig(args.command, tuple(inputs), getattr(args, "formula", None),
                     args.fairness_mode, getattr(args, "strict_initial", False), args.workers,
                     args.oracle_bound, args.output, args.fmt)


def _pair_for(args) -> tuple[FairTransitionSystem, FairTransitionSystem]:
    positional = getattr(args, "args", None) or [args.abstract, args.refined]
    pair = load_pair(*positional[:2])
    return pair.abstract, drop_fairness(pair.refined, getattr(args, "drop_fairness", []))


def main(argv: Sequence[str] | None = None) -> None:
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
