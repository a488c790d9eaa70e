"""Command-line surface.

Exit codes: 0 success (property holds / nothing matched), 1 violated or
matched, 2 resource bound exceeded, 3 usage or parse errors. All diagnostics
go to standard error as ``file:line:col: message``. JSON output always has
the shape ``{"verdict", "counterexample", "probability", "error_bound",
"stats"}`` plus a command-specific ``result``.
"""

from __future__ import annotations

import argparse
import json
import sys

from .cellular import CellularAutomaton, ProbabilisticCellularAutomaton, ca_run, pca_step
from .checker import (
    CheckResult,
    DEFAULT_FLATTEN_BOUND,
    DEFAULT_TOL,
    Path,
    check_property,
    flatten,
)
from .composition import (
    MODE_SA_FROM_CA,
    MimicAutomaton,
    binding_seed,
    common_input_alphabet,
    ma_initial,
    ma_run,
)
from .detect import detect, load_signatures
from .dhr import DhrStructure, SerialDhr, dhr_run, inject_fault
from .dot import ca_graph_dot, dtmc_to_dot, render_config, ts_to_dot
from .errors import (
    ConvergenceError,
    ExplosionError,
    MimicError,
    ModelFormatError,
    SizeCapError,
)
from .modelfile import parse_files
from .rng import master_stream
from .sequential import SequentialAutomaton, sa_run

EXIT_OK = 0
EXIT_VIOLATED = 1
EXIT_RESOURCE = 2
EXIT_USAGE = 3


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage problems exit 3, not argparse's default 2
        raise _UsageError(message)


def _build_parser() -> _Parser:
    parser = _Parser(prog="ma", description="Build, simulate and check composite automata models.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="parse and validate model files")
    p.add_argument("files", nargs="+")

    p = sub.add_parser("simulate", help="run a model and report the final configuration")
    p.add_argument("files", nargs="+")
    p.add_argument("--model", required=True)
    p.add_argument("--input", required=True, help="word, or @file with one symbol per line")
    p.add_argument("--steps", type=int, required=True)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--trace", default=None, help="write a JSON trace to this path")
    p.add_argument("--format", choices=("text", "json"), default="text")

    p = sub.add_parser("check", help="check a property against a model")
    p.add_argument("files", nargs="+")
    p.add_argument("--model", required=True)
    p.add_argument("--property", dest="property_name", required=True)
    p.add_argument("--bound", type=int, default=DEFAULT_FLATTEN_BOUND)
    p.add_argument("--tol", type=float, default=DEFAULT_TOL)
    p.add_argument("--trials", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--format", choices=("text", "json"), default="text")

    p = sub.add_parser("dhr", help="run a redundant structure over a schedule")
    p.add_argument("files", nargs="+")
    p.add_argument("--model", required=True)
    p.add_argument("--input", required=True, help="word, or @file with one input block per line")
    p.add_argument("--inject", action="append", default=[], metavar="SLOT:SA",
                   help="route one slot to a faulty variant (repeatable)")
    p.add_argument("--seed", type=int, default=None)

    p = sub.add_parser("detect", help="scan a model against behavioral signatures")
    p.add_argument("files", nargs="+")
    p.add_argument("--model", required=True)
    p.add_argument("--signatures", nargs="+", required=True)
    p.add_argument("--bound", type=int, default=DEFAULT_FLATTEN_BOUND)
    p.add_argument("--format", choices=("text", "json"), default="text")

    p = sub.add_parser("export-dot", help="export the flattened graph (or raw lattice rule graph)")
    p.add_argument("files", nargs="+")
    p.add_argument("--model", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--raw-ca", action="store_true")

    return parser


def _load(files) -> "ModelDocument":
    doc, diagnostics = parse_files(list(files))
    if diagnostics:
        raise ModelFormatError(diagnostics)
    return doc


def _resolve_model(doc, name: str):
    hits = []
    for attr in ("mas", "dhrs", "serial_dhrs", "sas", "cas", "pcas"):
        table = getattr(doc, attr)
        if name in table:
            hits.append(table[name])
    if not hits:
        raise _UsageError(f"no model named {name!r} in the given files")
    if len(hits) > 1:
        raise _UsageError(f"model name {name!r} is ambiguous across kinds; rename one block")
    return hits[0]


def _read_input(spec: str, per_line_blocks: bool):
    """A word (single-character symbols) or @file content.

    With ``per_line_blocks`` each file line is one block; otherwise the file
    holds one symbol per line forming a single word.
    """
    if not spec.startswith("@"):
        return [tuple(spec)] if per_line_blocks else tuple(spec)
    with open(spec[1:], "r", encoding="utf-8") as handle:
        lines = [line.strip() for line in handle if line.strip()]
    if per_line_blocks:
        return [tuple(line) for line in lines]
    return tuple(lines)


def _default_universe(ma: MimicAutomaton):
    if ma.root().mode == MODE_SA_FROM_CA:
        alphabet = common_input_alphabet(ma)
        if not alphabet:
            raise _UsageError(
                "cannot derive an input universe (no common input alphabet); "
                "set 'inputs:' on the property"
            )
        return tuple((sym,) for sym in alphabet)
    return (binding_seed(ma, ma.root()),)


def _path_json(path: Path | None):
    if path is None:
        return None
    steps = []
    for i, state in enumerate(path.states):
        action = path.actions[i] if i < len(path.actions) else None
        steps.append(
            {
                "state": state,
                "action": None
                if action is None
                else {"input": "".join(str(s) for s in action.macro_input), "output": action.label()},
            }
        )
    return steps


def _report(result: CheckResult, fmt: str, extra: dict | None = None) -> None:
    if fmt == "json":
        payload = {
            "verdict": result.verdict,
            "counterexample": _path_json(result.counterexample),
            "probability": result.probability,
            "error_bound": result.error_bound,
            "stats": dict(result.stats),
        }
        if extra:
            payload["result"] = extra
        print(json.dumps(payload, sort_keys=True))
        return
    if result.verdict == "probability":
        bound = f" +/- {result.error_bound:.6g}" if result.error_bound is not None else ""
        print(f"probability: {result.probability:.10g}{bound}  ({result.method})")
    else:
        print(f"verdict: {result.verdict}")
        if result.counterexample is not None:
            kind = "witness" if result.verdict == "holds" else "counterexample"
            print(f"{kind} ({len(result.counterexample)} steps):")
            for i, state in enumerate(result.counterexample.states):
                print(f"  {state}")
                if i < len(result.counterexample.actions):
                    action = result.counterexample.actions[i]
                    word = "".join(str(s) for s in action.macro_input)
                    print(f"    --[{word} / {action.label()}]-->")
    for key in sorted(result.stats):
        print(f"stats.{key}: {result.stats[key]}")


# ---------------------------------------------------------------------------
# commands

def _cmd_validate(args) -> int:
    doc, diagnostics = parse_files(list(args.files))
    for diag in diagnostics:
        print(str(diag), file=sys.stderr)
    del doc
    return EXIT_OK if not diagnostics else EXIT_USAGE


def _simulate_ma(ma: MimicAutomaton, args) -> tuple[dict, list[str]]:
    entry = _read_input(args.input, per_line_blocks=False)
    schedule = [entry] * args.steps
    cfg = ma_initial(ma, binding_seed(ma, ma.root()))
    cfg, trace = ma_run(ma, cfg, schedule, seed=args.seed)
    lines = [f"model: {ma.name}", f"macro_clock: {cfg.macro_clock}", f"final: {render_config(cfg)}"]
    ticks = []
    for tick in trace:
        out = "".join(str(s) for s in tick.output or ())
        lines.append(
            f"tick {tick.index}: lattice {list(tick.lattice_before)} -> {list(tick.lattice_after)}"
            f", output {out!r}"
        )
        ticks.append(
            {
                "index": tick.index,
                "input": "".join(str(s) for s in tick.macro_input),
                "lattice_before": [str(q) for q in tick.lattice_before],
                "lattice_after": [str(q) for q in tick.lattice_after],
                "output": out,
            }
        )
    result = {
        "model": ma.name,
        "macro_clock": cfg.macro_clock,
        "final": render_config(cfg),
        "ticks": ticks,
    }
    return result, lines


def _cmd_simulate(args) -> int:
    doc = _load(args.files)
    model = _resolve_model(doc, args.model)
    if isinstance(model, MimicAutomaton):
        result, lines = _simulate_ma(model, args)
    elif isinstance(model, DhrStructure):
        block = _read_input(args.input, per_line_blocks=False)
        reports = dhr_run(model, [block] * args.steps, seed=args.seed)
        lines = [f"model: {model.name}"]
        ticks = []
        for i, rep in enumerate(reports):
            voted = "".join(rep.voted_output) if rep.voted_output is not None else "<abstain>"
            lines.append(f"tick {i}: voted {voted!r}, dissenters {sorted(rep.dissenters)}")
            ticks.append({"index": i, "voted": voted, "dissenters": sorted(rep.dissenters)})
        result = {"model": model.name, "ticks": ticks}
    elif isinstance(model, SequentialAutomaton):
        word = _read_input(args.input, per_line_blocks=False)
        run = sa_run(model, word)
        lines = [
            f"model: {model.name}",
            f"final_state: {run.final_state}",
            f"accepted: {run.accepted}",
            f"output: {''.join(run.output_word)}",
            f"steps: {run.steps}",
        ]
        result = {
            "model": model.name,
            "final_state": run.final_state,
            "accepted": run.accepted,
            "output": "".join(run.output_word),
            "steps": run.steps,
        }
    elif isinstance(model, CellularAutomaton):
        lattice = _read_input(args.input, per_line_blocks=False)
        run = ca_run(model, lattice, t_max=args.steps)
        lines = [f"model: {model.name}", f"terminated_by: {run.terminated_by}"]
        lines += [f"t={i}: {list(lat)}" for i, lat in enumerate(run.trace)]
        result = {
            "model": model.name,
            "terminated_by": run.terminated_by,
            "trace": [[str(q) for q in lat] for lat in run.trace],
        }
    elif isinstance(model, ProbabilisticCellularAutomaton):
        lattice = _read_input(args.input, per_line_blocks=False)
        rng = master_stream(args.seed)
        trace = [tuple(lattice)]
        for _ in range(args.steps):
            trace.append(pca_step(model, trace[-1], rng))
        lines = [f"model: {model.name}"] + [f"t={i}: {list(lat)}" for i, lat in enumerate(trace)]
        result = {"model": model.name, "trace": [[str(q) for q in lat] for lat in trace]}
    else:
        raise _UsageError(f"model {args.model!r} is not simulatable")

    if args.trace:
        with open(args.trace, "w", encoding="utf-8") as handle:
            json.dump(result, handle, indent=2, sort_keys=True)
    if args.format == "json":
        payload = {
            "verdict": "ok",
            "counterexample": None,
            "probability": None,
            "error_bound": None,
            "stats": {"steps": args.steps},
            "result": result,
        }
        print(json.dumps(payload, sort_keys=True))
    else:
        print("\n".join(lines))
    return EXIT_OK


def _cmd_check(args) -> int:
    doc = _load(args.files)
    model = _resolve_model(doc, args.model)
    if isinstance(model, DhrStructure):
        model = model.automaton
    if not isinstance(model, MimicAutomaton):
        raise _UsageError(f"{args.model!r} is not a checkable model (expected ma or dhr)")
    prop = doc.properties.get(args.property_name)
    if prop is None:
        raise _UsageError(f"no property named {args.property_name!r}")
    universe = prop.inputs if prop.inputs is not None else _default_universe(model)
    result = check_property(
        model,
        prop,
        input_universe=universe,
        bound=args.bound,
        tol=args.tol,
        trials=args.trials,
        seed=args.seed,
    )
    _report(result, args.format)
    if result.verdict == "violated":
        return EXIT_VIOLATED
    return EXIT_OK


def _cmd_dhr(args) -> int:
    doc = _load(args.files)
    model = _resolve_model(doc, args.model)
    if not isinstance(model, (DhrStructure, SerialDhr)):
        raise _UsageError(f"{args.model!r} is not a dhr or serial_dhr")
    for spec in args.inject:
        slot_text, _, sa_name = spec.partition(":")
        try:
            slot = int(slot_text)
        except ValueError:
            raise _UsageError(f"--inject expects SLOT:SA, got {spec!r}")
        faulty = doc.sas.get(sa_name)
        if faulty is None:
            raise _UsageError(f"--inject: unknown machine {sa_name!r}")
        if isinstance(model, SerialDhr):
            raise _UsageError("--inject applies to a single dhr; inject into a stage instead")
        model = inject_fault(model, slot, faulty)
    schedule = _read_input(args.input, per_line_blocks=True)
    reports = dhr_run(model, schedule, seed=args.seed)
    for i, rep in enumerate(reports):
        voted = "".join(rep.voted_output) if rep.voted_output is not None else "<abstain>"
        slots = " ".join("".join(w) for w in rep.per_slot_outputs)
        print(
            f"tick {i}: input {''.join(rep.input_block)!r} slots [{slots}] "
            f"voted {voted!r} dissenters {sorted(rep.dissenters)} "
            f"lattice {list(rep.lattice_before)} -> {list(rep.lattice_after)}"
        )
    return EXIT_OK


def _cmd_detect(args) -> int:
    doc = _load(args.files)
    model = _resolve_model(doc, args.model)
    if isinstance(model, DhrStructure):
        model = model.automaton
    if not isinstance(model, MimicAutomaton):
        raise _UsageError(f"{args.model!r} is not a scannable model (expected ma or dhr)")
    signatures = load_signatures(args.signatures)
    report = detect(model, _default_universe(model), signatures, bound=args.bound)
    matched = report.matched
    if args.format == "json":
        payload = {
            "verdict": "matched" if matched else "clean",
            "counterexample": _path_json(matched[0].witness) if matched else None,
            "probability": None,
            "error_bound": None,
            "stats": dict(report.stats),
            "result": {
                "model": report.model,
                "signatures": [
                    {
                        "id": r.signature_id,
                        "severity": r.severity,
                        "matched": r.matched,
                        "witness": _path_json(r.witness),
                    }
                    for r in report.results
                ],
            },
        }
        print(json.dumps(payload, sort_keys=True))
    else:
        print(f"model: {report.model}")
        for r in report.results:
            status = "MATCHED" if r.matched else "clean"
            extra = f" (witness length {len(r.witness)})" if r.witness is not None else ""
            print(f"  {r.signature_id} [severity {r.severity}]: {status}{extra}")
    return EXIT_VIOLATED if matched else EXIT_OK


def _cmd_export_dot(args) -> int:
    doc = _load(args.files)
    model = _resolve_model(doc, args.model)
    if args.raw_ca:
        if isinstance(model, MimicAutomaton):
            ca = model.ca_set[model.root().ca]
        elif isinstance(model, DhrStructure):
            ca = model.scheduler
        elif isinstance(model, (CellularAutomaton, ProbabilisticCellularAutomaton)):
            ca = model
        else:
            raise _UsageError(f"{args.model!r} has no lattice rule to export")
        text = ca_graph_dot(ca)
    else:
        if isinstance(model, DhrStructure):
            model = model.automaton
        if not isinstance(model, MimicAutomaton):
            raise _UsageError(f"{args.model!r} is not flattenable (expected ma or dhr)")
        from .composition import has_randomness

        if has_randomness(model):
            from .checker import build_dtmc

            dtmc = build_dtmc(model, _default_universe(model)[0])
            text = dtmc_to_dot(dtmc)
        else:
            ts = flatten(model, _default_universe(model))
            text = ts_to_dot(ts)
    with open(args.out, "w", encoding="utf-8") as handle:
        handle.write(text)
    print(f"wrote {args.out}")
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        command = {
            "validate": _cmd_validate,
            "simulate": _cmd_simulate,
            "check": _cmd_check,
            "dhr": _cmd_dhr,
            "detect": _cmd_detect,
            "export-dot": _cmd_export_dot,
        }[args.command]
        return command(args)
    except _UsageError as exc:
        print(f"ma: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ModelFormatError as exc:
        for diag in exc.diagnostics:
            print(str(diag), file=sys.stderr)
        return EXIT_USAGE
    except (ExplosionError, SizeCapError, ConvergenceError) as exc:
        print(f"ma: resource bound: {exc}", file=sys.stderr)
        return EXIT_RESOURCE
    except (MimicError, ValueError, OSError) as exc:
        print(f"ma: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
