"""Command line entry point: ``cargo-recovery <subcommand> ...``.

Exit codes: 0 success, 2 infeasible, 3 a time or iteration limit was hit but a
plan was still produced, 1 any other failure, 64 bad usage.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from pathlib import Path

from . import io
from .domain import DomainError
from .lp import Infeasible, SolverError, TimeLimitWithoutIncumbent
from .predictor import EmptyLog, ModelMissing
from .scenarios import GenerationFailure

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_INFEASIBLE = 2
EXIT_LIMIT = 3
EXIT_USAGE = 64

log = logging.getLogger("cargo_recovery")


class _Parser(argparse.ArgumentParser):
    # argparse's own usage exit code (2) would collide with "infeasible"
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _status_code(status: str) -> int:
    return EXIT_OK if status == "Optimal" else EXIT_LIMIT


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _crg_config(args, mode: str | None = None):
    from .crg import CrgConfig
    from .predictor import load_model

    mode = mode or args.mode
    model = load_model(args.model) if getattr(args, "model", None) and mode == "ml-crg" else None
    return CrgConfig(mode=mode, with_vi=args.vi == "on", predictor=model, time_limit=args.time_limit,
                     max_iterations=args.max_iterations)


# --- subcommands ---------------------------------------------------------------


def cmd_gen_scenario(args) -> int:
    from .scenarios import GeneratorConfig, generate_scenario, micro_config, tight_turn_config

    presets = {"default": lambda seed: GeneratorConfig(seed=seed), "micro": micro_config,
               "tight-turn": tight_turn_config}
    cfg = presets[args.preset](args.seed)
    overrides = {
        "n_airports": args.airports, "n_hubs": args.hubs, "n_aircraft": args.aircraft,
        "n_flights": args.flights, "n_cargo": args.cargo, "horizon_hours": args.hours,
        "n_disruptions": args.disruptions, "max_delay": args.max_delay,
    }
    fields = dict(cfg.__dict__)
    fields.update({k: v for k, v in overrides.items() if v is not None})
    scn = generate_scenario(GeneratorConfig(**fields))
    _emit(io.dumps(io.scenario_to_dict(scn)), args.out)
    return EXIT_OK


def cmd_solve_arc(args) -> int:
    from .arc_model import solve_arc

    scn = io.load_scenario(args.scenario)
    res = solve_arc(scn, args.max_delay, args.interval, time_limit=args.time_limit)
    io.save_plan(res.plan, args.out, res.cost.as_dict())
    print(f"objective {res.objective:.2f}  variables {res.n_vars}  rows {res.n_rows}")
    return _status_code(res.status)


def cmd_solve_string(args) -> int:
    from .crg import run_crg

    scn = io.load_scenario(args.scenario)
    res = run_crg(scn, _crg_config(args))
    io.save_plan(res.plan, args.out, res.cost.as_dict())
    if args.log:
        res.log.write(args.log)
    print(f"LP {res.lp_objective:.4f}  IP {res.ip_objective:.2f}  gap {100 * res.gap:.4f}%  "
          f"iterations {res.iterations}  sc rows {res.n_sc_rows}")
    return _status_code(res.status)


def cmd_solve_seq(args) -> int:
    from .crg import CrgConfig, run_sequential

    scn = io.load_scenario(args.scenario)
    res = run_sequential(scn, CrgConfig(time_limit=args.time_limit))
    if args.out:
        io.save_plan(res.plan, args.out, res.cost.as_dict())
    print(f"total {res.cost.total:.2f}  flight stage {res.flight_objective:.2f}  cargo stage {res.cargo_objective:.2f}")
    return EXIT_OK


def cmd_train_ml(args) -> int:
    from .predictor import extract_features, save_model, train, write_samples

    logs = sorted(Path(args.logs).glob("*_connections.csv"))
    if not logs:
        print(f"no *_connections.csv files in {args.logs}", file=sys.stderr)
        return EXIT_ERROR
    samples = extract_features(logs)
    if args.samples_out:
        write_samples(samples, args.samples_out)
    model = train(samples, k_folds=args.folds, seed=args.seed)
    save_model(model, args.out)
    pos = sum(s.label for s in samples)
    print(f"samples {len(samples)}  positives {pos}  IR {model.ir:.2f}  leaves {model.n_leaves}  cp {model.cp:.6g}")
    return EXIT_OK


def cmd_eval_ml(args) -> int:
    from .predictor import evaluate, load_model, read_samples

    scores = evaluate(load_model(args.model), read_samples(args.test))
    print(json.dumps(scores, sort_keys=True))
    return EXIT_OK


def cmd_report(args) -> int:
    from .arc_model import solve_arc
    from .crg import CrgConfig, run_crg, run_sequential
    from .domain import plan_cost
    from .reports import RunSummary, emit_reports, summarize

    scn = io.load_scenario(args.scenario)
    runs = []
    code = EXIT_OK
    for method in [m.strip() for m in args.methods.split(",") if m.strip()]:
        t0 = time.perf_counter()
        if method in ("crg", "ml-crg", "heur-crg"):
            if method == "ml-crg" and not args.model:
                print("ml-crg needs --model", file=sys.stderr)
                return EXIT_USAGE
            res = run_crg(scn, _crg_config(args, method))
            code = max(code, _status_code(res.status))
        elif method == "seq":
            res = run_sequential(scn, CrgConfig(time_limit=args.time_limit))
        elif method == "arc":
            res = solve_arc(scn, args.max_delay, args.interval, time_limit=args.time_limit)
            code = max(code, _status_code(res.status))
        else:
            print(f"unknown method {method!r}", file=sys.stderr)
            return EXIT_USAGE
        runs.append(summarize(method, res, time.perf_counter() - t0))
    for spec in args.plan or []:
        label, _, path = spec.partition("=")
        plan = io.load_plan(path)
        runs.append(RunSummary(label, plan, plan_cost(plan, scn).total))
    paths = emit_reports(runs, scn, args.out, with_time=args.time)
    for kind, path in paths.items():
        print(f"{kind}: {path}")
    return code


def cmd_bench(args) -> int:
    from .bench import bench_kernels, format_table

    sizes = tuple(int(s) for s in args.sizes.split(","))
    print(format_table(bench_kernels(sizes, repeats=args.repeats)))
    return EXIT_OK


# --- parser --------------------------------------------------------------------


def _solver_options(p: argparse.ArgumentParser) -> None:
    p.add_argument("--mode", choices=("crg", "ml-crg", "heur-crg"), default="crg")
    p.add_argument("--vi", choices=("on", "off"), default="on", help="valid inequality rows")
    p.add_argument("--model", help="tree file from train-ml (ml-crg mode)")
    p.add_argument("--time-limit", type=float, default=600.0, help="MIP time limit in seconds")
    p.add_argument("--max-iterations", type=int, default=200)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="cargo-recovery", description="Joint aircraft and cargo recovery after disruptions.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log solver progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("gen-scenario", help="write a synthetic disrupted schedule")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--preset", choices=("default", "micro", "tight-turn"), default="default")
    for flag in ("airports", "hubs", "aircraft", "flights", "cargo", "hours", "disruptions", "max-delay"):
        p.add_argument(f"--{flag}", type=int)
    p.add_argument("--out", help="output file (default: stdout)")
    p.set_defaults(func=cmd_gen_scenario)

    p = sub.add_parser("solve-arc", help="solve the time-expanded arc model on a fixed grid")
    p.add_argument("--scenario", required=True)
    p.add_argument("--max-delay", type=int, required=True)
    p.add_argument("--interval", type=int, required=True)
    p.add_argument("--time-limit", type=float, default=600.0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_solve_arc)

    p = sub.add_parser("solve-string", help="column-and-row generation on the string model")
    p.add_argument("--scenario", required=True)
    _solver_options(p)
    p.add_argument("--out", required=True)
    p.add_argument("--log", help="iteration CSV; connection observations go next to it")
    p.set_defaults(func=cmd_solve_string)

    p = sub.add_parser("solve-seq", help="two-stage baseline: aircraft first, cargo second")
    p.add_argument("--scenario", required=True)
    p.add_argument("--time-limit", type=float, default=600.0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_solve_seq)

    p = sub.add_parser("train-ml", help="train the short-connection tree from CRG connection logs")
    p.add_argument("--logs", required=True, help="directory of *_connections.csv files")
    p.add_argument("--out", required=True)
    p.add_argument("--folds", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--samples-out", help="also write the extracted training samples here")
    p.set_defaults(func=cmd_train_ml)

    p = sub.add_parser("eval-ml", help="score a tree on a samples CSV")
    p.add_argument("--model", required=True)
    p.add_argument("--test", required=True)
    p.set_defaults(func=cmd_eval_ml)

    p = sub.add_parser("report", help="run solvers on a scenario and write the CSV reports")
    p.add_argument("--scenario", required=True)
    p.add_argument("--methods", default="crg,heur-crg,seq",
                   help="comma list from crg, ml-crg, heur-crg, seq, arc")
    _solver_options(p)
    p.add_argument("--max-delay", type=int, default=240, help="arc model grid span")
    p.add_argument("--interval", type=int, default=30, help="arc model grid step")
    p.add_argument("--plan", action="append", metavar="LABEL=FILE", help="also report an existing plan")
    p.add_argument("--time", action="store_true", help="add a wall-clock column (not reproducible)")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("bench", help="time the numeric kernels, numba against numpy")
    p.add_argument("--sizes", default="100,1000,10000")
    p.add_argument("--repeats", type=int, default=50)
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except Infeasible as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except TimeLimitWithoutIncumbent as exc:
        print(f"time limit reached without a feasible plan: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except (OSError, ValueError, KeyError, SolverError, DomainError, GenerationFailure, ModelMissing,
            EmptyLog) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
