"""Command-line front end.

Subcommands: run (execute a program), learn (fit a model from traces),
sample (draw command vectors), park (closed-loop simulation), check
(seed-free golden-value report).  Exit codes: 0 success, 1 input error,
2 runtime error, 3 verification failure.  Every subcommand is
deterministic under --seed; report paths write figures next to the CSVs.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Optional

import numpy as np

from . import report
from .checks import all_passed, run_checks
from .gbn import (
    Gbn,
    ImproperPosteriorError,
    LearningState,
    ModelFormatError,
    NonChainError,
    extract,
    initial_state,
    learn_update,
    load_model,
    load_traces,
    sample_commands,
    save_model,
    save_traces,
    state_from_model,
)
from .lang import (
    TRACE_COLUMNS,
    Env,
    LangError,
    ParseError,
    RunError,
    execute,
    parse,
)
from .rng import RngStream
from .sim import SimError, load_world_config, run_parking, save_path

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_RUNTIME = 2
EXIT_VERIFY = 3


def data_path(name: str) -> Path:
    """Path of a bundled data file (default program, world, models)."""
    return Path(__file__).resolve().parent / "data" / name


class _Parser(argparse.ArgumentParser):
    # Usage problems are input errors: exit 1, not argparse's default 2.
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


def _build_parser() -> _Parser:
    parser = _Parser(prog="niflang", description=__doc__.split("\n\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, out_help):
        p.add_argument("--seed", type=int, default=0, help="root random seed")
        p.add_argument("--out", type=Path, default=None, help=out_help)
        p.add_argument("--format", choices=["csv"], default="csv",
                       help="delimited output format")

    p_run = sub.add_parser("run", help="execute a program and dump its store")
    p_run.add_argument("program", type=Path)
    p_run.add_argument("--trials", type=int, default=1)
    p_run.add_argument("--trace-log", action="store_true",
                       help="log every guard evaluation")
    p_run.add_argument("--budget", type=int, default=1_000_000,
                       help="statement budget per trial")
    common(p_run, "directory for store_summary.csv / trace_log.tsv")

    p_learn = sub.add_parser("learn", help="fit model parameters from traces")
    p_learn.add_argument("traces", type=Path)
    p_learn.add_argument("--prior", type=Path, default=None,
                         help="model CSV used as prior (exact state restored "
                              "from its .state.json sidecar when present)")
    common(p_learn, "learned model CSV path (sidecar state + figure beside it)")

    p_sample = sub.add_parser("sample", help="draw command vectors from a model")
    p_sample.add_argument("model", type=Path)
    p_sample.add_argument("--count", type=int, default=10)
    common(p_sample, "directory for commands.csv")

    p_park = sub.add_parser("park", help="closed-loop parking simulation")
    p_park.add_argument("program", type=Path)
    p_park.add_argument("model", type=Path)
    p_park.add_argument("--world", type=Path, default=None,
                        help="world config (default: bundled parking world)")
    p_park.add_argument("--runs", type=int, default=20)
    p_park.add_argument("--slip", type=float, default=None,
                        help="override the world's slip factor")
    p_park.add_argument("--paths", action="store_true",
                        help="write per-run path CSVs")
    common(p_park, "directory for report.csv, trajectories.png, paths")

    p_check = sub.add_parser("check", help="golden-value verification report")
    common(p_check, "directory for check_report.csv and probit.png")
    return parser


def _read_text(path: Path) -> str:
    try:
        return path.read_text()
    except OSError as exc:
        raise FileNotFoundError(f"cannot read {path}: {exc}") from exc


def _ensure_out(out: Optional[Path]) -> Optional[Path]:
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
    return out


def _fmt6(x: float) -> str:
    return f"{float(x):.6g}"


# --- run -----------------------------------------------------------------


def _cmd_run(args) -> int:
    source = _read_text(args.program)
    stmt = parse(source)
    root = RngStream(args.seed)
    stores: list[dict[str, float]] = []
    trace_lines: list[str] = []
    for trial in range(args.trials):
        env = Env(rng=root.split(trial), budget=args.budget, trace=args.trace_log)
        execute(stmt, env)
        stores.append(dict(env.store))
        if args.trace_log and env.trace is not None:
            trace_lines.extend(entry.tsv() for entry in env.trace)

    variables = sorted({name for store in stores for name in store})
    rows = []
    for name in variables:
        vals = np.array([s[name] for s in stores if name in s])
        rows.append((name, len(vals), float(vals.mean()), float(vals.std())))

    print(f"trials: {args.trials}")
    print("variable\tn\tmean\tstd")
    for name, count, mean, std in rows:
        print(f"{name}\t{count}\t{_fmt6(mean)}\t{_fmt6(std)}")

    out = _ensure_out(args.out)
    if out is not None:
        with open(out / "store_summary.csv", "w") as fh:
            fh.write("variable,n,mean,std\n")
            for name, count, mean, std in rows:
                fh.write(f"{name},{count},{_fmt6(mean)},{_fmt6(std)}\n")
    if args.trace_log:
        header = "\t".join(TRACE_COLUMNS)
        if out is not None:
            with open(out / "trace_log.tsv", "w") as fh:
                fh.write(header + "\n")
                fh.writelines(line + "\n" for line in trace_lines)
        else:
            print(header)
            for line in trace_lines:
                print(line)
    return EXIT_OK


# --- learn ---------------------------------------------------------------


def _state_sidecar(path: Path) -> Path:
    return path.with_name(path.name + ".state.json")


def _save_state(state: LearningState, path: Path) -> None:
    payload = {
        "v": state.v,
        "mu": [repr(float(x)) for x in state.mu],
        "beta": [[repr(float(x)) for x in row] for row in state.beta],
    }
    path.write_text(json.dumps(payload, indent=1) + "\n")


def _load_state(path: Path) -> LearningState:
    payload = json.loads(path.read_text())
    return LearningState(
        v=float(payload["v"]),
        mu=np.array([float(x) for x in payload["mu"]]),
        beta=np.array([[float(x) for x in row] for row in payload["beta"]]),
    )


def _cmd_learn(args) -> int:
    labels, traces = load_traces(args.traces)
    template: Optional[Gbn] = None
    if args.prior is not None:
        template = load_model(args.prior)
        if template.n != len(labels):
            raise ModelFormatError(
                f"prior has {template.n} nodes but traces have {len(labels)} columns"
            )
        sidecar = _state_sidecar(args.prior)
        state = _load_state(sidecar) if sidecar.exists() else state_from_model(template)
    else:
        state = initial_state(traces[0])

    state = learn_update(state, traces)
    learned = extract(state.to_mgd(), template=template)
    print(f"learned from {len(traces)} trace(s); posterior pseudo-count v = {_fmt6(state.v)}")
    print("node\tlabel\tsigma^2\tb(i,i-1)")
    coeffs = learned.chain_coeffs() if learned.n > 1 else []
    for i, node in enumerate(learned.nodes):
        label = labels[i] if i < len(labels) else node.label
        b_text = "-" if i == 0 else _fmt6(coeffs[i - 1])
        print(f"{i + 1}\t{label}\t{_fmt6(node.variance)}\t{b_text}")

    if args.out is not None:
        out_path = args.out
        if out_path.suffix != ".csv":
            out_path.mkdir(parents=True, exist_ok=True)
            out_path = out_path / "model.csv"
        out_path.parent.mkdir(parents=True, exist_ok=True)
        save_model(learned, out_path)
        _save_state(state, _state_sidecar(out_path))
        report.save_model_figure(out_path.with_suffix(".png"), learned)
        print(f"model written to {out_path}")
    return EXIT_OK


# --- sample --------------------------------------------------------------


def _cmd_sample(args) -> int:
    model = load_model(args.model)
    if args.count < 1:
        raise ModelFormatError("--count must be >= 1")
    root = RngStream(args.seed)
    vectors = [sample_commands(model, root.split(i)) for i in range(args.count)]
    out = _ensure_out(args.out)
    if out is not None:
        save_traces(out / "commands.csv", model.labels, vectors)
        print(f"wrote {args.count} command vectors to {out / 'commands.csv'}")
    else:
        print(",".join(["trace_id", *model.labels]))
        for i, vec in enumerate(vectors):
            print(",".join([str(i), *(f"{v:.17g}" for v in vec)]))
    return EXIT_OK


# --- park ----------------------------------------------------------------


def _cmd_park(args) -> int:
    source = _read_text(args.program)
    program = parse(source)
    model = load_model(args.model)
    world_path = args.world if args.world is not None else data_path("parking_world.cfg")
    config = load_world_config(world_path)
    world = config.make_world(seed=args.seed, slip=args.slip)
    if args.runs < 1:
        raise ModelFormatError("--runs must be >= 1")

    root = RngStream(args.seed)
    reports = [
        run_parking(program, model, world, seed=root.split(i).seed)
        for i in range(args.runs)
    ]
    successes = sum(1 for r in reports if r.success)
    rate = successes / args.runs
    print(f"runs: {args.runs}  slip: {_fmt6(world.slip)}")
    print(f"success rate: {_fmt6(rate)} ({successes}/{args.runs})")

    out = _ensure_out(args.out)
    if out is not None:
        labels = model.labels
        with open(out / "report.csv", "w") as fh:
            fh.write(
                "run,seed,success,final_x,final_y,final_theta,"
                + ",".join(f"achieved_{l}" for l in labels)
                + "\n"
            )
            for i, rep in enumerate(reports):
                achieved = list(rep.achieved) + [float("nan")] * (
                    len(labels) - len(rep.achieved)
                )
                fh.write(
                    f"{i},{rep.seed},{int(rep.success)},"
                    f"{rep.final_pose.x:.17g},{rep.final_pose.y:.17g},"
                    f"{rep.final_pose.theta:.17g},"
                    + ",".join(f"{m:.17g}" for m in achieved)
                    + "\n"
                )
        report.save_trajectory_figure(out / "trajectories.png", reports, world)
        if args.paths:
            for i, rep in enumerate(reports):
                save_path(rep.path, out / f"path_{i:04d}.csv")
        print(f"report written to {out / 'report.csv'}")
    return EXIT_OK


# --- check ---------------------------------------------------------------


def _cmd_check(args) -> int:
    results = run_checks()
    for r in results:
        status = "PASS" if r.passed else "FAIL"
        print(f"{status}  {r.name}: expected {r.expected}, got {r.actual}")
    out = _ensure_out(args.out)
    if out is not None:
        with open(out / "check_report.csv", "w") as fh:
            fh.write("name,expected,actual,passed\n")
            for r in results:
                name = r.name.replace(",", ";")
                expected = r.expected.replace(",", ";")
                actual = r.actual.replace(",", ";")
                fh.write(f"{name},{expected},{actual},{int(r.passed)}\n")
        report.save_probit_figure(out / "probit.png")
    if not all_passed(results):
        print("verification FAILED")
        return EXIT_VERIFY
    print("all golden values reproduced")
    return EXIT_OK


_COMMANDS = {
    "run": _cmd_run,
    "learn": _cmd_learn,
    "sample": _cmd_sample,
    "park": _cmd_park,
    "check": _cmd_check,
}


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except ParseError as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (FileNotFoundError, ModelFormatError, NonChainError,
            ImproperPosteriorError, ValueError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (RunError, LangError, SimError) as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
