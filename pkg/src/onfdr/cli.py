"""Command-line front end.

Subcommands: ``run`` (stream a CSV of p-values through one procedure),
``simulate`` (Monte Carlo grids), ``sequence`` (dump a coefficient table)
and ``kidney`` (binary-endpoint platform realisations).  Data goes to
stdout or ``--output``; diagnostics go to stderr.  Exit codes: 0 success,
2 malformed input, 3 invalid configuration.
"""

from __future__ import annotations

import argparse
import csv
import sys

from .procedures import (
    ConfigError,
    HorizonExhaustedError,
    ProcedureConfig,
    ProcedureKind,
    default_config,
    make_stream,
    observe,
    rebound_stream,
)
from .scenarios import (
    KIDNEY_PROCEDURES,
    KIDNEY_REALISATIONS,
    KidneyTrialScenario,
    MixtureAlternative,
    MixtureScenario,
    PlatformTrialScenario,
    estimate_many,
    eval_kidney,
)
from .sequences import Normalization, SequenceError, SequenceKind, SequenceSpec, \
    build_table

EXIT_OK = 0
EXIT_BAD_INPUT = 2
EXIT_BAD_CONFIG = 3


def _fail(code: int, message: str) -> int:
    print(f"onfdr: {message}", file=sys.stderr)
    return code


def _out_stream(path: str | None):
    return open(path, "w", newline="") if path else sys.stdout


def _sequence_spec(args, alpha: float) -> SequenceSpec:
    kind = SequenceKind(args.sequence)
    norm = Normalization(args.normalization)
    kwargs = dict(kind=kind, normalization=norm, bound=args.bound)
    if kind in (SequenceKind.POWER_LAW, SequenceKind.LOG_POWER):
        kwargs["shape_param"] = args.seq_param
    if norm in (Normalization.SUM_ALPHA, Normalization.XI_WEIGHTED):
        kwargs["alpha"] = alpha
    if norm is Normalization.XI_WEIGHTED:
        kwargs["w0"] = args.w0 if args.w0 is not None else alpha / 2
        kwargs["b0"] = args.b0 if args.b0 is not None else alpha / 2
    return SequenceSpec(**kwargs)


def _procedure_config(args) -> ProcedureConfig:
    kind = ProcedureKind(args.procedure)
    overrides = {}
    if args.w0 is not None:
        overrides["w0"] = args.w0
    if args.b0 is not None:
        overrides["b0"] = args.b0
    if args.lam is not None:
        overrides["lam"] = args.lam
    if args.sequence is not None:
        overrides["sequence"] = _sequence_spec(args, args.alpha)
    if args.lond_original:
        overrides["lond_original"] = True
    return default_config(kind, alpha=args.alpha, bound=args.bound, **overrides)


def cmd_run(args) -> int:
    try:
        config = _procedure_config(args)
    except (ConfigError, SequenceError, ValueError) as exc:
        return _fail(EXIT_BAD_CONFIG, f"invalid configuration: {exc}")
    rebound_at = rebound_to = None
    if args.rebound:
        try:
            lhs, rhs = args.rebound.split(":")
            rebound_at, rebound_to = int(lhs), int(rhs)
        except ValueError:
            return _fail(EXIT_BAD_CONFIG, "--rebound expects n:NPRIME")

    try:
        infile = open(args.input, newline="") if args.input else sys.stdin
    except OSError as exc:
        return _fail(EXIT_BAD_INPUT, str(exc))
    state = make_stream(config)
    out = _out_stream(args.output)
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(["id", "index", "pvalue", "alpha_i", "rejected", "wealth"])
    try:
        reader = csv.reader(infile)
        header = next(reader, None)
        if header is None or [h.strip() for h in header[:2]] != ["id", "pvalue"]:
            return _fail(EXIT_BAD_INPUT, "input must start with header 'id,pvalue'")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) < 2:
                return _fail(EXIT_BAD_INPUT, f"line {lineno}: expected id,pvalue")
            try:
                p = float(row[1])
            except ValueError:
                return _fail(EXIT_BAD_INPUT,
                             f"line {lineno}: unparseable p-value {row[1]!r}")
            if rebound_at is not None and state.i == rebound_at:
                rebound_stream(state, config, rebound_to)
            try:
                rec = observe(state, p, config)
            except ValueError as exc:
                return _fail(EXIT_BAD_INPUT, f"line {lineno}: {exc}")
            except HorizonExhaustedError as exc:
                return _fail(EXIT_BAD_CONFIG, f"line {lineno}: {exc}")
            wealth = "" if rec.wealth_after is None else repr(rec.wealth_after)
            writer.writerow([row[0], rec.index, repr(rec.p), repr(rec.level),
                             "true" if rec.rejected else "false", wealth])
    except ConfigError as exc:
        return _fail(EXIT_BAD_CONFIG, str(exc))
    finally:
        if infile is not sys.stdin:
            infile.close()
        if out is not sys.stdout:
            out.close()
    return EXIT_OK


_SIM_PROCS = [k.value for k in ProcedureKind] + ["bh", "bh-adjusted", "uncorrected"]


def cmd_simulate(args) -> int:
    try:
        pi1_grid = [float(tok) for tok in args.pi1_grid.split(",") if tok]
        if not pi1_grid or any(not 0 <= v <= 1 for v in pi1_grid):
            raise ValueError(f"bad pi1 grid {args.pi1_grid!r}")
    except ValueError as exc:
        return _fail(EXIT_BAD_CONFIG, f"invalid grid: {exc}")
    proc_names = [tok.strip() for tok in args.procedures.split(",") if tok.strip()]
    unknown = [n for n in proc_names if n not in _SIM_PROCS]
    if unknown:
        return _fail(EXIT_BAD_CONFIG, f"unknown procedures: {', '.join(unknown)}")

    out = _out_stream(args.output)
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(["scenario", "procedure", "pi1", "N", "reps",
                     "fdr", "fdr_se", "power", "power_se", "seed"])
    try:
        for pi1 in pi1_grid:
            if args.scenario == "platform":
                scenario = PlatformTrialScenario(K=args.n, pi=pi1,
                                                 alpha=args.alpha)
                n_label = args.n
            else:
                scenario = MixtureScenario(
                    N=args.n, pi1=pi1, rho=args.rho,
                    alternative=MixtureAlternative(args.scenario))
                n_label = args.n
            bound = args.n if args.bounded else None
            procs = []
            for name in proc_names:
                if name in ("bh", "bh-adjusted", "uncorrected"):
                    procs.append((name, name))
                else:
                    label = f"{name}-bounded" if args.bounded else name
                    cfg = default_config(ProcedureKind(name),
                                         alpha=scenario.alpha
                                         if args.scenario == "platform"
                                         else args.alpha,
                                         bound=bound)
                    procs.append((label, cfg))
            for res in estimate_many(procs, scenario, args.reps, args.seed):
                writer.writerow([
                    args.scenario, res.label, pi1, n_label, args.reps,
                    repr(res.fdr), repr(res.fdr_se),
                    "" if res.power is None else repr(res.power),
                    "" if res.power_se is None else repr(res.power_se),
                    args.seed,
                ])
    except (ConfigError, SequenceError, ValueError) as exc:
        return _fail(EXIT_BAD_CONFIG, str(exc))
    finally:
        if out is not sys.stdout:
            out.close()
    return EXIT_OK


def cmd_sequence(args) -> int:
    try:
        spec = _sequence_spec(args, args.alpha)
        table = build_table(spec, length_hint=args.n)
    except (SequenceError, ValueError) as exc:
        return _fail(EXIT_BAD_CONFIG, f"invalid sequence spec: {exc}")
    n = min(args.n, table.bound) if table.bound is not None else args.n
    coeffs = table.head(n)
    out = _out_stream(args.output)
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(["index", "coefficient", "cumulative"])
    for i in range(n):
        writer.writerow([i + 1, repr(float(coeffs[i])),
                         repr(table.cumulative_sum(i + 1))])
    if out is not sys.stdout:
        out.close()
    return EXIT_OK


def cmd_kidney(args) -> int:
    scenario = KidneyTrialScenario(alpha=args.alpha)
    if args.scenario is not None:
        realisations = {args.scenario: KIDNEY_REALISATIONS[args.scenario]}
    elif args.y0 is not None and args.y is not None:
        try:
            y = tuple(int(tok) for tok in args.y.split(","))
        except ValueError:
            return _fail(EXIT_BAD_CONFIG, f"unparseable counts {args.y!r}")
        realisations = {0: (args.y0, y)}
    else:
        realisations = dict(KIDNEY_REALISATIONS)

    out = _out_stream(args.output)
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(["scenario", "procedure", "fdr", "power"])
    try:
        for label, (y0, y) in realisations.items():
            cells = eval_kidney(scenario, y0, y, procedures=KIDNEY_PROCEDURES)
            for name, cell in cells.items():
                writer.writerow([label, name, cell.fdr, cell.power])
    except (ConfigError, ValueError) as exc:
        return _fail(EXIT_BAD_CONFIG, str(exc))
    finally:
        if out is not sys.stdout:
            out.close()
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="onfdr",
                                     description="online FDR toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="stream a p-value CSV through a procedure")
    run.add_argument("--input", help="CSV with header id,pvalue (default stdin)")
    run.add_argument("--output", help="output CSV path (default stdout)")
    run.add_argument("--procedure", default="lord++",
                     choices=[k.value for k in ProcedureKind])
    run.add_argument("--alpha", type=float, default=0.05)
    run.add_argument("--w0", type=float)
    run.add_argument("--b0", type=float)
    run.add_argument("--lambda", dest="lam", type=float)
    run.add_argument("--sequence", choices=[k.value for k in SequenceKind])
    run.add_argument("--seq-param", type=float)
    run.add_argument("--normalization", default="sum-one",
                     choices=[n.value for n in Normalization])
    run.add_argument("--bound", type=int)
    run.add_argument("--rebound", metavar="N:NPRIME",
                     help="rebound the horizon after n hypotheses")
    run.add_argument("--lond-original", action="store_true",
                     help="use the original max(D,1) LOND multiplier")
    run.set_defaults(func=cmd_run)

    sim = sub.add_parser("simulate", help="Monte Carlo operating characteristics")
    sim.add_argument("--scenario", required=True,
                     choices=["gaussian", "exponential", "constant", "platform"])
    sim.add_argument("--n", type=int, required=True,
                     help="hypotheses per replicate (arms K for platform)")
    sim.add_argument("--pi1-grid", required=True,
                     help="comma-separated non-null fractions")
    sim.add_argument("--rho", type=float, default=0.5)
    sim.add_argument("--reps", type=int, default=2000)
    sim.add_argument("--seed", type=int, default=0)
    sim.add_argument("--alpha", type=float, default=0.05)
    sim.add_argument("--procedures", default="lord2,lord3,lord++,saffron,lond,bonferroni")
    sim.add_argument("--bounded", action="store_true",
                     help="bound every procedure at the scenario horizon")
    sim.add_argument("--output")
    sim.set_defaults(func=cmd_simulate)

    seq = sub.add_parser("sequence", help="dump a coefficient table as CSV")
    seq.add_argument("--kind", dest="sequence", required=True,
                     choices=[k.value for k in SequenceKind])
    seq.add_argument("--n", type=int, required=True, help="rows to emit")
    seq.add_argument("--seq-param", type=float, help="m or nu where applicable")
    seq.add_argument("--normalization", default="sum-one",
                     choices=[n.value for n in Normalization])
    seq.add_argument("--alpha", type=float, default=0.05)
    seq.add_argument("--w0", type=float)
    seq.add_argument("--b0", type=float)
    seq.add_argument("--bound", type=int)
    seq.add_argument("--output")
    seq.set_defaults(func=cmd_sequence)

    kid = sub.add_parser("kidney", help="binary-endpoint platform realisations")
    kid.add_argument("--scenario", type=int, choices=sorted(KIDNEY_REALISATIONS))
    kid.add_argument("--y0", type=int, help="control successes")
    kid.add_argument("--y", help="comma-separated per-arm successes")
    kid.add_argument("--alpha", type=float, default=0.1)
    kid.add_argument("--output")
    kid.set_defaults(func=cmd_kidney)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
