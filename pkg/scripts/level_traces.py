#!/usr/bin/env python3
"""Export per-procedure test-level trajectories on one synthetic stream.

Generates 1000 independent z-statistics whose means are sqrt(log 1000) with
probability one half, runs every online procedure in unbounded and bounded
mode, and writes one wide CSV of levels suitable for plotting.

    python scripts/level_traces.py --seed 9 --out traces.csv
"""

import argparse
import csv
import sys

from onfdr.procedures import ProcedureKind, default_config, run_stream
from onfdr.scenarios import MixtureAlternative, MixtureScenario, gen_mixture

KINDS = [ProcedureKind.LORD2, ProcedureKind.LORD3, ProcedureKind.LORDPP,
         ProcedureKind.SAFFRON, ProcedureKind.LOND_INDEP,
         ProcedureKind.BONFERRONI]


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n", type=int, default=1000)
    ap.add_argument("--pi1", type=float, default=0.5)
    ap.add_argument("--alpha", type=float, default=0.05)
    ap.add_argument("--seed", type=int, default=9)
    ap.add_argument("--out", default="-")
    args = ap.parse_args()

    scenario = MixtureScenario(N=args.n, pi1=args.pi1, rho=0.0,
                               alternative=MixtureAlternative.CONSTANT)
    pvalues, truth = gen_mixture(scenario, args.seed)
    pvalues = pvalues.tolist()

    columns = {}
    for kind in KINDS:
        for bound, tag in ((None, ""), (args.n, "_bounded")):
            cfg = default_config(kind, alpha=args.alpha, bound=bound)
            recs = run_stream(cfg, pvalues)
            columns[kind.value + tag] = [r.level for r in recs]

    out = sys.stdout if args.out == "-" else open(args.out, "w", newline="")
    writer = csv.writer(out, lineterminator="\n")
    names = sorted(columns)
    writer.writerow(["index", "pvalue", "nonnull"] + names)
    for i in range(args.n):
        writer.writerow([i + 1, repr(pvalues[i]), int(truth[i])]
                        + [repr(columns[name][i]) for name in names])
    if out is not sys.stdout:
        out.close()
        print(f"wrote {args.out}", file=sys.stderr)
    return 0


if __name__ == "__main__":
    sys.exit(main())
