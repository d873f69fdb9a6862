#!/usr/bin/env python3
"""Benchmark table for the scalar constrained LQ problem.

Runs multiple shooting, pseudospectral, and envelope collocation against a
fine-grid quasi-optimal reference and writes the table as CSV (and optionally
a JSON mirror with the configuration echoed).
"""

import argparse
import sys

from socenv.analysis import (quasi_optimal_reference, rows_to_csv, rows_to_json,
                             run_benchmark)
from socenv.nlp import SqpOptions
from socenv.ocp import academic_problem

DEFAULT_METHODS = ["MS-50", "PS-5", "PS-8", "SOCSE-5", "SOCSE-8"]


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--methods", default=",".join(DEFAULT_METHODS),
                        help="comma-separated method labels")
    parser.add_argument("--k-fine", type=int, default=1000)
    parser.add_argument("--out", default=None, help="CSV output path (default stdout)")
    parser.add_argument("--json-out", default=None, help="optional JSON mirror path")
    args = parser.parse_args(argv)

    methods = [m.strip() for m in args.methods.split(",") if m.strip()]
    ocp = academic_problem()
    reference = quasi_optimal_reference(ocp, args.k_fine)
    rows = run_benchmark(ocp, methods, reference=reference,
                         opts=SqpOptions(max_iters=400))

    text = rows_to_csv(rows)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    if args.json_out:
        with open(args.json_out, "w") as fh:
            fh.write(rows_to_json(rows, {"problem": "academic",
                                         "methods": methods,
                                         "k_fine": args.k_fine}) + "\n")
    return 0 if all(r.status == "converged" for r in rows) else 1


if __name__ == "__main__":
    sys.exit(main())
