#!/usr/bin/env python3
"""Valet-parking benchmark: envelope collocation vs node-only collocation.

Solves the single-shot parking problem (initialized just inside the lateral
track limit) with several spline degrees and reports rollout error and dense
violation per method.  The quasi-optimal reference for the cost column is
expensive for this model; pass --skip-reference to fill deviations with NaN.
"""

import argparse
import math
import sys

import numpy as np

from socenv.analysis import (BenchmarkRow, dense_violation_scan, ode_rollout_error,
                             quasi_optimal_reference, rows_to_csv, rows_to_json,
                             run_benchmark, solve_method, trajectory_cost)
from socenv.nlp import SqpOptions
from socenv.vehicle import avp_problem, load_config, vehicle_params_from_dict

DEFAULT_METHODS = ["SOC-3", "SOC-5", "SOCSE-3", "SOCSE-5", "SOCSE-8"]


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--methods", default=",".join(DEFAULT_METHODS))
    parser.add_argument("--config", default=None, help="YAML config path")
    parser.add_argument("--k-fine", type=int, default=1000)
    parser.add_argument("--skip-reference", action="store_true",
                        help="skip the fine-grid reference (cost columns = NaN)")
    parser.add_argument("--out", default=None)
    parser.add_argument("--json-out", default=None)
    args = parser.parse_args(argv)

    if args.config:
        sections = load_config(args.config)
        params = vehicle_params_from_dict(sections["vehicle"])
        prob_kw = {k: float(v) for k, v in sections["problem"].items()
                   if k in ("t0", "tf")}
        ocp = avp_problem(params, **prob_kw)
    else:
        ocp = avp_problem()

    methods = [m.strip() for m in args.methods.split(",") if m.strip()]
    opts = SqpOptions(max_iters=400)

    if args.skip_reference:
        rows = []
        for label in methods:
            row = BenchmarkRow(method=label)
            try:
                rep, sol, nlp, z = solve_method(ocp, label, opts)
                row.solve_time_s = rep.wall_time
                row.status = rep.status
                if rep.status == "converged" and hasattr(sol, "alpha_x"):
                    row.ode_err = ode_rollout_error(sol, ocp)
                    row.max_violation = dense_violation_scan(sol, ocp)["max"]
            except Exception as exc:  # noqa: BLE001 -- row records the failure
                row.status = f"error: {type(exc).__name__}: {exc}"
            rows.append(row)
    else:
        reference = quasi_optimal_reference(ocp, args.k_fine)
        rows = run_benchmark(ocp, methods, reference=reference, opts=opts)

    text = rows_to_csv(rows)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    if args.json_out:
        with open(args.json_out, "w") as fh:
            fh.write(rows_to_json(rows, {"problem": "avp", "methods": methods,
                                         "config": args.config}) + "\n")
    return 0 if all(r.status == "converged" for r in rows) else 1


if __name__ == "__main__":
    sys.exit(main())
