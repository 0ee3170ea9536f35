#!/usr/bin/env python3
"""Solve an LP file with HiGHS and write a sopwl solution file.

usage: highs_adapter.py MODEL.lp SOLUTION.sol [--time-limit SECONDS] [--gap REL]

Solution file: status token, `obj <value>`, then `<name> <value>` per column.
"""
import argparse
import sys

import highspy


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("lp")
    ap.add_argument("sol")
    ap.add_argument("--time-limit", type=float, default=None)
    ap.add_argument("--gap", type=float, default=1e-6)
    args = ap.parse_args()

    h = highspy.Highs()
    h.setOptionValue("threads", 1)
    h.setOptionValue("random_seed", 0)
    h.setOptionValue("mip_rel_gap", args.gap)
    h.setOptionValue("primal_feasibility_tolerance", 1e-9)
    h.setOptionValue("mip_feasibility_tolerance", 1e-9)
    if args.time_limit is not None:
        h.setOptionValue("time_limit", args.time_limit)
    if h.readModel(args.lp) == highspy.HighsStatus.kError:
        print("failed to read", args.lp, file=sys.stderr)
        return 2
    h.run()

    ms = h.getModelStatus()
    S = highspy.HighsModelStatus
    info = h.getInfo()
    has_sol = info.primal_solution_status == 2  # kSolutionStatusFeasible
    if ms in (S.kOptimal, S.kModelEmpty):
        status = "optimal"
    elif ms == S.kInfeasible:
        status = "infeasible"
    elif ms in (S.kUnbounded, S.kUnboundedOrInfeasible):
        status = "unbounded"
    elif has_sol:
        status = "feasible"
    else:
        status = "error"

    lines = [status]
    if status in ("optimal", "feasible"):
        lp = h.getLp()
        values = h.getSolution().col_value
        obj = info.objective_function_value if lp.num_col_ > 0 else 0.0
        lines.append("obj %r" % obj)
        for name, value in zip(lp.col_names_, values):
            lines.append("%s %r" % (name, float(value)))
    with open(args.sol, "w") as f:
        f.write("\n".join(lines) + "\n")
    print("status", status, "model status", h.modelStatusToString(ms))
    return 0


if __name__ == "__main__":
    sys.exit(main())
