"""Command line front end.

zrp <command> --config plan.json [--seed u64] [--workers n] [--out dir]
              [--format csv|json]

Commands: sample-equilibrium, simulate, autocov, scaling, fdd-law, lclt,
constants, verify. The named experiment commands require the plan's
experiment field to match; simulate runs whatever the plan declares.
ZRP_SEED in the environment overrides the plan seed; --seed beats both.
Exit status: 0 success, 1 execution error, 2 statistical failure (verify).
"""

import argparse
import json
import os
import sys

from . import engine, equilibrium, runner
from .plans import PlanError, load_plan

_RUN_COMMANDS = ("simulate", "autocov", "scaling", "fdd-law", "lclt",
                 "constants")


def _build_parser():
    ap = argparse.ArgumentParser(prog="zrp")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in ("sample-equilibrium",) + _RUN_COMMANDS + ("verify",):
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, metavar="FILE")
        p.add_argument("--seed", type=int, default=None, metavar="U64")
        p.add_argument("--workers", type=int, default=None, metavar="N")
        p.add_argument("--out", default=None, metavar="DIR")
        p.add_argument("--format", choices=("csv", "json"), default="csv")
    return ap


def _resolve_seed(args, plan):
    if args.seed is not None:
        return args.seed
    env = os.environ.get("ZRP_SEED")
    if env is not None:
        try:
            return int(env)
        except ValueError:
            raise PlanError("ZRP_SEED must be an integer, got %r" % env)
    return plan.master_seed


def _sample_equilibrium(args, plan):
    spec = plan.model
    profile = equilibrium.fugacity_of_density(spec.gamma, spec.rate_family)
    seed = _resolve_seed(args, plan)
    occ, _ = engine.equilibrium_start(spec, profile, seed, 0)
    out_dir = args.out or plan.outputs
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "profile.json"), "w") as fh:
        fh.write(profile.to_json())
        fh.write("\n")
    if args.format == "json":
        with open(os.path.join(out_dir, "field.json"), "w") as fh:
            json.dump({"seed": seed, "occupancy": occ.tolist()}, fh)
            fh.write("\n")
    else:
        with open(os.path.join(out_dir, "field.csv"), "w") as fh:
            fh.write("site,occupancy\n")
            for i, k in enumerate(occ.tolist()):
                fh.write("%d,%d\n" % (i, k))
    print("wrote equilibrium field (%d sites, %d particles) to %s"
          % (occ.size, int(occ.sum()), out_dir))
    return 0


def main(argv=None):
    args = _build_parser().parse_args(argv)
    try:
        plan = load_plan(args.config)
        if args.command == "sample-equilibrium":
            return _sample_equilibrium(args, plan)
        if args.command == "verify":
            out_dir = args.out or plan.outputs
            code, rows = runner.verify(plan, out_dir)
            sys.stdout.write(runner.format_verdicts(rows))
            return code
        if args.command != "simulate" and plan.experiment != args.command:
            raise PlanError("plan declares experiment %r; run it with "
                            "'zrp %s' or 'zrp simulate'"
                            % (plan.experiment, plan.experiment))
        summary = runner.run_plan(plan, out_dir=args.out,
                                  workers=args.workers,
                                  master_seed=_resolve_seed(args, plan))
        sys.stdout.write(runner.format_verdicts(summary["verdicts"]))
        return 0
    except (PlanError, runner.RunnerError) as exc:
        print("error: %s" % exc, file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
