"""Throughput comparison of the compiled and pure-python event kernels.

Runs the same replica (same seed, same start) on every available backend
and reports events per second, plus the linear fast path against the
forced Fenwick tree on the compiled kernel.
"""

import argparse
import time

from zrp import engine
from zrp.equilibrium import fugacity_of_density
from zrp.model import ModelSpec, RateFamily


def throughput(spec, prof, seed, n_events, backend, force_fenwick=False):
    occ, state = engine.equilibrium_start(spec, prof, seed, 0)
    sim = engine.Simulator(spec, occ, state, backend=backend,
                           force_fenwick=force_fenwick)
    t0 = time.perf_counter()
    fired = sim.advance(1e18, max_events=n_events)
    el = time.perf_counter() - t0
    return fired / el, el


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--L", type=int, default=1024)
    ap.add_argument("--alpha", type=float, default=1.5)
    ap.add_argument("--gamma", type=float, default=1.0)
    ap.add_argument("--seed", type=int, default=1)
    ap.add_argument("--events", type=int, default=2_000_000,
                    help="event budget for the compiled kernel")
    ap.add_argument("--py-events", type=int, default=200_000,
                    help="event budget for the python kernel")
    args = ap.parse_args()

    fam = RateFamily("linear", a=1.0)
    spec = ModelSpec(d=1, alpha=args.alpha, L=args.L, rate_family=fam,
                     gamma=args.gamma)
    prof = fugacity_of_density(args.gamma, fam)

    rows = []
    for backend, n in (("c", args.events), ("py", args.py_events)):
        try:
            rate, el = throughput(spec, prof, args.seed, n, backend)
        except RuntimeError as exc:
            print("%-18s unavailable (%s)" % (backend, exc))
            continue
        rows.append((backend, rate, n))
        print("%-18s %12.3g events/s   (%d events, %.2f s)"
              % (backend, rate, n, el))
    if len(rows) == 2:
        print("%-18s %12.2fx" % ("speedup", rows[0][1] / rows[1][1]))

    backend, _, n = rows[0]
    rate, el = throughput(spec, prof, args.seed, n, backend,
                          force_fenwick=True)
    print("%-18s %12.3g events/s   (%d events, %.2f s)"
          % (backend + " fenwick", rate, n, el))


if __name__ == "__main__":
    main()
