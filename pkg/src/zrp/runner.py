"""Experiment execution: replica scheduling, per-experiment analysis, and
the four artifact files (paths.csv, summary.json, constants.json,
manifest.json)."""

import json
import math
import multiprocessing
import os
import time

import numpy as np

from . import __version__
from . import engine, equilibrium, limits, observables, recorder, stats, walk
from .plans import plan_echo, plan_from_dict

ARTIFACT_VERSION = 1


class RunnerError(RuntimeError):
    """Execution failure while running a plan."""


# ---------------------------------------------------------------------------
# replica work

def _prepare(plan):
    """Everything a replica task needs, built once per process."""
    spec = plan.model
    profile = equilibrium.fugacity_of_density(spec.gamma, spec.rate_family)
    obs = observables.make_observable(plan.observable_kind, profile)
    coeff = limits.limit_law_coefficient(spec.d, spec.alpha, profile, obs)
    rec = np.asarray(plan.record_times())
    if plan.series is not None:
        s = plan.series
        n = int(round(s.t_max / s.dt))
        ser = np.asarray([s.dt * k for k in range(1, n + 1)])
        stride = spec.geometry.n_sites // s.watch
        watch = tuple(i * stride for i in range(s.watch))
    else:
        ser = np.empty(0)
        watch = ()
    grid = np.asarray(sorted(set(ser.tolist()) | set(rec.tolist())))
    return dict(
        plan=plan, spec=spec, profile=profile, obs=obs, coeff=coeff,
        grid=grid, rec=rec,
        rec_idx=np.searchsorted(grid, rec),
        ser_idx=np.searchsorted(grid, ser),
        watch=watch,
        vp=observables.vbar_prime_of(obs, profile),
        # the conserved density mode dominates A in the Brownian regimes;
        # project it out there, keep the raw functional elsewhere
        correct=(coeff["limit"] == "brownian"),
        finite=limits.finite_variance_regime(spec.d, spec.alpha),
    )


def _run_replica(ctx, r):
    plan = ctx["plan"]
    spec = ctx["spec"]
    profile = ctx["profile"]
    occ, state = engine.equilibrium_start(spec, profile, plan.master_seed, r)
    rho = float(occ.sum()) / spec.geometry.n_sites
    sim = engine.Simulator(spec, occ, state)
    path = recorder.record_functional(sim, profile, ctx["obs"], ctx["grid"],
                                      watch=ctx["watch"])
    A = path.A[ctx["rec_idx"]].astype(float)
    if ctx["correct"]:
        A = A - ctx["vp"] * (rho - spec.gamma) * ctx["rec"]
    out = {"replica": int(r), "A": A.tolist(), "rho": rho,
           "events": int(sim.events)}
    if plan.experiment == "stationarity":
        out["counts"] = np.bincount(sim.occupancy).tolist()
    if ctx["watch"]:
        # conditioned on the conserved density the watch series has mean
        # Vbar'(gamma) (rho - gamma); centering by that known value avoids
        # the Var(sample mean) bias a fitted mean injects at long lags
        v = path.v[:, ctx["ser_idx"]] - ctx["vp"] * (rho - spec.gamma)
        if plan.experiment == "autocov":
            # longest lag the analysis touches is 2*max(t_grid); batches
            # must be at least that long or the se array cannot cover it
            lag_cap = int(round(2.0 * max(plan.t_grid) / plan.series.dt))
            lag_cap = min(lag_cap, v.shape[1] - 1)
            nb = max(2, min(32, v.shape[1] // (lag_cap + 1)))
            acc = None
            var = None
            for j in range(v.shape[0]):
                ac, se = stats.autocovariance(v[j], max_lag=lag_cap,
                                              n_batches=nb, mean=0.0)
                acc = ac if acc is None else acc + ac
                var = se * se if var is None else var + se * se
            w = v.shape[0]
            out["acov"] = (acc / w).tolist()
            out["acov_se"] = np.sqrt(var / (w * w)).tolist()
        elif plan.experiment == "scaling" and ctx["finite"]:
            vals = []
            for j in range(v.shape[0]):
                s2, _ = stats.integrated_autocovariance(
                    v[j], plan.series.dt, spec.d, spec.alpha, mean=0.0)
                vals.append(s2)
            out["sigma2"] = float(np.mean(vals))
    return out


_CTX = None


def _init_worker(echo):
    global _CTX
    _CTX = _prepare(plan_from_dict(echo))


def _task(r):
    return _run_replica(_CTX, r)


def _run_replicas(plan, workers):
    """All replica payloads, sorted by replica index. Scheduling never
    touches the data, so worker count cannot change the output."""
    n = plan.replicas
    if workers <= 1 or n == 1:
        ctx = _prepare(plan)
        return [_run_replica(ctx, r) for r in range(n)]
    echo = plan_echo(plan)
    try:
        mp = multiprocessing.get_context("fork")
    except ValueError:
        mp = multiprocessing.get_context("spawn")
    out = []
    with mp.Pool(min(workers, n), initializer=_init_worker,
                 initargs=(echo,)) as pool:
        for payload in pool.imap_unordered(_task, range(n)):
            out.append(payload)
    out.sort(key=lambda p: p["replica"])
    return out


# ---------------------------------------------------------------------------
# analysis

def _analyze_stationarity(plan, ctx, payloads):
    pmf = ctx["profile"].pmf
    thr = float(plan.tolerances.get("p_threshold", 0.01))
    pvals = []
    for p in payloads:
        counts = np.asarray(p["counts"], dtype=float)
        probs = pmf / pmf.sum()
        if counts.size > probs.size:
            folded = counts[:probs.size].copy()
            folded[-1] += counts[probs.size:].sum()
            counts = folded
        elif counts.size < probs.size:
            counts = np.concatenate([counts, np.zeros(probs.size - counts.size)])
        _, _, pv = stats.chi_square(counts, probs)
        pvals.append(float(pv))
    return {"p_values": pvals, "p_threshold": thr,
            "pass_count": int(sum(pv > thr for pv in pvals))}


def _analyze_autocov(plan, ctx, payloads):
    dt = plan.series.dt
    R = len(payloads)
    acov = np.mean([p["acov"] for p in payloads], axis=0)
    se = np.sqrt(np.sum([np.square(p["acov_se"]) for p in payloads], axis=0)) / R
    spec = ctx["spec"]
    target = limits.relaxation_constant(spec.d, spec.alpha, ctx["profile"],
                                        ctx["obs"])
    probes = []
    for t in plan.t_grid:
        k = int(round(2.0 * t / dt))
        scale = walk.scaling_h(t, spec.alpha) ** spec.d
        probes.append({"t": t, "product": float(acov[k] * scale),
                       "se": float(se[k] * scale)})
    # decay exponent from a log-spaced window around the probes
    tmin, tmax = 0.5 * min(plan.t_grid), 2.0 * max(plan.t_grid)
    ks = sorted({int(round(t / dt))
                 for t in np.geomspace(tmin, tmax, 12)})
    ks = [k for k in ks if 0 < k < acov.size and acov[k] > 0]
    x = np.log([k * dt for k in ks])
    y = np.log(acov[ks])
    w = (acov[ks] / se[ks]) ** 2
    xw = np.sum(w * x) / np.sum(w)
    yw = np.sum(w * y) / np.sum(w)
    sxx = float(np.sum(w * (x - xw) ** 2))
    slope = float(np.sum(w * (x - xw) * (y - yw)) / sxx)
    return {"probes": probes, "target": float(target),
            "decay_exponent": slope,
            "decay_exponent_se": float(math.sqrt(1.0 / sxx)),
            "target_exponent": -spec.d / min(2.0, spec.alpha)}


def _analyze_scaling(plan, ctx, payloads):
    A = np.asarray([p["A"] for p in payloads])
    rec = ctx["rec"]
    fit = stats.variance_scaling(A, rec)
    out = {"horizons": rec.tolist(), "var": fit["var"].tolist(),
           "var_se_log": fit["se_log"].tolist(), "slope": fit["slope"],
           "slope_se": fit["slope_se"], "intercept": fit["intercept"]}
    if ctx["finite"] and payloads and "sigma2" in payloads[0]:
        s2 = np.asarray([p["sigma2"] for p in payloads])
        out["sigma2_hat"] = float(s2.mean())
        out["sigma2_se"] = float(s2.std(ddof=1) / math.sqrt(s2.size))
        w = 1.0 / np.square(fit["se_log"])
        ratio_pool = float(np.sum(w * fit["var"] / rec) / np.sum(w))
        out["var_over_horizon"] = ratio_pool
        out["ratio"] = ratio_pool / out["sigma2_hat"]
    return out


def _analyze_fdd(plan, ctx, payloads):
    A = np.asarray([p["A"] for p in payloads])
    spec = ctx["spec"]
    coeff = ctx["coeff"]
    theta, sigma = coeff["theta"], coeff["sigma"]
    N = max(plan.N_grid)
    lam = walk.normalizer(N, spec.d, spec.alpha)
    # columns of A follow record_times = sorted {N*t}; with a single N the
    # column order is the t order
    rec = ctx["rec"]
    cols = np.searchsorted(rec, [N * t for t in plan.t_grid])
    X = A[:, cols] / lam
    from scipy.special import ndtr
    kss = []
    for j, t in enumerate(plan.t_grid):
        sd = sigma * t ** theta
        D, pv = stats.ks_test(X[:, j], lambda x, sd=sd: ndtr(x / sd))
        kss.append({"t": t, "D": float(D), "p": float(pv)})
    R = X.shape[0]
    emp = np.cov(X.T, ddof=1).reshape(len(plan.t_grid), len(plan.t_grid))
    tgt = np.array([[sigma ** 2 * limits.fbm_covariance(theta, s, t)
                     for t in plan.t_grid] for s in plan.t_grid])
    cse = np.sqrt((np.outer(np.diag(emp), np.diag(emp)) + emp ** 2) / (R - 1))
    return {"N": N, "normalizer": float(lam), "theta": theta, "sigma": sigma,
            "ks": kss, "cov_emp": emp.tolist(), "cov_target": tgt.tolist(),
            "cov_se": cse.tolist()}


def _analyze_lclt(plan, ctx):
    spec = ctx["spec"]
    rows = []
    for s in plan.record_times():
        d = walk.lclt_discrepancy(s, spec.d, spec.alpha)
        rows.append({"s": s, "sup": d["sup"], "at": d["at"], "h": d["h"],
                     "origin_ratio": d["origin_ratio"]})
    sups = [r["sup"] for r in rows]
    return {"points": rows,
            "decreasing": bool(all(b < a for a, b in zip(sups, sups[1:])))}


def _dual(fn, *args):
    a = fn(*args, method="closed")
    b = fn(*args, method="quad")
    a0 = a if np.isscalar(a) else np.asarray(a)
    b0 = b if np.isscalar(b) else np.asarray(b)
    rel = float(np.max(np.abs(np.asarray(a0) - np.asarray(b0))
                       / np.abs(np.asarray(a0))))
    return {"closed": np.asarray(a).tolist(), "quad": np.asarray(b).tolist(),
            "rel": rel}


def _constants_payload(plan, ctx):
    spec = ctx["spec"]
    profile = ctx["profile"]
    coeff = ctx["coeff"]
    sampler = engine.DisplacementSampler(spec)
    out = {
        "d": spec.d, "alpha": spec.alpha, "L": spec.L, "gamma": spec.gamma,
        "rate": {"kind": spec.rate_family.kind, "a": spec.rate_family.a,
                 "b": spec.rate_family.b},
        "beta": profile.beta, "beta_prime": profile.beta_prime,
        "var_occ": profile.var_occ, "partition_Z": profile.Z,
        "vbar_prime": ctx["vp"],
        "torus_kernel_mass": float(sampler.S),
        "stable_density_at_origin": limits.stable_density_at_origin(
            spec.d, spec.alpha),
        "theta": coeff["theta"], "sigma": coeff["sigma"],
        "normalizer": coeff["normalizer"], "regime": coeff["regime"],
        "limit": coeff["limit"],
        "relaxation_constant": limits.relaxation_constant(
            spec.d, spec.alpha, profile, ctx["obs"]),
        # log-corrected normalizers are undefined at horizon 1, skip those
        "normalizer_at": {"%g" % N: walk.normalizer(N, spec.d, spec.alpha)
                          for N in plan.N_grid if N > 1.0},
    }
    if plan.experiment == "constants":
        duals = {"stable_density_at_origin":
                 _dual(limits.stable_density_at_origin, spec.d, spec.alpha)}
        if spec.alpha < 2.0:
            duals["weight_c"] = _dual(limits.weight_c, spec.d, spec.alpha)
        else:
            duals["gaussian_scale"] = _dual(limits.gaussian_scale,
                                            spec.d, spec.alpha)
        out["dual_routes"] = duals
    return out


# ---------------------------------------------------------------------------
# verdicts, shared by run_plan (summary) and verify (exit code)

def _verdict_rows(plan, summary):
    tol = plan.tolerances
    rows = []

    def add(name, target, estimate, ok):
        rows.append({"check": name, "target": target, "estimate": estimate,
                     "passed": bool(ok)})

    exp = plan.experiment
    if exp == "stationarity":
        thr = float(tol.get("p_threshold", 0.01))
        frac = float(tol.get("min_pass_fraction", 0.9))
        R = len(summary["p_values"])
        need = int(math.ceil(frac * R))
        npass = sum(pv > thr for pv in summary["p_values"])
        add("stationarity chi-square",
            ">= %d/%d runs with p > %g" % (need, R, thr),
            "%d/%d passing" % (npass, R), npass >= need)
    elif exp == "autocov":
        mult = float(tol.get("se_mult", 3.0))
        target = summary["target"]
        for pr in summary["probes"]:
            ok = abs(pr["product"] - target) <= mult * pr["se"]
            add("relaxation product at t=%g" % pr["t"],
                "%.6g within %g se" % (target, mult),
                "%.6g (se %.2g)" % (pr["product"], pr["se"]), ok)
        band = float(tol.get("exponent_band", 0.1))
        te = summary["target_exponent"]
        ok = abs(summary["decay_exponent"] - te) <= band
        add("autocovariance decay exponent", "%g +- %g" % (te, band),
            "%.4f" % summary["decay_exponent"], ok)
    elif exp == "scaling":
        if "slope_range" in tol:
            lo, hi = (float(x) for x in tol["slope_range"])
            strict = True
        else:
            band = float(tol.get("slope_band", 0.1))
            tgt = 2.0 * summary["slope_target_theta"]
            lo, hi = tgt - band, tgt + band
            strict = False
        s = summary["slope"]
        ok = (lo < s < hi) if strict else (lo <= s <= hi)
        add("variance scaling slope", "in [%g, %g]" % (lo, hi),
            "%.4f (se %.3f)" % (s, summary["slope_se"]), ok)
        if "ratio" in summary:
            rt = float(tol.get("ratio_tol", 0.15))
            ok = abs(summary["ratio"] - 1.0) <= rt
            add("Var(A)/T vs integrated autocovariance",
                "ratio within %g%%" % (100 * rt),
                "%.4f" % summary["ratio"], ok)
    elif exp == "fdd-law":
        ksp = float(tol.get("ks_p", 0.01))
        last = summary["ks"][-1]
        add("KS of A(N)/Lambda at t=%g" % last["t"], "p > %g" % ksp,
            "p = %.4f" % last["p"], last["p"] > ksp)
        mult = float(tol.get("cov_se_mult", 4.0))
        emp = np.asarray(summary["cov_emp"])
        tgt = np.asarray(summary["cov_target"])
        cse = np.asarray(summary["cov_se"])
        ok = bool(np.all(np.abs(emp - tgt) <= mult * cse))
        worst = float(np.max(np.abs(emp - tgt) / cse))
        add("covariance cells", "all within %g se" % mult,
            "worst %.2f se" % worst, ok)
    elif exp == "lclt":
        add("sup discrepancy decreasing", "strict", str(summary["decreasing"]),
            summary["decreasing"])
        rtol = float(tol.get("origin_tol", 0.02))
        last = summary["points"][-1]
        ok = abs(last["origin_ratio"] - 1.0) <= rtol
        add("origin ratio at s=%g" % last["s"], "1 +- %g" % rtol,
            "%.5f" % last["origin_ratio"], ok)
    elif exp == "constants":
        rtol = float(tol.get("dual_rel_tol", 1e-8))
        for name, d in summary["dual_routes"].items():
            add("dual route %s" % name, "rel <= %g" % rtol,
                "rel %.2e" % d["rel"], d["rel"] <= rtol)
    return rows


def format_verdicts(rows):
    if not rows:
        return "no checks defined\n"
    widths = [max(len(r["check"]) for r in rows),
              max(len(str(r["target"])) for r in rows),
              max(len(str(r["estimate"])) for r in rows)]
    out = []
    for r in rows:
        out.append("%-*s  %-*s  %-*s  %s" % (
            widths[0], r["check"], widths[1], r["target"],
            widths[2], r["estimate"], "PASS" if r["passed"] else "FAIL"))
    return "\n".join(out) + "\n"


# ---------------------------------------------------------------------------
# artifact files

def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    return obj


def _dump_json(path, obj):
    with open(path, "w") as fh:
        json.dump(_jsonable(obj), fh, indent=2, sort_keys=True)
        fh.write("\n")


def _write_paths_csv(path, plan, payloads, rec):
    pos = {tau: i for i, tau in enumerate(rec.tolist())}
    with open(path, "w") as fh:
        fh.write("replica,N,t,A\n")
        for p in payloads:
            for N in plan.N_grid:
                for t in plan.t_grid:
                    A = p["A"][pos[float(N) * float(t)]]
                    fh.write("%d,%.17g,%.17g,%.17g\n"
                             % (p["replica"], N, t, A))


def run_plan(plan, out_dir=None, workers=None, master_seed=None):
    """Execute a plan and write its artifacts. Returns the summary dict."""
    if master_seed is not None:
        plan.master_seed = int(master_seed)
    out_dir = plan.outputs if out_dir is None else out_dir
    os.makedirs(out_dir, exist_ok=True)
    workers = plan.workers if workers is None else int(workers)
    t0 = time.monotonic()
    ctx = _prepare(plan)
    payloads = []
    error = None
    try:
        if plan.experiment == "lclt":
            summary = _analyze_lclt(plan, ctx)
        elif plan.experiment == "constants":
            summary = _constants_payload(plan, ctx)
        else:
            payloads = _run_replicas(plan, workers)
            if plan.experiment == "stationarity":
                summary = _analyze_stationarity(plan, ctx, payloads)
            elif plan.experiment == "autocov":
                summary = _analyze_autocov(plan, ctx, payloads)
            elif plan.experiment == "scaling":
                summary = _analyze_scaling(plan, ctx, payloads)
                summary["slope_target_theta"] = ctx["coeff"]["theta"]
            else:
                summary = _analyze_fdd(plan, ctx, payloads)
    except Exception as exc:
        error = "%s: %s" % (type(exc).__name__, exc)
        _write_paths_csv(os.path.join(out_dir, "paths.csv"), plan, payloads,
                         ctx["rec"])
        _dump_json(os.path.join(out_dir, "manifest.json"), {
            "artifact_version": ARTIFACT_VERSION, "package": __version__,
            "plan": plan_echo(plan), "complete": False, "error": error,
            "wall_time_s": time.monotonic() - t0,
        })
        raise RunnerError("plan execution failed: %s" % error) from exc
    summary["experiment"] = plan.experiment
    summary["replicas"] = plan.replicas
    summary["total_events"] = int(sum(p["events"] for p in payloads))
    summary["verdicts"] = _verdict_rows(plan, summary)
    _write_paths_csv(os.path.join(out_dir, "paths.csv"), plan, payloads,
                     ctx["rec"])
    _dump_json(os.path.join(out_dir, "summary.json"), summary)
    _dump_json(os.path.join(out_dir, "constants.json"),
               _constants_payload(plan, ctx))
    _dump_json(os.path.join(out_dir, "manifest.json"), {
        "artifact_version": ARTIFACT_VERSION, "package": __version__,
        "plan": plan_echo(plan), "complete": True,
        "backend": engine.get_backend().BACKEND,
        "wall_time_s": time.monotonic() - t0,
    })
    return summary


def verify(plan, results_dir):
    """Check a finished run against its plan's thresholds.

    Returns (exit_code, rows): 0 all pass, 2 statistical failure,
    1 execution problem (missing or incomplete artifacts)."""
    man_path = os.path.join(results_dir, "manifest.json")
    sum_path = os.path.join(results_dir, "summary.json")
    if not os.path.exists(man_path) or not os.path.exists(sum_path):
        return 1, [{"check": "artifacts", "target": "present",
                    "estimate": "missing in %s" % results_dir,
                    "passed": False}]
    with open(man_path) as fh:
        manifest = json.load(fh)
    if not manifest.get("complete", False):
        return 1, [{"check": "manifest", "target": "complete run",
                    "estimate": "incomplete: %s"
                    % manifest.get("error", "unknown"), "passed": False}]
    with open(sum_path) as fh:
        summary = json.load(fh)
    if summary.get("experiment") != plan.experiment:
        return 1, [{"check": "experiment", "target": plan.experiment,
                    "estimate": str(summary.get("experiment")),
                    "passed": False}]
    rows = _verdict_rows(plan, summary)
    code = 0 if all(r["passed"] for r in rows) else 2
    return code, rows
