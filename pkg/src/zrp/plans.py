"""Experiment plans: JSON schema, validation, and seed bookkeeping."""

import json
from dataclasses import dataclass, field

from .model import ModelSpec, RateFamily
from . import walk

EXPERIMENTS = ("stationarity", "autocov", "scaling", "fdd-law", "lclt", "constants")


class PlanError(ValueError):
    """Malformed or inconsistent experiment plan."""


@dataclass
class SeriesSpec:
    """Dense origin-series recording used by autocovariance estimates."""

    dt: float = 0.25
    t_max: float = 500.0
    watch: int = 16


@dataclass
class ExperimentPlan:
    experiment: str
    model: ModelSpec
    observable_kind: str
    N_grid: list
    t_grid: list
    replicas: int
    master_seed: int
    workers: int = 1
    outputs: str = "out"
    series: SeriesSpec = None
    tolerances: dict = field(default_factory=dict)
    raw: dict = field(default_factory=dict)

    @property
    def horizon(self):
        return max(self.N_grid) * max(self.t_grid)

    def record_times(self):
        """Sorted unique N*t products."""
        times = sorted({float(N) * float(t) for N in self.N_grid for t in self.t_grid})
        return times


def _need(d, key, typ, where):
    if key not in d:
        raise PlanError("missing field '%s' in %s" % (key, where))
    v = d[key]
    if typ is float and isinstance(v, int) and not isinstance(v, bool):
        v = float(v)
    if not isinstance(v, typ):
        raise PlanError("field '%s' in %s must be %s" % (key, where, typ.__name__))
    return v


def plan_from_dict(cfg):
    """Build and validate a plan from a parsed JSON object."""
    if not isinstance(cfg, dict):
        raise PlanError("plan must be a JSON object")
    experiment = _need(cfg, "experiment", str, "plan")
    if experiment not in EXPERIMENTS:
        raise PlanError("unknown experiment %r; pick one of %s"
                        % (experiment, ", ".join(EXPERIMENTS)))
    m = _need(cfg, "model", dict, "plan")
    r = _need(m, "rate", dict, "model")
    kind = _need(r, "kind", str, "model.rate")
    if kind not in ("linear", "affine"):
        raise PlanError("unknown rate kind %r in field model.rate.kind" % kind)
    a = _need(r, "a", float, "model.rate")
    b = float(r.get("b", 0.0))
    try:
        family = RateFamily(kind, a, b)
        model = ModelSpec(d=_need(m, "d", int, "model"),
                          alpha=_need(m, "alpha", float, "model"),
                          L=_need(m, "L", int, "model"),
                          rate_family=family,
                          gamma=_need(m, "gamma", float, "model"))
    except ValueError as exc:
        raise PlanError("model: %s" % exc) from exc
    obs = cfg.get("observable", {"kind": "occupation"})
    if not isinstance(obs, dict) or "kind" not in obs:
        raise PlanError("observable must be an object with a 'kind'")
    obs_kind = obs["kind"]
    if obs_kind not in ("occupation", "rate_centered"):
        raise PlanError("observable kind %r not runnable from a plan; "
                        "use occupation or rate_centered" % obs_kind)
    N_grid = cfg.get("N_grid", [1])
    t_grid = cfg.get("t_grid", [1.0])
    if (not isinstance(N_grid, list) or not N_grid
            or any((not isinstance(x, (int, float))) or x <= 0 for x in N_grid)):
        raise PlanError("N_grid must be a nonempty list of positive numbers")
    if (not isinstance(t_grid, list) or not t_grid
            or any((not isinstance(x, (int, float))) or x <= 0 for x in t_grid)):
        raise PlanError("t_grid must be a nonempty list of positive times")
    N_grid = [float(x) for x in N_grid]
    t_grid = [float(x) for x in t_grid]
    if sorted(set(N_grid)) != N_grid:
        raise PlanError("N_grid must be strictly increasing")
    if sorted(set(t_grid)) != t_grid:
        raise PlanError("t_grid must be strictly increasing")
    replicas = _need(cfg, "replicas", int, "plan")
    if replicas < 1:
        raise PlanError("replicas must be positive")
    if experiment == "fdd-law" and replicas < 100:
        raise PlanError("law checks need at least 100 replicas, got %d" % replicas)
    master_seed = _need(cfg, "master_seed", int, "plan")
    if not 0 <= master_seed < 2 ** 64:
        raise PlanError("master_seed must be an unsigned 64-bit integer")
    workers = int(cfg.get("workers", 1))
    if workers < 1:
        raise PlanError("workers must be positive")
    series = None
    if cfg.get("series") is not None:
        s = cfg["series"]
        if not isinstance(s, dict):
            raise PlanError("series must be an object")
        series = SeriesSpec(dt=float(s.get("dt", 0.25)),
                            t_max=float(s.get("t_max", 500.0)),
                            watch=int(s.get("watch", 16)))
        if series.dt <= 0 or series.t_max <= series.dt:
            raise PlanError("series needs 0 < dt < t_max")
        if not 1 <= series.watch <= model.geometry.n_sites:
            raise PlanError("series.watch must be between 1 and n_sites")
    if experiment == "autocov":
        if series is None:
            raise PlanError("autocov needs a series block")
        if series.t_max < 8.0 * max(t_grid):
            raise PlanError(
                "autocov probes lags up to 2*max(t_grid)=%g; series.t_max "
                "must be at least 8*max(t_grid)=%g for usable error bars"
                % (2.0 * max(t_grid), 8.0 * max(t_grid)))
    tolerances = cfg.get("tolerances", {})
    if not isinstance(tolerances, dict):
        raise PlanError("tolerances must be an object")
    plan = ExperimentPlan(experiment=experiment, model=model,
                          observable_kind=obs_kind, N_grid=N_grid,
                          t_grid=t_grid, replicas=replicas,
                          master_seed=master_seed, workers=workers,
                          outputs=str(cfg.get("outputs", "out")),
                          series=series, tolerances=dict(tolerances),
                          raw=cfg)
    _check_geometry_bound(plan)
    return plan


def _check_geometry_bound(plan):
    """Horizon-vs-torus bound for the limit-law probes. The fractional and
    marginal regimes need the walk to stay clear of its own periodic images
    over the probed range: L >= 8 h_alpha(range). Diffusive (square-root)
    regimes only need the integrated autocovariance to converge, and a
    stationarity check is exact for any L, so those get a fixed floor."""
    if plan.experiment not in ("autocov", "scaling", "fdd-law"):
        return
    d, alpha = plan.model.d, plan.model.alpha
    sqrt_regime = (d == 1 and alpha < 1.0) or (d == 2 and alpha < 2.0) or d >= 3
    if sqrt_regime:
        if plan.model.L < 64:
            raise PlanError("L=%d too small; diffusive runs need L >= 64"
                            % plan.model.L)
        return
    # autocov probes correlations out to lag 2*t_max, not the full run length
    horizon = 2.0 * plan.horizon if plan.experiment == "autocov" else plan.horizon
    h = walk.scaling_h(max(horizon, 1.0 + 1e-9), alpha)
    need = 8.0 * h
    if plan.model.L < need:
        raise PlanError(
            "L=%d violates the image bound: probed range %g has h=%.3g, "
            "needs L >= %d" % (plan.model.L, horizon, h, int(need) + 1))


def load_plan(path):
    """Parse and validate a JSON plan file."""
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except FileNotFoundError:
        raise PlanError("plan file not found: %s" % path)
    except json.JSONDecodeError as exc:
        raise PlanError("plan %s is not valid JSON: line %d column %d: %s"
                        % (path, exc.lineno, exc.colno, exc.msg))
    return plan_from_dict(cfg)


def plan_echo(plan):
    """The plan as a plain dict for the manifest."""
    m = plan.model
    return {
        "experiment": plan.experiment,
        "model": {"d": m.d, "alpha": m.alpha, "L": m.L, "gamma": m.gamma,
                  "rate": {"kind": m.rate_family.kind, "a": m.rate_family.a,
                           "b": m.rate_family.b}},
        "observable": {"kind": plan.observable_kind},
        "N_grid": plan.N_grid,
        "t_grid": plan.t_grid,
        "replicas": plan.replicas,
        "master_seed": plan.master_seed,
        "workers": plan.workers,
        "series": (None if plan.series is None else
                   {"dt": plan.series.dt, "t_max": plan.series.t_max,
                    "watch": plan.series.watch}),
        "tolerances": plan.tolerances,
    }
