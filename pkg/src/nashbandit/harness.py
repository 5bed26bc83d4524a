"""Experiment orchestration: configs, replica runs, persistence, validation.

Determinism contract: a config plus master seed fixes every output byte.
Replica tasks are keyed by (algorithm label, replica index); each derives
its own RNG stream from that lineage, so results do not depend on worker
count or scheduling, and files are written in lineage order.
"""

from __future__ import annotations

import dataclasses
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import concentration, design, geometry, metrics, runlog, svg
from .baselines import run_thompson
from .env import BanditInstance, RngStream, generate_instance
from .linnash import generate_arm_sequence, run_linnash_finite, run_linnash_infinite
from .runlog import TAG_DG_OPT, TAG_SAMPLE_U, RunLog

SUMMARY_COLUMNS = ("algo", "t", "nash_regret", "avg_regret",
                   "nash_regret_replica_mean", "nash_regret_replica_se")


@dataclass
class InstanceSpec:
    d: int = 2
    n_arms: int = 10
    max_mean: float = 0.5
    model: str = "bernoulli"
    kind: str = "gaussian"
    scale_bound: float = 1.0
    path: str | None = None

    def materialize(self, master_seed: int) -> BanditInstance:
        if self.path is not None:
            with open(self.path, "r", encoding="utf-8") as fh:
                return BanditInstance.from_json(fh.read())
        return generate_instance(self.d, self.n_arms, self.max_mean, self.model,
                                 rng=RngStream(master_seed, 0, "instance"),
                                 kind=self.kind, scale_bound=self.scale_bound)


@dataclass
class AlgoSpec:
    name: str  # linnash-finite | linnash-infinite | thompson
    label: str = ""
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.name not in ("linnash-finite", "linnash-infinite", "thompson"):
            raise ValueError(f"unknown algorithm {self.name!r}")
        if not self.label:
            self.label = self.name


@dataclass
class ExperimentConfig:
    instance: InstanceSpec = field(default_factory=InstanceSpec)
    algorithms: list = field(default_factory=lambda: [AlgoSpec("linnash-finite")])
    horizon: int = 1000
    replicas: int = 1
    master_seed: int = 0
    stride: int = 100
    out_dir: str = "out"
    workers: int = 1

    def __post_init__(self):
        if self.horizon < 1 or self.replicas < 1 or self.stride < 1 or self.workers < 1:
            raise ValueError("horizon, replicas, stride and workers must be positive")
        if not self.algorithms:
            raise ValueError("at least one algorithm is required")

    def to_json(self) -> str:
        doc = dataclasses.asdict(self)
        return json.dumps(doc, indent=2, sort_keys=True)

    @staticmethod
    def from_json(text: str) -> "ExperimentConfig":
        doc = json.loads(text)
        doc["instance"] = InstanceSpec(**doc.get("instance", {}))
        doc["algorithms"] = [AlgoSpec(**a) for a in doc.get("algorithms", [])]
        return ExperimentConfig(**doc)


def preset_config(name: str, scale: float = 1.0, **overrides) -> ExperimentConfig:
    """Shipped experiment presets; ``scale`` multiplies d, |X| and T."""
    if name != "paper-figure1":
        raise ValueError(f"unknown preset {name!r}")
    cfg = ExperimentConfig(
        instance=InstanceSpec(d=max(1, round(80 * scale)),
                              n_arms=max(1, round(10000 * scale)),
                              max_mean=0.5, model="bernoulli"),
        algorithms=[AlgoSpec("linnash-finite")] + [
            AlgoSpec("thompson", label=f"thompson-v{v}", params={"v": v})
            for v in (0.1, 0.25, 0.5, 1.0)
        ],
        horizon=max(2, round(50000 * scale)),
        replicas=20,
        stride=max(1, round(500 * scale)),
    )
    for k, v in overrides.items():
        setattr(cfg, k, v)
    return cfg


def _run_one(config_json: str, label: str, replica: int) -> RunLog:
    cfg = ExperimentConfig.from_json(config_json)
    spec = next(a for a in cfg.algorithms if a.label == label)
    instance = cfg.instance.materialize(cfg.master_seed)
    rng = RngStream(cfg.master_seed, replica, spec.label)
    if spec.name == "linnash-finite":
        log = run_linnash_finite(instance, cfg.horizon, rng, **spec.params)
    elif spec.name == "linnash-infinite":
        log = run_linnash_infinite(instance, cfg.horizon, rng, **spec.params)
    else:
        log = run_thompson(instance, cfg.horizon, rng, algo_label=spec.label, **spec.params)
    log.algo = spec.label
    log.run_id = f"{spec.label}_s{cfg.master_seed}_r{replica}"
    return log


def run_experiment(cfg: ExperimentConfig):
    """Run all (algorithm, replica) tasks and write every artifact.

    Returns the mapping label -> list of run logs (in replica order).
    """
    os.makedirs(cfg.out_dir, exist_ok=True)
    runs_dir = os.path.join(cfg.out_dir, "runs")
    os.makedirs(runs_dir, exist_ok=True)
    config_json = cfg.to_json()
    with open(os.path.join(cfg.out_dir, "config.json"), "w", encoding="utf-8", newline="") as fh:
        fh.write(config_json + "\n")
    instance = cfg.instance.materialize(cfg.master_seed)
    with open(os.path.join(cfg.out_dir, "instance.json"), "w", encoding="utf-8", newline="") as fh:
        fh.write(instance.to_json() + "\n")

    tasks = [(a.label, r) for a in cfg.algorithms for r in range(cfg.replicas)]
    results: dict = {}
    if cfg.workers == 1:
        for label, r in tasks:
            results[(label, r)] = _run_one(config_json, label, r)
    else:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            futures = {key: pool.submit(_run_one, config_json, *key) for key in tasks}
            results = {key: fut.result() for key, fut in futures.items()}

    by_algo = {}
    for a in cfg.algorithms:
        logs = [results[(a.label, r)] for r in range(cfg.replicas)]
        by_algo[a.label] = logs
        for r, log in enumerate(logs):
            runlog.write_csv(log, os.path.join(runs_dir, f"{a.label}_r{r:04d}.csv"))

    _write_summary(by_algo, cfg)
    _write_curve_svg(by_algo, cfg)
    return by_algo


def _per_replica_curve(log: RunLog, grid) -> np.ndarray:
    est = log.true_mean
    zero_seen = np.cumsum(est <= 0.0) > 0
    log_sum = np.cumsum(np.log(np.where(est > 0.0, est, 1.0)))
    lin_sum = np.cumsum(est)
    out = np.empty(len(grid))
    for i, t in enumerate(grid):
        if zero_seen[t - 1]:
            out[i] = log.optimal_mean
        else:
            geo = min(math.exp(log_sum[t - 1] / t), lin_sum[t - 1] / t)
            out[i] = log.optimal_mean - geo
    return out


def summary_rows(by_algo: dict, stride: int) -> list:
    rows = []
    for label in by_algo:
        logs = by_algo[label]
        curve = metrics.regret_curve(logs, stride)
        grid = [p.t for p in curve]
        per = np.stack([_per_replica_curve(lg, grid) for lg in logs])
        se = per.std(axis=0, ddof=1) / math.sqrt(len(logs)) if len(logs) > 1 else np.zeros(len(grid))
        for i, p in enumerate(curve):
            rows.append((label, p.t, p.nash, p.average, float(per[:, i].mean()), float(se[i])))
    return rows


def _write_summary(by_algo, cfg):
    rows = summary_rows(by_algo, cfg.stride)
    path = os.path.join(cfg.out_dir, "summary.csv")
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(",".join(SUMMARY_COLUMNS) + "\n")
        for label, t, nash, avg, pm, se in rows:
            fh.write(f"{label},{t},{nash!r},{avg!r},{pm!r},{se!r}\n")


def _write_curve_svg(by_algo, cfg, log_log=False):
    series = {}
    for label, logs in by_algo.items():
        curve = metrics.regret_curve(logs, cfg.stride)
        series[label] = [(p.t, p.nash) for p in curve]
    doc = svg.line_chart(series, title="Nash regret", xlabel="round t",
                         ylabel="Nash regret", log_log=log_log)
    with open(os.path.join(cfg.out_dir, "curve.svg"), "w", encoding="utf-8", newline="") as fh:
        fh.write(doc)


# ---------------------------------------------------------------------------
# Scatter artifact


def phase_groups(log: RunLog) -> list:
    """Chronological pull groups: the schedule part, then each phase."""
    tags = np.asarray(log.phase)
    groups = []
    part1 = np.isin(tags, [TAG_SAMPLE_U, TAG_DG_OPT])
    if part1.any():
        groups.append(("PART-I", np.flatnonzero(part1)))
    ell = 1
    while True:
        mask = tags == f"PHASE({ell})"
        if not mask.any():
            break
        groups.append((f"PHASE({ell})", np.flatnonzero(mask)))
        ell += 1
    return groups


def phase_variances(log: RunLog) -> list:
    return [(name, float(log.true_mean[idx].var())) for name, idx in phase_groups(log)]


def write_scatter(run_dir: str, out_path: str | None = None, max_points: int = 5000,
                  window: tuple | None = None) -> str:
    """Round-wise pulled-mean scatter for every algorithm in a run directory."""
    runs_dir = os.path.join(run_dir, "runs")
    inst_path = os.path.join(run_dir, "instance.json")
    if not os.path.isdir(runs_dir) or not os.path.exists(inst_path):
        raise FileNotFoundError(f"no completed run artifacts under {run_dir!r}")
    with open(inst_path, "r", encoding="utf-8") as fh:
        instance = BanditInstance.from_json(fh.read())
    files = sorted(os.listdir(runs_dir))
    if not files:
        raise FileNotFoundError(f"no run logs under {runs_dir!r}")

    series = {}
    variances = {}
    for name in files:
        log = runlog.read_csv(os.path.join(runs_dir, name), optimal_mean=instance.optimal_mean,
                              instance_digest=instance.digest())
        if log.algo not in series:
            t = np.arange(1, len(log) + 1)
            y = log.true_mean
            if window is not None:
                lo, hi = window
                keep = (t >= lo) & (t <= hi)
                if not keep.any():
                    raise ValueError(f"window {window} selects no rounds")
                t, y = t[keep], y[keep]
            step = max(1, math.ceil(len(t) / max_points))
            series[log.algo] = list(zip(t[::step].tolist(), y[::step].tolist()))
        variances.setdefault(log.algo, []).append(phase_variances(log))

    doc = svg.scatter_chart(series, title="Round-wise pulled mean")
    out_path = out_path or os.path.join(run_dir, "scatter.svg")
    with open(out_path, "w", encoding="utf-8", newline="") as fh:
        fh.write(doc)
    with open(os.path.join(run_dir, "phase_variance.json"), "w", encoding="utf-8", newline="") as fh:
        json.dump(variances, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return out_path


# ---------------------------------------------------------------------------
# Validation suites


def _check(name, passed, bound=None, empirical=None, slack=None, detail=None):
    row = {"name": name, "passed": bool(passed)}
    if bound is not None:
        row.update(bound=float(bound), empirical=float(empirical), slack=float(slack or 0.0))
    if detail:
        row["detail"] = detail
    return row


def _design_suite(seed: int) -> list:
    checks = []
    worst = 0.0
    for k in range(50):
        rng = RngStream(seed, k, "validate-design").generator()
        d = int(rng.integers(2, 11))
        n = int(rng.integers(20, 201))
        arms = rng.standard_normal((n, d))
        w = design.solve_d_optimal(arms)
        g = design.g_value(arms, w)
        worst = max(worst, g / d)
        if len(w.support) > d * (d + 1) // 2 or g < d - 1e-9:
            worst = float("inf")
    checks.append(_check("design.kw-certificate", worst <= 1.05, bound=1.05,
                         empirical=worst, detail="max g/d over 50 seeded instances"))
    return checks


def _geometry_suite(seed: int) -> list:
    checks = []
    worst_q = 0.0
    for k in range(50):
        rng = RngStream(seed, k, "validate-mvee").generator()
        d = int(rng.integers(2, 7))
        n = int(rng.integers(d + 2, 80))
        pts = rng.standard_normal((n, d))
        ell, u = geometry.mvee(pts, eps=1e-6)
        diff = pts - ell.center
        worst_q = max(worst_q, float(np.einsum("ij,ij->i", diff @ ell.shape, diff).max()))
    checks.append(_check("geometry.mvee-containment", worst_q <= 1 + 1e-6,
                         bound=1 + 1e-6, empirical=worst_q))

    tri = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
    ell, _ = geometry.mvee(tri, eps=1e-9)
    err = float(np.abs(ell.center - 1.0 / 3.0).max())
    checks.append(_check("geometry.triangle-center", err <= 1e-6, bound=1e-6, empirical=err))

    fails = 0
    for k in range(100):
        inst = generate_instance(d=int(2 + k % 5), n_arms=40, max_mean=0.5, model="bernoulli",
                                 rng=RngStream(seed, k, "validate-center"))
        cd = geometry.center_distribution(inst.arms, eps=1e-6)
        lhs = float(cd.atom_weights @ inst.means[cd.atom_indices])
        if lhs < inst.optimal_mean / (inst.dim + 1) or cd.atom_indices.size > inst.dim + 1:
            fails += 1
    checks.append(_check("geometry.center-reward-floor", fails == 0, bound=0,
                         empirical=fails, detail="failures out of 100 instances"))
    return checks


def _concentration_suite(seed: int, trials: int = 100_000, inject_defect: bool = False) -> list:
    checks = []
    grid = [-2, -1, -0.5, 0.5, 1, 2]
    gen = RngStream(seed, 0, "validate-mgf").generator()
    samplers = [
        ("bernoulli", lambda g, n: g.binomial(1, 0.3, n), 1.0, 0.3),
        ("poisson", lambda g, n: g.poisson(1.0, n), 1.0, 1.0),
        ("scaled-bernoulli", lambda g, n: 2.0 * g.binomial(1, 0.3, n), 2.0, 0.6),
    ]
    for name, fn, nu, mean in samplers:
        rep = concentration.check_sub_poisson(fn, nu, mean, grid, 10**6, gen)
        checks.append(_check(f"mgf.{name}", rep.passed))
    misclaimed = concentration.check_sub_poisson(lambda g, n: g.poisson(1.0, n), 0.1, 1.0,
                                                 grid, 10**6, gen)
    checks.append(_check("mgf.misclaim-detected", not misclaimed.passed,
                         detail="poisson with claimed nu=0.1 must fail"))
    if inject_defect:
        checks.append(_check("mgf.injected-defect", misclaimed.passed,
                             detail="deliberately corrupted nu surfaced as a failure"))

    xs = np.repeat(np.eye(3), 200, axis=0)
    theta = np.ones(3)
    z = np.array([1.0, 0.0, 0.0])
    rep = concentration.mc_tail_suite(xs, theta, z, "poisson", nu=1.0, gamma=1 / 200,
                                      deltas=(0.1, 0.3, 0.5), trials=trials,
                                      rng=RngStream(seed, 0, "validate-tails"), alpha=1.2)
    for row in rep.rows:
        checks.append(_check(f"tail.{row.name}", row.passed, bound=row.bound,
                             empirical=row.empirical, slack=row.slack))

    quota = concentration.mc_quota_check(300, max(trials, 10_000),
                                         RngStream(seed, 0, "validate-quota"))
    checks.append(_check("tail.quota-chernoff", quota.passed, bound=quota.bound,
                         empirical=quota.empirical, slack=quota.slack))
    checks.extend(_schedule_checks(seed))
    return checks


def _schedule_checks(seed: int) -> list:
    """Quota rate and leverage bound of the actual schedule generator.

    Uses an arm set whose optimal design is known in closed form (the
    standard basis plus the all-ones diagonal, all at leverage exactly d),
    so the leverage bound can be checked against 3d/t with no solver
    slack.
    """
    d = 5
    t_budget = 300
    arms = np.vstack([np.eye(d), np.full((1, d), 1.0 / math.sqrt(d))])
    exact = np.zeros(d + 1)
    exact[:d] = 1.0 / d
    dsn = design.DesignWeights.from_weights(exact)
    center = geometry.center_distribution(arms, eps=1e-9)
    fired = 0
    quota_runs = 0
    worst_lev = 0.0
    n_gens = 1000
    quota_total = sum(math.ceil(t_budget / (3 * d)) for _ in range(d))
    for k in range(n_gens):
        gen = RngStream(seed, k, "validate-schedule").generator()
        entries = generate_arm_sequence(arms, t_budget, dsn, center, gen)
        n_opt = sum(1 for e in entries if e.source == TAG_DG_OPT)
        if n_opt >= math.ceil(t_budget / 3):
            fired += 1
        if n_opt >= quota_total and k < 200:
            quota_runs += 1
            pulled = np.array([e.arm for e in entries])
            v = arms[pulled].T @ arms[pulled]
            lev = arms @ np.linalg.solve(v, arms[pulled].T)
            worst_lev = max(worst_lev, float(lev.max()))
    rate = fired / n_gens
    out = [_check("schedule.quota-rate", rate >= 0.997, bound=0.997, empirical=rate,
                  detail="design branch fired >= budget/3 times")]
    bound = 3 * d / t_budget + 1e-9
    out.append(_check("schedule.leverage-bound", worst_lev <= bound and quota_runs > 0,
                      bound=bound, empirical=worst_lev,
                      detail=f"max x^T V^-1 X_t over {quota_runs} quota-met sequences"))
    return out


def validate(suite: str = "all", seed: int = 0, trials: int = 100_000,
             inject_defect: bool = False) -> dict:
    suites = {
        "design": lambda: _design_suite(seed),
        "geometry": lambda: _geometry_suite(seed),
        "concentration": lambda: _concentration_suite(seed, trials, inject_defect),
    }
    if suite == "all":
        names = ["design", "geometry", "concentration"]
    elif suite in suites:
        names = [suite]
    else:
        raise ValueError(f"unknown suite {suite!r}")
    checks = []
    for name in names:
        checks.extend(suites[name]())
    return {"suite": suite, "seed": seed, "checks": checks,
            "passed": all(c["passed"] for c in checks)}
