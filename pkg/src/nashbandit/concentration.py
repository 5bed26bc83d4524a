"""Analytic tail/MGF bounds and their Monte-Carlo falsification harness.

Two families of checks live here.  The MGF checker compares an empirical
moment-generating function against the Poisson-style dominance bound that
defines the reward class.  The OLS tail checker simulates the least-squares
estimator on a fixed pull multiset and compares deviation frequencies to
multiplicative Chernoff-type bounds whose rate is controlled by the
leverage ``gamma = max_j z^T V^-1 x_j``.

Every Monte-Carlo verdict allows the empirical frequency a three-standard-
error slack on the bound side, so a PASS is a ~99.7%-confidence statement
and a FAIL indicates a genuine violation (or an implementation bug).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .env import _as_generator

_CHUNK = 20_000


class LeverageViolation(ValueError):
    """The supplied gamma does not dominate the actual leverages."""

    def __init__(self, j: int, actual: float, gamma: float):
        super().__init__(f"leverage hypothesis violated at pull {j}: {actual:.3e} > gamma {gamma:.3e}")
        self.j = j
        self.actual = actual
        self.gamma = gamma


def mgf_bound(mean: float, nu: float, lam: float) -> float:
    """Dominating MGF value ``exp(mean / nu * (exp(nu * lam) - 1))``."""
    if nu <= 0:
        raise ValueError("nu must be positive")
    return math.exp(mean / nu * math.expm1(nu * lam))


@dataclass(frozen=True)
class MgfRow:
    lam: float
    bound: float
    empirical: float
    stderr: float
    violated: bool
    diverged: bool = False


@dataclass(frozen=True)
class SubPoissonReport:
    claimed_nu: float
    mean: float
    n_samples: int
    rows: tuple[MgfRow, ...]
    passed: bool

    def as_dict(self) -> dict:
        return {
            "claimed_nu": self.claimed_nu,
            "mean": self.mean,
            "n_samples": self.n_samples,
            "passed": self.passed,
            "rows": [vars(r) for r in self.rows],
        }


def check_sub_poisson(sampler, claimed_nu, mean, lambda_grid, n_samples, rng) -> SubPoissonReport:
    """Empirically test the MGF dominance claim on a grid of exponents.

    A grid point counts as a violation when the empirical MGF exceeds the
    bound by more than three standard errors; a heavy-tailed grid point
    whose empirical MGF fails to converge is reported as diverged rather
    than crashing the check.
    """
    if n_samples < 10_000:
        raise ValueError("need at least 1e4 samples for a meaningful check")
    gen = _as_generator(rng)
    x = np.asarray(sampler(gen, n_samples), dtype=float)
    rows = []
    for lam in lambda_grid:
        vals = np.exp(lam * x)
        emp = float(vals.mean())
        if not math.isfinite(emp):
            rows.append(MgfRow(lam=float(lam), bound=mgf_bound(mean, claimed_nu, lam),
                               empirical=emp, stderr=float("nan"), violated=False, diverged=True))
            continue
        se = float(vals.std(ddof=1) / math.sqrt(n_samples))
        bound = mgf_bound(mean, claimed_nu, lam)
        rows.append(MgfRow(lam=float(lam), bound=bound, empirical=emp, stderr=se,
                           violated=emp - 3.0 * se > bound))
    return SubPoissonReport(
        claimed_nu=float(claimed_nu),
        mean=float(mean),
        n_samples=int(n_samples),
        rows=tuple(rows),
        passed=not any(r.violated for r in rows),
    )


@dataclass(frozen=True)
class TailBoundSpec:
    """Parameters of one multiplicative OLS tail bound."""

    direction: str  # "upper" | "lower" | "two-sided"
    delta: float
    gamma: float
    nu: float
    mean: float

    def __post_init__(self):
        if self.direction not in ("upper", "lower", "two-sided"):
            raise ValueError(f"unknown direction {self.direction!r}")
        if not 0 <= self.delta <= 1:
            raise ValueError("delta must lie in [0, 1]")
        if self.gamma <= 0 or self.nu <= 0:
            raise ValueError("gamma and nu must be positive")
        if self.mean < 0:
            raise ValueError("target mean must be nonnegative")


def ols_tail_bound(spec: TailBoundSpec) -> float:
    """Failure-probability bound for the estimator deviation event."""
    rate = spec.delta**2 * spec.mean / (spec.nu * spec.gamma)
    if spec.direction == "upper":
        return math.exp(-rate / 3.0)
    if spec.direction == "lower":
        return math.exp(-rate / 2.0)
    return 2.0 * math.exp(-rate / 3.0)


@dataclass(frozen=True)
class TailCheckRow:
    name: str
    bound: float
    empirical: float
    slack: float
    trials: int
    passed: bool

    def as_dict(self) -> dict:
        return vars(self)


@dataclass(frozen=True)
class TailCheckReport:
    rows: tuple[TailCheckRow, ...]
    gamma_actual: float
    passed: bool

    def as_dict(self) -> dict:
        return {"gamma_actual": self.gamma_actual, "passed": self.passed,
                "rows": [r.as_dict() for r in self.rows]}


def _mc_rewards(model, means, nu, gen, size):
    if model == "bernoulli":
        return gen.binomial(1, means, size=size).astype(float)
    if model == "poisson":
        return gen.poisson(means, size=size).astype(float)
    if model == "scaled-bernoulli":
        return nu * gen.binomial(1, means / nu, size=size).astype(float)
    if model == "deterministic":
        return np.broadcast_to(means, size).astype(float)
    raise ValueError(f"unknown model {model!r}")


def mc_tail_check(xs, theta_star, z, model, spec: TailBoundSpec, trials, rng, alpha=None) -> TailCheckReport:
    """Simulate the least-squares estimator and test the tail bounds.

    ``xs`` is the fixed pull multiset (one row per pull).  The estimator
    reduces to a fixed linear functional of the rewards, so each trial only
    needs a weighted sum.  When ``alpha`` is supplied, the threshold-form
    upper event and the width-form lower event are checked alongside the
    main deviation event.
    """
    if trials < 1_000:
        raise ValueError("need at least 1e3 trials")
    xs = np.asarray(xs, dtype=float)
    theta_star = np.asarray(theta_star, dtype=float)
    z = np.asarray(z, dtype=float)
    gen = _as_generator(rng)

    v = xs.T @ xs
    w = xs @ np.linalg.solve(v, z)
    j_worst = int(w.argmax())
    if w[j_worst] > spec.gamma + 1e-12:
        raise LeverageViolation(j_worst, float(w[j_worst]), spec.gamma)
    mean_z = float(z @ theta_star)
    if abs(mean_z - spec.mean) > 1e-9 * max(1.0, abs(spec.mean)):
        raise ValueError("spec.mean disagrees with <z, theta*>")
    if alpha is not None and mean_z > alpha + 1e-12:
        raise ValueError("alpha-form checks need <z, theta*> <= alpha")

    means = xs @ theta_star
    counts = {"main": 0}
    if alpha is not None:
        counts.update({"alpha-upper": 0, "alpha-lower": 0})
    done = 0
    while done < trials:
        k = min(_CHUNK, trials - done)
        r = _mc_rewards(model, means, spec.nu, gen, (k, xs.shape[0]))
        est = r @ w
        if spec.direction == "upper":
            counts["main"] += int(np.count_nonzero(est >= (1 + spec.delta) * mean_z))
        elif spec.direction == "lower":
            counts["main"] += int(np.count_nonzero(est <= (1 - spec.delta) * mean_z))
        else:
            counts["main"] += int(np.count_nonzero(np.abs(est - mean_z) >= spec.delta * mean_z))
        if alpha is not None:
            counts["alpha-upper"] += int(np.count_nonzero(est >= (1 + spec.delta) * alpha))
            counts["alpha-lower"] += int(np.count_nonzero(est <= mean_z - spec.delta * alpha))
        done += k

    rows = [_verdict(f"{spec.direction} d={spec.delta}", ols_tail_bound(spec), counts["main"], trials)]
    if alpha is not None:
        rate = spec.delta**2 * alpha / (spec.gamma * spec.nu)
        rows.append(_verdict(f"alpha-upper d={spec.delta}", math.exp(-rate / 3.0), counts["alpha-upper"], trials))
        rows.append(_verdict(f"alpha-lower d={spec.delta}", math.exp(-rate / 2.0), counts["alpha-lower"], trials))
    return TailCheckReport(rows=tuple(rows), gamma_actual=float(w[j_worst]),
                           passed=all(r.passed for r in rows))


def mc_tail_suite(xs, theta_star, z, model, nu, gamma, deltas, trials, rng, alpha=None) -> TailCheckReport:
    """All upper/lower/alpha events over a delta grid on shared trials.

    Simulating the estimator dominates the cost, so one batch of trials
    feeds every event; each verdict still rests on ``trials`` samples.
    """
    xs = np.asarray(xs, dtype=float)
    theta_star = np.asarray(theta_star, dtype=float)
    z = np.asarray(z, dtype=float)
    gen = _as_generator(rng)
    v = xs.T @ xs
    w = xs @ np.linalg.solve(v, z)
    j_worst = int(w.argmax())
    if w[j_worst] > gamma + 1e-12:
        raise LeverageViolation(j_worst, float(w[j_worst]), gamma)
    mean_z = float(z @ theta_star)
    means = xs @ theta_star

    deltas = list(deltas)
    counts_up = dict.fromkeys(deltas, 0)
    counts_lo = dict.fromkeys(deltas, 0)
    counts_au = dict.fromkeys(deltas, 0)
    counts_al = dict.fromkeys(deltas, 0)
    done = 0
    while done < trials:
        k = min(_CHUNK, trials - done)
        est = _mc_rewards(model, means, nu, gen, (k, xs.shape[0])) @ w
        for d in deltas:
            counts_up[d] += int(np.count_nonzero(est >= (1 + d) * mean_z))
            counts_lo[d] += int(np.count_nonzero(est <= (1 - d) * mean_z))
            if alpha is not None:
                counts_au[d] += int(np.count_nonzero(est >= (1 + d) * alpha))
                counts_al[d] += int(np.count_nonzero(est <= mean_z - d * alpha))
        done += k

    rows = []
    for d in deltas:
        up = TailBoundSpec("upper", d, gamma, nu, mean_z)
        lo = TailBoundSpec("lower", d, gamma, nu, mean_z)
        rows.append(_verdict(f"upper d={d}", ols_tail_bound(up), counts_up[d], trials))
        rows.append(_verdict(f"lower d={d}", ols_tail_bound(lo), counts_lo[d], trials))
        if alpha is not None:
            rate = d**2 * alpha / (gamma * nu)
            rows.append(_verdict(f"alpha-upper d={d}", math.exp(-rate / 3.0), counts_au[d], trials))
            rows.append(_verdict(f"alpha-lower d={d}", math.exp(-rate / 2.0), counts_al[d], trials))
    return TailCheckReport(rows=tuple(rows), gamma_actual=float(w[j_worst]),
                           passed=all(r.passed for r in rows))


def _verdict(name, bound, count, trials) -> TailCheckRow:
    freq = count / trials
    slack = 3.0 * math.sqrt(max(bound * (1.0 - bound), 0.0) / trials)
    return TailCheckRow(name=name, bound=float(bound), empirical=float(freq),
                        slack=float(slack), trials=int(trials), passed=freq <= bound + slack)


def chernoff_lower_tail_bound(mu: float, eps: float) -> float:
    """``P{S <= (1 - eps) mu} <= exp(-mu eps^2 / 2)`` for Bernoulli sums."""
    if not 0 <= eps <= 1:
        raise ValueError("eps must lie in [0, 1]")
    return math.exp(-mu * eps**2 / 2.0)


def mc_quota_check(sequence_len: int = 300, trials: int = 10_000, rng=None) -> TailCheckRow:
    """Fair-coin quota event behind the schedule generator.

    Out of ``sequence_len`` fair flips, the design branch is taken on
    heads; the quota fails when heads fall below ``ceil(sequence_len / 3)``.
    The empirical failure frequency is compared to the Chernoff bound at
    that threshold.
    """
    gen = _as_generator(rng if rng is not None else np.random.default_rng(0))
    quota = math.ceil(sequence_len / 3)
    mu = sequence_len / 2.0
    eps = 1.0 - quota / mu
    heads = gen.binomial(sequence_len, 0.5, size=trials)
    count = int(np.count_nonzero(heads < quota))
    return _verdict(f"quota T~={sequence_len}", chernoff_lower_tail_bound(mu, eps), count, trials)
