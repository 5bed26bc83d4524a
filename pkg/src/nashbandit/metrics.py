"""Nash (geometric-mean) and average regret from run logs.

The round-t expected reward is estimated as the cross-replica mean of the
pulled arms' true means; using true means rather than realized rewards
removes reward noise from the estimator.  A per-replica geometric-mean
variant is also provided, since a single replica already defines a
geometric mean of its own pull sequence.

The geometric mean is accumulated in the log domain.  A round whose
estimate is exactly zero annihilates the product, so the regret
short-circuits to the optimum instead of propagating -inf.  The computed
geometric mean is clamped at the arithmetic mean: the inequality between
them is an identity, so the clamp only removes floating-point wobble and
keeps ``nash >= average`` exact on every output.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .runlog import RunLog


def _check_group(logs) -> None:
    if not logs:
        raise ValueError("need at least one run log")
    digest = logs[0].instance_digest
    algo = logs[0].algo
    horizon = len(logs[0])
    for lg in logs[1:]:
        if lg.instance_digest != digest:
            raise ValueError("run logs come from different instances")
        if lg.algo != algo:
            raise ValueError("run logs come from different algorithms")
        if len(lg) != horizon:
            raise ValueError("run logs have different horizons")


def _round_estimates(logs, upto: int) -> np.ndarray:
    _check_group(logs)
    if not 1 <= upto <= len(logs[0]):
        raise ValueError(f"upto must lie in [1, {len(logs[0])}]")
    acc = np.zeros(upto)
    for lg in logs:
        acc += lg.true_mean[:upto]
    return acc / len(logs)


def nash_regret(logs, upto: int | None = None) -> float:
    logs = list(logs)
    upto = len(logs[0]) if upto is None and logs else upto
    est = _round_estimates(logs, upto)
    opt = logs[0].optimal_mean
    if est.min() <= 0.0:
        return opt
    geo = float(np.exp(np.mean(np.log(est))))
    return opt - min(geo, float(est.mean()))


def average_regret(logs, upto: int | None = None) -> float:
    logs = list(logs)
    upto = len(logs[0]) if upto is None and logs else upto
    est = _round_estimates(logs, upto)
    return logs[0].optimal_mean - float(est.mean())


def per_replica_nash_regret(log: RunLog, upto: int | None = None) -> float:
    """Geometric mean over a single replica's own pull sequence."""
    upto = len(log) if upto is None else upto
    est = log.true_mean[:upto]
    if est.size == 0:
        raise ValueError("empty window")
    if est.min() <= 0.0:
        return log.optimal_mean
    geo = float(np.exp(np.mean(np.log(est))))
    return log.optimal_mean - min(geo, float(est.mean()))


@dataclass(frozen=True)
class CurvePoint:
    t: int
    nash: float
    average: float


def regret_curve(logs, stride: int) -> list[CurvePoint]:
    """Both regrets at ``t = stride, 2*stride, ..., T`` in one O(T) pass."""
    logs = list(logs)
    if stride < 1:
        raise ValueError("stride must be >= 1")
    _check_group(logs)
    horizon = len(logs[0])
    est = _round_estimates(logs, horizon)
    opt = logs[0].optimal_mean

    zero_seen = np.cumsum(est <= 0.0) > 0
    safe = np.where(est > 0.0, est, 1.0)
    log_sum = np.cumsum(np.log(safe))
    lin_sum = np.cumsum(est)

    points = []
    grid = list(range(stride, horizon + 1, stride))
    if not grid or grid[-1] != horizon:
        grid.append(horizon)
    for t in grid:
        mean = lin_sum[t - 1] / t
        if zero_seen[t - 1]:
            points.append(CurvePoint(t=t, nash=opt, average=opt - mean))
        else:
            geo = min(float(np.exp(log_sum[t - 1] / t)), float(mean))
            points.append(CurvePoint(t=t, nash=opt - geo, average=opt - float(mean)))
    return points
