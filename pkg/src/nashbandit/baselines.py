"""Linear Thompson Sampling baseline.

Gaussian-posterior sampling over a ridge-regularized least-squares state:
each round draws a parameter from ``N(B^-1 f, v^2 B^-1)`` and pulls the
arm maximizing the sampled linear reward.
"""

from __future__ import annotations

import numpy as np

from .env import BanditInstance, RngStream, _as_generator, sample_rewards
from .runlog import RunLog

TAG_TS = "TS"


def run_thompson(instance: BanditInstance, horizon: int, rng, *,
                 v: float = 0.25, lambda_reg: float = 1.0,
                 algo_label: str = "thompson") -> RunLog:
    if v <= 0 or lambda_reg <= 0:
        raise ValueError("v and lambda_reg must be positive")
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    lineage = rng.label() if isinstance(rng, RngStream) else "adhoc"
    gen = _as_generator(rng)
    d = instance.dim
    arms = instance.arms

    b = lambda_reg * np.eye(d)
    f = np.zeros(d)
    chosen = np.empty(horizon, dtype=int)
    rewards = np.empty(horizon)
    for t in range(horizon):
        chol = np.linalg.cholesky(b)
        mu = np.linalg.solve(b, f)
        theta_sample = mu + v * np.linalg.solve(chol.T, gen.standard_normal(d))
        j = int((arms @ theta_sample).argmax())
        r = float(sample_rewards(instance, j, gen)[0])
        x = arms[j]
        b += np.outer(x, x)
        f += r * x
        chosen[t] = j
        rewards[t] = r

    return RunLog(
        run_id=f"{algo_label}:{lineage}",
        algo=algo_label,
        seed_lineage=lineage,
        instance_digest=instance.digest(),
        optimal_mean=instance.optimal_mean,
        arm_index=chosen,
        true_mean=instance.means[chosen],
        reward=rewards,
        phase=[TAG_TS] * horizon,
        surviving=None,
    )
