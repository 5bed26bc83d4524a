"""Stochastic linear bandits with geometric-mean (Nash) regret instrumentation."""

from .env import BanditInstance, RngStream, generate_instance, sample_reward, sample_rewards
from .metrics import average_regret, nash_regret, per_replica_nash_regret, regret_curve
from .runlog import RunLog

__all__ = [
    "BanditInstance",
    "RngStream",
    "RunLog",
    "average_regret",
    "generate_instance",
    "nash_regret",
    "per_replica_nash_regret",
    "regret_curve",
    "sample_reward",
    "sample_rewards",
]
