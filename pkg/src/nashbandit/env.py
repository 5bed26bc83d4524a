"""Bandit environments: arm sets, reward models, and seeded randomness.

Arm sets are plain ``(n, d)`` float arrays.  A bandit instance couples an
arm set with a hidden parameter vector and a nonnegative reward model whose
moment-generating function is dominated by the Poisson-style bound
``exp(mean / nu * (exp(nu * lam) - 1))``.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass

import numpy as np

REWARD_MODELS = ("bernoulli", "poisson", "scaled-bernoulli")

_MEAN_TOL = 1e-9


class ModelRangeError(ValueError):
    """A reward mean falls outside the admissible range of its model."""


@dataclass(frozen=True)
class RngStream:
    """Seed lineage (master seed, replica index, purpose tag).

    Streams with distinct lineage are independent and reproducible: the
    lineage is mapped onto a counter-based Philox generator through a
    ``SeedSequence`` spawn key, so no sequential coupling exists between
    replicas and the same lineage always yields the same draws.
    """

    master_seed: int
    replica: int = 0
    purpose: str = "main"

    def generator(self) -> np.random.Generator:
        tag = int.from_bytes(hashlib.sha256(self.purpose.encode()).digest()[:8], "big")
        seq = np.random.SeedSequence(entropy=self.master_seed, spawn_key=(self.replica, tag))
        return np.random.Generator(np.random.Philox(seq))

    def label(self) -> str:
        return f"{self.master_seed}/{self.replica}/{self.purpose}"


def _as_generator(rng) -> np.random.Generator:
    if isinstance(rng, RngStream):
        return rng.generator()
    if isinstance(rng, np.random.Generator):
        return rng
    raise TypeError(f"expected RngStream or numpy Generator, got {type(rng)!r}")


@dataclass(frozen=True)
class BanditInstance:
    """Arm set, hidden parameter, and reward model.

    ``nu`` is the sub-Poisson parameter of the rewards.  For the
    scaled-Bernoulli model the reward is ``nu * Bernoulli(mean / nu)``, so
    the bound ``B`` of the support equals ``nu``.
    """

    arms: np.ndarray
    theta_star: np.ndarray
    reward_model: str
    nu: float

    def __post_init__(self):
        arms = np.asarray(self.arms, dtype=float)
        theta = np.asarray(self.theta_star, dtype=float)
        object.__setattr__(self, "arms", arms)
        object.__setattr__(self, "theta_star", theta)
        if arms.ndim != 2 or theta.ndim != 1 or arms.shape[1] != theta.shape[0]:
            raise ValueError("arms must be (n, d) and theta_star length d")
        if self.reward_model not in REWARD_MODELS:
            raise ValueError(f"unknown reward model {self.reward_model!r}")
        if self.nu <= 0:
            raise ValueError("nu must be positive")
        means = arms @ theta
        if means.min() < -_MEAN_TOL:
            raise ValueError("all arm means must be nonnegative")
        if self.reward_model == "bernoulli" and means.max() > 1 + _MEAN_TOL:
            raise ModelRangeError("bernoulli means must lie in [0, 1]")
        if self.reward_model == "scaled-bernoulli" and means.max() > self.nu + _MEAN_TOL:
            raise ModelRangeError("scaled-bernoulli means must lie in [0, B] with B = nu")

    @property
    def n_arms(self) -> int:
        return self.arms.shape[0]

    @property
    def dim(self) -> int:
        return self.arms.shape[1]

    @property
    def means(self) -> np.ndarray:
        return self.arms @ self.theta_star

    @property
    def optimal_mean(self) -> float:
        return float(self.means.max())

    @property
    def optimal_arm(self) -> int:
        return int(self.means.argmax())

    def digest(self) -> str:
        payload = self.to_json().encode()
        return hashlib.sha256(payload).hexdigest()[:12]

    def to_json(self) -> str:
        doc = {
            "arms": self.arms.tolist(),
            "theta_star": self.theta_star.tolist(),
            "reward_model": self.reward_model,
            "nu": self.nu,
        }
        return json.dumps(doc)

    @staticmethod
    def from_json(text: str) -> "BanditInstance":
        doc = json.loads(text)
        return BanditInstance(
            arms=np.asarray(doc["arms"], dtype=float),
            theta_star=np.asarray(doc["theta_star"], dtype=float),
            reward_model=doc["reward_model"],
            nu=float(doc["nu"]),
        )


def sample_rewards(instance: BanditInstance, arm_index, rng, size=None) -> np.ndarray:
    """Draw rewards for one arm index or a vector of arm indices.

    With an integer ``arm_index`` and ``size=k`` this returns ``k`` i.i.d.
    rewards of that arm; with an index array (and ``size=None``) it returns
    one reward per entry.  Every model has expectation equal to the arm mean
    and satisfies the stated MGF bound with the instance's ``nu``.
    """
    gen = _as_generator(rng)
    means = np.atleast_1d(instance.means[arm_index])
    if size is not None:
        means = np.broadcast_to(means, (size,) if means.size == 1 else (size, means.size))
    if means.min() < -_MEAN_TOL:
        raise ModelRangeError("negative mean")
    p = np.clip(means, 0.0, None)
    if instance.reward_model == "bernoulli":
        if p.max() > 1 + _MEAN_TOL:
            raise ModelRangeError("bernoulli mean above 1")
        out = gen.binomial(1, np.clip(p, 0.0, 1.0)).astype(float)
    elif instance.reward_model == "poisson":
        out = gen.poisson(p).astype(float)
    else:
        b = instance.nu
        if p.max() > b + _MEAN_TOL:
            raise ModelRangeError("scaled-bernoulli mean above B")
        out = b * gen.binomial(1, np.clip(p / b, 0.0, 1.0)).astype(float)
    return out


def sample_reward(instance: BanditInstance, arm_index: int, rng) -> float:
    return float(sample_rewards(instance, int(arm_index), rng)[0])


def generate_instance(
    d: int,
    n_arms: int,
    max_mean: float,
    model: str = "bernoulli",
    rng=None,
    kind: str = "gaussian",
    scale_bound: float = 1.0,
) -> BanditInstance:
    """Draw a random instance with means in ``[0, max_mean]``.

    The parameter vector and raw arms are i.i.d. standard Gaussian
    (``kind="sphere"`` additionally normalizes each arm to unit length).
    Arms are then shifted along the parameter direction -- the minimal-norm
    shift, which leaves the geometry orthogonal to it untouched -- so the
    smallest mean is exactly 0, and globally rescaled so the largest mean
    equals ``max_mean``.  When all raw means coincide (e.g. a single arm)
    the shift is skipped and the scaling alone pins the common mean to
    ``max_mean``.
    """
    if d < 1 or n_arms < 1:
        raise ValueError("d and n_arms must be >= 1")
    if not (0 < max_mean):
        raise ValueError("max_mean must be positive")
    if model == "bernoulli" and max_mean > 1:
        raise ModelRangeError("bernoulli requires max_mean in (0, 1]")
    if model == "scaled-bernoulli" and max_mean > scale_bound:
        raise ModelRangeError("scaled-bernoulli requires max_mean <= B")
    gen = _as_generator(rng if rng is not None else RngStream(0, 0, "instance"))
    theta = gen.standard_normal(d)
    arms = gen.standard_normal((n_arms, d))
    if kind == "sphere":
        arms /= np.linalg.norm(arms, axis=1, keepdims=True)
    elif kind != "gaussian":
        raise ValueError(f"unknown arm-cloud kind {kind!r}")
    means = arms @ theta
    lo, hi = means.min(), means.max()
    if hi - lo > 0:
        arms = arms - (lo / (theta @ theta)) * theta[None, :]
        arms = arms * (max_mean / (hi - lo))
    else:
        if lo == 0:
            raise ValueError("degenerate instance: all means are zero")
        arms = arms * (max_mean / lo)
    nu = {"bernoulli": 1.0, "poisson": 1.0, "scaled-bernoulli": float(scale_bound)}[model]
    return BanditInstance(arms=arms, theta_star=theta, reward_model=model, nu=nu)


def instance_fields(instance: BanditInstance) -> dict:
    return dataclasses.asdict(instance)
