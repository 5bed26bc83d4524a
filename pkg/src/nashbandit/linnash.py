"""Phased-elimination linear bandit runs with geometric-mean-safe widths.

Control flow shared by both variants:

* Part I pulls a curated schedule mixing draws from the ellipsoid-center
  distribution (keeping every round's expected reward bounded below) with
  round-robin pulls of the optimal-design support (making every arm's
  estimate uniformly accurate), then eliminates once from the full OLS
  estimate.
* Part II runs phases of doubling length.  Each phase solves the design
  on the survivors, pulls each support arm its quota, re-estimates from
  that phase's data only, and eliminates again.

The finite-arm variant eliminates through estimate-dependent confidence
bounds whose width scales like ``sqrt(estimate * nu * d * log(T |X|) / t)``;
the width shrinks with the estimate itself, which is what protects the
geometric mean of the expected rewards.  The variant for very large or
infinite arm sets replaces the per-arm interval test by a single survivor
threshold below the best estimate, with a width free of ``|X|``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import design as design_mod
from . import geometry
from .env import BanditInstance, RngStream, _as_generator, sample_rewards
from .runlog import TAG_DG_OPT, TAG_SAMPLE_U, RunLog, phase_tag

_SPECTRAL_CUTOFF = 1e-10


@dataclass
class OlsState:
    """Unnormalized least-squares accumulators ``V = sum x x^T``, ``s = sum r x``."""

    v: np.ndarray
    s: np.ndarray

    @staticmethod
    def zeros(d: int) -> "OlsState":
        return OlsState(v=np.zeros((d, d)), s=np.zeros(d))


def ols_update(state: OlsState, arm: np.ndarray, reward: float) -> OlsState:
    arm = np.asarray(arm, dtype=float)
    return OlsState(v=state.v + np.outer(arm, arm), s=state.s + reward * arm)


def ols_solve(state: OlsState) -> np.ndarray:
    """Estimate via symmetric eigendecomposition with a relative spectral cutoff."""
    sym = (state.v + state.v.T) / 2.0
    evals, evecs = np.linalg.eigh(sym)
    top = max(float(evals.max(initial=0.0)), 0.0)
    inv = np.where(evals > _SPECTRAL_CUTOFF * top, 1.0 / np.where(evals > 0, evals, 1.0), 0.0)
    return evecs @ (inv * (evecs.T @ state.s))


def horizon_split(horizon: int, d: int, nu: float, n_arms: int, variant: str) -> int:
    """Length of the schedule-driven first part, clamped to ``[d+1, T]``."""
    if variant == "finite":
        raw = 3.0 * math.sqrt(horizon * d * nu * math.log(horizon * n_arms))
    elif variant == "infinite":
        raw = 3.0 * math.sqrt(horizon * d**2.5 * nu * math.log(horizon))
    else:
        raise ValueError(f"unknown variant {variant!r}")
    return min(max(math.ceil(raw), d + 1), horizon)


@dataclass(frozen=True)
class ScheduleEntry:
    round: int
    arm: int
    source: str


def generate_arm_sequence(arms, t_budget, design, center_dist, rng) -> list[ScheduleEntry]:
    """Curate the first-part pull schedule.

    Each iteration flips a fair coin between a draw from the center
    distribution and the next design-support arm in round-robin order.
    A support arm ``z`` is retired once pulled ``ceil(lambda_z * t/3)``
    times; when the pool is empty all remaining iterations fall through
    to center draws.  Only ``rng.random()`` is consumed, one value per
    coin and one per center draw.
    """
    arms = np.asarray(arms, dtype=float)
    n = arms.shape[0]
    if design.weights.shape[0] != n:
        raise ValueError("design is indexed incompatibly with the arms")
    if center_dist.atom_indices.size and center_dist.atom_indices.max() >= n:
        raise ValueError("center distribution indexes outside the arm set")

    pool = [int(z) for z in design.support]
    quota = {z: math.ceil(design.weights[z] * t_budget / 3.0) for z in pool}
    pool = [z for z in pool if quota[z] > 0]
    counts = dict.fromkeys(pool, 0)
    cum = np.cumsum(center_dist.atom_weights)
    entries = []
    pos = 0
    for i in range(1, t_budget + 1):
        take_u = rng.random() < 0.5
        if take_u or not pool:
            k = int(np.searchsorted(cum, rng.random(), side="right"))
            k = min(k, center_dist.atom_indices.size - 1)
            entries.append(ScheduleEntry(round=i, arm=int(center_dist.atom_indices[k]), source=TAG_SAMPLE_U))
        else:
            z = pool[pos]
            counts[z] += 1
            entries.append(ScheduleEntry(round=i, arm=z, source=TAG_DG_OPT))
            if counts[z] >= quota[z]:
                pool.pop(pos)
                pos = pos % len(pool) if pool else 0
            else:
                pos = (pos + 1) % len(pool)
    return entries


def nash_bounds(est, nu: float, d: int, log_term: float, t: float):
    """Lower/upper confidence bounds with estimate-dependent width.

    The radicand clamps negative estimates at zero: the width is then
    zero and both bounds collapse onto the estimate.
    """
    est = np.asarray(est, dtype=float)
    width = 6.0 * np.sqrt(np.clip(est, 0.0, None) * nu * d * log_term / t)
    return est - width, est + width


def eliminate_finite(surviving, estimates, nu: float, d: int, log_term: float, t: float):
    """Keep arms whose upper bound reaches the best lower bound.

    The lower-bound maximum ranges over the arms whose estimates are
    supplied (the currently estimable set).  The result is never empty:
    if the rule would discard everything, the best-estimate arm stays.
    """
    surviving = np.asarray(surviving, dtype=int)
    estimates = np.asarray(estimates, dtype=float)
    lncb, uncb = nash_bounds(estimates, nu, d, log_term, t)
    keep = uncb >= lncb.max()
    if not keep.any():
        keep = np.zeros_like(keep)
        keep[int(estimates.argmax())] = True
    return surviving[keep]


def _eliminate_infinite(surviving, est_surviving, gamma: float, nu: float,
                        d: int, log_t: float, t: float, part_one: bool):
    """Survivor rule keyed to the best estimate over the whole arm set."""
    surviving = np.asarray(surviving, dtype=int)
    est_surviving = np.asarray(est_surviving, dtype=float)
    factor = 3.0 if part_one else 1.0
    width = 16.0 * math.sqrt(factor * max(gamma, 0.0) * d**2.5 * nu * log_t / t)
    keep = est_surviving >= gamma - width
    if not keep.any():
        keep = np.zeros_like(keep)
        keep[int(est_surviving.argmax())] = True
    return surviving[keep]


def _subset_design(arms, indices, tol, max_iter):
    """Design over a subset, worked inside its span when rank-deficient."""
    sub = arms[indices]
    svals = np.linalg.svd(sub, compute_uv=False)
    rank = int(np.count_nonzero(svals > 1e-9 * svals[0])) if svals.size and svals[0] > 0 else 0
    if rank == 0:
        raise design_mod.RankDeficientArms(0, arms.shape[1])
    if rank < arms.shape[1]:
        _, _, vt = np.linalg.svd(sub, full_matrices=False)
        sub = sub @ vt[:rank].T
    return design_mod.solve_d_optimal(sub, tol=tol, max_iter=max_iter)


class _Recorder:
    """Collects per-round records and enforces exact round accounting."""

    def __init__(self, instance, horizon):
        self.means = instance.means
        self.horizon = horizon
        self.arm = np.empty(horizon, dtype=int)
        self.true_mean = np.empty(horizon)
        self.reward = np.empty(horizon)
        self.tags = [""] * horizon
        self.used = 0

    @property
    def remaining(self) -> int:
        return self.horizon - self.used

    def record(self, arm_indices, rewards, tags):
        k = len(arm_indices)
        sl = slice(self.used, self.used + k)
        self.arm[sl] = arm_indices
        self.true_mean[sl] = self.means[arm_indices]
        self.reward[sl] = rewards
        if isinstance(tags, str):
            self.tags[sl] = [tags] * k
        else:
            self.tags[sl] = list(tags)
        self.used += k


def _run(instance, horizon, rng, variant, design_tol, mvee_eps, design_max_iter):
    d, n = instance.dim, instance.n_arms
    if horizon < d + 1:
        raise ValueError(f"horizon {horizon} is infeasible for d = {d} (need >= d + 1)")
    lineage = rng.label() if isinstance(rng, RngStream) else "adhoc"
    gen = _as_generator(rng)
    nu = instance.nu
    log_term = math.log(horizon * n) if variant == "finite" else math.log(horizon)

    rec = _Recorder(instance, horizon)
    t_tilde = horizon_split(horizon, d, nu, n, variant)

    dsn = _subset_design(instance.arms, np.arange(n), design_tol, design_max_iter)
    center = geometry.center_distribution(instance.arms, eps=mvee_eps)
    schedule = generate_arm_sequence(instance.arms, t_tilde, dsn, center, gen)
    seq = np.array([e.arm for e in schedule], dtype=int)
    rewards = sample_rewards(instance, seq, gen)
    rec.record(seq, rewards, [e.source for e in schedule])

    pulled = instance.arms[seq]
    state = OlsState(v=pulled.T @ pulled, s=rewards @ pulled)
    theta = ols_solve(state)
    est_all = instance.arms @ theta
    surviving = np.arange(n)
    if variant == "finite":
        surviving = eliminate_finite(surviving, est_all, nu, d, log_term, t_tilde / 3.0)
    else:
        gamma = float(est_all.max())
        surviving = _eliminate_infinite(surviving, est_all, gamma, nu, d, log_term,
                                        t_tilde, part_one=True)

    t_prime = 2.0 * t_tilde / 3.0
    ell = 1
    while rec.remaining > 0:
        sub_design = _subset_design(instance.arms, surviving, design_tol, design_max_iter)
        state = OlsState.zeros(d)
        planned = 0
        pulls_made = 0
        for pos in sub_design.support:
            arm_idx = int(surviving[pos])
            n_planned = math.ceil(sub_design.weights[pos] * t_prime)
            planned += n_planned
            n_act = min(n_planned, rec.remaining)
            if n_act == 0:
                continue
            x = instance.arms[arm_idx]
            rw = sample_rewards(instance, arm_idx, gen, size=n_act)
            state.v += n_act * np.outer(x, x)
            state.s += rw.sum() * x
            rec.record(np.full(n_act, arm_idx), rw, phase_tag(ell))
            pulls_made += n_act
        truncated = pulls_made < planned
        if truncated and pulls_made < d:
            break  # too few pulls for a phase estimate; keep the previous one
        theta = ols_solve(state)
        # Widths use the phase parameter; a horizon-truncated phase only has
        # its actual pull count's worth of data.
        t_eff = float(pulls_made) if truncated else t_prime
        est_sur = instance.arms[surviving] @ theta
        if variant == "finite":
            surviving = eliminate_finite(surviving, est_sur, nu, d, log_term, t_eff)
        else:
            gamma = float((instance.arms @ theta).max())
            surviving = _eliminate_infinite(surviving, est_sur, gamma, nu, d, log_term,
                                            t_eff, part_one=False)
        t_prime *= 2.0
        ell += 1

    algo = f"linnash-{variant}"
    return RunLog(
        run_id=f"{algo}:{lineage}",
        algo=algo,
        seed_lineage=lineage,
        instance_digest=instance.digest(),
        optimal_mean=instance.optimal_mean,
        arm_index=rec.arm,
        true_mean=rec.true_mean,
        reward=rec.reward,
        phase=rec.tags,
        surviving=tuple(int(i) for i in surviving),
    )


def run_linnash_finite(instance: BanditInstance, horizon: int, rng, *,
                       design_tol: float = 0.05, mvee_eps: float = 1e-3,
                       design_max_iter: int = 100_000) -> RunLog:
    return _run(instance, horizon, rng, "finite", design_tol, mvee_eps, design_max_iter)


def run_linnash_infinite(instance: BanditInstance, horizon: int, rng, *,
                         design_tol: float = 0.05, mvee_eps: float = 1e-3,
                         design_max_iter: int = 100_000) -> RunLog:
    return _run(instance, horizon, rng, "infinite", design_tol, mvee_eps, design_max_iter)
