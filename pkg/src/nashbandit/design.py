"""Approximate D-optimal design over a finite arm set by Frank-Wolfe.

The solver maximizes ``log det U(lam)`` with ``U(lam) = sum lam_x x x^T``
over the probability simplex and certifies its answer through the worst-case
leverage ``g(lam) = max_x ||x||^2_{U(lam)^-1}``: the equivalence theorem of
optimal design puts the optimum of ``g`` at exactly ``d``, so the stopping
rule ``g(lam) <= (1 + tol) * d`` is a self-contained certificate.

Steps use the closed-form exact line search for a rank-1 update.  Besides
the classical "add" step toward the worst-covered arm, the iteration may
take the mirrored "away" step that drains mass from an over-weighted
support atom; away steps keep the support compact and retain the same
monotone log-det guarantee, since the line search never moves past the
unconstrained optimum of the (concave) objective along the segment.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

WEIGHT_SUM_TOL = 1e-12
_REFACTOR_EVERY = 50


class RankDeficientArms(ValueError):
    """The arm set does not span R^d."""

    def __init__(self, rank: int, d: int):
        super().__init__(f"arms span a subspace of rank {rank} < d = {d}")
        self.rank = rank
        self.d = d


class SingularDesignError(ValueError):
    """The information matrix of the given weights is numerically singular."""


class DesignConvergenceError(RuntimeError):
    """Iteration budget exhausted before the leverage certificate was met."""

    def __init__(self, g_achieved: float, target: float):
        super().__init__(f"g = {g_achieved:.6g} after budget, target {target:.6g}")
        self.g_achieved = g_achieved
        self.target = target


@dataclass(frozen=True)
class DesignWeights:
    """Probability mass per arm index with an explicit support list."""

    weights: np.ndarray
    support: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        s = np.asarray(self.support, dtype=int)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "support", s)
        if abs(w.sum() - 1.0) > WEIGHT_SUM_TOL:
            raise ValueError(f"weights sum to {w.sum()!r}, not 1")
        positive = np.flatnonzero(w > 0)
        if sorted(positive.tolist()) != sorted(s.tolist()):
            raise ValueError("support must list exactly the strictly positive weights")

    @staticmethod
    def from_weights(weights: np.ndarray) -> "DesignWeights":
        w = np.asarray(weights, dtype=float)
        return DesignWeights(weights=w, support=np.flatnonzero(w > 0))


@dataclass(frozen=True)
class PruneResult:
    weights: DesignWeights
    g: float
    hit_singular: bool = False


def information_matrix(arms: np.ndarray, weights: DesignWeights) -> np.ndarray:
    """``U(lam) = sum_x lam_x x x^T`` (symmetric PSD by construction)."""
    arms = np.asarray(arms, dtype=float)
    w = weights.weights
    if arms.shape[0] != w.shape[0]:
        raise ValueError("weights and arms are indexed incompatibly")
    u = (arms * w[:, None]).T @ arms
    return (u + u.T) / 2.0


def _checked_inverse(u: np.ndarray) -> np.ndarray:
    eig = np.linalg.eigvalsh(u)
    trace = eig.sum()
    if trace <= 0 or eig.min() <= 1e-10 * trace:
        raise SingularDesignError("information matrix is singular after trace scaling")
    return np.linalg.inv(u)


def g_value(arms: np.ndarray, weights: DesignWeights) -> float:
    """Worst-case leverage ``max_x x^T U(lam)^-1 x``.

    Always at least ``d`` for full-dimensional arm sets: the weighted
    average of the leverages equals the trace of the identity.
    """
    arms = np.asarray(arms, dtype=float)
    uinv = _checked_inverse(information_matrix(arms, weights))
    lev = np.einsum("ij,ij->i", arms @ uinv, arms)
    return float(lev.max())


def _greedy_start(arms: np.ndarray) -> np.ndarray:
    """Uniform weights over a 2d-point volumetric starter set.

    First d picks greedily maximize the spanned volume (largest residual
    orthogonal to the span so far); the next d maximize leverage against
    the accumulated outer-product sum.  Raises if the arms do not span.
    """
    n, d = arms.shape
    norms2 = np.einsum("ij,ij->i", arms, arms)
    scale = norms2.max()
    if scale <= 0:
        raise RankDeficientArms(0, d)
    chosen = []
    basis = np.zeros((d, d))
    resid2 = norms2.copy()
    for k in range(d):
        j = int(resid2.argmax())
        if resid2[j] <= 1e-18 * scale:
            raise RankDeficientArms(k, d)
        chosen.append(j)
        v = arms[j] - basis[:k].T @ (basis[:k] @ arms[j])
        basis[k] = v / np.linalg.norm(v)
        proj = arms @ basis[k]
        resid2 = np.maximum(resid2 - proj**2, 0.0)
    u = arms[chosen].T @ arms[chosen]
    for _ in range(d):
        lev = np.einsum("ij,ij->i", arms @ np.linalg.inv(u), arms)
        j = int(lev.argmax())
        chosen.append(j)
        u = u + np.outer(arms[j], arms[j])
    weights = np.zeros(n)
    for j in chosen:
        weights[j] += 1.0 / (2 * d)
    return weights


def solve_d_optimal(
    arms: np.ndarray,
    tol: float = 0.05,
    max_iter: int = 100_000,
    cap: int | None = None,
) -> DesignWeights:
    """Frank-Wolfe solution with ``g(lam) <= (1 + tol) * d``.

    The returned weights are pruned to at most ``d (d + 1) / 2`` atoms
    (the support size the equivalence theorem guarantees an optimum to
    have); if pruning pushes the leverage back above the certificate the
    iteration resumes from the pruned point.
    """
    arms = np.asarray(arms, dtype=float)
    if arms.ndim != 2:
        raise ValueError("arms must be a (n, d) array")
    n, d = arms.shape
    if tol <= 0:
        raise ValueError("tol must be positive")
    if max_iter < 1:
        raise ValueError("max_iter must be >= 1")
    if cap is None:
        cap = d * (d + 1) // 2
    target = (1.0 + tol) * d

    weights = _greedy_start(arms)
    u = information_matrix(arms, DesignWeights.from_weights(weights))
    uinv = np.linalg.inv(u)
    iters_left = max_iter
    for _round in range(6):
        weights, uinv, iters_left, g = _frank_wolfe(arms, weights, uinv, target, iters_left)
        if g > target:
            raise DesignConvergenceError(g, target)
        pruned = prune_support(arms, DesignWeights.from_weights(weights), cap)
        if pruned.g <= target or pruned.hit_singular:
            return pruned.weights
        weights = pruned.weights.weights.copy()
        uinv = _checked_inverse(information_matrix(arms, pruned.weights))
    return DesignWeights.from_weights(weights)


def _refactor(arms, weights):
    u = (arms * weights[:, None]).T @ arms
    return np.linalg.inv((u + u.T) / 2.0)


def _frank_wolfe(arms, weights, uinv, target, max_iter):
    n, d = arms.shape
    g = np.inf
    stale = 0  # rank-1 updates since the last full factorization
    it = 0
    while it < max_iter:
        lev = np.einsum("ij,ij->i", arms @ uinv, arms)
        j_add = int(lev.argmax())
        g = float(lev[j_add])
        if g <= target:
            if stale == 0:
                return weights, uinv, max_iter - it, g
            uinv = _refactor(arms, weights)  # confirm before accepting
            stale = 0
            continue
        gap_add = g / d - 1.0
        lev_sup = np.where(weights > 0, lev, np.inf)
        j_away = int(lev_sup.argmin())
        gap_away = 1.0 - lev[j_away] / d

        if gap_add >= gap_away:
            j, lj = j_add, g
            step = (lj / d - 1.0) / (lj - 1.0)
        else:
            # Away step: optimal while leverage stays above 1, else a full drop.
            j, lj = j_away, float(lev[j_away])
            drop = -weights[j] / max(1.0 - weights[j], 1e-300)
            step = max((lj / d - 1.0) / (lj - 1.0), drop) if lj > 1.0 else drop
        weights = weights * (1.0 - step)
        weights[j] += step
        if weights[j] < 1e-18:  # clip drop-step rounding to an exact zero
            weights[j] = 0.0
        weights /= weights.sum()
        x = arms[j]
        ainv = uinv / (1.0 - step)
        ax = ainv @ x
        denom = 1.0 + step * (x @ ax)
        uinv = ainv - (step / denom) * np.outer(ax, ax)
        it += 1
        stale += 1
        if stale >= _REFACTOR_EVERY:
            uinv = _refactor(arms, weights)
            stale = 0
    uinv = _refactor(arms, weights)
    lev = np.einsum("ij,ij->i", arms @ uinv, arms)
    return weights, uinv, 0, float(lev.max())


def prune_support(arms: np.ndarray, weights: DesignWeights, cap: int) -> PruneResult:
    """Drop negligible atoms, then enforce the support cap.

    Atoms below ``1e-6 / |support|`` are removed and the rest renormalized.
    While the support still exceeds ``cap``, the atom whose (renormalized)
    removal costs the least log-determinant is dropped; if every candidate
    removal would make the information matrix singular the last nonsingular
    iterate is returned with ``hit_singular`` set.
    """
    arms = np.asarray(arms, dtype=float)
    d = arms.shape[1]
    if cap < d:
        raise ValueError(f"cap {cap} < d {d} cannot guarantee a feasible design")
    w = weights.weights.copy()
    support = np.flatnonzero(w > 0)
    thresh = 1e-6 / max(len(support), 1)
    w[w < thresh] = 0.0
    if w.sum() <= 0:
        raise SingularDesignError("all weights below prune threshold")
    w /= w.sum()

    hit_singular = False
    while np.count_nonzero(w) > cap:
        support = np.flatnonzero(w > 0)
        uinv = _checked_inverse((arms[support] * w[support, None]).T @ arms[support])
        lev = np.einsum("ij,ij->i", arms[support] @ uinv, arms[support])
        ws = w[support]
        keep_factor = 1.0 - ws * lev
        feasible = keep_factor > 1e-12
        if not feasible.any():
            hit_singular = True
            break
        # log det of (U - w x x^T) / (1 - w), by the matrix determinant lemma
        delta = np.where(feasible, np.log(np.maximum(keep_factor, 1e-300)) - d * np.log1p(-ws), -np.inf)
        order = np.lexsort((support, ws, -delta))
        w[support[order[0]]] = 0.0
        w /= w.sum()
        w = _reoptimize_restricted(arms, w, d)

    out = DesignWeights.from_weights(w)
    return PruneResult(weights=out, g=g_value(arms, out), hit_singular=hit_singular)


def _reoptimize_restricted(arms, w, d, budget=2000):
    """Rebalance mass over the current support after an atom removal.

    Plain renormalization can push the leverage far off when the removed
    atom shared a direction with a surviving one; a short Frank-Wolfe run
    restricted to the support repairs that at negligible cost.
    """
    support = np.flatnonzero(w > 0)
    if support.size <= 1:
        return w
    sub = arms[support]
    svals = np.linalg.svd(sub, compute_uv=False)
    if svals.size == 0 or svals[0] <= 0 or np.count_nonzero(svals > 1e-12 * svals[0]) < d:
        return w
    uinv = np.linalg.inv((sub * w[support, None]).T @ sub)
    w_sub, _, _, _ = _frank_wolfe(sub, w[support].copy(), uinv, (1.0 + 1e-4) * d, budget)
    out = np.zeros_like(w)
    out[support] = w_sub
    return out / out.sum()
