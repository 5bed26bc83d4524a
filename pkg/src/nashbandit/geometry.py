"""Enclosing-ellipsoid geometry for reward-safe exploration.

The sampling distribution built here has its barycenter at the center of
the minimum-volume ellipsoid enclosing the arm cloud.  The enclosing
(rather than inscribed) ellipsoid is used because its center is produced
directly as a convex combination of the points by the multiplicative
weights iteration, and its 1/d shrinkage about the center lies inside the
convex hull, which is exactly the containment the downstream reward
guarantee needs.

The iteration is the classical Khachiyan scheme on the lifted points
``(x, 1)``, augmented with away/drop steps so that tight tolerances
converge quickly.  Leverages are maintained incrementally (rank-1
updates), with a full refactorization every 50 steps.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

_REFACTOR_EVERY = 50
_RANK_TOL = 1e-9  # times the largest singular value


class DegeneratePointSet(ValueError):
    """Points only span a proper affine subspace."""

    def __init__(self, affine_rank: int, d: int):
        super().__init__(f"points have affine rank {affine_rank} < d = {d}")
        self.affine_rank = affine_rank
        self.d = d


class MveeConvergenceError(RuntimeError):
    pass


class IncompatibleTarget(ValueError):
    """Weighted point sum differs from the stated target beyond tolerance."""


@dataclass(frozen=True)
class Ellipsoid:
    """``{x : (x - c)^T H (x - c) <= 1}`` with H symmetric positive definite."""

    center: np.ndarray
    shape: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.center, dtype=float)
        h = np.asarray(self.shape, dtype=float)
        object.__setattr__(self, "center", c)
        object.__setattr__(self, "shape", h)
        if np.abs(h - h.T).max() > 1e-10 * max(np.abs(h).max(), 1.0):
            raise ValueError("shape matrix must be symmetric")
        if np.linalg.eigvalsh(h).min() <= 0:
            raise ValueError("shape matrix must be positive definite")

    def contains(self, points: np.ndarray, slack: float = 0.0) -> np.ndarray:
        diff = np.atleast_2d(points) - self.center
        q = np.einsum("ij,ij->i", diff @ self.shape, diff)
        return q <= 1.0 + slack


@dataclass(frozen=True)
class CenterDistribution:
    """Convex combination of at most ``affine rank + 1`` arms."""

    atom_indices: np.ndarray
    atom_weights: np.ndarray

    def __post_init__(self):
        idx = np.asarray(self.atom_indices, dtype=int)
        w = np.asarray(self.atom_weights, dtype=float)
        object.__setattr__(self, "atom_indices", idx)
        object.__setattr__(self, "atom_weights", w)
        if idx.shape != w.shape or idx.ndim != 1:
            raise ValueError("indices and weights must be aligned vectors")
        if w.min() < 0 or abs(w.sum() - 1.0) > 1e-12:
            raise ValueError("weights must be convex coefficients")

    def mean_point(self, arms: np.ndarray) -> np.ndarray:
        return self.atom_weights @ np.asarray(arms, dtype=float)[self.atom_indices]


def affine_rank(points: np.ndarray) -> int:
    points = np.asarray(points, dtype=float)
    centered = points - points.mean(axis=0)
    svals = np.linalg.svd(centered, compute_uv=False)
    if svals.size == 0 or svals[0] <= 0:
        return 0
    return int(np.count_nonzero(svals > _RANK_TOL * svals[0]))


def mvee(points: np.ndarray, eps: float = 1e-6, max_iter: int = 500_000):
    """Minimum-volume enclosing ellipsoid of a full-dimensional point set.

    Returns ``(Ellipsoid, weights)`` where the weights are the per-point
    convex coefficients maintained by the iteration; the ellipsoid center
    is their barycenter by construction, and every point satisfies
    ``(x - c)^T H (x - c) <= 1 + eps``.
    """
    points = np.asarray(points, dtype=float)
    if points.ndim != 2:
        raise ValueError("points must be (n, d)")
    n, d = points.shape
    if eps <= 0:
        raise ValueError("eps must be positive")
    r = affine_rank(points)
    if r < d:
        raise DegeneratePointSet(r, d)

    dim = d + 1
    q = np.hstack([points, np.ones((n, 1))])
    u = np.full(n, 1.0 / n)
    lam_inv = _lifted_inverse(q, u)
    lev = np.einsum("ij,ij->i", q @ lam_inv, q)
    # Leverage dim + t*d corresponds to containment slack t; stop a little
    # inside the requested eps so rounding in the shape matrix cannot push
    # the worst point past the contract.
    up_stop = dim + 0.8 * eps * d
    down_stop = dim - 0.8 * eps * d
    stale = 0
    it = 0
    while it < max_iter:
        j_add = int(lev.argmax())
        top = float(lev[j_add])
        lev_sup = np.where(u > 0, lev, np.inf)
        j_away = int(lev_sup.argmin())
        bottom = float(lev[j_away])
        if top <= up_stop and bottom >= down_stop:
            if stale == 0:
                break
            lam_inv = _lifted_inverse(q, u)
            lev = np.einsum("ij,ij->i", q @ lam_inv, q)
            stale = 0
            continue

        if top / dim - 1.0 >= 1.0 - bottom / dim:
            j, lj = j_add, top
            step = (lj / dim - 1.0) / (lj - 1.0)
        else:
            j, lj = j_away, bottom
            drop = -u[j] / max(1.0 - u[j], 1e-300)
            step = max((lj / dim - 1.0) / (lj - 1.0), drop) if lj > 1.0 else drop

        u = u * (1.0 - step)
        u[j] += step
        if u[j] < 1e-18:
            u[j] = 0.0
        u /= u.sum()
        a = lam_inv @ q[j]
        denom = 1.0 + step * (q[j] @ a) / (1.0 - step)
        y = q @ a
        lev = lev / (1.0 - step) - (step / denom) * (y / (1.0 - step)) ** 2
        lam_inv = lam_inv / (1.0 - step) - (step / denom) * np.outer(a, a) / (1.0 - step) ** 2
        it += 1
        stale += 1
        if stale >= _REFACTOR_EVERY:
            lam_inv = _lifted_inverse(q, u)
            lev = np.einsum("ij,ij->i", q @ lam_inv, q)
            stale = 0
    else:
        raise MveeConvergenceError(f"no convergence after {max_iter} iterations")

    center = u @ points
    centered = points - center
    sigma = (centered * u[:, None]).T @ centered
    shape = np.linalg.inv((sigma + sigma.T) / 2.0) / d
    return Ellipsoid(center=center, shape=(shape + shape.T) / 2.0), u


def _lifted_inverse(q, u):
    lam = (q * u[:, None]).T @ q
    return np.linalg.inv((lam + lam.T) / 2.0)


def caratheodory_reduce(points: np.ndarray, weights: np.ndarray, target: np.ndarray) -> CenterDistribution:
    """Reduce a convex combination to at most ``d + 1`` atoms.

    Repeatedly finds an affine dependence among the active atoms and moves
    along it until a weight hits zero; the weighted sum is invariant along
    such directions, so the target is reproduced exactly (to rounding).
    """
    points = np.asarray(points, dtype=float)
    w = np.asarray(weights, dtype=float).copy()
    target = np.asarray(target, dtype=float)
    n, d = points.shape
    scale = max(1.0, float(np.abs(points).max(initial=0.0)))
    if w.min() < -1e-12 or abs(w.sum() - 1.0) > 1e-9:
        raise IncompatibleTarget("weights are not convex coefficients")
    w = np.clip(w, 0.0, None)
    w /= w.sum()
    if np.linalg.norm(w @ points - target) > 1e-8 * scale:
        raise IncompatibleTarget("weighted point sum differs from target")

    # Shedding negligible mass first keeps the dependence searches small;
    # the total discarded mass stays far below the barycenter tolerance.
    order = np.argsort(w)
    cum = np.cumsum(w[order])
    drop = order[cum <= 1e-10]
    w[drop] = 0.0
    w /= w.sum()

    active = np.flatnonzero(w > 0)
    while active.size > d + 1:
        pa = points[active]
        system = np.vstack([pa.T, np.ones(active.size)])
        _, _, vt = np.linalg.svd(system, full_matrices=True)
        v = vt[-1]
        if v.max() <= 0:
            v = -v
        with np.errstate(divide="ignore"):
            ratios = np.where(v > 1e-14, w[active] / np.where(v > 1e-14, v, 1.0), np.inf)
        k = int(ratios.argmin())
        t = float(ratios[k])
        w[active] = np.clip(w[active] - t * v, 0.0, None)
        w[active[k]] = 0.0
        w /= w.sum()
        active = np.flatnonzero(w > 0)

    if np.linalg.norm(w[active] @ points[active] - target) > 1e-8 * scale:
        raise IncompatibleTarget("reduction drifted away from the target")
    return CenterDistribution(atom_indices=active, atom_weights=w[active])


def center_distribution(arms: np.ndarray, eps: float = 1e-6, max_iter: int = 500_000) -> CenterDistribution:
    """Ellipsoid-center sampling distribution over arm indices.

    Composes the enclosing-ellipsoid weights with the convex-combination
    reduction, so the returned distribution has at most ``rank + 1`` atoms
    and its expectation equals the ellipsoid center.  Rank-deficient arm
    clouds are handled inside their affine hull (project, solve, lift).
    """
    arms = np.asarray(arms, dtype=float)
    n, d = arms.shape
    mean = arms.mean(axis=0)
    centered = arms - mean
    uu, svals, vt = np.linalg.svd(centered, full_matrices=False)
    if svals.size and svals[0] > 0:
        r = int(np.count_nonzero(svals > _RANK_TOL * svals[0]))
    else:
        r = 0
    if r == 0:
        return CenterDistribution(atom_indices=np.array([0]), atom_weights=np.array([1.0]))
    if r == d:
        ell, u = mvee(arms, eps=eps, max_iter=max_iter)
        return caratheodory_reduce(arms, u, ell.center)
    basis = vt[:r]
    projected = centered @ basis.T
    ell, u = mvee(projected, eps=eps, max_iter=max_iter)
    return caratheodory_reduce(projected, u, ell.center)
