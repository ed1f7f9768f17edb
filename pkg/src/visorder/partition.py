"""k-means++ seeding followed by Lloyd iterations."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class Clustering:
    centers: np.ndarray
    assignment: np.ndarray
    # objective after seeding, then after every Lloyd round
    history: list[float] = field(default_factory=list)

    @property
    def clusters(self) -> list[np.ndarray]:
        return [np.flatnonzero(self.assignment == j) for j in range(len(self.centers))]

    @property
    def seed_objective(self) -> float:
        return self.history[0]

    @property
    def objective(self) -> float:
        return self.history[-1]


def _sq_dists(points: np.ndarray, centers: np.ndarray) -> np.ndarray:
    diff = points[:, None, :] - centers[None, :, :]
    return np.einsum("ijk,ijk->ij", diff, diff)


def kmeans_objective(points, centers) -> float:
    """Sum over points of the squared distance to the nearest center."""
    p = np.asarray(points, dtype=float)
    c = np.asarray(centers, dtype=float)
    if len(c) == 0:
        raise ValueError("at least one center required")
    if len(p) == 0:
        return 0.0
    return float(_sq_dists(p, c).min(axis=1).sum())


def assign(points: np.ndarray, centers: np.ndarray) -> np.ndarray:
    """Nearest center per point; ties go to the lowest center index."""
    return np.argmin(_sq_dists(points, centers), axis=1)


def seed_centers(points: np.ndarray, m: int, rng: np.random.Generator) -> np.ndarray:
    """D^2 seeding: each new center is a point drawn with probability ~ d_i."""
    k = len(points)
    centers = [points[rng.integers(k)]]
    d = _sq_dists(points, np.array(centers))[:, 0]
    for _ in range(1, m):
        total = d.sum()
        if total <= 0:
            raise ValueError("fewer distinct points than centers")
        i = rng.choice(k, p=d / total)
        centers.append(points[i])
        d = np.minimum(d, _sq_dists(points, points[i:i + 1])[:, 0])
    return np.array(centers)


def kmeans_pp(points, m: int, iters: int = 20, seed: int | np.random.Generator | None = 0,
              check_monotone: bool = True) -> Clustering:
    """Cluster ``points`` into ``m`` groups.

    A cluster left empty by an assignment round gets its center moved to
    the point farthest from its current nearest center.  With
    ``check_monotone`` every Lloyd round is asserted not to increase the
    objective.
    """
    p = np.asarray(points, dtype=float)
    if m < 1:
        raise ValueError("m must be at least 1")
    if m > len(np.unique(p, axis=0)):
        raise ValueError(f"cannot place {m} centers on {len(np.unique(p, axis=0))} distinct points")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    centers = seed_centers(p, m, rng)
    history = [kmeans_objective(p, centers)]
    labels = assign(p, centers)
    for _ in range(iters):
        labels = assign(p, centers)
        for j in range(m):
            if not np.any(labels == j):
                dist = _sq_dists(p, centers).min(axis=1)
                far = int(np.argmax(dist))
                centers[j] = p[far]
                labels = assign(p, centers)
        sums = np.zeros_like(centers)
        np.add.at(sums, labels, p)
        counts = np.bincount(labels, minlength=m)
        nonempty = counts > 0
        centers[nonempty] = sums[nonempty] / counts[nonempty, None]
        obj = kmeans_objective(p, centers)
        if check_monotone and obj > history[-1] * (1 + 1e-12) + 1e-300:
            raise AssertionError(f"Lloyd round increased objective {history[-1]} -> {obj}")
        history.append(obj)
    labels = assign(p, centers)
    return Clustering(centers, labels, history)
