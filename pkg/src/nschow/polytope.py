"""Finite vertex sets standing in for compact convex sets in R^n."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.cluster.hierarchy import fcluster, linkage
from scipy.optimize import linprog, nnls

__all__ = [
    "BracketPolytope",
    "convex_position",
    "dist_to_hull",
    "hausdorff",
    "cluster_centers",
    "inflate",
]


def _in_hull_of(p: np.ndarray, others: np.ndarray, tol: float) -> bool:
    if len(others) == 0:
        return False
    if len(others) == 1:
        return bool(np.linalg.norm(p - others[0]) <= tol)
    # feasibility: others.T @ lam = p, sum lam = 1, lam >= 0
    a_eq = np.vstack([others.T, np.ones(len(others))])
    b_eq = np.concatenate([p, [1.0]])
    res = linprog(np.zeros(len(others)), A_eq=a_eq, b_eq=b_eq, bounds=(0, None), method="highs")
    if res.status == 0:
        return True
    return dist_to_hull(p, others) <= tol


def convex_position(points, tol: float = 1e-9) -> np.ndarray:
    """Drop points lying in the hull of the remaining ones (within ``tol``)."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if len(pts) == 0:
        return pts
    # merge near-duplicates first so exact copies do not shield each other
    keep: list[np.ndarray] = []
    for p in pts:
        if all(np.linalg.norm(p - q) > tol for q in keep):
            keep.append(p)
    pts = np.array(keep)
    changed = True
    while changed and len(pts) > 1:
        changed = False
        for i in range(len(pts)):
            others = np.delete(pts, i, axis=0)
            if _in_hull_of(pts[i], others, tol):
                pts = others
                changed = True
                break
    return pts


def dist_to_hull(p, vertices) -> float:
    """Euclidean distance from ``p`` to conv(vertices)."""
    p = np.asarray(p, dtype=float)
    v = np.atleast_2d(np.asarray(vertices, dtype=float))
    if len(v) == 1:
        return float(np.linalg.norm(p - v[0]))
    # min |V^T lam - p| s.t. lam >= 0, sum lam = 1, enforced by a heavy row
    w = 1e4 * max(1.0, float(np.abs(v).max()), float(np.abs(p).max()))
    a = np.vstack([v.T, w * np.ones(len(v))])
    b = np.concatenate([p, [w]])
    lam, _ = nnls(a, b, maxiter=50 * len(v) + 100)
    lam = lam / lam.sum() if lam.sum() > 0 else np.full(len(v), 1.0 / len(v))
    return float(np.linalg.norm(v.T @ lam - p))


def hausdorff(a, b) -> float:
    """Hausdorff distance between the convex hulls of two vertex sets."""
    a = np.atleast_2d(np.asarray(a, dtype=float))
    b = np.atleast_2d(np.asarray(b, dtype=float))
    d_ab = max(dist_to_hull(p, b) for p in a)
    d_ba = max(dist_to_hull(q, a) for q in b)
    return max(d_ab, d_ba)


def cluster_centers(values, rel_threshold: float = 0.05, floor: float = 1e-9) -> np.ndarray:
    """Single-linkage clusters of ``values``; returns the componentwise median of each."""
    x = np.atleast_2d(np.asarray(values, dtype=float))
    if len(x) == 1:
        return x.copy()
    spread = float(np.max(np.ptp(x, axis=0)))
    threshold = max(rel_threshold * spread, floor)
    labels = fcluster(linkage(x, method="single"), t=threshold, criterion="distance")
    return np.array([np.median(x[labels == k], axis=0) for k in np.unique(labels)])


def inflate(vertices, eps: float) -> np.ndarray:
    """Vertices of an outer box-inflation of the hull by ``eps`` per coordinate."""
    v = np.atleast_2d(np.asarray(vertices, dtype=float))
    n = v.shape[1]
    offsets = np.array(np.meshgrid(*[[-eps, eps]] * n)).reshape(n, -1).T
    return (v[:, None, :] + offsets[None, :, :]).reshape(-1, n)


@dataclass
class BracketPolytope:
    dim: int
    vertices: np.ndarray
    radius_schedule: tuple[float, ...] = ()
    sample_count: int = 0
    uncertainty: float = 0.0
    discarded: int = 0
    meta: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        self.vertices = np.atleast_2d(np.asarray(self.vertices, dtype=float))
        if self.vertices.size == 0:
            raise ValueError("polytope needs at least one vertex")
        if self.vertices.shape[1] != self.dim:
            raise ValueError(f"vertices have dimension {self.vertices.shape[1]}, expected {self.dim}")

    @classmethod
    def singleton(cls, v) -> "BracketPolytope":
        v = np.asarray(v, dtype=float)
        return cls(v.size, v[None, :])

    @property
    def centroid(self) -> np.ndarray:
        return self.vertices.mean(axis=0)

    @property
    def diameter(self) -> float:
        v = self.vertices
        if len(v) == 1:
            return 0.0
        return float(np.max(np.linalg.norm(v[:, None, :] - v[None, :, :], axis=-1)))

    def distance(self, p) -> float:
        return dist_to_hull(p, self.vertices)

    def scaled(self, s: float) -> "BracketPolytope":
        return BracketPolytope(self.dim, s * self.vertices, self.radius_schedule, self.sample_count, abs(s) * self.uncertainty)

    def negated(self) -> "BracketPolytope":
        return self.scaled(-1.0)

    def to_dict(self) -> dict:
        return {
            "dim": self.dim,
            "vertices": self.vertices.tolist(),
            "radii": list(self.radius_schedule),
            "samples": self.sample_count,
            "uncertainty": self.uncertainty,
            "discarded": self.discarded,
        }
