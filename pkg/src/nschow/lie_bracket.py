"""Classical and set-valued iterated Lie brackets of vector fields.

The set-valued estimate perturbs each basic sub-bracket by its own random
shift, evaluates the classical recursion on the shifted fields, and takes the
convex hull of the limit values seen at the finest sampling radii.
"""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .brackets import (
    BoundBracket,
    FormalBracket,
    Leaf,
    Node,
    as_bound,
    basic_sub_brackets,
    required_regularity,
)
from .fields import DomainError, VectorField, VectorFieldSystem
from .polytope import BracketPolytope, cluster_centers, convex_position, dist_to_hull, hausdorff

__all__ = [
    "SamplingConfig",
    "InsufficientSamples",
    "RegularityWarning",
    "classical_bracket",
    "shifted_bracket_value",
    "set_valued_bracket",
    "clarke_jacobian_estimate",
    "clarke_bracket_formula",
    "check_antisymmetry",
    "numeric_depth",
]

_EPS = np.finfo(float).eps


class InsufficientSamples(RuntimeError):
    pass


class RegularityWarning(UserWarning):
    pass


def _default_radii() -> tuple[float, ...]:
    return tuple(0.1 * 4.0**-k for k in range(7))


@dataclass(frozen=True)
class SamplingConfig:
    radii: tuple[float, ...] = field(default_factory=_default_radii)
    samples_per_radius: int = 200
    seed: int = 0
    step_factor: float = 0.1  # difference step = step_factor * radius
    stable_rel: float = 0.05
    stable_abs: float = 1e-8
    cluster_rel: float = 0.05
    hull_tol: float = 1e-9
    workers: int = 1

    def __post_init__(self) -> None:
        radii = tuple(float(r) for r in self.radii)
        if not radii or any(r <= 0 for r in radii):
            raise ValueError("radii must be positive")
        if any(a <= b for a, b in zip(radii, radii[1:])):
            raise ValueError("radii must be strictly decreasing")
        if self.samples_per_radius < 1:
            raise ValueError("samples_per_radius must be >= 1")
        if self.step_factor <= 0:
            raise ValueError("step_factor must be positive")
        object.__setattr__(self, "radii", radii)


# --- recursive evaluation ----------------------------------------------------------


def numeric_depth(b: FormalBracket, system: VectorFieldSystem | None = None, bound: BoundBracket | None = None) -> int:
    """Largest number of nested finite-difference derivatives the recursion takes."""

    def leaf_numeric(s: Leaf) -> int:
        if system is None or bound is None:
            return 0
        return 0 if system.field(bound.field_of(s.index)).has_jacobian else 1

    def nd(s: FormalBracket) -> int:
        if isinstance(s, Leaf):
            return 0
        return max(d_of(s.left), d_of(s.right))

    def d_of(s: FormalBracket) -> int:
        # depth spent when differentiating s
        if isinstance(s, Leaf):
            return leaf_numeric(s)
        return nd(s) + 1

    return nd(b)


class _Evaluator:
    """Evaluate ``B(g^h)(y)`` on plain tuples.

    ``shifts`` maps each leaf index to its perturbation; ``step`` is the
    finite-difference step for derivatives of intermediate brackets.
    """

    def __init__(self, bound: BoundBracket, system: VectorFieldSystem, shifts: dict[int, tuple[float, ...]], step: float):
        self.bound = bound
        self.system = system
        self.shifts = shifts
        self.step = step
        self.n = system.dim

    def _leaf_point(self, s: Leaf, y):
        h = self.shifts.get(s.index)
        if h is None:
            return y
        return tuple(a + b for a, b in zip(y, h))

    def value(self, s: FormalBracket, y) -> tuple[float, ...]:
        if isinstance(s, Leaf):
            f = self.system.field(self.bound.field_of(s.index))
            return f.fast(self._leaf_point(s, y))
        v1 = self.value(s.left, y)
        v2 = self.value(s.right, y)
        a = self.deriv(s.right, y, v1)
        b = self.deriv(s.left, y, v2)
        return tuple(p - q for p, q in zip(a, b))

    def deriv(self, s: FormalBracket, y, v) -> tuple[float, ...]:
        """Directional derivative D s(y) . v."""
        if isinstance(s, Leaf):
            f = self.system.field(self.bound.field_of(s.index))
            if f.has_jacobian:
                return f.jvp(self._leaf_point(s, y), v)
        norm = math.sqrt(sum(c * c for c in v))
        if norm == 0.0:
            return (0.0,) * self.n
        h = self.step
        u = tuple(c / norm for c in v)
        yp = tuple(a + h * c for a, c in zip(y, u))
        ym = tuple(a - h * c for a, c in zip(y, u))
        fp = self.value(s, yp)
        fm = self.value(s, ym)
        k = norm / (2.0 * h)
        return tuple((p - q) * k for p, q in zip(fp, fm))


def _check_regularity(bound: BoundBracket, system: VectorFieldSystem) -> None:
    b = bound.bracket
    if isinstance(b, Leaf):
        return
    for j, need in required_regularity(b).items():
        have = system.field(bound.field_of(j)).regularity
        if have < need:
            warnings.warn(
                f"variable X{j} of {b} needs {need}, field g{bound.field_of(j)} is declared {have}",
                RegularityWarning,
                stacklevel=3,
            )


def _validate(bound: BoundBracket, system: VectorFieldSystem, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape != (system.dim,):
        raise ValueError(f"point has shape {x.shape}, expected ({system.dim},)")
    for f in bound.fields:
        system.field(f)
    return x


def classical_bracket(b, system: VectorFieldSystem, x, step: float | None = None) -> np.ndarray:
    """Classical iterated bracket ``B(g)(x)``; ``b`` may be bound or formal."""
    bound = as_bound(b)
    x = _validate(bound, system, x)
    _check_regularity(bound, system)
    if step is None:
        nd = numeric_depth(bound.bracket, system, bound)
        scale = max(1.0, float(np.abs(x).max()))
        step = scale * _EPS ** (1.0 / (nd + 3))
    ev = _Evaluator(bound, system, {}, step)
    return np.array(ev.value(bound.bracket, tuple(float(c) for c in x)))


def shifted_bracket_value(bound: BoundBracket, system: VectorFieldSystem, x, shifts: Sequence, step: float) -> np.ndarray:
    """``B(g^h)(x)`` where ``shifts[i]`` perturbs every variable of the i-th basic sub-bracket."""
    basics = basic_sub_brackets(bound.bracket)
    if len(shifts) != len(basics):
        raise ValueError(f"expected {len(basics)} shifts, got {len(shifts)}")
    leaf_shift: dict[int, tuple[float, ...]] = {}
    for (_, s), h in zip(basics, shifts):
        for j in s.seq:
            leaf_shift[j] = tuple(float(c) for c in h)
    ev = _Evaluator(bound, system, leaf_shift, step)
    return np.array(ev.value(bound.bracket, tuple(float(c) for c in x)))


def _ball(rng: np.random.Generator, n: int, radius: float, count: int) -> np.ndarray:
    d = rng.standard_normal((count, n))
    d /= np.linalg.norm(d, axis=1, keepdims=True)
    r = radius * rng.random(count) ** (1.0 / n)
    return d * r[:, None]


def _stable(v: np.ndarray, w: np.ndarray, rel: float, absolute: float) -> bool:
    if not (np.all(np.isfinite(v)) and np.all(np.isfinite(w))):
        return False
    diff = float(np.linalg.norm(v - w))
    if diff < absolute:
        return True
    scale = max(float(np.linalg.norm(v)), float(np.linalg.norm(w)))
    return diff < rel * scale


def _sample_radius(args) -> tuple[np.ndarray, int]:
    bound, system, x, radius, cfg, seed_seq, needs_check = args
    rng = np.random.default_rng(seed_seq)
    d = len(basic_sub_brackets(bound.bracket))
    n = system.dim
    draws = _ball(rng, n, radius, cfg.samples_per_radius * d).reshape(cfg.samples_per_radius, d, n)
    step = cfg.step_factor * radius
    kept = []
    discarded = 0
    for shifts in draws:
        try:
            v = shifted_bracket_value(bound, system, x, shifts, step)
            if needs_check:
                w = shifted_bracket_value(bound, system, x, shifts, step / 2)
                if not _stable(v, w, cfg.stable_rel, cfg.stable_abs):
                    discarded += 1
                    continue
            elif not np.all(np.isfinite(v)):
                discarded += 1
                continue
        except (DomainError, OverflowError):
            discarded += 1
            continue
        kept.append(v)
    return np.array(kept).reshape(-1, n), discarded


def _hull_of_values(values: np.ndarray, cfg: SamplingConfig) -> np.ndarray:
    means = cluster_centers(values, cfg.cluster_rel)
    return convex_position(means, cfg.hull_tol)


def set_valued_bracket(b, system: VectorFieldSystem, x, cfg: SamplingConfig | None = None) -> BracketPolytope:
    """Estimate ``B_set(g)(x)`` as a polytope.

    ``meta["per_radius"]`` holds the hull vertices obtained from each radius
    alone; ``uncertainty`` is the Hausdorff distance between the hulls of the
    two finest radii.
    """
    cfg = cfg or SamplingConfig()
    bound = as_bound(b)
    x = _validate(bound, system, x)
    if isinstance(bound.bracket, Leaf):
        v = system.field(bound.fields[0])(x)
        return BracketPolytope(system.dim, v[None, :], cfg.radii, 1)
    _check_regularity(bound, system)

    needs_check = numeric_depth(bound.bracket, system, bound) > 0
    seeds = np.random.SeedSequence(cfg.seed).spawn(len(cfg.radii))
    tasks = [(bound, system, x, r, cfg, s, needs_check) for r, s in zip(cfg.radii, seeds)]
    if cfg.workers > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            results = list(pool.map(_sample_radius, tasks))
    else:
        results = [_sample_radius(t) for t in tasks]

    discarded = sum(r[1] for r in results)
    per_radius = [vals for vals, _ in results]
    finest = per_radius[-1]
    if len(finest) == 0:
        raise InsufficientSamples(f"every sample at radius {cfg.radii[-1]:g} was discarded as unstable")
    pooled = np.vstack(per_radius[-2:]) if len(per_radius) > 1 else finest
    vertices = _hull_of_values(pooled, cfg)

    hulls = [(_hull_of_values(v, cfg) if len(v) else None) for v in per_radius]
    uncertainty = 0.0
    if len(hulls) > 1 and hulls[-2] is not None:
        uncertainty = hausdorff(hulls[-1], hulls[-2])
    poly = BracketPolytope(
        system.dim,
        vertices,
        cfg.radii,
        int(sum(len(v) for v in per_radius)),
        uncertainty=uncertainty,
        discarded=discarded,
    )
    poly.meta["per_radius"] = [h.tolist() if h is not None else [] for h in hulls]
    return poly


# --- Clarke Jacobian ------------------------------------------------------------------


def clarke_jacobian_estimate(f: VectorField, x, cfg: SamplingConfig | None = None) -> list[np.ndarray]:
    """Vertices of the hull of limiting Jacobians of ``f`` near ``x``."""
    cfg = cfg or SamplingConfig()
    x = np.asarray(x, dtype=float)
    n = f.dim
    if f.regularity.order == 0 and not f.regularity.lipschitz:
        warnings.warn("Clarke Jacobian needs a locally Lipschitz field", RegularityWarning, stacklevel=2)
    rng = np.random.default_rng(cfg.seed)
    per_radius = []
    for radius in cfg.radii[-2:] if len(cfg.radii) > 1 else cfg.radii:
        pts = x + _ball(rng, n, radius, cfg.samples_per_radius)
        step = cfg.step_factor * radius
        kept = []
        for p in pts:
            try:
                if f.has_jacobian:
                    jac = f.jacobian(p)
                    ok = np.all(np.isfinite(jac))
                else:
                    jac = _fd_jacobian(f, p, step)
                    ok = _stable(jac.ravel(), _fd_jacobian(f, p, step / 2).ravel(), cfg.stable_rel, cfg.stable_abs)
            except DomainError:
                continue
            if ok:
                kept.append(jac.ravel())
        per_radius.append(np.array(kept).reshape(-1, n * n))
    pooled = np.vstack(per_radius)
    if len(pooled) == 0:
        raise InsufficientSamples("no usable Jacobian samples")
    verts = _hull_of_values(pooled, cfg)
    return [v.reshape(n, n) for v in verts]


def _fd_jacobian(f: VectorField, x: np.ndarray, h: float) -> np.ndarray:
    cols = []
    for k in range(f.dim):
        e = np.zeros(f.dim)
        e[k] = h
        cols.append((f(x + e) - f(x - e)) / (2 * h))
    return np.column_stack(cols)


def clarke_bracket_formula(g1: VectorField, g2: VectorField, x, cfg: SamplingConfig | None = None) -> BracketPolytope:
    """Hull of ``L2 g1(x) - L1 g2(x)`` over Clarke Jacobian vertices ``L1, L2``."""
    cfg = cfg or SamplingConfig()
    x = np.asarray(x, dtype=float)
    j1 = clarke_jacobian_estimate(g1, x, cfg)
    j2 = clarke_jacobian_estimate(g2, x, cfg)
    v1, v2 = g1(x), g2(x)
    pts = np.array([l2 @ v1 - l1 @ v2 for l1 in j1 for l2 in j2])
    return BracketPolytope(g1.dim, convex_position(cluster_centers(pts, cfg.cluster_rel), cfg.hull_tol), cfg.radii)


def check_antisymmetry(g1: VectorField, g2: VectorField, x, cfg: SamplingConfig | None = None) -> dict:
    """Compare ``[g1,g2]_set(x)`` with ``-[g2,g1]_set(x)``."""
    cfg = cfg or SamplingConfig()
    system = VectorFieldSystem(g1.dim, (g1, g2), "pair")
    pair = BoundBracket(Node(Leaf(1), Leaf(2)), ((1, 1), (2, 2)))
    swapped = BoundBracket(Node(Leaf(1), Leaf(2)), ((1, 2), (2, 1)))
    p12 = set_valued_bracket(pair, system, x, cfg)
    p21 = set_valued_bracket(swapped, system, x, replace(cfg, seed=cfg.seed + 1))
    dist = hausdorff(p12.vertices, p21.negated().vertices)
    return {
        "point": np.asarray(x, dtype=float).tolist(),
        "forward": p12.vertices.tolist(),
        "backward": p21.vertices.tolist(),
        "hausdorff": dist,
    }


def point_in_polytope(p, poly: BracketPolytope, tol: float) -> bool:
    return dist_to_hull(p, poly.vertices) <= tol
