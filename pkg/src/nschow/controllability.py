"""Certification of the bracket-generating condition, steering, and time bounds."""

from __future__ import annotations

import itertools
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np
from scipy import optimize, stats

from .brackets import BoundBracket, as_bound
from .fields import VectorFieldSystem
from .flow import FlowConfig, FlowError
from .lie_bracket import SamplingConfig, set_valued_bracket
from .multiflow import ControlWord, SteeringParams, control_word, replay, sigma, steering_map
from .polytope import BracketPolytope

__all__ = [
    "ArityError",
    "UniquenessHypothesisError",
    "CertificateMissing",
    "TooFewConverged",
    "TargetTooFar",
    "CertifyConfig",
    "SteerConfig",
    "Certificate",
    "SteeringResult",
    "HolderFit",
    "min_singular_over_selections",
    "certify_bracket_generating",
    "damped_pseudoinverse_solve",
    "steer",
    "fit_holder_exponent",
    "reachable_cloud",
    "verify_gdq_inequality",
]


class ArityError(ValueError):
    pass


class UniquenessHypothesisError(ValueError):
    """A field is not declared locally Lipschitz, so flows may be non-unique."""


class CertificateMissing(RuntimeError):
    pass


class TooFewConverged(RuntimeError):
    pass


class TargetTooFar(ValueError):
    pass


@dataclass(frozen=True)
class CertifyConfig:
    sigma_min_rel: float = 1e-6  # threshold relative to the largest column norm
    max_enumerated: int = 100_000
    starts: int = 50
    seed: int = 0


@dataclass(frozen=True)
class SteerConfig:
    tol: float = 1e-5
    max_iter: int = 200
    lam_floor: float = 1.0 / 64
    max_target_distance: float = 1.0
    workers: int = 1


# --- certification ----------------------------------------------------------------------


def _sigma_n(mats: np.ndarray) -> np.ndarray:
    return np.linalg.svd(mats, compute_uv=False)[..., -1]


def min_singular_over_selections(vertex_sets: Sequence[np.ndarray], cfg: CertifyConfig = CertifyConfig()) -> dict:
    """Smallest ``sigma_n([v_1 ... v_l])`` over selections ``v_j`` from each hull.

    Vertex selections are enumerated when there are at most
    ``cfg.max_enumerated`` of them; a multi-start search over barycentric
    coordinates always runs as well, since the minimum may be interior.
    """
    sets = [np.atleast_2d(np.asarray(v, dtype=float)) for v in vertex_sets]
    counts = [len(v) for v in sets]
    total = math.prod(counts)
    best = math.inf
    best_sel: list = []
    enumerated = total <= cfg.max_enumerated
    if enumerated:
        combos = itertools.product(*[range(c) for c in counts])
        while True:
            chunk = list(itertools.islice(combos, 10_000))
            if not chunk:
                break
            idx = np.array(chunk)
            mats = np.stack([sets[j][idx[:, j]] for j in range(len(sets))], axis=2)
            vals = _sigma_n(mats)
            k = int(np.argmin(vals))
            if vals[k] < best:
                best = float(vals[k])
                best_sel = [sets[j][idx[k, j]].tolist() for j in range(len(sets))]

    free = [j for j, c in enumerate(counts) if c > 1]
    starts_run = 0
    if free:
        sizes = [counts[j] for j in free]
        offsets = np.cumsum([0] + sizes)

        def columns(z: np.ndarray) -> np.ndarray:
            cols = [v[0] for v in sets]
            for i, j in enumerate(free):
                w = np.exp(z[offsets[i]:offsets[i + 1]] - z[offsets[i]:offsets[i + 1]].max())
                cols[j] = (w / w.sum()) @ sets[j]
            return np.column_stack(cols)

        def objective(z: np.ndarray) -> float:
            return float(_sigma_n(columns(z)))

        rng = np.random.default_rng(cfg.seed)
        starts = [np.zeros(offsets[-1])]  # centroid selection
        starts += [rng.normal(scale=3.0, size=offsets[-1]) for _ in range(cfg.starts - 1)]
        for z0 in starts:
            res = optimize.minimize(objective, z0, method="Nelder-Mead", options={"xatol": 1e-10, "fatol": 1e-14, "maxiter": 4000})
            starts_run += 1
            if res.fun < best:
                best = float(res.fun)
                best_sel = columns(res.x).T.tolist()
    elif not enumerated:
        best = float(_sigma_n(np.column_stack([v[0] for v in sets])))
        best_sel = [v[0].tolist() for v in sets]
    return {
        "min_sigma": best,
        "selection": best_sel,
        "vertex_selections": total,
        "enumerated": enumerated,
        "starts": starts_run,
    }


@dataclass
class Certificate:
    brackets: tuple[BoundBracket, ...]
    point: np.ndarray
    polytopes: list[BracketPolytope]
    min_sigma: float
    beta: float
    sigma_min: float
    status: str  # Certified | Inconclusive | Failed
    report: dict = field(default_factory=dict)

    @property
    def margin(self) -> float:
        return self.min_sigma - self.beta - self.sigma_min

    @property
    def certified(self) -> bool:
        return self.status == "Certified"

    def centroid_matrix(self) -> np.ndarray:
        return np.column_stack([p.centroid for p in self.polytopes])

    def to_dict(self) -> dict:
        return {
            "brackets": [b.field_text() for b in self.brackets],
            "point": self.point.tolist(),
            "polytopes": [p.to_dict() for p in self.polytopes],
            "min_sigma": self.min_sigma,
            "beta": self.beta,
            "sigma_min": self.sigma_min,
            "margin": self.margin,
            "status": self.status,
            "selection_report": self.report,
        }


def _require_uh(brackets: Sequence[BoundBracket], system: VectorFieldSystem) -> None:
    for b in brackets:
        for j in b.fields:
            reg = system.field(j).regularity
            if reg.order == 0 and not reg.lipschitz:
                raise UniquenessHypothesisError(
                    f"field g{j} is declared C0; flows need unique Cauchy solutions (locally Lipschitz fields)"
                )


def certify_bracket_generating(
    brackets: Sequence,
    system: VectorFieldSystem,
    x,
    sampling: SamplingConfig | None = None,
    cfg: CertifyConfig = CertifyConfig(),
) -> Certificate:
    sampling = sampling or SamplingConfig()
    bounds = tuple(as_bound(b) for b in brackets)
    x = np.asarray(x, dtype=float)
    n = system.dim
    if len(bounds) < n:
        raise ArityError(f"{len(bounds)} brackets cannot span R^{n}")
    _require_uh(bounds, system)
    polys = [set_valued_bracket(b, system, x, replace(sampling, seed=sampling.seed + i)) for i, b in enumerate(bounds)]
    sel = min_singular_over_selections([p.vertices for p in polys], cfg)
    scale = max(float(np.linalg.norm(p.vertices, axis=1).max()) for p in polys)
    sigma_min = cfg.sigma_min_rel * max(scale, 1e-300)
    # sigma_n is 1-Lipschitz in the Frobenius norm of the matrix
    beta = math.sqrt(sum(p.uncertainty**2 for p in polys))
    m = sel["min_sigma"]
    if m - beta > sigma_min:
        status = "Certified"
    elif m <= max(beta, sigma_min):
        status = "Failed"
    else:
        status = "Inconclusive"
    return Certificate(bounds, x, polys, m, beta, sigma_min, status, sel)


# --- steering ---------------------------------------------------------------------------


def right_inverse(a: np.ndarray) -> np.ndarray:
    """Moore-Penrose right inverse ``A^T (A A^T)^-1`` of a surjective matrix."""
    return a.T @ np.linalg.inv(a @ a.T)


@dataclass
class SolveResult:
    t: np.ndarray
    residual: float
    iterations: int
    converged: bool
    history: list[float]


def damped_pseudoinverse_solve(
    fn: Callable[[np.ndarray], np.ndarray],
    a: np.ndarray,
    y: np.ndarray,
    tol: float,
    max_iter: int = 200,
    lam_floor: float = 1.0 / 64,
    t0: np.ndarray | None = None,
) -> SolveResult:
    """Solve ``fn(t) = y`` by ``t <- t + lam A^# (y - fn(t))``.

    ``lam`` starts at 1, halves when the residual grows (down to
    ``lam_floor``, where the step is taken regardless) and resets on success.
    """
    pinv = right_inverse(a)
    t = np.zeros(a.shape[1]) if t0 is None else np.asarray(t0, dtype=float).copy()
    r = y - fn(t)
    res = float(np.linalg.norm(r))
    history = [res]
    lam = 1.0
    it = 0
    while res > tol and it < max_iter:
        it += 1
        cand = t + lam * (pinv @ r)
        r_c = y - fn(cand)
        res_c = float(np.linalg.norm(r_c))
        if res_c < res or lam <= lam_floor:
            t, r, res = cand, r_c, res_c
            lam = 1.0 if res_c < history[-1] else lam
            history.append(res)
        else:
            lam = max(lam / 2, lam_floor)
    return SolveResult(t, res, it, res <= tol, history)


@dataclass
class SteeringResult:
    target: np.ndarray
    t: np.ndarray
    word: ControlWord
    tau: float
    terminal: np.ndarray
    error_norm: float
    iterations: int
    converged: bool
    replay_error: float

    def to_dict(self) -> dict:
        return {
            "target": self.target.tolist(),
            "t": self.t.tolist(),
            "word": self.word.to_dict(),
            "tau": self.tau,
            "terminal": self.terminal.tolist(),
            "error_norm": self.error_norm,
            "iterations": self.iterations,
            "converged": self.converged,
            "replay_error": self.replay_error,
        }


def steer(
    certificate: Certificate | None,
    system: VectorFieldSystem,
    target,
    cfg: SteerConfig = SteerConfig(),
    flow_cfg: FlowConfig | None = None,
) -> SteeringResult:
    """Steer from the certificate's base point to ``target``.

    Uses the centroid of each bracket polytope as the linearization.  A
    non-converged run still returns its best iterate with ``converged=False``.
    """
    if certificate is None or not certificate.certified:
        status = "none" if certificate is None else certificate.status
        raise CertificateMissing(f"steering needs a Certified certificate (got {status})")
    flow_cfg = flow_cfg or FlowConfig()
    x0 = certificate.point
    target = np.asarray(target, dtype=float)
    if target.shape != x0.shape:
        raise ValueError(f"target has shape {target.shape}, expected {x0.shape}")
    if np.linalg.norm(target - x0) > cfg.max_target_distance:
        raise TargetTooFar(f"target is farther than {cfg.max_target_distance:g} from the base point")
    brackets = certificate.brackets

    def fn(t: np.ndarray) -> np.ndarray:
        return steering_map(SteeringParams(brackets, tuple(t)), system, x0, flow_cfg) - x0

    sol = damped_pseudoinverse_solve(fn, certificate.centroid_matrix(), target - x0, cfg.tol, cfg.max_iter, cfg.lam_floor)
    params = SteeringParams(brackets, tuple(sol.t))
    terminal = steering_map(params, system, x0, flow_cfg)
    word = control_word(params)
    replayed = replay(word, system, x0, flow_cfg)
    return SteeringResult(
        target=target,
        t=sol.t,
        word=word,
        tau=word.total_time,
        terminal=terminal,
        error_norm=float(np.linalg.norm(terminal - target)),
        iterations=sol.iterations,
        converged=sol.converged,
        replay_error=float(np.linalg.norm(replayed - terminal)),
    )


# --- Hölder exponent ----------------------------------------------------------------------


@dataclass
class HolderFit:
    slope: float
    intercept: float
    slope_ci: tuple[float, float]
    table: list[dict]
    expected: float

    def to_dict(self) -> dict:
        return {
            "slope": self.slope,
            "intercept": self.intercept,
            "slope_ci": list(self.slope_ci),
            "expected_slope": self.expected,
            "table": self.table,
        }


def _sphere(rng: np.random.Generator, n: int, count: int) -> np.ndarray:
    d = rng.standard_normal((count, n))
    return d / np.linalg.norm(d, axis=1, keepdims=True)


def _steer_task(args) -> tuple[bool, float, float]:
    cert, system, target, cfg, flow_cfg = args
    try:
        r = steer(cert, system, target, cfg, flow_cfg)
    except (FlowError, np.linalg.LinAlgError):
        return False, math.nan, math.nan
    return r.converged, r.tau, r.error_norm


def fit_holder_exponent(
    certificate: Certificate,
    system: VectorFieldSystem,
    radii: Sequence[float],
    samples_per_radius: int,
    cfg: SteerConfig = SteerConfig(),
    flow_cfg: FlowConfig | None = None,
    seed: int = 0,
    rel_tol: float = 1e-2,
    min_converged: float = 0.8,
    directions: np.ndarray | None = None,
) -> HolderFit:
    """Regress log(max tau) on log(radius) over random targets on spheres.

    The steering tolerance at radius ``rho`` is ``min(cfg.tol, rel_tol*rho)``.
    ``directions`` (unit rows) replaces uniform sphere sampling when given.
    """
    if samples_per_radius < 1:
        raise ValueError("samples_per_radius must be >= 1")
    x0 = certificate.point
    rng = np.random.default_rng(seed)
    table = []
    for rho in radii:
        rho = float(rho)
        if directions is None:
            dirs = _sphere(rng, x0.size, samples_per_radius)
        else:
            d = np.atleast_2d(np.asarray(directions, dtype=float))
            d = d / np.linalg.norm(d, axis=1, keepdims=True)
            dirs = d[rng.integers(0, len(d), samples_per_radius)]
        step_cfg = replace(cfg, tol=min(cfg.tol, rel_tol * rho))
        tasks = [(certificate, system, x0 + rho * u, step_cfg, flow_cfg) for u in dirs]
        if cfg.workers > 1:
            with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
                results = list(pool.map(_steer_task, tasks))
        else:
            results = [_steer_task(t) for t in tasks]
        taus = [tau for ok, tau, _ in results if ok]
        frac = len(taus) / samples_per_radius
        table.append({"radius": rho, "converged": len(taus), "samples": samples_per_radius, "max_tau": max(taus) if taus else math.nan, "mean_tau": float(np.mean(taus)) if taus else math.nan})
        if frac < min_converged:
            raise TooFewConverged(f"only {len(taus)}/{samples_per_radius} targets converged at radius {rho:g}")
    logr = np.log([row["radius"] for row in table])
    logt = np.log([row["max_tau"] for row in table])
    reg = stats.linregress(logr, logt)
    if len(table) > 2:
        half = stats.t.ppf(0.975, len(table) - 2) * reg.stderr
    else:
        half = math.nan
    expected = 1.0 / max(b.length for b in certificate.brackets)
    return HolderFit(float(reg.slope), float(reg.intercept), (reg.slope - half, reg.slope + half), table, expected)


# --- reachable cloud -----------------------------------------------------------------------


def reachable_cloud(
    system: VectorFieldSystem,
    x,
    time_budget: float,
    word_count: int,
    max_segments: int,
    flow_cfg: FlowConfig | None = None,
    seed: int = 0,
) -> tuple[np.ndarray, int]:
    """Endpoints of random words of total duration ``time_budget``; returns (points, skipped)."""
    if time_budget < 0:
        raise ValueError("time_budget must be non-negative")
    if max_segments < 1:
        raise ValueError("max_segments must be >= 1")
    x = np.asarray(x, dtype=float)
    rng = np.random.default_rng(seed)
    from .multiflow import Segment

    points = []
    skipped = 0
    for _ in range(word_count):
        k = int(rng.integers(1, max_segments + 1))
        fields = rng.integers(1, len(system) + 1, k)
        signs = rng.choice([-1, 1], k)
        w = rng.exponential(size=k)
        durations = time_budget * w / w.sum()
        word = ControlWord(tuple(Segment(int(f), int(s), float(d)) for f, s, d in zip(fields, signs, durations)))
        try:
            points.append(replay(word, system, x, flow_cfg))
        except FlowError:
            skipped += 1
    return np.array(points).reshape(-1, x.size), skipped


# --- GDQ inequality --------------------------------------------------------------------------


def verify_gdq_inequality(
    b,
    system: VectorFieldSystem,
    x,
    poly: BracketPolytope,
    scales: Sequence[float],
    points_per_scale: int = 8,
    flow_cfg: FlowConfig | None = None,
    seed: int = 0,
) -> list[dict]:
    """Normalized residual ``inf_w |Sigma(t)(y) - y - t w| / |(t, y - x)|`` per scale.

    Grid points ``(t, y)`` lie on the sphere of radius ``s`` around ``(0, x)``
    in R^{1+n}; the same unit directions are reused at every scale.
    """
    bound = as_bound(b)
    x = np.asarray(x, dtype=float)
    rng = np.random.default_rng(seed)
    dirs = _sphere(rng, x.size + 1, points_per_scale)
    rows = []
    for s in scales:
        s = float(s)
        res = []
        for u in dirs:
            t, dy = s * u[0], s * u[1:]
            y = x + dy
            z = sigma(bound, system, t, y, flow_cfg)
            if t == 0.0:
                r = float(np.linalg.norm(z - y))
            else:
                r = abs(t) * poly.distance((z - y) / t)
            res.append(r / s)
        rows.append({"scale": s, "max_residual": max(res), "mean_residual": float(np.mean(res))})
    return rows
