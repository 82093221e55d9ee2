"""Multi-flows, their one-parameter reparametrization, and control words."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .brackets import BoundBracket, FormalBracket, Leaf, as_bound, n_of_b, parse_field_bracket
from .fields import VectorFieldSystem
from .flow import FlowConfig, flow_tuple
from .polytope import BracketPolytope

__all__ = [
    "Segment",
    "ControlWord",
    "SteeringParams",
    "FAMILIES",
    "bracket_family",
    "psi",
    "psi_inverse",
    "sigma",
    "steering_map",
    "control_word",
    "replay",
    "tau",
    "root",
    "verify_asymptotic_estimate",
]

FAMILIES = {
    "default5": ("X1", "X2", "X3", "[X1,X2]", "[X1,[X1,X2]]"),
    "truncated4": ("X1", "X2", "X3", "[X1,X2]"),
    "heisenberg3": ("X1", "X2", "[X1,X2]"),
    "translations2": ("X1", "X2"),
}


def bracket_family(name_or_texts: str | Iterable[str]) -> tuple[BoundBracket, ...]:
    """A named family, or a comma-free list of field-notation bracket texts."""
    if isinstance(name_or_texts, str):
        if name_or_texts not in FAMILIES:
            raise KeyError(f"unknown family {name_or_texts!r}; choose from {sorted(FAMILIES)}")
        texts = FAMILIES[name_or_texts]
    else:
        texts = tuple(name_or_texts)
    return tuple(parse_field_bracket(t) for t in texts)


@dataclass(frozen=True)
class Segment:
    field: int
    sign: int
    duration: float

    def to_dict(self) -> dict:
        return {"field": self.field, "sign": self.sign, "duration": self.duration}


@dataclass(frozen=True)
class ControlWord:
    segments: tuple[Segment, ...]

    @property
    def total_time(self) -> float:
        return math.fsum(s.duration for s in self.segments)

    def __len__(self) -> int:
        return len(self.segments)

    def __add__(self, other: "ControlWord") -> "ControlWord":
        return ControlWord(self.segments + other.segments)

    def to_dict(self) -> dict:
        return {"segments": [s.to_dict() for s in self.segments], "total_time": self.total_time}


@dataclass(frozen=True)
class SteeringParams:
    brackets: tuple[BoundBracket, ...]
    t: tuple[float, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "brackets", tuple(as_bound(b) for b in self.brackets))
        object.__setattr__(self, "t", tuple(float(v) for v in self.t))
        if len(self.brackets) != len(self.t):
            raise ValueError(f"{len(self.brackets)} brackets but {len(self.t)} parameters")


def root(t: float, m: int) -> float:
    """``|t|^(1/m)`` computed as exp(log|t|/m), with root(0) = 0."""
    if t == 0.0:
        return 0.0
    return math.exp(math.log(abs(t)) / m)


# --- parametric route ---------------------------------------------------------------


def _psi(bound: BoundBracket, s: FormalBracket, ts: Sequence[float], x: tuple, system, cfg, inverse: bool) -> tuple:
    if isinstance(s, Leaf):
        f = system.field(bound.field_of(s.index))
        return flow_tuple(f, -ts[0] if inverse else ts[0], x, cfg)
    k = s.left.length
    t1, t2 = ts[:k], ts[k:]
    if not inverse:
        x = _psi(bound, s.left, t1, x, system, cfg, False)
        x = _psi(bound, s.right, t2, x, system, cfg, False)
        x = _psi(bound, s.left, t1, x, system, cfg, True)
        return _psi(bound, s.right, t2, x, system, cfg, True)
    x = _psi(bound, s.right, t2, x, system, cfg, False)
    x = _psi(bound, s.left, t1, x, system, cfg, False)
    x = _psi(bound, s.right, t2, x, system, cfg, True)
    return _psi(bound, s.left, t1, x, system, cfg, True)


def _check_times(bound: BoundBracket, tvec) -> tuple[float, ...]:
    ts = tuple(float(v) for v in np.atleast_1d(tvec))
    if len(ts) != bound.length:
        raise ValueError(f"bracket of length {bound.length} needs {bound.length} times, got {len(ts)}")
    return ts


def psi(b, system: VectorFieldSystem, tvec, x, cfg: FlowConfig | None = None) -> np.ndarray:
    """Multi-flow ``Psi_B(t)(x)``."""
    bound = as_bound(b)
    ts = _check_times(bound, tvec)
    return np.array(_psi(bound, bound.bracket, ts, tuple(float(c) for c in x), system, cfg or FlowConfig(), False))


def psi_inverse(b, system: VectorFieldSystem, tvec, x, cfg: FlowConfig | None = None) -> np.ndarray:
    bound = as_bound(b)
    ts = _check_times(bound, tvec)
    return np.array(_psi(bound, bound.bracket, ts, tuple(float(c) for c in x), system, cfg or FlowConfig(), True))


def _sigma(bound: BoundBracket, t: float, x: tuple, system, cfg) -> tuple:
    m = bound.length
    if t == 0.0:
        return x
    if m == 1:
        return flow_tuple(system.field(bound.fields[0]), t, x, cfg)
    s = root(t, m)
    if t > 0:
        return _psi(bound, bound.bracket, (s,) * m, x, system, cfg, False)
    if m % 2 == 1:
        return _psi(bound, bound.bracket, (-s,) * m, x, system, cfg, False)
    return _psi(bound, bound.bracket, (s,) * m, x, system, cfg, True)


def sigma(b, system: VectorFieldSystem, t: float, x, cfg: FlowConfig | None = None) -> np.ndarray:
    """Single-parameter map ``Sigma_B(t)(x)``."""
    bound = as_bound(b)
    return np.array(_sigma(bound, float(t), tuple(float(c) for c in x), system, cfg or FlowConfig()))


def steering_map(p: SteeringParams, system: VectorFieldSystem, x, cfg: FlowConfig | None = None) -> np.ndarray:
    cfg = cfg or FlowConfig()
    y = tuple(float(c) for c in x)
    for bound, t in zip(p.brackets, p.t):
        y = _sigma(bound, t, y, system, cfg)
    return np.array(y)


# --- symbolic route -------------------------------------------------------------------


def _expand(bound: BoundBracket, s: FormalBracket, sign: int, dur: float, inverse: bool) -> list[Segment]:
    if isinstance(s, Leaf):
        return [Segment(bound.field_of(s.index), -sign if inverse else sign, dur)]
    a, b = s.left, s.right
    if not inverse:
        order = ((a, False), (b, False), (a, True), (b, True))
    else:
        order = ((b, False), (a, False), (b, True), (a, True))
    out: list[Segment] = []
    for sub, inv in order:
        out.extend(_expand(bound, sub, sign, dur, inv))
    return out


def _sigma_word(bound: BoundBracket, t: float) -> list[Segment]:
    m = bound.length
    if m == 1:
        return [Segment(bound.fields[0], -1 if t < 0 else 1, abs(t))]
    s = root(t, m)
    if t >= 0:
        return _expand(bound, bound.bracket, 1, s, False)
    if m % 2 == 1:
        return _expand(bound, bound.bracket, -1, s, False)
    return _expand(bound, bound.bracket, 1, s, True)


def control_word(p: SteeringParams) -> ControlWord:
    """Expand a steering parameter into flow segments; zero durations are kept."""
    segs: list[Segment] = []
    for bound, t in zip(p.brackets, p.t):
        segs.extend(_sigma_word(bound, t))
    return ControlWord(tuple(segs))


def replay(word: ControlWord, system: VectorFieldSystem, x, cfg: FlowConfig | None = None) -> np.ndarray:
    """Run a word through the flow engine, skipping zero-duration segments."""
    cfg = cfg or FlowConfig()
    y = tuple(float(c) for c in x)
    for seg in word.segments:
        if seg.duration == 0.0:
            continue
        y = flow_tuple(system.field(seg.field), seg.sign * seg.duration, y, cfg)
    return np.array(y)


def tau(brackets: Sequence, t: Sequence[float]) -> float:
    """Closed-form total time ``sum n(B_i) |t_i|^(1/Length(B_i))``."""
    return math.fsum(n_of_b(as_bound(b).bracket) * root(float(ti), as_bound(b).length) for b, ti in zip(brackets, t))


# --- asymptotic estimate ----------------------------------------------------------------


@dataclass
class AsymptoticReport:
    bracket: str
    point: list[float]
    rows: list[tuple[float, float]] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"bracket": self.bracket, "point": self.point, "rows": [{"t": t, "e": e} for t, e in self.rows]}

    def to_csv(self) -> str:
        return "t,e\n" + "".join(f"{t!r},{e!r}\n" for t, e in self.rows)


def verify_asymptotic_estimate(
    b,
    system: VectorFieldSystem,
    x,
    tgrid: Sequence[float],
    poly: BracketPolytope,
    cfg: FlowConfig | None = None,
) -> AsymptoticReport:
    """``e(t) = dist(Psi_B(t,...,t)(x) - x, t^m P) / t^m`` for each ``t > 0``."""
    bound = as_bound(b)
    x = np.asarray(x, dtype=float)
    m = bound.length
    report = AsymptoticReport(bound.field_text(), x.tolist())
    for t in tgrid:
        t = float(t)
        if t <= 0:
            raise ValueError("tgrid must be positive")
        y = psi(bound, system, (t,) * m, x, cfg)
        scale = t**m
        report.rows.append((t, poly.distance((y - x) / scale)))
    return report
