"""Flows of locally Lipschitz vector fields by classical RK4.

Negative times integrate with a negative step, which is the same arithmetic
as integrating the negated field forward.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .fields import VectorField

__all__ = [
    "FlowConfig",
    "FlowError",
    "StepLimitExceeded",
    "NonFiniteState",
    "HorizonExceeded",
    "flow",
    "flow_inverse",
    "flow_tuple",
]

_EPS = 2.220446049250313e-16


class FlowError(RuntimeError):
    pass


class StepLimitExceeded(FlowError):
    pass


class NonFiniteState(FlowError):
    pass


class HorizonExceeded(FlowError):
    pass


@dataclass(frozen=True)
class FlowConfig:
    method: str = "rk4-adaptive"  # or "rk4"
    base_step: float = 1e-3
    error_target: float = 1e-10
    max_steps: int = 10_000_000
    horizon: float = math.inf

    def __post_init__(self) -> None:
        if self.method not in ("rk4", "rk4-adaptive"):
            raise ValueError(f"unknown method {self.method!r}")
        if not self.base_step > 0:
            raise ValueError("base_step must be positive")
        if not self.error_target > 0:
            raise ValueError("error_target must be positive")
        if self.max_steps < 1:
            raise ValueError("max_steps must be >= 1")


def _rk4(fn, x: tuple, t: float, n: int) -> tuple:
    h = t / n
    h2 = h / 2
    h6 = h / 6
    for _ in range(n):
        k1 = fn(x)
        k2 = fn(tuple(a + h2 * b for a, b in zip(x, k1)))
        k3 = fn(tuple(a + h2 * b for a, b in zip(x, k2)))
        k4 = fn(tuple(a + h * b for a, b in zip(x, k3)))
        x = tuple(a + h6 * (b + 2 * c + 2 * d + e) for a, b, c, d, e in zip(x, k1, k2, k3, k4))
        if not all(map(math.isfinite, x)):
            raise NonFiniteState(f"state left the finite range after integrating for t={t}")
    return x


def flow_tuple(f: VectorField, t: float, x: Sequence[float], cfg: FlowConfig) -> tuple[float, ...]:
    """``e^{t f}(x)`` on plain tuples."""
    x = tuple(float(c) for c in x)
    if t == 0.0:
        return x
    if abs(t) > cfg.horizon:
        raise HorizonExceeded(f"|t| = {abs(t):g} exceeds the configured horizon {cfg.horizon:g}")
    fn = f.fast
    n = max(1, math.ceil(abs(t) / cfg.base_step))
    if n > cfg.max_steps:
        raise StepLimitExceeded(f"{n} steps needed, limit is {cfg.max_steps}")
    coarse = _rk4(fn, x, t, n)
    if cfg.method == "rk4":
        return coarse
    while True:
        if 2 * n > cfg.max_steps:
            raise StepLimitExceeded(f"error target {cfg.error_target:g} not met within {cfg.max_steps} steps")
        fine = _rk4(fn, x, t, 2 * n)
        scale = max(1.0, max(abs(c) for c in fine))
        # roundoff floor so large states can still terminate
        target = max(cfg.error_target, 64 * _EPS * scale * math.sqrt(2 * n))
        if max(abs(a - b) for a, b in zip(coarse, fine)) < target:
            return fine
        coarse, n = fine, 2 * n


def flow(f: VectorField, t: float, x, cfg: FlowConfig | None = None) -> np.ndarray:
    return np.array(flow_tuple(f, float(t), x, cfg or FlowConfig()))


def flow_inverse(f: VectorField, t: float, x, cfg: FlowConfig | None = None) -> np.ndarray:
    return flow(f, -float(t), x, cfg)
