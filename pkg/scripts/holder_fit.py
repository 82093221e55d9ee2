"""Fit log(max tau) against log(distance) for the three built-in systems and print the slopes."""

import argparse
import json
from dataclasses import dataclass, field

import numpy as np

from nschow.controllability import certify_bracket_generating, fit_holder_exponent
from nschow.fields import builtin_system
from nschow.lie_bracket import SamplingConfig
from nschow.multiflow import bracket_family

CASES = {"example-r4": "default5", "translations-r2": "translations2", "heisenberg": "heisenberg3"}


@dataclass
class Config:
    radii: list[float] = field(default_factory=lambda: [1e-2, 3e-3, 1e-3, 3e-4])
    samples: int = 40
    seed: int = 8
    systems: list[str] = field(default_factory=lambda: list(CASES))
    out: str | None = None


def main(cfg: Config) -> None:
    results = {}
    for name in cfg.systems:
        system = builtin_system(name)
        x = np.zeros(system.dim)
        cert = certify_bracket_generating(bracket_family(CASES[name]), system, x, SamplingConfig(seed=cfg.seed))
        fit = fit_holder_exponent(cert, system, cfg.radii, cfg.samples, seed=cfg.seed)
        lo, hi = (float(v) for v in fit.slope_ci)
        print(f"{name:16s} slope={fit.slope:.4f} 95%CI=[{lo:.4f}, {hi:.4f}] expected={fit.expected:.4f}")
        results[name] = fit.to_dict()
    if cfg.out:
        with open(cfg.out, "w") as fh:
            json.dump(results, fh, indent=2, default=float)


if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--radii", default="1e-2,3e-3,1e-3,3e-4")
    ap.add_argument("--samples", type=int, default=Config.samples)
    ap.add_argument("--seed", type=int, default=Config.seed)
    ap.add_argument("--systems", default=",".join(CASES))
    ap.add_argument("--out")
    a = ap.parse_args()
    main(Config([float(r) for r in a.radii.split(",")], a.samples, a.seed, a.systems.split(","), a.out))
