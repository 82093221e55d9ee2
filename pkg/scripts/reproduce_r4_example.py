"""Set-valued bracket [X1,[X1,X2]] on example-r4 along the x2 = 0 hyperplane and off it,
then certification of the default and truncated families at the origin."""

import argparse
from dataclasses import dataclass

import numpy as np

from nschow.brackets import parse_field_bracket
from nschow.controllability import certify_bracket_generating
from nschow.fields import builtin_system
from nschow.lie_bracket import SamplingConfig, set_valued_bracket
from nschow.multiflow import bracket_family


@dataclass
class Config:
    seed: int = 1
    samples_per_radius: int = 200
    points: int = 5


def main(cfg: Config) -> None:
    r4 = builtin_system("example-r4")
    b = parse_field_bracket("[X1,[X1,X2]]")
    sampling = SamplingConfig(samples_per_radius=cfg.samples_per_radius, seed=cfg.seed)
    rng = np.random.default_rng(cfg.seed)
    print("x2      e3-range of [X1,[X1,X2]]")
    for x2 in [0.0] + list(rng.uniform(-0.5, 0.5, cfg.points - 1)):
        x = np.array([rng.uniform(-1, 1), x2, rng.uniform(-1, 1), rng.uniform(-1, 1)])
        poly = set_valued_bracket(b, r4, x, sampling)
        e3 = poly.vertices[:, 2]
        print(f"{x2:+.3f}  [{e3.min():.4f}, {e3.max():.4f}]  vertices={len(poly.vertices)}")
    for family in ("default5", "truncated4"):
        cert = certify_bracket_generating(bracket_family(family), r4, np.zeros(4), sampling)
        print(f"{family}: {cert.status} min_sigma={cert.min_sigma:.4f} beta={cert.beta:.2e}")


if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seed", type=int, default=Config.seed)
    ap.add_argument("--samples-per-radius", type=int, default=Config.samples_per_radius)
    ap.add_argument("--points", type=int, default=Config.points)
    a = ap.parse_args()
    main(Config(a.seed, a.samples_per_radius, a.points))
