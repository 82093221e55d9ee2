"""Sample endpoints of random control words with a fixed time budget and report how the
cloud's extent per coordinate scales with the budget."""

import argparse
from dataclasses import dataclass, field

import numpy as np

from nschow.controllability import reachable_cloud
from nschow.fields import builtin_system


@dataclass
class Config:
    system: str = "example-r4"
    budgets: list[float] = field(default_factory=lambda: [0.4, 0.2, 0.1, 0.05])
    words: int = 500
    max_segments: int = 24
    seed: int = 0
    out: str | None = None


def main(cfg: Config) -> None:
    system = builtin_system(cfg.system)
    x = np.zeros(system.dim)
    print("budget   " + "  ".join(f"extent_x{i + 1:<3d}" for i in range(system.dim)))
    for budget in cfg.budgets:
        pts, skipped = reachable_cloud(system, x, budget, cfg.words, cfg.max_segments, seed=cfg.seed)
        extent = np.abs(pts - x).max(axis=0)
        print(f"{budget:<8g} " + "  ".join(f"{e:11.3e}" for e in extent) + (f"  skipped={skipped}" if skipped else ""))
        if cfg.out:
            np.savetxt(f"{cfg.out}_{budget:g}.csv", pts, delimiter=",")


if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--system", default=Config.system)
    ap.add_argument("--budgets", default="0.4,0.2,0.1,0.05")
    ap.add_argument("--words", type=int, default=Config.words)
    ap.add_argument("--max-segments", type=int, default=Config.max_segments)
    ap.add_argument("--seed", type=int, default=Config.seed)
    ap.add_argument("--out", help="prefix for per-budget CSV files")
    a = ap.parse_args()
    main(Config(a.system, [float(b) for b in a.budgets.split(",")], a.words, a.max_segments, a.seed, a.out))
