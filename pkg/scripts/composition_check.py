"""Composed vs nested Volterra evaluation as the grid is refined."""

from dataclasses import dataclass
import time

import numpy as np

from _config import parse
from responsekit.acceptance import synthetic_kernel_sets
from responsekit.paths import make_path
from responsekit.response import compose_kernels, volterra_eval, volterra_eval_grid


@dataclass(frozen=True)
class Config:
    amplitude: float = 0.1
    grids: tuple = (16.0, 32.0, 64.0)


def main(cfg: Config):
    print("points,max_rel_err,seconds")
    for npts in (int(g) for g in cfg.grids):
        grid = np.linspace(0.0, 1.0, npts)
        F, G = synthetic_kernel_sets(grid)
        t0 = time.perf_counter()
        H = compose_kernels(F, G)
        secs = time.perf_counter() - t0
        g = make_path(grid, cfg.amplitude * np.sin(2 * np.pi * grid))
        inner = make_path(grid, volterra_eval_grid(G, g))
        rel = max(abs(volterra_eval(H, g, t) - volterra_eval(F, inner, t))
                  / abs(volterra_eval(F, inner, t)) for t in grid[npts // 4:])
        print(f"{npts},{rel:.3g},{secs:.2f}")


if __name__ == "__main__":
    main(parse(Config, __doc__))
