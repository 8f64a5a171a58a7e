"""Weak error of Euler-Maruyama on the scalar OU mean as the step shrinks."""

from dataclasses import dataclass
import math

import numpy as np

from _config import parse
from responsekit.srnn import InitialState, SrnnParams, output_functional


@dataclass(frozen=True)
class Config:
    seed: int = 0
    sigma: float = 0.3
    samples: int = 100_000
    steps: tuple = (0.1, 0.05, 0.025, 0.0125)


def main(cfg: Config):
    p = SrnnParams.scalar_ou(1.0, cfg.sigma, init=InitialState.point([1.0]))
    errs = []
    print("dt,abs_err,stderr")
    for dt in cfg.steps:
        est, se = output_functional(p, None, 1.0, dt, cfg.samples, cfg.seed)
        errs.append(abs(est - math.exp(-1.0)))
        print(f"{dt:g},{errs[-1]:.3g},{se:.2g}")
    print(f"slope,{np.polyfit(np.log(cfg.steps), np.log(errs), 1)[0]:.3f}")


if __name__ == "__main__":
    main(parse(Config, __doc__))
